//! `simulate` subcommands.

use serde_json::{json, Value};

use fa_core::analysis::{auto_window, fit_exponential, fit_geometric, fit_powerlaw, range_window, wide_window, RateFit};
use fa_core::cubic::solve_fa_cubic;
use fa_core::deep_continuous::{
    check_power_relation, integrate_deep_full_sampled, integrate_deep_reduced_sampled, layer_constants,
};
use fa_core::scalar_continuous::{classify_case, integrate_scalar_sampled, theoretical_rate};
use fa_core::scalar_discrete::{
    deep_budget_at, euler_budget_at, euler_eta_max, euler_run_sampled, midpoint2_budget_at, midpoint2_eta_max,
    midpoint2_run, midpoint_deep_run,
};
use fa_core::{ComponentParams, DecayRate, DeepParams, Trajectory};

use crate::commands::{emit, Context};
use crate::output::manifest;
use crate::settings::{layered, Eta};
use crate::{required, Failure, SimScheme};

fn fit_json(fit: fa_core::Result<RateFit>) -> Value {
    match fit {
        Ok(f) => serde_json::to_value(f).unwrap_or(Value::Null),
        Err(e) => json!({ "error": e.to_string() }),
    }
}

fn errors(traj: &Trajectory) -> Vec<f64> {
    traj.column("abs_error").expect("trajectories carry abs_error")
}

/// Geometric fit on the standard window, or the wide one when too few samples qualify.
fn geometric(traj: &Trajectory) -> (fa_core::Result<RateFit>, &'static str) {
    let e = errors(traj);
    match auto_window(&e) {
        Ok(w) => (fit_geometric(traj.times(), &e, w), "standard"),
        Err(_) => (wide_window(&e).and_then(|w| fit_geometric(traj.times(), &e, w)), "wide"),
    }
}

fn write(ctx: &Context, stem: &str, traj: &Trajectory, body: Value) -> Result<(), Failure> {
    let csv = traj.to_csv_string()?;
    let csv_path = ctx.out.write(&format!("{stem}.csv"), csv.as_bytes())?;
    let mut m = manifest(&format!("simulate {stem}"), body);
    m["seed"] = json!(ctx.seed);
    m["rows"] = json!(traj.len());
    m["csv"] = json!(csv_path.file_name().map(|s| s.to_string_lossy().into_owned()));
    let json_path = ctx.out.write_json(&format!("{stem}.json"), &m)?;
    emit(&csv_path.display().to_string());
    emit(&json_path.display().to_string());
    Ok(())
}

pub fn run(ctx: &Context, scheme: SimScheme) -> Result<(), Failure> {
    match scheme {
        SimScheme::ScalarOde(flags) => {
            let a = layered(&ctx.config, "simulate.scalar-ode", &flags)?;
            let (d, lambda) = (required(a.d, "d")?, required(a.lambda, "lambda")?);
            let theta0 = a.theta0.unwrap_or(0.0);
            let params = match (a.scheme_k0, a.theta2_0) {
                (true, Some(_)) => return Err(Failure::invalid("--scheme-k0 fixes θ₂(0); drop --theta2-0")),
                (true, None) => ComponentParams::aligned(lambda, d, theta0)?,
                (false, t2) => ComponentParams::new(lambda, d, theta0, t2.unwrap_or(0.0))?,
            };
            let (t_end, dt) = (a.t_end.unwrap_or(10.0), a.dt.unwrap_or(1e-3));
            let traj = integrate_scalar_sampled(&params, t_end, dt, a.every.unwrap_or(1))?;
            let rate = theoretical_rate(&params);
            let e = errors(&traj);
            let fit = match &rate {
                Ok(DecayRate::PowerLaw { .. }) => {
                    range_window(traj.times(), t_end / 100.0, t_end).and_then(|w| fit_powerlaw(traj.times(), &e, w))
                }
                _ => auto_window(&e).and_then(|w| fit_exponential(traj.times(), &e, w)),
            };
            let (_, last) = traj.last().expect("nonempty");
            let body = json!({
                "params": { "d": d, "lambda": lambda, "theta1_0": params.theta1_0(), "theta2_0": params.theta2_0(),
                            "k": params.k(), "t_end": t_end, "dt": dt },
                "case": format!("{:?}", classify_case(&params)),
                "roots": solve_fa_cubic(d, params.k(), lambda).map(|r| r.roots()).ok(),
                "theoretical_rate": rate.as_ref().ok(),
                "fitted_rate": fit_json(fit),
                "final": { "theta1": last[0], "theta2": last[1], "product": last[2], "abs_error": last[3] },
            });
            write(ctx, "scalar-ode", &traj, body)
        }
        SimScheme::DeepOde(flags) => {
            let a = layered(&ctx.config, "simulate.deep-ode", &flags)?;
            let params = DeepParams::new(required(a.lambda, "lambda")?, required(a.d, "d")?, a.theta0.unwrap_or(0.0))?;
            let (t_end, dt, every) = (a.t_end.unwrap_or(10.0), a.dt.unwrap_or(1e-3), a.every.unwrap_or(1));
            let traj = if a.reduced {
                integrate_deep_reduced_sampled(&params, t_end, dt, every)?
            } else {
                integrate_deep_full_sampled(&params, t_end, dt, every)?
            };
            let consts = layer_constants(&params);
            let e = errors(&traj);
            let fit = auto_window(&e).and_then(|w| fit_exponential(traj.times(), &e, w));
            let body = json!({
                "params": { "lambda": params.lambda(), "d": params.fa_constants(), "depth": params.depth(),
                            "theta1_0": params.theta1_0(), "t_end": t_end, "dt": dt, "reduced": a.reduced },
                "layer_constants": consts,
                "fixed_point": consts.fixed_point(params.lambda()),
                "power_relation_deviation": check_power_relation(&traj, &consts)?,
                "fitted_rate": fit_json(fit),
                "final_abs_error": e.last(),
            });
            write(ctx, "deep-ode", &traj, body)
        }
        SimScheme::Euler(flags) => {
            let a = layered(&ctx.config, "simulate.euler", &flags)?;
            let (d, lambda) = (required(a.d, "d")?, required(a.lambda, "lambda")?);
            let eta_req = a.eta.unwrap_or(Eta::Auto);
            let eta = eta_req.resolve(euler_eta_max(d, lambda)?);
            let steps = a.steps.unwrap_or(1000);
            let run = euler_run_sampled(d, lambda, eta, steps, a.every.unwrap_or(1))?;
            let budget = euler_budget_at(d, lambda, eta).ok();
            let body = json!({
                "params": { "d": d, "lambda": lambda, "eta": eta, "eta_requested": eta_req.to_string(), "steps": steps },
                "budget": budget,
                "within_budget": budget.as_ref().map(|b| eta < b.eta_max),
                "region_violation": run.region_violation,
                "fitted_rate": fit_json(geometric(&run.trajectory).0),
                "fit_window": geometric(&run.trajectory).1,
                "final": run.final_state,
            });
            write(ctx, "euler", &run.trajectory, body)
        }
        SimScheme::Midpoint(flags) => {
            let a = layered(&ctx.config, "simulate.midpoint", &flags)?;
            let (d, lambda) = (required(a.d, "d")?, required(a.lambda, "lambda")?);
            let eta_req = a.eta.unwrap_or(Eta::Auto);
            let eta = eta_req.resolve(midpoint2_eta_max(d, lambda)?);
            let steps = a.steps.unwrap_or(1000);
            let traj = midpoint2_run(d, lambda, eta, steps)?;
            let budget = midpoint2_budget_at(d, lambda, eta)?;
            let (fit, window_rule) = geometric(&traj);
            let within = fit.as_ref().ok().map(|f| f.rate <= budget.q_theory + 0.02);
            let body = json!({
                "params": { "d": d, "lambda": lambda, "eta": eta, "eta_requested": eta_req.to_string(), "steps": steps },
                "budget": budget,
                "fitted_rate": fit_json(fit),
                "fit_window": window_rule,
                "q_fit_within_q_theory_plus_0.02": within,
            });
            write(ctx, "midpoint", &traj, body)
        }
        SimScheme::MidpointDeep(flags) => {
            let a = layered(&ctx.config, "simulate.midpoint-deep", &flags)?;
            let params = DeepParams::new(required(a.lambda, "lambda")?, required(a.d, "d")?, 0.0)?;
            let eta_req = a.eta.unwrap_or(Eta::Auto);
            let eta = eta_req.resolve(deep_budget_at(&params, 1.0)?.eta_max);
            let steps = a.steps.unwrap_or(1000);
            let traj = midpoint_deep_run(&params, eta, steps)?;
            let budget = deep_budget_at(&params, eta)?;
            let body = json!({
                "params": { "lambda": params.lambda(), "d": params.fa_constants(), "depth": params.depth(),
                            "eta": eta, "eta_requested": eta_req.to_string(), "steps": steps },
                "budget": budget,
                "fitted_rate": fit_json(geometric(&traj).0),
                "fit_window": geometric(&traj).1,
            });
            write(ctx, "midpoint-deep", &traj, body)
        }
    }
}
