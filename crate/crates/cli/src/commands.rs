//! `bounds`, `implicit-reg`, `autoencoder` and `verify`.

use std::time::Instant;

use serde_json::{json, Map, Value};

use fa_core::acceptance::{run_all, AcceptanceContext, Outcome};
use fa_core::cubic::{discriminant, solve_fa_cubic, CubicRoots, SortedRoots};
use fa_core::implicit_reg::{
    anti_regularization_ordering, delta_scaling_run, detect_transition, k0_ordering, plateau_limit, plateau_values,
    threshold_time, transition_width,
};
use fa_core::matrix_fa::autoencoder_experiment;
use fa_core::scalar_continuous::zero_crossing_time;
use fa_core::scalar_discrete::{deep_budget, deep_budget_at, euler_budget, euler_budget_at, midpoint2_budget, midpoint2_budget_at};
use fa_core::{AutoencoderConfig, DeepParams, Side};

use crate::output::{manifest, OutDir};
use crate::settings::{layered, merge, ConfigFile};
use crate::{required, AutoencoderArgs, BoundScheme, Failure, ImplicitArgs, VerifyArgs};

pub struct Context {
    pub out: OutDir,
    pub seed: Option<u64>,
    pub config: ConfigFile,
}

/// Prints to stdout, ignoring a closed pipe.
pub fn emit(text: &str) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout().lock(), "{text}");
}

fn print_json(v: &Value) {
    emit(&serde_json::to_string_pretty(v).expect("serializable"));
}

pub fn bounds(ctx: &Context, scheme: BoundScheme) -> Result<(), Failure> {
    let budget = match scheme {
        BoundScheme::Euler(flags) => {
            let a = layered(&ctx.config, "bounds.euler", &flags)?;
            let (d, lambda) = (required(a.d, "d")?, required(a.lambda, "lambda")?);
            match a.eta {
                Some(eta) => euler_budget_at(d, lambda, eta)?,
                None => euler_budget(d, lambda)?,
            }
        }
        BoundScheme::Midpoint(flags) => {
            let a = layered(&ctx.config, "bounds.midpoint", &flags)?;
            let (d, lambda) = (required(a.d, "d")?, required(a.lambda, "lambda")?);
            match a.eta {
                Some(eta) => midpoint2_budget_at(d, lambda, eta)?,
                None => midpoint2_budget(d, lambda)?,
            }
        }
        BoundScheme::MidpointDeep(flags) => {
            let a = layered(&ctx.config, "bounds.midpoint-deep", &flags)?;
            let d = required(a.d, "d")?;
            if let Some(l) = a.depth {
                if l != d.len() + 1 {
                    return Err(Failure::invalid(format!("--L {l} needs {} FA constants, got {}", l - 1, d.len())));
                }
            }
            let params = DeepParams::new(a.lambda.unwrap_or(1.0), d, 0.0)?;
            match a.eta {
                Some(eta) => deep_budget_at(&params, eta)?,
                None => deep_budget(&params)?,
            }
        }
    };
    print_json(&serde_json::to_value(&budget).map_err(|e| Failure::invalid(e.to_string()))?);
    Ok(())
}

fn parse_side(s: Option<&str>) -> Result<Side, Failure> {
    match s.unwrap_or("above") {
        "above" => Ok(Side::Above),
        "below" => Ok(Side::Below),
        other => Err(Failure::invalid(format!("--side must be 'above' or 'below', got '{other}'"))),
    }
}

fn roots_summary(out: &OutDir, stem: &str, roots: &SortedRoots, delta: f64, side: Side, dt: Option<f64>) -> Result<Value, Failure> {
    let traj = delta_scaling_run(roots, delta, side, dt)?;
    let csv = out.write(&format!("{stem}.csv"), traj.to_csv_string()?.as_bytes())?;
    let (alpha, alpha_tilde) = plateau_values(roots);
    Ok(json!({
        "roots": roots.as_array(),
        "csv": csv.file_name().map(|s| s.to_string_lossy().into_owned()),
        "t_formula": threshold_time(roots),
        "t_detected": detect_transition(&traj, roots, side),
        "transition_width": transition_width(&traj, roots, side),
        "alpha": alpha,
        "alpha_tilde": alpha_tilde,
        "plateau_limit": plateau_limit(roots, side),
    }))
}

pub fn implicit_reg(ctx: &Context, flags: ImplicitArgs) -> Result<(), Failure> {
    let a = layered(&ctx.config, "implicit-reg", &flags)?;
    let delta = a.delta.unwrap_or(30.0);
    let side = parse_side(a.side.as_deref())?;
    let body = if let Some(r) = &a.roots {
        let [r1, r2, r3] = r[..] else {
            return Err(Failure::invalid(format!("--roots needs three values, got {}", r.len())));
        };
        let roots = SortedRoots::new(r1, r2, r3)?;
        let summary = roots_summary(&ctx.out, "implicit-reg", &roots, delta, side, a.dt)?;
        json!({ "delta": delta, "side": side, "components": [summary] })
    } else if a.k0 {
        let d = required(a.d, "d")?;
        let theta0 = required(a.theta0, "theta0")?;
        let lambdas = required(a.lambdas, "lambdas")?;
        let rep = k0_ordering(&lambdas, d, theta0)?;
        let simulated = lambdas.iter().map(|&l| zero_crossing_time(theta0, d, l, 1e-4)).collect::<Result<Vec<_>, _>>()?;
        json!({ "d": d, "theta0": theta0, "ordering": rep, "t0_simulated": simulated })
    } else {
        let d = required(a.d, "d")?;
        let k = required(a.k, "k")?;
        let lambdas = required(a.lambdas, "lambdas")?;
        let mut comps = Vec::new();
        for (i, &lam) in lambdas.iter().enumerate() {
            let disc = discriminant(d, k, lam)?;
            let roots = match solve_fa_cubic(d, k, lam)? {
                CubicRoots::ThreeDistinct(s) => s,
                _ => {
                    return Err(Failure::invalid(format!(
                        "component λ = {lam} has discriminant {:.4e} ≤ 0: no plateau",
                        disc.value
                    )))
                }
            };
            let mut s = roots_summary(&ctx.out, &format!("implicit-reg-{i}"), &roots, delta, side, a.dt)?;
            s["lambda"] = json!(lam);
            comps.push(s);
        }
        let rep = anti_regularization_ordering(&lambdas, k, d)?;
        json!({ "d": d, "k": k, "delta": delta, "side": side, "components": comps, "ordering": rep })
    };
    let mut m = manifest("implicit-reg", body);
    m["seed"] = json!(ctx.seed);
    ctx.out.write_json("implicit-reg.json", &m)?;
    print_json(&m);
    Ok(())
}

pub fn autoencoder(ctx: &Context, mut flags: AutoencoderArgs) -> Result<(), Failure> {
    if flags.data_seed.is_none() {
        flags.data_seed = ctx.seed;
    }
    let base = match serde_json::to_value(AutoencoderConfig::default()) {
        Ok(Value::Object(m)) => m,
        _ => unreachable!("config serializes to an object"),
    };
    let cfg: AutoencoderConfig = merge(base, ctx.config.section("autoencoder"), &flags, "autoencoder")?;
    cfg.validate()?;
    let seeds = cfg.feedback_seeds();
    let start = Instant::now();
    let metrics = autoencoder_experiment(&cfg, &seeds)?;
    let elapsed = start.elapsed().as_secs_f64();
    let mut csv = Vec::new();
    metrics.write_csv(&mut csv)?;
    let csv_path = ctx.out.write("autoencoder.csv", &csv)?;
    let last = metrics.steps.len() - 1;
    let mut finals = Map::new();
    for (name, s) in metrics.series() {
        finals.insert(
            name.into(),
            json!({ "initial": s.mean[0], "mean": s.mean[last], "std": s.std[last],
                    "band": [s.lower_band()[last], s.upper_band()[last]] }),
        );
    }
    let m = manifest(
        "autoencoder",
        json!({
            "config": cfg.resolved(),
            "seeds": seeds,
            "data_seed": cfg.data_seed,
            "csv": csv_path.file_name().map(|s| s.to_string_lossy().into_owned()),
            "final": finals,
            "elapsed_seconds": elapsed,
        }),
    );
    let json_path = ctx.out.write_json("autoencoder.json", &m)?;
    emit(&csv_path.display().to_string());
    emit(&json_path.display().to_string());
    Ok(())
}

pub fn verify(args: VerifyArgs) -> Result<(), Failure> {
    let ctx = AcceptanceContext { rate_scale: if args.inject_wrong_rate { 1.5 } else { 1.0 } };
    let results = run_all(args.filter.as_deref(), &ctx);
    if results.is_empty() {
        return Err(Failure::invalid(format!("no criterion matches '{}'", args.filter.unwrap_or_default())));
    }
    for r in &results {
        emit(&r.to_string());
    }
    let failed: Vec<String> = results.iter().filter(|r| !r.passed()).map(|r| format!("C{:02}", r.id)).collect();
    let notes = results.iter().filter(|r| r.outcome == Outcome::Note).count();
    emit(&format!("{} passed, {} failed, {} notes", results.len() - failed.len() - notes, failed.len(), notes));
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: 1, message: format!("failed: {}", failed.join(", ")) })
    }
}
