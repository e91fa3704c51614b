//! Euler and midpoint discretizations of the scalar FA system, with step-size budgets.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cubic::{ell_of_s, s_star};
use crate::deep_continuous::{deep_columns, DeepParams};
use crate::error::{guard, nonnegative, positive, Error, Result};
use crate::trajectory::{Scheme, Trajectory, TrajectoryMeta};

/// Fraction of `eta_max` used when no step size is given.
pub const DEFAULT_ETA_FRACTION: f64 = 0.9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EulerState {
    pub x: f64,
    pub y: f64,
    pub s: f64,
    pub t: usize,
}

impl EulerState {
    pub fn zero() -> Self {
        Self { x: 0.0, y: 0.0, s: 0.0, t: 0 }
    }

    /// One forward-Euler step of θ̇₁ = d(λ − θ₂θ₁), θ̇₂ = (λ − θ₂θ₁)θ₁, accumulating S.
    pub fn step(&self, d: f64, lambda: f64, eta: f64) -> Self {
        let e = lambda - self.x * self.y;
        let x = self.x + eta * d * e;
        let y = self.y + eta * self.x * e;
        let dx = x - self.x;
        Self { x, y, s: self.s + dx * dx, t: self.t + 1 }
    }
}

/// P(x, S) = 2dλ − x³ + x·S.
pub fn region_p(d: f64, lambda: f64, x: f64, s: f64) -> f64 {
    2.0 * d * lambda - x * x * x + x * s
}

/// max of P over {0 ≤ S ≤ x, P ≥ 0}; attained on S = x at x = 2/3.
pub fn region_max_p(d: f64, lambda: f64) -> Result<f64> {
    Ok(2.0 * positive(d, "d")? * positive(lambda, "lambda")? + 4.0 / 27.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum RegionViolationKind {
    /// S_t > x_t
    SumAboveIterate,
    /// P(x_t, S_t) < 0
    NegativeP,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionViolation {
    pub step: usize,
    pub kind: RegionViolationKind,
}

const REGION_SLACK: f64 = 1e-12;

pub fn region_violation(d: f64, lambda: f64, st: &EulerState) -> Option<RegionViolationKind> {
    if st.s > st.x + REGION_SLACK {
        Some(RegionViolationKind::SumAboveIterate)
    } else if region_p(d, lambda, st.x, st.s) < -REGION_SLACK {
        Some(RegionViolationKind::NegativeP)
    } else {
        None
    }
}

#[derive(Clone, Debug)]
pub struct EulerRun {
    pub trajectory: Trajectory,
    pub final_state: EulerState,
    /// First step at which the iterate left the invariant region.
    pub region_violation: Option<RegionViolation>,
}

pub const EULER_COLUMNS: [&str; 6] = ["x", "y", "s", "p", "product", "abs_error"];

pub fn euler_run(d: f64, lambda: f64, eta: f64, steps: usize) -> Result<EulerRun> {
    euler_run_sampled(d, lambda, eta, steps, 1)
}

/// Forward Euler from x₀ = y₀ = S₀ = 0, recording every `every`-th step and the last.
pub fn euler_run_sampled(d: f64, lambda: f64, eta: f64, steps: usize, every: usize) -> Result<EulerRun> {
    positive(d, "d")?;
    positive(lambda, "lambda")?;
    nonnegative(eta, "eta")?;
    let every = every.max(1);
    let meta = TrajectoryMeta {
        scheme: Scheme::Euler,
        step: eta,
        params: json!({ "d": d, "lambda": lambda, "eta": eta, "steps": steps }),
        seed: None,
    };
    let cols = EULER_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut traj = Trajectory::with_capacity("t", cols, meta, steps / every + 2);
    let mut st = EulerState::zero();
    let mut violation = None;
    let record = |traj: &mut Trajectory, st: &EulerState| {
        let prod = st.x * st.y;
        traj.push(st.t as f64, &[st.x, st.y, st.s, region_p(d, lambda, st.x, st.s), prod, (prod - lambda).abs()])
    };
    record(&mut traj, &st)?;
    for _ in 0..steps {
        st = st.step(d, lambda, eta);
        guard(st.t as f64, &[st.x, st.y, st.s])?;
        if violation.is_none() {
            violation = region_violation(d, lambda, &st).map(|kind| RegionViolation { step: st.t, kind });
        }
        if st.t % every == 0 || st.t == steps {
            record(&mut traj, &st)?;
        }
    }
    Ok(EulerRun { trajectory: traj, final_state: st, region_violation: violation })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BudgetScheme {
    Euler,
    Midpoint2,
    MidpointDeep,
}

/// Admissible step size and the rate constants q(η) = 1 − ηM + η²M̃.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSizeBudget {
    pub scheme: BudgetScheme,
    pub eta_max: f64,
    /// Step size at which `q_theory` and the run-dependent constants were evaluated.
    pub eta: f64,
    pub s_star: Option<f64>,
    pub max_p: Option<f64>,
    pub ell_inf: Option<f64>,
    pub m: f64,
    pub c_inf: f64,
    pub m_tilde: f64,
    pub q_theory: f64,
    /// Worst per-step contraction along the midpoint iteration (midpoint schemes).
    pub q_guaranteed: Option<f64>,
    /// Contraction of the linearized Euler map at its limit.
    pub q_asymptotic: Option<f64>,
    /// `ell_inf` came from a run that had not converged.
    pub provisional: bool,
}

impl StepSizeBudget {
    pub fn q_at(&self, eta: f64) -> f64 {
        1.0 - eta * self.m + eta * eta * self.m_tilde
    }
}

/// min{2/(3(S*+1)²), 2/max P}.
pub fn euler_eta_max(d: f64, lambda: f64) -> Result<f64> {
    let s = s_star(d, lambda)?;
    let max_p = region_max_p(d, lambda)?;
    Ok((2.0 / (3.0 * (s + 1.0).powi(2))).min(2.0 / max_p))
}

pub fn euler_budget(d: f64, lambda: f64) -> Result<StepSizeBudget> {
    euler_budget_at(d, lambda, DEFAULT_ETA_FRACTION * euler_eta_max(d, lambda)?)
}

const LIMIT_MAX_STEPS: usize = 10_000_000;

/// Runs Euler at `eta` until x stops moving; returns (S_final, converged).
fn euler_limit_sum(d: f64, lambda: f64, eta: f64) -> Result<(f64, bool)> {
    let mut st = EulerState::zero();
    let mut quiet = 0;
    for _ in 0..LIMIT_MAX_STEPS {
        let next = st.step(d, lambda, eta);
        guard(next.t as f64, &[next.x, next.y, next.s])?;
        if (next.x - st.x).abs() <= 4.0 * f64::EPSILON * next.x.abs() {
            quiet += 1;
            if quiet >= 10 {
                return Ok((next.s, true));
            }
        } else {
            quiet = 0;
        }
        st = next;
    }
    Ok((st.s, false))
}

/// Euler budget with M, C_∞, M̃ evaluated from the limit of a run at `eta`.
pub fn euler_budget_at(d: f64, lambda: f64, eta: f64) -> Result<StepSizeBudget> {
    positive(eta, "eta")?;
    let s = s_star(d, lambda)?;
    let max_p = region_max_p(d, lambda)?;
    let eta_max = euler_eta_max(d, lambda)?;
    let (s_inf, converged) = euler_limit_sum(d, lambda, eta)?;
    let ell = ell_of_s(s_inf.max(0.0), d, lambda)?;
    let c = 2.0 * d * lambda;
    let c23 = c.powf(2.0 / 3.0);
    let m = (s * s + s * ell + c23) / 2.0;
    let c_inf = ell / (2.0 * c23 + c / ell);
    let m_tilde = 2.0 * ell * m * m * c_inf;
    Ok(StepSizeBudget {
        scheme: BudgetScheme::Euler,
        eta_max,
        eta,
        s_star: Some(s),
        max_p: Some(max_p),
        ell_inf: Some(ell),
        m,
        c_inf,
        m_tilde,
        q_theory: 1.0 - eta * m + eta * eta * m_tilde,
        q_guaranteed: None,
        q_asymptotic: Some(1.0 - 0.5 * eta * (2.0 * ell * ell + c / ell)),
        provisional: !converged,
    })
}

pub const MIDPOINT_COLUMNS: [&str; 5] = ["x", "y", "product", "abs_error", "bound"];

/// Midpoint scheme x' = x + ηd(λ − xy), y' = y + (η/2)(λ − xy)(x' + x) from zero.
/// The `bound` column is NaN when η is outside the budget.
pub fn midpoint2_run(d: f64, lambda: f64, eta: f64, steps: usize) -> Result<Trajectory> {
    positive(d, "d")?;
    positive(lambda, "lambda")?;
    nonnegative(eta, "eta")?;
    let meta = TrajectoryMeta {
        scheme: Scheme::Midpoint,
        step: eta,
        params: json!({ "d": d, "lambda": lambda, "eta": eta, "steps": steps }),
        seed: None,
    };
    let cols = MIDPOINT_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut traj = Trajectory::with_capacity("t", cols, meta, steps + 1);
    let (mut x, mut y) = (0.0f64, 0.0f64);
    for t in 0..=steps {
        if t > 0 {
            let e = lambda - x * y;
            let xn = x + eta * d * e;
            y += 0.5 * eta * e * (xn + x);
            x = xn;
            guard(t as f64, &[x, y])?;
        }
        let prod = x * y;
        let bound = midpoint2_error_bound(t, d, lambda, eta).unwrap_or(f64::NAN);
        traj.push(t as f64, &[x, y, prod, (prod - lambda).abs(), bound])?;
    }
    Ok(traj)
}

pub fn midpoint2_eta_max(d: f64, lambda: f64) -> Result<f64> {
    let c = 2.0 * positive(d, "d")? * positive(lambda, "lambda")?;
    Ok(2.0 / (3.0 * c.powf(2.0 / 3.0)))
}

pub fn midpoint2_budget(d: f64, lambda: f64) -> Result<StepSizeBudget> {
    midpoint2_budget_at(d, lambda, DEFAULT_ETA_FRACTION * midpoint2_eta_max(d, lambda)?)
}

pub fn midpoint2_budget_at(d: f64, lambda: f64, eta: f64) -> Result<StepSizeBudget> {
    positive(eta, "eta")?;
    let eta_max = midpoint2_eta_max(d, lambda)?;
    let r2 = (2.0 * d * lambda).powf(2.0 / 3.0);
    let m = 1.5 * r2;
    Ok(StepSizeBudget {
        scheme: BudgetScheme::Midpoint2,
        eta_max,
        eta,
        s_star: None,
        max_p: None,
        ell_inf: None,
        m,
        c_inf: 0.0,
        m_tilde: 0.0,
        q_theory: 1.0 - eta * m,
        q_guaranteed: Some(1.0 - 0.5 * eta * r2),
        q_asymptotic: None,
        provisional: false,
    })
}

/// 3λ(1 − (3η/2)(2dλ)^{2/3})^t.
pub fn midpoint2_error_bound(t: usize, d: f64, lambda: f64, eta: f64) -> Result<f64> {
    let eta_max = midpoint2_eta_max(d, lambda)?;
    if !(eta < eta_max) {
        return Err(Error::InvalidParameter(format!("eta = {eta} is not below eta_max = {eta_max}")));
    }
    let q = 1.0 - 1.5 * eta * (2.0 * d * lambda).powf(2.0 / 3.0);
    Ok(3.0 * lambda * q.powi(t as i32))
}

/// 3λ(1 − (η/2)(2dλ)^{2/3})^t, from the smallest contraction factor over [0, r].
pub fn midpoint2_guaranteed_bound(t: usize, d: f64, lambda: f64, eta: f64) -> Result<f64> {
    let eta_max = midpoint2_eta_max(d, lambda)?;
    if !(eta < eta_max) {
        return Err(Error::InvalidParameter(format!("eta = {eta} is not below eta_max = {eta_max}")));
    }
    let q = 1.0 - 0.5 * eta * (2.0 * d * lambda).powf(2.0 / 3.0);
    Ok(3.0 * lambda * q.powi(t as i32))
}

/// C'_ℓ with θ_ℓ^{(t)} = C'_ℓ(θ₁^{(t)})^{2^{ℓ−1}} along the midpoint iteration:
/// C'₁ = 1, C'_ℓ = (d_ℓ/d₁)∏_{j<ℓ}C'_j / 2^{ℓ−1}.
pub fn discrete_layer_constants(params: &DeepParams) -> Vec<f64> {
    let d1 = params.d(1);
    let mut c = vec![1.0];
    let mut prod = 1.0;
    for layer in 2..=params.depth() {
        let cl = params.d(layer) / d1 * prod / 2f64.powi(layer as i32 - 1);
        c.push(cl);
        prod *= cl;
    }
    c
}

/// L-layer midpoint scheme from all-zero layers, updating bottom-up within each step.
pub fn midpoint_deep_run(params: &DeepParams, eta: f64, steps: usize) -> Result<Trajectory> {
    nonnegative(eta, "eta")?;
    if params.theta1_0() != 0.0 {
        return Err(Error::InvalidParameter("the midpoint scheme starts from zero layers".into()));
    }
    let l = params.depth();
    let lambda = params.lambda();
    let ds: Vec<f64> = (1..=l).map(|i| params.d(i)).collect();
    let meta = TrajectoryMeta {
        scheme: Scheme::MidpointDeep,
        step: eta,
        params: json!({ "d": params.fa_constants(), "L": l, "lambda": lambda, "eta": eta, "steps": steps }),
        seed: None,
    };
    let mut traj = Trajectory::with_capacity("t", deep_columns(l), meta, steps + 1);
    let mut theta = vec![0.0f64; l];
    let mut row = vec![0.0; l + 2];
    for t in 0..=steps {
        if t > 0 {
            let e = lambda - theta.iter().product::<f64>();
            let mut mids = 1.0;
            for i in 0..l {
                let old = theta[i];
                theta[i] = old + eta * ds[i] * e * mids;
                mids *= 0.5 * (theta[i] + old);
            }
            guard(t as f64, &theta)?;
        }
        row[..l].copy_from_slice(&theta);
        let prod: f64 = theta.iter().product();
        row[l] = prod;
        row[l + 1] = (prod - lambda).abs();
        traj.push(t as f64, &row)?;
    }
    Ok(traj)
}

/// η_max = 1/(d₁γ(𝔎'λ^{γ−1})^{1/γ}), q(η) = 1 − ηd₁γ(𝔎'λ^{γ−1})^{1/γ}.
pub fn deep_budget(params: &DeepParams) -> Result<StepSizeBudget> {
    let probe = deep_budget_at(params, 1.0)?;
    deep_budget_at(params, DEFAULT_ETA_FRACTION * probe.eta_max)
}

pub fn deep_budget_at(params: &DeepParams, eta: f64) -> Result<StepSizeBudget> {
    positive(eta, "eta")?;
    let cp = discrete_layer_constants(params);
    let kk: f64 = cp.iter().product();
    let gamma = ((1u32 << params.depth()) - 1) as f64;
    let lambda = params.lambda();
    let d1 = params.d(1);
    let m = d1 * gamma * (kk * lambda.powf(gamma - 1.0)).powf(1.0 / gamma);
    let r = (lambda / kk).powf(1.0 / gamma);
    Ok(StepSizeBudget {
        scheme: BudgetScheme::MidpointDeep,
        eta_max: 1.0 / m,
        eta,
        s_star: None,
        max_p: None,
        ell_inf: None,
        m,
        c_inf: 0.0,
        m_tilde: 0.0,
        q_theory: 1.0 - eta * m,
        q_guaranteed: Some(1.0 - eta * d1 * lambda / r),
        q_asymptotic: None,
        provisional: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deep_continuous::layer_constants;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    const GRID: [(f64, f64); 9] =
        [(0.5, 0.5), (0.5, 1.0), (0.5, 3.0), (1.0, 0.5), (1.0, 1.0), (1.0, 3.0), (2.0, 0.5), (2.0, 1.0), (2.0, 3.0)];

    /// Reduced (x, S) recursion, iterated independently of the primal update.
    fn xs_recursion(d: f64, lambda: f64, eta: f64, steps: usize) -> Vec<(f64, f64)> {
        let mut out = vec![(0.0, 0.0)];
        let (mut x, mut s) = (0.0f64, 0.0f64);
        for _ in 0..steps {
            let xn = x + 0.5 * eta * region_p(d, lambda, x, s);
            s += (xn - x).powi(2);
            x = xn;
            out.push((x, s));
        }
        out
    }

    #[test]
    fn euler_first_step() {
        let (d, lam, eta) = (1.3, 0.7, 0.05);
        let run = euler_run(d, lam, eta, 1).unwrap();
        let r = run.trajectory.row(1);
        assert_relative_eq!(r[0], eta * d * lam, max_relative = 1e-15);
        assert_relative_eq!(r[2], (eta * d * lam).powi(2), max_relative = 1e-15);
        assert_eq!(r[1], 0.0);
        assert_relative_eq!(r[3], 2.0 * d * lam, max_relative = 1e-14);
    }

    #[test]
    fn euler_zero_step_frozen() {
        let run = euler_run(1.0, 1.0, 0.0, 100).unwrap();
        assert!(run.trajectory.rows().all(|(_, r)| r[0] == 0.0 && r[1] == 0.0));
    }

    #[test]
    fn euler_matches_reduced_recursion() {
        let (d, lam) = (1.0, 1.0);
        let eta = 0.9 * euler_eta_max(d, lam).unwrap();
        let run = euler_run(d, lam, eta, 2000).unwrap();
        let xs = xs_recursion(d, lam, eta, 2000);
        for ((_, r), (x, s)) in run.trajectory.rows().zip(xs) {
            assert!((r[0] - x).abs() <= 1e-12 * x.abs().max(1.0));
            assert!((r[2] - s).abs() <= 1e-12 * s.abs().max(1.0));
        }
    }

    #[test]
    fn euler_invariants_grid() {
        for (d, lam) in GRID {
            let b = euler_budget(d, lam).unwrap();
            assert!(b.q_theory > 0.0 && b.q_theory < 1.0, "{d} {lam}: q {}", b.q_theory);
            assert!(!b.provisional);
            let s_star = b.s_star.unwrap();
            assert!(b.ell_inf.unwrap() <= s_star);
            let run = euler_run_sampled(d, lam, b.eta, 100_000, 1).unwrap();
            assert!(run.region_violation.is_none());
            let rows: Vec<&[f64]> = run.trajectory.rows().map(|(_, r)| r).collect();
            let ell0 = ell_of_s(0.0, d, lam).unwrap();
            let ell_inf = b.ell_inf.unwrap();
            let c = 2.0 * d * lam;
            for w in rows.windows(2) {
                let (a, n) = (w[0], w[1]);
                assert!((a[1] - (a[0] * a[0] - a[2]) / (2.0 * d)).abs() <= 1e-12 * a[0].powi(2).max(1.0));
                assert!(n[0] >= a[0]);
                assert!(n[0] <= s_star + 1e-9);
                assert!(n[2] >= a[2]);
                let ell_a = ell_of_s(a[2], d, lam).unwrap();
                let ell_n = ell_of_s(n[2], d, lam).unwrap();
                assert!(n[0] - a[0] <= b.eta * b.m * (ell_a - a[0]) + 1e-9);
                assert!(ell_n - ell_a <= b.c_inf * (n[0] - a[0]).powi(2) + 1e-9);
                let gap = ell_a * ell_a - a[2];
                assert!(gap >= c / ell_inf - 1e-9 && gap <= c / ell0 + 1e-9);
            }
            assert!(run.trajectory.last().unwrap().1[5] <= 1e-6);
        }
    }

    #[test]
    fn euler_budget_example() {
        let eta = euler_eta_max(1.0, 1.0).unwrap();
        assert!((eta - 0.0917).abs() < 1e-4);
        assert!((region_max_p(1.0, 1.0).unwrap() - 2.1481).abs() < 1e-4);
        assert!((region_max_p(0.5, 0.5).unwrap() - 0.6481).abs() < 1e-4);
    }

    #[test]
    fn region_max_matches_grid_search() {
        for (d, lam) in [(1.0, 1.0), (0.5, 0.5), (2.0, 3.0)] {
            let s_star = s_star(d, lam).unwrap();
            let mut best = f64::NEG_INFINITY;
            for i in 0..=400 {
                let x = s_star * i as f64 / 400.0;
                for j in 0..=400 {
                    let s = x * j as f64 / 400.0;
                    let p = region_p(d, lam, x, s);
                    if p >= 0.0 {
                        best = best.max(p);
                    }
                }
            }
            let closed = region_max_p(d, lam).unwrap();
            assert!((best - closed).abs() < 1e-3, "{best} vs {closed}");
            assert!(closed >= 2.0 * d * lam);
        }
    }

    #[test]
    fn oversized_steps() {
        let eta_max = euler_eta_max(1.0, 1.0).unwrap();
        // 1.5x the budget still converges inside the region
        let run = euler_run_sampled(1.0, 1.0, 1.5 * eta_max, 100_000, 1000).unwrap();
        assert!(run.region_violation.is_none());
        assert!(run.trajectory.last().unwrap().1[5] < 1e-12);
        let run = euler_run(1.0, 1.0, 5.0 * eta_max, 100).unwrap();
        assert_eq!(run.region_violation.map(|v| v.kind), Some(RegionViolationKind::NegativeP));
        assert!(matches!(euler_run(1.0, 1.0, 10.0 * eta_max, 1000), Err(Error::Diverged { .. })));
    }

    #[test]
    fn midpoint_budget_examples() {
        assert!((midpoint2_eta_max(2.0, 3.0).unwrap() - 0.12719).abs() < 1e-5);
        assert_relative_eq!(midpoint2_eta_max(0.5, 1.0).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        for (d, lam) in GRID {
            let b = midpoint2_budget(d, lam).unwrap();
            assert_relative_eq!(b.q_at(b.eta_max / 2.0), 0.5, max_relative = 1e-12);
        }
    }

    #[test]
    fn midpoint_bound_arithmetic() {
        assert_eq!(midpoint2_error_bound(0, 2.0, 3.0, 0.1).unwrap(), 9.0);
        let b = midpoint2_error_bound(20, 2.0, 3.0, 0.1).unwrap();
        assert!((b / 3.5e-13 - 1.0).abs() < 0.05, "{b}");
        assert!(midpoint2_error_bound(1, 2.0, 3.0, 0.2).is_err());
    }

    #[test]
    fn midpoint_one_step_convergence() {
        let r = 12f64.cbrt();
        let tr = midpoint2_run(2.0, 3.0, 2.0 / (r * r), 60).unwrap();
        let xs = tr.column("x").unwrap();
        assert!(xs[1..=10].iter().all(|&x| (x / r - 1.0).abs() < 1e-12));
        assert!(tr.column("bound").unwrap().iter().all(|b| b.is_nan()));
        // the fixed point is repelling at this step size (q = -2): rounding errors double
        let dev = |t: usize| (xs[t] - r).abs();
        assert!(dev(50) > 1e3 * dev(30).max(f64::EPSILON));
    }

    #[test]
    fn midpoint_conservation_and_monotone() {
        let (d, lam) = (2.0, 3.0);
        let b = midpoint2_budget(d, lam).unwrap();
        let tr = midpoint2_run(d, lam, b.eta, 1000).unwrap();
        let r = 12f64.cbrt();
        let mut prev = -1.0;
        for (t, row) in tr.rows() {
            let (x, y) = (row[0], row[1]);
            assert!((y - x * x / (2.0 * d)).abs() <= 1e-12 * (x * x).max(1.0));
            assert!(x >= prev && x <= r + 1e-12);
            prev = x;
            let g = midpoint2_guaranteed_bound(t as usize, d, lam, b.eta).unwrap();
            assert!(row[3] <= g + 1e-9);
        }
        assert!(tr.last().unwrap().1[3] < 1e-12);
    }

    #[test]
    fn midpoint_zero_step() {
        let tr = midpoint2_run(2.0, 3.0, 0.0, 10).unwrap();
        assert!(tr.column("x").unwrap().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn discrete_constants_equal_power_coefficients() {
        for fa in [vec![2.0], vec![2.0, 2.5], vec![1.0, 0.5, 3.0]] {
            let p = DeepParams::new(1.0, fa, 0.0).unwrap();
            let cont = layer_constants(&p);
            for (i, c) in discrete_layer_constants(&p).iter().enumerate() {
                assert_relative_eq!(*c, cont.power_coefficient(i + 1), max_relative = 1e-15);
            }
        }
    }

    #[test]
    fn deep_l2_reduces_to_midpoint2() {
        let (d, lam) = (2.0, 3.0);
        let p = DeepParams::new(lam, vec![d], 0.0).unwrap();
        let eta = midpoint2_budget(d, lam).unwrap().eta;
        let a = midpoint_deep_run(&p, eta, 200).unwrap();
        let b = midpoint2_run(d, lam, eta, 200).unwrap();
        for ((_, ra), (_, rb)) in a.rows().zip(b.rows()) {
            assert_eq!(ra[0], rb[0]);
            assert_eq!(ra[1], rb[1]);
        }
        let db = deep_budget(&p).unwrap();
        let mb = midpoint2_budget(d, lam).unwrap();
        assert_relative_eq!(db.eta_max, mb.eta_max, max_relative = 1e-13);
        assert_relative_eq!(db.q_theory, mb.q_theory, max_relative = 1e-12);
        assert_relative_eq!(db.q_guaranteed.unwrap(), mb.q_guaranteed.unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn deep_first_step_and_telescoping() {
        let p = DeepParams::new(1.0, vec![2.0, 2.5], 0.0).unwrap();
        let b = deep_budget(&p).unwrap();
        assert!(b.eta_max > 0.0);
        let tr = midpoint_deep_run(&p, b.eta, 300).unwrap();
        let r1 = tr.row(1);
        assert_relative_eq!(r1[0], b.eta * 2.0, max_relative = 1e-15);
        assert_relative_eq!(r1[1], 2.5 / 4.0 * (b.eta * 2.0).powi(2), max_relative = 1e-14);
        let cp = discrete_layer_constants(&p);
        let mut prev = -1.0;
        for (_, row) in tr.rows() {
            for l in 1..3 {
                let expect = cp[l] * row[0].powi(1 << l);
                assert!((row[l] - expect).abs() <= 1e-12 * expect.abs().max(1.0));
            }
            assert!(row[3] >= prev);
            prev = row[3];
        }
        assert!(tr.last().unwrap().1[4] < 1e-12);
    }

    #[test]
    fn deep_guaranteed_rate_holds() {
        let p = DeepParams::new(1.0, vec![2.0, 2.5], 0.0).unwrap();
        let b = deep_budget(&p).unwrap();
        let tr = midpoint_deep_run(&p, b.eta, 300).unwrap();
        let qg = b.q_guaranteed.unwrap();
        for (t, row) in tr.rows() {
            assert!(row[4] <= 7.0 * qg.powi(t as i32) + 1e-12);
        }
    }

    #[test]
    fn deep_rejects_nonzero_start() {
        let p = DeepParams::new(1.0, vec![2.0], 0.3).unwrap();
        assert!(midpoint_deep_run(&p, 0.1, 10).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn euler_identity_random(d in 0.2f64..3.0, lam in 0.2f64..3.0, frac in 0.1f64..0.99) {
            let eta = frac * euler_eta_max(d, lam).unwrap();
            let run = euler_run(d, lam, eta, 2000).unwrap();
            prop_assert!(run.region_violation.is_none());
            for (_, r) in run.trajectory.rows() {
                prop_assert!((r[1] - (r[0] * r[0] - r[2]) / (2.0 * d)).abs() <= 1e-12 * (r[0] * r[0]).max(1.0));
                prop_assert!(r[2] <= r[0] + 1e-12);
                prop_assert!(r[3] >= -1e-12);
            }
        }

        #[test]
        fn midpoint_conservation_random(d in 0.2f64..3.0, lam in 0.2f64..3.0, frac in 0.05f64..0.99) {
            let eta = frac * midpoint2_eta_max(d, lam).unwrap();
            let tr = midpoint2_run(d, lam, eta, 500).unwrap();
            for (_, r) in tr.rows() {
                prop_assert!((r[1] - r[0] * r[0] / (2.0 * d)).abs() <= 1e-12 * (r[0] * r[0]).max(1.0));
            }
        }
    }
}
