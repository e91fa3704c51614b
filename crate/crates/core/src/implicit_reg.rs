//! Threshold times, plateau values and δ-scaling of the three-root flow.

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cubic::{self, CubicRoots, SortedRoots};
use crate::error::{finite, positive, Error, Result};
use crate::ode::Rk4;
use crate::scalar_continuous::vanishing_time;
use crate::trajectory::{Scheme, Trajectory, TrajectoryMeta};

pub const MAX_DELTA: f64 = 700.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    /// θ₀ = r₂ + e^{−δ}
    Above,
    /// θ₀ = r₂ − e^{−δ}
    Below,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::Above => 1.0,
            Side::Below => -1.0,
        }
    }

    /// Root approached after the plateau.
    pub fn target(self, roots: &SortedRoots) -> f64 {
        match self {
            Side::Above => roots.r3(),
            Side::Below => roots.r1(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub roots: SortedRoots,
    pub t_threshold: f64,
    pub alpha: f64,
    pub alpha_tilde: f64,
    pub side: Side,
}

impl ThresholdReport {
    pub fn new(roots: SortedRoots, side: Side) -> Self {
        let (alpha, alpha_tilde) = plateau_values(&roots);
        Self { roots, t_threshold: threshold_time(&roots), alpha, alpha_tilde, side }
    }
}

/// T = 2/((r₃ − r₂)(r₂ − r₁)).
pub fn threshold_time(roots: &SortedRoots) -> f64 {
    2.0 / (roots.r32() * roots.r21())
}

/// Asymptotic plateau expressions (α, α̃) at the threshold time.
pub fn plateau_values(roots: &SortedRoots) -> (f64, f64) {
    let (r21, r31, r32) = (roots.r21(), roots.r31(), roots.r32());
    let alpha = roots.r3() - ((1.0 + r31 / r21) * r32.ln() + (r32 / r21) * (r21 / r31).ln()).exp();
    let alpha_tilde = roots.r1() + ((1.0 + r31 / r32) * r21.ln() + (r21 / r32) * (r32 / r31).ln()).exp();
    (alpha, alpha_tilde)
}

fn log_potential(u: f64, s: &SortedRoots) -> f64 {
    let (r21, r31, r32) = (s.r21(), s.r31(), s.r32());
    (u - s.r3()).abs().ln() / (r32 * r31) - (u - s.r2()).abs().ln() / (r32 * r21) + (u - s.r1()).abs().ln() / (r31 * r21)
}

/// Exact δ → ∞ limit of θ₁(δT): the root of the implicit solution at t = T
/// with the O(e^{−δ}) start terms dropped.
pub fn plateau_limit(roots: &SortedRoots, side: Side) -> f64 {
    let target = roots.r32().ln() / (roots.r32() * roots.r31()) + roots.r21().ln() / (roots.r31() * roots.r21());
    let (mut lo, mut hi) = match side {
        Side::Above => (roots.r2(), roots.r3()),
        Side::Below => (roots.r1(), roots.r2()),
    };
    // potential is decreasing on (r2, r3) and increasing on (r1, r2)
    let decreasing = side == Side::Above;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let above = log_potential(mid, roots) > target;
        if above == decreasing {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Integrates θ̇ = −½(θ−r₁)(θ−r₂)(θ−r₃) from r₂ ± e^{−δ} and samples θ(δt) for t ∈ [0, 2T].
/// `dt` is in rescaled time (default T/2000).
pub fn delta_scaling_run(roots: &SortedRoots, delta: f64, side: Side, dt: Option<f64>) -> Result<Trajectory> {
    positive(delta, "delta")?;
    if delta > MAX_DELTA {
        return Err(Error::InvalidParameter(format!("delta = {delta} exceeds {MAX_DELTA} (e^-delta underflows)")));
    }
    let t_thr = threshold_time(roots);
    let dt = match dt {
        Some(v) => positive(v, "dt")?,
        None => t_thr / 2000.0,
    };
    let n = (2.0 * t_thr / dt).round().max(1.0) as usize;
    let dt = 2.0 * t_thr / n as f64;
    let meta = TrajectoryMeta {
        scheme: Scheme::DeltaScaling,
        step: dt,
        params: json!({ "roots": roots.as_array(), "delta": delta, "side": side }),
        seed: None,
    };
    let mut traj = Trajectory::with_capacity("t_rescaled", vec!["theta1".into()], meta, n + 1);
    // integrate the offset w = θ − r₂ so the e^{−δ} start keeps full precision
    let (r21, r32) = (roots.r21(), roots.r32());
    let h = delta * dt;
    let rhs = move |y: &[f64], out: &mut [f64]| {
        let w = y[0];
        out[0] = -0.5 * (w + r21) * w * (w - r32);
    };
    let mut rk = Rk4::new(1);
    let mut w = [side.sign() * (-delta).exp()];
    traj.push(0.0, &[roots.r2() + w[0]])?;
    for i in 1..=n {
        rk.step(&mut w, h, &rhs);
        crate::error::guard(i as f64 * dt, &w)?;
        traj.push(i as f64 * dt, &[roots.r2() + w[0]])?;
    }
    Ok(traj)
}

/// First rescaled time at which θ crosses halfway between r₂ and the target root.
pub fn detect_transition(traj: &Trajectory, roots: &SortedRoots, side: Side) -> Option<f64> {
    let level = 0.5 * (roots.r2() + side.target(roots));
    crossing_time(traj, level, side)
}

fn crossing_time(traj: &Trajectory, level: f64, side: Side) -> Option<f64> {
    let th = traj.column("theta1")?;
    let ts = traj.times();
    let s = side.sign();
    for i in 1..th.len() {
        if s * (th[i] - level) >= 0.0 && s * (th[i - 1] - level) < 0.0 {
            let frac = (level - th[i - 1]) / (th[i] - th[i - 1]);
            return Some(ts[i - 1] + frac * (ts[i] - ts[i - 1]));
        }
    }
    None
}

/// Rescaled-time width between 10% and 90% of the r₂ → target transition.
pub fn transition_width(traj: &Trajectory, roots: &SortedRoots, side: Side) -> Option<f64> {
    let (a, b) = (roots.r2(), side.target(roots));
    let t10 = crossing_time(traj, a + 0.1 * (b - a), side)?;
    let t90 = crossing_time(traj, a + 0.9 * (b - a), side)?;
    Some(t90 - t10)
}

/// Linear interpolation of the sampled trajectory at rescaled time `t`.
pub fn value_at(traj: &Trajectory, t: f64) -> Option<f64> {
    let th = traj.column("theta1")?;
    let ts = traj.times();
    let i = ts.partition_point(|&s| s < t);
    if i == 0 {
        return (ts.first()? == &t).then(|| th[0]);
    }
    if i >= ts.len() {
        return None;
    }
    let frac = (t - ts[i - 1]) / (ts[i] - ts[i - 1]);
    Some(th[i - 1] + frac * (th[i] - th[i - 1]))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderingReport {
    pub lambdas: Vec<f64>,
    pub times: Vec<f64>,
    /// Every pair obeys the claimed ordering.
    pub consistent: bool,
}

fn pairwise(lambdas: &[f64], times: &[f64], holds: impl Fn(f64, f64) -> bool) -> bool {
    for i in 0..lambdas.len() {
        for j in 0..lambdas.len() {
            if lambdas[i] > lambdas[j] && !holds(times[i], times[j]) {
                return false;
            }
        }
    }
    true
}

/// Threshold times per component of the (d, K, λ) cubic; claim: λᵢ > λⱼ ⇒ Tᵢ > Tⱼ.
pub fn anti_regularization_ordering(lambdas: &[f64], k: f64, d: f64) -> Result<OrderingReport> {
    finite(k, "K")?;
    let mut times = Vec::with_capacity(lambdas.len());
    for &lam in lambdas {
        positive(lam, "lambda")?;
        match cubic::solve_fa_cubic(d, k, lam)? {
            CubicRoots::ThreeDistinct(s) => times.push(threshold_time(&s)),
            other => {
                return Err(Error::InvalidParameter(format!(
                    "component lambda = {lam} has no positive discriminant ({other:?})"
                )))
            }
        }
    }
    let consistent = pairwise(lambdas, &times, |a, b| a > b);
    Ok(OrderingReport { lambdas: lambdas.to_vec(), times, consistent })
}

/// Vanishing times per component; claim: λᵢ > λⱼ ⇒ T₀ᵢ < T₀ⱼ.
pub fn k0_ordering(lambdas: &[f64], d: f64, theta0: f64) -> Result<OrderingReport> {
    let times = lambdas.iter().map(|&lam| vanishing_time(theta0, d, lam)).collect::<Result<Vec<_>>>()?;
    let consistent = pairwise(lambdas, &times, |a, b| a < b);
    Ok(OrderingReport { lambdas: lambdas.to_vec(), times, consistent })
}
