//! Two-layer scalar flow θ̇₁ = d(λ − θ₂θ₁), θ̇₂ = (λ − θ₂θ₁)θ₁.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::cubic::{self, CubicRoots, DepressedCubic, Sign, SortedRoots};
use crate::error::{finite, positive, Error, Result};
use crate::ode;
use crate::trajectory::{Scheme, Trajectory, TrajectoryMeta};

const SQRT3: f64 = 1.732_050_807_568_877_2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComponentParams {
    lambda: f64,
    d: f64,
    theta1_0: f64,
    theta2_0: f64,
    k: f64,
}

impl ComponentParams {
    pub fn new(lambda: f64, d: f64, theta1_0: f64, theta2_0: f64) -> Result<Self> {
        finite(lambda, "lambda")?;
        positive(d, "d")?;
        finite(theta1_0, "theta1_0")?;
        finite(theta2_0, "theta2_0")?;
        let k = theta2_0 - theta1_0 * theta1_0 / (2.0 * d);
        Ok(Self { lambda, d, theta1_0, theta2_0, k })
    }

    /// θ₁(0) = θ₀, θ₂(0) = θ₀²/(2d), so K = 0.
    pub fn aligned(lambda: f64, d: f64, theta0: f64) -> Result<Self> {
        finite(lambda, "lambda")?;
        positive(d, "d")?;
        finite(theta0, "theta0")?;
        Ok(Self { lambda, d, theta1_0: theta0, theta2_0: theta0 * theta0 / (2.0 * d), k: 0.0 })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn d(&self) -> f64 {
        self.d
    }
    pub fn theta1_0(&self) -> f64 {
        self.theta1_0
    }
    pub fn theta2_0(&self) -> f64 {
        self.theta2_0
    }
    pub fn k(&self) -> f64 {
        self.k
    }
    pub fn is_aligned(&self) -> bool {
        self.k == 0.0
    }

    /// `θ³ + 2dKθ − 2dλ`; the reduced flow is θ̇₁ = −½·cubic(θ₁).
    pub fn cubic(&self) -> DepressedCubic {
        DepressedCubic { p: 2.0 * self.d * self.k, q: -2.0 * self.d * self.lambda }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CaseTag {
    DeltaPos,
    DeltaNeg,
    DeltaZero,
    LambdaZero,
}

pub fn classify_case(params: &ComponentParams) -> CaseTag {
    if params.lambda == 0.0 {
        return CaseTag::LambdaZero;
    }
    let disc = cubic::discriminant(params.d, params.k, params.lambda).expect("validated params");
    match disc.sign {
        Sign::Positive => CaseTag::DeltaPos,
        Sign::Negative => CaseTag::DeltaNeg,
        Sign::Zero => CaseTag::DeltaZero,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DecayRate {
    /// |θ₁ − r| = e^{−rate·t + O(1)}.
    Exponential { rate: f64 },
    /// Error ~ t^{−exponent}.
    PowerLaw { exponent: f64 },
    /// Convergence onto a double root, slower than any exponential.
    SubExponential,
}

impl DecayRate {
    pub fn exponential(&self) -> Option<f64> {
        match *self {
            DecayRate::Exponential { rate } => Some(rate),
            _ => None,
        }
    }
}

/// Rate of the flow θ̇ = −½(θ−r₁)(θ−r₂)(θ−r₃) started at θ₀.
pub fn three_root_rate(roots: &SortedRoots, theta0: f64) -> Result<f64> {
    if theta0 > roots.r2() {
        Ok(roots.r32() * roots.r31() / 2.0)
    } else if theta0 < roots.r2() {
        Ok(roots.r21() * roots.r31() / 2.0)
    } else {
        Err(Error::InvalidParameter("theta0 sits on the repelling root r2".into()))
    }
}

/// Attracting root reached from the initial condition.
pub fn limit_root(params: &ComponentParams) -> Result<f64> {
    let roots = cubic::solve_fa_cubic(params.d, params.k, params.lambda)?;
    let t0 = params.theta1_0;
    Ok(match roots {
        CubicRoots::OneReal(r) => r,
        CubicRoots::TripleZero => 0.0,
        CubicRoots::ThreeDistinct(s) => {
            if t0 > s.r2() {
                s.r3()
            } else if t0 < s.r2() {
                s.r1()
            } else {
                s.r2()
            }
        }
        CubicRoots::SimpleAndDouble { simple, double } => {
            if (simple > double && t0 > double) || (simple < double && t0 < double) {
                simple
            } else {
                double
            }
        }
    })
}

pub fn theoretical_rate(params: &ComponentParams) -> Result<DecayRate> {
    let (d, k, lambda, t0) = (params.d, params.k, params.lambda, params.theta1_0);
    if lambda == 0.0 && k == 0.0 {
        return Ok(DecayRate::PowerLaw { exponent: 1.5 });
    }
    let rate = match cubic::solve_fa_cubic(d, k, lambda)? {
        CubicRoots::OneReal(r) => {
            if k == 0.0 {
                1.5 * (2.0 * d * lambda).powf(2.0 / 3.0)
            } else if r != 0.0 {
                (r.powi(3) + d * lambda) / r
            } else {
                d * k
            }
        }
        CubicRoots::ThreeDistinct(s) => three_root_rate(&s, t0)?,
        CubicRoots::SimpleAndDouble { simple, double } => {
            if t0 == double {
                return Err(Error::InvalidParameter("theta0 sits on the double root".into()));
            }
            if (simple > double) != (t0 > double) {
                return Ok(DecayRate::SubExponential);
            }
            0.5 * (simple - double).powi(2)
        }
        CubicRoots::TripleZero => return Ok(DecayRate::PowerLaw { exponent: 1.5 }),
    };
    Ok(DecayRate::Exponential { rate })
}

pub const SCALAR_COLUMNS: [&str; 4] = ["theta1", "theta2", "product", "abs_error"];

/// RK4 on the coupled system, recording every step.
pub fn integrate_scalar(params: &ComponentParams, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_scalar_sampled(params, t_end, dt, 1)
}

/// As [`integrate_scalar`], recording every `every`-th step plus the last.
pub fn integrate_scalar_sampled(params: &ComponentParams, t_end: f64, dt: f64, every: usize) -> Result<Trajectory> {
    let n = ode::step_count(t_end, dt)?;
    let every = every.max(1);
    let (d, lambda) = (params.d, params.lambda);
    let meta = TrajectoryMeta {
        scheme: Scheme::ScalarOde,
        step: dt,
        params: json!({
            "lambda": lambda, "d": d, "theta1_0": params.theta1_0,
            "theta2_0": params.theta2_0, "K": params.k, "t_end": t_end,
        }),
        seed: None,
    };
    let cols = SCALAR_COLUMNS.iter().map(|s| s.to_string()).collect();
    let mut traj = Trajectory::with_capacity("t", cols, meta, n / every + 2);
    let rhs = move |y: &[f64], out: &mut [f64]| {
        let e = lambda - y[0] * y[1];
        out[0] = d * e;
        out[1] = e * y[0];
    };
    ode::integrate(&[params.theta1_0, params.theta2_0], dt, n, rhs, |i, t, y| {
        if i % every == 0 || i == n {
            let prod = y[0] * y[1];
            traj.push(t, &[y[0], y[1], prod, (prod - lambda).abs()])?;
        }
        Ok(())
    })?;
    Ok(traj)
}

/// K_t = θ₂(t) − θ₁(t)²/(2d) per sample.
pub fn conserved_k(traj: &Trajectory, d: f64) -> Result<Vec<f64>> {
    positive(d, "d")?;
    let i1 = traj.column_index("theta1").ok_or_else(|| Error::InvalidParameter("missing theta1".into()))?;
    let i2 = traj.column_index("theta2").ok_or_else(|| Error::InvalidParameter("missing theta2".into()))?;
    Ok(traj.rows().map(|(_, r)| r[i2] - r[i1] * r[i1] / (2.0 * d)).collect())
}

fn k0_primitive(theta: f64, r: f64) -> f64 {
    let r2 = r * r;
    -(2.0 / (3.0 * r2)) * (theta - r).abs().ln()
        + (1.0 / (3.0 * r2)) * (theta * theta + r * theta + r2).ln()
        + (2.0 / (r2 * SQRT3)) * ((2.0 * theta + r) / (r * SQRT3)).atan()
}

/// Signed residual of the aligned-initialization implicit solution at (θ₁, t).
pub fn implicit_residual_k0(theta1: f64, t: f64, params: &ComponentParams) -> Result<f64> {
    finite(theta1, "theta1")?;
    finite(t, "t")?;
    if !params.is_aligned() {
        return Err(Error::InvalidParameter(format!("requires K = 0, got {}", params.k)));
    }
    let r = (2.0 * params.d * positive(params.lambda, "lambda")?).cbrt();
    for v in [params.theta1_0, theta1] {
        if v == r {
            return Err(Error::RootCollision { value: v, root: r });
        }
    }
    Ok(k0_primitive(theta1, r) - k0_primitive(params.theta1_0, r) - t)
}

fn three_log_primitive(theta: f64, s: &SortedRoots) -> f64 {
    let (r21, r31, r32) = (s.r21(), s.r31(), s.r32());
    (theta - s.r3()).abs().ln() / (r32 * r31) - (theta - s.r2()).abs().ln() / (r32 * r21)
        + (theta - s.r1()).abs().ln() / (r31 * r21)
}

/// Signed residual of the three-logarithm implicit solution.
pub fn implicit_residual_three_roots(theta1: f64, t: f64, roots: &SortedRoots, theta0: f64) -> Result<f64> {
    finite(theta1, "theta1")?;
    finite(theta0, "theta0")?;
    finite(t, "t")?;
    for v in [theta0, theta1] {
        for r in roots.as_array() {
            if v == r {
                return Err(Error::RootCollision { value: v, root: r });
            }
        }
    }
    Ok(three_log_primitive(theta1, roots) - three_log_primitive(theta0, roots) + t / 2.0)
}

/// Time at which an aligned trajectory started at θ₀ < 0 crosses zero.
pub fn vanishing_time(theta0: f64, d: f64, lambda: f64) -> Result<f64> {
    finite(theta0, "theta0")?;
    if theta0 >= 0.0 {
        return Err(Error::InvalidParameter(format!("theta0 must be negative, got {theta0}")));
    }
    let r = (2.0 * positive(d, "d")? * positive(lambda, "lambda")?).cbrt();
    let r2 = r * r;
    Ok(PI / (3.0 * SQRT3 * r2)
        + ((r - theta0).powi(2) / (theta0 * theta0 + r * theta0 + r2)).ln() / (3.0 * r2)
        - (2.0 / (r2 * SQRT3)) * ((2.0 * theta0 + r) / (r * SQRT3)).atan())
}

/// Simulated zero crossing of θ₁ for the aligned flow (RK4 + linear interpolation).
pub fn zero_crossing_time(theta0: f64, d: f64, lambda: f64, dt: f64) -> Result<f64> {
    if theta0 >= 0.0 {
        return Err(Error::InvalidParameter(format!("theta0 must be negative, got {theta0}")));
    }
    let c = 2.0 * positive(d, "d")? * positive(lambda, "lambda")?;
    positive(dt, "dt")?;
    let rhs = move |y: &[f64], out: &mut [f64]| out[0] = 0.5 * (c - y[0].powi(3));
    let mut rk = ode::Rk4::new(1);
    let mut y = [theta0];
    let max_steps = (1e7f64).min(1e3 / dt) as usize;
    for i in 0..max_steps {
        let prev = y[0];
        rk.step(&mut y, dt, &rhs);
        crate::error::guard((i + 1) as f64 * dt, &y)?;
        if y[0] >= 0.0 {
            let frac = -prev / (y[0] - prev);
            return Ok((i as f64 + frac) * dt);
        }
    }
    Err(Error::InvalidParameter("no zero crossing within the simulated horizon".into()))
}
