//! Real roots and case classification for the depressed cubics behind every flow.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{finite, positive, nonnegative, Error, Result};

/// `x³ + p·x + q`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DepressedCubic {
    pub p: f64,
    pub q: f64,
}

impl DepressedCubic {
    pub fn new(p: f64, q: f64) -> Result<Self> {
        Ok(Self { p: finite(p, "p")?, q: finite(q, "q")? })
    }

    /// The cubic `θ³ + 2dK·θ − 2dλ` of the two-layer flow.
    pub fn fa(d: f64, k: f64, lambda: f64) -> Result<Self> {
        positive(d, "d")?;
        finite(k, "K")?;
        finite(lambda, "lambda")?;
        Ok(Self { p: 2.0 * d * k, q: -2.0 * d * lambda })
    }

    pub fn eval(&self, x: f64) -> f64 {
        (x * x + self.p) * x + self.q
    }

    pub fn derivative(&self, x: f64) -> f64 {
        3.0 * x * x + self.p
    }

    /// −4p³ − 27q².
    pub fn discriminant(&self) -> f64 {
        -4.0 * self.p.powi(3) - 27.0 * self.q * self.q
    }

    fn polish(&self, x: f64) -> f64 {
        let dp = self.derivative(x);
        if dp == 0.0 {
            return x;
        }
        let y = x - self.eval(x) / dp;
        if y.is_finite() && self.eval(y).abs() <= self.eval(x).abs() {
            y
        } else {
            x
        }
    }

    /// Single real root when the discriminant is negative.
    fn cardano(&self) -> f64 {
        let half_q = 0.5 * self.q;
        let third_p = self.p / 3.0;
        let disc = half_q * half_q + third_p.powi(3);
        let a = -half_q.signum() * (half_q.abs() + disc.max(0.0).sqrt()).cbrt();
        let b = if a != 0.0 { -third_p / a } else { 0.0 };
        a + b
    }

    /// Three real roots (ascending) when the discriminant is positive.
    fn trigonometric(&self) -> [f64; 3] {
        let m = 2.0 * (-self.p / 3.0).sqrt();
        let arg = (1.5 * self.q / self.p * (-3.0 / self.p).sqrt()).clamp(-1.0, 1.0);
        let phi = arg.acos() / 3.0;
        let mut r = [0.0; 3];
        for (k, slot) in r.iter_mut().enumerate() {
            *slot = m * (phi - 2.0 * PI * k as f64 / 3.0).cos();
        }
        r.sort_by(f64::total_cmp);
        r
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    Negative,
    Zero,
    Positive,
}

impl Sign {
    pub fn as_i8(self) -> i8 {
        match self {
            Sign::Negative => -1,
            Sign::Zero => 0,
            Sign::Positive => 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Discriminant {
    pub value: f64,
    pub sign: Sign,
    pub tolerance: f64,
}

impl Discriminant {
    pub fn classify(value: f64, tolerance: f64) -> Self {
        let sign = if value.abs() <= tolerance {
            Sign::Zero
        } else if value > 0.0 {
            Sign::Positive
        } else {
            Sign::Negative
        };
        Self { value, sign, tolerance }
    }
}

/// Default zero tolerance 1e−12·d²·max(1, |K|³, λ²).
pub fn default_tolerance(d: f64, k: f64, lambda: f64) -> f64 {
    1e-12 * d * d * 1f64.max(k.abs().powi(3)).max(lambda * lambda)
}

/// Δ = −4d²(8dK³ + 27λ²).
pub fn discriminant(d: f64, k: f64, lambda: f64) -> Result<Discriminant> {
    discriminant_with_tolerance(d, k, lambda, default_tolerance(d, k, lambda))
}

pub fn discriminant_with_tolerance(d: f64, k: f64, lambda: f64, tolerance: f64) -> Result<Discriminant> {
    positive(d, "d")?;
    finite(k, "K")?;
    finite(lambda, "lambda")?;
    nonnegative(tolerance, "tolerance")?;
    let value = -4.0 * d * d * (8.0 * d * k.powi(3) + 27.0 * lambda * lambda);
    Ok(Discriminant::classify(value, tolerance))
}

/// Three distinct real roots, strictly ascending.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SortedRoots {
    r1: f64,
    r2: f64,
    r3: f64,
}

impl SortedRoots {
    pub fn new(r1: f64, r2: f64, r3: f64) -> Result<Self> {
        for (v, n) in [(r1, "r1"), (r2, "r2"), (r3, "r3")] {
            finite(v, n)?;
        }
        if !(r1 < r2 && r2 < r3) {
            return Err(Error::InvalidParameter(format!("roots must satisfy r1 < r2 < r3, got ({r1}, {r2}, {r3})")));
        }
        Ok(Self { r1, r2, r3 })
    }

    pub fn r1(&self) -> f64 {
        self.r1
    }
    pub fn r2(&self) -> f64 {
        self.r2
    }
    pub fn r3(&self) -> f64 {
        self.r3
    }
    pub fn r21(&self) -> f64 {
        self.r2 - self.r1
    }
    pub fn r31(&self) -> f64 {
        self.r3 - self.r1
    }
    pub fn r32(&self) -> f64 {
        self.r3 - self.r2
    }
    pub fn as_array(&self) -> [f64; 3] {
        [self.r1, self.r2, self.r3]
    }

    /// −½(x − r1)(x − r2)(x − r3).
    pub fn flow(&self, x: f64) -> f64 {
        -0.5 * (x - self.r1) * (x - self.r2) * (x - self.r3)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum CubicRoots {
    OneReal(f64),
    ThreeDistinct(SortedRoots),
    SimpleAndDouble { simple: f64, double: f64 },
    TripleZero,
}

impl CubicRoots {
    /// All real roots ascending, repeated roots listed once.
    pub fn roots(&self) -> Vec<f64> {
        match *self {
            CubicRoots::OneReal(r) => vec![r],
            CubicRoots::ThreeDistinct(s) => s.as_array().to_vec(),
            CubicRoots::SimpleAndDouble { simple, double } => {
                if simple < double {
                    vec![simple, double]
                } else {
                    vec![double, simple]
                }
            }
            CubicRoots::TripleZero => vec![0.0],
        }
    }

    pub fn largest(&self) -> f64 {
        *self.roots().last().expect("at least one real root")
    }
}

/// Solves `x³ + 2dK·x − 2dλ = 0`.
pub fn solve_fa_cubic(d: f64, k: f64, lambda: f64) -> Result<CubicRoots> {
    solve_fa_cubic_with_tolerance(d, k, lambda, default_tolerance(d, k, lambda))
}

pub fn solve_fa_cubic_with_tolerance(d: f64, k: f64, lambda: f64, tolerance: f64) -> Result<CubicRoots> {
    let disc = discriminant_with_tolerance(d, k, lambda, tolerance)?;
    let cubic = DepressedCubic::fa(d, k, lambda)?;
    Ok(solve_classified(&cubic, disc.sign))
}

/// Roots of an arbitrary depressed cubic with the given discriminant class.
pub fn solve_classified(cubic: &DepressedCubic, sign: Sign) -> CubicRoots {
    let (p, q) = (cubic.p, cubic.q);
    if p == 0.0 && q == 0.0 {
        return CubicRoots::TripleZero;
    }
    match sign {
        Sign::Negative => CubicRoots::OneReal(cubic.polish(cubic.cardano())),
        Sign::Positive => {
            let r = cubic.trigonometric().map(|x| cubic.polish(x));
            match SortedRoots::new(r[0], r[1], r[2]) {
                Ok(s) => CubicRoots::ThreeDistinct(s),
                // coalesced by rounding: treat as the degenerate case
                Err(_) => solve_classified(cubic, Sign::Zero),
            }
        }
        Sign::Zero => {
            if p == 0.0 {
                CubicRoots::OneReal(cubic.polish((-q).cbrt()))
            } else {
                CubicRoots::SimpleAndDouble { simple: cubic.polish(3.0 * q / p), double: -1.5 * q / p }
            }
        }
    }
}

/// Safeguarded Newton for an increasing `f` with `f(lo) ≤ 0 ≤ f(hi)`.
/// `f` returns (value, derivative).
pub(crate) fn bracketed_root<F: Fn(f64) -> (f64, f64)>(f: F, mut lo: f64, mut hi: f64) -> f64 {
    let mut x = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if dfx > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if (next - x).abs() <= 2.0 * f64::EPSILON * x.abs() || hi - lo <= 2.0 * f64::EPSILON * hi.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// Corner of the Euler invariant region: the root above 1 of `x³ − x² − 2dλ`.
pub fn s_star(d: f64, lambda: f64) -> Result<f64> {
    let c = 2.0 * positive(d, "d")? * positive(lambda, "lambda")?;
    Ok(bracketed_root(|x| (x * x * (x - 1.0) - c, x * (3.0 * x - 2.0)), 1.0, 1.0 + c))
}

/// Positive root of `2dλ − x³ + x·S`.
pub fn ell_of_s(s: f64, d: f64, lambda: f64) -> Result<f64> {
    nonnegative(s, "S")?;
    let c = 2.0 * positive(d, "d")? * positive(lambda, "lambda")?;
    let cr = c.cbrt();
    let rs = s.sqrt();
    Ok(bracketed_root(|x| ((x * x - s) * x - c, 3.0 * x * x - s), cr.max(rs), cr + rs))
}
