//! Fixed-step classic Runge–Kutta.

use crate::error::{guard, positive, Error, Result};

/// Reusable RK4 stepper for autonomous systems `y' = f(y)`.
#[derive(Clone, Debug)]
pub struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }

    pub fn step<F>(&mut self, y: &mut [f64], h: f64, f: &F)
    where
        F: Fn(&[f64], &mut [f64]),
    {
        let n = y.len();
        f(y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k1[i];
        }
        f(&self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + 0.5 * h * self.k2[i];
        }
        f(&self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(&self.tmp, &mut self.k4);
        for i in 0..n {
            y[i] += h / 6.0 * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}

/// Number of steps of size `dt` covering `[0, t_end]`.
pub fn step_count(t_end: f64, dt: f64) -> Result<usize> {
    positive(t_end, "t_end")?;
    positive(dt, "dt")?;
    if dt > t_end {
        return Err(Error::InvalidParameter(format!("dt = {dt} exceeds t_end = {t_end}")));
    }
    Ok((t_end / dt - 1e-9).ceil() as usize)
}

/// Integrates from `y0` over `n` steps of size `dt`, calling `observe(i, t_i, y_i)`
/// for i = 0..=n. Fails on divergence with the time of blow-up.
pub fn integrate<F, O>(y0: &[f64], dt: f64, n: usize, f: F, mut observe: O) -> Result<Vec<f64>>
where
    F: Fn(&[f64], &mut [f64]),
    O: FnMut(usize, f64, &[f64]) -> Result<()>,
{
    let mut y = y0.to_vec();
    guard(0.0, &y)?;
    let mut rk = Rk4::new(y.len());
    observe(0, 0.0, &y)?;
    for i in 1..=n {
        rk.step(&mut y, dt, &f);
        let t = i as f64 * dt;
        guard(t, &y)?;
        observe(i, t, &y)?;
    }
    Ok(y)
}
