//! L-layer scalar flow and its reduction to θ̇₁ = d₁(λ − 𝔎θ₁^γ).

use serde::Serialize;
use serde_json::json;

use crate::error::{finite, positive, Error, Result};
use crate::ode;
use crate::trajectory::{Scheme, Trajectory, TrajectoryMeta};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeepParams {
    lambda: f64,
    /// d₁ … d_{L−1}; d_L = 1.
    fa: Vec<f64>,
    theta1_0: f64,
}

impl DeepParams {
    pub fn new(lambda: f64, fa: Vec<f64>, theta1_0: f64) -> Result<Self> {
        positive(lambda, "lambda")?;
        finite(theta1_0, "theta1_0")?;
        if fa.is_empty() {
            return Err(Error::InvalidParameter("need at least one FA constant (L >= 2)".into()));
        }
        for &d in &fa {
            positive(d, "d")?;
        }
        if fa.len() > 5 {
            return Err(Error::InvalidParameter(format!("depth {} too large (γ = 2^L − 1 overflows)", fa.len() + 1)));
        }
        Ok(Self { lambda, fa, theta1_0 })
    }

    pub fn depth(&self) -> usize {
        self.fa.len() + 1
    }
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
    pub fn theta1_0(&self) -> f64 {
        self.theta1_0
    }
    pub fn fa_constants(&self) -> &[f64] {
        &self.fa
    }

    /// d_ℓ for ℓ = 1..=L (1-based).
    pub fn d(&self, layer: usize) -> f64 {
        assert!(layer >= 1 && layer <= self.depth());
        if layer == self.depth() {
            1.0
        } else {
            self.fa[layer - 1]
        }
    }

    pub fn with_theta1_0(&self, theta1_0: f64) -> Result<Self> {
        Self::new(self.lambda, self.fa.clone(), theta1_0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DeepLayerConstants {
    pub c: Vec<f64>,
    pub frak_k: f64,
    pub gamma: u32,
}

impl DeepLayerConstants {
    /// C_ℓ / 2^{ℓ−1}, 1-based.
    pub fn power_coefficient(&self, layer: usize) -> f64 {
        self.c[layer - 1] / 2f64.powi(layer as i32 - 1)
    }

    /// θ_ℓ as a function of θ₁.
    pub fn layer_value(&self, layer: usize, theta1: f64) -> f64 {
        self.power_coefficient(layer) * theta1.powi(1 << (layer - 1))
    }

    /// r = (λ/𝔎)^{1/γ}.
    pub fn fixed_point(&self, lambda: f64) -> f64 {
        (lambda / self.frak_k).powf(1.0 / self.gamma as f64)
    }
}

/// C₁ = 1, C_ℓ = (d_ℓ/d₁)·∏_{j<ℓ} C_j/2^{j−1}.
pub fn layer_constants(params: &DeepParams) -> DeepLayerConstants {
    let l = params.depth();
    let d1 = params.d(1);
    let mut c = Vec::with_capacity(l);
    c.push(1.0);
    let mut running = 1.0;
    for layer in 2..=l {
        let cl = params.d(layer) / d1 * running;
        c.push(cl);
        running *= cl / 2f64.powi(layer as i32 - 1);
    }
    let frak_k = c.iter().enumerate().map(|(i, ci)| ci / 2f64.powi(i as i32)).product();
    DeepLayerConstants { c, frak_k, gamma: (1u32 << l) - 1 }
}

pub fn deep_columns(depth: usize) -> Vec<String> {
    let mut cols: Vec<String> = (1..=depth).map(|l| format!("theta_{l}")).collect();
    cols.push("product".into());
    cols.push("abs_error".into());
    cols
}

fn meta(params: &DeepParams, scheme: Scheme, dt: f64, t_end: f64) -> TrajectoryMeta {
    TrajectoryMeta {
        scheme,
        step: dt,
        params: json!({
            "lambda": params.lambda, "d": params.fa, "L": params.depth(),
            "theta1_0": params.theta1_0, "t_end": t_end,
        }),
        seed: None,
    }
}

/// Initial layer values θ_ℓ(0) = (C_ℓ/2^{ℓ−1})θ₁(0)^{2^{ℓ−1}}.
pub fn initial_state(params: &DeepParams, consts: &DeepLayerConstants) -> Vec<f64> {
    (1..=params.depth()).map(|l| consts.layer_value(l, params.theta1_0)).collect()
}

pub fn integrate_deep_full(params: &DeepParams, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_deep_full_sampled(params, t_end, dt, 1)
}

/// RK4 on θ̇_ℓ = d_ℓ(λ − ∏θ)∏_{j<ℓ}θ_j.
pub fn integrate_deep_full_sampled(params: &DeepParams, t_end: f64, dt: f64, every: usize) -> Result<Trajectory> {
    let n = ode::step_count(t_end, dt)?;
    let every = every.max(1);
    let l = params.depth();
    let consts = layer_constants(params);
    let lambda = params.lambda;
    let ds: Vec<f64> = (1..=l).map(|i| params.d(i)).collect();
    let mut traj = Trajectory::with_capacity("t", deep_columns(l), meta(params, Scheme::DeepOde, dt, t_end), n / every + 2);
    let rhs = |y: &[f64], out: &mut [f64]| {
        let e = lambda - y.iter().product::<f64>();
        let mut below = 1.0;
        for i in 0..y.len() {
            out[i] = ds[i] * e * below;
            below *= y[i];
        }
    };
    let mut row = vec![0.0; l + 2];
    ode::integrate(&initial_state(params, &consts), dt, n, rhs, |i, t, y| {
        if i % every == 0 || i == n {
            row[..l].copy_from_slice(y);
            let prod: f64 = y.iter().product();
            row[l] = prod;
            row[l + 1] = (prod - lambda).abs();
            traj.push(t, &row)?;
        }
        Ok(())
    })?;
    Ok(traj)
}

pub fn integrate_deep_reduced(params: &DeepParams, t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate_deep_reduced_sampled(params, t_end, dt, 1)
}

/// RK4 on θ̇₁ = d₁(λ − 𝔎θ₁^γ); other layers rebuilt from the power relation.
pub fn integrate_deep_reduced_sampled(params: &DeepParams, t_end: f64, dt: f64, every: usize) -> Result<Trajectory> {
    let n = ode::step_count(t_end, dt)?;
    let every = every.max(1);
    let l = params.depth();
    let consts = layer_constants(params);
    let (lambda, d1, kk, gamma) = (params.lambda, params.d(1), consts.frak_k, consts.gamma as i32);
    let mut traj =
        Trajectory::with_capacity("t", deep_columns(l), meta(params, Scheme::DeepOdeReduced, dt, t_end), n / every + 2);
    let rhs = move |y: &[f64], out: &mut [f64]| out[0] = d1 * (lambda - kk * y[0].powi(gamma));
    let mut row = vec![0.0; l + 2];
    ode::integrate(&[params.theta1_0], dt, n, rhs, |i, t, y| {
        if i % every == 0 || i == n {
            for layer in 1..=l {
                row[layer - 1] = consts.layer_value(layer, y[0]);
            }
            let prod: f64 = row[..l].iter().product();
            row[l] = prod;
            row[l + 1] = (prod - lambda).abs();
            traj.push(t, &row)?;
        }
        Ok(())
    })?;
    Ok(traj)
}

/// max over samples and layers of |θ_ℓ − (C_ℓ/2^{ℓ−1})θ₁^{2^{ℓ−1}}| / max(1, |θ_ℓ|).
pub fn check_power_relation(traj: &Trajectory, consts: &DeepLayerConstants) -> Result<f64> {
    let l = consts.c.len();
    let idx: Vec<usize> = (1..=l)
        .map(|i| traj.column_index(&format!("theta_{i}")).ok_or_else(|| Error::InvalidParameter(format!("missing theta_{i}"))))
        .collect::<Result<_>>()?;
    let mut worst = 0f64;
    for (_, row) in traj.rows() {
        let t1 = row[idx[0]];
        for layer in 2..=l {
            let v = row[idx[layer - 1]];
            let dev = (v - consts.layer_value(layer, t1)).abs() / v.abs().max(1.0);
            worst = worst.max(dev);
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar_continuous::{integrate_scalar, ComponentParams};
    use approx::assert_relative_eq;

    fn fig4(theta0: f64) -> DeepParams {
        DeepParams::new(1.0, vec![2.0, 2.5], theta0).unwrap()
    }

    #[test]
    fn two_layer_collapse() {
        let c = layer_constants(&DeepParams::new(3.0, vec![2.0], 0.0).unwrap());
        assert_eq!(c.c, vec![1.0, 0.5]);
        assert_eq!(c.frak_k, 0.25);
        assert_eq!(c.gamma, 3);
    }

    #[test]
    fn three_layer_constants() {
        let c = layer_constants(&fig4(0.0));
        assert_relative_eq!(c.c[1], 1.25, max_relative = 1e-15);
        assert_relative_eq!(c.c[2], 0.3125, max_relative = 1e-15);
        assert_relative_eq!(c.frak_k, 0.048828125, max_relative = 1e-15);
        assert_eq!(c.gamma, 7);
        let r = c.fixed_point(1.0);
        assert!((r - 1.5394).abs() < 1e-4);
        assert_relative_eq!(c.frak_k * r.powi(7), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn fixed_point_identity_many_depths() {
        for fa in [vec![1.0], vec![0.3, 4.0], vec![1.0, 1.0, 1.0], vec![2.0, 0.5, 3.0, 1.5]] {
            let p = DeepParams::new(2.0, fa, 0.0).unwrap();
            let c = layer_constants(&p);
            let r = c.fixed_point(2.0);
            let prod: f64 = (1..=p.depth()).map(|l| c.layer_value(l, r)).product();
            assert_relative_eq!(prod, 2.0, max_relative = 1e-12);
            assert_eq!(c.c[0], 1.0);
        }
    }

    #[test]
    fn l2_full_matches_scalar() {
        let deep = DeepParams::new(3.0, vec![2.0], 0.5).unwrap();
        let full = integrate_deep_full(&deep, 5.0, 1e-3).unwrap();
        let sc = integrate_scalar(&ComponentParams::aligned(3.0, 2.0, 0.5).unwrap(), 5.0, 1e-3).unwrap();
        for ((_, a), (_, b)) in full.rows().zip(sc.rows()) {
            assert!((a[0] - b[0]).abs() <= 1e-10);
            assert!((a[1] - b[1]).abs() <= 1e-10);
        }
        assert!(check_power_relation(&full, &layer_constants(&deep)).unwrap() <= 1e-10);
    }

    #[test]
    fn reduced_matches_full() {
        for t0 in [-1.0, 0.0, 0.5, 2.0] {
            let p = fig4(t0);
            let full = integrate_deep_full(&p, 10.0, 1e-3).unwrap();
            let red = integrate_deep_reduced(&p, 10.0, 1e-3).unwrap();
            for ((_, a), (_, b)) in full.rows().zip(red.rows()) {
                for i in 0..4 {
                    assert!((a[i] - b[i]).abs() <= 1e-6);
                }
            }
            assert!(check_power_relation(&full, &layer_constants(&p)).unwrap() <= 1e-6);
        }
    }

    #[test]
    fn fixed_point_constant() {
        let c = layer_constants(&fig4(0.0));
        let p = fig4(c.fixed_point(1.0));
        let tr = integrate_deep_full(&p, 2.0, 1e-3).unwrap();
        for (_, row) in tr.rows() {
            assert!((row[3] - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn reduced_monotone_below_fixed_point() {
        let tr = integrate_deep_reduced(&fig4(0.0), 10.0, 1e-3).unwrap();
        let th = tr.column("theta_1").unwrap();
        assert!(th.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn depth_four_power_relation() {
        let p = DeepParams::new(1.0, vec![1.0, 1.0, 1.0], 0.5).unwrap();
        let tr = integrate_deep_full_sampled(&p, 20.0, 1e-3, 10).unwrap();
        assert!(check_power_relation(&tr, &layer_constants(&p)).unwrap() <= 1e-6);
    }

    #[test]
    fn product_convergence_grid() {
        for fa in [vec![2.0], vec![2.0, 2.5], vec![1.0, 1.0, 1.0]] {
            for lam in [0.5, 1.0, 3.0] {
                for t0 in [-0.5, 0.0, 1.0] {
                    let p = DeepParams::new(lam, fa.clone(), t0).unwrap();
                    let tr = integrate_deep_full_sampled(&p, 50.0, 1e-3, 1000).unwrap();
                    let (_, last) = tr.last().unwrap();
                    let err = last[last.len() - 1];
                    assert!(err <= 1e-6, "fa {fa:?} lam {lam} t0 {t0}: {err}");
                }
            }
        }
    }
}
