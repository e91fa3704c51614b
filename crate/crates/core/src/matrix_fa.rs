//! Full-matrix FA and GD updates, the SVD change of variables, and the linear-autoencoder experiment.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{finite, nonnegative, positive, Error, Result};

/// Forward weights W₁ … W_L (W₁ acts on the input).
#[derive(Clone, Debug, PartialEq)]
pub struct LinearModel {
    layers: Vec<DMatrix<f64>>,
}

impl LinearModel {
    pub fn new(layers: Vec<DMatrix<f64>>) -> Result<Self> {
        if layers.len() < 2 {
            return Err(Error::InvalidParameter("a linear model needs at least two layers".into()));
        }
        for (i, w) in layers.windows(2).enumerate() {
            if w[1].ncols() != w[0].nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "W{} is {}x{} but W{} is {}x{}",
                    i + 2,
                    w[1].nrows(),
                    w[1].ncols(),
                    i + 1,
                    w[0].nrows(),
                    w[0].ncols()
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn two_layer(w1: DMatrix<f64>, w2: DMatrix<f64>) -> Result<Self> {
        Self::new(vec![w1, w2])
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }
    pub fn layers(&self) -> &[DMatrix<f64>] {
        &self.layers
    }
    pub fn w1(&self) -> &DMatrix<f64> {
        &self.layers[0]
    }
    pub fn w2(&self) -> &DMatrix<f64> {
        &self.layers[1]
    }
    pub fn input_dim(&self) -> usize {
        self.layers[0].ncols()
    }
    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].nrows()
    }

    /// W_L ⋯ W₁.
    pub fn end_to_end(&self) -> DMatrix<f64> {
        let mut p = self.layers[0].clone();
        for w in &self.layers[1..] {
            p = w * p;
        }
        p
    }

    /// Sum of singular values of the end-to-end product.
    pub fn trace_norm(&self) -> f64 {
        self.end_to_end().singular_values().sum()
    }
}

#[derive(Clone, Debug)]
pub struct DataModel {
    pub sigma_xx: DMatrix<f64>,
    pub sigma_xy: DMatrix<f64>,
    /// E[yyᵀ], when known; needed for absolute reconstruction errors.
    pub sigma_yy: Option<DMatrix<f64>>,
    /// Input samples as columns, when the model was built from data.
    pub samples: Option<DMatrix<f64>>,
}

impl DataModel {
    pub fn new(sigma_xx: DMatrix<f64>, sigma_xy: DMatrix<f64>) -> Result<Self> {
        let d = sigma_xx.nrows();
        if sigma_xx.ncols() != d {
            return Err(Error::DimensionMismatch("sigma_xx must be square".into()));
        }
        if sigma_xy.ncols() != d {
            return Err(Error::DimensionMismatch(format!("sigma_xy has {} columns, expected {d}", sigma_xy.ncols())));
        }
        let scale = sigma_xx.amax().max(1.0);
        if (&sigma_xx - sigma_xx.transpose()).amax() > 1e-12 * scale {
            return Err(Error::InvalidParameter("sigma_xx is not symmetric".into()));
        }
        let min_eig = sigma_xx.clone().symmetric_eigenvalues().min();
        if !(min_eig > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma_xx is not positive definite (min eigenvalue {min_eig:e})")));
        }
        Ok(Self { sigma_xx, sigma_xy, sigma_yy: None, samples: None })
    }

    /// Empirical second moments of input columns `x` (d×n) and targets `y` (o×n).
    pub fn from_samples(x: DMatrix<f64>, y: &DMatrix<f64>) -> Result<Self> {
        let n = x.ncols();
        if y.ncols() != n || n == 0 {
            return Err(Error::DimensionMismatch("x and y need the same positive number of samples".into()));
        }
        let inv = 1.0 / n as f64;
        let sxx = (&x * x.transpose()) * inv;
        let sxx = 0.5 * (&sxx + sxx.transpose());
        let sxy = (y * x.transpose()) * inv;
        let syy = (y * y.transpose()) * inv;
        let mut dm = Self::new(sxx, sxy)?;
        dm.sigma_yy = Some(syy);
        dm.samples = Some(x);
        Ok(dm)
    }

    /// Targets equal inputs.
    pub fn autoencoder(x: DMatrix<f64>) -> Result<Self> {
        let y = x.clone();
        Self::from_samples(x, &y)
    }

    pub fn input_dim(&self) -> usize {
        self.sigma_xx.nrows()
    }
    pub fn output_dim(&self) -> usize {
        self.sigma_xy.nrows()
    }

    /// E‖y − Px‖² = tr Σ_yy − 2 tr(PΣ_xyᵀ) + tr(PΣ_xxPᵀ).
    pub fn reconstruction_error(&self, p: &DMatrix<f64>) -> Result<f64> {
        let syy = self
            .sigma_yy
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter("sigma_yy unknown for this data model".into()))?;
        Ok(syy.trace() - 2.0 * (p * self.sigma_xy.transpose()).trace() + (p * &self.sigma_xx * p.transpose()).trace())
    }

    /// Σ_xy − PΣ_xx.
    pub fn residual(&self, p: &DMatrix<f64>) -> DMatrix<f64> {
        &self.sigma_xy - p * &self.sigma_xx
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StructuredFactors {
    pub r: DMatrix<f64>,
    pub d: Vec<f64>,
    pub u: DMatrix<f64>,
}

/// Fixed feedback matrices; `feedback[k]` stands in for W_{k+2}ᵀ.
#[derive(Clone, Debug, PartialEq)]
pub struct FaMatrices {
    pub feedback: Vec<DMatrix<f64>>,
    pub structure: Option<StructuredFactors>,
}

impl FaMatrices {
    pub fn new(feedback: Vec<DMatrix<f64>>) -> Self {
        Self { feedback, structure: None }
    }

    /// The two-layer feedback matrix M.
    pub fn m(&self) -> &DMatrix<f64> {
        &self.feedback[0]
    }
}

fn orthonormal_columns(a: &DMatrix<f64>, name: &str) -> Result<()> {
    let k = a.ncols();
    if (a.transpose() * a - DMatrix::identity(k, k)).amax() > 1e-10 {
        return Err(Error::InvalidParameter(format!("{name} does not have orthonormal columns")));
    }
    Ok(())
}

/// M = R·diag(D)·Uᵀ with R (h×k), U (o×k) orthonormal columns and D > 0.
pub fn structured_fa_matrix(r: DMatrix<f64>, d_diag: &[f64], u: DMatrix<f64>) -> Result<FaMatrices> {
    let k = d_diag.len();
    if r.ncols() != k || u.ncols() != k {
        return Err(Error::DimensionMismatch(format!(
            "R has {} columns, U has {}, D has {k} entries",
            r.ncols(),
            u.ncols()
        )));
    }
    for &v in d_diag {
        positive(v, "D_ii")?;
    }
    orthonormal_columns(&r, "R")?;
    orthonormal_columns(&u, "U")?;
    let m = &r * DMatrix::from_diagonal(&DVector::from_column_slice(d_diag)) * u.transpose();
    Ok(FaMatrices { feedback: vec![m], structure: Some(StructuredFactors { r, d: d_diag.to_vec(), u }) })
}

fn backprop_step(model: &LinearModel, data: &DataModel, eta: f64, feedback: Option<&[DMatrix<f64>]>) -> Result<LinearModel> {
    finite(eta, "eta")?;
    let l = model.depth();
    if model.input_dim() != data.input_dim() || model.output_dim() != data.output_dim() {
        return Err(Error::DimensionMismatch(format!(
            "model maps {} -> {}, data maps {} -> {}",
            model.input_dim(),
            model.output_dim(),
            data.input_dim(),
            data.output_dim()
        )));
    }
    let ws = model.layers();
    if let Some(fb) = feedback {
        if fb.len() != l - 1 {
            return Err(Error::DimensionMismatch(format!("{} feedback matrices for depth {l}", fb.len())));
        }
        for (k, b) in fb.iter().enumerate() {
            let w = &ws[k + 1];
            if b.nrows() != w.ncols() || b.ncols() != w.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "feedback {} is {}x{}, expected {}x{}",
                    k + 1,
                    b.nrows(),
                    b.ncols(),
                    w.ncols(),
                    w.nrows()
                )));
            }
        }
    }
    // partial products H_ℓ = W_ℓ ⋯ W₁
    let mut below = Vec::with_capacity(l);
    let mut h = ws[0].clone();
    below.push(h.clone());
    for w in &ws[1..] {
        h = w * h;
        below.push(h.clone());
    }
    let err = data.residual(&below[l - 1]);
    let mut next = ws.to_vec();
    let mut delta = err;
    for i in (0..l).rev() {
        let update = if i == 0 { delta.clone() } else { &delta * below[i - 1].transpose() };
        next[i] += eta * update;
        if i > 0 {
            delta = match feedback {
                Some(fb) => &fb[i - 1] * &delta,
                None => ws[i].transpose() * &delta,
            };
        }
    }
    LinearModel::new(next)
}

/// One simultaneous FA update from time-t values.
pub fn fa_matrix_step(model: &LinearModel, data: &DataModel, fa: &FaMatrices, eta: f64) -> Result<LinearModel> {
    backprop_step(model, data, eta, Some(&fa.feedback))
}

/// One simultaneous gradient-descent update.
pub fn gd_matrix_step(model: &LinearModel, data: &DataModel, eta: f64) -> Result<LinearModel> {
    backprop_step(model, data, eta, None)
}

/// Extends orthonormal columns to a full orthonormal basis.
fn complete_basis(q: &DMatrix<f64>, n: usize) -> DMatrix<f64> {
    let mut cols: Vec<DVector<f64>> = q.column_iter().map(|c| c.into_owned()).collect();
    let mut e = 0;
    while cols.len() < n && e < n {
        let mut v = DVector::from_fn(n, |i, _| if i == e { 1.0 } else { 0.0 });
        for _ in 0..2 {
            for c in &cols {
                let proj = c.dot(&v);
                v -= proj * c;
            }
        }
        let norm = v.norm();
        if norm > 1e-8 {
            cols.push(v / norm);
        }
        e += 1;
    }
    DMatrix::from_columns(&cols)
}

/// Σ_xy = U Λ_xy Vᵀ with Λ_xx = Vᵀ Σ_xx V, plus the hidden-space rotation R.
#[derive(Clone, Debug)]
pub struct SpectralFrame {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub r: DMatrix<f64>,
    pub lambda_xy: DMatrix<f64>,
    pub lambda_xx: DMatrix<f64>,
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Largest off-diagonal entry of Vᵀ Σ_xx V; zero when Σ_xx and Σ_xy share V.
    pub commutation_defect: f64,
}

impl SpectralFrame {
    pub fn rank_deficient(&self) -> bool {
        self.rank < self.singular_values.len()
    }

    /// (W̃₁, W̃₂) = (Rᵀ W₁ V, Uᵀ W₂ R).
    pub fn to_transformed(&self, model: &LinearModel) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        if model.depth() != 2 {
            return Err(Error::InvalidParameter("change of variables is defined for two layers".into()));
        }
        let (w1, w2) = (model.w1(), model.w2());
        if w1.nrows() != self.r.nrows() || w1.ncols() != self.v.nrows() || w2.nrows() != self.u.nrows() {
            return Err(Error::DimensionMismatch("model does not match the frame".into()));
        }
        Ok((self.r.transpose() * w1 * &self.v, self.u.transpose() * w2 * &self.r))
    }

    /// W₁ = R W̃₁ Vᵀ, W₂ = U W̃₂ Rᵀ.
    pub fn from_transformed(&self, w1t: &DMatrix<f64>, w2t: &DMatrix<f64>) -> Result<LinearModel> {
        LinearModel::two_layer(&self.r * w1t * self.v.transpose(), &self.u * w2t * self.r.transpose())
    }

    /// D̃ = Rᵀ M U; diagonal for structured feedback.
    pub fn transformed_feedback(&self, fa: &FaMatrices) -> DMatrix<f64> {
        self.r.transpose() * fa.m() * &self.u
    }

    /// Λ_xx^{1/2} Λ_xy Λ_xx^{−1/2}, the signal matrix of the equivalent isotropic problem.
    pub fn isotropic_lambda_xy(&self) -> DMatrix<f64> {
        let (o, d) = self.lambda_xy.shape();
        let lxx: Vec<f64> = (0..d).map(|i| self.lambda_xx[(i, i)]).collect();
        let left = DMatrix::from_fn(o, o, |i, j| if i == j && i < d { lxx[i].sqrt() } else if i == j { 1.0 } else { 0.0 });
        let right = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 / lxx[i].sqrt() } else { 0.0 });
        left * &self.lambda_xy * right
    }
}

pub fn svd_change_of_variables(data: &DataModel, r_matrix: &DMatrix<f64>) -> Result<SpectralFrame> {
    if r_matrix.nrows() != r_matrix.ncols() {
        return Err(Error::DimensionMismatch("R must be square".into()));
    }
    orthonormal_columns(r_matrix, "R")?;
    let (o, d) = data.sigma_xy.shape();
    let svd = data.sigma_xy.clone().svd(true, true);
    let (u_thin, vt_thin) = (svd.u.expect("requested"), svd.v_t.expect("requested"));
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sv: Vec<f64> = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u_sorted = DMatrix::from_columns(&order.iter().map(|&i| u_thin.column(i).into_owned()).collect::<Vec<_>>());
    let v_sorted = DMatrix::from_columns(&order.iter().map(|&i| vt_thin.row(i).transpose()).collect::<Vec<_>>());
    let u = complete_basis(&u_sorted, o);
    let v = complete_basis(&v_sorted, d);
    let lambda_xy = DMatrix::from_fn(o, d, |i, j| if i == j { sv[i] } else { 0.0 });
    let lambda_xx = v.transpose() * &data.sigma_xx * &v;
    let mut defect = 0f64;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                defect = defect.max(lambda_xx[(i, j)].abs());
            }
        }
    }
    let top = sv.first().copied().unwrap_or(0.0);
    let rank = sv.iter().filter(|&&s| s > 1e-12 * top.max(f64::MIN_POSITIVE)).count();
    Ok(SpectralFrame {
        u,
        v,
        r: r_matrix.clone(),
        lambda_xy,
        lambda_xx,
        singular_values: sv,
        rank,
        commutation_defect: defect,
    })
}

/// Autoencoder experiment settings; missing keys take the defaults below.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderConfig {
    pub input_dim: usize,
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub n_samples: usize,
    pub noise_std: f64,
    pub init_scale: f64,
    pub eta: f64,
    /// Multiplies the residual Σ_xy − PΣ_xx in every update [default: 0.5 for two layers, 0.1 for three].
    pub loss_scale: Option<f64>,
    pub steps: usize,
    pub repeats: usize,
    pub depth: usize,
    /// Seeds A, the latent draws, the noise and W⁽⁰⁾.
    pub data_seed: u64,
    /// One seed per repeat for the feedback matrices; defaults to data_seed+1 ….
    pub seeds: Option<Vec<u64>>,
    /// Draw fresh noise ε in every repeat.
    pub resample_noise: bool,
    pub record_every: usize,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        Self {
            input_dim: 20,
            latent_dim: 5,
            hidden_dim: 5,
            n_samples: 1000,
            noise_std: 1e-3,
            init_scale: 1e-5,
            eta: 0.01,
            loss_scale: None,
            steps: 5000,
            repeats: 15,
            depth: 2,
            data_seed: 0,
            seeds: None,
            resample_noise: false,
            record_every: 1,
        }
    }
}

impl AutoencoderConfig {
    pub fn validate(&self) -> Result<()> {
        for (v, n) in [
            (self.input_dim, "input_dim"),
            (self.latent_dim, "latent_dim"),
            (self.hidden_dim, "hidden_dim"),
            (self.n_samples, "n_samples"),
            (self.steps, "steps"),
            (self.record_every, "record_every"),
        ] {
            if v == 0 {
                return Err(Error::InvalidParameter(format!("{n} must be positive")));
            }
        }
        if !(2..=3).contains(&self.depth) {
            return Err(Error::InvalidParameter(format!("depth must be 2 or 3, got {}", self.depth)));
        }
        nonnegative(self.noise_std, "noise_std")?;
        nonnegative(self.init_scale, "init_scale")?;
        positive(self.eta, "eta")?;
        positive(self.effective_loss_scale(), "loss_scale")?;
        if let Some(s) = &self.seeds {
            if s.len() != self.repeats {
                return Err(Error::InvalidParameter(format!("{} seeds for {} repeats", s.len(), self.repeats)));
            }
        }
        Ok(())
    }

    pub fn effective_loss_scale(&self) -> f64 {
        self.loss_scale.unwrap_or(if self.depth >= 3 { 0.1 } else { 0.5 })
    }

    /// Copy with the depth-dependent defaults filled in.
    pub fn resolved(&self) -> Self {
        Self { loss_scale: Some(self.effective_loss_scale()), seeds: Some(self.feedback_seeds()), ..self.clone() }
    }

    pub fn feedback_seeds(&self) -> Vec<u64> {
        match &self.seeds {
            Some(s) => s.clone(),
            None => (1..=self.repeats as u64).map(|i| self.data_seed.wrapping_add(i)).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesStats {
    pub mean: Vec<f64>,
    /// Population standard deviation over repeats.
    pub std: Vec<f64>,
}

impl SeriesStats {
    pub fn from_runs(runs: &[Vec<f64>]) -> Self {
        let n = runs.len() as f64;
        let len = runs.first().map_or(0, Vec::len);
        let mut mean = vec![0.0; len];
        let mut std = vec![0.0; len];
        for i in 0..len {
            let m = runs.iter().map(|r| r[i]).sum::<f64>() / n;
            let var = runs.iter().map(|r| (r[i] - m).powi(2)).sum::<f64>() / n;
            mean[i] = m;
            std[i] = var.sqrt();
        }
        Self { mean, std }
    }

    pub fn lower_band(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.std).map(|(m, s)| m - 2.0 * s).collect()
    }

    pub fn upper_band(&self) -> Vec<f64> {
        self.mean.iter().zip(&self.std).map(|(m, s)| m + 2.0 * s).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentMetrics {
    pub steps: Vec<usize>,
    pub fa_trace_norm: SeriesStats,
    pub fa_reconstruction_error: SeriesStats,
    pub gd_trace_norm: SeriesStats,
    pub gd_reconstruction_error: SeriesStats,
    pub seeds: Vec<u64>,
}

impl ExperimentMetrics {
    pub fn series(&self) -> [(&'static str, &SeriesStats); 4] {
        [
            ("fa_trace_norm", &self.fa_trace_norm),
            ("fa_reconstruction_error", &self.fa_reconstruction_error),
            ("gd_trace_norm", &self.gd_trace_norm),
            ("gd_reconstruction_error", &self.gd_reconstruction_error),
        ]
    }

    /// CSV `step,metric,mean,std`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        use crate::trajectory::fmt_f64;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["step", "metric", "mean", "std"])?;
        for (i, step) in self.steps.iter().enumerate() {
            for (name, s) in self.series() {
                w.write_record([step.to_string(), name.to_string(), fmt_f64(s.mean[i]), fmt_f64(s.std[i])])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.gen::<f64>())
}

fn normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| scale * rng.sample::<f64, _>(StandardNormal))
}

/// Inputs x_i = A z_i + ε_i as columns, with fixed A and latent draws.
#[derive(Clone, Debug)]
pub struct SyntheticData {
    pub a: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub noise: DMatrix<f64>,
}

impl SyntheticData {
    pub fn generate(cfg: &AutoencoderConfig, rng: &mut ChaCha8Rng) -> Self {
        let a = uniform_matrix(rng, cfg.input_dim, cfg.latent_dim, 1.0);
        let z = normal_matrix(rng, cfg.latent_dim, cfg.n_samples, 1.0);
        let noise = normal_matrix(rng, cfg.input_dim, cfg.n_samples, cfg.noise_std);
        Self { a, z, noise }
    }

    pub fn inputs(&self) -> DMatrix<f64> {
        &self.a * &self.z + &self.noise
    }
}

fn layer_shapes(cfg: &AutoencoderConfig) -> Vec<(usize, usize)> {
    let (d, h) = (cfg.input_dim, cfg.hidden_dim);
    let mut shapes = vec![(h, d)];
    for _ in 0..cfg.depth - 2 {
        shapes.push((h, h));
    }
    shapes.push((d, h));
    shapes
}

struct Series {
    trace: Vec<f64>,
    recon: Vec<f64>,
}

fn train(
    init: &LinearModel,
    data: &DataModel,
    fa: Option<&FaMatrices>,
    cfg: &AutoencoderConfig,
) -> Result<Series> {
    let eta = cfg.eta * cfg.effective_loss_scale();
    let mut model = init.clone();
    let mut out = Series { trace: Vec::new(), recon: Vec::new() };
    for step in 0..=cfg.steps {
        if step > 0 {
            model = match fa {
                Some(fa) => fa_matrix_step(&model, data, fa, eta)?,
                None => gd_matrix_step(&model, data, eta)?,
            };
            let mag = model.layers().iter().map(|w| w.amax()).fold(0.0, f64::max);
            if !mag.is_finite() || mag > crate::error::DIVERGENCE_LIMIT {
                return Err(Error::Diverged { time: step as f64, magnitude: mag });
            }
        }
        if step % cfg.record_every == 0 || step == cfg.steps {
            let p = model.end_to_end();
            out.trace.push(p.singular_values().sum());
            out.recon.push(data.reconstruction_error(&p)?);
        }
    }
    Ok(out)
}

/// FA (fresh feedback per seed) and GD on the same data and initialization.
pub fn autoencoder_experiment(cfg: &AutoencoderConfig, seeds: &[u64]) -> Result<ExperimentMetrics> {
    cfg.validate()?;
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("seed list is empty".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.data_seed);
    let base = SyntheticData::generate(cfg, &mut rng);
    let shapes = layer_shapes(cfg);
    let init = LinearModel::new(shapes.iter().map(|&(r, c)| uniform_matrix(&mut rng, r, c, cfg.init_scale)).collect())?;
    let shared = DataModel::autoencoder(base.inputs())?;

    let runs: Vec<(Series, Series)> = seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let feedback =
                FaMatrices::new(shapes[1..].iter().map(|&(r, c)| uniform_matrix(&mut rng, c, r, 1.0)).collect());
            let own;
            let data = if cfg.resample_noise {
                let noise = normal_matrix(&mut rng, cfg.input_dim, cfg.n_samples, cfg.noise_std);
                own = DataModel::autoencoder(&base.a * &base.z + noise)?;
                &own
            } else {
                &shared
            };
            Ok((train(&init, data, Some(&feedback), cfg)?, train(&init, data, None, cfg)?))
        })
        .collect::<Result<_>>()?;

    let steps: Vec<usize> = (0..=cfg.steps).filter(|s| s % cfg.record_every == 0 || *s == cfg.steps).collect();
    let pick = |f: &dyn Fn(&(Series, Series)) -> &Vec<f64>| runs.iter().map(|r| f(r).clone()).collect::<Vec<_>>();
    Ok(ExperimentMetrics {
        steps,
        fa_trace_norm: SeriesStats::from_runs(&pick(&|r| &r.0.trace)),
        fa_reconstruction_error: SeriesStats::from_runs(&pick(&|r| &r.0.recon)),
        gd_trace_norm: SeriesStats::from_runs(&pick(&|r| &r.1.trace)),
        gd_reconstruction_error: SeriesStats::from_runs(&pick(&|r| &r.1.recon)),
        seeds: seeds.to_vec(),
    })
}

/// Random orthogonal n×n matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal(n: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    let g = normal_matrix(rng, n, n, 1.0);
    let qr = g.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar_discrete::{euler_eta_max, euler_run};

    fn m1(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    fn scalar_data(lambda: f64) -> DataModel {
        DataModel::new(m1(1.0), m1(lambda)).unwrap()
    }

    #[test]
    fn one_by_one_fa_matches_euler() {
        let (d, lam) = (2.0, 1.5);
        let eta = 0.9 * euler_eta_max(d, lam).unwrap();
        let run = euler_run(d, lam, eta, 300).unwrap();
        let fa = structured_fa_matrix(m1(1.0), &[d], m1(1.0)).unwrap();
        assert_eq!(fa.m()[(0, 0)], 2.0);
        let mut model = LinearModel::two_layer(m1(0.0), m1(0.0)).unwrap();
        let data = scalar_data(lam);
        for (_, row) in run.trajectory.rows() {
            assert!((model.w1()[(0, 0)] - row[0]).abs() <= 1e-14);
            assert!((model.w2()[(0, 0)] - row[1]).abs() <= 1e-14);
            model = fa_matrix_step(&model, &data, &fa, eta).unwrap();
        }
    }

    #[test]
    fn zero_step_is_identity() {
        let data = scalar_data(1.0);
        let model = LinearModel::two_layer(m1(0.3), m1(-0.2)).unwrap();
        let fa = FaMatrices::new(vec![m1(1.0)]);
        assert_eq!(fa_matrix_step(&model, &data, &fa, 0.0).unwrap(), model);
        assert_eq!(gd_matrix_step(&model, &data, 0.0).unwrap(), model);
    }

    #[test]
    fn zero_init_fa_moves_gd_does_not() {
        let data = scalar_data(1.0);
        let zero = LinearModel::two_layer(m1(0.0), m1(0.0)).unwrap();
        let fa = FaMatrices::new(vec![m1(1.0)]);
        assert!(fa_matrix_step(&zero, &data, &fa, 0.1).unwrap().w1().norm() > 0.0);
        let mut gd = zero.clone();
        for _ in 0..100 {
            gd = gd_matrix_step(&gd, &data, 0.1).unwrap();
        }
        assert_eq!(gd, zero);
    }

    #[test]
    fn balanced_gd_stays_balanced() {
        let data = scalar_data(2.0);
        let mut m = LinearModel::two_layer(m1(0.1), m1(0.1)).unwrap();
        for _ in 0..2000 {
            m = gd_matrix_step(&m, &data, 0.05).unwrap();
            assert!((m.w1()[(0, 0)] - m.w2()[(0, 0)]).abs() < 1e-14);
        }
        assert!((m.w1()[(0, 0)] - 2f64.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let data = DataModel::new(DMatrix::identity(3, 3), DMatrix::zeros(2, 3)).unwrap();
        let model = LinearModel::two_layer(DMatrix::zeros(4, 3), DMatrix::zeros(2, 4)).unwrap();
        assert!(fa_matrix_step(&model, &data, &FaMatrices::new(vec![DMatrix::zeros(2, 4)]), 0.1).is_err());
        assert!(fa_matrix_step(&model, &data, &FaMatrices::new(vec![DMatrix::zeros(4, 2)]), 0.1).is_ok());
        assert!(LinearModel::two_layer(DMatrix::zeros(4, 3), DMatrix::zeros(2, 5)).is_err());
        let bad = LinearModel::two_layer(DMatrix::zeros(4, 2), DMatrix::zeros(2, 4)).unwrap();
        assert!(gd_matrix_step(&bad, &data, 0.1).is_err());
    }

    #[test]
    fn structured_rejects_nonpositive_diagonal() {
        let i = DMatrix::<f64>::identity(2, 2);
        assert!(structured_fa_matrix(i.clone(), &[1.0, 0.0], i.clone()).is_err());
        assert!(structured_fa_matrix(i.clone(), &[1.0, -2.0], i.clone()).is_err());
        let fa = structured_fa_matrix(i.clone(), &[1.0, 2.0], i).unwrap();
        assert_eq!(fa.m().rank(1e-12), 2);
    }

    #[test]
    fn isotropic_frame_is_trivial() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let sxy = normal_matrix(&mut rng, 4, 4, 1.0);
        let data = DataModel::new(DMatrix::identity(4, 4), sxy).unwrap();
        let frame = svd_change_of_variables(&data, &DMatrix::identity(3, 3)).unwrap();
        assert!((&frame.lambda_xx - DMatrix::<f64>::identity(4, 4)).amax() < 1e-12);
        assert!((frame.isotropic_lambda_xy() - &frame.lambda_xy).amax() < 1e-12);
        assert!(!frame.rank_deficient());
        let rebuilt = &frame.u * &frame.lambda_xy * frame.v.transpose();
        assert!((rebuilt - &data.sigma_xy).amax() < 1e-12);
    }

    #[test]
    fn roundtrip_transform() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let sxy = normal_matrix(&mut rng, 4, 4, 1.0);
        let data = DataModel::new(DMatrix::identity(4, 4), sxy).unwrap();
        let r = random_orthogonal(3, &mut rng);
        let frame = svd_change_of_variables(&data, &r).unwrap();
        let model = LinearModel::two_layer(normal_matrix(&mut rng, 3, 4, 1.0), normal_matrix(&mut rng, 4, 3, 1.0)).unwrap();
        let (a, b) = frame.to_transformed(&model).unwrap();
        let back = frame.from_transformed(&a, &b).unwrap();
        assert!((back.w1() - model.w1()).amax() < 1e-10);
        assert!((back.w2() - model.w2()).amax() < 1e-10);
    }

    #[test]
    fn rank_deficiency_reported() {
        let sxy = DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0]);
        let data = DataModel::new(DMatrix::identity(3, 3), sxy).unwrap();
        let frame = svd_change_of_variables(&data, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(frame.rank, 2);
        assert!(frame.rank_deficient());
        assert_eq!(frame.u.shape(), (3, 3));
    }

    #[test]
    fn rectangular_frame_completes_bases() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let sxy = normal_matrix(&mut rng, 2, 5, 1.0);
        let data = DataModel::new(DMatrix::identity(5, 5), sxy.clone()).unwrap();
        let frame = svd_change_of_variables(&data, &DMatrix::identity(3, 3)).unwrap();
        assert_eq!(frame.v.shape(), (5, 5));
        assert!((frame.v.transpose() * &frame.v - DMatrix::<f64>::identity(5, 5)).amax() < 1e-12);
        assert!((&frame.u * &frame.lambda_xy * frame.v.transpose() - sxy).amax() < 1e-12);
    }

    #[test]
    fn non_pd_covariance_rejected() {
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(DataModel::new(bad, DMatrix::zeros(1, 2)).is_err());
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.1, 0.0, 1.0]);
        assert!(DataModel::new(asym, DMatrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn synthetic_covariance_positive_definite() {
        let cfg = AutoencoderConfig { n_samples: 10_000, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let data = DataModel::autoencoder(SyntheticData::generate(&cfg, &mut rng).inputs()).unwrap();
        assert!(data.sigma_xx.clone().symmetric_eigenvalues().min() > 0.0);
    }

    #[test]
    fn reconstruction_error_matches_samples() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = normal_matrix(&mut rng, 4, 50, 1.0);
        let data = DataModel::autoencoder(x.clone()).unwrap();
        let p = normal_matrix(&mut rng, 4, 4, 0.3);
        let direct = (&x - &p * &x).column_iter().map(|c| c.norm_squared()).sum::<f64>() / 50.0;
        assert!((data.reconstruction_error(&p).unwrap() - direct).abs() < 1e-10);
    }

    #[test]
    fn single_repeat_has_zero_band() {
        let cfg = AutoencoderConfig { steps: 50, repeats: 1, ..Default::default() };
        let m = autoencoder_experiment(&cfg, &cfg.feedback_seeds()).unwrap();
        assert!(m.fa_trace_norm.std.iter().all(|&s| s == 0.0));
        assert_eq!(m.fa_trace_norm.lower_band(), m.fa_trace_norm.mean);
        assert_eq!(m.steps.len(), 51);
        assert!(autoencoder_experiment(&cfg, &[]).is_err());
    }

    #[test]
    fn three_layer_runs() {
        let cfg = AutoencoderConfig { steps: 20, repeats: 2, depth: 3, ..Default::default() };
        assert_eq!(cfg.effective_loss_scale(), 0.1);
        let m = autoencoder_experiment(&cfg, &cfg.feedback_seeds()).unwrap();
        assert_eq!(m.gd_reconstruction_error.mean.len(), 21);
    }

    #[test]
    fn config_from_partial_toml_fields() {
        let cfg: AutoencoderConfig = serde_json::from_str(r#"{"depth": 3, "repeats": 2}"#).unwrap();
        assert_eq!(cfg.depth, 3);
        assert_eq!(cfg.feedback_seeds(), vec![1, 2]);
        assert!(serde_json::from_str::<AutoencoderConfig>(r#"{"bogus": 1}"#).is_err());
        assert!(AutoencoderConfig { depth: 4, ..Default::default() }.validate().is_err());
    }
}
