//! The four filters behind one interface: Kalman filter, bootstrap particle
//! filter, stochastic ensemble Kalman filter, and the kernel variational
//! inference flow filter (KVIFF).
//!
//! KVIFF runs the standard predict step, then replaces the update stage with
//! an explicit Euler flow: starting from an initializer (the raw prediction
//! particles, a PF resample, or an EnKF analysis), every particle moves along
//! the kernel flow direction assembled from frozen prediction particles and
//! their normalized likelihood ratios. All updates are synchronous: kernel
//! terms for inner step `tau` are evaluated at the previous iterate.

use nalgebra::{DMatrix, DVector, Dyn};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::{kvif_directions, KernelSpec};
use crate::models::{NoiseSpec, ScenarioSpec, StateSpaceModel, TruthRun};

/// An equally-weighted particle representation of the filtering posterior.
#[derive(Debug, Clone, PartialEq)]
pub struct Ensemble {
    pub particles: Vec<DVector<f64>>,
    /// Time index the particles refer to.
    pub step: usize,
}

impl Ensemble {
    pub fn new(particles: Vec<DVector<f64>>, step: usize) -> Result<Self> {
        let dim = match particles.first() {
            Some(p) => p.len(),
            None => return Err(Error::usage("ensemble must hold at least one particle")),
        };
        for p in &particles {
            if p.len() != dim {
                return Err(Error::usage("ensemble particles must share one dimension"));
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(Error::usage("ensemble particles must be finite"));
            }
        }
        Ok(Ensemble { particles, step })
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.particles[0].len()
    }

    /// Root-mean-square deviation from the ensemble mean, per coordinate.
    pub fn rms_spread(&self) -> f64 {
        let mean = estimate(self);
        let n = self.len() as f64;
        let d = self.dim() as f64;
        let ss: f64 = self.particles.iter().map(|p| (p - &mean).norm_squared()).sum();
        (ss / (n * d)).sqrt()
    }
}

/// Gaussian filtering state for the exact Kalman recursion.
#[derive(Debug, Clone)]
pub struct GaussianBelief {
    pub mean: DVector<f64>,
    pub covariance: DMatrix<f64>,
}

impl GaussianBelief {
    pub fn new(mean: DVector<f64>, covariance: DMatrix<f64>) -> Result<Self> {
        if covariance.nrows() != mean.len() || covariance.ncols() != mean.len() {
            return Err(Error::usage("belief covariance shape must match the mean"));
        }
        crate::models::psd_cholesky(&covariance)?;
        Ok(GaussianBelief { mean, covariance })
    }
}

/// Initializer for the KVIF inner flow (row 10 of the filter loop).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KvifInit {
    /// Start from the prediction particles unchanged.
    Raw,
    /// Start from a bootstrap-PF resample of the prediction particles.
    Pf,
    /// Start from a stochastic EnKF analysis of the prediction particles.
    Enkf,
}

impl KvifInit {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "raw" => Ok(KvifInit::Raw),
            "pf" => Ok(KvifInit::Pf),
            "enkf" => Ok(KvifInit::Enkf),
            other => Err(Error::usage(format!(
                "unknown kviff initializer `{other}` (expected raw|pf|enkf)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KvifInit::Raw => "raw",
            KvifInit::Pf => "pf",
            KvifInit::Enkf => "enkf",
        }
    }
}

/// KVIFF update-stage configuration.
#[derive(Debug, Clone)]
pub struct KvifConfig {
    pub kernel: KernelSpec,
    pub step_size: f64,
    pub num_steps: usize,
    pub initializer: KvifInit,
}

impl KvifConfig {
    pub fn new(
        kernel: KernelSpec,
        step_size: f64,
        num_steps: usize,
        initializer: KvifInit,
    ) -> Result<Self> {
        if num_steps > 0 && !(step_size > 0.0 && step_size.is_finite()) {
            return Err(Error::usage(format!(
                "kviff step size must be positive when num_steps > 0, got {step_size}"
            )));
        }
        Ok(KvifConfig { kernel, step_size, num_steps, initializer })
    }
}

/// Propagate every particle through the assumed dynamics plus one process
/// noise draw. Draws are consumed in particle order.
pub fn predict(
    model: &StateSpaceModel,
    ensemble: &Ensemble,
    rng: &mut ChaCha8Rng,
) -> Result<Ensemble> {
    if ensemble.dim() != model.dim_x {
        return Err(Error::usage(format!(
            "predict: ensemble dim {} does not match model dim {}",
            ensemble.dim(),
            model.dim_x
        )));
    }
    let k = ensemble.step;
    let mut particles = Vec::with_capacity(ensemble.len());
    for p in &ensemble.particles {
        particles.push(model.transition_at(k, p) + model.process_noise.sample(rng)?);
    }
    Ok(Ensemble { particles, step: k + 1 })
}

/// Stable softmax of log-weights: max-subtraction, exponentiation, and
/// normalization to unit sum. An all-`-inf` input (fully degenerate
/// likelihood) falls back to uniform weights.
pub fn normalize_log_weights(log_weights: &[f64]) -> Vec<f64> {
    let n = log_weights.len();
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / n as f64; n];
    }
    let mut w: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let sum: f64 = w.iter().sum();
    for wi in &mut w {
        *wi /= sum;
    }
    w
}

/// Normalized likelihood ratios `Q(x_j) / C_Q` with `C_Q` the Monte Carlo
/// mean of the likelihoods, computed in the log domain. Equal log-likelihoods
/// give exactly `1.0` for every particle.
pub fn likelihood_ratios(log_weights: &[f64]) -> Vec<f64> {
    let n = log_weights.len();
    let max = log_weights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0; n];
    }
    let e: Vec<f64> = log_weights.iter().map(|l| (l - max).exp()).collect();
    let mean: f64 = e.iter().sum::<f64>() / n as f64;
    e.into_iter().map(|v| v / mean).collect()
}

/// Importance weights of the prediction particles against the effective
/// observation, normalized to unit sum.
pub fn normalized_weights(
    model: &StateSpaceModel,
    ensemble: &Ensemble,
    y_effective: &DVector<f64>,
) -> Result<Vec<f64>> {
    let log_liks = ensemble
        .particles
        .iter()
        .map(|p| model.log_likelihood(ensemble.step, y_effective, p))
        .collect::<Result<Vec<f64>>>()?;
    Ok(normalize_log_weights(&log_liks))
}

/// Systematic resampling with an explicit offset `u` in `[0, 1/N)`. Returns
/// the selected indices; index `i` is selected `floor(N w_i)` or
/// `ceil(N w_i)` times.
pub fn systematic_resample_with_u(weights: &[f64], u: f64) -> Result<Vec<usize>> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::usage("systematic_resample: empty weights"));
    }
    if let Some(w) = weights.iter().find(|w| **w < 0.0) {
        return Err(Error::usage(format!("systematic_resample: negative weight {w}")));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(Error::usage(format!(
            "systematic_resample: weights sum to {sum}, expected 1"
        )));
    }
    if !(0.0..1.0 / n as f64).contains(&u) {
        return Err(Error::usage(format!("systematic_resample: offset {u} out of [0, 1/N)")));
    }

    let mut indices = Vec::with_capacity(n);
    let mut i = 0usize;
    let mut cumulative = weights[0];
    for j in 0..n {
        let position = u + j as f64 / n as f64;
        while position >= cumulative && i + 1 < n {
            i += 1;
            cumulative += weights[i];
        }
        indices.push(i);
    }
    Ok(indices)
}

/// Systematic resampling with a single uniform draw.
pub fn systematic_resample(weights: &[f64], rng: &mut ChaCha8Rng) -> Result<Vec<usize>> {
    let n = weights.len();
    if n == 0 {
        return Err(Error::usage("systematic_resample: empty weights"));
    }
    let u: f64 = rng.gen::<f64>() / n as f64;
    systematic_resample_with_u(weights, u)
}

/// Bootstrap-PF update: importance weighting plus systematic resampling.
pub fn pf_update(
    model: &StateSpaceModel,
    ensemble: &Ensemble,
    y_effective: &DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Ensemble> {
    let weights = normalized_weights(model, ensemble, y_effective)?;
    let indices = systematic_resample(&weights, rng)?;
    let particles = indices.iter().map(|&i| ensemble.particles[i].clone()).collect();
    Ok(Ensemble { particles, step: ensemble.step })
}

/// Cholesky of `m + jitter*I`, escalating the jitter from `1e-12` to `1e-6`
/// before giving up.
fn cholesky_with_jitter(m: &DMatrix<f64>) -> Result<nalgebra::Cholesky<f64, Dyn>> {
    const JITTERS: [f64; 5] = [0.0, 1e-12, 1e-10, 1e-8, 1e-6];
    for &jitter in &JITTERS {
        let trial = if jitter == 0.0 {
            m.clone()
        } else {
            m + DMatrix::identity(m.nrows(), m.ncols()) * jitter
        };
        if let Some(chol) = trial.cholesky() {
            return Ok(chol);
        }
    }
    Err(Error::numerical(
        "innovation covariance not positive definite after jitter escalation to 1e-6",
    ))
}

/// Stochastic EnKF analysis with perturbed observations: ensemble
/// cross-covariance gain `G = C_xz (C_zz + R)^-1` and per-particle update
/// `x_i <- x_i + G (y + eta_i - z_i)` with `eta_i ~ N(0, R)`.
pub fn enkf_update(
    model: &StateSpaceModel,
    ensemble: &Ensemble,
    y_effective: &DVector<f64>,
    rng: &mut ChaCha8Rng,
) -> Result<Ensemble> {
    let n = ensemble.len();
    if n < 2 {
        return Err(Error::usage("enkf_update requires at least 2 particles"));
    }
    let (r_cov, noise_mean) = match &model.measurement_noise {
        NoiseSpec::Gaussian { mean, covariance } => (covariance, mean),
        _ => {
            return Err(Error::usage(
                "enkf_update requires a Gaussian assumed measurement noise",
            ))
        }
    };

    let step = ensemble.step;
    let predicted: Vec<DVector<f64>> =
        ensemble.particles.iter().map(|p| model.measurement_at(step, p)).collect();

    let d = ensemble.dim();
    let m = model.dim_y;
    let x_mean = estimate(ensemble);
    let mut z_mean = DVector::zeros(m);
    for z in &predicted {
        z_mean += z;
    }
    z_mean /= n as f64;

    let mut c_xz = DMatrix::zeros(d, m);
    let mut c_zz = DMatrix::zeros(m, m);
    for (p, z) in ensemble.particles.iter().zip(&predicted) {
        let dx = p - &x_mean;
        let dz = z - &z_mean;
        c_xz += &dx * dz.transpose();
        c_zz += &dz * dz.transpose();
    }
    c_xz /= (n - 1) as f64;
    c_zz /= (n - 1) as f64;

    let s = &c_zz + r_cov.to_matrix();
    let chol = cholesky_with_jitter(&s)?;
    // G = C_xz S^-1, via S X = C_xz^T (S symmetric)
    let gain = chol.solve(&c_xz.transpose()).transpose();

    let r_factor = r_cov.psd_factor()?;
    let mut particles = Vec::with_capacity(n);
    for (p, z) in ensemble.particles.iter().zip(&predicted) {
        let zdraw = DVector::from_fn(m, |_, _| rng.sample::<f64, _>(StandardNormal));
        let eta = &r_factor * zdraw;
        let innovation = y_effective - noise_mean + eta - z;
        particles.push(p + &gain * innovation);
    }
    Ok(Ensemble { particles, step })
}

/// Kalman prediction: `(A mu, A Sigma A^T + Q)`.
pub fn kf_predict(
    belief: &GaussianBelief,
    a: &DMatrix<f64>,
    q: &DMatrix<f64>,
) -> Result<GaussianBelief> {
    if a.ncols() != belief.mean.len() {
        return Err(Error::usage("kf_predict: transition shape mismatch"));
    }
    let mean = a * &belief.mean;
    let cov = a * &belief.covariance * a.transpose() + q;
    Ok(GaussianBelief { mean, covariance: symmetrize(&cov) })
}

/// Kalman update with gain `K = Sigma H^T (H Sigma H^T + R)^-1`.
pub fn kf_update(
    belief: &GaussianBelief,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    y: &DVector<f64>,
) -> Result<GaussianBelief> {
    if h.ncols() != belief.mean.len() || h.nrows() != y.len() {
        return Err(Error::usage("kf_update: observation shape mismatch"));
    }
    let s = h * &belief.covariance * h.transpose() + r;
    let chol = cholesky_with_jitter(&s)?;
    let ph_t = &belief.covariance * h.transpose();
    let gain = chol.solve(&ph_t.transpose()).transpose();
    let innovation = y - h * &belief.mean;
    let mean = &belief.mean + &gain * innovation;
    let n = belief.mean.len();
    let cov = (DMatrix::identity(n, n) - &gain * h) * &belief.covariance;
    Ok(GaussianBelief { mean, covariance: symmetrize(&cov) })
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Run the KVIF inner flow: `num_steps` synchronous Euler steps of size
/// `epsilon` along the kernel flow direction, with the prediction particles
/// and their likelihood ratios frozen throughout.
pub fn kvif_flow(
    kernel: &KernelSpec,
    prediction_particles: &[DVector<f64>],
    likelihood_ratios: &[f64],
    init_particles: Vec<DVector<f64>>,
    epsilon: f64,
    num_steps: usize,
) -> Result<Vec<DVector<f64>>> {
    let mut flow = init_particles;
    for tau in 1..=num_steps {
        let directions =
            kvif_directions(kernel, prediction_particles, likelihood_ratios, &flow, &flow)?;
        for (x, dir) in flow.iter_mut().zip(&directions) {
            x.axpy(epsilon, dir, 1.0);
        }
        if flow.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::Divergence { step: tau });
        }
    }
    Ok(flow)
}

/// KVIFF update stage: likelihood ratios from the prediction ensemble, an
/// initializer (raw/pf/enkf), then the KVIF inner flow.
pub fn kvif_update(
    model: &StateSpaceModel,
    prediction_ensemble: &Ensemble,
    y_effective: &DVector<f64>,
    config: &KvifConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Ensemble> {
    let log_liks = prediction_ensemble
        .particles
        .iter()
        .map(|p| model.log_likelihood(prediction_ensemble.step, y_effective, p))
        .collect::<Result<Vec<f64>>>()?;
    let q_ratio = likelihood_ratios(&log_liks);

    let init = match config.initializer {
        KvifInit::Raw => prediction_ensemble.particles.clone(),
        KvifInit::Pf => pf_update(model, prediction_ensemble, y_effective, rng)?.particles,
        KvifInit::Enkf => enkf_update(model, prediction_ensemble, y_effective, rng)?.particles,
    };

    let particles = kvif_flow(
        &config.kernel,
        &prediction_ensemble.particles,
        &q_ratio,
        init,
        config.step_size,
        config.num_steps,
    )?;
    Ok(Ensemble { particles, step: prediction_ensemble.step })
}

/// Coordinate-wise ensemble mean.
pub fn estimate(ensemble: &Ensemble) -> DVector<f64> {
    let mut mean = DVector::zeros(ensemble.dim());
    for p in &ensemble.particles {
        mean += p;
    }
    mean / ensemble.len() as f64
}

/// Which filter to run, with its method-specific parameters.
#[derive(Debug, Clone)]
pub enum MethodConfig {
    Kf,
    Pf,
    Enkf,
    Kviff(KvifConfig),
}

impl MethodConfig {
    pub fn name(&self) -> &'static str {
        match self {
            MethodConfig::Kf => "kf",
            MethodConfig::Pf => "pf",
            MethodConfig::Enkf => "enkf",
            MethodConfig::Kviff(_) => "kviff",
        }
    }
}

/// Output of one filter run: the per-step state estimates and an ensemble
/// spread summary per step.
#[derive(Debug, Clone)]
pub struct FilterRun {
    /// `estimates[k-1]` estimates `x_k`, for `k = 1..=K`.
    pub estimates: Vec<DVector<f64>>,
    /// RMS ensemble spread (or mean posterior standard deviation for the KF).
    pub spreads: Vec<f64>,
}

/// Run one filter over a simulated truth. The filter consumes its own seeded
/// stream: initialization draws, prediction noise, and update randomness all
/// come from it in a fixed order, so runs are bit-reproducible.
pub fn run_filter(
    scenario: &ScenarioSpec,
    method: &MethodConfig,
    num_particles: usize,
    truth: &TruthRun,
    seed: u64,
) -> Result<FilterRun> {
    let model = &scenario.model;
    let k_max = scenario.horizon;
    if truth.observations.len() != k_max {
        return Err(Error::usage(format!(
            "run_filter: truth has {} observations, scenario horizon is {}",
            truth.observations.len(),
            k_max
        )));
    }

    if let MethodConfig::Kf = method {
        return run_kalman(scenario, truth);
    }

    if num_particles == 0 {
        return Err(Error::usage("run_filter: num_particles must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // initial draw: mean + L z per particle, in particle order
    let init_factor = scenario.init_ensemble.covariance.psd_factor()?;
    let dim = model.dim_x;
    let particles: Vec<DVector<f64>> = (0..num_particles)
        .map(|_| {
            let z = DVector::from_fn(dim, |_, _| rng.sample::<f64, _>(StandardNormal));
            &scenario.init_ensemble.mean + &init_factor * z
        })
        .collect();
    let mut ensemble = Ensemble::new(particles, 0)?;

    let mut estimates = Vec::with_capacity(k_max);
    let mut spreads = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        ensemble = predict(model, &ensemble, &mut rng)?;
        let y_eff = truth.effective_observation(k, model.cumulative_observation);
        ensemble = match method {
            MethodConfig::Pf => pf_update(model, &ensemble, &y_eff, &mut rng)?,
            MethodConfig::Enkf => enkf_update(model, &ensemble, &y_eff, &mut rng)?,
            MethodConfig::Kviff(config) => {
                kvif_update(model, &ensemble, &y_eff, config, &mut rng)?
            }
            MethodConfig::Kf => unreachable!(),
        };
        estimates.push(estimate(&ensemble));
        spreads.push(ensemble.rms_spread());
    }
    Ok(FilterRun { estimates, spreads })
}

fn run_kalman(scenario: &ScenarioSpec, truth: &TruthRun) -> Result<FilterRun> {
    let linear = scenario.linear.as_ref().ok_or_else(|| {
        Error::usage(format!(
            "kf requested on `{}`, which is not linear-Gaussian",
            scenario.name
        ))
    })?;
    let model = &scenario.model;
    let q = match &model.process_noise {
        NoiseSpec::Gaussian { covariance, .. } => covariance.to_matrix(),
        _ => return Err(Error::usage("kf requires Gaussian process noise")),
    };
    let r = match &model.measurement_noise {
        NoiseSpec::Gaussian { covariance, .. } => covariance.to_matrix(),
        _ => return Err(Error::usage("kf requires Gaussian measurement noise")),
    };

    let mut belief = GaussianBelief {
        mean: scenario.init_ensemble.mean.clone(),
        covariance: scenario.init_ensemble.covariance.to_matrix(),
    };
    let d = model.dim_x as f64;
    let mut estimates = Vec::with_capacity(scenario.horizon);
    let mut spreads = Vec::with_capacity(scenario.horizon);
    for k in 1..=scenario.horizon {
        belief = kf_predict(&belief, &linear.transition, &q)?;
        let y_eff = truth.effective_observation(k, model.cumulative_observation);
        belief = kf_update(&belief, &linear.observation, &r, &y_eff)?;
        estimates.push(belief.mean.clone());
        spreads.push((belief.covariance.trace() / d).max(0.0).sqrt());
    }
    Ok(FilterRun { estimates, spreads })
}
