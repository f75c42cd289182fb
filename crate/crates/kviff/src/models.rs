//! State-space models, noise laws, and the benchmark scenarios.
//!
//! A [`StateSpaceModel`] is what a filter believes: deterministic dynamics
//! and measurement maps plus Gaussian noise laws. A [`ScenarioSpec`] pairs a
//! model with the laws that actually generate the data, which may differ
//! (bias, correlation, heavy tails, asymmetry) to probe robustness under
//! model mismatch.
//!
//! For cumulative-observation models the stored `measurement` map is the
//! per-step increment map (time-step factor included), so the simulator sums
//! increments into cumulative observations and filters consume increments.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Deterministic map `(step, state) -> vector` used for dynamics and
/// measurement functions.
pub type DynamicsFn = Arc<dyn Fn(usize, &DVector<f64>) -> DVector<f64> + Send + Sync>;

/// Covariance storage for Gaussian noise.
#[derive(Debug, Clone)]
pub enum CovarianceSpec {
    /// Diagonal covariance, one variance per coordinate.
    Diagonal(DVector<f64>),
    /// Full symmetric PSD matrix.
    Full(DMatrix<f64>),
}

impl CovarianceSpec {
    pub fn dim(&self) -> usize {
        match self {
            CovarianceSpec::Diagonal(d) => d.len(),
            CovarianceSpec::Full(m) => m.nrows(),
        }
    }

    /// Isotropic diagonal `var * I`.
    pub fn isotropic(dim: usize, var: f64) -> Self {
        CovarianceSpec::Diagonal(DVector::from_element(dim, var))
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        match self {
            CovarianceSpec::Diagonal(d) => DMatrix::from_diagonal(d),
            CovarianceSpec::Full(m) => m.clone(),
        }
    }

    /// Lower-triangular factor `L` with `L L^T = C`. Tolerates positive
    /// semidefinite input (zero variances give zero factor columns); rejects
    /// matrices that are indefinite or asymmetric beyond `1e-10` relative.
    pub fn psd_factor(&self) -> Result<DMatrix<f64>> {
        match self {
            CovarianceSpec::Diagonal(d) => {
                let mut l = DMatrix::zeros(d.len(), d.len());
                for (i, &var) in d.iter().enumerate() {
                    if var < -1e-10 {
                        return Err(Error::numerical(format!(
                            "invalid covariance: negative variance {var} at index {i}"
                        )));
                    }
                    l[(i, i)] = var.max(0.0).sqrt();
                }
                Ok(l)
            }
            CovarianceSpec::Full(m) => psd_cholesky(m),
        }
    }
}

/// PSD-tolerant Cholesky: `a = L L^T` with `L` lower triangular. Diagonal
/// pivots below the tolerance are treated as exactly zero rank.
pub fn psd_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::usage("covariance must be square"));
    }
    let scale = a.diagonal().iter().fold(1.0f64, |acc, &x| acc.max(x.abs()));
    let tol = 1e-10 * scale;
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > tol {
                return Err(Error::numerical(format!(
                    "invalid covariance: asymmetric at ({i},{j})"
                )));
            }
        }
    }
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if d < -tol {
            return Err(Error::numerical(format!(
                "invalid covariance: not PSD (pivot {d:e} at column {j})"
            )));
        }
        if d <= tol {
            // semidefinite direction: zero column
            continue;
        }
        let diag = d.sqrt();
        l[(j, j)] = diag;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / diag;
        }
    }
    Ok(l)
}

/// A noise law. Filters assume Gaussian laws; the data-generating side may
/// use any of the three.
#[derive(Debug, Clone)]
pub enum NoiseSpec {
    Gaussian { mean: DVector<f64>, covariance: CovarianceSpec },
    /// Per-dimension i.i.d. Cauchy around `location` with common `scale`.
    Cauchy { location: DVector<f64>, scale: f64 },
    /// Per-dimension i.i.d. log-normal `exp(log_mean + log_std * z)`.
    LogNormal { dim: usize, log_mean: f64, log_std: f64 },
}

impl NoiseSpec {
    pub fn gaussian(mean: DVector<f64>, covariance: CovarianceSpec) -> Result<Self> {
        if mean.len() != covariance.dim() {
            return Err(Error::usage("gaussian noise: mean/covariance dimension mismatch"));
        }
        covariance.psd_factor()?;
        Ok(NoiseSpec::Gaussian { mean, covariance })
    }

    /// Zero-mean Gaussian with isotropic covariance `var * I`.
    pub fn gaussian_iso(dim: usize, var: f64) -> Self {
        NoiseSpec::Gaussian {
            mean: DVector::zeros(dim),
            covariance: CovarianceSpec::isotropic(dim, var),
        }
    }

    pub fn cauchy(location: DVector<f64>, scale: f64) -> Result<Self> {
        if !(scale > 0.0) {
            return Err(Error::usage(format!("cauchy scale must be positive, got {scale}")));
        }
        Ok(NoiseSpec::Cauchy { location, scale })
    }

    pub fn lognormal(dim: usize, log_mean: f64, log_std: f64) -> Result<Self> {
        if !(log_std > 0.0) {
            return Err(Error::usage(format!(
                "lognormal log_std must be positive, got {log_std}"
            )));
        }
        Ok(NoiseSpec::LogNormal { dim, log_mean, log_std })
    }

    pub fn dim(&self) -> usize {
        match self {
            NoiseSpec::Gaussian { mean, .. } => mean.len(),
            NoiseSpec::Cauchy { location, .. } => location.len(),
            NoiseSpec::LogNormal { dim, .. } => *dim,
        }
    }

    /// One draw from the law. Gaussian draws are `mean + L z` with `L` the
    /// PSD factor, Cauchy uses the inverse CDF `location + scale *
    /// tan(pi (u - 1/2))`, log-normal exponentiates a scaled normal.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> Result<DVector<f64>> {
        match self {
            NoiseSpec::Gaussian { mean, covariance } => {
                let l = covariance.psd_factor()?;
                let z = DVector::from_fn(mean.len(), |_, _| rng.sample::<f64, _>(StandardNormal));
                Ok(mean + l * z)
            }
            NoiseSpec::Cauchy { location, scale } => Ok(DVector::from_fn(
                location.len(),
                |i, _| {
                    let u: f64 = rng.gen();
                    location[i] + scale * (PI * (u - 0.5)).tan()
                },
            )),
            NoiseSpec::LogNormal { dim, log_mean, log_std } => {
                Ok(DVector::from_fn(*dim, |_, _| {
                    let z: f64 = rng.sample(StandardNormal);
                    (log_mean + log_std * z).exp()
                }))
            }
        }
    }

    /// Log-density of `v` under a zero-shifted Gaussian law (the `mean` is
    /// expected to be subtracted by the caller). Errors for non-Gaussian
    /// laws: filter-side likelihoods are Gaussian by construction.
    pub fn gaussian_log_density(&self, v: &DVector<f64>) -> Result<f64> {
        const LN_2PI: f64 = 1.8378770664093453;
        match self {
            NoiseSpec::Gaussian { mean, covariance } => {
                if v.len() != mean.len() {
                    return Err(Error::usage("gaussian_log_density: dimension mismatch"));
                }
                match covariance {
                    CovarianceSpec::Diagonal(d) => {
                        let mut quad = 0.0;
                        let mut logdet = 0.0;
                        for (vi, &var) in v.iter().zip(d.iter()) {
                            if var <= 0.0 {
                                // Dirac limit: exact residuals carry no
                                // penalty, everything else is impossible
                                if *vi == 0.0 {
                                    continue;
                                }
                                return Ok(f64::NEG_INFINITY);
                            }
                            quad += vi * vi / var;
                            logdet += var.ln();
                        }
                        Ok(-0.5 * (v.len() as f64 * LN_2PI + logdet + quad))
                    }
                    CovarianceSpec::Full(m) => {
                        let l = psd_cholesky(m)?;
                        let mut logdet = 0.0;
                        for i in 0..l.nrows() {
                            let di = l[(i, i)];
                            if di <= 0.0 {
                                return Err(Error::numerical(
                                    "gaussian_log_density: singular covariance",
                                ));
                            }
                            logdet += 2.0 * di.ln();
                        }
                        let u = l
                            .solve_lower_triangular(v)
                            .ok_or_else(|| Error::numerical("triangular solve failed"))?;
                        Ok(-0.5 * (v.len() as f64 * LN_2PI + logdet + u.norm_squared()))
                    }
                }
            }
            _ => Err(Error::usage(
                "gaussian_log_density requires a Gaussian law (filter-assumed noises are Gaussian)",
            )),
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self, NoiseSpec::Gaussian { .. })
    }
}

/// The model a filter runs against: dynamics `f_k`, measurement `h_k` (the
/// increment map when `cumulative_observation` is set), and the assumed
/// Gaussian noise laws.
#[derive(Clone)]
pub struct StateSpaceModel {
    pub dim_x: usize,
    pub dim_y: usize,
    pub transition: DynamicsFn,
    pub measurement: DynamicsFn,
    pub process_noise: NoiseSpec,
    pub measurement_noise: NoiseSpec,
    pub cumulative_observation: bool,
}

impl StateSpaceModel {
    pub fn transition_at(&self, step: usize, x: &DVector<f64>) -> DVector<f64> {
        (self.transition)(step, x)
    }

    pub fn measurement_at(&self, step: usize, x: &DVector<f64>) -> DVector<f64> {
        (self.measurement)(step, x)
    }

    /// Log of the measurement likelihood `p(y | x)` under the assumed
    /// Gaussian measurement noise. For cumulative models `y_effective` is the
    /// observation increment and is compared against the increment map.
    pub fn log_likelihood(
        &self,
        step: usize,
        y_effective: &DVector<f64>,
        x: &DVector<f64>,
    ) -> Result<f64> {
        if y_effective.len() != self.dim_y {
            return Err(Error::usage(format!(
                "log_likelihood: observation has dim {}, expected {}",
                y_effective.len(),
                self.dim_y
            )));
        }
        if x.len() != self.dim_x {
            return Err(Error::usage(format!(
                "log_likelihood: state has dim {}, expected {}",
                x.len(),
                self.dim_x
            )));
        }
        let mut residual = y_effective - self.measurement_at(step, x);
        if let NoiseSpec::Gaussian { mean, .. } = &self.measurement_noise {
            residual -= mean;
        }
        self.measurement_noise.gaussian_log_density(&residual)
    }
}

/// Initial particle distribution: Gaussian with the given mean/covariance.
#[derive(Debug, Clone)]
pub struct InitEnsemble {
    pub mean: DVector<f64>,
    pub covariance: CovarianceSpec,
}

/// Dense matrices of a linear-Gaussian model, present only where the exact
/// Kalman filter is applicable.
#[derive(Debug, Clone)]
pub struct LinearModel {
    pub transition: DMatrix<f64>,
    pub observation: DMatrix<f64>,
}

/// One benchmark experiment: the filter-side model plus the (possibly
/// mismatched) truth-generating laws, horizon, and initialization.
#[derive(Clone)]
pub struct ScenarioSpec {
    pub name: String,
    pub model: StateSpaceModel,
    pub data_process_noise: NoiseSpec,
    pub data_measurement_noise: NoiseSpec,
    /// Truth-side dynamics, where they differ from the filter's model
    /// (velocity-bias variant). `None` means the model transition is exact.
    pub data_transition: Option<DynamicsFn>,
    pub dt: f64,
    pub horizon: usize,
    pub x0_truth: DVector<f64>,
    pub init_ensemble: InitEnsemble,
    pub linear: Option<LinearModel>,
    /// Human-readable mismatch summary for listings.
    pub mismatch: String,
}

/// A simulated ground-truth trajectory with its observations.
#[derive(Debug, Clone)]
pub struct TruthRun {
    /// `states[k]` is `x_k`, for `k = 0..=K`.
    pub states: Vec<DVector<f64>>,
    /// `observations[k-1]` is `y_k`, for `k = 1..=K`; cumulative sums for
    /// cumulative-observation models.
    pub observations: Vec<DVector<f64>>,
    pub seed: u64,
}

impl TruthRun {
    /// The observation a filter consumes at step `k` (1-based): the raw
    /// observation, or the increment `y_k - y_{k-1}` for cumulative models
    /// (`y_0` is the zero vector).
    pub fn effective_observation(&self, step: usize, cumulative: bool) -> DVector<f64> {
        let y = &self.observations[step - 1];
        if cumulative && step >= 2 {
            y - &self.observations[step - 2]
        } else {
            y.clone()
        }
    }
}

/// Simulate a ground-truth run with the scenario's data-generating laws.
/// Bit-reproducible: the same `(scenario, seed)` yields the same run.
pub fn simulate_truth(scenario: &ScenarioSpec, seed: u64) -> Result<TruthRun> {
    use rand::SeedableRng;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let model = &scenario.model;
    let k_max = scenario.horizon;

    let mut states = Vec::with_capacity(k_max + 1);
    let mut observations = Vec::with_capacity(k_max);
    states.push(scenario.x0_truth.clone());

    let mut cumulative = DVector::zeros(model.dim_y);
    for k in 0..k_max {
        let prev = &states[k];
        let drift = match &scenario.data_transition {
            Some(f) => f(k, prev),
            None => model.transition_at(k, prev),
        };
        let x = drift + scenario.data_process_noise.sample(&mut rng)?;
        let increment =
            model.measurement_at(k + 1, &x) + scenario.data_measurement_noise.sample(&mut rng)?;
        if model.cumulative_observation {
            cumulative += increment;
            observations.push(cumulative.clone());
        } else {
            observations.push(increment);
        }
        states.push(x);
    }
    Ok(TruthRun { states, observations, seed })
}

// ---------------------------------------------------------------------------
// scenario builders
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinearVariant {
    Nominal,
    Biased,
    Correlated,
}

/// 10D linear problem: `f(x) = x + dt A x` with `A` upper bidiagonal
/// (`-0.5` diagonal, `0.1` superdiagonal), identity measurement, `dt = 0.1`,
/// `K = 100`. Variants change only the data-generating process noise:
/// a constant mean shift, or correlation between adjacent coordinates.
pub fn build_linear10d(variant: LinearVariant) -> ScenarioSpec {
    let d = 10usize;
    let dt = 0.1;
    let horizon = 100usize;

    let mut a = DMatrix::zeros(d, d);
    for i in 0..d {
        a[(i, i)] = -0.5;
        if i + 1 < d {
            a[(i, i + 1)] = 0.1;
        }
    }
    let f_mat: DMatrix<f64> = DMatrix::identity(d, d) + dt * &a;

    let transition: DynamicsFn = {
        let f_mat = f_mat.clone();
        Arc::new(move |_k, x: &DVector<f64>| &f_mat * x)
    };
    let measurement: DynamicsFn = Arc::new(|_k, x: &DVector<f64>| x.clone());

    let process_noise = NoiseSpec::gaussian_iso(d, dt);
    let measurement_noise = NoiseSpec::gaussian_iso(d, 0.1);

    let (name, data_process_noise, mismatch) = match variant {
        LinearVariant::Nominal => ("linear10d", process_noise.clone(), "none".to_string()),
        LinearVariant::Biased => (
            "linear10d-bias",
            NoiseSpec::Gaussian {
                mean: DVector::from_element(d, 0.2),
                covariance: CovarianceSpec::isotropic(d, dt),
            },
            "data process noise has mean 0.2 per coordinate".to_string(),
        ),
        LinearVariant::Correlated => {
            let mut e = DMatrix::zeros(d, d);
            for i in 0..d - 1 {
                e[(i, i + 1)] = 0.3;
            }
            let sym = DMatrix::identity(d, d) + (&e + e.transpose()) * 0.5;
            (
                "linear10d-corr",
                NoiseSpec::Gaussian {
                    mean: DVector::zeros(d),
                    covariance: CovarianceSpec::Full(dt * sym),
                },
                "data process noise correlated between adjacent coordinates".to_string(),
            )
        }
    };

    let x0 = DVector::zeros(d);
    ScenarioSpec {
        name: name.to_string(),
        model: StateSpaceModel {
            dim_x: d,
            dim_y: d,
            transition,
            measurement,
            process_noise,
            measurement_noise: measurement_noise.clone(),
            cumulative_observation: false,
        },
        data_process_noise,
        data_measurement_noise: measurement_noise,
        data_transition: None,
        dt,
        horizon,
        x0_truth: x0.clone(),
        init_ensemble: InitEnsemble { mean: x0, covariance: CovarianceSpec::isotropic(d, 0.1) },
        linear: Some(LinearModel {
            transition: f_mat,
            observation: DMatrix::identity(d, d),
        }),
        mismatch,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CubicVariant {
    Nominal,
    Cauchy,
    LognormalBias,
}

/// Cubic sensor: `x_{k+1} = x_k + dt cos(x_k) + w_k`, cumulative observation
/// `y_k = y_{k-1} + dt x_k^3 + v_k`, elementwise in every dimension.
/// `dt = 0.1`; `K = 200` for the 2D case, `K = 100` otherwise. Variants
/// replace the data-generating measurement noise with a heavy-tailed Cauchy
/// law or an asymmetric log-normal law plus a process-mean bias.
pub fn build_cubic_sensor(dim: usize, variant: CubicVariant) -> Result<ScenarioSpec> {
    if dim < 1 {
        return Err(Error::usage("cubic sensor: dim must be at least 1"));
    }
    let dt = 0.1;
    let horizon = if dim == 2 { 200 } else { 100 };

    let transition: DynamicsFn =
        Arc::new(move |_k, x: &DVector<f64>| x.map(|xi| xi + dt * xi.cos()));
    // increment map: dt * x^3 per coordinate
    let measurement: DynamicsFn = Arc::new(move |_k, x: &DVector<f64>| x.map(|xi| dt * xi * xi * xi));

    let process_noise = NoiseSpec::gaussian_iso(dim, dt);
    let measurement_noise = NoiseSpec::gaussian_iso(dim, dt);

    let (suffix, data_process_noise, data_measurement_noise, mismatch) = match variant {
        CubicVariant::Nominal => (
            "",
            process_noise.clone(),
            measurement_noise.clone(),
            "none".to_string(),
        ),
        CubicVariant::Cauchy => (
            "-cauchy",
            process_noise.clone(),
            NoiseSpec::cauchy(DVector::zeros(dim), dt.sqrt())?,
            "data measurement noise is heavy-tailed Cauchy".to_string(),
        ),
        CubicVariant::LognormalBias => (
            "-lognormal-bias",
            NoiseSpec::Gaussian {
                mean: DVector::from_element(dim, 0.3),
                covariance: CovarianceSpec::isotropic(dim, dt),
            },
            NoiseSpec::lognormal(dim, 0.0, dt.sqrt())?,
            "data measurement noise is log-normal; data process noise has mean 0.3".to_string(),
        ),
    };

    let x0 = DVector::zeros(dim);
    Ok(ScenarioSpec {
        name: format!("cubic{dim}d{suffix}"),
        model: StateSpaceModel {
            dim_x: dim,
            dim_y: dim,
            transition,
            measurement,
            process_noise,
            measurement_noise,
            cumulative_observation: true,
        },
        data_process_noise,
        data_measurement_noise,
        data_transition: None,
        dt,
        horizon,
        x0_truth: x0.clone(),
        init_ensemble: InitEnsemble {
            mean: x0,
            covariance: CovarianceSpec::isotropic(dim, 0.1),
        },
        linear: None,
        mismatch,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MultiTargetVariant {
    Nominal,
    VelocityBias,
}

/// Sensor amplitude constant of the acoustic network.
pub const ACOUSTIC_AMPLITUDE: f64 = 10.0;
/// Near-field saturation distance of the acoustic sensors.
pub const ACOUSTIC_D0: f64 = 0.1;

/// Locations of the 25 acoustic sensors: the 5x5 lattice over `[-4,4]^2`
/// including the boundary, row-major.
pub fn acoustic_sensor_grid() -> Vec<[f64; 2]> {
    let coords = [-4.0, -2.0, 0.0, 2.0, 4.0];
    let mut sensors = Vec::with_capacity(25);
    for &gx in &coords {
        for &gy in &coords {
            sensors.push([gx, gy]);
        }
    }
    sensors
}

/// Multi-target tracking: four planar objects in the Hamiltonian velocity
/// field of `H(x) = sin(x1) sin(x2)`, observed by 25 acoustic amplitude
/// sensors `y_j = sum_p A / (||x^(p) - xi_j|| + d0) + v_j`. The joint state
/// stacks the objects into `d = 8`. The velocity-bias variant adds a drift
/// toward the origin to the data-generating dynamics only.
pub fn build_multi_target(variant: MultiTargetVariant) -> ScenarioSpec {
    const M: usize = 4;
    let d = 2 * M;
    let m = 25usize;
    let dt = 0.1;
    let horizon = 100usize;

    let velocity = |x1: f64, x2: f64| -> (f64, f64) {
        (-x1.sin() * x2.cos(), x1.cos() * x2.sin())
    };

    let transition: DynamicsFn = Arc::new(move |_k, x: &DVector<f64>| {
        let mut out = x.clone();
        for p in 0..M {
            let (x1, x2) = (x[2 * p], x[2 * p + 1]);
            let (v1, v2) = velocity(x1, x2);
            out[2 * p] = x1 + dt * v1;
            out[2 * p + 1] = x2 + dt * v2;
        }
        out
    });

    let sensors = acoustic_sensor_grid();
    let measurement: DynamicsFn = Arc::new(move |_k, x: &DVector<f64>| {
        DVector::from_fn(m, |j, _| {
            let [sx, sy] = sensors[j];
            let mut amp = 0.0;
            for p in 0..M {
                let dx = x[2 * p] - sx;
                let dy = x[2 * p + 1] - sy;
                amp += ACOUSTIC_AMPLITUDE / ((dx * dx + dy * dy).sqrt() + ACOUSTIC_D0);
            }
            amp
        })
    });

    let process_noise = NoiseSpec::gaussian_iso(d, 0.1 * dt);
    let measurement_noise = NoiseSpec::gaussian_iso(m, 0.01 * dt);

    let (name, data_transition, mismatch): (&str, Option<DynamicsFn>, String) = match variant {
        MultiTargetVariant::Nominal => ("multitarget", None, "none".to_string()),
        MultiTargetVariant::VelocityBias => (
            "multitarget-bias",
            Some(Arc::new(move |_k, x: &DVector<f64>| {
                let mut out = x.clone();
                for p in 0..M {
                    let (x1, x2) = (x[2 * p], x[2 * p + 1]);
                    let (v1, v2) = velocity(x1, x2);
                    out[2 * p] = x1 + dt * v1 - x1 * dt / 5.0;
                    out[2 * p + 1] = x2 + dt * v2 - x2 * dt / 5.0;
                }
                out
            })),
            "data dynamics include an unmodeled drift toward the origin".to_string(),
        ),
    };

    let x0 = DVector::from_column_slice(&[1.0, 0.0, 2.0, 0.0, 3.0, 0.0, 4.0, 0.0]);
    ScenarioSpec {
        name: name.to_string(),
        model: StateSpaceModel {
            dim_x: d,
            dim_y: m,
            transition,
            measurement,
            process_noise: process_noise.clone(),
            measurement_noise: measurement_noise.clone(),
            cumulative_observation: false,
        },
        data_process_noise: process_noise,
        data_measurement_noise: measurement_noise,
        data_transition,
        dt,
        horizon,
        x0_truth: x0.clone(),
        init_ensemble: InitEnsemble { mean: x0, covariance: CovarianceSpec::isotropic(d, 0.1) },
        linear: None,
        mismatch,
    }
}

/// The scenario names exposed to the CLI and config files.
pub const SCENARIO_NAMES: [&str; 8] = [
    "linear10d",
    "linear10d-bias",
    "linear10d-corr",
    "cubic2d",
    "cubic10d-cauchy",
    "cubic10d-lognormal-bias",
    "multitarget",
    "multitarget-bias",
];

/// Build a scenario from its CLI name.
pub fn scenario_by_name(name: &str) -> Result<ScenarioSpec> {
    match name {
        "linear10d" => Ok(build_linear10d(LinearVariant::Nominal)),
        "linear10d-bias" => Ok(build_linear10d(LinearVariant::Biased)),
        "linear10d-corr" => Ok(build_linear10d(LinearVariant::Correlated)),
        "cubic2d" => build_cubic_sensor(2, CubicVariant::Nominal),
        "cubic10d-cauchy" => build_cubic_sensor(10, CubicVariant::Cauchy),
        "cubic10d-lognormal-bias" => build_cubic_sensor(10, CubicVariant::LognormalBias),
        "multitarget" => Ok(build_multi_target(MultiTargetVariant::Nominal)),
        "multitarget-bias" => Ok(build_multi_target(MultiTargetVariant::VelocityBias)),
        other => Err(Error::usage(format!(
            "unknown scenario `{other}`; known: {}",
            SCENARIO_NAMES.join(", ")
        ))),
    }
}
