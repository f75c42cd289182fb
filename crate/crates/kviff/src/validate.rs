//! Self-check suite behind `kviff validate`: numerical certification of the
//! flow's descent and fixed-point properties, agreement of the Kalman filter
//! with the grid oracle, and a finite-difference sweep of the kernel
//! gradient.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::filters::{
    kf_predict, kf_update, kvif_update, Ensemble, GaussianBelief, KvifConfig, KvifInit,
};
use crate::kernel::KernelSpec;
use crate::models::{NoiseSpec, StateSpaceModel};
use crate::oracle::{
    flow_velocity, fokker_planck_step, grid_bayes_update, grid_linear_predict, weighted_l2_loss,
    Grid1D,
};

/// Outcome of one validation check.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

/// Parameters of the descent certification run.
pub struct DescentRun {
    pub initial_loss: f64,
    pub final_loss: f64,
    /// Largest per-step loss increment (negative throughout when the flow
    /// descends).
    pub max_step_delta: f64,
    pub max_clipped_mass: f64,
}

/// Integrate the density transport for `steps` explicit-Euler steps and
/// track the weighted L2 loss against the target.
pub fn run_flow_descent(
    kernel: &KernelSpec,
    p: &Grid1D,
    q0: &Grid1D,
    dt_flow: f64,
    steps: usize,
) -> Result<DescentRun> {
    let initial_loss = weighted_l2_loss(kernel, p, q0)?;
    let mut q = q0.clone();
    let mut prev = initial_loss;
    let mut max_step_delta = f64::NEG_INFINITY;
    let mut max_clipped_mass: f64 = 0.0;
    for _ in 0..steps {
        let step = fokker_planck_step(kernel, p, &q, dt_flow)?;
        q = step.density;
        max_clipped_mass = max_clipped_mass.max(step.clipped_mass);
        let loss = weighted_l2_loss(kernel, p, &q)?;
        max_step_delta = max_step_delta.max(loss - prev);
        prev = loss;
    }
    Ok(DescentRun { initial_loss, final_loss: prev, max_step_delta, max_clipped_mass })
}

/// Check (a): the transport of N(1,1) toward N(0,1) descends the weighted L2
/// loss at every step.
pub fn check_flow_descent() -> Result<CheckReport> {
    let kernel = KernelSpec::rbf(2.0)?;
    let p = Grid1D::gaussian(-8.0, 8.0, 801, 0.0, 1.0)?;
    let q0 = Grid1D::gaussian(-8.0, 8.0, 801, 1.0, 1.0)?;
    let run = run_flow_descent(&kernel, &p, &q0, 1e-3, 500)?;
    let passed = run.max_step_delta <= 1e-10 && run.max_clipped_mass < 1e-6;
    Ok(CheckReport {
        name: "flow-descent",
        passed,
        detail: format!(
            "loss {:.6e} -> {:.6e} over 500 steps; max per-step delta {:.3e}; max clipped mass {:.3e}",
            run.initial_loss, run.final_loss, run.max_step_delta, run.max_clipped_mass
        ),
    })
}

/// Check (b): with q = p the flow velocity vanishes and one transport step is
/// the identity; the particle analogue (uniform likelihood, raw initializer)
/// is exactly the identity map.
pub fn check_fixed_point() -> Result<CheckReport> {
    let kernel = KernelSpec::rbf(2.0)?;
    let p = Grid1D::gaussian(-8.0, 8.0, 801, 0.0, 1.0)?;
    let phi = flow_velocity(&kernel, &p, &p)?;
    let max_phi = phi.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));

    let step = fokker_planck_step(&kernel, &p, &p, 1e-3)?;
    let max_change = p
        .values
        .iter()
        .zip(&step.density.values)
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()));

    // particle analogue: constant measurement map gives uniform likelihood
    let model = StateSpaceModel {
        dim_x: 1,
        dim_y: 1,
        transition: Arc::new(|_, x: &DVector<f64>| x.clone()),
        measurement: Arc::new(|_, _: &DVector<f64>| DVector::zeros(1)),
        process_noise: NoiseSpec::gaussian_iso(1, 1.0),
        measurement_noise: NoiseSpec::gaussian_iso(1, 1.0),
        cumulative_observation: false,
    };
    let particles: Vec<DVector<f64>> =
        [-1.3, -0.2, 0.6, 1.9].iter().map(|&x| DVector::from_element(1, x)).collect();
    let ensemble = Ensemble::new(particles.clone(), 1)?;
    let config = KvifConfig::new(KernelSpec::rbf(1.0)?, 0.05, 40, KvifInit::Raw)?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let updated = kvif_update(&model, &ensemble, &DVector::zeros(1), &config, &mut rng)?;
    let particle_identity = updated.particles == particles;

    let passed = max_phi <= 1e-12 && max_change <= 1e-12 && particle_identity;
    Ok(CheckReport {
        name: "fixed-point",
        passed,
        detail: format!(
            "max |phi| {max_phi:.2e}; max density change {max_change:.2e}; \
             particle identity: {particle_identity}"
        ),
    })
}

/// Check (c): on a 1D linear-Gaussian model over 20 steps, the Kalman
/// recursion agrees with the grid predict/Bayes recursion to grid resolution
/// and with an independently coded scalar recursion to 1e-8.
pub fn check_kf_grid_agreement() -> Result<CheckReport> {
    let a = 0.95f64;
    let q_var = 0.1f64;
    let r_var = 0.5f64;
    let steps = 20;

    // synthetic observations from the same model
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut x = 0.0f64;
    let mut ys = Vec::with_capacity(steps);
    for _ in 0..steps {
        x = a * x + q_var.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal);
        ys.push(x + r_var.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal));
    }

    // production KF
    let a_mat = DMatrix::from_element(1, 1, a);
    let h_mat = DMatrix::identity(1, 1);
    let q_mat = DMatrix::from_element(1, 1, q_var);
    let r_mat = DMatrix::from_element(1, 1, r_var);
    let mut belief = GaussianBelief::new(DVector::zeros(1), DMatrix::identity(1, 1))?;

    // grid recursion
    let mut grid = Grid1D::gaussian(-8.0, 8.0, 2001, 0.0, 1.0)?;

    // independent scalar recursion
    let (mut sm, mut sv) = (0.0f64, 1.0f64);

    let mut max_grid_gap = 0.0f64;
    let mut max_scalar_gap = 0.0f64;
    for &y in &ys {
        belief = kf_predict(&belief, &a_mat, &q_mat)?;
        belief = kf_update(&belief, &h_mat, &r_mat, &DVector::from_element(1, y))?;

        grid = grid_linear_predict(&grid, a, q_var)?;
        grid = grid_bayes_update(&grid, |xx| -0.5 * (y - xx) * (y - xx) / r_var)?;

        let (pm, pv) = (a * sm, a * a * sv + q_var);
        let k = pv / (pv + r_var);
        sm = pm + k * (y - pm);
        sv = (1.0 - k) * pv;

        max_grid_gap = max_grid_gap.max((belief.mean[0] - grid.mean()).abs());
        max_scalar_gap = max_scalar_gap.max((belief.mean[0] - sm).abs());
    }
    let passed = max_grid_gap <= 1e-3 && max_scalar_gap <= 1e-8;
    Ok(CheckReport {
        name: "kf-oracle-agreement",
        passed,
        detail: format!(
            "max |KF - grid| {max_grid_gap:.3e} (tol 1e-3); \
             max |KF - scalar recursion| {max_scalar_gap:.3e} (tol 1e-8)"
        ),
    })
}

/// Check (d): kernel gradient against central finite differences over random
/// points in dimensions 1..=10. The gradient function is injectable so a
/// sabotaged gradient demonstrably fails the check.
pub fn check_gradient_finite_difference_with(
    grad: &dyn Fn(&KernelSpec, &DVector<f64>, &DVector<f64>) -> DVector<f64>,
) -> CheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let step = 1e-5;
    let mut worst = 0.0f64;
    let mut passed = true;
    for dim in 1..=10usize {
        for _ in 0..5 {
            let h = rng.gen_range(0.5..12.0);
            let kernel = KernelSpec::rbf(h).expect("positive bandwidth");
            let x = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
            let y = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
            let g = grad(&kernel, &x, &y);
            for c in 0..dim {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[c] += step;
                ym[c] -= step;
                let fd = (kernel.eval(&x, &yp).unwrap() - kernel.eval(&x, &ym).unwrap())
                    / (2.0 * step);
                let rel = (g[c] - fd).abs() / fd.abs().max(1e-8);
                worst = worst.max(rel);
                if rel > 1e-6 {
                    passed = false;
                }
            }
        }
    }
    CheckReport {
        name: "kernel-gradient-fd",
        passed,
        detail: format!("worst relative error {worst:.3e} (tol 1e-6)"),
    }
}

pub fn check_gradient_finite_difference() -> CheckReport {
    check_gradient_finite_difference_with(&|k, x, y| k.grad2(x, y).expect("dims match"))
}

/// Run all validation checks in order.
pub fn run_all_checks() -> Result<Vec<CheckReport>> {
    Ok(vec![
        check_flow_descent()?,
        check_fixed_point()?,
        check_kf_grid_agreement()?,
        check_gradient_finite_difference(),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixed_point_check_passes() {
        let report = check_fixed_point().unwrap();
        assert!(report.passed, "{}", report.detail);
    }

    #[test]
    fn kf_grid_agreement_passes() {
        let report = check_kf_grid_agreement().unwrap();
        assert!(report.passed, "{}", report.detail);
    }

    #[test]
    fn gradient_fd_check_passes_and_detects_sabotage() {
        let good = check_gradient_finite_difference();
        assert!(good.passed, "{}", good.detail);

        // sign-flipped gradient must fail
        let bad = check_gradient_finite_difference_with(&|k, x, y| {
            -k.grad2(x, y).expect("dims match")
        });
        assert!(!bad.passed);
    }
}
