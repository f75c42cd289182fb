//! RBF kernel evaluations, kernel gradients, and the particle flow
//! directions built from them.
//!
//! The kernel is `k(x, x') = exp(-||x - x'||^2 / h)` with bandwidth `h > 0`.
//! It is symmetric and translation invariant, so the gradient in the first
//! argument is the exact negation of the gradient in the second argument.
//! That antisymmetry is what lets the flow direction be assembled from
//! likelihood ratios alone, without a score function.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Supported kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KernelFamily {
    Rbf,
}

/// An RBF kernel with a fixed bandwidth (the `h` in `exp(-||x-x'||^2 / h)`,
/// in squared state units). The bandwidth is a config constant; no median
/// heuristic is applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    family: KernelFamily,
    bandwidth: f64,
}

impl KernelSpec {
    /// RBF kernel with bandwidth `h`.
    pub fn rbf(bandwidth: f64) -> Result<Self> {
        if !(bandwidth > 0.0) || !bandwidth.is_finite() {
            return Err(Error::usage(format!(
                "kernel bandwidth must be a positive finite real, got {bandwidth}"
            )));
        }
        Ok(KernelSpec { family: KernelFamily::Rbf, bandwidth })
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// `k(x, y) = exp(-||x - y||^2 / h)`, in `(0, 1]`.
    pub fn eval(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_same_dim(x, y)?;
        Ok((-squared_distance(x.as_slice(), y.as_slice()) / self.bandwidth).exp())
    }

    /// Gradient of `k(x, .)` at the evaluation point `y`:
    /// `(2/h) (x - y) exp(-||x - y||^2 / h)`.
    ///
    /// By translation invariance this is the negation of the gradient in the
    /// first argument, so `grad2(x, y) = -grad2(y, x)`.
    pub fn grad2(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
        check_same_dim(x, y)?;
        let coeff = 2.0 / self.bandwidth
            * (-squared_distance(x.as_slice(), y.as_slice()) / self.bandwidth).exp();
        Ok(DVector::from_fn(x.len(), |i, _| coeff * (x[i] - y[i])))
    }

    /// Dense `N x M` kernel block `K[i][j] = k(xs[i], ys[j])`.
    pub fn eval_block(&self, xs: &[DVector<f64>], ys: &[DVector<f64>]) -> Result<Vec<Vec<f64>>> {
        for x in xs {
            for y in ys {
                check_same_dim(x, y)?;
            }
        }
        Ok(xs
            .iter()
            .map(|x| {
                ys.iter()
                    .map(|y| {
                        (-squared_distance(x.as_slice(), y.as_slice()) / self.bandwidth).exp()
                    })
                    .collect()
            })
            .collect())
    }
}

/// Canonical squared Euclidean distance. Both argument orders produce the
/// same floating-point value: each term is a square and the summation order
/// is the coordinate order.
fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (a, b) in x.iter().zip(y) {
        let d = a - b;
        acc += d * d;
    }
    acc
}

fn check_same_dim(x: &DVector<f64>, y: &DVector<f64>) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::usage(format!(
            "dimension mismatch: {} vs {}",
            x.len(),
            y.len()
        )));
    }
    Ok(())
}

/// Kernel variational inference flow direction at `eval_point`:
///
/// `(1/N) sum_j grad2(s_j, e) Q_j  -  (1/N) sum_j grad2(t_j, e)`
///
/// where `s_j` are prediction particles (samples of the predictive density),
/// `Q_j` their normalized likelihood ratios with mean ~1, and `t_j` the
/// current flow particles. The first sum attracts toward high-likelihood
/// prediction particles, the second repels from the current cloud. With
/// identical clouds and `Q_j = 1` the two sums cancel term by term, giving
/// the exact zero vector.
pub fn kvif_direction(
    spec: &KernelSpec,
    prediction_particles: &[DVector<f64>],
    normalized_likelihood: &[f64],
    flow_particles: &[DVector<f64>],
    eval_point: &DVector<f64>,
) -> Result<DVector<f64>> {
    validate_kvif_inputs(prediction_particles, normalized_likelihood, flow_particles, eval_point)?;
    Ok(kvif_direction_unchecked(
        spec,
        prediction_particles,
        normalized_likelihood,
        flow_particles,
        eval_point,
    ))
}

/// Batched form of [`kvif_direction`]: directions at each of `eval_points`,
/// parallelized over rows. Every row reduces over `j` in input order, so the
/// result is bit-identical to the pointwise operation regardless of thread
/// count.
pub fn kvif_directions(
    spec: &KernelSpec,
    prediction_particles: &[DVector<f64>],
    normalized_likelihood: &[f64],
    flow_particles: &[DVector<f64>],
    eval_points: &[DVector<f64>],
) -> Result<Vec<DVector<f64>>> {
    let first = eval_points
        .first()
        .ok_or_else(|| Error::usage("kvif_directions: no eval points"))?;
    validate_kvif_inputs(prediction_particles, normalized_likelihood, flow_particles, first)?;
    for e in eval_points {
        if e.len() != first.len() {
            return Err(Error::usage("kvif_directions: eval point dimension mismatch"));
        }
    }
    Ok(eval_points
        .par_iter()
        .map(|e| {
            kvif_direction_unchecked(
                spec,
                prediction_particles,
                normalized_likelihood,
                flow_particles,
                e,
            )
        })
        .collect())
}

fn validate_kvif_inputs(
    prediction_particles: &[DVector<f64>],
    normalized_likelihood: &[f64],
    flow_particles: &[DVector<f64>],
    eval_point: &DVector<f64>,
) -> Result<()> {
    let n = prediction_particles.len();
    if n == 0 {
        return Err(Error::usage("kvif_direction: empty particle set"));
    }
    if normalized_likelihood.len() != n || flow_particles.len() != n {
        return Err(Error::usage(format!(
            "kvif_direction: length mismatch (prediction {}, likelihood {}, flow {})",
            n,
            normalized_likelihood.len(),
            flow_particles.len()
        )));
    }
    let d = eval_point.len();
    if prediction_particles.iter().chain(flow_particles).any(|p| p.len() != d) {
        return Err(Error::usage("kvif_direction: particle dimension mismatch"));
    }
    if let Some(q) = normalized_likelihood.iter().find(|q| **q < 0.0) {
        return Err(Error::usage(format!(
            "kvif_direction: negative likelihood ratio {q}"
        )));
    }
    Ok(())
}

fn kvif_direction_unchecked(
    spec: &KernelSpec,
    prediction: &[DVector<f64>],
    q_ratio: &[f64],
    flow: &[DVector<f64>],
    eval_point: &DVector<f64>,
) -> DVector<f64> {
    let n = prediction.len();
    let d = eval_point.len();
    let h = spec.bandwidth;
    let e = eval_point.as_slice();

    // Attraction and repulsion are accumulated separately in the same j
    // order; when the clouds coincide and Q = 1 the accumulators are
    // bitwise equal and the difference is exactly zero.
    let mut attract = vec![0.0f64; d];
    let mut repel = vec![0.0f64; d];
    for (s, &q) in prediction.iter().zip(q_ratio) {
        let s = s.as_slice();
        let coeff = 2.0 / h * (-squared_distance(s, e) / h).exp() * q;
        for (acc, (a, b)) in attract.iter_mut().zip(s.iter().zip(e)) {
            *acc += coeff * (a - b);
        }
    }
    for t in flow {
        let t = t.as_slice();
        let coeff = 2.0 / h * (-squared_distance(t, e) / h).exp();
        for (acc, (a, b)) in repel.iter_mut().zip(t.iter().zip(e)) {
            *acc += coeff * (a - b);
        }
    }
    DVector::from_fn(d, |i, _| (attract[i] - repel[i]) / n as f64)
}

/// Stein variational gradient direction at `eval_point` (diagnostic mode; the
/// score of the target must be supplied analytically):
///
/// `(1/N) sum_j [ k(x_j, e) score_j + grad1 k(x_j, e) ]`
///
/// with `grad1 k(x_j, e) = -grad2(x_j, e)`.
pub fn svgd_direction(
    spec: &KernelSpec,
    particles: &[DVector<f64>],
    score_values: &[DVector<f64>],
    eval_point: &DVector<f64>,
) -> Result<DVector<f64>> {
    let n = particles.len();
    if n == 0 {
        return Err(Error::usage("svgd_direction: empty particle set"));
    }
    if score_values.len() != n {
        return Err(Error::usage(format!(
            "svgd_direction: length mismatch (particles {}, scores {})",
            n,
            score_values.len()
        )));
    }
    let d = eval_point.len();
    if particles.iter().chain(score_values).any(|p| p.len() != d) {
        return Err(Error::usage("svgd_direction: dimension mismatch"));
    }

    let h = spec.bandwidth;
    let e = eval_point.as_slice();
    let mut acc = vec![0.0f64; d];
    for (x, score) in particles.iter().zip(score_values) {
        let xs = x.as_slice();
        let k = (-squared_distance(xs, e) / h).exp();
        let gcoeff = 2.0 / h * k;
        for (i, a) in acc.iter_mut().enumerate() {
            // grad1 k(x, e) = -(2/h)(x - e) k = (2/h)(e - x) k
            *a += k * score[i] + gcoeff * (e[i] - xs[i]);
        }
    }
    Ok(DVector::from_fn(d, |i, _| acc[i] / n as f64))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(xs)
    }

    #[test]
    fn eval_at_zero_distance_is_one() {
        let k = KernelSpec::rbf(10.0).unwrap();
        let x = v(&[0.3, -1.2, 4.0]);
        assert_eq!(k.eval(&x, &x).unwrap(), 1.0);
    }

    #[test]
    fn eval_unit_offset_h10() {
        let k = KernelSpec::rbf(10.0).unwrap();
        let x = v(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let y = DVector::zeros(10);
        let expected = (-0.1f64).exp(); // 0.904837...
        assert!((k.eval(&x, &y).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn eval_opposite_points_h1() {
        let k = KernelSpec::rbf(1.0).unwrap();
        let expected = (-4.0f64).exp(); // 0.0183156...
        assert!((k.eval(&v(&[-1.0]), &v(&[1.0])).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn eval_rejects_dimension_mismatch() {
        let k = KernelSpec::rbf(1.0).unwrap();
        assert!(matches!(k.eval(&v(&[1.0]), &v(&[1.0, 2.0])), Err(Error::Usage(_))));
    }

    #[test]
    fn rejects_nonpositive_bandwidth() {
        assert!(KernelSpec::rbf(0.0).is_err());
        assert!(KernelSpec::rbf(-1.0).is_err());
        assert!(KernelSpec::rbf(f64::NAN).is_err());
    }

    #[test]
    fn grad2_at_coincident_points_is_zero() {
        let k = KernelSpec::rbf(3.0).unwrap();
        let x = v(&[0.5, -2.0]);
        assert_eq!(k.grad2(&x, &x).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn grad2_hand_evaluated_1d() {
        // (2/h)(x - y) e^{-(x-y)^2/h} with h=1, x=-1, y=0: -2 e^{-1}
        let k = KernelSpec::rbf(1.0).unwrap();
        let g = k.grad2(&v(&[-1.0]), &v(&[0.0])).unwrap();
        let expected = -2.0 * (-1.0f64).exp(); // -0.735759...
        assert!((g[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn kvif_direction_cancels_at_fixed_point() {
        // Identical clouds with unit likelihood ratios: exact zero vector.
        let k = KernelSpec::rbf(2.0).unwrap();
        let cloud: Vec<_> =
            vec![v(&[0.1, 0.2]), v(&[-1.0, 0.4]), v(&[2.0, -0.3]), v(&[0.9, 1.8])];
        let q = vec![1.0; cloud.len()];
        for e in &cloud {
            let dir = kvif_direction(&k, &cloud, &q, &cloud, e).unwrap();
            assert_eq!(dir, DVector::zeros(2));
        }
        let off = v(&[0.77, -0.33]);
        assert_eq!(kvif_direction(&k, &cloud, &q, &cloud, &off).unwrap(), DVector::zeros(2));
    }

    #[test]
    fn kvif_direction_hand_evaluated_two_particles() {
        // h=1, s={-1,+1}, Q={2,0}, t={-1,+1}, eval 0:
        // attraction (1/2)[(-2e^-1)*2 + (2e^-1)*0] = -2e^-1, repulsion 0.
        let k = KernelSpec::rbf(1.0).unwrap();
        let s = vec![v(&[-1.0]), v(&[1.0])];
        let q = vec![2.0, 0.0];
        let dir = kvif_direction(&k, &s, &q, &s, &v(&[0.0])).unwrap();
        let expected = -2.0 * (-1.0f64).exp();
        assert!((dir[0] - expected).abs() < 1e-14);
    }

    #[test]
    fn kvif_direction_single_coincident_particle() {
        let k = KernelSpec::rbf(1.0).unwrap();
        let p = vec![v(&[0.4])];
        let dir = kvif_direction(&k, &p, &[1.0], &p, &v(&[0.4])).unwrap();
        assert_eq!(dir, DVector::zeros(1));
    }

    #[test]
    fn kvif_direction_rejects_bad_inputs() {
        let k = KernelSpec::rbf(1.0).unwrap();
        let s = vec![v(&[0.0]), v(&[1.0])];
        assert!(kvif_direction(&k, &s, &[1.0], &s, &v(&[0.0])).is_err());
        assert!(kvif_direction(&k, &s, &[1.0, -0.5], &s, &v(&[0.0])).is_err());
        assert!(kvif_direction(&k, &s, &[1.0, 1.0], &s, &v(&[0.0, 0.0])).is_err());
    }

    #[test]
    fn batched_directions_match_pointwise() {
        let k = KernelSpec::rbf(2.5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let rand_cloud = |rng: &mut ChaCha8Rng, n: usize| -> Vec<DVector<f64>> {
            (0..n).map(|_| DVector::from_fn(3, |_, _| rng.gen_range(-2.0..2.0))).collect()
        };
        let pred = rand_cloud(&mut rng, 8);
        let flow = rand_cloud(&mut rng, 8);
        let q: Vec<f64> = (0..8).map(|_| rng.gen_range(0.0..2.0)).collect();
        let batch = kvif_directions(&k, &pred, &q, &flow, &flow).unwrap();
        for (e, got) in flow.iter().zip(&batch) {
            let want = kvif_direction(&k, &pred, &q, &flow, e).unwrap();
            assert_eq!(got, &want);
        }
    }

    #[test]
    fn svgd_direction_examples() {
        let k = KernelSpec::rbf(1.0).unwrap();
        // single particle at the eval point with zero score
        let dir =
            svgd_direction(&k, &[v(&[0.7])], &[v(&[0.0])], &v(&[0.7])).unwrap();
        assert_eq!(dir, DVector::zeros(1));
        // k(0,0)*1 + 0 = 1
        let dir = svgd_direction(&k, &[v(&[0.0])], &[v(&[1.0])], &v(&[0.0])).unwrap();
        assert!((dir[0] - 1.0).abs() < 1e-15);
        // symmetric cloud, zero scores, eval at the center
        let dir = svgd_direction(
            &k,
            &[v(&[-0.8]), v(&[0.8])],
            &[v(&[0.0]), v(&[0.0])],
            &v(&[0.0]),
        )
        .unwrap();
        assert!(dir[0].abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn kernel_symmetry_is_exact(
            xs in proptest::collection::vec(-10.0f64..10.0, 1..6),
            ys_seed in proptest::collection::vec(-10.0f64..10.0, 1..6),
            h in 0.1f64..20.0,
        ) {
            let d = xs.len().min(ys_seed.len());
            let k = KernelSpec::rbf(h).unwrap();
            let x = v(&xs[..d]);
            let y = v(&ys_seed[..d]);
            prop_assert_eq!(k.eval(&x, &y).unwrap(), k.eval(&y, &x).unwrap());
        }

        #[test]
        fn gradient_antisymmetry(
            xs in proptest::collection::vec(-5.0f64..5.0, 3),
            ys in proptest::collection::vec(-5.0f64..5.0, 3),
            h in 0.1f64..20.0,
        ) {
            let k = KernelSpec::rbf(h).unwrap();
            let x = v(&xs);
            let y = v(&ys);
            let sum = k.grad2(&x, &y).unwrap() + k.grad2(&y, &x).unwrap();
            for c in sum.iter() {
                prop_assert!(c.abs() <= 1e-12);
            }
        }

        #[test]
        fn kvif_permutation_invariance(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let k = KernelSpec::rbf(1.5).unwrap();
            let n = 6;
            let pred: Vec<_> = (0..n)
                .map(|_| DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0)))
                .collect();
            let flow: Vec<_> = (0..n)
                .map(|_| DVector::from_fn(2, |_, _| rng.gen_range(-3.0..3.0)))
                .collect();
            let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
            let e = v(&[0.25, -0.5]);
            let base = kvif_direction(&k, &pred, &q, &flow, &e).unwrap();

            // common permutation of (prediction, likelihood); independent one of flow
            let perm: Vec<usize> = vec![3, 0, 5, 1, 4, 2];
            let pred_p: Vec<_> = perm.iter().map(|&i| pred[i].clone()).collect();
            let q_p: Vec<f64> = perm.iter().map(|&i| q[i]).collect();
            let flow_p: Vec<_> = perm.iter().rev().map(|&i| flow[i].clone()).collect();
            let permuted = kvif_direction(&k, &pred_p, &q_p, &flow_p, &e).unwrap();
            for (a, b) in base.iter().zip(permuted.iter()) {
                prop_assert!((a - b).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        // central differences of eval in the second argument, dims 1..=10
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for dim in 1..=10usize {
            let h = rng.gen_range(0.5..10.0);
            let k = KernelSpec::rbf(h).unwrap();
            let x = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
            let y = DVector::from_fn(dim, |_, _| rng.gen_range(-2.0..2.0));
            let g = k.grad2(&x, &y).unwrap();
            let step = 1e-5;
            for c in 0..dim {
                let mut yp = y.clone();
                let mut ym = y.clone();
                yp[c] += step;
                ym[c] -= step;
                let fd = (k.eval(&x, &yp).unwrap() - k.eval(&x, &ym).unwrap()) / (2.0 * step);
                let denom = fd.abs().max(1e-8);
                assert!(
                    (g[c] - fd).abs() / denom <= 1e-6,
                    "dim {dim} comp {c}: grad {} vs fd {}",
                    g[c],
                    fd
                );
            }
        }
    }
}
