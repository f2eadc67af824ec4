//! The Fejer mapping, its iterates, and the pseudo-projection onto the
//! constraint polytope.
//!
//! For an instance with rows `a_i` and bounds `b_i` the map is
//!
//! ```text
//! φ(x) = x − (λ/m) · Σ_i  max{⟨a_i, x⟩ − b_i, 0} / ‖a_i‖² · a_i
//! ```
//!
//! with relaxation factor `0 < λ < 2`. Every point of the polytope is a
//! fixed point, and from outside the polytope each application strictly
//! decreases the distance to every feasible point. Repeated application
//! therefore converges to *some* feasible point, the pseudo-projection,
//! though generally not to the nearest one.

use crate::instance::{LpInstance, Point};
use crate::Error;

/// Parameters of the Fejer iteration.
///
/// `lambda` must lie in the open interval `(0, 2)`; the default `1.5`
/// over-relaxes, which usually speeds the process up.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FejerParams {
    pub lambda: f64,
    pub max_iters: usize,
    pub conv_tol: f64,
}

impl FejerParams {
    pub fn new(lambda: f64) -> Result<Self, Error> {
        if !(lambda > 0.0 && lambda < 2.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                message: format!("relaxation factor must satisfy 0 < lambda < 2, got {lambda}"),
            });
        }
        Ok(FejerParams {
            lambda,
            ..FejerParams::default()
        })
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn with_conv_tol(mut self, conv_tol: f64) -> Self {
        assert!(conv_tol > 0.0, "conv_tol must be positive");
        self.conv_tol = conv_tol;
        self
    }
}

impl Default for FejerParams {
    fn default() -> Self {
        FejerParams {
            lambda: 1.5,
            max_iters: 1_000_000,
            conv_tol: 1e-10,
        }
    }
}

/// Outcome of [`pseudo_projection`].
#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionResult {
    pub point: Point,
    pub iterations_used: usize,
    pub converged: bool,
    /// `‖φ(x) − x‖` of the last step taken; infinite if no step was taken.
    pub final_step_norm: f64,
}

/// Unscaled correction sum `Σ_i residual_i(x)/‖a_i‖² · a_i`, accumulated in
/// ascending row order so runs are bit-reproducible.
pub(crate) fn correction(inst: &LpInstance, x: &Point) -> Vec<f64> {
    assert_eq!(x.dim(), inst.dim(), "dimension mismatch");
    let mut sum = vec![0.0; inst.dim()];
    for i in 0..inst.num_rows() {
        let r = inst.residual(i, x);
        if r > 0.0 {
            let w = r / inst.row_norm_sq(i);
            for (c, a) in sum.iter_mut().zip(inst.row(i)) {
                *c += w * a;
            }
        }
    }
    sum
}

/// One application of the Fejer map. Feasible points come back bit-for-bit
/// unchanged.
///
/// Panics if `lambda` is outside `(0, 2)` or the dimensions disagree.
pub fn fejer_map(inst: &LpInstance, lambda: f64, x: &Point) -> Point {
    assert!(
        lambda > 0.0 && lambda < 2.0,
        "relaxation factor must satisfy 0 < lambda < 2, got {lambda}"
    );
    let correction = correction(inst, x);
    let scale = lambda / inst.num_rows() as f64;
    Point::new(
        x.coords()
            .iter()
            .zip(&correction)
            .map(|(xi, ci)| xi - scale * ci)
            .collect(),
    )
}

/// `s`-fold composition of the Fejer map; `s = 0` returns `x` unchanged.
pub fn fejer_iterate(inst: &LpInstance, lambda: f64, x: &Point, s: usize) -> Point {
    let mut cur = x.clone();
    for _ in 0..s {
        cur = fejer_map(inst, lambda, &cur);
    }
    cur
}

/// Runs the Fejer process from `x` until the step norm `‖φ(x) − x‖` drops
/// to `conv_tol` or the iteration budget runs out. Budget exhaustion is
/// reported through `converged = false`, not as an error; only non-finite
/// arithmetic is.
pub fn pseudo_projection(
    inst: &LpInstance,
    params: &FejerParams,
    x: &Point,
) -> Result<ProjectionResult, Error> {
    assert!(params.conv_tol > 0.0, "conv_tol must be positive");
    let mut cur = x.clone();
    let mut last_step = f64::INFINITY;
    for iter in 1..=params.max_iters {
        let next = fejer_map(inst, params.lambda, &cur);
        if !next.is_finite() {
            return Err(Error::NonFinite);
        }
        last_step = next.distance_to(&cur);
        cur = next;
        if last_step <= params.conv_tol {
            return Ok(ProjectionResult {
                point: cur,
                iterations_used: iter,
                converged: true,
                final_step_norm: last_step,
            });
        }
    }
    Ok(ProjectionResult {
        point: cur,
        iterations_used: params.max_iters,
        converged: false,
        final_step_norm: last_step,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_distance;
    use crate::scenario::random_feasible_instance;
    use proptest::prelude::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn halfspace() -> LpInstance {
        LpInstance::new(vec![vec![1.0, 0.0]], vec![1.0], vec![1.0, 0.0]).unwrap()
    }

    fn unit_box_augmented() -> LpInstance {
        LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap()
        .augment_nonnegativity()
    }

    #[test]
    fn halfspace_projection_is_one_step_exact() {
        // With λ = 1 and a single row, φ is the Euclidean projection.
        let y = fejer_map(&halfspace(), 1.0, &Point::new(vec![2.0, 0.0]));
        assert_eq!(y.coords(), &[1.0, 0.0]);
    }

    #[test]
    fn feasible_point_is_a_bitwise_fixed_point() {
        let inst = unit_box_augmented();
        let x = Point::new(vec![0.3125, 0.7181]);
        assert_eq!(fejer_map(&inst, 1.5, &x), x);
    }

    #[test]
    fn two_axis_rows_through_origin() {
        // Rows x ≤ 0 and y ≤ 0; both violated at (2,2) with residual 2, so
        // the averaged correction is (λ/2)·2 = 2 per axis at λ = 1... scaled
        // by 1/m = 1/2: each axis moves by 1.
        let inst = LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0, 0.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let y = fejer_map(&inst, 1.0, &Point::new(vec![2.0, 2.0]));
        assert_eq!(y.coords(), &[1.0, 1.0]);
    }

    #[test]
    fn iterate_zero_is_identity_and_one_is_the_map() {
        let inst = halfspace();
        let x = Point::new(vec![2.0, 0.0]);
        assert_eq!(fejer_iterate(&inst, 1.0, &x, 0), x);
        assert_eq!(fejer_iterate(&inst, 1.0, &x, 1), fejer_map(&inst, 1.0, &x));
        // Projection is reached in one step and then stays put.
        assert_eq!(fejer_iterate(&inst, 1.0, &x, 3).coords(), &[1.0, 0.0]);
    }

    #[test]
    fn pseudo_projection_of_feasible_point_is_immediate() {
        let inst = unit_box_augmented();
        let x = Point::new(vec![0.5, 0.5]);
        let res = pseudo_projection(&inst, &FejerParams::default(), &x).unwrap();
        assert!(res.converged);
        assert_eq!(res.point, x);
        assert!(res.iterations_used <= 1);
        assert_eq!(res.final_step_norm, 0.0);
    }

    #[test]
    fn pseudo_projection_onto_box_matches_clamp() {
        let inst = unit_box_augmented();
        let params = FejerParams::new(1.0).unwrap();
        let res = pseudo_projection(&inst, &params, &Point::new(vec![2.0, 0.5])).unwrap();
        assert!(res.converged);
        // Exact Euclidean projection of (2, 0.5) onto the box is (1, 0.5).
        assert!((res.point[0] - 1.0).abs() < 1e-6);
        assert!((res.point[1] - 0.5).abs() < 1e-6);
    }

    #[test]
    fn pseudo_projection_onto_simplex_lands_feasible() {
        let simplex = LpInstance::new(vec![vec![1.0, 1.0]], vec![1.0], vec![1.0, 1.0])
            .unwrap()
            .augment_nonnegativity();
        let res = pseudo_projection(
            &simplex,
            &FejerParams::new(1.0).unwrap(),
            &Point::new(vec![2.0, 2.0]),
        )
        .unwrap();
        assert!(res.converged);
        assert!(simplex.is_feasible(&res.point, 1e-9));
        // From (2,2) the iteration stays on the diagonal and settles at the
        // analytic limit (0.5, 0.5); regression-pinned.
        assert!((res.point[0] - 0.5).abs() < 1e-6);
        assert!((res.point[1] - 0.5).abs() < 1e-6);
        assert!((res.point[0] - res.point[1]).abs() < 1e-12);
    }

    #[test]
    fn budget_exhaustion_is_reported_not_thrown() {
        let inst = unit_box_augmented();
        let params = FejerParams::new(1.0).unwrap().with_max_iters(2);
        let res = pseudo_projection(&inst, &params, &Point::new(vec![50.0, 0.5])).unwrap();
        assert!(!res.converged);
        assert_eq!(res.iterations_used, 2);
        assert!(res.final_step_norm > params.conv_tol);
    }

    #[test]
    fn distance_to_polytope_is_monotone_under_iteration() {
        // Checked against the exact 2-D oracle on random instances.
        for seed in 0..5u64 {
            let (inst, _) = random_feasible_instance(2, 6, seed).unwrap();
            let inst = inst.augment_nonnegativity();
            let x = Point::new(vec![40.0, 35.0]);
            let mut cur = x;
            let mut last = exact_distance(&inst, &cur).unwrap();
            for _ in 0..60 {
                cur = fejer_map(&inst, 1.5, &cur);
                let d = exact_distance(&inst, &cur).unwrap();
                assert!(d <= last + 1e-12, "distance increased: {last} -> {d}");
                last = d;
            }
        }
    }

    #[test]
    fn continuity_probe() {
        // Smoke test: small input perturbations move the output by at most
        // a constant multiple (no formal claim; 4 is comfortably above the
        // map's Lipschitz constant for λ ≤ 1.9).
        let (inst, _) = random_feasible_instance(3, 7, 11).unwrap();
        let inst = inst.augment_nonnegativity();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..200 {
            let x = Point::new((0..3).map(|_| rng.random_range(-5.0..5.0)).collect());
            let delta: Vec<f64> = (0..3).map(|_| rng.random_range(-1e-6..1e-6)).collect();
            let xd = x.translated(1.0, &delta);
            let lhs = fejer_map(&inst, 1.9, &x).distance_to(&fejer_map(&inst, 1.9, &xd));
            let dn = delta.iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(lhs <= 4.0 * dn, "jump {lhs} for perturbation {dn}");
        }
    }

    proptest! {
        // Strict distance decrease toward any feasible point from any
        // infeasible one, for every admissible relaxation factor.
        #[test]
        fn fejer_property_on_random_instances(
            seed in 0u64..20,
            lambda in prop_oneof![Just(0.5), Just(1.0), Just(1.5), Just(1.9)],
            push in 1.0f64..20.0,
        ) {
            let (inst, interior) = random_feasible_instance(2, 5, seed).unwrap();
            let inst = inst.augment_nonnegativity();
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9e37) ^ push.to_bits());
            let dir: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut x = interior.translated(push * 10.0, &dir);
            // Make sure the sample is solidly outside.
            while inst.max_scaled_residual(&x) < 1e-3 {
                x = x.translated(5.0, &[1.0, 1.0]);
            }
            let fx = fejer_map(&inst, lambda, &x);
            prop_assert!(
                x.distance_to(&interior) - fx.distance_to(&interior) > 1e-12,
                "no strict decrease at lambda {}", lambda
            );
        }
    }
}
