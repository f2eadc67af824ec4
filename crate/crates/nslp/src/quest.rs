//! The first solver phase: a Fejer process whose input data refresh every
//! `L` iterations, chasing the moving polytope until the iterate is within
//! `ε` of it.
//!
//! The update clock is discrete: one time unit equals one Fejer-map
//! evaluation, and the data refresh instants are `t_k = kL`. Epoch `k`
//! applies `L` map evaluations against the data frozen at `t_{k−1}` and
//! then measures the distance to the polytope at `t_k`.
//!
//! The module also exposes executable forms of the translation-case
//! analysis (the shifted map equivariance, the drift-compensated `ψ`
//! process and the parallelogram distance identity) plus a sampled
//! estimate of the sufficient tracking condition
//! `‖Ld‖ < dist(x, M) − dist(φ^L(x), M)`. These exist so the guarantees can
//! be tested numerically; positive sampled margins are evidence, not proof.

use crate::fejer::{fejer_iterate, pseudo_projection, FejerParams};
use crate::instance::{LpInstance, Point};
use crate::oracle;
use crate::scenario::Scenario;
use crate::Error;

/// Configuration of a tracking run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuestConfig {
    /// Fejer-map evaluations per data refresh (`L ≥ 1`).
    pub update_interval: usize,
    pub lambda: f64,
    /// Distance threshold ending the phase.
    pub epsilon: f64,
    /// Budget on the number of update epochs.
    pub max_updates: usize,
}

impl QuestConfig {
    pub fn new(update_interval: usize, lambda: f64, epsilon: f64) -> Result<Self, Error> {
        if update_interval < 1 {
            return Err(Error::InvalidParameter {
                name: "update_interval",
                message: "must be at least 1".into(),
            });
        }
        if !(lambda > 0.0 && lambda < 2.0) {
            return Err(Error::InvalidParameter {
                name: "lambda",
                message: format!("relaxation factor must satisfy 0 < lambda < 2, got {lambda}"),
            });
        }
        if epsilon <= 0.0 || !epsilon.is_finite() {
            return Err(Error::InvalidParameter {
                name: "epsilon",
                message: format!("must be a positive finite number, got {epsilon}"),
            });
        }
        Ok(QuestConfig {
            update_interval,
            lambda,
            epsilon,
            max_updates: 1000,
        })
    }

    pub fn with_max_updates(mut self, max_updates: usize) -> Self {
        self.max_updates = max_updates;
        self
    }
}

/// How a recorded distance was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DistanceEstimator {
    /// Exact oracle value (2-D polygon or axis-aligned box).
    Exact,
    /// `max(scaled residual, ‖pseudo-projection probe‖)`; converges to zero
    /// exactly when the iterate approaches the polytope, but carries no
    /// formal bound.
    Surrogate,
}

/// One record per update epoch.
#[derive(Clone, Debug)]
pub struct QuestEpoch {
    /// Absolute update index `k` (time `kL`).
    pub update: usize,
    /// The iterate `z_k` after this epoch.
    pub point: Point,
    /// Distance estimate to the polytope at time `kL`.
    pub distance: f64,
    pub estimator: DistanceEstimator,
}

/// Outcome of [`quest_run`].
#[derive(Clone, Debug)]
pub struct QuestResult {
    /// Final iterate.
    pub point: Point,
    /// Absolute update index reached.
    pub updates: usize,
    /// Per-epoch trace; `distances()` strips it down to the numbers.
    pub epochs: Vec<QuestEpoch>,
    /// True iff the last recorded distance fell below `epsilon`.
    pub terminated: bool,
}

impl QuestResult {
    pub fn distances(&self) -> impl Iterator<Item = f64> + '_ {
        self.epochs.iter().map(|e| e.distance)
    }
}

/// Iteration budget of the surrogate's pseudo-projection probe.
pub const PROBE_MAX_ITERS: usize = 200_000;
/// Step-norm tolerance of the probe; keep below any epsilon worth asking
/// for, or the probe cannot resolve the termination test.
pub const PROBE_CONV_TOL: f64 = 1e-10;

/// Distance estimate used by the termination test: the exact oracle where
/// it applies, otherwise the surrogate described on [`DistanceEstimator`].
pub fn estimate_distance(
    inst: &LpInstance,
    z: &Point,
    lambda: f64,
) -> Result<(f64, DistanceEstimator), Error> {
    if oracle::supports_exact_distance(inst) {
        return Ok((oracle::exact_distance(inst, z)?, DistanceEstimator::Exact));
    }
    let lower = inst.max_scaled_residual(z);
    let probe_params = FejerParams {
        lambda,
        max_iters: PROBE_MAX_ITERS,
        conv_tol: PROBE_CONV_TOL,
    };
    let probe = pseudo_projection(inst, &probe_params, z)?;
    Ok((
        lower.max(probe.point.distance_to(z)),
        DistanceEstimator::Surrogate,
    ))
}

/// Runs the tracking phase from `z0` (nonnegative coordinates required)
/// against the scenario clock starting at update 0.
pub fn quest_run(scn: &Scenario, z0: &Point, cfg: &QuestConfig) -> Result<QuestResult, Error> {
    quest_run_from(scn, z0, cfg, 0)
}

/// Like [`quest_run`] but starting at absolute update index `start_update`,
/// so a run can resume mid-scenario. All recorded indices are absolute.
pub fn quest_run_from(
    scn: &Scenario,
    z0: &Point,
    cfg: &QuestConfig,
    start_update: usize,
) -> Result<QuestResult, Error> {
    assert!(
        z0.is_nonneg(),
        "the initial point must have nonnegative coordinates"
    );
    assert_eq!(z0.dim(), scn.dim(), "dimension mismatch");
    assert!(cfg.update_interval >= 1 && cfg.lambda > 0.0 && cfg.lambda < 2.0 && cfg.epsilon > 0.0);
    let interval = cfg.update_interval;
    let mut z = z0.clone();
    let mut epochs = Vec::new();
    for k in 1..=cfg.max_updates {
        let prev = start_update + k - 1;
        let frozen = scn.instance_at((prev * interval) as f64);
        z = fejer_iterate(&frozen, cfg.lambda, &z, interval);
        if !z.is_finite() {
            return Err(Error::NonFinite);
        }
        let now = prev + 1;
        let current = scn.instance_at((now * interval) as f64);
        let (distance, estimator) = estimate_distance(&current, &z, cfg.lambda)?;
        epochs.push(QuestEpoch {
            update: now,
            point: z.clone(),
            distance,
            estimator,
        });
        if distance < cfg.epsilon {
            return Ok(QuestResult {
                point: z,
                updates: now,
                epochs,
                terminated: true,
            });
        }
    }
    Ok(QuestResult {
        point: z,
        updates: start_update + cfg.max_updates,
        epochs,
        terminated: false,
    })
}

/// The drift-compensated map `ψ` of the translation analysis:
/// `ψ(x) = φ^L(x) − L·d` outside the polytope, `ψ(x) = x` on it
/// (membership tested against the base data with `feas_tol`).
///
/// Panics unless `scn` is a translation scenario.
pub fn psi_map(
    scn: &Scenario,
    update_interval: usize,
    lambda: f64,
    feas_tol: f64,
    x: &Point,
) -> Point {
    let velocity = scn
        .velocity()
        .expect("psi_map needs a translation scenario")
        .to_vec();
    let base = scn.base();
    if base.is_feasible(x, feas_tol) {
        return x.clone();
    }
    fejer_iterate(base, lambda, x, update_interval).translated(-(update_interval as f64), &velocity)
}

/// Equivariance check of the shifted maps: with `v = u + pL·d`, the
/// composed maps satisfy `φ_p^l(v) − φ^l(u) = pL·d` exactly in exact
/// arithmetic. Returns the numerical residual `‖φ_p^l(v) − φ^l(u) − pL·d‖`.
///
/// Panics unless `scn` is a translation scenario.
pub fn shift_equivariance_check(
    scn: &Scenario,
    update_interval: usize,
    u: &Point,
    p: usize,
    l: usize,
    lambda: f64,
) -> f64 {
    assert!(l >= 1, "l must be at least 1");
    let velocity = scn
        .velocity()
        .expect("shift_equivariance_check needs a translation scenario")
        .to_vec();
    let shift = (p * update_interval) as f64;
    let mut v = u.translated(shift, &velocity);
    for _ in 0..l {
        v = scn.fejer_map_translated(p, update_interval, lambda, &v);
    }
    let plain = fejer_iterate(scn.base(), lambda, u, l);
    v.coords()
        .iter()
        .zip(plain.coords())
        .zip(&velocity)
        .map(|((a, b), d)| {
            let gap = a - b - shift * d;
            gap * gap
        })
        .sum::<f64>()
        .sqrt()
}

/// Sampled margin of the sufficient tracking condition at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ConditionSample {
    /// The sample was already feasible; the condition quantifies only over
    /// points outside the polytope.
    Skipped,
    /// `dist(x, M) − dist(φ^L(x), M) − ‖L·d‖`; positive means the Fejer
    /// process outruns the polytope at this sample.
    Margin(f64),
}

/// Evaluates the tracking-condition margin at each sample against the base
/// polytope, using the exact distance oracle. All-positive margins are
/// evidence (not proof) that the tracking hypothesis holds.
///
/// Panics unless `scn` is a translation scenario.
pub fn tracking_condition_estimate(
    scn: &Scenario,
    update_interval: usize,
    lambda: f64,
    samples: &[Point],
) -> Result<Vec<ConditionSample>, Error> {
    let velocity = scn
        .velocity()
        .expect("tracking_condition_estimate needs a translation scenario")
        .to_vec();
    let base = scn.base();
    let drift = (update_interval as f64) * velocity.iter().map(|v| v * v).sum::<f64>().sqrt();
    samples
        .iter()
        .map(|x| {
            if base.is_feasible(x, 0.0) {
                return Ok(ConditionSample::Skipped);
            }
            let before = oracle::exact_distance(base, x)?;
            let after =
                oracle::exact_distance(base, &fejer_iterate(base, lambda, x, update_interval))?;
            Ok(ConditionSample::Margin(before - after - drift))
        })
        .collect()
}

/// Per-epoch gaps of the translation analysis identities.
#[derive(Clone, Debug)]
pub struct IdentityGaps {
    pub update: usize,
    /// `‖z_k − y_k − kL·d‖`: the two processes stay a rigid shift apart.
    pub offset_gap: f64,
    /// `|dist(z_k, M_k) − dist(y_k, M)|`: the shift preserves distances.
    pub distance_gap: f64,
    /// Whether `y_k` has entered the polytope; once it has, the identities
    /// no longer apply (both processes have converged).
    pub y_feasible: bool,
}

/// Runs the tracked iteration `z_k` and the drift-compensated iteration
/// `y_k = ψ(y_{k−1})` side by side from `z0` and reports both identity gaps
/// per epoch, using exact oracle distances. Membership inside `ψ` is tested
/// with `feas_tol`.
///
/// Panics unless `scn` is a translation scenario.
pub fn parallelogram_identity_check(
    scn: &Scenario,
    z0: &Point,
    cfg: &QuestConfig,
    k_max: usize,
    feas_tol: f64,
) -> Result<Vec<IdentityGaps>, Error> {
    let velocity = scn
        .velocity()
        .expect("parallelogram_identity_check needs a translation scenario")
        .to_vec();
    let base = scn.base();
    let interval = cfg.update_interval;
    let mut z = z0.clone();
    let mut y = z0.clone();
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if k > 0 {
            let frozen = scn.instance_at(((k - 1) * interval) as f64);
            z = fejer_iterate(&frozen, cfg.lambda, &z, interval);
            y = psi_map(scn, interval, cfg.lambda, feas_tol, &y);
        }
        let shift = (k * interval) as f64;
        let offset_gap = z
            .coords()
            .iter()
            .zip(y.coords())
            .zip(&velocity)
            .map(|((a, b), d)| {
                let gap = a - b - shift * d;
                gap * gap
            })
            .sum::<f64>()
            .sqrt();
        let dz = oracle::exact_distance(&scn.instance_at(shift), &z)?;
        let dy = oracle::exact_distance(base, &y)?;
        out.push(IdentityGaps {
            update: k,
            offset_gap,
            distance_gap: (dz - dy).abs(),
            y_feasible: base.is_feasible(&y, feas_tol),
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn unit_box() -> LpInstance {
        LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    fn halfspace_scn(d: Vec<f64>) -> Scenario {
        let inst = LpInstance::new(vec![vec![1.0, 0.0]], vec![1.0], vec![1.0, 0.0]).unwrap();
        Scenario::translating_raw(inst, d).unwrap()
    }

    #[test]
    fn interior_start_terminates_immediately() {
        let scn = Scenario::stationary(unit_box());
        let cfg = QuestConfig::new(5, 1.0, 1e-6).unwrap();
        let z0 = Point::new(vec![0.5, 0.5]);
        let res = quest_run(&scn, &z0, &cfg).unwrap();
        assert!(res.terminated);
        assert_eq!(res.updates, 1);
        assert_eq!(res.point, z0);
        assert_eq!(res.epochs[0].distance, 0.0);
    }

    #[test]
    fn static_box_converges_to_the_clamp() {
        let scn = Scenario::stationary(unit_box());
        let cfg = QuestConfig::new(50, 1.0, 1e-6).unwrap();
        let res = quest_run(&scn, &Point::new(vec![3.0, 0.5]), &cfg).unwrap();
        assert!(res.terminated);
        // Exact Euclidean projection of the start is (1, 0.5).
        assert!(res.point.distance_to(&Point::new(vec![1.0, 0.5])) < 1e-6);
        assert_eq!(
            res.epochs.last().unwrap().estimator,
            DistanceEstimator::Exact
        );
    }

    #[test]
    fn budget_exhaustion_reports_not_terminated() {
        // A polytope fleeing faster than the map converges.
        let scn = Scenario::translating(unit_box(), vec![5.0, 0.0]).unwrap();
        let cfg = QuestConfig::new(1, 1.0, 1e-9).unwrap().with_max_updates(20);
        let res = quest_run(&scn, &Point::new(vec![30.0, 0.5]), &cfg).unwrap();
        assert!(!res.terminated);
        assert_eq!(res.updates, 20);
        assert_eq!(res.epochs.len(), 20);
    }

    #[test]
    fn tracking_a_slow_translation_by_the_numbers() {
        // Distances recorded against the exact oracle decrease monotonically
        // and dip under epsilon while the box drifts. The exact trace is
        // regression-pinned from the first run.
        let scn = Scenario::translating(unit_box(), vec![5e-5, 0.0]).unwrap();
        let cfg = QuestConfig::new(10, 1.5, 1e-3)
            .unwrap()
            .with_max_updates(50);
        let res = quest_run(&scn, &Point::new(vec![3.0, 0.5]), &cfg).unwrap();
        assert!(
            res.terminated,
            "distances: {:?}",
            res.distances().collect::<Vec<_>>()
        );
        let d: Vec<f64> = res.distances().collect();
        for w in d.windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "distance increased: {w:?}");
        }
        assert!(*d.last().unwrap() < 1e-3);
        assert_eq!(d, vec![0.01768989403545862, 0.0]);
        assert_eq!(res.updates, 2);
        assert_eq!(res.point.coords(), &[1.0006608886490018, 0.5]);
    }

    #[test]
    fn quest_converges_below_tight_epsilon_when_margins_are_positive() {
        let scn = Scenario::translating(unit_box(), vec![5e-8, 0.0]).unwrap();
        let cfg = QuestConfig::new(10, 1.5, 1e-6)
            .unwrap()
            .with_max_updates(200);
        let res = quest_run(&scn, &Point::new(vec![2.0, 0.5]), &cfg).unwrap();
        assert!(res.terminated);
    }

    #[test]
    fn psi_fixes_feasible_points_and_degenerates_without_drift() {
        let scn = halfspace_scn(vec![0.25, 0.0]);
        let inside = Point::new(vec![0.4, 0.2]);
        assert_eq!(psi_map(&scn, 3, 1.0, 1e-9, &inside), inside);

        let zero_drift = halfspace_scn(vec![0.0, 0.0]);
        let outside = Point::new(vec![5.0, 1.0]);
        assert_eq!(
            psi_map(&zero_drift, 4, 1.0, 1e-9, &outside),
            fejer_iterate(zero_drift.base(), 1.0, &outside, 4)
        );
    }

    #[test]
    fn psi_on_the_halfspace_compensates_the_drift() {
        // φ(x) = (1, 0), minus L·d = (0.25, 0).
        let scn = halfspace_scn(vec![0.25, 0.0]);
        let y = psi_map(&scn, 1, 1.0, 1e-9, &Point::new(vec![2.0, 0.0]));
        assert_eq!(y.coords(), &[0.75, 0.0]);
    }

    #[test]
    fn equivariance_residual_vanishes_in_degenerate_cases() {
        let scn = halfspace_scn(vec![0.25, 0.0]);
        let u = Point::new(vec![3.0, 1.0]);
        assert_eq!(shift_equivariance_check(&scn, 5, &u, 0, 7, 1.5), 0.0);

        let zero_drift = halfspace_scn(vec![0.0, 0.0]);
        assert_eq!(shift_equivariance_check(&zero_drift, 5, &u, 3, 7, 1.5), 0.0);
    }

    #[test]
    fn equivariance_residual_stays_tiny_on_random_cases() {
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        for trial in 0..50 {
            let n = if trial % 2 == 0 { 2 } else { 5 };
            let (inst, _) = crate::scenario::random_feasible_instance(n, n + 3, trial).unwrap();
            let d: Vec<f64> = (0..n).map(|_| rng.random_range(-0.05..0.05)).collect();
            let scn = Scenario::translating(inst, d).unwrap();
            let u = Point::new((0..n).map(|_| rng.random_range(0.0..6.0)).collect());
            let p = rng.random_range(0..=5);
            let l = rng.random_range(1..=50);
            let lambda = [0.5, 1.0, 1.5, 1.9][rng.random_range(0..4)];
            let r = shift_equivariance_check(&scn, 10, &u, p, l, lambda);
            assert!(r <= 1e-9, "residual {r} at trial {trial}");
        }
    }

    #[test]
    fn condition_margin_on_the_halfspace_is_exact() {
        let scn = halfspace_scn(vec![0.25, 0.0]);
        let samples = vec![Point::new(vec![2.0, 0.0]), Point::new(vec![0.5, 0.0])];
        let margins = tracking_condition_estimate(&scn, 1, 1.0, &samples).unwrap();
        // dist = 1, one application projects exactly, drift 0.25.
        assert_eq!(margins[0], ConditionSample::Margin(0.75));
        assert_eq!(margins[1], ConditionSample::Skipped);
    }

    #[test]
    fn condition_margin_without_drift_is_the_plain_progress() {
        // d = 0: the margin reduces to dist(x, M) − dist(φ^L(x), M), which
        // is nonnegative and strictly positive wherever the map progresses.
        let scn = halfspace_scn(vec![0.0, 0.0]);
        let samples = vec![
            Point::new(vec![2.0, 0.0]),
            Point::new(vec![1.5, 3.0]),
            Point::new(vec![7.0, -1.0]),
        ];
        let margins = tracking_condition_estimate(&scn, 1, 1.0, &samples).unwrap();
        for m in margins {
            match m {
                ConditionSample::Margin(v) => assert!(v > 0.0, "margin {v}"),
                ConditionSample::Skipped => panic!("all samples lie outside"),
            }
        }
    }

    #[test]
    fn condition_margin_goes_negative_for_fast_polytopes() {
        let scn = halfspace_scn(vec![2.0, 0.0]);
        let margins =
            tracking_condition_estimate(&scn, 1, 1.0, &[Point::new(vec![2.0, 0.0])]).unwrap();
        assert_eq!(margins[0], ConditionSample::Margin(-1.0));
    }

    #[test]
    fn psi_is_distance_decreasing_under_positive_margins() {
        // With slow drift the compensated map still pulls strictly toward
        // every feasible point from outside.
        let scn = Scenario::translating(unit_box(), vec![1e-3, 0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let inside = Point::new(vec![0.5, 0.5]);
        for _ in 0..300 {
            let x = Point::new(vec![
                rng.random_range(1.5..6.0),
                rng.random_range(-2.0..3.0),
            ]);
            if scn.base().is_feasible(&x, 0.0) {
                continue;
            }
            let px = psi_map(&scn, 10, 1.5, 0.0, &x);
            assert!(px.distance_to(&inside) < x.distance_to(&inside));
        }
    }

    #[test]
    fn identity_gaps_vanish_without_drift_and_start_at_zero() {
        let scn = Scenario::translating(unit_box(), vec![0.0, 0.0]).unwrap();
        let cfg = QuestConfig::new(4, 1.0, 1e-9).unwrap();
        let gaps =
            parallelogram_identity_check(&scn, &Point::new(vec![4.0, 0.5]), &cfg, 6, 0.0).unwrap();
        assert_eq!(gaps[0].offset_gap, 0.0);
        assert_eq!(gaps[0].distance_gap, 0.0);
        for g in &gaps {
            assert_eq!(g.offset_gap, 0.0);
            assert_eq!(g.distance_gap, 0.0);
        }
    }

    #[test]
    fn identity_gaps_stay_tiny_on_a_translating_box() {
        // One map evaluation per update keeps the per-epoch contraction
        // gentle enough that the compensated iterate stays outside the box
        // through all ten epochs.
        let scn = Scenario::translating(unit_box(), vec![0.01, 0.0]).unwrap();
        let cfg = QuestConfig::new(1, 1.5, 1e-9).unwrap();
        let gaps =
            parallelogram_identity_check(&scn, &Point::new(vec![8.0, 0.5]), &cfg, 10, 0.0).unwrap();
        assert_eq!(gaps.len(), 11);
        for g in &gaps {
            assert!(!g.y_feasible, "y entered the polytope at k = {}", g.update);
            assert!(
                g.offset_gap <= 1e-8,
                "offset gap {} at k = {}",
                g.offset_gap,
                g.update
            );
            assert!(
                g.distance_gap <= 1e-8,
                "distance gap {} at k = {}",
                g.distance_gap,
                g.update
            );
        }
    }

    #[test]
    fn surrogate_estimator_reports_itself() {
        // A skewed 3-D region: not a box and n > 2, so the oracle is out.
        let rows = vec![vec![1.0, 1.0, 1.0], vec![1.0, -1.0, 0.5]];
        let inst = LpInstance::new(rows, vec![3.0, 1.0], vec![1.0, 1.0, 1.0]).unwrap();
        let scn = Scenario::stationary(inst);
        let cfg = QuestConfig::new(5, 1.5, 1e-6).unwrap();
        let res = quest_run(&scn, &Point::new(vec![4.0, 4.0, 4.0]), &cfg).unwrap();
        assert!(res.terminated);
        assert!(res
            .epochs
            .iter()
            .all(|e| e.estimator == DistanceEstimator::Surrogate));
        // The surrogate agrees with "on the polytope" at termination.
        assert!(scn.base().is_feasible(&res.point, 1e-5));
    }

    #[test]
    fn started_mid_scenario_the_indices_are_absolute() {
        let scn = Scenario::translating(unit_box(), vec![1e-4, 0.0]).unwrap();
        let cfg = QuestConfig::new(10, 1.5, 1e-3).unwrap();
        let res = quest_run_from(&scn, &Point::new(vec![2.0, 0.5]), &cfg, 7).unwrap();
        assert!(res.terminated);
        assert!(res.epochs[0].update == 8);
        assert!(res.updates >= 8);
    }
}
