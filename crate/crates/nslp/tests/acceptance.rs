//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured numbers. Criterion 8 (byte-identical CLI output) lives in
//! the command-line crate's own acceptance target.
//!
//! Run with `cargo test -p nslp --test acceptance -- --nocapture`.

use nslp::fejer::{fejer_map, pseudo_projection, FejerParams};
use nslp::oracle::{exact_distance, exact_lp_solve};
use nslp::quest::{
    parallelogram_identity_check, quest_run, shift_equivariance_check, tracking_condition_estimate,
    ConditionSample, DistanceEstimator, QuestConfig,
};
use nslp::scenario::{random_feasible_instance, Scenario};
use nslp::targeting::{
    index_from_marker, index_from_marker_2d, marker_from_index, marker_from_index_2d,
    targeting_run, Cross, Marker, TargetingParams,
};
use nslp::{LpInstance, Point};
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

/// The translating scenario shared by criteria 4 and 5: one map evaluation
/// per update, a drift the sampled condition margins comfortably beat.
fn tracked_translation() -> (Scenario, QuestConfig, Point) {
    let scn = Scenario::translating(unit_box(), vec![1e-4, 0.0]).unwrap();
    let cfg = QuestConfig::new(1, 1.5, 1e-3).unwrap().with_max_updates(50);
    (scn, cfg, Point::new(vec![8.0, 0.5]))
}

/// A feasible point strictly inside, and a point solidly outside, sampled
/// around the certified interior point.
fn sample_pair(inst: &LpInstance, interior: &Point, rng: &mut ChaCha8Rng) -> (Point, Point) {
    let n = inst.dim();
    let inside = loop {
        let jitter: Vec<f64> = (0..n).map(|_| rng.random_range(-0.05..0.05)).collect();
        let cand = interior.translated(1.0, &jitter);
        if inst.is_feasible(&cand, 0.0) {
            break cand;
        }
    };
    let outside = loop {
        let dir: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut cand = interior.translated(rng.random_range(2.0..30.0), &dir);
        let mut tries = 0;
        while inst.max_scaled_residual(&cand) < 1e-3 && tries < 64 {
            cand = cand.translated(2.0, &dir);
            tries += 1;
        }
        if inst.max_scaled_residual(&cand) >= 1e-3 {
            break cand;
        }
    };
    (inside, outside)
}

#[test]
fn criterion_1_fejer_property_suite() {
    let lambdas = [0.5, 1.0, 1.5, 1.9];
    let mut pairs = 0usize;
    let mut min_margin = f64::INFINITY;
    for i in 0..20u64 {
        let n = if i % 2 == 0 { 2 } else { 5 };
        let m = (4 + (i as usize) % 13).max(n);
        let (inst, interior) = random_feasible_instance(n, m, i).unwrap();
        let inst = inst.augment_nonnegativity();
        let mut rng = ChaCha8Rng::seed_from_u64(0xFE0E + i);
        for _ in 0..50 {
            let (inside, outside) = sample_pair(&inst, &interior, &mut rng);
            for lambda in lambdas {
                // Interior points are bitwise fixed.
                assert_eq!(fejer_map(&inst, lambda, &inside), inside);
                let mapped = fejer_map(&inst, lambda, &outside);
                let margin = outside.distance_to(&inside) - mapped.distance_to(&inside);
                assert!(
                    margin > 1e-12,
                    "no strict decrease: margin {margin} at lambda {lambda}, instance {i}"
                );
                min_margin = min_margin.min(margin);
            }
            pairs += 1;
        }
    }
    assert_eq!(pairs, 1000);
    println!(
        "criterion 1 PASS: strict Fejer decrease on 1000 pairs x 4 lambdas \
         (smallest margin {min_margin:.3e}), interior points bitwise fixed"
    );
}

#[test]
fn criterion_2_pseudo_projection_matches_closed_forms() {
    // Single halfspace, lambda = 1: one application is the exact Euclidean
    // projection.
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0f64;
    for n in [2usize, 5] {
        for _ in 0..25 {
            let row: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            if row.iter().map(|v| v * v).sum::<f64>() < 0.1 {
                continue;
            }
            let bound = rng.random_range(-1.0..1.0);
            let inst = LpInstance::new(vec![row.clone()], vec![bound], vec![1.0; n]).unwrap();
            let x = Point::new((0..n).map(|_| rng.random_range(-4.0..4.0)).collect());
            let overshoot = (row.iter().zip(x.coords()).map(|(a, b)| a * b).sum::<f64>() - bound)
                .max(0.0)
                / row.iter().map(|v| v * v).sum::<f64>();
            let expected = x.translated(-overshoot, &row);
            let params = FejerParams::new(1.0).unwrap().with_conv_tol(1e-10);
            let got = pseudo_projection(&inst, &params, &x).unwrap();
            assert!(got.converged);
            worst = worst.max(got.point.distance_to(&expected));
        }
    }
    assert!(worst < 1e-6, "halfspace projection off by {worst}");

    // Axis-aligned boxes: the pseudo-projection limit is the coordinate
    // clamp onto [0, hi].
    let mut worst_box = 0.0f64;
    for n in [2usize, 5] {
        for trial in 0..25 {
            let hi: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..4.0)).collect();
            let rows: Vec<Vec<f64>> = (0..n)
                .map(|j| {
                    let mut r = vec![0.0; n];
                    r[j] = 1.0;
                    r
                })
                .collect();
            let inst = LpInstance::new(rows, hi.clone(), vec![1.0; n])
                .unwrap()
                .augment_nonnegativity();
            let x = Point::new((0..n).map(|_| rng.random_range(-6.0..6.0)).collect());
            let clamp = Point::new(
                x.coords()
                    .iter()
                    .zip(&hi)
                    .map(|(&v, &h)| v.clamp(0.0, h))
                    .collect(),
            );
            let lambda = if trial % 2 == 0 { 1.0 } else { 1.5 };
            let params = FejerParams::new(lambda).unwrap().with_conv_tol(1e-10);
            let got = pseudo_projection(&inst, &params, &x).unwrap();
            assert!(got.converged);
            worst_box = worst_box.max(got.point.distance_to(&clamp));
        }
    }
    assert!(worst_box < 1e-6, "box projection off by {worst_box}");
    println!(
        "criterion 2 PASS: pseudo-projection within 1e-6 of closed forms \
         (halfspace worst {worst:.3e}, box worst {worst_box:.3e})"
    );
}

#[test]
fn criterion_3_shift_equivariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for trial in 0..200u64 {
        let n = if trial % 2 == 0 { 2 } else { 5 };
        let (inst, _) = random_feasible_instance(n, n + 4, trial).unwrap();
        let d: Vec<f64> = (0..n).map(|_| rng.random_range(-0.05..0.05)).collect();
        let scn = Scenario::translating(inst, d).unwrap();
        let u = Point::new((0..n).map(|_| rng.random_range(0.0..6.0)).collect());
        let p = rng.random_range(0..=5);
        let l = rng.random_range(1..=50);
        let lambda = [0.5, 1.0, 1.5, 1.9][rng.random_range(0..4)];
        let residual = shift_equivariance_check(&scn, 10, &u, p, l, lambda);
        assert!(residual <= 1e-9, "residual {residual} at trial {trial}");
        worst = worst.max(residual);
    }
    println!("criterion 3 PASS: 200 equivariance residuals all <= 1e-9 (worst {worst:.3e})");
}

#[test]
fn criterion_4_tracking_converges_under_the_condition() {
    let (scn, cfg, z0) = tracked_translation();

    // Sampled tracking-condition margins are all positive.
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let samples: Vec<Point> = (0..100)
        .map(|_| {
            Point::new(vec![
                rng.random_range(1.1..9.0),
                rng.random_range(-3.0..4.0),
            ])
        })
        .collect();
    let margins =
        tracking_condition_estimate(&scn, cfg.update_interval, cfg.lambda, &samples).unwrap();
    let mut checked = 0;
    let mut min_margin = f64::INFINITY;
    for m in &margins {
        if let ConditionSample::Margin(v) = m {
            assert!(*v > 0.0, "negative condition margin {v}");
            min_margin = min_margin.min(*v);
            checked += 1;
        }
    }
    assert!(checked >= 50, "too few outside samples: {checked}");

    // The exact-oracle distance dips under epsilon within 50 epochs and
    // never climbs between epochs after the first.
    let res = quest_run(&scn, &z0, &cfg).unwrap();
    assert!(res.terminated, "no termination within 50 epochs");
    let d: Vec<f64> = res.distances().collect();
    assert!(res
        .epochs
        .iter()
        .all(|e| e.estimator == DistanceEstimator::Exact));
    for w in d.windows(2) {
        assert!(
            w[1] <= w[0] + 1e-9,
            "distance increased between epochs: {} -> {}",
            w[0],
            w[1]
        );
    }
    assert!(*d.last().unwrap() < 1e-3);
    println!(
        "criterion 4 PASS: {} positive condition margins (min {min_margin:.4}), \
         oracle distance monotone and {:.3e} < 1e-3 after {} epochs",
        checked,
        d.last().unwrap(),
        res.updates
    );
}

#[test]
fn criterion_5_proof_identity_suite() {
    let (scn, cfg, z0) = tracked_translation();
    let gaps = parallelogram_identity_check(&scn, &z0, &cfg, 10, 0.0).unwrap();
    assert_eq!(gaps.len(), 11);
    let mut worst_offset = 0.0f64;
    let mut worst_distance = 0.0f64;
    for g in &gaps {
        assert!(
            !g.y_feasible,
            "compensated iterate entered the polytope at k = {}",
            g.update
        );
        assert!(
            g.offset_gap <= 1e-8,
            "offset identity broke at k = {}: {}",
            g.update,
            g.offset_gap
        );
        assert!(
            g.distance_gap <= 1e-8,
            "distance identity broke at k = {}: {}",
            g.update,
            g.distance_gap
        );
        worst_offset = worst_offset.max(g.offset_gap);
        worst_distance = worst_distance.max(g.distance_gap);
    }
    println!(
        "criterion 5 PASS: offset gaps <= {worst_offset:.3e} and distance gaps \
         <= {worst_distance:.3e} for k <= 10"
    );
}

#[test]
fn criterion_6_numbering() {
    // Round trip and agreement with the generalized scheme on n = 2.
    for cohort_size in [2usize, 4, 6, 8] {
        for alpha in 0..=2 * cohort_size {
            let marker = marker_from_index_2d(cohort_size, alpha);
            assert_eq!(index_from_marker_2d(cohort_size, marker), alpha);
            assert_eq!(marker_from_index(2, cohort_size, alpha), marker);
            assert_eq!(index_from_marker(2, cohort_size, marker), alpha);
        }
        assert_eq!(
            marker_from_index_2d(cohort_size, cohort_size),
            Marker::center()
        );
    }
    // Cross cardinality nK + 1 with all-distinct markers for n <= 5, K <= 8.
    for dim in 2..=5usize {
        for cohort_size in [2usize, 4, 6, 8] {
            let cross = Cross::new(Point::zero(dim), cohort_size, 1.0).unwrap();
            assert_eq!(cross.total_points(), dim * cohort_size + 1);
            let distinct: std::collections::HashSet<_> = cross.markers().collect();
            assert_eq!(distinct.len(), dim * cohort_size + 1);
        }
    }
    println!(
        "criterion 6 PASS: marker round trips on all indices for K in {{2,4,6,8}}, \
         cardinality nK+1 for n <= 5"
    );
}

#[test]
fn criterion_7_targeting_tracks_the_oracle() {
    // Static box: the center reaches the optimal vertex and stays within
    // s·n of it.
    let scn = Scenario::stationary(unit_box());
    let cfg = QuestConfig::new(10, 1.5, 1e-4).unwrap();
    let start = quest_run(&scn, &Point::new(vec![3.0, 0.5]), &cfg).unwrap();
    let spacing = 0.05;
    let params = TargetingParams {
        cohort_size: 4,
        spacing,
        steps: 125,
        feas_tol: 1e-9,
        workers: 1,
    };
    let state = targeting_run(&scn, &start, &params, &cfg).unwrap();
    let vertex = exact_lp_solve(scn.base()).unwrap().optimum.unwrap();
    let reach = spacing * 2.0;
    let mut worst_static = 0.0f64;
    for record in state.trace().iter().skip(25) {
        let gap = record.center.distance_to(&vertex);
        assert!(
            gap <= reach,
            "center {:?} strayed {gap} from the vertex at k = {}",
            record.center,
            record.time_index
        );
        worst_static = worst_static.max(gap);
    }

    // Translating box: the tracked objective stays within 2s‖c‖ of the
    // moving optimum after warm-up.
    let scn = Scenario::translating(unit_box(), vec![1e-3, 0.0]).unwrap();
    let cfg = QuestConfig::new(10, 1.5, 1e-4).unwrap();
    let start = quest_run(&scn, &Point::new(vec![3.0, 0.5]), &cfg).unwrap();
    let spacing = 0.02;
    let params = TargetingParams {
        cohort_size: 4,
        spacing,
        steps: 125,
        feas_tol: 1e-9,
        workers: 1,
    };
    let state = targeting_run(&scn, &start, &params, &cfg).unwrap();
    assert!(
        state.events().is_empty(),
        "tracking should never lose this box"
    );
    let c_norm = 2.0f64.sqrt();
    let bound = 2.0 * spacing * c_norm;
    let mut worst_translating = 0.0f64;
    for record in state.trace().iter().skip(25) {
        let inst = scn.instance_at((record.time_index * cfg.update_interval) as f64);
        let opt = exact_lp_solve(&inst).unwrap().value;
        let gap = (opt - record.objective).abs();
        assert!(
            gap <= bound,
            "objective gap {gap} > {bound} at k = {}",
            record.time_index
        );
        worst_translating = worst_translating.max(gap);
    }
    println!(
        "criterion 7 PASS: static center within s*n of the vertex for 100 \
         post-warm-up steps (worst {worst_static:.4}); translating objective \
         gap <= {bound:.4} (worst {worst_translating:.4})"
    );
}

#[test]
fn criterion_9_reacquisition_restores_tracking() {
    // The box leaps away mid-run: the whole cross goes infeasible, the
    // tracking falls back to acquisition, and the gap bound of criterion 7
    // holds again after the post-recovery warm-up.
    let jumped = LpInstance::new(
        vec![
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![-1.0, 0.0],
            vec![0.0, -1.0],
        ],
        vec![11.0, 11.0, -10.0, -10.0],
        vec![1.0, 1.0],
    )
    .unwrap();
    let scn =
        Scenario::piecewise_raw(unit_box().augment_nonnegativity(), vec![(350.0, jumped)]).unwrap();
    let cfg = QuestConfig::new(10, 1.5, 1e-4).unwrap();
    let start = quest_run(&scn, &Point::new(vec![3.0, 0.5]), &cfg).unwrap();
    let spacing = 0.05;
    let params = TargetingParams {
        cohort_size: 4,
        spacing,
        steps: 120,
        feas_tol: 1e-9,
        workers: 1,
    };
    let state = targeting_run(&scn, &start, &params, &cfg).unwrap();
    assert!(
        !state.events().is_empty(),
        "the jump must force at least one recovery"
    );
    let resumed = state.events().last().unwrap().resumed_update;
    let bound = 2.0 * spacing * 2.0f64.sqrt();
    let mut judged = 0;
    let mut worst = 0.0f64;
    for record in state.trace() {
        if record.time_index < resumed + 25 {
            continue;
        }
        let inst = scn.instance_at((record.time_index * cfg.update_interval) as f64);
        let opt = exact_lp_solve(&inst).unwrap().value;
        let gap = (opt - record.objective).abs();
        assert!(
            gap <= bound,
            "objective gap {gap} > {bound} at k = {} after recovery",
            record.time_index
        );
        worst = worst.max(gap);
        judged += 1;
    }
    assert!(
        judged >= 20,
        "not enough post-recovery steps were judged: {judged}"
    );
    println!(
        "criterion 9 PASS: {} recovery event(s), {judged} post-recovery steps \
         within the gap bound (worst {worst:.4})",
        state.events().len()
    );
}

#[test]
fn oracle_distance_consistency_under_translation() {
    // Supporting check used throughout: the exact distance commutes with
    // the rigid translation of the feasible set.
    let scn = Scenario::translating(unit_box(), vec![0.2, -0.1]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let x = Point::new(vec![
            rng.random_range(-3.0..5.0),
            rng.random_range(-3.0..5.0),
        ]);
        let k = rng.random_range(0..6usize);
        let t = (k * 10) as f64;
        let moved = exact_distance(&scn.instance_at(t), &x).unwrap();
        let shifted_back = x.translated(-t, scn.velocity().unwrap());
        let still = exact_distance(scn.base(), &shifted_back).unwrap();
        assert!(
            (moved - still).abs() <= 1e-9,
            "distance not translation-consistent: {moved} vs {still}"
        );
    }
    println!("supporting check PASS: exact distance is translation-consistent");
}
