//! The second solver phase: an axisymmetric cross of probe points whose
//! center tracks the optimum of the moving program.
//!
//! The cross around a center `g0` consists of `n` *cohorts* of `K` points
//! each (`K` even), laid out along the coordinate axes through `g0` with
//! spacing `s`, making `nK + 1` points in total. Each step evaluates which cross
//! points are feasible, picks the best feasible point of every cohort, and
//! either keeps the center (when it is feasible and already beats them all)
//! or moves it to the mean of the per-cohort winners.
//!
//! Points are identified two ways: by a *marker* `(χ, η)` (cohort index
//! and signed offset from the center) and by a flat sequential index used
//! to spread membership checks across workers. The feasibility sweep is the
//! only parallel part and gathers results in index order, so any worker
//! count produces identical output.

use crate::instance::{dot, LpInstance, Point};
use crate::quest::{quest_run_from, QuestConfig, QuestResult};
use crate::scenario::Scenario;
use crate::Error;

/// Identifies a cross point: cohort index `χ` and signed offset `η` from
/// the center along that cohort's axis. `η = 0` only for the center, whose
/// canonical marker is `(0, 0)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Marker {
    pub cohort: usize,
    pub offset: i64,
}

impl Marker {
    pub const fn center() -> Marker {
        Marker {
            cohort: 0,
            offset: 0,
        }
    }

    pub fn is_center(&self) -> bool {
        self.offset == 0
    }

    fn assert_valid(&self, dim: usize, cohort_size: usize) {
        assert!(
            self.cohort < dim,
            "marker cohort {} out of range for dimension {}",
            self.cohort,
            dim
        );
        assert!(
            self.offset.unsigned_abs() as usize <= cohort_size / 2,
            "marker offset {} exceeds K/2 = {}",
            self.offset,
            cohort_size / 2
        );
    }
}

fn assert_cohort_size(cohort_size: usize) {
    assert!(
        cohort_size >= 2 && cohort_size % 2 == 0,
        "cohort size K must be even and at least 2, got {cohort_size}"
    );
}

/// Converts a flat index `α ∈ [0, 2K]` to a marker with the two-dimensional
/// numbering formulas (`÷` is integer division):
///
/// ```text
/// χ = ||α − K| − 1| ÷ (K/2)
/// η = sgn(α − K) · (((|α − K| − 1) mod (K/2)) + 1)
/// ```
///
/// `α = K` is the center. Panics on an out-of-range index.
pub fn marker_from_index_2d(cohort_size: usize, alpha: usize) -> Marker {
    assert_cohort_size(cohort_size);
    assert!(
        alpha <= 2 * cohort_size,
        "index {alpha} out of range 0..={}",
        2 * cohort_size
    );
    let half = (cohort_size / 2) as i64;
    let a = alpha as i64 - cohort_size as i64;
    if a == 0 {
        return Marker::center();
    }
    let q = (a.abs() - 1).abs();
    Marker {
        cohort: (q / half) as usize,
        offset: a.signum() * ((q % half) + 1),
    }
}

/// Inverse of [`marker_from_index_2d`]: `α = η + sgn(η)·(χ/2)·K + K`, where
/// `(χ/2)·K` is the rational product `χK/2`. Panics on an invalid marker.
pub fn index_from_marker_2d(cohort_size: usize, marker: Marker) -> usize {
    assert_cohort_size(cohort_size);
    marker.assert_valid(2, cohort_size);
    let half = (cohort_size / 2) as i64;
    let alpha =
        marker.offset + marker.offset.signum() * marker.cohort as i64 * half + cohort_size as i64;
    alpha as usize
}

/// Flat-index-to-marker conversion for any dimension `n ≥ 2`: a documented
/// bijection between `0..=nK` and the cross markers. The center maps to
/// `K`; cohorts 0 and 1 reproduce the two-dimensional formulas exactly;
/// cohorts `χ ≥ 2` follow after index `2K` in cohort-major, `η`-ascending
/// order.
pub fn marker_from_index(dim: usize, cohort_size: usize, alpha: usize) -> Marker {
    assert!(dim >= 2, "dimension must be at least 2, got {dim}");
    assert_cohort_size(cohort_size);
    assert!(
        alpha <= dim * cohort_size,
        "index {alpha} out of range 0..={}",
        dim * cohort_size
    );
    if alpha <= 2 * cohort_size {
        return marker_from_index_2d(cohort_size, alpha);
    }
    let half = cohort_size / 2;
    let rest = alpha - (2 * cohort_size + 1);
    let cohort = 2 + rest / cohort_size;
    let within = rest % cohort_size;
    let offset = if within < half {
        within as i64 - half as i64
    } else {
        (within - half) as i64 + 1
    };
    Marker { cohort, offset }
}

/// Inverse of [`marker_from_index`]. Panics on an invalid marker.
pub fn index_from_marker(dim: usize, cohort_size: usize, marker: Marker) -> usize {
    assert!(dim >= 2, "dimension must be at least 2, got {dim}");
    assert_cohort_size(cohort_size);
    marker.assert_valid(dim, cohort_size);
    if marker.is_center() || marker.cohort < 2 {
        return index_from_marker_2d(cohort_size, marker);
    }
    let half = cohort_size / 2;
    let within = if marker.offset < 0 {
        (marker.offset + half as i64) as usize
    } else {
        half + marker.offset as usize - 1
    };
    2 * cohort_size + 1 + (marker.cohort - 2) * cohort_size + within
}

/// The axisymmetric point system: a center plus `n` cohorts of `K` points
/// spaced `s` apart along the coordinate axes. Points are computed on
/// demand; rebuilding the cross around a new center is just a recentering.
#[derive(Clone, Debug, PartialEq)]
pub struct Cross {
    center: Point,
    cohort_size: usize,
    spacing: f64,
}

impl Cross {
    pub fn new(center: Point, cohort_size: usize, spacing: f64) -> Result<Cross, Error> {
        if center.dim() < 2 {
            return Err(Error::InvalidParameter {
                name: "center",
                message: format!("the cross needs n ≥ 2, got {}", center.dim()),
            });
        }
        if cohort_size < 2 || cohort_size % 2 != 0 {
            return Err(Error::InvalidParameter {
                name: "cohort_size",
                message: format!("K must be even and at least 2, got {cohort_size}"),
            });
        }
        if spacing <= 0.0 || !spacing.is_finite() {
            return Err(Error::InvalidParameter {
                name: "spacing",
                message: format!("s must be a positive finite number, got {spacing}"),
            });
        }
        Ok(Cross {
            center,
            cohort_size,
            spacing,
        })
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn dim(&self) -> usize {
        self.center.dim()
    }

    /// Points per cohort, `K`.
    pub fn cohort_size(&self) -> usize {
        self.cohort_size
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// `nK + 1`.
    pub fn total_points(&self) -> usize {
        self.dim() * self.cohort_size + 1
    }

    /// The point `g0 + (0, …, 0, η·s, 0, …, 0)` with the nonzero entry in
    /// position `χ`. The center comes back bit-for-bit.
    pub fn point_at_marker(&self, marker: Marker) -> Point {
        marker.assert_valid(self.dim(), self.cohort_size);
        if marker.is_center() {
            return self.center.clone();
        }
        self.center
            .offset(marker.cohort, marker.offset as f64 * self.spacing)
    }

    pub fn point_at_index(&self, alpha: usize) -> Point {
        self.point_at_marker(marker_from_index(self.dim(), self.cohort_size, alpha))
    }

    /// Markers of all points in sequential-index order.
    pub fn markers(&self) -> impl Iterator<Item = Marker> + '_ {
        (0..self.total_points()).map(|a| marker_from_index(self.dim(), self.cohort_size, a))
    }

    fn recentered(&self, center: Point) -> Cross {
        Cross {
            center,
            cohort_size: self.cohort_size,
            spacing: self.spacing,
        }
    }
}

/// Default cohort size for dimension `n`: `4·⌈n/2⌉` capped at 8.
pub fn default_cohort_size(dim: usize) -> usize {
    (4 * dim.div_ceil(2)).min(8)
}

/// Maps `f` over `0..count`, splitting the range into contiguous chunks
/// across `workers` threads and gathering chunk results in index order.
/// Output is identical for every worker count.
fn parallel_map_indexed<T, F>(count: usize, workers: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let workers = workers.max(1).min(count.max(1));
    if workers == 1 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(workers);
    let f = &f;
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let start = (w * chunk).min(count);
                let end = ((w + 1) * chunk).min(count);
                scope.spawn(move || (start..end).map(f).collect::<Vec<T>>())
            })
            .collect();
        let mut out = Vec::with_capacity(count);
        for handle in handles {
            out.extend(handle.join().expect("membership worker panicked"));
        }
        out
    })
}

/// Feasibility of every cross point against `inst`, in sequential-index
/// order. Checks run on up to `workers` threads; the result does not depend
/// on the worker count.
pub fn evaluate_membership(
    cross: &Cross,
    inst: &LpInstance,
    feas_tol: f64,
    workers: usize,
) -> Vec<bool> {
    assert_eq!(cross.dim(), inst.dim(), "dimension mismatch");
    parallel_map_indexed(cross.total_points(), workers, |alpha| {
        inst.is_feasible(&cross.point_at_index(alpha), feas_tol)
    })
}

/// What a single step did.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    /// The center was feasible and at least as good as every cohort winner.
    Stayed,
    /// The center moved to the mean of the cohort winners.
    Moved,
    /// No cross point and not even the center is feasible; the state is
    /// left untouched and the caller must reacquire the polytope.
    LostPolytope,
}

/// One completed step.
#[derive(Clone, Debug)]
pub struct StepRecord {
    /// Time index `k` the step ran at (instance time `kL`).
    pub time_index: usize,
    /// Center after the step.
    pub center: Point,
    /// `⟨c_k, center⟩` after the step.
    pub objective: f64,
    /// Number of feasible cross points, `|G′|`.
    pub feasible_points: usize,
    pub moved: bool,
}

/// A logged recovery: the polytope was lost at `at_update` and reacquired
/// by a fresh tracking run that finished at `resumed_update`.
#[derive(Clone, Debug)]
pub struct Reacquisition {
    pub at_update: usize,
    pub resumed_update: usize,
    pub center_at_loss: Point,
    pub quest: QuestResult,
}

/// The cross, the time index and the step history of a targeting run.
#[derive(Clone, Debug)]
pub struct TargetingState {
    cross: Cross,
    time_index: usize,
    last_best: Vec<Point>,
    trace: Vec<StepRecord>,
    events: Vec<Reacquisition>,
}

impl TargetingState {
    pub fn new(cross: Cross, time_index: usize) -> TargetingState {
        TargetingState {
            cross,
            time_index,
            last_best: Vec::new(),
            trace: Vec::new(),
            events: Vec::new(),
        }
    }

    pub fn cross(&self) -> &Cross {
        &self.cross
    }

    pub fn center(&self) -> &Point {
        self.cross.center()
    }

    /// Current time index `k`.
    pub fn time_index(&self) -> usize {
        self.time_index
    }

    /// Per-cohort winners `Q` of the previous step.
    pub fn last_best(&self) -> &[Point] {
        &self.last_best
    }

    pub fn trace(&self) -> &[StepRecord] {
        &self.trace
    }

    pub fn events(&self) -> &[Reacquisition] {
        &self.events
    }

    /// One step against the instance of the current time index: evaluate
    /// membership, pick the best feasible point per cohort, then keep or
    /// move the center. Completing the step appends a record and advances
    /// the time index; losing the polytope changes nothing.
    pub fn step(&mut self, inst: &LpInstance, feas_tol: f64, workers: usize) -> StepOutcome {
        let flags = evaluate_membership(&self.cross, inst, feas_tol, workers);
        let feasible_points = flags.iter().filter(|f| **f).count();
        let c = inst.objective();

        // Per-cohort argmax of ⟨c, g⟩ over the feasible points; on ties the
        // lowest sequential index wins (scan order + strict improvement).
        let mut best: Vec<Option<(f64, Point)>> = vec![None; self.cross.dim()];
        for (alpha, feasible) in flags.iter().enumerate() {
            if !feasible {
                continue;
            }
            let marker = marker_from_index(self.cross.dim(), self.cross.cohort_size(), alpha);
            if marker.is_center() {
                continue;
            }
            let g = self.cross.point_at_index(alpha);
            let value = dot(c, g.coords());
            let slot = &mut best[marker.cohort];
            if slot.as_ref().map_or(true, |(v, _)| value > *v) {
                *slot = Some((value, g));
            }
        }
        let winners: Vec<(f64, Point)> = best.into_iter().flatten().collect();
        let center_feasible = inst.is_feasible(self.cross.center(), feas_tol);

        if winners.is_empty() && !center_feasible {
            return StepOutcome::LostPolytope;
        }

        let best_value = winners
            .iter()
            .map(|(v, _)| *v)
            .fold(f64::NEG_INFINITY, f64::max);
        let stay = center_feasible
            && (winners.is_empty() || dot(c, self.cross.center().coords()) >= best_value);

        let outcome = if stay {
            StepOutcome::Stayed
        } else {
            let n = self.cross.dim();
            let mut mean = vec![0.0; n];
            for (_, q) in &winners {
                for (m, v) in mean.iter_mut().zip(q.coords()) {
                    *m += v;
                }
            }
            let count = winners.len() as f64;
            mean.iter_mut().for_each(|m| *m /= count);
            self.cross = self.cross.recentered(Point::new(mean));
            StepOutcome::Moved
        };

        self.trace.push(StepRecord {
            time_index: self.time_index,
            center: self.cross.center().clone(),
            objective: dot(c, self.cross.center().coords()),
            feasible_points,
            moved: outcome == StepOutcome::Moved,
        });
        self.last_best = winners.into_iter().map(|(_, q)| q).collect();
        self.time_index += 1;
        outcome
    }

    fn reacquire(&mut self, quest: QuestResult) {
        self.events.push(Reacquisition {
            at_update: self.time_index,
            resumed_update: quest.updates,
            center_at_loss: self.cross.center().clone(),
            quest: quest.clone(),
        });
        self.cross = self.cross.recentered(quest.point);
        self.time_index = quest.updates;
    }
}

/// Knobs of [`targeting_run`].
#[derive(Clone, Copy, Debug)]
pub struct TargetingParams {
    /// Points per cohort `K` (even, ≥ 2). See [`default_cohort_size`].
    pub cohort_size: usize,
    /// Spacing `s` between neighbor points; defaults to the acquisition
    /// epsilon when driven from the command line.
    pub spacing: f64,
    /// Number of steps to apply.
    pub steps: usize,
    pub feas_tol: f64,
    /// Worker threads for the membership sweep.
    pub workers: usize,
}

/// Consecutive recoveries allowed before a run gives up. Each recovery runs
/// at least one full update epoch, so the center keeps contracting toward
/// the polytope between attempts; a center still outside `feas_tol` on
/// several coordinates may need a few rounds before any cross arm lands
/// inside.
const MAX_CONSECUTIVE_RECOVERIES: usize = 32;

/// Builds the cross at the acquired point and runs the step loop, querying
/// the scenario at each step's time index. If the polytope is lost (every
/// cross point and the center infeasible), a fresh acquisition run resumes
/// from the current center (the scenario clock keeps running during the
/// recovery) and the loop continues. Recoveries that fail to produce a
/// completed step [`MAX_CONSECUTIVE_RECOVERIES`] times in a row give up.
///
/// `start` must be a terminated acquisition result.
pub fn targeting_run(
    scn: &Scenario,
    start: &QuestResult,
    params: &TargetingParams,
    quest_cfg: &QuestConfig,
) -> Result<TargetingState, Error> {
    assert!(
        start.terminated,
        "targeting must start from a terminated acquisition run"
    );
    let cross = Cross::new(start.point.clone(), params.cohort_size, params.spacing)?;
    let mut state = TargetingState::new(cross, start.updates);
    let mut completed = 0;
    let mut consecutive_recoveries = 0;
    while completed < params.steps {
        let t = (state.time_index * quest_cfg.update_interval) as f64;
        let inst = scn.instance_at(t);
        match state.step(&inst, params.feas_tol, params.workers) {
            StepOutcome::Stayed | StepOutcome::Moved => {
                completed += 1;
                consecutive_recoveries = 0;
            }
            StepOutcome::LostPolytope => {
                if consecutive_recoveries == MAX_CONSECUTIVE_RECOVERIES {
                    return Err(Error::ReacquisitionFailed {
                        at_update: state.time_index,
                        message: format!(
                            "no cross point became feasible after {MAX_CONSECUTIVE_RECOVERIES} recoveries"
                        ),
                    });
                }
                let z0 = Point::new(state.center().coords().iter().map(|v| v.max(0.0)).collect());
                let recovery = quest_run_from(scn, &z0, quest_cfg, state.time_index)?;
                if !recovery.terminated {
                    return Err(Error::ReacquisitionFailed {
                        at_update: recovery.updates,
                        message: "the recovery run exhausted its update budget".into(),
                    });
                }
                state.reacquire(recovery);
                consecutive_recoveries += 1;
            }
        }
    }
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quest::quest_run;
    use proptest::prelude::*;

    fn unit_box() -> LpInstance {
        LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    /// Independent enumeration oracle for the 2-D numbering: indices walk
    /// cohort 1 downward-arm outside-in, then cohort 0, the center, then the
    /// positive arms inside-out in the mirrored order.
    fn expected_2d_numbering(cohort_size: usize) -> Vec<Marker> {
        let half = (cohort_size / 2) as i64;
        let mut order = Vec::new();
        for eta in -half..0 {
            order.push(Marker {
                cohort: 1,
                offset: eta,
            });
        }
        for eta in -half..0 {
            order.push(Marker {
                cohort: 0,
                offset: eta,
            });
        }
        order.push(Marker::center());
        for eta in 1..=half {
            order.push(Marker {
                cohort: 0,
                offset: eta,
            });
        }
        for eta in 1..=half {
            order.push(Marker {
                cohort: 1,
                offset: eta,
            });
        }
        order
    }

    #[test]
    fn paper_worked_indices_for_k6() {
        assert_eq!(marker_from_index_2d(6, 6), Marker::center());
        assert_eq!(
            marker_from_index_2d(6, 0),
            Marker {
                cohort: 1,
                offset: -3
            }
        );
        assert_eq!(
            marker_from_index_2d(6, 12),
            Marker {
                cohort: 1,
                offset: 3
            }
        );
        assert_eq!(index_from_marker_2d(6, Marker::center()), 6);
        assert_eq!(
            index_from_marker_2d(
                6,
                Marker {
                    cohort: 1,
                    offset: 1
                }
            ),
            10
        );
        assert_eq!(
            index_from_marker_2d(
                6,
                Marker {
                    cohort: 0,
                    offset: -3
                }
            ),
            3
        );
    }

    #[test]
    fn formulas_match_the_enumeration_oracle() {
        for cohort_size in [2usize, 4, 6, 8] {
            let expected = expected_2d_numbering(cohort_size);
            for (alpha, want) in expected.iter().enumerate() {
                assert_eq!(
                    marker_from_index_2d(cohort_size, alpha),
                    *want,
                    "K = {cohort_size}, alpha = {alpha}"
                );
                assert_eq!(index_from_marker_2d(cohort_size, *want), alpha);
            }
        }
    }

    #[test]
    fn generalized_numbering_is_a_bijection_and_extends_the_2d_one() {
        for dim in 2..=5usize {
            for cohort_size in [2usize, 4, 6, 8] {
                let total = dim * cohort_size + 1;
                let mut seen = std::collections::HashSet::new();
                for alpha in 0..total {
                    let m = marker_from_index(dim, cohort_size, alpha);
                    assert!(seen.insert(m), "marker {m:?} repeated");
                    assert_eq!(index_from_marker(dim, cohort_size, m), alpha);
                    if dim == 2 {
                        assert_eq!(m, marker_from_index_2d(cohort_size, alpha));
                    }
                }
                assert_eq!(seen.len(), total);
            }
        }
    }

    #[test]
    fn marker_reconstruction_examples() {
        let c1 = Cross::new(Point::new(vec![0.0, 0.0]), 6, 0.5).unwrap();
        let p = c1.point_at_marker(Marker {
            cohort: 1,
            offset: -3,
        });
        assert_eq!(p.coords(), &[0.0, -1.5]);

        let c2 = Cross::new(Point::new(vec![2.0, 7.0]), 6, 1.0).unwrap();
        let p = c2.point_at_marker(Marker {
            cohort: 0,
            offset: 2,
        });
        assert_eq!(p.coords(), &[4.0, 7.0]);

        assert_eq!(c2.point_at_marker(Marker::center()), *c2.center());
    }

    #[test]
    fn cross_cardinality() {
        for dim in 2..=5usize {
            for cohort_size in [2usize, 4, 6, 8] {
                let cross = Cross::new(Point::zero(dim), cohort_size, 0.1).unwrap();
                assert_eq!(cross.total_points(), dim * cohort_size + 1);
                assert_eq!(cross.markers().count(), dim * cohort_size + 1);
            }
        }
    }

    #[test]
    fn cross_parameter_validation() {
        assert!(Cross::new(Point::new(vec![0.0]), 2, 0.1).is_err());
        assert!(Cross::new(Point::zero(2), 3, 0.1).is_err());
        assert!(Cross::new(Point::zero(2), 0, 0.1).is_err());
        assert!(Cross::new(Point::zero(2), 2, 0.0).is_err());
    }

    #[test]
    fn membership_inside_a_huge_box_is_all_true() {
        let big = LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![100.0, 100.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let cross = Cross::new(Point::new(vec![50.0, 50.0]), 6, 0.5).unwrap();
        assert!(evaluate_membership(&cross, &big, 1e-9, 1)
            .iter()
            .all(|f| *f));
    }

    #[test]
    fn membership_cuts_the_arm_beyond_the_facet() {
        // Center on the boundary of the unit box: the positive axis-0 arm
        // sticks out, everything else stays inside.
        let cross = Cross::new(Point::new(vec![1.0, 0.5]), 2, 0.3).unwrap();
        let flags = evaluate_membership(&cross, &unit_box(), 1e-9, 1);
        for (alpha, feasible) in flags.iter().enumerate() {
            let m = marker_from_index(2, 2, alpha);
            let expect = !(m.cohort == 0 && m.offset > 0);
            assert_eq!(*feasible, expect, "marker {m:?}");
        }
    }

    #[test]
    fn membership_far_away_is_all_false() {
        let cross = Cross::new(Point::new(vec![50.0, 50.0]), 4, 0.5).unwrap();
        assert!(evaluate_membership(&cross, &unit_box(), 1e-9, 1)
            .iter()
            .all(|f| !f));
    }

    #[test]
    fn step_moves_to_the_mean_of_cohort_winners() {
        // Worked example: all four K = 2 points feasible, winners (0.9, 0.5)
        // and (0.5, 0.9), mean (0.7, 0.7).
        let cross = Cross::new(Point::new(vec![0.5, 0.5]), 2, 0.4).unwrap();
        let mut state = TargetingState::new(cross, 0);
        let outcome = state.step(&unit_box(), 1e-9, 1);
        assert_eq!(outcome, StepOutcome::Moved);
        assert_eq!(state.center().coords(), &[0.7, 0.7]);
        assert_eq!(state.time_index(), 1);
        let rec = &state.trace()[0];
        assert!(rec.moved);
        assert_eq!(rec.feasible_points, 5);
        assert!((rec.objective - 1.4).abs() < 1e-15);
        let mut winners = state.last_best().to_vec();
        winners.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(winners[0].coords(), &[0.5, 0.9]);
        assert_eq!(winners[1].coords(), &[0.9, 0.5]);
    }

    #[test]
    fn step_keeps_an_already_optimal_center() {
        // The center beats both reachable winners, so it stays.
        let cross = Cross::new(Point::new(vec![0.9, 0.9]), 2, 0.2).unwrap();
        let mut state = TargetingState::new(cross, 3);
        let outcome = state.step(&unit_box(), 1e-9, 1);
        assert_eq!(outcome, StepOutcome::Stayed);
        assert_eq!(state.center().coords(), &[0.9, 0.9]);
        assert_eq!(state.time_index(), 4);
        assert!(!state.trace()[0].moved);
        assert_eq!(state.trace()[0].time_index, 3);
    }

    #[test]
    fn step_with_empty_winners_but_feasible_center_stays() {
        // Spacing so large every arm leaves the box while the center is fine.
        let cross = Cross::new(Point::new(vec![0.5, 0.5]), 2, 10.0).unwrap();
        let mut state = TargetingState::new(cross, 0);
        assert_eq!(state.step(&unit_box(), 1e-9, 1), StepOutcome::Stayed);
        assert_eq!(state.trace().len(), 1);
    }

    #[test]
    fn step_reports_a_lost_polytope_and_leaves_state_alone() {
        let cross = Cross::new(Point::new(vec![70.0, 70.0]), 2, 0.4).unwrap();
        let mut state = TargetingState::new(cross.clone(), 5);
        assert_eq!(state.step(&unit_box(), 1e-9, 1), StepOutcome::LostPolytope);
        assert_eq!(state.time_index(), 5);
        assert!(state.trace().is_empty());
        assert_eq!(state.cross(), &cross);
    }

    #[test]
    fn trace_time_indices_step_by_one() {
        let cross = Cross::new(Point::new(vec![0.2, 0.2]), 4, 0.05).unwrap();
        let mut state = TargetingState::new(cross, 0);
        let inst = unit_box();
        for _ in 0..6 {
            let _ = state.step(&inst, 1e-9, 1);
        }
        let ks: Vec<usize> = state.trace().iter().map(|r| r.time_index).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn default_cohort_sizes() {
        assert_eq!(default_cohort_size(2), 4);
        assert_eq!(default_cohort_size(3), 8);
        assert_eq!(default_cohort_size(4), 8);
        assert_eq!(default_cohort_size(5), 8);
    }

    #[test]
    fn run_with_zero_steps_only_builds_the_cross() {
        let scn = Scenario::stationary(unit_box());
        let cfg = QuestConfig::new(10, 1.5, 1e-4).unwrap();
        let start = quest_run(&scn, &Point::new(vec![0.5, 0.5]), &cfg).unwrap();
        let params = TargetingParams {
            cohort_size: 4,
            spacing: 0.05,
            steps: 0,
            feas_tol: 1e-9,
            workers: 1,
        };
        let state = targeting_run(&scn, &start, &params, &cfg).unwrap();
        assert!(state.trace().is_empty());
        assert_eq!(state.center(), &start.point);
    }

    #[test]
    fn run_climbs_a_static_box_to_the_top_corner() {
        let scn = Scenario::stationary(unit_box());
        let cfg = QuestConfig::new(10, 1.5, 1e-4).unwrap();
        let start = quest_run(&scn, &Point::new(vec![3.0, 0.5]), &cfg).unwrap();
        let params = TargetingParams {
            cohort_size: 4,
            spacing: 0.05,
            steps: 60,
            feas_tol: 1e-9,
            workers: 1,
        };
        let state = targeting_run(&scn, &start, &params, &cfg).unwrap();
        // The optimum of x + y over the box is the corner (1, 1).
        let gap = state.center().distance_to(&Point::new(vec![1.0, 1.0]));
        assert!(
            gap <= 2.0 * params.spacing,
            "still {gap} away after 60 steps"
        );
        assert!(state.events().is_empty());
    }

    #[test]
    fn run_recovers_after_the_polytope_jumps_away() {
        // The box leaps beyond the cross reach at t = 55, forcing a lost
        // signal and a recovery run against the new position.
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
        let scn = Scenario::piecewise_raw(unit_box().augment_nonnegativity(), vec![(55.0, jumped)])
            .unwrap();
        let cfg = QuestConfig::new(10, 1.5, 1e-4).unwrap();
        let start = quest_run(&scn, &Point::new(vec![2.0, 0.5]), &cfg).unwrap();
        let params = TargetingParams {
            cohort_size: 4,
            spacing: 0.05,
            steps: 40,
            feas_tol: 1e-9,
            workers: 1,
        };
        let state = targeting_run(&scn, &start, &params, &cfg).unwrap();
        // A diagonal approach can need several recovery rounds before any
        // cross arm lands inside; each round must advance the clock.
        assert!(!state.events().is_empty(), "expected at least one recovery");
        for event in state.events() {
            assert!(event.resumed_update > event.at_update);
            assert!(event.quest.terminated);
        }
        // After recovery the center tracks the new box.
        let c = state.center();
        assert!(c[0] >= 10.0 - 1e-6 && c[1] >= 10.0 - 1e-6, "center {c:?}");
    }

    proptest! {
        // The membership sweep is order-independent: every worker count
        // produces the same boolean vector.
        #[test]
        fn membership_is_worker_count_invariant(
            seed in 0u64..30,
            cohort_size in prop_oneof![Just(2usize), Just(4), Just(6), Just(8)],
            cx in -1.0f64..3.0, cy in -1.0f64..3.0,
        ) {
            let (inst, _) = crate::scenario::random_feasible_instance(2, 6, seed).unwrap();
            let cross = Cross::new(Point::new(vec![cx, cy]), cohort_size, 0.3).unwrap();
            let reference = evaluate_membership(&cross, &inst, 1e-9, 1);
            for workers in [2usize, 3, 8, 64] {
                prop_assert_eq!(&evaluate_membership(&cross, &inst, 1e-9, workers), &reference);
            }
        }

        // Scaling the objective by a positive constant never changes the
        // stay/move decision or the chosen winners.
        #[test]
        fn argmax_is_scale_invariant(
            seed in 0u64..20,
            scale in prop_oneof![Just(0.25f64), Just(3.0), Just(117.5)],
            cx in 0.0f64..3.0, cy in 0.0f64..3.0,
        ) {
            let (inst, _) = crate::scenario::random_feasible_instance(2, 6, seed).unwrap();
            let scaled = LpInstance::new(
                (0..inst.num_rows()).map(|i| inst.row(i).to_vec()).collect(),
                inst.bounds().to_vec(),
                inst.objective().iter().map(|v| v * scale).collect(),
            ).unwrap();
            let cross = Cross::new(Point::new(vec![cx, cy]), 4, 0.2).unwrap();
            let mut a = TargetingState::new(cross.clone(), 0);
            let mut b = TargetingState::new(cross, 0);
            let oa = a.step(&inst, 1e-9, 1);
            let ob = b.step(&scaled, 1e-9, 1);
            prop_assert_eq!(oa, ob);
            prop_assert_eq!(a.center().coords(), b.center().coords());
            prop_assert_eq!(a.last_best().len(), b.last_best().len());
            for (p, q) in a.last_best().iter().zip(b.last_best()) {
                prop_assert_eq!(p.coords(), q.coords());
            }
        }
    }
}
