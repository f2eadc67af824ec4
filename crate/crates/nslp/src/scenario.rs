//! Time-indexed problem providers modeling non-stationarity.
//!
//! A [`Scenario`] answers "what does the problem look like at time `t`?".
//! The analyzed motion is *translation*: the polytope moves rigidly with
//! velocity `d`, so only `b` changes over time (`b_t = b + A·t·d`).
//! Piecewise schedules may swap whole instances, including `A` and `c`,
//! to exercise the solver beyond the translation guarantee; they carry no
//! convergence promise.
//!
//! By default scenarios append the `n` nonnegativity rows to their
//! instances, so the Fejer map attracts iterates into the same polytope
//! that the termination test measures. The `*_raw` constructors (and the
//! `auto_augment` JSON field) disable this for experiments.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::fejer;
use crate::instance::{dot, norm_sq, LpInstance, Point};
use crate::Error;

/// Which motion a scenario performs.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Static,
    Translation,
    Piecewise,
}

#[derive(Clone, Debug)]
enum Motion {
    Static,
    Translation { velocity: Vec<f64> },
    Piecewise { schedule: Vec<(f64, LpInstance)> },
}

/// A time-indexed provider `t ↦ LpInstance`. Immutable; safe to query
/// concurrently.
#[derive(Clone, Debug)]
pub struct Scenario {
    base: LpInstance,
    motion: Motion,
    update_interval_hint: Option<usize>,
}

impl Scenario {
    /// A scenario whose data never change.
    pub fn stationary(base: LpInstance) -> Scenario {
        Self::stationary_raw(augment(base))
    }

    /// Like [`stationary`](Self::stationary) but without appending
    /// nonnegativity rows.
    pub fn stationary_raw(base: LpInstance) -> Scenario {
        Scenario {
            base,
            motion: Motion::Static,
            update_interval_hint: None,
        }
    }

    /// The polytope translates rigidly by `velocity` per unit of time;
    /// `A` and `c` stay fixed and `b_t = b + A·t·velocity`.
    pub fn translating(base: LpInstance, velocity: Vec<f64>) -> Result<Scenario, Error> {
        Self::translating_raw(augment(base), velocity)
    }

    /// Like [`translating`](Self::translating) but without appending
    /// nonnegativity rows.
    pub fn translating_raw(base: LpInstance, velocity: Vec<f64>) -> Result<Scenario, Error> {
        if velocity.len() != base.dim() {
            return Err(Error::BadShape(format!(
                "\"d\" has {} entries but the instance dimension is {}",
                velocity.len(),
                base.dim()
            )));
        }
        if velocity.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadShape("\"d\" must be finite".into()));
        }
        Ok(Scenario {
            base,
            motion: Motion::Translation { velocity },
            update_interval_hint: None,
        })
    }

    /// Swaps in whole instances at the given time thresholds; before the
    /// first threshold the base applies. The general case may change `A`
    /// and `c` too, and carries no convergence guarantee.
    pub fn piecewise(
        base: LpInstance,
        schedule: Vec<(f64, LpInstance)>,
    ) -> Result<Scenario, Error> {
        let schedule = schedule
            .into_iter()
            .map(|(t, inst)| (t, augment(inst)))
            .collect();
        Self::piecewise_raw(augment(base), schedule)
    }

    /// Like [`piecewise`](Self::piecewise) but without appending
    /// nonnegativity rows anywhere.
    pub fn piecewise_raw(
        base: LpInstance,
        schedule: Vec<(f64, LpInstance)>,
    ) -> Result<Scenario, Error> {
        let mut last = 0.0;
        for (i, (t, inst)) in schedule.iter().enumerate() {
            if *t <= last || !t.is_finite() {
                return Err(Error::BadShape(format!(
                    "schedule entry {i}: thresholds must be finite, positive and strictly increasing"
                )));
            }
            if inst.dim() != base.dim() {
                return Err(Error::BadShape(format!(
                    "schedule entry {i} has dimension {} but the base has {}",
                    inst.dim(),
                    base.dim()
                )));
            }
            last = *t;
        }
        Ok(Scenario {
            base,
            motion: Motion::Piecewise { schedule },
            update_interval_hint: None,
        })
    }

    pub fn kind(&self) -> ScenarioKind {
        match self.motion {
            Motion::Static => ScenarioKind::Static,
            Motion::Translation { .. } => ScenarioKind::Translation,
            Motion::Piecewise { .. } => ScenarioKind::Piecewise,
        }
    }

    /// The instance at `t = 0`.
    pub fn base(&self) -> &LpInstance {
        &self.base
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Translation velocity; `None` unless this is a translation scenario.
    pub fn velocity(&self) -> Option<&[f64]> {
        match &self.motion {
            Motion::Translation { velocity } => Some(velocity),
            _ => None,
        }
    }

    /// Update interval suggested by the scenario file, if any.
    pub fn update_interval_hint(&self) -> Option<usize> {
        self.update_interval_hint
    }

    /// The problem data at time `t ≥ 0`. Pure: equal `t` gives identical
    /// data. Panics on negative or non-finite `t`.
    pub fn instance_at(&self, t: f64) -> LpInstance {
        assert!(
            t >= 0.0 && t.is_finite(),
            "time must be finite and nonnegative, got {t}"
        );
        match &self.motion {
            Motion::Static => self.base.clone(),
            Motion::Translation { velocity } => {
                if t == 0.0 {
                    return self.base.clone();
                }
                let shift: Vec<f64> = velocity.iter().map(|v| t * v).collect();
                let b = (0..self.base.num_rows())
                    .map(|i| self.base.bound(i) + dot(self.base.row(i), &shift))
                    .collect();
                self.base.with_bounds(b)
            }
            Motion::Piecewise { schedule } => schedule
                .iter()
                .take_while(|(threshold, _)| *threshold <= t)
                .last()
                .map(|(_, inst)| inst.clone())
                .unwrap_or_else(|| self.base.clone()),
        }
    }

    /// The Fejer map of update step `k` for a translation scenario, written
    /// in its shifted-argument form: corrections are evaluated at
    /// `x − kL·velocity` against the base data and applied to `x`. Equal to
    /// `fejer_map(instance_at(kL), lambda, x)` up to rounding.
    ///
    /// Panics unless this is a translation scenario.
    pub fn fejer_map_translated(
        &self,
        k: usize,
        update_interval: usize,
        lambda: f64,
        x: &Point,
    ) -> Point {
        let velocity = self
            .velocity()
            .expect("fejer_map_translated needs a translation scenario");
        assert!(
            lambda > 0.0 && lambda < 2.0,
            "relaxation factor must satisfy 0 < lambda < 2, got {lambda}"
        );
        let shift = (k * update_interval) as f64;
        let probe = x.translated(-shift, velocity);
        let correction = fejer::correction(&self.base, &probe);
        let scale = lambda / self.base.num_rows() as f64;
        Point::new(
            x.coords()
                .iter()
                .zip(&correction)
                .map(|(xi, ci)| xi - scale * ci)
                .collect(),
        )
    }

    fn with_hint(mut self, hint: Option<usize>) -> Scenario {
        self.update_interval_hint = hint;
        self
    }

    /// Parses the JSON scenario format: `{"kind": "static" | "translation"
    /// | "piecewise", "base": <instance>, "d": [...], "L": 10, "schedule":
    /// [{"t": 5.0, "instance": <instance>}, ...], "auto_augment": true}`.
    /// `d`, `L`, `schedule` and `auto_augment` are optional where they do
    /// not apply.
    pub fn from_json_str(text: &str) -> Result<Scenario, Error> {
        let raw: RawScenario =
            serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        raw.try_into()
    }
}

fn augment(inst: LpInstance) -> LpInstance {
    if inst.nonneg_augmented() {
        inst
    } else {
        inst.augment_nonnegativity()
    }
}

fn default_true() -> bool {
    true
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawStage {
    t: f64,
    instance: LpInstance,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    kind: String,
    base: LpInstance,
    #[serde(default)]
    d: Option<Vec<f64>>,
    #[serde(rename = "L", default)]
    update_interval: Option<usize>,
    #[serde(default)]
    schedule: Option<Vec<RawStage>>,
    #[serde(default = "default_true")]
    auto_augment: bool,
}

impl TryFrom<RawScenario> for Scenario {
    type Error = Error;

    fn try_from(raw: RawScenario) -> Result<Scenario, Error> {
        let prep = |inst: LpInstance| {
            if raw.auto_augment {
                augment(inst)
            } else {
                inst
            }
        };
        let nonzero_d = raw
            .d
            .as_deref()
            .is_some_and(|d| d.iter().any(|v| *v != 0.0));
        let base = prep(raw.base);
        let scenario = match raw.kind.as_str() {
            "static" => {
                if nonzero_d {
                    return Err(Error::Parse(
                        "field \"d\" must be absent or zero for kind \"static\"".into(),
                    ));
                }
                if raw.schedule.is_some() {
                    return Err(Error::Parse(
                        "field \"schedule\" only applies to kind \"piecewise\", not \"static\""
                            .into(),
                    ));
                }
                Scenario::stationary_raw(base)
            }
            "translation" => {
                if raw.schedule.is_some() {
                    return Err(Error::Parse(
                        "field \"schedule\" only applies to kind \"piecewise\", not \"translation\""
                            .into(),
                    ));
                }
                let d = raw.d.ok_or_else(|| {
                    Error::Parse("field \"d\" is required for kind \"translation\"".into())
                })?;
                Scenario::translating_raw(base, d)?
            }
            "piecewise" => {
                if nonzero_d {
                    return Err(Error::Parse(
                        "field \"d\" must be absent or zero for kind \"piecewise\"".into(),
                    ));
                }
                let schedule = raw
                    .schedule
                    .ok_or_else(|| {
                        Error::Parse("field \"schedule\" is required for kind \"piecewise\"".into())
                    })?
                    .into_iter()
                    .map(|stage| (stage.t, prep(stage.instance)))
                    .collect();
                Scenario::piecewise_raw(base, schedule)?
            }
            other => {
                return Err(Error::Parse(format!(
                    "field \"kind\" must be \"static\", \"translation\" or \"piecewise\", got \"{other}\""
                )))
            }
        };
        Ok(scenario.with_hint(raw.update_interval))
    }
}

/// Deterministic generator of a bounded, nonempty test instance in the
/// positive orthant together with a certified interior point. The first
/// `m − n` rows are random cuts kept strictly loose at the interior point;
/// the last `n` rows cap each coordinate so the region stays bounded. Not
/// augmented.
pub fn random_feasible_instance(
    n: usize,
    m: usize,
    seed: u64,
) -> Result<(LpInstance, Point), Error> {
    if n < 2 {
        return Err(Error::InvalidParameter {
            name: "n",
            message: format!("dimension must be at least 2, got {n}"),
        });
    }
    if m < n {
        return Err(Error::InvalidParameter {
            name: "m",
            message: format!("row count must be at least n = {n}, got {m}"),
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let interior: Vec<f64> = (0..n).map(|_| rng.random_range(1.0..3.0)).collect();
    let mut rows = Vec::with_capacity(m);
    let mut b = Vec::with_capacity(m);
    for _ in 0..m - n {
        let row = loop {
            let cand: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            if norm_sq(&cand).sqrt() >= 0.3 {
                break cand;
            }
        };
        b.push(dot(&row, &interior) + rng.random_range(0.2..1.0));
        rows.push(row);
    }
    for j in 0..n {
        let mut row = vec![0.0; n];
        row[j] = 1.0;
        b.push(interior[j] + rng.random_range(0.5..1.5));
        rows.push(row);
    }
    let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let inst = LpInstance::new(rows, b, c)?;
    Ok((inst, Point::new(interior)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fejer::fejer_map;
    use crate::oracle::feasible_vertices;
    use proptest::prelude::*;

    fn unit_box() -> LpInstance {
        LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    fn halfspace_raw() -> Scenario {
        let inst = LpInstance::new(vec![vec![1.0, 0.0]], vec![1.0], vec![1.0, 0.0]).unwrap();
        Scenario::translating_raw(inst, vec![0.1, 0.0]).unwrap()
    }

    #[test]
    fn translation_at_time_zero_is_the_base_exactly() {
        let scn = Scenario::translating(unit_box(), vec![0.25, -0.5]).unwrap();
        assert_eq!(&scn.instance_at(0.0), scn.base());
    }

    #[test]
    fn translated_box_bounds() {
        // d = (1, 0), t = 2: rows (1,0) and (−1,0) shift by ±2, the y rows
        // stay put.
        let scn = Scenario::translating(unit_box(), vec![1.0, 0.0]).unwrap();
        let inst = scn.instance_at(2.0);
        assert_eq!(inst.bounds(), &[3.0, 1.0, -2.0, 0.0]);
    }

    #[test]
    fn static_scenario_ignores_time() {
        let scn = Scenario::stationary(unit_box());
        assert_eq!(&scn.instance_at(17.5), scn.base());
    }

    #[test]
    fn piecewise_switches_at_thresholds() {
        let far = LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![9.0, 9.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let scn = Scenario::piecewise(unit_box(), vec![(5.0, far)]).unwrap();
        assert_eq!(&scn.instance_at(4.9), scn.base());
        assert_eq!(scn.instance_at(5.0).bounds()[0], 9.0);
        assert_eq!(scn.instance_at(80.0).bounds()[0], 9.0);
    }

    #[test]
    fn shifted_map_at_step_zero_is_the_plain_map() {
        let scn = halfspace_raw();
        let x = Point::new(vec![2.5, 0.3]);
        assert_eq!(
            scn.fejer_map_translated(0, 10, 1.0, &x),
            fejer_map(scn.base(), 1.0, &x)
        );
    }

    #[test]
    fn shifted_map_tracks_the_moved_boundary() {
        // k = 1, L = 10, d = (0.1, 0): the boundary is at x = 2, so the
        // point (2.5, 0) projects to (2, 0).
        let scn = halfspace_raw();
        let y = scn.fejer_map_translated(1, 10, 1.0, &Point::new(vec![2.5, 0.0]));
        assert_eq!(y.coords(), &[2.0, 0.0]);
    }

    #[test]
    fn generator_is_deterministic_and_interior_certified() {
        let (a1, p1) = random_feasible_instance(3, 9, 1234).unwrap();
        let (a2, p2) = random_feasible_instance(3, 9, 1234).unwrap();
        assert_eq!(a1, a2);
        assert_eq!(p1, p2);
        // Strict margin at the interior point.
        for i in 0..a1.num_rows() {
            assert!(dot(a1.row(i), p1.coords()) <= a1.bound(i) - 0.15);
        }
        assert!(p1.coords().iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn generator_snapshot_n2_m8_seed42() {
        // Regression pin of the generated data; recorded from the first run.
        let (inst, interior) = random_feasible_instance(2, 8, 42).unwrap();
        assert_eq!(inst.num_rows(), 8);
        assert_eq!(inst.dim(), 2);
        let mut flat: Vec<f64> = Vec::new();
        for i in 0..8 {
            flat.extend_from_slice(inst.row(i));
        }
        let expected_rows = [
            -0.42281224171763476,
            -0.7000822594193501,
            0.6077455343512534,
            0.5424975616057139,
            0.013733740680137885,
            0.8036063440975476,
            0.18595714064866797,
            0.45759697300155056,
            0.15078629320141435,
            -0.6564754181987489,
            -0.8472179918228253,
            -0.6908833314750207,
            1.0,
            0.0,
            0.0,
            1.0,
        ];
        let expected_b = [
            -2.583632077782456,
            3.4009942220254414,
            3.3289569633534084,
            2.110156473479373,
            -0.9924709499999513,
            -3.5502450344222503,
            3.5634803731753832,
            3.478956304011225,
        ];
        assert_eq!(flat.as_slice(), expected_rows.as_slice());
        assert_eq!(inst.bounds(), expected_b.as_slice());
        assert_eq!(
            inst.objective(),
            &[-0.9230917867408319, -0.4763568991827527]
        );
        assert_eq!(interior.coords(), &[2.3637923846133426, 2.900550815344968]);
    }

    #[test]
    fn translation_moves_vertices_rigidly() {
        // The feasible set at time t is the t = 0 set translated by t·d.
        let scn = Scenario::translating(unit_box(), vec![0.3, -0.1]).unwrap();
        let t = 4.0;
        let base_verts = feasible_vertices(scn.base()).unwrap();
        let moved_verts = feasible_vertices(&scn.instance_at(t)).unwrap();
        assert_eq!(base_verts.len(), moved_verts.len());
        for v in &base_verts {
            let shifted = v.translated(t, scn.velocity().unwrap());
            assert!(
                moved_verts.iter().any(|w| w.distance_to(&shifted) <= 1e-9),
                "vertex {v:?} did not shift rigidly"
            );
        }
    }

    #[test]
    fn json_round_trip_of_a_translation_scenario() {
        let text = r#"{
            "kind": "translation",
            "base": {"A": [[1.0, 0.0], [0.0, 1.0]], "b": [1.0, 1.0], "c": [1.0, 1.0]},
            "d": [0.01, 0.0],
            "L": 10
        }"#;
        let scn = Scenario::from_json_str(text).unwrap();
        assert_eq!(scn.kind(), ScenarioKind::Translation);
        assert_eq!(scn.update_interval_hint(), Some(10));
        // Auto-augmentation appended the orthant rows.
        assert_eq!(scn.base().num_rows(), 4);
        assert!(scn.base().nonneg_augmented());
    }

    #[test]
    fn json_auto_augment_can_be_disabled() {
        let text = r#"{
            "kind": "static",
            "base": {"A": [[1.0, 0.0]], "b": [1.0], "c": [1.0, 0.0]},
            "auto_augment": false
        }"#;
        let scn = Scenario::from_json_str(text).unwrap();
        assert_eq!(scn.base().num_rows(), 1);
        assert!(!scn.base().nonneg_augmented());
    }

    #[test]
    fn json_rejects_fields_of_the_wrong_kind() {
        let translation_with_schedule = r#"{
            "kind": "translation",
            "base": {"A": [[1.0, 0.0]], "b": [1.0], "c": [1.0, 0.0]},
            "d": [0.1, 0.0],
            "schedule": [{"t": 1.0, "instance": {"A": [[1.0, 0.0]], "b": [2.0], "c": [1.0, 0.0]}}]
        }"#;
        let err = Scenario::from_json_str(translation_with_schedule).unwrap_err();
        assert!(err.to_string().contains("schedule"), "got: {err}");

        let static_with_drift = r#"{
            "kind": "static",
            "base": {"A": [[1.0, 0.0]], "b": [1.0], "c": [1.0, 0.0]},
            "d": [0.1, 0.0]
        }"#;
        let err = Scenario::from_json_str(static_with_drift).unwrap_err();
        assert!(err.to_string().contains("\"d\""), "got: {err}");
    }

    #[test]
    fn json_errors_name_the_offending_field() {
        let missing_d =
            r#"{"kind": "translation", "base": {"A": [[1.0, 0.0]], "b": [1.0], "c": [1.0, 0.0]}}"#;
        let err = Scenario::from_json_str(missing_d).unwrap_err();
        assert!(err.to_string().contains("\"d\""), "got: {err}");

        let bad_kind =
            r#"{"kind": "wobble", "base": {"A": [[1.0, 0.0]], "b": [1.0], "c": [1.0, 0.0]}}"#;
        let err = Scenario::from_json_str(bad_kind).unwrap_err();
        assert!(err.to_string().contains("kind"), "got: {err}");
    }

    proptest! {
        // The shifted-argument form agrees with applying the plain map to
        // the shifted point, and with the b_t form, up to rounding.
        #[test]
        fn shifted_form_identities(
            x0 in -4.0f64..4.0, x1 in -4.0f64..4.0,
            k in 0usize..5, l in 1usize..12,
        ) {
            let scn = Scenario::translating(unit_box(), vec![0.05, -0.02]).unwrap();
            let d = scn.velocity().unwrap().to_vec();
            let x = Point::new(vec![x0, x1]);
            let shift = (k * l) as f64;

            let via_shift = scn.fejer_map_translated(k, l, 1.5, &x);
            let moved_back = fejer_map(scn.base(), 1.5, &x.translated(-shift, &d))
                .translated(shift, &d);
            for j in 0..2 {
                prop_assert!((via_shift[j] - moved_back[j]).abs() < 1e-12);
            }

            let via_bounds = fejer_map(&scn.instance_at(shift), 1.5, &x);
            for j in 0..2 {
                prop_assert!((via_shift[j] - via_bounds[j]).abs() < 1e-9);
            }
        }

        // instance_at is pure.
        #[test]
        fn instance_at_is_pure(t in 0.0f64..50.0) {
            let scn = Scenario::translating(unit_box(), vec![0.3, 0.7]).unwrap();
            prop_assert_eq!(scn.instance_at(t), scn.instance_at(t));
        }
    }
}
