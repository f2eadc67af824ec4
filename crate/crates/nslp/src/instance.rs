//! Problem representation: dense LP instances, points, residuals and
//! feasibility checks shared by every other module.

use serde::{Deserialize, Serialize};

use crate::Error;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm_sq(a: &[f64]) -> f64 {
    dot(a, a)
}

/// A point of `ℝⁿ`. Thin wrapper over a coordinate vector so that the
/// dimension travels with the value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point(Vec<f64>);

impl Point {
    pub fn new(coords: Vec<f64>) -> Self {
        Point(coords)
    }

    /// Origin of `ℝⁿ`.
    pub fn zero(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        norm_sq(&self.0).sqrt()
    }

    /// Euclidean distance to `other`.
    pub fn distance_to(&self, other: &Point) -> f64 {
        assert_eq!(self.dim(), other.dim(), "dimension mismatch");
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// `self + t·d`, leaving `self` untouched.
    pub fn translated(&self, t: f64, d: &[f64]) -> Point {
        assert_eq!(self.dim(), d.len(), "dimension mismatch");
        Point(self.0.iter().zip(d).map(|(x, v)| x + t * v).collect())
    }

    /// Copy of `self` with `delta` added to coordinate `axis`.
    pub fn offset(&self, axis: usize, delta: f64) -> Point {
        assert!(axis < self.dim(), "axis {} out of range", axis);
        let mut coords = self.0.clone();
        coords[axis] += delta;
        Point(coords)
    }

    pub fn is_nonneg(&self) -> bool {
        self.0.iter().all(|&x| x >= 0.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|x| x.is_finite())
    }
}

impl std::ops::Index<usize> for Point {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl From<Vec<f64>> for Point {
    fn from(coords: Vec<f64>) -> Self {
        Point(coords)
    }
}

/// Tolerance bundle threaded through the solver phases.
///
/// `feas_tol` loosens constraint satisfaction checks, `conv_tol` detects
/// fixed points of the iteration, and `epsilon` is the distance threshold
/// that ends the tracking phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    pub feas_tol: f64,
    pub conv_tol: f64,
    pub epsilon: f64,
}

impl Tolerances {
    pub fn new(feas_tol: f64, conv_tol: f64, epsilon: f64) -> Result<Self, Error> {
        for (name, v) in [
            ("feas_tol", feas_tol),
            ("conv_tol", conv_tol),
            ("epsilon", epsilon),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    message: format!("must be a positive finite number, got {v}"),
                });
            }
        }
        if conv_tol > epsilon {
            return Err(Error::InvalidParameter {
                name: "conv_tol",
                message: format!("must not exceed epsilon ({conv_tol} > {epsilon})"),
            });
        }
        Ok(Tolerances {
            feas_tol,
            conv_tol,
            epsilon,
        })
    }
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            feas_tol: 1e-9,
            conv_tol: 1e-10,
            epsilon: 1e-4,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInstance {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    c: Vec<f64>,
    #[serde(default)]
    nonneg_augmented: bool,
}

/// One frozen snapshot of the problem `max{⟨c,x⟩ : Ax ≤ b, x ≥ 0}`.
///
/// `A` is dense row-major, `m × n`. The `n` nonnegativity constraints may
/// be appended as explicit rows `−x_j ≤ 0` (see
/// [`augment_nonnegativity`](Self::augment_nonnegativity)); the
/// `nonneg_augmented` flag records whether that happened, and
/// [`is_feasible`](Self::is_feasible) enforces `x ≥ 0` through whichever
/// path applies.
#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(try_from = "RawInstance")]
pub struct LpInstance {
    // Flat row-major storage of A.
    entries: Vec<f64>,
    num_rows: usize,
    num_cols: usize,
    b: Vec<f64>,
    c: Vec<f64>,
    row_norm_sq: Vec<f64>,
    nonneg_augmented: bool,
}

impl LpInstance {
    /// Builds an instance from the rows of `A`, the bound vector `b` and the
    /// objective `c`. Requires `m ≥ 1`, `n ≥ 2`, consistent lengths and no
    /// zero rows.
    pub fn new(rows: Vec<Vec<f64>>, b: Vec<f64>, c: Vec<f64>) -> Result<Self, Error> {
        Self::build(rows, b, c, false)
    }

    fn build(
        rows: Vec<Vec<f64>>,
        b: Vec<f64>,
        c: Vec<f64>,
        nonneg_augmented: bool,
    ) -> Result<Self, Error> {
        let num_rows = rows.len();
        let num_cols = c.len();
        if num_rows < 1 {
            return Err(Error::BadShape("\"A\" must have at least one row".into()));
        }
        if num_cols < 2 {
            return Err(Error::BadShape(format!(
                "\"c\" must have at least two entries, got {num_cols}"
            )));
        }
        if b.len() != num_rows {
            return Err(Error::BadShape(format!(
                "\"b\" has {} entries but \"A\" has {} rows",
                b.len(),
                num_rows
            )));
        }
        let mut entries = Vec::with_capacity(num_rows * num_cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != num_cols {
                return Err(Error::BadShape(format!(
                    "row {i} of \"A\" has {} entries, expected {num_cols}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
        if let Some(bad) = entries.iter().find(|v| !v.is_finite()) {
            return Err(Error::BadShape(format!(
                "\"A\" contains a non-finite entry {bad}"
            )));
        }
        if b.iter().any(|v| !v.is_finite()) || c.iter().any(|v| !v.is_finite()) {
            return Err(Error::BadShape("\"b\" and \"c\" must be finite".into()));
        }
        let row_norm_sq: Vec<f64> = (0..num_rows)
            .map(|i| norm_sq(&entries[i * num_cols..(i + 1) * num_cols]))
            .collect();
        if let Some(i) = row_norm_sq.iter().position(|&s| s <= 0.0) {
            return Err(Error::ZeroRow { row: i });
        }
        let inst = LpInstance {
            entries,
            num_rows,
            num_cols,
            b,
            c,
            row_norm_sq,
            nonneg_augmented,
        };
        if nonneg_augmented {
            inst.check_augmented_pattern()?;
        }
        Ok(inst)
    }

    fn check_augmented_pattern(&self) -> Result<(), Error> {
        let n = self.num_cols;
        if self.num_rows <= n {
            return Err(Error::BadShape(
                "nonneg_augmented requires the last n rows to hold the negated identity".into(),
            ));
        }
        let first = self.num_rows - n;
        for j in 0..n {
            let row = self.row(first + j);
            let ok = row
                .iter()
                .enumerate()
                .all(|(col, &v)| if col == j { v == -1.0 } else { v == 0.0 });
            if !ok || self.b[first + j] != 0.0 {
                return Err(Error::BadShape(format!(
                    "nonneg_augmented is set but row {} is not −x_{} ≤ 0",
                    first + j,
                    j
                )));
            }
        }
        Ok(())
    }

    /// Number of constraint rows `m`.
    pub fn num_rows(&self) -> usize {
        self.num_rows
    }

    /// Space dimension `n`.
    pub fn dim(&self) -> usize {
        self.num_cols
    }

    /// The `i`-th row of `A`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.num_cols..(i + 1) * self.num_cols]
    }

    /// Right-hand side entry `b_i`.
    pub fn bound(&self, i: usize) -> f64 {
        self.b[i]
    }

    pub fn bounds(&self) -> &[f64] {
        &self.b
    }

    /// Objective coefficients `c`.
    pub fn objective(&self) -> &[f64] {
        &self.c
    }

    /// `⟨c, x⟩`.
    pub fn objective_value(&self, x: &Point) -> f64 {
        assert_eq!(x.dim(), self.num_cols, "dimension mismatch");
        dot(&self.c, x.coords())
    }

    /// Cached `‖a_i‖²`.
    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row_norm_sq[i]
    }

    /// Whether the `x ≥ 0` constraints are present as explicit rows.
    pub fn nonneg_augmented(&self) -> bool {
        self.nonneg_augmented
    }

    /// Constraint violation of row `i` at `x`: `max{⟨a_i, x⟩ − b_i, 0}`.
    /// Exactly `0` whenever the row is satisfied.
    ///
    /// Panics if `i ≥ m` or the dimensions disagree.
    pub fn residual(&self, i: usize, x: &Point) -> f64 {
        assert!(i < self.num_rows, "row index {} out of range", i);
        assert_eq!(x.dim(), self.num_cols, "dimension mismatch");
        (dot(self.row(i), x.coords()) - self.b[i]).max(0.0)
    }

    /// True iff `⟨a_i, x⟩ ≤ b_i + feas_tol` for every row and, when the
    /// nonnegativity rows are not explicit, `x_j ≥ −feas_tol` for every
    /// coordinate. One of the two paths always enforces `x ≥ 0`.
    pub fn is_feasible(&self, x: &Point, feas_tol: f64) -> bool {
        assert_eq!(x.dim(), self.num_cols, "dimension mismatch");
        let rows_ok =
            (0..self.num_rows).all(|i| dot(self.row(i), x.coords()) <= self.b[i] + feas_tol);
        if !rows_ok {
            return false;
        }
        self.nonneg_augmented || x.coords().iter().all(|&v| v >= -feas_tol)
    }

    /// Largest row violation scaled to a distance: `max_i residual_i / ‖a_i‖`
    /// (including the orthant when `x ≥ 0` is not explicit). A lower bound on
    /// the Euclidean distance to the feasible set.
    pub fn max_scaled_residual(&self, x: &Point) -> f64 {
        assert_eq!(x.dim(), self.num_cols, "dimension mismatch");
        let mut worst = (0..self.num_rows)
            .map(|i| self.residual(i, x) / self.row_norm_sq[i].sqrt())
            .fold(0.0, f64::max);
        if !self.nonneg_augmented {
            worst = x.coords().iter().fold(worst, |w, &v| w.max(-v).max(0.0));
        }
        worst
    }

    /// Returns a copy with the `n` rows `−x_j ≤ 0` appended and the
    /// `nonneg_augmented` flag set. The objective is unchanged.
    ///
    /// Panics if the instance is already augmented.
    pub fn augment_nonnegativity(&self) -> LpInstance {
        assert!(
            !self.nonneg_augmented,
            "instance already carries explicit nonnegativity rows"
        );
        let n = self.num_cols;
        let mut entries = self.entries.clone();
        let mut b = self.b.clone();
        let mut row_norm_sq = self.row_norm_sq.clone();
        for j in 0..n {
            let mut row = vec![0.0; n];
            row[j] = -1.0;
            entries.extend_from_slice(&row);
            b.push(0.0);
            row_norm_sq.push(1.0);
        }
        LpInstance {
            entries,
            num_rows: self.num_rows + n,
            num_cols: n,
            b,
            c: self.c.clone(),
            row_norm_sq,
            nonneg_augmented: true,
        }
    }

    /// Copy of this instance with `b` replaced. Used by the time-indexed
    /// scenario providers; the replacement must have length `m`.
    pub(crate) fn with_bounds(&self, b: Vec<f64>) -> LpInstance {
        assert_eq!(b.len(), self.num_rows, "dimension mismatch");
        let mut inst = self.clone();
        inst.b = b;
        inst
    }

    /// Parses the JSON text format: `{"A": [[...], ...], "b": [...],
    /// "c": [...], "nonneg_augmented": false}` with `nonneg_augmented`
    /// optional.
    pub fn from_json_str(text: &str) -> Result<Self, Error> {
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Serializes to the JSON text format.
    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serialization cannot fail")
    }
}

impl TryFrom<RawInstance> for LpInstance {
    type Error = Error;
    fn try_from(raw: RawInstance) -> Result<Self, Error> {
        LpInstance::build(raw.a, raw.b, raw.c, raw.nonneg_augmented)
    }
}

impl Serialize for LpInstance {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut st = serializer.serialize_struct("LpInstance", 4)?;
        let rows: Vec<&[f64]> = (0..self.num_rows).map(|i| self.row(i)).collect();
        st.serialize_field("A", &rows)?;
        st.serialize_field("b", &self.b)?;
        st.serialize_field("c", &self.c)?;
        st.serialize_field("nonneg_augmented", &self.nonneg_augmented)?;
        st.end()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Unit box `{x ≤ 1, y ≤ 1}` without explicit nonnegativity rows.
    pub(crate) fn unit_box_2d() -> LpInstance {
        LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn residual_satisfied_row_is_exactly_zero() {
        let inst = LpInstance::new(vec![vec![1.0, 0.0]], vec![1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(inst.residual(0, &Point::new(vec![0.5, 7.0])), 0.0);
    }

    #[test]
    fn residual_violated_row() {
        let inst = LpInstance::new(vec![vec![1.0, 0.0]], vec![1.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(inst.residual(0, &Point::new(vec![2.0, 0.0])), 1.0);
    }

    #[test]
    fn residual_zero_bound() {
        // ⟨(3,4), (3,4)⟩ = 25, b = 0.
        let inst = LpInstance::new(vec![vec![3.0, 4.0]], vec![0.0], vec![1.0, 0.0]).unwrap();
        assert_eq!(inst.residual(0, &Point::new(vec![3.0, 4.0])), 25.0);
    }

    #[test]
    fn feasibility_of_unit_box() {
        let inst = unit_box_2d();
        assert!(inst.is_feasible(&Point::new(vec![0.5, 0.5]), 1e-9));
        assert!(inst.is_feasible(&Point::new(vec![1.0 + 1e-12, 0.5]), 1e-9));
        assert!(!inst.is_feasible(&Point::new(vec![2.0, 0.5]), 1e-9));
        // x ≥ 0 is enforced even without explicit rows.
        assert!(!inst.is_feasible(&Point::new(vec![-0.5, 0.5]), 1e-9));
    }

    #[test]
    fn augmentation_appends_negated_identity() {
        let inst = LpInstance::new(vec![vec![1.0, 1.0]], vec![1.0], vec![1.0, 0.0]).unwrap();
        let aug = inst.augment_nonnegativity();
        assert_eq!(aug.num_rows(), 3);
        assert_eq!(aug.row(1), &[-1.0, 0.0]);
        assert_eq!(aug.row(2), &[0.0, -1.0]);
        assert_eq!(aug.bounds(), &[1.0, 0.0, 0.0]);
        assert!(aug.nonneg_augmented());
        assert_eq!(aug.objective(), inst.objective());
    }

    #[test]
    fn augmentation_row_count() {
        let rows = vec![vec![1.0, 0.0, 0.0]; 4];
        let inst = LpInstance::new(rows, vec![1.0; 4], vec![1.0, 1.0, 1.0]).unwrap();
        assert_eq!(inst.augment_nonnegativity().num_rows(), 7);
    }

    #[test]
    #[should_panic(expected = "already carries")]
    fn double_augmentation_panics() {
        let inst = unit_box_2d().augment_nonnegativity();
        let _ = inst.augment_nonnegativity();
    }

    #[test]
    fn zero_row_rejected() {
        let err = LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 0.0]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap_err();
        assert!(matches!(err, Error::ZeroRow { row: 1 }));
    }

    #[test]
    fn json_round_trip_and_field_names() {
        let inst = unit_box_2d();
        let text = inst.to_json_string();
        assert!(text.contains("\"A\""));
        assert!(text.contains("\"nonneg_augmented\""));
        let back = LpInstance::from_json_str(&text).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn json_unknown_field_is_an_error() {
        let err = LpInstance::from_json_str(
            r#"{"A": [[1.0, 0.0]], "b": [1.0], "c": [1.0, 0.0], "bogus": 3}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("bogus"), "got: {err}");
    }

    #[test]
    fn json_missing_field_names_the_field() {
        let err = LpInstance::from_json_str(r#"{"A": [[1.0, 0.0]], "c": [1.0, 0.0]}"#).unwrap_err();
        assert!(err.to_string().contains('b'), "got: {err}");
    }

    #[test]
    fn json_augmented_pattern_is_checked() {
        let err = LpInstance::from_json_str(
            r#"{"A": [[1.0, 0.0], [0.0, 1.0]], "b": [1.0, 1.0], "c": [1.0, 1.0], "nonneg_augmented": true}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("nonneg_augmented"), "got: {err}");
    }

    #[test]
    fn tolerances_validation() {
        assert!(Tolerances::new(1e-9, 1e-10, 1e-4).is_ok());
        assert!(Tolerances::new(0.0, 1e-10, 1e-4).is_err());
        assert!(Tolerances::new(1e-9, 1e-3, 1e-4).is_err());
    }

    proptest! {
        // Augmenting the nonnegativity rows never changes the feasibility verdict.
        #[test]
        fn augmentation_preserves_feasibility(
            coords in proptest::collection::vec(-3.0f64..3.0, 2),
            tol in prop_oneof![Just(0.0f64), Just(1e-9), Just(1e-3)],
        ) {
            let inst = unit_box_2d();
            let aug = inst.augment_nonnegativity();
            let x = Point::new(coords);
            prop_assert_eq!(inst.is_feasible(&x, tol), aug.is_feasible(&x, tol));
        }

        // The residual vanishes exactly on the closed halfspace of its row.
        #[test]
        fn residual_zero_inside_halfspace(x in -5.0f64..0.99, y in -5.0f64..5.0) {
            let inst = LpInstance::new(vec![vec![1.0, 0.0]], vec![1.0], vec![1.0, 0.0]).unwrap();
            prop_assert_eq!(inst.residual(0, &Point::new(vec![x, y])), 0.0);
        }
    }
}
