//! Solver for *non-stationary* linear programs: problems
//! `max{⟨c_t, x⟩ : A_t x ≤ b_t, x ≥ 0}` whose data drift while the solver
//! runs.
//!
//! The solver works in two phases:
//!
//! * **Quest** chases the moving feasible polytope with a Fejer process:
//!   every application of the [`fejer::fejer_map`] pulls the iterate toward
//!   the polytope, and the constraint data are refreshed every `L`
//!   iterations. The phase ends once the iterate is within `ε` of the
//!   current polytope.
//! * **Targeting** then surrounds the acquired point with an axisymmetric
//!   cross of probe points and lets the cross climb the objective while the
//!   polytope keeps moving, so the optimum stays near the cross center.
//!
//! Small exact references (vertex-enumeration LP solve, point-to-polygon
//! distance) live in [`oracle`] and back the test suites; the solver itself
//! never relies on them to move.
//!
//! ```
//! use nslp::{LpInstance, Point};
//! use nslp::fejer::{pseudo_projection, FejerParams};
//!
//! // The unit box {0 ≤ x ≤ 1, 0 ≤ y ≤ 1} with objective x + y.
//! let box2d = LpInstance::new(
//!     vec![vec![1.0, 0.0], vec![0.0, 1.0]],
//!     vec![1.0, 1.0],
//!     vec![1.0, 1.0],
//! )
//! .unwrap()
//! .augment_nonnegativity();
//!
//! let far = Point::new(vec![2.0, 0.5]);
//! let proj = pseudo_projection(&box2d, &FejerParams::default(), &far).unwrap();
//! assert!(proj.converged);
//! assert!((proj.point[0] - 1.0).abs() < 1e-6);
//! assert!((proj.point[1] - 0.5).abs() < 1e-6);
//! ```

mod instance;

pub mod fejer;
pub mod oracle;
pub mod quest;
pub mod scenario;
pub mod targeting;

pub use instance::{LpInstance, Point, Tolerances};

/// Errors reported by constructors, parsers and the fallible solver entry
/// points. Contract violations at call sites (index or dimension misuse)
/// panic instead.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Instance or scenario data with inconsistent shape.
    #[error("bad shape: {0}")]
    BadShape(String),
    /// A constraint row with zero norm; the Fejer map cannot scale it.
    #[error("row {row} of \"A\" has zero norm")]
    ZeroRow { row: usize },
    /// A named parameter outside its admissible range.
    #[error("invalid parameter {name}: {message}")]
    InvalidParameter { name: &'static str, message: String },
    /// JSON input that does not match the documented format.
    #[error("parse error: {0}")]
    Parse(String),
    /// The iteration produced a non-finite coordinate.
    #[error("numerical error: iterate left the finite range")]
    NonFinite,
    /// The exact reference does not support this geometry.
    #[error("oracle does not support this geometry: {0}")]
    UnsupportedGeometry(String),
    /// The feasible region is empty.
    #[error("feasible region is empty")]
    EmptyRegion,
    /// A tracking recovery attempt did not reacquire the polytope.
    #[error("reacquisition failed at update {at_update}: {message}")]
    ReacquisitionFailed { at_update: usize, message: String },
}

#[cfg(doctest)]
mod book {
    //! Keeps the guide's code snippets compiling; each chapter of
    //! `book/src` is pulled in as a doctest module.

    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }

    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(problems, "../../../book/src/problems.md");
    chapter!(fejer, "../../../book/src/fejer.md");
    chapter!(scenarios, "../../../book/src/scenarios.md");
    chapter!(quest, "../../../book/src/quest.md");
    chapter!(targeting, "../../../book/src/targeting.md");
    chapter!(oracle, "../../../book/src/oracle.md");
}
