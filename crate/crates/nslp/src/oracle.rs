//! Exact small-scale references: LP optimum by brute-force vertex
//! enumeration and exact point-to-polytope distance.
//!
//! Deliberately combinatorial and dimension-limited: correctness over
//! generality. The test suites and the termination measurements lean on
//! this module; the iterate updates of the solver never do.

use crate::instance::{dot, norm_sq, LpInstance, Point};
use crate::Error;

/// Feasibility slack used when classifying enumerated vertices.
pub const ORACLE_TOL: f64 = 1e-9;

/// Result of [`exact_lp_solve`].
///
/// When the region is empty, `feasible` is false and `optimum` is `None`.
/// When an improving recession ray exists, `bounded` is false, `value` is
/// `+∞` and `optimum` holds the best enumerated vertex as a witness.
#[derive(Clone, Debug, PartialEq)]
pub struct VertexSolution {
    pub optimum: Option<Point>,
    pub value: f64,
    /// Number of nondegenerate intersection points that were examined.
    pub vertices_checked: usize,
    pub feasible: bool,
    pub bounded: bool,
}

/// All constraint rows as owned `(a, b)` pairs, with the orthant facets
/// `−x_j ≤ 0` appended when they are not already explicit rows. Every
/// oracle computation runs over this closed list, so `x ≥ 0` is always part
/// of the region.
fn all_rows(inst: &LpInstance) -> Vec<(Vec<f64>, f64)> {
    let n = inst.dim();
    let mut rows: Vec<(Vec<f64>, f64)> = (0..inst.num_rows())
        .map(|i| (inst.row(i).to_vec(), inst.bound(i)))
        .collect();
    if !inst.nonneg_augmented() {
        for j in 0..n {
            let mut a = vec![0.0; n];
            a[j] = -1.0;
            rows.push((a, 0.0));
        }
    }
    rows
}

fn satisfies_all(rows: &[(Vec<f64>, f64)], x: &[f64], tol: f64) -> bool {
    rows.iter()
        .all(|(a, b)| dot(a, x) <= b + tol * norm_sq(a).sqrt().max(1.0))
}

/// Gaussian elimination with partial pivoting on a small square system.
/// Returns `None` for (numerically) singular systems.
#[allow(clippy::needless_range_loop)] // two rows of `mat` are touched per pass
fn solve_square(mut mat: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&a, &b| mat[a][col].abs().total_cmp(&mat[b][col].abs()))
            .unwrap();
        if mat[pivot_row][col].abs() < 1e-12 {
            return None;
        }
        mat.swap(col, pivot_row);
        rhs.swap(col, pivot_row);
        for row in col + 1..n {
            let f = mat[row][col] / mat[col][col];
            if f != 0.0 {
                for k in col..n {
                    mat[row][k] -= f * mat[col][k];
                }
                rhs[row] -= f * rhs[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let mut s = rhs[row];
        for k in row + 1..n {
            s -= mat[row][k] * x[k];
        }
        x[row] = s / mat[row][row];
    }
    Some(x)
}

fn for_each_combination(count: usize, size: usize, mut f: impl FnMut(&[usize])) {
    if size == 0 || size > count {
        return;
    }
    let mut idx: Vec<usize> = (0..size).collect();
    loop {
        f(&idx);
        // Advance to the next lexicographic combination.
        let mut i = size;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] != i + count - size {
                break;
            }
            if i == 0 {
                return;
            }
        }
        idx[i] += 1;
        for j in i + 1..size {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn enumerate_feasible_vertices(rows: &[(Vec<f64>, f64)], n: usize) -> (Vec<Point>, usize) {
    let mut vertices: Vec<Point> = Vec::new();
    let mut checked = 0usize;
    for_each_combination(rows.len(), n, |combo| {
        let mat: Vec<Vec<f64>> = combo.iter().map(|&i| rows[i].0.clone()).collect();
        let rhs: Vec<f64> = combo.iter().map(|&i| rows[i].1).collect();
        let Some(x) = solve_square(mat, rhs) else {
            return;
        };
        checked += 1;
        if !satisfies_all(rows, &x, ORACLE_TOL) {
            return;
        }
        // Degenerate vertices show up once per active subset; deduplicate.
        let p = Point::new(x);
        if !vertices.iter().any(|v| v.distance_to(&p) <= 1e-9) {
            vertices.push(p);
        }
    });
    (vertices, checked)
}

/// Feasible vertices of the region `{Ax ≤ b, x ≥ 0}`, enumerated by solving
/// every `n×n` subsystem. Supports `n ≤ 3`.
pub fn feasible_vertices(inst: &LpInstance) -> Result<Vec<Point>, Error> {
    if inst.dim() > 3 {
        return Err(Error::UnsupportedGeometry(format!(
            "vertex enumeration supports n ≤ 3, got n = {}",
            inst.dim()
        )));
    }
    Ok(enumerate_feasible_vertices(&all_rows(inst), inst.dim()).0)
}

/// Unit recession directions of the region, each having `n − 1` linearly
/// independent active constraints. The orthant rows keep the cone pointed,
/// so these directions generate it.
fn recession_rays(rows: &[(Vec<f64>, f64)], n: usize) -> Vec<Vec<f64>> {
    let mut rays: Vec<Vec<f64>> = Vec::new();
    let mut consider = |dir: Vec<f64>| {
        let len = norm_sq(&dir).sqrt();
        if len < 1e-9 {
            return;
        }
        for sign in [1.0, -1.0] {
            let r: Vec<f64> = dir.iter().map(|v| sign * v / len).collect();
            let recedes = rows
                .iter()
                .all(|(a, _)| dot(a, &r) <= 1e-9 * norm_sq(a).sqrt().max(1.0));
            if recedes
                && !rays
                    .iter()
                    .any(|q| q.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-9))
            {
                rays.push(r);
            }
        }
    };
    match n {
        2 => {
            for (a, _) in rows {
                consider(vec![-a[1], a[0]]);
            }
        }
        3 => {
            for_each_combination(rows.len(), 2, |combo| {
                let u = &rows[combo[0]].0;
                let v = &rows[combo[1]].0;
                consider(vec![
                    u[1] * v[2] - u[2] * v[1],
                    u[2] * v[0] - u[0] * v[2],
                    u[0] * v[1] - u[1] * v[0],
                ]);
            });
        }
        _ => unreachable!("dimension checked by the caller"),
    }
    rays
}

/// Solves `max{⟨c, x⟩ : Ax ≤ b, x ≥ 0}` exactly by enumerating all `n`-row
/// intersection points. Supports `n ≤ 3`; singular subsystems are skipped.
pub fn exact_lp_solve(inst: &LpInstance) -> Result<VertexSolution, Error> {
    let n = inst.dim();
    if n > 3 {
        return Err(Error::UnsupportedGeometry(format!(
            "vertex enumeration supports n ≤ 3, got n = {n}"
        )));
    }
    let rows = all_rows(inst);
    let (vertices, checked) = enumerate_feasible_vertices(&rows, n);
    if vertices.is_empty() {
        // The orthant rows keep the region pointed, so a nonempty region
        // always owns a vertex; none found means empty.
        return Ok(VertexSolution {
            optimum: None,
            value: f64::NEG_INFINITY,
            vertices_checked: checked,
            feasible: false,
            bounded: true,
        });
    }
    let c = inst.objective();
    let best = vertices
        .iter()
        .max_by(|p, q| dot(c, p.coords()).total_cmp(&dot(c, q.coords())))
        .cloned()
        .expect("nonempty");
    let best_value = dot(c, best.coords());
    let c_scale = norm_sq(c).sqrt().max(1.0);
    let unbounded = recession_rays(&rows, n)
        .iter()
        .any(|r| dot(c, r) > 1e-9 * c_scale);
    Ok(VertexSolution {
        optimum: Some(best),
        value: if unbounded { f64::INFINITY } else { best_value },
        vertices_checked: checked,
        feasible: true,
        bounded: !unbounded,
    })
}

/// True when every explicit row constrains a single coordinate, i.e. the
/// region is an axis-aligned box (intersected with the orthant).
pub fn is_axis_aligned_box(inst: &LpInstance) -> bool {
    (0..inst.num_rows()).all(|i| inst.row(i).iter().filter(|v| **v != 0.0).count() == 1)
}

/// Whether [`exact_distance`] supports this instance.
pub fn supports_exact_distance(inst: &LpInstance) -> bool {
    inst.dim() == 2 || is_axis_aligned_box(inst)
}

fn box_distance(inst: &LpInstance, x: &Point) -> Result<f64, Error> {
    let n = inst.dim();
    let mut lo = vec![
        if inst.nonneg_augmented() {
            f64::NEG_INFINITY
        } else {
            0.0
        };
        n
    ];
    let mut hi = vec![f64::INFINITY; n];
    for i in 0..inst.num_rows() {
        let row = inst.row(i);
        let j = row.iter().position(|v| *v != 0.0).expect("no zero rows");
        let v = row[j];
        let bound = inst.bound(i) / v;
        if v > 0.0 {
            hi[j] = hi[j].min(bound);
        } else {
            lo[j] = lo[j].max(bound);
        }
    }
    if lo.iter().zip(&hi).any(|(l, h)| l > h) {
        return Err(Error::EmptyRegion);
    }
    let d2: f64 = x
        .coords()
        .iter()
        .zip(lo.iter().zip(&hi))
        .map(|(&v, (&l, &h))| {
            let gap = (l - v).max(v - h).max(0.0);
            gap * gap
        })
        .sum();
    Ok(d2.sqrt())
}

fn polygon_distance(inst: &LpInstance, x: &Point) -> Result<f64, Error> {
    if inst.is_feasible(x, 0.0) {
        return Ok(0.0);
    }
    let rows = all_rows(inst);
    let (vertices, _) = enumerate_feasible_vertices(&rows, 2);
    let mut best = f64::INFINITY;
    for v in &vertices {
        best = best.min(x.distance_to(v));
    }
    // The nearest boundary point is either a vertex or lies in the relative
    // interior of an edge, i.e. it is the projection of x onto that edge's
    // line and satisfies every other constraint.
    for (a, b) in &rows {
        let t = (dot(a, x.coords()) - b) / norm_sq(a);
        let proj: Vec<f64> = x
            .coords()
            .iter()
            .zip(a)
            .map(|(xi, ai)| xi - t * ai)
            .collect();
        if satisfies_all(&rows, &proj, ORACLE_TOL) {
            best = best.min(x.distance_to(&Point::new(proj)));
        }
    }
    if best.is_infinite() {
        return Err(Error::EmptyRegion);
    }
    Ok(best)
}

/// Exact Euclidean distance from `x` to the feasible set. Supports `n = 2`
/// (polygon projection onto vertices and edges) and axis-aligned boxes in
/// any dimension (coordinate clamp); feasible points return exactly `0`.
pub fn exact_distance(inst: &LpInstance, x: &Point) -> Result<f64, Error> {
    assert_eq!(x.dim(), inst.dim(), "dimension mismatch");
    if is_axis_aligned_box(inst) {
        return box_distance(inst, x);
    }
    if inst.dim() == 2 {
        return polygon_distance(inst, x);
    }
    Err(Error::UnsupportedGeometry(format!(
        "exact distance needs n = 2 or a box, got n = {}",
        inst.dim()
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box() -> LpInstance {
        LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
        )
        .unwrap()
    }

    #[test]
    fn box_optimum_is_the_far_corner() {
        let sol = exact_lp_solve(&unit_box()).unwrap();
        assert!(sol.feasible && sol.bounded);
        assert_eq!(sol.optimum.unwrap().coords(), &[1.0, 1.0]);
        assert_eq!(sol.value, 2.0);
    }

    #[test]
    fn simplex_optimum() {
        let simplex = LpInstance::new(vec![vec![1.0, 1.0]], vec![1.0], vec![2.0, 1.0]).unwrap();
        let sol = exact_lp_solve(&simplex).unwrap();
        assert!(sol.feasible && sol.bounded);
        assert_eq!(sol.optimum.unwrap().coords(), &[1.0, 0.0]);
        assert_eq!(sol.value, 2.0);
        // Three vertices: (0,0), (1,0), (0,1).
        assert_eq!(feasible_vertices(&simplex).unwrap().len(), 3);
    }

    #[test]
    fn empty_region_is_detected() {
        // x ≤ −1 clashes with x ≥ 0.
        let empty = LpInstance::new(vec![vec![1.0, 0.0]], vec![-1.0], vec![1.0, 1.0]).unwrap();
        let sol = exact_lp_solve(&empty).unwrap();
        assert!(!sol.feasible);
        assert!(sol.optimum.is_none());
    }

    #[test]
    fn unbounded_region_is_detected() {
        // Only x ≥ 1: the objective (1, 0) grows without bound.
        let inst = LpInstance::new(vec![vec![-1.0, 0.0]], vec![-1.0], vec![1.0, 0.0]).unwrap();
        let sol = exact_lp_solve(&inst).unwrap();
        assert!(sol.feasible);
        assert!(!sol.bounded);
        assert_eq!(sol.value, f64::INFINITY);
    }

    #[test]
    fn dimension_limit_is_enforced() {
        let rows = vec![vec![1.0, 0.0, 0.0, 0.0]];
        let inst = LpInstance::new(rows, vec![1.0], vec![1.0; 4]).unwrap();
        assert!(matches!(
            exact_lp_solve(&inst),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn box_distances() {
        let b = unit_box();
        assert_eq!(
            exact_distance(&b, &Point::new(vec![2.0, 0.5])).unwrap(),
            1.0
        );
        let d = exact_distance(&b, &Point::new(vec![2.0, 2.0])).unwrap();
        assert!((d - 2.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            exact_distance(&b, &Point::new(vec![0.3, 0.9])).unwrap(),
            0.0
        );
        // Below the orthant.
        assert_eq!(
            exact_distance(&b, &Point::new(vec![0.5, -2.0])).unwrap(),
            2.0
        );
    }

    #[test]
    fn polygon_distance_agrees_with_box_path_on_a_skewed_region() {
        // Simplex x + y ≤ 1 is not a box; distance from (1,1) is to the
        // midpoint of the diagonal edge: ‖(1,1) − (0.5,0.5)‖ = √2/2.
        let simplex = LpInstance::new(vec![vec![1.0, 1.0]], vec![1.0], vec![1.0, 1.0]).unwrap();
        let d = exact_distance(&simplex, &Point::new(vec![1.0, 1.0])).unwrap();
        assert!((d - 0.5f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn distance_zero_iff_feasible() {
        let simplex = LpInstance::new(vec![vec![1.0, 1.0]], vec![1.0], vec![1.0, 1.0]).unwrap();
        for (coords, feasible) in [
            (vec![0.2, 0.3], true),
            (vec![0.5, 0.5], true),
            (vec![0.50001, 0.50001], false),
            (vec![-0.1, 0.2], false),
        ] {
            let x = Point::new(coords);
            let d = exact_distance(&simplex, &x).unwrap();
            assert_eq!(d == 0.0, feasible, "at {:?}", x);
            assert_eq!(simplex.is_feasible(&x, 0.0), feasible);
        }
    }

    #[test]
    fn empty_region_distance_errors() {
        let empty = LpInstance::new(vec![vec![1.0, 0.0]], vec![-1.0], vec![1.0, 1.0]).unwrap();
        assert!(matches!(
            exact_distance(&empty, &Point::new(vec![0.0, 0.0])),
            Err(Error::EmptyRegion)
        ));
    }

    #[test]
    fn degenerate_vertices_are_deduplicated() {
        // The corner (1,1) is cut by a redundant third row passing through it.
        let inst = LpInstance::new(
            vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]],
            vec![1.0, 1.0, 2.0],
            vec![1.0, 1.0],
        )
        .unwrap();
        let verts = feasible_vertices(&inst).unwrap();
        assert_eq!(verts.len(), 4, "{verts:?}");
    }

    #[test]
    fn solver_consistency_on_three_dimensions() {
        // Unit cube: optimum of x+y+z is the corner (1,1,1).
        let rows = vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ];
        let cube = LpInstance::new(rows, vec![1.0; 3], vec![1.0; 3]).unwrap();
        let sol = exact_lp_solve(&cube).unwrap();
        assert_eq!(sol.optimum.as_ref().unwrap().coords(), &[1.0, 1.0, 1.0]);
        assert_eq!(sol.value, 3.0);
        assert_eq!(feasible_vertices(&cube).unwrap().len(), 8);
        assert!(cube.is_feasible(sol.optimum.as_ref().unwrap(), ORACLE_TOL));
    }
}
