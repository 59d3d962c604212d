//! Pure linear feasibility over equality constraints with optional
//! non-negativity bounds, via phase-1 simplex with Bland's rule, plus a
//! minimum-norm refinement used to pick deterministic convex-combination
//! witnesses.

use nalgebra::{DMatrix, DVector};

use super::GeometryError;

/// Engine tolerance: a phase-1 optimum at or below this counts as feasible,
/// and pivots smaller than this are treated as zero.
pub const FEASIBILITY_TOL: f64 = 1e-9;

const PIVOT_TOL: f64 = 1e-11;
const MAX_SIMPLEX_ITERS: usize = 50_000;

/// `sum(coeffs[k].1 * x[coeffs[k].0]) = rhs`
#[derive(Debug, Clone)]
pub struct LinearEquality {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

/// A feasibility instance: equalities over `num_vars` variables, each
/// variable either bounded below by zero or free.
#[derive(Debug, Clone)]
pub struct FeasibilityProblem {
    pub num_vars: usize,
    pub nonneg: Vec<bool>,
    pub equalities: Vec<LinearEquality>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    Feasible(Vec<f64>),
    Infeasible,
}

/// Decide feasibility and return a satisfying assignment when one exists.
/// Deterministic for fixed input: Bland's rule everywhere.
pub fn solve_linear_feasibility(
    problem: &FeasibilityProblem,
) -> Result<Feasibility, GeometryError> {
    solve_with_tolerance(problem, FEASIBILITY_TOL)
}

/// Same engine with a caller-chosen acceptance threshold on the residual
/// L1 norm (never below the engine tolerance).
pub(crate) fn solve_with_tolerance(
    problem: &FeasibilityProblem,
    accept: f64,
) -> Result<Feasibility, GeometryError> {
    if problem.nonneg.len() != problem.num_vars {
        return Err(GeometryError::IllPosed(
            "nonneg flags must cover every variable".into(),
        ));
    }
    for eq in &problem.equalities {
        if !eq.rhs.is_finite() {
            return Err(GeometryError::IllPosed("non-finite right-hand side".into()));
        }
        for &(var, coeff) in &eq.coeffs {
            if var >= problem.num_vars {
                return Err(GeometryError::IllPosed(format!(
                    "variable index {var} out of range"
                )));
            }
            if !coeff.is_finite() {
                return Err(GeometryError::IllPosed("non-finite coefficient".into()));
            }
        }
    }

    // Split free variables into positive and negative parts so every
    // simplex variable is non-negative.
    let mut col_of_var = Vec::with_capacity(problem.num_vars);
    let mut ncols = 0usize;
    for &nn in &problem.nonneg {
        col_of_var.push(ncols);
        ncols += if nn { 1 } else { 2 };
    }

    let m = problem.equalities.len();
    if m == 0 {
        return Ok(Feasibility::Feasible(vec![0.0; problem.num_vars]));
    }

    // dense rows over split columns
    let mut rows = vec![vec![0.0; ncols]; m];
    let mut rhs = vec![0.0; m];
    for (i, eq) in problem.equalities.iter().enumerate() {
        rhs[i] = eq.rhs;
        for &(var, coeff) in &eq.coeffs {
            let c = col_of_var[var];
            rows[i][c] += coeff;
            if !problem.nonneg[var] {
                rows[i][c + 1] -= coeff;
            }
        }
    }
    for i in 0..m {
        if rhs[i] < 0.0 {
            rhs[i] = -rhs[i];
            for v in rows[i].iter_mut() {
                *v = -*v;
            }
        }
    }

    match phase_one(&rows, &rhs, ncols, accept.max(FEASIBILITY_TOL))? {
        Some(split) => {
            let mut x = vec![0.0; problem.num_vars];
            for (var, &c) in col_of_var.iter().enumerate() {
                x[var] = if problem.nonneg[var] {
                    split[c]
                } else {
                    split[c] - split[c + 1]
                };
            }
            Ok(Feasibility::Feasible(x))
        }
        None => Ok(Feasibility::Infeasible),
    }
}

/// Phase-1 simplex: minimize the total L1 infeasibility of
/// `rows * x = rhs`, `x >= 0` via paired artificial variables (one per
/// residual sign), so borderline points just outside a hull face are
/// judged by their true distance. Returns the assignment over the
/// original columns when the optimum is within tolerance.
fn phase_one(
    rows: &[Vec<f64>],
    rhs: &[f64],
    ncols: usize,
    accept: f64,
) -> Result<Option<Vec<f64>>, GeometryError> {
    let m = rows.len();
    // per row: a positive artificial (basic at start) and a negative one
    let total = ncols + 2 * m;
    let mut t = vec![vec![0.0; total + 1]; m];
    for i in 0..m {
        t[i][..ncols].copy_from_slice(&rows[i]);
        t[i][ncols + i] = 1.0;
        t[i][ncols + m + i] = -1.0;
        t[i][total] = rhs[i];
    }
    let mut basis: Vec<usize> = (ncols..ncols + m).collect();

    // reduced costs for the phase-1 objective (all artificials cost 1)
    let mut cost = vec![0.0; total + 1];
    for j in 0..ncols {
        cost[j] = -t.iter().map(|row| row[j]).sum::<f64>();
    }
    for i in 0..m {
        cost[ncols + m + i] = 2.0;
    }
    cost[total] = -rhs.iter().sum::<f64>();

    for _ in 0..MAX_SIMPLEX_ITERS {
        // Bland: smallest improving column
        let Some(enter) = (0..total).find(|&j| cost[j] < -PIVOT_TOL) else {
            let objective = -cost[total];
            if objective > accept {
                return Ok(None);
            }
            let mut x = vec![0.0; ncols];
            for (i, &b) in basis.iter().enumerate() {
                if b < ncols {
                    x[b] = t[i][total].max(0.0);
                }
            }
            return Ok(Some(x));
        };

        // ratio test, ties broken by smallest basis variable (Bland)
        let mut leave: Option<usize> = None;
        let mut best = f64::INFINITY;
        for i in 0..m {
            let a = t[i][enter];
            if a > PIVOT_TOL {
                let ratio = t[i][total] / a;
                let better = ratio < best - 1e-15
                    || ((ratio - best).abs() <= 1e-15
                        && leave.is_some_and(|l| basis[i] < basis[l]));
                if leave.is_none() || better {
                    best = ratio;
                    leave = Some(i);
                }
            }
        }
        let Some(leave) = leave else {
            // phase-1 objective is bounded below by zero, so an unbounded
            // ray means the instance is numerically ill-posed
            return Err(GeometryError::IllPosed(
                "unbounded pivot column in feasibility search".into(),
            ));
        };

        let pivot = t[leave][enter];
        for v in t[leave].iter_mut() {
            *v /= pivot;
        }
        let pivot_row = t[leave].clone();
        for (i, row) in t.iter_mut().enumerate() {
            if i == leave {
                continue;
            }
            let factor = row[enter];
            if factor != 0.0 {
                for (cell, &p) in row.iter_mut().zip(&pivot_row) {
                    *cell -= factor * p;
                }
            }
        }
        let factor = cost[enter];
        if factor != 0.0 {
            for (cell, &p) in cost.iter_mut().zip(&pivot_row) {
                *cell -= factor * p;
            }
        }
        basis[leave] = enter;
    }
    Err(GeometryError::IllPosed(
        "feasibility search exceeded the iteration limit".into(),
    ))
}

/// Coordinates whose centered spread (points and target alike) stays at
/// or below this are numerically collapsed: their equations are vacuous
/// at the engine tolerance and are dropped before solving, which keeps
/// the subsolves well-scaled.
const DEGENERATE_ROW_TOL: f64 = 1e-9;

/// Coordinate equations that actually constrain the weights, on the
/// normalized scale, plus the kept coordinate indices.
fn live_coordinates(centered: &[Vec<f64>], target: &[f64]) -> Vec<usize> {
    (0..target.len())
        .filter(|&c| {
            let spread = centered
                .iter()
                .map(|p| p[c].abs())
                .fold(target[c].abs(), f64::max);
            spread > DEGENERATE_ROW_TOL
        })
        .collect()
}

fn equation_matrix(
    centered: &[Vec<f64>],
    target: &[f64],
    live: &[usize],
) -> (DMatrix<f64>, DVector<f64>) {
    let k = centered.len();
    let rows = live.len() + 1;
    let e = DMatrix::from_fn(rows, k, |r, c| {
        if r < live.len() {
            centered[c][live[r]]
        } else {
            1.0
        }
    });
    let mut d = DVector::zeros(rows);
    for (r, &coord) in live.iter().enumerate() {
        d[r] = target[coord];
    }
    d[live.len()] = 1.0;
    (e, d)
}

/// Minimum-Euclidean-norm convex weights reproducing `target` from
/// `points`, or `None` when no convex combination exists at tolerance
/// `tol`. Coordinates are centered and scaled internally, so `tol` is
/// relative to the spread of the input cloud; the weights themselves are
/// invariant under that normalization. Weight sums are renormalized to
/// exactly one. Falls back to the deterministic simplex witness when the
/// polish step degrades numerically.
pub fn min_norm_convex_weights(points: &[&[f64]], target: &[f64], tol: f64) -> Option<Vec<f64>> {
    let k = points.len();
    if k == 0 {
        return None;
    }
    let dim = target.len();
    let (centered, target_c, _scale) = normalize(points, target);

    if k == 1 {
        let ok = (0..dim).all(|c| (centered[0][c] - target_c[c]).abs() <= tol);
        return ok.then(|| vec![1.0]);
    }

    let live = live_coordinates(&centered, &target_c);
    let (e, d) = equation_matrix(&centered, &target_c, &live);

    // unconstrained minimum-norm solve often already lands in the simplex
    if let Some(w) = pinv_solve(&e, &d) {
        if w.iter().all(|&x| x >= -1e-9) {
            let mut w: Vec<f64> = w.iter().map(|&x| x.max(0.0)).collect();
            if renormalize(&mut w) && residual_ok(&centered, &target_c, &w, tol) {
                return Some(w);
            }
        }
    }

    // feasible start via simplex, then active-set polish toward min-norm
    let start = feasible_weights(&centered, &target_c, &live, tol)?;
    let polished = active_set_min_norm(&e, &d, start.clone());
    let mut w: Vec<f64> = polished.iter().map(|&x| x.max(0.0)).collect();
    if renormalize(&mut w) && residual_ok(&centered, &target_c, &w, tol) {
        return Some(w);
    }
    let mut w = start;
    if renormalize(&mut w) && residual_ok(&centered, &target_c, &w, tol) {
        Some(w)
    } else {
        None
    }
}

/// Convex-hull membership weights via phase-1 simplex on normalized
/// coordinates. Returns any deterministic witness, not the min-norm one.
pub fn feasible_convex_weights(points: &[&[f64]], target: &[f64], tol: f64) -> Option<Vec<f64>> {
    let k = points.len();
    if k == 0 {
        return None;
    }
    let dim = target.len();
    let (centered, target_c, _scale) = normalize(points, target);
    if k == 1 {
        let ok = (0..dim).all(|c| (centered[0][c] - target_c[c]).abs() <= tol);
        return ok.then(|| vec![1.0]);
    }
    let live = live_coordinates(&centered, &target_c);
    let mut w = feasible_weights(&centered, &target_c, &live, tol)?;
    if renormalize(&mut w) && residual_ok(&centered, &target_c, &w, tol) {
        Some(w)
    } else {
        None
    }
}

fn feasible_weights(
    centered: &[Vec<f64>],
    target: &[f64],
    live: &[usize],
    accept: f64,
) -> Option<Vec<f64>> {
    let k = centered.len();
    let mut equalities = Vec::with_capacity(live.len() + 1);
    for &c in live {
        equalities.push(LinearEquality {
            coeffs: (0..k).map(|j| (j, centered[j][c])).collect(),
            rhs: target[c],
        });
    }
    equalities.push(LinearEquality {
        coeffs: (0..k).map(|j| (j, 1.0)).collect(),
        rhs: 1.0,
    });
    let problem = FeasibilityProblem {
        num_vars: k,
        nonneg: vec![true; k],
        equalities,
    };
    match solve_with_tolerance(&problem, accept) {
        Ok(Feasibility::Feasible(w)) => Some(w),
        _ => None,
    }
}

/// Least-squares re-solve on the support of a basic feasible solution:
/// tightens residuals left by elastic slack to the subsystem's true
/// optimum. Keeps the input when the polish would go negative or would
/// not improve the worst residual.
pub(crate) fn polish_equality_solution(
    e: &DMatrix<f64>,
    d: &DVector<f64>,
    w: Vec<f64>,
) -> Vec<f64> {
    let k = w.len();
    let support: Vec<usize> = (0..k).filter(|&j| w[j] > 1e-9).collect();
    if support.is_empty() {
        return w;
    }
    let e_support = e.select_columns(support.iter());
    let Some(sol) = pinv_solve(&e_support, d) else {
        return w;
    };
    if sol.iter().any(|&x| x < -1e-9 || !x.is_finite()) {
        return w;
    }
    let mut out = vec![0.0; k];
    for (pos, &j) in support.iter().enumerate() {
        out[j] = sol[pos].max(0.0);
    }
    let worst = |v: &[f64]| (e * DVector::from_vec(v.to_vec()) - d).amax();
    if worst(&out) <= worst(&w) {
        out
    } else {
        w
    }
}

/// Active-set refinement of `min ||w||^2 s.t. Ew = d, w >= 0` from a
/// feasible starting point. Falls back to the start on slow convergence;
/// any returned point stays feasible.
fn active_set_min_norm(e: &DMatrix<f64>, d: &DVector<f64>, start: Vec<f64>) -> Vec<f64> {
    let k = start.len();
    let max_iters = 40 + 6 * k;
    let mut w = DVector::from_vec(start.clone());
    let mut clamped: Vec<bool> = w.iter().map(|&x| x <= 1e-12).collect();

    for _ in 0..max_iters {
        let free: Vec<usize> = (0..k).filter(|&j| !clamped[j]).collect();
        if free.is_empty() {
            break;
        }
        let e_free = e.select_columns(free.iter());
        let Some(sol) = pinv_solve(&e_free, d) else {
            break;
        };
        let mut candidate = DVector::zeros(k);
        for (pos, &j) in free.iter().enumerate() {
            candidate[j] = sol[pos];
        }

        if sol.iter().all(|&x| x >= -1e-10) {
            // candidate optimal over this active set; inspect multipliers
            w = candidate;
            let released = release_blocking_constraint(e, &w, &mut clamped);
            if !released {
                break;
            }
        } else {
            // step toward the candidate until a weight hits zero
            let mut alpha = 1.0f64;
            let mut blocker = None;
            for j in 0..k {
                let delta = candidate[j] - w[j];
                if delta < -1e-14 && candidate[j] < 0.0 {
                    let a = w[j] / (w[j] - candidate[j]);
                    if a < alpha {
                        alpha = a;
                        blocker = Some(j);
                    }
                }
            }
            for j in 0..k {
                w[j] += alpha * (candidate[j] - w[j]);
                if w[j] < 0.0 {
                    w[j] = 0.0;
                }
            }
            match blocker {
                Some(j) => clamped[j] = true,
                None => break,
            }
        }
    }

    let out: Vec<f64> = w.iter().copied().collect();
    if out.iter().any(|x| !x.is_finite()) {
        start
    } else {
        out
    }
}

/// KKT check: with w = E^T nu on the free set, a clamped weight with
/// negative multiplier can be released to shrink the norm further.
fn release_blocking_constraint(e: &DMatrix<f64>, w: &DVector<f64>, clamped: &mut [bool]) -> bool {
    let et = e.transpose();
    let Some(nu) = pinv_solve(&et, w) else {
        return false;
    };
    let grad = et * nu;
    let mut worst = -1e-10;
    let mut pick = None;
    for (j, &is_clamped) in clamped.iter().enumerate() {
        if is_clamped {
            let lambda = -grad[j];
            if lambda < worst {
                worst = lambda;
                pick = Some(j);
            }
        }
    }
    match pick {
        Some(j) => {
            clamped[j] = false;
            true
        }
        None => false,
    }
}

fn pinv_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let svd = a.clone().svd(true, true);
    svd.solve(b, 1e-12).ok().map(|m| m.column(0).into_owned())
}

/// Center at the point centroid and scale by the largest coordinate
/// spread, so the feasibility engine always works on O(1) numbers.
fn normalize(points: &[&[f64]], target: &[f64]) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let k = points.len();
    let dim = target.len();
    let mut center = vec![0.0; dim];
    for p in points {
        for c in 0..dim {
            center[c] += p[c];
        }
    }
    for c in center.iter_mut() {
        *c /= k as f64;
    }
    let mut scale: f64 = 1.0;
    for p in points {
        for c in 0..dim {
            scale = scale.max((p[c] - center[c]).abs());
        }
    }
    for c in 0..dim {
        scale = scale.max((target[c] - center[c]).abs());
    }
    let centered: Vec<Vec<f64>> = points
        .iter()
        .map(|p| (0..dim).map(|c| (p[c] - center[c]) / scale).collect())
        .collect();
    let target_c: Vec<f64> = (0..dim).map(|c| (target[c] - center[c]) / scale).collect();
    (centered, target_c, scale)
}

fn renormalize(w: &mut [f64]) -> bool {
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-6 || sum <= 0.0 {
        return false;
    }
    for x in w.iter_mut() {
        *x /= sum;
    }
    true
}

fn residual_ok(centered: &[Vec<f64>], target: &[f64], w: &[f64], tol: f64) -> bool {
    let dim = target.len();
    for c in 0..dim {
        let got: f64 = w.iter().zip(centered).map(|(&wi, p)| wi * p[c]).sum();
        if (got - target[c]).abs() > tol {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_equality_is_feasible() {
        let p = FeasibilityProblem {
            num_vars: 1,
            nonneg: vec![true],
            equalities: vec![LinearEquality {
                coeffs: vec![(0, 1.0)],
                rhs: 1.0,
            }],
        };
        let Feasibility::Feasible(x) = solve_linear_feasibility(&p).unwrap() else {
            panic!("expected feasible");
        };
        assert!((x[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn negative_rhs_with_nonneg_var_is_infeasible() {
        let p = FeasibilityProblem {
            num_vars: 1,
            nonneg: vec![true],
            equalities: vec![LinearEquality {
                coeffs: vec![(0, 1.0)],
                rhs: -1.0,
            }],
        };
        assert_eq!(
            solve_linear_feasibility(&p).unwrap(),
            Feasibility::Infeasible
        );
    }

    #[test]
    fn free_variable_can_go_negative() {
        let p = FeasibilityProblem {
            num_vars: 1,
            nonneg: vec![false],
            equalities: vec![LinearEquality {
                coeffs: vec![(0, 1.0)],
                rhs: -2.5,
            }],
        };
        let Feasibility::Feasible(x) = solve_linear_feasibility(&p).unwrap() else {
            panic!("expected feasible");
        };
        assert!((x[0] + 2.5).abs() < 1e-9);
    }

    #[test]
    fn segment_midpoint_weights() {
        let a = [0.0, 0.0];
        let b = [1.0, 1.0];
        let q = [0.5, 0.5];
        let w = feasible_convex_weights(&[&a, &b], &q, 1e-9).unwrap();
        assert!((w[0] - 0.5).abs() < 1e-9);
        assert!((w[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn ill_posed_inputs_error() {
        let p = FeasibilityProblem {
            num_vars: 1,
            nonneg: vec![true],
            equalities: vec![LinearEquality {
                coeffs: vec![(3, 1.0)],
                rhs: 0.0,
            }],
        };
        assert!(matches!(
            solve_linear_feasibility(&p),
            Err(GeometryError::IllPosed(_))
        ));
        let p = FeasibilityProblem {
            num_vars: 1,
            nonneg: vec![true],
            equalities: vec![LinearEquality {
                coeffs: vec![(0, f64::NAN)],
                rhs: 0.0,
            }],
        };
        assert!(matches!(
            solve_linear_feasibility(&p),
            Err(GeometryError::IllPosed(_))
        ));
    }

    #[test]
    fn min_norm_prefers_spread_weights() {
        // target is the midpoint of two coincident pairs; min-norm splits
        // weight evenly across all four copies
        let p1 = [0.0];
        let p2 = [0.0];
        let p3 = [1.0];
        let p4 = [1.0];
        let w = min_norm_convex_weights(&[&p1, &p2, &p3, &p4], &[0.5], 1e-9).unwrap();
        for &x in &w {
            assert!((x - 0.25).abs() < 1e-7, "weights {w:?}");
        }
    }

    #[test]
    fn min_norm_handles_vertex_target() {
        let a = [0.0, 0.0];
        let b = [2.0, 0.0];
        let c = [0.0, 2.0];
        let w = min_norm_convex_weights(&[&a, &b, &c], &[2.0, 0.0], 1e-7).unwrap();
        assert!((w[1] - 1.0).abs() < 1e-6, "weights {w:?}");
    }

    #[test]
    fn min_norm_rejects_outside_points() {
        let a = [0.0];
        let b = [1.0];
        assert!(min_norm_convex_weights(&[&a, &b], &[2.0], 1e-7).is_none());
    }

    #[test]
    fn collapsed_coordinate_still_decomposes() {
        // late-round belief vectors: the first coordinate has collapsed
        // to the 1e-12 scale while the second spans several units; the
        // collapsed equation must not poison the solve
        let x1 = [-1.028510610012745e-12, -27.603159092758744];
        let x0 = [-1.6857626405908377e-12, -27.108332453200298];
        let x2 = [0.0, -35.176490737475504];
        let z = [-3.321672659639229e-13, -30.644432582036867];
        let w = min_norm_convex_weights(&[&x1, &x0, &x2], &z, 1e-7).unwrap();
        let sum: f64 = w.iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
        let y: f64 = w[0] * x1[1] + w[1] * x0[1] + w[2] * x2[1];
        assert!((y - z[1]).abs() < 1e-7);
    }

    #[test]
    fn identical_points_get_uniform_weights() {
        let p = [3.5, -1.0];
        let refs: Vec<&[f64]> = vec![&p, &p, &p];
        let w = min_norm_convex_weights(&refs, &[3.5, -1.0], 1e-9).unwrap();
        for &x in &w {
            assert!((x - 1.0 / 3.0).abs() < 1e-7);
        }
    }
}
