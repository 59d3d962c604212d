//! Tverberg points and convex-hull membership for small point multisets,
//! the fault-masking primitive of the aggregation step.

mod feasibility;

pub(crate) use feasibility::{feasible_convex_weights, min_norm_convex_weights};
pub use feasibility::{
    solve_linear_feasibility, Feasibility, FeasibilityProblem, LinearEquality, FEASIBILITY_TOL,
};

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default bound on the number of set partitions a Tverberg search may
/// try before giving up with a hard error.
pub const DEFAULT_PARTITION_CAP: usize = 2_000_000;

/// Per-coordinate residual accepted when a certificate is rebuilt, on the
/// normalized coordinate scale.
pub const CERTIFICATE_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("ill-posed input: {0}")]
    IllPosed(String),
    #[error("point {index} has {got} coordinates, expected {expected}")]
    DimensionMismatch {
        index: usize,
        got: usize,
        expected: usize,
    },
    #[error("point {index} has a non-finite coordinate")]
    NonFinitePoint { index: usize },
    #[error("Tverberg input needs (m+1)f+1 = {expected} points in dimension {dim} for f = {f}, got {got}")]
    CardinalityMismatch {
        expected: usize,
        got: usize,
        dim: usize,
        f: usize,
    },
    #[error("partition cap {0} exceeded before a certificate was found")]
    PartitionCapExceeded(usize),
    #[error(
        "no certificate found across {tried} partitions; existence is guaranteed at this \
         cardinality, so this signals a numerical-tolerance problem"
    )]
    NoCertificate { tried: usize },
}

/// An ordered multiset of points in a fixed dimension. Duplicates are
/// distinct members. Each point carries a provenance tag (the sender it
/// came from).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    points: Vec<Vec<f64>>,
    sources: Vec<usize>,
}

impl PointSet {
    pub fn new(dim: usize, points: Vec<Vec<f64>>) -> Result<Self, GeometryError> {
        let sources = (0..points.len()).collect();
        Self::with_sources(dim, points, sources)
    }

    pub fn with_sources(
        dim: usize,
        points: Vec<Vec<f64>>,
        sources: Vec<usize>,
    ) -> Result<Self, GeometryError> {
        if sources.len() != points.len() {
            return Err(GeometryError::IllPosed(
                "one provenance tag per point required".into(),
            ));
        }
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(GeometryError::DimensionMismatch {
                    index,
                    got: p.len(),
                    expected: dim,
                });
            }
            if p.iter().any(|x| !x.is_finite()) {
                return Err(GeometryError::NonFinitePoint { index });
            }
        }
        Ok(Self {
            dim,
            points,
            sources,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, index: usize) -> &[f64] {
        &self.points[index]
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn source(&self, index: usize) -> usize {
        self.sources[index]
    }

    pub fn sources(&self) -> &[usize] {
        &self.sources
    }
}

/// Outcome of a hull-membership query.
#[derive(Debug, Clone, PartialEq)]
pub struct HullMembership {
    pub inside: bool,
    pub weights: Option<Vec<f64>>,
}

/// Is `q` a convex combination of the points? `tol` bounds the accepted
/// per-coordinate witness residual on the normalized coordinate scale
/// (points are centered and scaled internally for conditioning).
pub fn in_convex_hull(q: &[f64], ps: &PointSet, tol: f64) -> HullMembership {
    if q.len() != ps.dim() || ps.is_empty() {
        return HullMembership {
            inside: false,
            weights: None,
        };
    }
    let refs: Vec<&[f64]> = ps.points.iter().map(|p| p.as_slice()).collect();
    match feasible_convex_weights(&refs, q, tol) {
        Some(w) => HullMembership {
            inside: true,
            weights: Some(w),
        },
        None => HullMembership {
            inside: false,
            weights: None,
        },
    }
}

/// A Tverberg point with its certificate: a partition of the input
/// multiset into `f+1` groups and per-group convex weights that all
/// reproduce the point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TverbergResult {
    pub point: Vec<f64>,
    /// Disjoint nonempty index groups covering the multiset, ordered by
    /// first occurrence; indices within a group ascend.
    pub partition: Vec<Vec<usize>>,
    /// Convex coefficients per group, aligned with `partition`.
    pub weights: Vec<Vec<f64>>,
}

/// Compute a Tverberg point of a multiset of `(dim+1)f+1` points: a point
/// in the intersection of the convex hulls of some partition into `f+1`
/// nonempty groups. Partitions are searched in restricted-growth-string
/// order and the first certified one wins, so results are reproducible.
pub fn tverberg_point(ps: &PointSet, f: usize) -> Result<TverbergResult, GeometryError> {
    tverberg_point_capped(ps, f, DEFAULT_PARTITION_CAP)
}

pub fn tverberg_point_capped(
    ps: &PointSet,
    f: usize,
    cap: usize,
) -> Result<TverbergResult, GeometryError> {
    let dim = ps.dim();
    let expected = (dim + 1) * f + 1;
    if ps.len() != expected {
        return Err(GeometryError::CardinalityMismatch {
            expected,
            got: ps.len(),
            dim,
            f,
        });
    }
    if f == 0 {
        return Ok(TverbergResult {
            point: ps.point(0).to_vec(),
            partition: vec![vec![0]],
            weights: vec![vec![1.0]],
        });
    }

    let n = ps.len();
    let groups_wanted = f + 1;
    let (centered, center, scale) = center_points(&ps.points);

    let mut tried = 0usize;
    let mut found: Option<TverbergResult> = None;
    let flow = for_each_partition(n, groups_wanted, &mut |assignment| {
        tried += 1;
        if tried > cap {
            return ControlFlow::Break(PartitionOutcome::CapHit);
        }
        let groups = groups_from_assignment(assignment, groups_wanted);
        if let Some(result) = certify_partition(&centered, &groups, &center, scale) {
            found = Some(result);
            return ControlFlow::Break(PartitionOutcome::Found);
        }
        ControlFlow::Continue(())
    });

    match flow {
        ControlFlow::Break(PartitionOutcome::Found) => Ok(found.expect("certificate recorded")),
        ControlFlow::Break(PartitionOutcome::CapHit) => {
            Err(GeometryError::PartitionCapExceeded(cap))
        }
        ControlFlow::Continue(()) => Err(GeometryError::NoCertificate { tried }),
    }
}

/// Re-verify a certificate: partition shape, weight validity, and both
/// group memberships through the hull oracle at `tol`.
pub fn verify_tverberg(ps: &PointSet, result: &TverbergResult, f: usize, tol: f64) -> bool {
    // partition must split 0..len into f+1 disjoint nonempty groups
    if result.partition.len() != f + 1 || result.weights.len() != f + 1 {
        return false;
    }
    let mut seen = vec![false; ps.len()];
    for group in &result.partition {
        if group.is_empty() {
            return false;
        }
        for &idx in group {
            if idx >= ps.len() || seen[idx] {
                return false;
            }
            seen[idx] = true;
        }
    }
    if !seen.iter().all(|&s| s) {
        return false;
    }
    for (group, weights) in result.partition.iter().zip(&result.weights) {
        if group.len() != weights.len() {
            return false;
        }
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < -1e-9) || (sum - 1.0).abs() > 1e-9 {
            return false;
        }
        let group_points: Vec<Vec<f64>> = group.iter().map(|&i| ps.point(i).to_vec()).collect();
        let subset = PointSet::new(ps.dim(), group_points).expect("group points well-formed");
        if !in_convex_hull(&result.point, &subset, tol).inside {
            return false;
        }
    }
    true
}

enum PartitionOutcome {
    Found,
    CapHit,
}

/// Visit restricted growth strings of length `n` with exactly `k` block
/// labels, in lexicographic order.
fn for_each_partition<F>(n: usize, k: usize, visit: &mut F) -> ControlFlow<PartitionOutcome>
where
    F: FnMut(&[usize]) -> ControlFlow<PartitionOutcome>,
{
    fn recurse<F>(
        assignment: &mut Vec<usize>,
        n: usize,
        k: usize,
        max_used: usize,
        visit: &mut F,
    ) -> ControlFlow<PartitionOutcome>
    where
        F: FnMut(&[usize]) -> ControlFlow<PartitionOutcome>,
    {
        let pos = assignment.len();
        if pos == n {
            return if max_used == k - 1 {
                visit(assignment)
            } else {
                ControlFlow::Continue(())
            };
        }
        let remaining = n - pos;
        let top = (max_used + 1).min(k - 1);
        for label in 0..=top {
            let new_max = max_used.max(label);
            // every missing label still needs a slot
            if (k - 1).saturating_sub(new_max) > remaining - 1 {
                continue;
            }
            assignment.push(label);
            recurse(assignment, n, k, new_max, visit)?;
            assignment.pop();
        }
        ControlFlow::Continue(())
    }

    if k == 0 || k > n {
        return ControlFlow::Continue(());
    }
    let mut assignment = Vec::with_capacity(n);
    assignment.push(0);
    recurse(&mut assignment, n, k, 0, visit)
}

fn groups_from_assignment(assignment: &[usize], k: usize) -> Vec<Vec<usize>> {
    let mut groups = vec![Vec::new(); k];
    for (idx, &label) in assignment.iter().enumerate() {
        groups[label].push(idx);
    }
    groups
}

fn center_points(points: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>, f64) {
    let dim = points[0].len();
    let mut center = vec![0.0; dim];
    for p in points {
        for c in 0..dim {
            center[c] += p[c];
        }
    }
    for c in center.iter_mut() {
        *c /= points.len() as f64;
    }
    let mut scale: f64 = 1.0;
    for p in points {
        for c in 0..dim {
            scale = scale.max((p[c] - center[c]).abs());
        }
    }
    let centered = points
        .iter()
        .map(|p| (0..dim).map(|c| (p[c] - center[c]) / scale).collect())
        .collect();
    (centered, center, scale)
}

/// Try one partition: a common point exists iff the per-group hulls
/// intersect. The common point is eliminated by equating every group's
/// combination with group 0's, leaving only non-negative weights. A
/// least-squares polish on the support tightens the basic solution so
/// certificates come out machine-tight, not merely tolerance-tight.
fn certify_partition(
    centered: &[Vec<f64>],
    groups: &[Vec<usize>],
    center: &[f64],
    scale: f64,
) -> Option<TverbergResult> {
    let n = centered.len();
    let dim = center.len();
    let k = groups.len();

    let row_count = (k - 1) * dim + k;
    let mut dense = vec![vec![0.0; n]; row_count];
    let mut rhs = vec![0.0; row_count];
    for g in 1..k {
        for c in 0..dim {
            let row = &mut dense[(g - 1) * dim + c];
            for &i in &groups[g] {
                row[i] += centered[i][c];
            }
            for &i in &groups[0] {
                row[i] -= centered[i][c];
            }
        }
    }
    for (g, group) in groups.iter().enumerate() {
        let row = &mut dense[(k - 1) * dim + g];
        for &i in group {
            row[i] = 1.0;
        }
        rhs[(k - 1) * dim + g] = 1.0;
    }

    let equalities = dense
        .iter()
        .zip(&rhs)
        .map(|(row, &r)| LinearEquality {
            coeffs: row
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(j, &v)| (j, v))
                .collect(),
            rhs: r,
        })
        .collect();
    let problem = FeasibilityProblem {
        num_vars: n,
        nonneg: vec![true; n],
        equalities,
    };
    let Ok(Feasibility::Feasible(found)) = solve_linear_feasibility(&problem) else {
        return None;
    };
    let e = nalgebra::DMatrix::from_fn(row_count, n, |r, c| dense[r][c]);
    let d = nalgebra::DVector::from_vec(rhs);
    let raw = feasibility::polish_equality_solution(&e, &d, found);

    // renormalize group sums exactly and average group combinations
    let mut weights = Vec::with_capacity(k);
    for group in groups {
        let mut w: Vec<f64> = group.iter().map(|&i| raw[i].max(0.0)).collect();
        let sum: f64 = w.iter().sum();
        if sum <= 0.0 {
            return None;
        }
        for x in w.iter_mut() {
            *x /= sum;
        }
        weights.push(w);
    }
    let mut point_c = vec![0.0; dim];
    for (group, w) in groups.iter().zip(&weights) {
        for (pos, &i) in group.iter().enumerate() {
            for c in 0..dim {
                point_c[c] += w[pos] * centered[i][c];
            }
        }
    }
    for x in point_c.iter_mut() {
        *x /= k as f64;
    }
    // certificate residual per group, on the normalized scale
    for (group, w) in groups.iter().zip(&weights) {
        for c in 0..dim {
            let got: f64 = group
                .iter()
                .zip(w)
                .map(|(&i, &wi)| wi * centered[i][c])
                .sum();
            if (got - point_c[c]).abs() > CERTIFICATE_TOL {
                return None;
            }
        }
    }

    let point = (0..dim).map(|c| center[c] + scale * point_c[c]).collect();
    Some(TverbergResult {
        point,
        partition: groups.to_vec(),
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pset(dim: usize, pts: &[&[f64]]) -> PointSet {
        PointSet::new(dim, pts.iter().map(|p| p.to_vec()).collect()).unwrap()
    }

    #[test]
    fn hull_membership_of_a_member_point() {
        let ps = pset(2, &[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let got = in_convex_hull(&[1.0, 0.0], &ps, 1e-9);
        assert!(got.inside);
        let w = got.weights.unwrap();
        assert!((w[1] - 1.0).abs() < 1e-7, "weights {w:?}");
    }

    #[test]
    fn hull_membership_of_centroid() {
        let ps = pset(2, &[&[0.0, 0.0], &[3.0, 0.0], &[0.0, 3.0]]);
        let got = in_convex_hull(&[1.0, 1.0], &ps, 1e-9);
        assert!(got.inside);
        let w = got.weights.unwrap();
        // unique decomposition: affinely independent points
        for &x in &w {
            assert!((x - 1.0 / 3.0).abs() < 1e-7);
        }
    }

    #[test]
    fn hull_rejects_point_outside_bounding_box() {
        let ps = pset(2, &[&[0.0, 0.0], &[1.0, 0.0], &[0.0, 1.0]]);
        let q = [5.0, 5.0];
        let got = in_convex_hull(&q, &ps, 1e-9);
        assert!(!got.inside);

        // brute-force oracle: no grid convex combination comes close
        let mut best = f64::INFINITY;
        let steps = 60;
        for i in 0..=steps {
            for j in 0..=steps - i {
                let a = i as f64 / steps as f64;
                let b = j as f64 / steps as f64;
                let c = 1.0 - a - b;
                let x = a * 0.0 + b * 1.0 + c * 0.0;
                let y = a * 0.0 + b * 0.0 + c * 1.0;
                let d = (x - q[0]).abs().max((y - q[1]).abs());
                best = best.min(d);
            }
        }
        assert!(best > 1.0);
    }

    #[test]
    fn tverberg_f0_is_identity_on_singletons() {
        let ps = pset(3, &[&[1.0, 2.0, 3.0]]);
        let got = tverberg_point(&ps, 0).unwrap();
        assert_eq!(got.point, vec![1.0, 2.0, 3.0]);
        assert_eq!(got.partition, vec![vec![0]]);
        assert_eq!(got.weights, vec![vec![1.0]]);
    }

    #[test]
    fn tverberg_line_three_points() {
        // dim 1, f = 1: partitions in RGS order are {{0,1},{2}}, then
        // {{0,2},{1}} which is the first certifiable one: 1 lies in [0,2]
        let ps = pset(1, &[&[0.0], &[1.0], &[2.0]]);
        let got = tverberg_point(&ps, 1).unwrap();
        assert_eq!(got.partition, vec![vec![0, 2], vec![1]]);
        assert!((got.point[0] - 1.0).abs() < 1e-9);
        assert!(verify_tverberg(&ps, &got, 1, 1e-7));
    }

    #[test]
    fn tverberg_square_crossing_diagonals() {
        let ps = pset(2, &[&[0.0, 0.0], &[2.0, 0.0], &[0.0, 2.0], &[2.0, 2.0]]);
        let got = tverberg_point(&ps, 1).unwrap();
        // the only partition with intersecting hulls pairs the diagonals
        assert_eq!(got.partition, vec![vec![0, 3], vec![1, 2]]);
        assert!((got.point[0] - 1.0).abs() < 1e-7);
        assert!((got.point[1] - 1.0).abs() < 1e-7);
        assert!(verify_tverberg(&ps, &got, 1, 1e-7));
    }

    #[test]
    fn tverberg_duplicates_are_distinct_members() {
        let ps = pset(1, &[&[1.0], &[1.0], &[1.0]]);
        let got = tverberg_point(&ps, 1).unwrap();
        assert!((got.point[0] - 1.0).abs() < 1e-9);
        assert!(verify_tverberg(&ps, &got, 1, 1e-7));
    }

    #[test]
    fn tverberg_cardinality_checked() {
        let ps = pset(2, &[&[0.0, 0.0], &[1.0, 0.0]]);
        assert!(matches!(
            tverberg_point(&ps, 1),
            Err(GeometryError::CardinalityMismatch {
                expected: 4,
                got: 2,
                ..
            })
        ));
    }

    #[test]
    fn tverberg_cap_is_enforced() {
        let ps = pset(1, &[&[0.0], &[1.0], &[2.0]]);
        assert!(matches!(
            tverberg_point_capped(&ps, 1, 1),
            Err(GeometryError::PartitionCapExceeded(1))
        ));
    }

    #[test]
    fn partition_enumeration_counts_match_stirling() {
        let mut count = 0usize;
        let _ = for_each_partition(4, 2, &mut |_| {
            count += 1;
            ControlFlow::Continue(())
        });
        assert_eq!(count, 7); // S(4,2)
        let mut count = 0usize;
        let _ = for_each_partition(7, 3, &mut |_| {
            count += 1;
            ControlFlow::Continue(())
        });
        assert_eq!(count, 301); // S(7,3)
    }

    #[test]
    fn partition_enumeration_is_lexicographic() {
        let mut seen = Vec::new();
        let _ = for_each_partition(3, 2, &mut |a| {
            seen.push(a.to_vec());
            ControlFlow::Continue(())
        });
        assert_eq!(seen, vec![vec![0, 0, 1], vec![0, 1, 0], vec![0, 1, 1]]);
    }

    #[test]
    fn returned_point_is_in_full_hull() {
        let pts: Vec<Vec<f64>> = vec![
            vec![-3.0, 0.5],
            vec![4.0, -2.0],
            vec![0.0, 3.0],
            vec![1.0, 1.0],
        ];
        let ps = PointSet::new(2, pts).unwrap();
        let got = tverberg_point(&ps, 1).unwrap();
        assert!(in_convex_hull(&got.point, &ps, 1e-7).inside);
    }
}
