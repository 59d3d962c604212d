//! Compute Tverberg points with certifying partitions.
//!
//! A multiset of (m+1)f+1 points in R^m always admits a partition into
//! f+1 groups whose convex hulls share a point; that shared point is what
//! the aggregation step uses to mask up to f Byzantine inputs.

use byzlearn::geometry::{in_convex_hull, tverberg_point, verify_tverberg, PointSet};

fn main() {
    // the classic square: only the diagonal pairing admits a common point
    let square = PointSet::new(
        2,
        vec![
            vec![0.0, 0.0],
            vec![2.0, 0.0],
            vec![0.0, 2.0],
            vec![2.0, 2.0],
        ],
    )
    .unwrap();
    let result = tverberg_point(&square, 1).unwrap();
    println!("square, f = 1");
    println!("  point     {:?}", result.point);
    println!("  partition {:?}", result.partition);
    println!("  weights   {:?}", result.weights);
    println!(
        "  certificate re-verifies: {}",
        verify_tverberg(&square, &result, 1, 1e-7)
    );

    // one dimension up, two faults: 4f + 1 = 9 points in R^3
    let cloud = PointSet::new(
        3,
        vec![
            vec![1.0, 0.0, 0.0],
            vec![-1.0, 0.5, 0.0],
            vec![0.0, -1.0, 0.5],
            vec![0.5, 1.0, -1.0],
            vec![-0.5, -0.5, -0.5],
            vec![0.0, 0.0, 1.0],
            vec![2.0, 1.0, 1.0],
            vec![-2.0, -1.0, 1.0],
            vec![0.3, 0.3, -1.5],
        ],
    )
    .unwrap();
    let result = tverberg_point(&cloud, 2).unwrap();
    println!("\nnine points in R^3, f = 2");
    println!("  point     {:?}", result.point);
    println!("  partition {:?}", result.partition);
    println!(
        "  certificate re-verifies: {}",
        verify_tverberg(&cloud, &result, 2, 1e-7)
    );

    // masking: drop any two points and the Tverberg point stays inside
    // the hull of the remaining seven
    let mut masked = true;
    for a in 0..9 {
        for b in a + 1..9 {
            let rest: Vec<Vec<f64>> = (0..9)
                .filter(|&i| i != a && i != b)
                .map(|i| cloud.point(i).to_vec())
                .collect();
            let hull = PointSet::new(3, rest).unwrap();
            masked &= in_convex_hull(&result.point, &hull, 1e-7).inside;
        }
    }
    println!("  inside every 7-point sub-hull: {masked}");
}
