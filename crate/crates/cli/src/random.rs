//! Seeded generators for property checks.

use rand::Rng;
use welding::addresses::PartitionTree;
use welding::geometry::{IntervalUnion, Segment};
use welding::homeo::{Kind, PLHomeo};

/// `count` distinct sorted points strictly inside `(lo, hi)`.
fn interior_points<R: Rng>(rng: &mut R, lo: f64, hi: f64, count: usize) -> Vec<f64> {
    loop {
        let mut pts: Vec<f64> = (0..count).map(|_| rng.gen_range(lo..hi)).collect();
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        if pts.len() == count && pts.iter().all(|&p| lo < p && p < hi) {
            return pts;
        }
    }
}

/// Random tree of depth 1 to 5 with fan-outs 1 to 4 over `[0, 1]` or the
/// circle.
pub fn random_tree<R: Rng>(rng: &mut R) -> PartitionTree {
    let mut tree = if rng.gen_bool(0.5) {
        PartitionTree::new_circle()
    } else {
        let a = rng.gen_range(-1.0..1.0);
        PartitionTree::new_interval(a, a + rng.gen_range(0.1..2.0)).expect("positive length")
    };
    let depth = rng.gen_range(1..=5);
    for n in 0..depth {
        let fanout = rng.gen_range(1..=4);
        let cuts = tree
            .level(n)
            .iter()
            .map(|&[lo, hi]| interior_points(rng, lo, hi, fanout - 1))
            .collect();
        tree.push_level(fanout, cuts)
            .expect("cuts are interior and sorted");
    }
    tree
}

/// Increasing PL map of `[0, 1]` onto itself with `breakpoints` points,
/// the two ends included.
pub fn random_pl<R: Rng>(rng: &mut R, breakpoints: usize) -> PLHomeo {
    let inner = breakpoints.saturating_sub(2);
    let mut xs = vec![0.0];
    xs.extend(interior_points(rng, 0.0, 1.0, inner));
    xs.push(1.0);
    let mut ys = vec![0.0];
    ys.extend(interior_points(rng, 0.0, 1.0, inner));
    ys.push(1.0);
    PLHomeo::new(Kind::Interval, xs, ys).expect("sorted distinct points")
}

/// One to four disjoint segments inside `[0, 1]`.
pub fn random_segments<R: Rng>(rng: &mut R) -> IntervalUnion {
    let count = rng.gen_range(1..=4);
    let ends = interior_points(rng, 0.0, 1.0, 2 * count);
    let parts = ends
        .chunks(2)
        .map(|c| Segment::new(c[0], c[1]).expect("ordered").into())
        .collect::<Vec<_>>();
    IntervalUnion::normalize(parts).expect("disjoint segments")
}
