use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use welding::capacity::{estimate_capacity, union_capacity_bound, upper_bound_capacity};
use welding::decompose::{decompose, verify, DecomposeOptions};
use welding::geometry::{IntervalUnion, Segment};
use welding::homeo::{Homeo, Kind, PLHomeo};

fn sorted_inner(rng: &mut ChaCha8Rng, inner: usize) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..inner).map(|_| rng.gen_range(0.01..0.99)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup();
        if v.len() == inner {
            return std::iter::once(0.0).chain(v).chain([1.0]).collect();
        }
    }
}

fn random_pl(rng: &mut ChaCha8Rng, inner: usize) -> PLHomeo {
    let xs = sorted_inner(rng, inner);
    let ys = sorted_inner(rng, inner);
    PLHomeo::new(Kind::Interval, xs, ys).unwrap()
}

#[test]
fn random_pl_maps_decompose_and_verify() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let opts = DecomposeOptions {
        depth: 4,
        grid: 2000,
        ..Default::default()
    };
    for _ in 0..5 {
        let phi = Homeo::Pl(random_pl(&mut rng, 12));
        let result = decompose(&phi, &opts).unwrap();
        assert!(result.passed);
        let report = verify(&result, 2000);
        assert!(report.passed, "{:?}", report.failures().collect::<Vec<_>>());
    }
}

#[test]
fn composite_of_inverse_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let f = random_pl(&mut rng, 30);
        let id = f.compose(&f.invert()).unwrap();
        for _ in 0..50 {
            let y = rng.gen_range(0.0..1.0);
            assert!((id.eval(y).unwrap() - y).abs() < 1e-12);
        }
    }
}

#[test]
fn capacity_bounds_dominate_estimate() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..10 {
        let a: f64 = rng.gen_range(0.0..0.4);
        let b = a + rng.gen_range(0.05..0.2);
        let c = b + rng.gen_range(0.05..0.2);
        let d = c + rng.gen_range(0.05..0.2);
        let set = IntervalUnion::normalize([
            Segment::new(a, b).unwrap().into(),
            Segment::new(c, d).unwrap().into(),
        ])
        .unwrap();
        let est = estimate_capacity(&set, 128).unwrap().cap_estimate;
        assert!(est <= union_capacity_bound(&set) * (1.0 + 1e-6));
        // the hull contains the set
        let hull = IntervalUnion::normalize([Segment::new(a, d).unwrap().into()]).unwrap();
        assert!(est <= upper_bound_capacity(&hull) * (1.0 + 1e-6));
    }
}
