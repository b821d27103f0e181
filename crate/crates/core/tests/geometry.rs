use std::f64::consts::PI;

use holecover::geometry::{
    covering_bounds, hex_cover, matern_thin, matern_thin_type2, minkowski_area_rect_disk,
    sample_ppp, PointSet, Region,
};
use holecover::{Seed, Vec2};
use proptest::prelude::*;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

#[test]
fn ppp_zero_density_and_negative_density() {
    let r = Region::square(1000.0).unwrap();
    assert!(sample_ppp(&r, 0.0, Seed(3)).unwrap().is_empty());
    assert!(sample_ppp(&r, -1e-6, Seed(3)).is_err());
}

#[test]
fn ppp_points_stay_inside_and_are_reproducible() {
    let r = Region::new(300.0, 200.0)
        .unwrap()
        .with_origin(Vec2::new(-50.0, 20.0));
    let a = sample_ppp(&r, 1e-3, Seed(11)).unwrap();
    let b = sample_ppp(&r, 1e-3, Seed(11)).unwrap();
    assert_eq!(a, b);
    assert!(a.points.iter().all(|p| r.contains(p)));
}

#[test]
fn ppp_mean_count_quarter_km() {
    // 50/km² on 0.25 km² gives a Poisson mean of 12.5.
    let r = Region::square(500.0).unwrap();
    let n = 10_000;
    let total: usize = (0..n)
        .map(|t| sample_ppp(&r, 50e-6, Seed(7).derive(t)).unwrap().len())
        .sum();
    let mean = total as f64 / n as f64;
    assert!((mean - 12.5).abs() / 12.5 < 0.02, "mean {mean}");
}

#[test]
fn ppp_mean_count_one_km() {
    let r = Region::square(1000.0).unwrap();
    let n = 2000u64;
    let total: usize = (0..n)
        .map(|t| sample_ppp(&r, 100e-6, Seed(8).derive(t)).unwrap().len())
        .sum();
    let mean = total as f64 / n as f64;
    let band = 3.0 * 100f64.sqrt() / (n as f64).sqrt();
    assert!((mean - 100.0).abs() < band, "mean {mean}");
}

fn poisson_pmf(k: usize, mu: f64) -> f64 {
    let mut log = -mu + k as f64 * mu.ln();
    for j in 2..=k {
        log -= (j as f64).ln();
    }
    log.exp()
}

#[test]
fn ppp_counts_pass_chi_square() {
    let r = Region::square(500.0).unwrap();
    let mu = 12.5;
    let trials = 10_000usize;
    let mut counts = vec![0usize; 64];
    for t in 0..trials {
        let k = sample_ppp(&r, 50e-6, Seed(21).derive(t as u64))
            .unwrap()
            .len();
        counts[k.min(63)] += 1;
    }
    // Pool the tails so every bin expects at least 5.
    let (lo, hi) = (5usize, 21usize);
    let mut observed = Vec::new();
    let mut expected = Vec::new();
    let below: f64 = (0..=lo).map(|k| poisson_pmf(k, mu)).sum();
    observed.push(counts[..=lo].iter().sum::<usize>() as f64);
    expected.push(below * trials as f64);
    for (k, &c) in counts.iter().enumerate().take(hi).skip(lo + 1) {
        observed.push(c as f64);
        expected.push(poisson_pmf(k, mu) * trials as f64);
    }
    let inner: f64 = (0..hi).map(|k| poisson_pmf(k, mu)).sum();
    observed.push(counts[hi..].iter().sum::<usize>() as f64);
    expected.push((1.0 - inner) * trials as f64);
    assert!(expected.iter().all(|&e| e >= 5.0));
    let stat: f64 = observed
        .iter()
        .zip(&expected)
        .map(|(o, e)| (o - e) * (o - e) / e)
        .sum();
    let df = (observed.len() - 1) as f64;
    let critical = ChiSquared::new(df).unwrap().inverse_cdf(0.99);
    assert!(stat < critical, "chi2 {stat} >= {critical}");
}

#[test]
fn thinning_removes_close_pair() {
    let set = PointSet {
        points: vec![Vec2::new(0.0, 0.0), Vec2::new(50.0, 0.0)],
        density: 1.0,
    };
    assert!(matern_thin(&set, 100.0).is_empty());
    assert_eq!(matern_thin(&set, 0.0).points, set.points);
}

#[test]
fn thinning_square_cluster_among_spaced_points() {
    // 16 points on a 200 m lattice plus a 40 m square: the square has four
    // violating sides and diagonals of 56.6 m, so exactly its corners go.
    let mut pts: Vec<Vec2> = (0..16)
        .map(|k| Vec2::new(200.0 * (k % 4) as f64, 200.0 * (k / 4) as f64))
        .collect();
    let c = Vec2::new(1000.0, 1000.0);
    for (dx, dy) in [(0.0, 0.0), (40.0, 0.0), (0.0, 40.0), (40.0, 40.0)] {
        pts.push(c + Vec2::new(dx, dy));
    }
    let set = PointSet {
        points: pts.clone(),
        density: 1.0,
    };
    let out = matern_thin(&set, 50.0);
    assert_eq!(out.len(), 16);
    assert_eq!(out.points, pts[..16].to_vec());
}

#[test]
fn thinning_with_distance_beyond_diagonal_empties() {
    let r = Region::square(300.0).unwrap();
    let set = sample_ppp(&r, 1e-4, Seed(5)).unwrap();
    assert!(set.len() >= 2);
    assert!(matern_thin(&set, 500.0).is_empty());
}

#[test]
fn minkowski_examples() {
    let a = Region::square(1000.0).unwrap();
    assert_eq!(minkowski_area_rect_disk(&a, 0.0), 1e6);
    assert!(close(
        minkowski_area_rect_disk(&a, 100.0),
        1_431_415.93,
        0.01
    ));
    let b = Region::new(500.0, 200.0).unwrap();
    assert!(close(minkowski_area_rect_disk(&b, 50.0), 177_853.98, 0.01));
}

#[test]
fn minkowski_matches_grid_count() {
    // Count grid points within r of the rectangle.
    let region = Region::new(60.0, 30.0).unwrap();
    let r = 10.0;
    let h = 0.05;
    let mut inside = 0usize;
    let steps_x = ((region.width + 2.0 * r) / h) as usize;
    let steps_y = ((region.height + 2.0 * r) / h) as usize;
    for i in 0..steps_x {
        for j in 0..steps_y {
            let x = -r + (i as f64 + 0.5) * h;
            let y = -r + (j as f64 + 0.5) * h;
            let dx = (x.clamp(0.0, region.width) - x).abs();
            let dy = (y.clamp(0.0, region.height) - y).abs();
            if dx * dx + dy * dy <= r * r {
                inside += 1;
            }
        }
    }
    let area = inside as f64 * h * h;
    let exact = minkowski_area_rect_disk(&region, r);
    assert!((area - exact).abs() / exact < 1e-3, "{area} vs {exact}");
}

#[test]
fn covering_bounds_examples() {
    let a = Region::square(1000.0).unwrap();
    let b = covering_bounds(&a, 200.0).unwrap();
    assert!(close(b.lower, 7.96, 0.005));
    assert!(close(b.upper, 45.56, 0.005));
    assert_eq!(b.lower_int, 8);
    assert_eq!(b.upper_int, 45);
    assert!(covering_bounds(&a, 0.0).is_err());
    assert!(covering_bounds(&a, -3.0).is_err());

    let side = (PI * 100f64.powi(2)).sqrt();
    let one = covering_bounds(&Region::square(side).unwrap(), 100.0).unwrap();
    assert!(close(one.lower, 1.0, 1e-12));

    let flat = Region {
        width: 0.0,
        height: 0.0,
        origin: Vec2::zeros(),
    };
    assert_eq!(covering_bounds(&flat, 10.0).unwrap().lower, 0.0);
}

fn assert_covers(region: &Region, r: f64, centres: &[Vec2]) {
    let n = 60;
    for i in 0..=n {
        for j in 0..=n {
            let p = region.origin
                + Vec2::new(
                    region.width * i as f64 / n as f64,
                    region.height * j as f64 / n as f64,
                );
            let d = centres
                .iter()
                .map(|c| (c - p).norm())
                .fold(f64::INFINITY, f64::min);
            assert!(
                d <= r * (1.0 + 1e-9),
                "point {p:?} is {d} from the nearest centre (R = {r})"
            );
        }
    }
}

#[test]
fn hex_cover_examples() {
    let a = Region::square(1000.0).unwrap();
    let c = hex_cover(&a, 200.0).unwrap();
    assert!(c.len() >= 8);
    assert_covers(&a, 200.0, &c.points);
    assert_eq!(hex_cover(&a, 500.0 * 2f64.sqrt()).unwrap().len(), 1);
    let small = Region::new(30.0, 40.0).unwrap();
    assert_eq!(hex_cover(&small, 25.0).unwrap().len(), 1);
    assert!(hex_cover(&a, 0.0).is_err());
}

#[test]
fn type2_thinning_is_hard_core() {
    let r = Region::square(800.0).unwrap();
    let set = sample_ppp(&r, 2e-4, Seed(9)).unwrap();
    let out = matern_thin_type2(&set, 40.0, &mut Seed(10).rng());
    assert!(out.min_pairwise_distance().unwrap_or(f64::INFINITY) >= 40.0);
    assert!(out.len() <= set.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn thinning_is_hard_core(seed in any::<u64>(), d in 1.0f64..120.0, lam in 1e-5f64..4e-4) {
        let r = Region::square(600.0).unwrap();
        let set = sample_ppp(&r, lam, Seed(seed)).unwrap();
        let out = matern_thin(&set, d);
        for (i, a) in out.points.iter().enumerate() {
            for b in &out.points[i + 1..] {
                prop_assert!((a - b).norm() >= d);
            }
        }
        prop_assert!(out.points.iter().all(|p| set.points.contains(p)));
    }

    #[test]
    fn covering_sandwich(w in 50.0f64..3000.0, h in 50.0f64..3000.0, r in 20.0f64..800.0) {
        let region = Region::new(w, h).unwrap();
        let b = covering_bounds(&region, r).unwrap();
        let cover = hex_cover(&region, r).unwrap();
        prop_assert!(b.lower <= b.upper);
        prop_assert!(b.lower <= cover.len() as f64);
        prop_assert_eq!(b.lower_int, b.lower.ceil() as u64);
    }

    #[test]
    fn hex_cover_covers(w in 50.0f64..1500.0, h in 50.0f64..1500.0, r in 40.0f64..600.0, ox in -500.0f64..500.0) {
        let region = Region::new(w, h).unwrap().with_origin(Vec2::new(ox, -ox));
        let cover = hex_cover(&region, r).unwrap();
        assert_covers(&region, r, &cover.points);
    }
}
