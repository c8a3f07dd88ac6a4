use limsup_core::content::{concavity_check, content_upper, frostman_lower, RegionSet};
use limsup_core::covering::{besicovitch_families, intersection_bound, mu_ac_check, verify_families, BallFamily};
use limsup_core::formulas::{mahler_bound, rect_bound};
use limsup_core::geometry::{badic_cover, engulf_check, shrink_ball, sup_dist, AnisoRect, BadicCube, Ball, Region};
use limsup_core::ifs::CylinderMeasure;
use proptest::prelude::*;

fn cubes_from_mask(d: usize, level: u32, mask: &[bool]) -> Option<RegionSet> {
    let n = 1u64 << level;
    let cubes: Vec<BadicCube> = mask
        .iter()
        .enumerate()
        .filter(|(_, m)| **m)
        .map(|(i, _)| {
            let i = i as u64;
            BadicCube::new(2, level, (0..d).map(|j| (i / n.pow(j as u32)) % n).collect()).unwrap()
        })
        .collect();
    (!cubes.is_empty()).then(|| RegionSet::new(cubes).unwrap())
}

fn region_set() -> impl Strategy<Value = (usize, u32, Vec<bool>)> {
    (1usize..=2, 1u32..=3).prop_flat_map(|(d, level)| {
        let cells = 1usize << (level as usize * d);
        (Just(d), Just(level), prop::collection::vec(any::<bool>(), cells))
    })
}

fn ball_1d() -> impl Strategy<Value = Ball> {
    (0.0f64..1.0, 0.005f64..0.3).prop_map(|(c, r)| Ball::new(vec![c], r).unwrap())
}

fn ball_2d() -> impl Strategy<Value = Ball> {
    (0.0f64..1.0, 0.0f64..1.0, 0.005f64..0.3).prop_map(|(x, y, r)| Ball::new(vec![x, y], r).unwrap())
}

/// Minimum of `sum |Q|^s` over every set of tree cubes that covers `set`, by exhaustion.
fn brute_force_content(set: &RegionSet, s: f64, level: u32) -> f64 {
    let d = set.cubes()[0].dim();
    let mut tree = Vec::new();
    for l in 0..=level {
        let n = 1u64 << l;
        for i in 0..n.pow(d as u32) {
            tree.push(BadicCube::new(2, l, (0..d).map(|j| (i / n.pow(j as u32)) % n).collect()).unwrap());
        }
    }
    assert!(tree.len() <= 20);
    let targets: Vec<&BadicCube> = set.cubes().iter().collect();
    let mut best = f64::INFINITY;
    for mask in 1u32..(1 << tree.len()) {
        let chosen: Vec<&BadicCube> = tree.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, c)| c).collect();
        if targets.iter().all(|t| chosen.iter().any(|c| c.contains_cube(t))) {
            let cost: f64 = chosen.iter().map(|c| c.side().powf(s)).sum();
            best = best.min(cost);
        }
    }
    best
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn content_monotone((d, level, mask) in region_set(), keep in prop::collection::vec(any::<bool>(), 64), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let Some(big) = cubes_from_mask(d, level, &mask) else { return Ok(()) };
        let (s1, s2) = (d as f64 * a.min(b), d as f64 * a.max(b));
        let h1 = content_upper(&big, s1, level).unwrap().value;
        let h2 = content_upper(&big, s2, level).unwrap().value;
        prop_assert!(h2 <= h1 * (1.0 + 1e-12));
        let sub: Vec<bool> = mask.iter().zip(keep.iter().cycle()).map(|(m, k)| *m && *k).collect();
        if let Some(small) = cubes_from_mask(d, level, &sub) {
            prop_assert!(content_upper(&small, s1, level).unwrap().value <= h1 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn content_matches_exhaustive_covers(mask in prop::collection::vec(any::<bool>(), 8), s in 0.0f64..=1.0) {
        let Some(set) = cubes_from_mask(1, 3, &mask) else { return Ok(()) };
        let dp = content_upper(&set, s, 3).unwrap().value;
        let oracle = brute_force_content(&set, s, 3);
        prop_assert!((dp - oracle).abs() <= 1e-12 * oracle.max(1.0), "dp {} oracle {}", dp, oracle);
    }

    #[test]
    fn frostman_certificate((d, level, mask) in region_set(), frac in 0.05f64..1.0) {
        let Some(set) = cubes_from_mask(d, level, &mask) else { return Ok(()) };
        let s = frac * d as f64;
        let f = frostman_lower(&set, s, level + 2).unwrap();
        prop_assert!(f.max_ratio <= 1.0 + 1e-9);
        let up = content_upper(&set, s, level + 2).unwrap().value;
        prop_assert!((f.total - up).abs() <= 1e-12 * up.max(1.0));
        prop_assert!(f.lower <= up);
    }

    #[test]
    fn besicovitch_families_verify(balls in prop::collection::vec(ball_2d(), 1..40), v in 0.2f64..=1.0) {
        let fam = BallFamily::from_balls(balls).unwrap();
        let families = besicovitch_families(&fam, v).unwrap();
        prop_assert!(verify_families(&fam, v, &families).is_ok());
    }

    #[test]
    fn concavity((d, level, mask) in region_set(), frac in 0.05f64..=1.0, delta in 1.0f64..3.0) {
        let Some(set) = cubes_from_mask(d, level, &mask) else { return Ok(()) };
        let mu = CylinderMeasure::lebesgue(2, d, 12).unwrap();
        let rep = concavity_check(&set, &mu, frac * d as f64, delta, level + 2).unwrap();
        prop_assert!(rep.pass, "{:?}", rep);
    }

    #[test]
    fn mu_ac_monotone_in_c(balls in prop::collection::vec(ball_1d(), 1..30), mask in prop::collection::vec(any::<bool>(), 4), c1 in 0.01f64..=1.0, c2 in 0.01f64..=1.0) {
        let Some(omega) = cubes_from_mask(1, 2, &mask) else { return Ok(()) };
        let fam = BallFamily::from_balls(balls).unwrap();
        let mu = CylinderMeasure::lebesgue(2, 1, 20).unwrap();
        let (lo, hi) = (c1.min(c2), c1.max(c2));
        let a = mu_ac_check(&fam, &mu, std::slice::from_ref(&omega), &[0, 5], lo).unwrap();
        let b = mu_ac_check(&fam, &mu, std::slice::from_ref(&omega), &[0, 5], hi).unwrap();
        prop_assert!(!b.pass || a.pass);
        prop_assert_eq!(a.min_ratio, b.min_ratio);
    }

    #[test]
    fn intersection_count_within_bound(x in 0.3f64..0.7, y in 0.3f64..0.7, rho in 0.01f64..0.05, ratio in 1.0f64..3.0, v in 0.2f64..=1.0,
                                       raw in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0, 0.0f64..1.0), 1..80)) {
        let a = Ball::new(vec![x, y], rho).unwrap();
        let mut kept: Vec<Ball> = Vec::new();
        for (dx, dy, t) in raw {
            let r = rho * (0.5 + t * (ratio - 0.5));
            let reach = rho + r;
            let b = Ball::new(vec![x + dx * reach, y + dy * reach], r).unwrap();
            if b.intersects(&a) && kept.iter().all(|k| sup_dist(k.center(), b.center()) > v * (k.radius() + b.radius())) {
                kept.push(b);
            }
        }
        prop_assert!(kept.len() as f64 <= intersection_bound(2, v, ratio));
    }

    #[test]
    fn shrink_diameter_identity(c in 0.0f64..1.0, r in 1e-4f64..=1.0, delta in 1.0f64..4.0) {
        let b = Ball::new(vec![c], r).unwrap();
        let s = shrink_ball(&b, delta).unwrap();
        prop_assert!((s.diameter() - 2.0 * (b.diameter() / 2.0).powf(delta)).abs() <= 1e-15);
        prop_assert!(b.contains_ball(&s));
    }

    #[test]
    fn badic_cover_is_a_covering_antichain(b in ball_2d(), base in 2u32..=4, level in 0u32..=4) {
        let Some(clip) = b.bbox().intersection(&limsup_core::geometry::Aabb::unit(2)) else { return Ok(()) };
        let center: Vec<f64> = clip.lo.iter().zip(&clip.hi).map(|(l, h)| 0.5 * (l + h)).collect();
        let half = clip.lo.iter().zip(&clip.hi).map(|(l, h)| 0.5 * (h - l)).fold(f64::INFINITY, f64::min).max(1e-6);
        let region = Region::Ball(Ball::new(center.clone(), half).unwrap());
        let cover = badic_cover(&region, base, level).unwrap();
        prop_assert!(!cover.is_empty());
        for (i, q) in cover.iter().enumerate() {
            prop_assert_eq!(q.level, level);
            prop_assert!(q.bbox().intersects(&region.bbox()));
            for o in &cover[i + 1..] {
                prop_assert!(!q.contains_cube(o) && !o.contains_cube(q) && q != o);
            }
        }
        prop_assert!(cover.iter().any(|q| q.bbox().contains_point(&center)));
    }

    #[test]
    fn isotropic_rect_is_ball(x in 0.2f64..0.8, y in 0.2f64..0.8, r in 0.01f64..0.4) {
        let rect = AnisoRect::new(vec![x, y], r, vec![1.0, 1.0]).unwrap();
        let ball = Ball::new(vec![x, y], r / 2.0).unwrap();
        prop_assert_eq!(rect.bbox(), ball.bbox());
    }

    #[test]
    fn engulfing(a in ball_2d(), b in ball_2d(), q in 3.0f64..6.0) {
        if let Ok(res) = engulf_check(&a, &b, q) {
            prop_assert!(res);
        }
    }

    #[test]
    fn rect_bound_between_extremes(dim in 0.1f64..3.0, t1 in 1.0f64..3.0, steps in prop::collection::vec(0.0f64..2.0, 0..3)) {
        let mut tau = vec![t1];
        for s in steps {
            tau.push(tau.last().unwrap() + s);
        }
        let v = rect_bound(dim, &tau).unwrap().value;
        prop_assert!(v <= dim / t1 + 1e-12);
        prop_assert!(v >= dim / tau.last().unwrap() - 1e-12);
        let flat = rect_bound(dim, &vec![t1; tau.len()]).unwrap().value;
        prop_assert!((flat - dim / t1).abs() <= 1e-12);
    }

    #[test]
    fn mahler_bound_monotone(a in 1.0f64..5.0, b in 1.0f64..5.0) {
        let (lo, hi) = (a.min(b), a.max(b));
        prop_assert!(mahler_bound(hi).unwrap().value <= mahler_bound(lo).unwrap().value);
    }
}
