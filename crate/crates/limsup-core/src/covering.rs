//! Ball families: Besicovitch-type extraction, disjoint selection inside an
//! open set, and the asymptotic-covering diagnostic.

use crate::content::RegionSet;
use crate::error::{invalid, Error, Result};
use crate::geometry::{sup_dist, Aabb, Ball};
use crate::ifs::CylinderMeasure;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::{HashMap, HashSet};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndexedBall {
    pub index: u64,
    pub ball: Ball,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct BallFamily {
    balls: Vec<IndexedBall>,
    pub radii_to_zero: bool,
}

impl BallFamily {
    pub fn new(mut balls: Vec<IndexedBall>, radii_to_zero: bool) -> Result<Self> {
        balls.sort_by_key(|b| b.index);
        if let Some(w) = balls.windows(2).find(|w| w[0].index == w[1].index) {
            return Err(invalid(format!("duplicate ball index {}", w[0].index)));
        }
        if let Some(b) = balls.iter().find(|b| !(b.ball.radius() > 0.0)) {
            return Err(invalid(format!("ball {} has non-positive radius", b.index)));
        }
        if let Some(b) = balls.windows(2).find(|w| w[0].ball.dim() != w[1].ball.dim()) {
            return Err(Error::DimensionMismatch { expected: b[0].ball.dim(), got: b[1].ball.dim() });
        }
        Ok(BallFamily { balls, radii_to_zero })
    }

    /// Indices `0, 1, ..` in the given order.
    pub fn from_balls(balls: Vec<Ball>) -> Result<Self> {
        BallFamily::new(
            balls.into_iter().enumerate().map(|(i, ball)| IndexedBall { index: i as u64, ball }).collect(),
            false,
        )
    }

    pub fn balls(&self) -> &[IndexedBall] {
        &self.balls
    }

    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    pub fn get(&self, index: u64) -> Option<&Ball> {
        self.balls.binary_search_by_key(&index, |b| b.index).ok().map(|i| &self.balls[i].ball)
    }

    /// Balls with index in `lo..=hi`.
    pub fn window(&self, lo: u64, hi: u64) -> impl Iterator<Item = &IndexedBall> {
        self.balls.iter().filter(move |b| b.index >= lo && b.index <= hi)
    }
}

fn check_v(v: f64) -> Result<()> {
    if !(v > 0.0 && v <= 1.0) {
        return Err(invalid(format!("v must lie in (0,1], got {v}")));
    }
    Ok(())
}

/// Families of indices whose `(1/v)`-dilates are pairwise disjoint and whose
/// union covers every center of the input.
pub fn besicovitch_families(balls: &BallFamily, v: f64) -> Result<Vec<Vec<u64>>> {
    check_v(v)?;
    let mut order: Vec<&IndexedBall> = balls.balls.iter().collect();
    order.sort_by(|a, b| b.ball.radius().total_cmp(&a.ball.radius()).then(a.index.cmp(&b.index)));
    let mut chosen: Vec<&IndexedBall> = Vec::new();
    for b in order {
        if !chosen.iter().any(|c| c.ball.contains(b.ball.center())) {
            chosen.push(b);
        }
    }
    let mut families: Vec<Vec<&IndexedBall>> = Vec::new();
    for b in chosen {
        let grown = b.ball.dilate(1.0 / v);
        match families.iter_mut().find(|f| f.iter().all(|o| !o.ball.dilate(1.0 / v).intersects(&grown))) {
            Some(f) => f.push(b),
            None => families.push(vec![b]),
        }
    }
    Ok(families.into_iter().map(|f| f.into_iter().map(|b| b.index).collect()).collect())
}

/// Re-checks center coverage and intra-family disjointness exactly.
pub fn verify_families(balls: &BallFamily, v: f64, families: &[Vec<u64>]) -> std::result::Result<(), String> {
    let lookup = |i: u64| balls.get(i).ok_or_else(|| format!("unknown index {i}"));
    let mut used = HashSet::new();
    let mut members = Vec::new();
    for f in families {
        for (a, &i) in f.iter().enumerate() {
            if !used.insert(i) {
                return Err(format!("index {i} appears twice"));
            }
            let bi = lookup(i)?;
            members.push(bi);
            for &j in &f[a + 1..] {
                let bj = lookup(j)?;
                if sup_dist(bi.center(), bj.center()) <= (bi.radius() + bj.radius()) / v {
                    return Err(format!("dilates of {i} and {j} meet"));
                }
            }
        }
    }
    for b in &balls.balls {
        let c = b.ball.center();
        if !members.iter().any(|m| sup_dist(m.center(), c) <= m.radius()) {
            return Err(format!("center of ball {} is not covered", b.index));
        }
    }
    Ok(())
}

/// Volume bound on how many balls with radii in `[rho/2, ratio_max * rho]` and
/// pairwise disjoint `v`-dilates can meet a ball of radius `rho`.
pub fn intersection_bound(d: usize, v: f64, ratio_max: f64) -> f64 {
    (2.0 * (1.0 + 2.0 * ratio_max) / v).powi(d as i32)
}

/// Volume of `ball ∩ union(omega)` equals the volume of the ball.
fn ball_inside(ball: &Aabb, omega: &[Aabb]) -> bool {
    let vol = ball.volume();
    let covered: f64 = omega.iter().filter_map(|c| c.intersection(ball)).map(|x| x.volume()).sum();
    covered >= vol * (1.0 - 1e-9)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Selection {
    pub selected: Vec<u64>,
    /// Sum of lower masses of the selected balls.
    pub selected_mass: f64,
    /// Upper mass of the open set.
    pub omega_mass: f64,
    pub ratio: f64,
}

/// Greedy disjoint family of balls inside `omega` with index `>= g`, heaviest first.
pub fn disjoint_select(balls: &BallFamily, omega: &RegionSet, g: u64, mu: &CylinderMeasure) -> Result<Selection> {
    let boxes: Vec<Aabb> = omega.cubes().iter().map(|c| c.bbox()).collect();
    let omega_mass = mu.union_mass(&boxes).hi;
    if omega_mass <= 0.0 {
        return Err(Error::Precondition("open set carries no mass".into()));
    }
    let hull = omega.hull();
    let mut cands: Vec<(f64, &IndexedBall)> = balls
        .balls
        .iter()
        .filter(|b| b.index >= g)
        .filter(|b| {
            let bb = b.ball.bbox();
            hull.contains(&bb) && ball_inside(&bb, &boxes)
        })
        .map(|b| (mu.ball_mass(&b.ball).lo, b))
        .filter(|(m, _)| *m > 0.0)
        .collect();
    cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.index.cmp(&b.1.index)));

    // Selected balls bucketed on a grid as coarse as the largest candidate.
    let cell = cands.iter().map(|c| 2.0 * c.1.ball.radius()).fold(0.0, f64::max).max(1e-300);
    let key = |x: &[f64]| -> Vec<i64> { x.iter().map(|v| (v / cell).floor() as i64).collect() };
    let mut grid: HashMap<Vec<i64>, Vec<&Ball>> = HashMap::new();
    let mut selected = Vec::new();
    let mut selected_mass = 0.0;
    for (m, b) in cands {
        let k = key(b.ball.center());
        let d = k.len();
        let clash = (0..3usize.pow(d as u32)).any(|mut off| {
            let mut nk = k.clone();
            for x in nk.iter_mut() {
                *x += (off % 3) as i64 - 1;
                off /= 3;
            }
            grid.get(&nk).is_some_and(|v| v.iter().any(|o| !o.interiors_disjoint(&b.ball)))
        });
        if !clash {
            grid.entry(k).or_default().push(&b.ball);
            selected.push(b.index);
            selected_mass += m;
        }
    }
    Ok(Selection { selected, selected_mass, omega_mass, ratio: selected_mass / omega_mass })
}

#[derive(Clone, Debug, Serialize)]
pub struct AcEntry {
    pub omega: usize,
    pub g: u64,
    pub ratio: f64,
    pub selected: Vec<u64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct AcReport {
    pub c: f64,
    pub entries: Vec<AcEntry>,
    pub min_ratio: f64,
    pub pass: bool,
}

/// Runs [`disjoint_select`] on every `(omega, g)` pair; passes iff each ratio reaches `c`.
pub fn mu_ac_check(
    balls: &BallFamily,
    mu: &CylinderMeasure,
    omegas: &[RegionSet],
    gs: &[u64],
    c: f64,
) -> Result<AcReport> {
    if !(c > 0.0 && c <= 1.0) {
        return Err(invalid(format!("C must lie in (0,1], got {c}")));
    }
    let pairs: Vec<(usize, u64)> = (0..omegas.len()).flat_map(|i| gs.iter().map(move |&g| (i, g))).collect();
    let entries = pairs
        .par_iter()
        .map(|&(i, g)| {
            let ratio_of = |s: Selection| (s.ratio, s.selected);
            let (ratio, selected) = match disjoint_select(balls, &omegas[i], g, mu) {
                Ok(s) => ratio_of(s),
                Err(Error::Precondition(_)) => (0.0, Vec::new()),
                Err(e) => return Err(e),
            };
            Ok(AcEntry { omega: i, g, ratio, selected })
        })
        .collect::<Result<Vec<_>>>()?;
    let min_ratio = entries.iter().map(|e| e.ratio).fold(f64::INFINITY, f64::min);
    let min_ratio = if entries.is_empty() { 0.0 } else { min_ratio };
    Ok(AcReport { c, pass: entries.iter().all(|e| e.ratio >= c), min_ratio, entries })
}

/// Lower mass of the union of the `v`-dilates of the balls indexed in `lo..=hi`.
pub fn shrunk_fullness(balls: &BallFamily, mu: &CylinderMeasure, v: f64, lo: u64, hi: u64) -> Result<f64> {
    check_v(v)?;
    let boxes: Vec<Aabb> = balls.window(lo, hi).map(|b| b.ball.dilate(v).bbox()).collect();
    Ok(mu.union_mass(&boxes).lo)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::BadicCube;

    fn ball(c: f64, r: f64) -> Ball {
        Ball::new(vec![c], r).unwrap()
    }

    fn cylinder_family(depth: u32) -> BallFamily {
        let mut balls = Vec::new();
        for k in 1..=depth {
            let side = 3f64.powi(-(k as i32));
            let mut lefts = vec![0u64];
            for _ in 0..k {
                lefts = lefts.iter().flat_map(|c| [3 * c, 3 * c + 2]).collect();
            }
            for c in lefts {
                balls.push(ball((c as f64 + 0.5) * side, side / 2.0));
            }
        }
        BallFamily::from_balls(balls).unwrap()
    }

    #[test]
    fn disjoint_balls_one_family() {
        let f = BallFamily::from_balls(vec![ball(0.1, 0.05), ball(0.5, 0.05), ball(0.9, 0.05)]).unwrap();
        let fams = besicovitch_families(&f, 1.0).unwrap();
        assert_eq!(fams, vec![vec![0, 1, 2]]);
        verify_families(&f, 1.0, &fams).unwrap();
        assert!(besicovitch_families(&f, 0.0).is_err());
        assert!(besicovitch_families(&f, 1.5).is_err());
    }

    #[test]
    fn overlapping_line_balls() {
        let f = BallFamily::from_balls(vec![ball(0.0, 1.0), ball(0.5, 1.0), ball(1.0, 1.0)]).unwrap();
        let fams = besicovitch_families(&f, 1.0).unwrap();
        verify_families(&f, 1.0, &fams).unwrap();
        assert_eq!(fams, vec![vec![0]]);
    }

    #[test]
    fn verifier_rejects_bad_families() {
        let f = BallFamily::from_balls(vec![ball(0.0, 1.0), ball(0.5, 1.0), ball(3.0, 0.1)]).unwrap();
        assert!(verify_families(&f, 1.0, &[vec![0, 1], vec![2]]).is_err());
        assert!(verify_families(&f, 1.0, &[vec![0]]).is_err());
    }

    #[test]
    fn cylinders_fill_cantor_support() {
        let mu = CylinderMeasure::cantor(14);
        let omega = RegionSet::new(vec![BadicCube::root(3, 1)]).unwrap();
        let fam = cylinder_family(5);
        let sel = disjoint_select(&fam, &omega, 0, &mu).unwrap();
        assert!((sel.ratio - 1.0).abs() < 1e-12);
    }

    #[test]
    fn far_balls_select_nothing() {
        let mu = CylinderMeasure::lebesgue(2, 1, 12).unwrap();
        let omega = RegionSet::new(vec![BadicCube::root(2, 1)]).unwrap();
        let fam = BallFamily::from_balls(vec![ball(2.5, 0.5), ball(2.2, 0.1)]).unwrap();
        let sel = disjoint_select(&fam, &omega, 0, &mu).unwrap();
        assert!(sel.selected.is_empty() && sel.ratio == 0.0);
    }

    #[test]
    fn dyadic_cells_in_half() {
        let k = 5;
        let side = 2f64.powi(-k);
        let mu = CylinderMeasure::lebesgue(2, 1, 14).unwrap();
        let fam = BallFamily::from_balls((0..1 << k).map(|i| ball((i as f64 + 0.5) * side, side / 2.0)).collect()).unwrap();
        let omega = RegionSet::new(vec![BadicCube::new(2, 1, vec![0]).unwrap()]).unwrap();
        let sel = disjoint_select(&fam, &omega, 0, &mu).unwrap();
        assert!(sel.ratio >= 1.0 - 2.0 * side / 0.5);
        assert_eq!(sel.selected.len(), 16);
    }

    #[test]
    fn ac_examples() {
        let mu = CylinderMeasure::cantor(14);
        let fam = cylinder_family(6);
        let mut omegas = Vec::new();
        for k in 0..=3u32 {
            let mut lefts = vec![0u64];
            for _ in 0..k {
                lefts = lefts.iter().flat_map(|c| [3 * c, 3 * c + 2]).collect();
            }
            for c in lefts {
                omegas.push(RegionSet::new(vec![BadicCube::new(3, k, vec![c]).unwrap()]).unwrap());
            }
        }
        let rep = mu_ac_check(&fam, &mu, &omegas, &[0, 10], 0.9).unwrap();
        assert!(rep.pass, "{}", rep.min_ratio);
        let wide = BallFamily::from_balls(vec![ball(0.5, 0.45), ball(0.45, 0.41)]).unwrap();
        let leb = CylinderMeasure::lebesgue(2, 1, 12).unwrap();
        let small = vec![RegionSet::new(vec![BadicCube::new(2, 3, vec![3]).unwrap()]).unwrap()];
        assert!(!mu_ac_check(&wide, &leb, &small, &[0], 0.1).unwrap().pass);
    }

    fn cantor_cdf(mut x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let mut acc = 0.0;
        let mut w = 0.5;
        for _ in 0..60 {
            x *= 3.0;
            let d = x.floor();
            x -= d;
            if d == 1.0 {
                return acc + w;
            }
            acc += (d / 2.0) * w;
            w /= 2.0;
        }
        acc
    }

    #[test]
    fn fullness_examples() {
        let mu = CylinderMeasure::cantor(22);
        let fam = cylinder_family(8);
        let v = shrunk_fullness(&fam, &mu, 0.5, 0, u64::MAX).unwrap();
        let mut iv: Vec<(f64, f64)> = fam
            .balls()
            .iter()
            .map(|b| (b.ball.center()[0] - b.ball.radius() / 2.0, b.ball.center()[0] + b.ball.radius() / 2.0))
            .collect();
        iv.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut merged: Vec<(f64, f64)> = Vec::new();
        for (a, b) in iv {
            match merged.last_mut() {
                Some(last) if a <= last.1 => last.1 = last.1.max(b),
                _ => merged.push((a, b)),
            }
        }
        let oracle: f64 = merged.iter().map(|(a, b)| cantor_cdf(*b) - cantor_cdf(*a)).sum();
        assert!(v <= oracle + 1e-12 && oracle - v < 1e-3, "{v} vs {oracle}");
        assert_eq!(shrunk_fullness(&fam, &mu, 0.5, 5, 4).unwrap(), 0.0);
    }
}
