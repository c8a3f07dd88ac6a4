//! Finite stages of limsup sets and box counting.

use crate::content::{Class, CubeSet, RegionSet};
use crate::covering::{BallFamily, IndexedBall};
use crate::error::{invalid, Error, Result};
use crate::fit::least_squares;
use crate::geometry::{grid_size, le, Aabb, AnisoRect, BadicCube, Ball};
use crate::ifs::{Ifs, Word};
use rayon::prelude::*;
use serde::Serialize;
use std::ops::RangeInclusive;

/// `B(p/q, q^{-2 delta})` for `1 <= q <= q_max`, `0 <= p <= q`, ordered by `(q, p)`.
pub fn rational_balls(q_max: u64, delta: f64) -> Result<BallFamily> {
    rational_window(1, q_max, delta)
}

/// As [`rational_balls`] restricted to `q_lo <= q <= q_hi`; indices stay global.
pub fn rational_window(q_lo: u64, q_hi: u64, delta: f64) -> Result<BallFamily> {
    if q_lo == 0 || q_hi < q_lo {
        return Err(invalid(format!("bad denominator range [{q_lo}, {q_hi}]")));
    }
    if !(delta > 0.0) {
        return Err(invalid("delta must be positive"));
    }
    let mut balls = Vec::new();
    for q in q_lo..=q_hi {
        let r = (q as f64).powf(-2.0 * delta);
        let first = rational_index(q);
        for p in 0..=q {
            balls.push(IndexedBall { index: first + p, ball: Ball::new(vec![p as f64 / q as f64], r)? });
        }
    }
    BallFamily::new(balls, true)
}

/// Index of `B(0/q, .)` in [`rational_balls`].
pub fn rational_index(q: u64) -> u64 {
    (q - 1) * (q + 2) / 2
}

fn words_up_to(m: usize, depth: u32) -> Vec<Word> {
    let mut out = Vec::new();
    let mut layer = vec![Word::empty()];
    for _ in 0..depth {
        layer = layer
            .iter()
            .flat_map(|w| {
                (0..m).map(move |i| {
                    let mut v = w.0.clone();
                    v.push(i);
                    Word(v)
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// `B(f_w(x), c_w^delta)` for all words with `1 <= |w| <= depth`, shortest first.
pub fn shrinking_targets(ifs: &Ifs, x: &[f64], delta: f64, depth: u32) -> Result<BallFamily> {
    if x.len() != ifs.dim() {
        return Err(Error::DimensionMismatch { expected: ifs.dim(), got: x.len() });
    }
    if !(delta >= 1.0) {
        return Err(invalid(format!("delta must be >= 1, got {delta}")));
    }
    let balls = words_up_to(ifs.len(), depth)
        .iter()
        .map(|w| Ball::new(w.apply(ifs, x), w.ratio(ifs).powf(delta)))
        .collect::<Result<Vec<_>>>()?;
    let mut fam = BallFamily::from_balls(balls)?;
    fam.radii_to_zero = true;
    Ok(fam)
}

/// Balls circumscribing the cylinder hulls `f_w([0,1]^d)`, `1 <= |w| <= depth`.
pub fn cylinder_balls(ifs: &Ifs, depth: u32) -> Result<BallFamily> {
    let balls = words_up_to(ifs.len(), depth)
        .iter()
        .map(|w| {
            let h = w.hull(ifs);
            let c: Vec<f64> = h.lo.iter().zip(&h.hi).map(|(a, b)| 0.5 * (a + b)).collect();
            Ball::new(c, 0.5 * h.diameter())
        })
        .collect::<Result<Vec<_>>>()?;
    let mut fam = BallFamily::from_balls(balls)?;
    fam.radii_to_zero = true;
    Ok(fam)
}

/// The sequence `eps_q` bounding digit frequencies.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub enum EpsSeq {
    /// `scale / ln(3 + q)`.
    InvLog { scale: f64 },
    /// Explicit values for `q = 1, 2, ..`; the last one repeats.
    Table(Vec<f64>),
}

impl Default for EpsSeq {
    fn default() -> Self {
        EpsSeq::InvLog { scale: 1.0 }
    }
}

impl EpsSeq {
    pub fn validate(&self) -> Result<()> {
        match self {
            EpsSeq::InvLog { scale } if *scale > 0.0 => Ok(()),
            EpsSeq::InvLog { .. } => Err(invalid("eps scale must be positive")),
            EpsSeq::Table(v) => {
                if v.is_empty() || v.iter().any(|e| !(*e > 0.0)) {
                    return Err(invalid("eps values must be positive"));
                }
                if v.windows(2).any(|w| w[1] > w[0]) {
                    return Err(invalid("eps values must be non-increasing"));
                }
                Ok(())
            }
        }
    }

    pub fn at(&self, q: u64) -> f64 {
        match self {
            EpsSeq::InvLog { scale } => scale / (3.0 + q as f64).ln(),
            EpsSeq::Table(v) => v[(q.max(1) as usize - 1).min(v.len() - 1)],
        }
    }
}

/// `F_T(Omega_N)` inside `B(p/q, q^{-2 delta})`: the generation-`N` Cantor
/// intervals rescaled into a triadic interval `T` of generation `n_q`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MahlerTarget {
    pub p: u64,
    pub q: u64,
    pub delta: f64,
    pub eps: f64,
    /// Generation of `T`.
    pub n: u32,
    /// `T = [t / 3^n, (t+1) / 3^n]`.
    pub t: u64,
    /// Number of digits 1 among the `n` ternary digits of `T`.
    pub ones: u32,
    /// Extra Cantor generations.
    pub extra: u32,
}

const MAX_TRIADIC_LEVEL: u32 = 39;

fn ternary_ones(mut t: u64, n: u32) -> u32 {
    let mut ones = 0;
    for _ in 0..n {
        ones += (t % 3 == 1) as u32;
        t /= 3;
    }
    ones
}

impl MahlerTarget {
    pub fn new(p: u64, q: u64, delta: f64, eps: f64) -> Result<Option<Self>> {
        if q == 0 || p > q {
            return Err(invalid(format!("need 0 <= p <= q and q >= 1, got {p}/{q}")));
        }
        if !(delta >= 1.0) || !(eps > 0.0) {
            return Err(invalid("need delta >= 1 and eps > 0"));
        }
        let n = ((2.0 * delta * (q as f64).ln() / 3f64.ln()) + 1e-12).floor() as u32 + 1;
        if n > MAX_TRIADIC_LEVEL {
            return Err(invalid(format!("generation {n} exceeds the triadic grid limit")));
        }
        let ball = Ball::new(vec![p as f64 / q as f64], (q as f64).powf(-2.0 * delta))?;
        let bb = ball.bbox().intersection(&Aabb::unit(1)).expect("center lies in [0,1]");
        let size = 3u64.pow(n) as f64;
        let t = (bb.lo[0] * size - 1e-9).ceil().max(0.0) as u64;
        if !le((t + 1) as f64 / size, bb.hi[0]) {
            return Ok(None);
        }
        let ones = ternary_ones(t, n);
        let mut extra = ((ones as f64 / eps) - n as f64).ceil().max(0.0) as u32;
        while extra > 0 && ones as f64 <= eps * (n + extra - 1) as f64 {
            extra -= 1;
        }
        while (ones as f64) > eps * (n + extra) as f64 {
            extra += 1;
        }
        Ok(Some(MahlerTarget { p, q, delta, eps, n, t, ones, extra }))
    }

    pub fn ball(&self) -> Ball {
        Ball::new(vec![self.p as f64 / self.q as f64], (self.q as f64).powf(-2.0 * self.delta)).unwrap()
    }

    pub fn interval(&self) -> BadicCube {
        BadicCube { base: 3, level: self.n, coords: vec![self.t] }
    }

    /// Digit-1 frequency of every point of the target at horizon `n + N`.
    pub fn frequency(&self) -> f64 {
        self.ones as f64 / (self.n + self.extra) as f64
    }

    /// Cells of the first `min(N, max_extra)` Cantor generations inside `T`; a superset of the target.
    pub fn cells(&self, max_extra: u32) -> Vec<BadicCube> {
        let extra = self.extra.min(max_extra).min(MAX_TRIADIC_LEVEL - self.n);
        let mut coords = vec![self.t];
        for _ in 0..extra {
            coords = coords.iter().flat_map(|c| [3 * c, 3 * c + 2]).collect();
        }
        coords.into_iter().map(|c| BadicCube { base: 3, level: self.n + extra, coords: vec![c] }).collect()
    }

    /// The target as explicit triadic cells, when it has at most `max_cells` of them.
    pub fn to_region_set(&self, max_cells: usize) -> Result<RegionSet> {
        let level = self.n + self.extra;
        if level > MAX_TRIADIC_LEVEL || (self.extra < 64 && (1usize << self.extra) > max_cells) {
            return Err(Error::Budget(format!("target has 2^{} cells at level {level}", self.extra)));
        }
        RegionSet::new(self.cells(self.extra))
    }
}

impl CubeSet for MahlerTarget {
    fn base(&self) -> u32 {
        3
    }

    fn dim(&self) -> usize {
        1
    }

    fn classify(&self, q: &BadicCube) -> Class {
        if q.base != 3 || q.dim() != 1 {
            return Class::Empty;
        }
        let l = q.level;
        let full_at = self.n + self.extra;
        if l <= self.n {
            return if self.interval().ancestor(l) != *q {
                Class::Empty
            } else if l == full_at {
                Class::Full
            } else {
                Class::Partial
            };
        }
        if q.ancestor(self.n).coords[0] != self.t {
            return Class::Empty;
        }
        let c = q.coords[0];
        for j in (self.n + 1)..=l.min(full_at) {
            if (c / 3u64.pow(l - j)) % 3 == 1 {
                return Class::Empty;
            }
        }
        if l >= full_at {
            Class::Full
        } else {
            Class::Partial
        }
    }

    fn class_key(&self, _q: &BadicCube) -> Option<u64> {
        // partial cubes at one level are translates of each other
        Some(0)
    }
}

/// Placed targets and the `(p, q)` pairs that were skipped.
pub type MahlerStage = (Vec<MahlerTarget>, Vec<(u64, u64)>);

/// One target per `(p, q)` with `q <= q_max`; pairs where no triadic interval fits are returned separately.
pub fn mahler_targets(q_max: u64, delta: f64, eps: &EpsSeq) -> Result<MahlerStage> {
    eps.validate()?;
    let mut targets = Vec::new();
    let mut skipped = Vec::new();
    for q in 1..=q_max {
        for p in 0..=q {
            match MahlerTarget::new(p, q, delta, eps.at(q))? {
                Some(t) => targets.push(t),
                None => skipped.push((p, q)),
            }
        }
    }
    Ok((targets, skipped))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum StageRegion {
    Ball(Ball),
    Rect(AnisoRect),
    Cubes(Vec<BadicCube>),
}

impl StageRegion {
    fn dim(&self) -> usize {
        match self {
            StageRegion::Ball(b) => b.dim(),
            StageRegion::Rect(r) => r.center().len(),
            StageRegion::Cubes(c) => c.first().map_or(0, |c| c.dim()),
        }
    }

    /// Level-`level` cells whose interior meets the region, clipped to the unit cube.
    fn cells(&self, base: u32, level: u32, n: u64) -> Vec<Vec<u64>> {
        let boxes = match self {
            StageRegion::Ball(b) => b.bbox(),
            StageRegion::Rect(r) => r.bbox(),
            StageRegion::Cubes(cubes) => {
                let mut out = Vec::new();
                for c in cubes {
                    if c.base == base && c.level >= level {
                        out.push(c.ancestor(level).coords);
                    } else {
                        out.extend(cells_of_box(&c.bbox(), n));
                    }
                }
                return out;
            }
        };
        cells_of_box(&boxes, n)
    }
}

fn cells_of_box(b: &Aabb, n: u64) -> Vec<Vec<u64>> {
    let nf = n as f64;
    let ranges: Vec<(u64, u64)> = b
        .lo
        .iter()
        .zip(&b.hi)
        .map(|(&lo, &hi)| {
            let a = (lo * nf).floor().max(0.0);
            let z = ((hi * nf).ceil() - 1.0).min(nf - 1.0);
            if z < a {
                (1, 0)
            } else {
                (a as u64, z as u64)
            }
        })
        .collect();
    if ranges.iter().any(|(a, z)| z < a) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur: Vec<u64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(cur.clone());
        let mut i = cur.len();
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < ranges[i].1 {
                cur[i] += 1;
                for (j, r) in ranges.iter().enumerate().skip(i + 1) {
                    cur[j] = r.0;
                }
                break;
            }
        }
    }
}

/// A finite union of regions standing in for `limsup U_n` over an index window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LimsupStage {
    pub window: (u64, u64),
    pub regions: Vec<StageRegion>,
    pub generator_id: String,
    pub params: serde_json::Value,
}

impl LimsupStage {
    pub fn from_balls(fam: &BallFamily, generator_id: &str, params: serde_json::Value) -> Self {
        let lo = fam.balls().first().map_or(0, |b| b.index);
        let hi = fam.balls().last().map_or(0, |b| b.index);
        LimsupStage {
            window: (lo, hi),
            regions: fam.balls().iter().map(|b| StageRegion::Ball(b.ball.clone())).collect(),
            generator_id: generator_id.to_string(),
            params,
        }
    }

    pub fn from_region_set(set: &RegionSet, generator_id: &str) -> Self {
        LimsupStage {
            window: (0, 0),
            regions: vec![StageRegion::Cubes(set.cubes().to_vec())],
            generator_id: generator_id.to_string(),
            params: serde_json::Value::Null,
        }
    }
}

const CELL_BUDGET: usize = 50_000_000;

/// Number of level-`level` cells whose interior meets the union of the stage.
pub fn count_cells(stage: &LimsupStage, base: u32, level: u32) -> Result<u64> {
    if stage.regions.is_empty() {
        return Err(Error::Empty("stage has no regions".into()));
    }
    let n = grid_size(base, level).ok_or_else(|| invalid(format!("level {level} too deep for base {base}")))?;
    let d = stage.regions[0].dim();
    if stage.regions.iter().any(|r| r.dim() != d) {
        return Err(invalid("stage mixes dimensions"));
    }
    let mut cells: Vec<Vec<u64>> = stage.regions.par_iter().flat_map_iter(|r| r.cells(base, level, n)).collect();
    if cells.len() > CELL_BUDGET {
        return Err(Error::Budget(format!("{} cells exceed the budget", cells.len())));
    }
    cells.par_sort_unstable();
    cells.dedup();
    Ok(cells.len() as u64)
}

#[derive(Clone, Debug, Serialize)]
pub struct BoxCount {
    pub slope: f64,
    pub r_squared: f64,
    /// `(level, N)` pairs.
    pub counts: Vec<(u32, u64)>,
}

/// Least-squares slope of `log N_k` against `k log b`.
pub fn boxcount_dimension(stage: &LimsupStage, base: u32, levels: RangeInclusive<u32>) -> Result<BoxCount> {
    let levels: Vec<u32> = levels.collect();
    if levels.len() < 4 {
        return Err(invalid(format!("box counting needs at least 4 levels, got {}", levels.len())));
    }
    let counts = levels.iter().map(|&k| Ok((k, count_cells(stage, base, k)?))).collect::<Result<Vec<_>>>()?;
    if counts.iter().any(|c| c.1 == 0) {
        return Err(Error::Empty("stage misses the unit cube at some level".into()));
    }
    let lb = (base as f64).ln();
    let xs: Vec<f64> = counts.iter().map(|c| c.0 as f64 * lb).collect();
    let ys: Vec<f64> = counts.iter().map(|c| (c.1 as f64).ln()).collect();
    let fit = least_squares(&xs, &ys)?;
    Ok(BoxCount { slope: fit.slope, r_squared: fit.r_squared, counts })
}

#[derive(Clone, Debug, Serialize)]
pub struct MatchedScale {
    pub q_lo: u64,
    pub q_hi: u64,
    pub delta: f64,
    pub level: u32,
    pub count: u64,
    /// `log N / log(1/eps)` with `eps = 2^-level`.
    pub ratio: f64,
}

/// Box count of the rational window `[q, 2q]` at the dyadic level closest to `q^{-2 delta}`.
pub fn jarnik_matched(q: u64, delta: f64) -> Result<MatchedScale> {
    let fam = rational_window(q, 2 * q, delta)?;
    let level = (2.0 * delta * (q as f64).log2()).round() as u32;
    let stage = LimsupStage::from_balls(&fam, "rational", serde_json::json!({ "q": q, "delta": delta }));
    let count = count_cells(&stage, 2, level)?;
    Ok(MatchedScale {
        q_lo: q,
        q_hi: 2 * q,
        delta,
        level,
        count,
        ratio: (count as f64).ln() / (level as f64 * 2f64.ln()),
    })
}
