//! Hausdorff content over b-adic covers.
//!
//! A set is anything implementing [`CubeSet`]: given a b-adic cube it says
//! whether the cube is full, empty or partially filled. The optimum over
//! b-adic antichain covers is the tree recursion
//! `cost(Q) = min(|Q|^s, sum cost(children))`, evaluated lazily, with
//! memoization for subtrees a set declares translation-equivalent.
//!
//! Cubes count as meeting a set when their interior does. For closed sets
//! with null boundary this is still a cover of the closed set.

use crate::error::{invalid, Error, Result};
use crate::geometry::{grid_size, Aabb, AnisoRect, BadicCube, Region};
use crate::ifs::CylinderMeasure;
use serde::Serialize;
use std::collections::{HashMap, HashSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Class {
    Empty,
    Full,
    Partial,
}

pub trait CubeSet: Sync {
    fn base(&self) -> u32;
    fn dim(&self) -> usize;
    fn classify(&self, q: &BadicCube) -> Class;
    /// Partial cubes with equal `(level, key)` must have translation-equivalent contents.
    fn class_key(&self, _q: &BadicCube) -> Option<u64> {
        None
    }
    /// Deepest level at which the set still has structure, if bounded.
    fn resolution(&self) -> Option<u32> {
        None
    }
}

/// Finite union of interior-disjoint b-adic cubes.
#[derive(Clone, Debug)]
pub struct RegionSet {
    base: u32,
    dim: usize,
    cubes: Vec<BadicCube>,
    members: HashSet<BadicCube>,
    ancestors: HashSet<BadicCube>,
    deepest: u32,
}

impl RegionSet {
    pub fn new(mut cubes: Vec<BadicCube>) -> Result<Self> {
        let first = cubes.first().ok_or_else(|| Error::Empty("region set has no cubes".into()))?;
        let (base, dim) = (first.base, first.dim());
        if let Some(c) = cubes.iter().find(|c| c.base != base || c.dim() != dim) {
            return Err(invalid(format!(
                "mixed grids: base {} dim {} vs base {base} dim {dim}",
                c.base,
                c.dim()
            )));
        }
        cubes.sort();
        cubes.dedup();
        let members: HashSet<BadicCube> = cubes.iter().cloned().collect();
        let mut ancestors = HashSet::new();
        for c in &cubes {
            for lvl in 0..c.level {
                let a = c.ancestor(lvl);
                if members.contains(&a) {
                    return Err(invalid(format!("cubes overlap: {a:?} contains {c:?}")));
                }
                ancestors.insert(a);
            }
        }
        let deepest = cubes.iter().map(|c| c.level).max().unwrap_or(0);
        Ok(RegionSet { base, dim, cubes, members, ancestors, deepest })
    }

    /// All level-`level` cubes whose interior meets the closed region.
    pub fn from_region(region: &Region, base: u32, level: u32) -> Result<Self> {
        let bb = region.bbox();
        let cubes: Vec<BadicCube> = crate::geometry::badic_cover(region, base, level)?
            .into_iter()
            .filter(|c| c.bbox().overlaps_interior(&bb) || bb.diameter() == 0.0)
            .collect();
        RegionSet::new(cubes)
    }

    /// Generation-`k` triadic Cantor intervals.
    pub fn cantor(k: u32) -> Result<Self> {
        let n = grid_size(3, k).ok_or_else(|| invalid("Cantor depth too large"))?;
        let mut coords = vec![0u64];
        for _ in 0..k {
            coords = coords.iter().flat_map(|c| [3 * c, 3 * c + 2]).collect();
        }
        debug_assert!(coords.iter().all(|&c| c < n));
        RegionSet::new(coords.into_iter().map(|c| BadicCube { base: 3, level: k, coords: vec![c] }).collect())
    }

    pub fn cubes(&self) -> &[BadicCube] {
        &self.cubes
    }

    pub fn deepest_level(&self) -> u32 {
        self.deepest
    }

    pub fn volume(&self) -> f64 {
        self.cubes.iter().map(|c| c.bbox().volume()).sum()
    }

    pub fn hull(&self) -> Aabb {
        let d = self.dim;
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for c in &self.cubes {
            let b = c.bbox();
            for i in 0..d {
                lo[i] = lo[i].min(b.lo[i]);
                hi[i] = hi[i].max(b.hi[i]);
            }
        }
        Aabb::new(lo, hi)
    }

    pub fn contains_set(&self, other: &RegionSet) -> bool {
        other.cubes.iter().all(|c| self.classify(c) == Class::Full)
    }
}

impl CubeSet for RegionSet {
    fn base(&self) -> u32 {
        self.base
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn classify(&self, q: &BadicCube) -> Class {
        if q.base != self.base {
            return Class::Empty;
        }
        if (0..=q.level.min(self.deepest)).any(|l| self.members.contains(&q.ancestor(l))) {
            Class::Full
        } else if self.ancestors.contains(q) {
            Class::Partial
        } else {
            Class::Empty
        }
    }

    fn resolution(&self) -> Option<u32> {
        Some(self.deepest)
    }
}

/// Union of closed boxes, classified geometrically.
#[derive(Clone, Debug)]
pub struct BoxSet {
    base: u32,
    boxes: Vec<Aabb>,
}

impl BoxSet {
    pub fn new(boxes: Vec<Aabb>, base: u32) -> Result<Self> {
        let first = boxes.first().ok_or_else(|| Error::Empty("box set has no boxes".into()))?;
        let d = first.dim();
        if let Some(b) = boxes.iter().find(|b| b.dim() != d) {
            return Err(Error::DimensionMismatch { expected: d, got: b.dim() });
        }
        if let Some(b) = boxes.iter().find(|b| !b.within_unit()) {
            return Err(Error::OutsideUnitCube { lo: b.lo.clone(), hi: b.hi.clone() });
        }
        if base < 2 {
            return Err(invalid("base must be >= 2"));
        }
        Ok(BoxSet { base, boxes })
    }

    pub fn region(region: &Region, base: u32) -> Result<Self> {
        BoxSet::new(vec![region.bbox()], base)
    }

    pub fn boxes(&self) -> &[Aabb] {
        &self.boxes
    }
}

impl CubeSet for BoxSet {
    fn base(&self) -> u32 {
        self.base
    }

    fn dim(&self) -> usize {
        self.boxes[0].dim()
    }

    fn classify(&self, q: &BadicCube) -> Class {
        let bb = q.bbox();
        if self.boxes.iter().any(|b| b.contains(&bb)) {
            Class::Full
        } else if self.boxes.iter().any(|b| bb.overlaps_interior(b)) {
            Class::Partial
        } else {
            Class::Empty
        }
    }

    /// Hash of the boxes clipped to the cube, in the cube's own coordinates.
    fn class_key(&self, q: &BadicCube) -> Option<u64> {
        use std::hash::{Hash, Hasher};
        let n = (self.base as f64).powi(q.level as i32);
        let bb = q.bbox();
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for b in self.boxes.iter().filter(|b| bb.overlaps_interior(b)) {
            for (i, &c) in q.coords.iter().enumerate() {
                let c = c as f64;
                (b.lo[i] * n - c).clamp(0.0, 1.0).to_bits().hash(&mut h);
                (b.hi[i] * n - c).clamp(0.0, 1.0).to_bits().hash(&mut h);
            }
        }
        Some(h.finish())
    }
}

const WITNESS_LIMIT: u128 = 1 << 20;

struct Dp<'a, S: CubeSet + ?Sized> {
    set: &'a S,
    max_level: u32,
    /// Levels below this may not be used as cover elements.
    min_level: u32,
    cost_at: Vec<f64>,
    full: Vec<(f64, u128, bool)>,
    memo: HashMap<(u32, u64), (f64, u128)>,
}

/// Prefer the single cube on ties, so exact self-similar identities stay exact.
fn self_wins(own: f64, split: f64) -> bool {
    own <= split * (1.0 + 1e-12)
}

impl<'a, S: CubeSet + ?Sized> Dp<'a, S> {
    fn new(set: &'a S, s: f64, max_level: u32, min_level: u32) -> Self {
        let b = set.base() as f64;
        let fan = (set.base() as f64).powi(set.dim() as i32);
        let cost_at: Vec<f64> = (0..=max_level).map(|k| b.powf(-(k as f64) * s)).collect();
        let mut full = vec![(0.0, 0u128, true); max_level as usize + 1];
        full[max_level as usize] = (cost_at[max_level as usize], 1, true);
        let fan_n = (set.base() as u128).saturating_pow(set.dim() as u32);
        for k in (0..max_level as usize).rev() {
            let (c, n, _) = full[k + 1];
            let split = fan * c;
            full[k] = if k as u32 >= min_level && self_wins(cost_at[k], split) {
                (cost_at[k], 1, true)
            } else {
                (split, n.saturating_mul(fan_n), false)
            };
        }
        Dp { set, max_level, min_level, cost_at, full, memo: HashMap::new() }
    }

    fn eval(&mut self, q: &BadicCube) -> (f64, u128) {
        let k = q.level as usize;
        match self.set.classify(q) {
            Class::Empty => (0.0, 0),
            Class::Full => (self.full[k].0, self.full[k].1),
            Class::Partial if q.level >= self.max_level => (self.cost_at[k], 1),
            Class::Partial => {
                let key = self.set.class_key(q).map(|h| (q.level, h));
                if let Some(hit) = key.and_then(|key| self.memo.get(&key)) {
                    return *hit;
                }
                let (split, n) = self.children_sum(q);
                let out = if q.level >= self.min_level && self_wins(self.cost_at[k], split) {
                    (self.cost_at[k], 1)
                } else {
                    (split, n)
                };
                if let Some(key) = key {
                    self.memo.insert(key, out);
                }
                out
            }
        }
    }

    fn children_sum(&mut self, q: &BadicCube) -> (f64, u128) {
        let mut split = 0.0;
        let mut n: u128 = 0;
        for c in q.children() {
            let (v, m) = self.eval(&c);
            split += v;
            n = n.saturating_add(m);
        }
        (split, n)
    }

    fn witness(&mut self, q: &BadicCube, out: &mut Vec<BadicCube>) {
        let k = q.level as usize;
        let leaf = match self.set.classify(q) {
            Class::Empty => return,
            Class::Full => self.full[k].2,
            Class::Partial if q.level >= self.max_level => true,
            Class::Partial => {
                let (split, _) = self.children_sum(q);
                q.level >= self.min_level && self_wins(self.cost_at[k], split)
            }
        };
        if leaf {
            out.push(q.clone());
        } else {
            for c in q.children() {
                self.witness(&c, out);
            }
        }
    }
}

/// Optimal b-adic cover found by the tree recursion.
#[derive(Clone, Debug, Serialize)]
pub struct UpperResult {
    pub s: f64,
    pub value: f64,
    /// Number of cubes in the optimal cover (saturating).
    pub witness_count: u128,
    /// The cover itself, when it has at most 2^20 cubes.
    pub witness: Option<Vec<BadicCube>>,
}

fn check_s(s: f64) -> Result<()> {
    if !(s >= 0.0 && s.is_finite()) {
        return Err(invalid(format!("exponent s must be >= 0, got {s}")));
    }
    Ok(())
}

fn check_level<S: CubeSet + ?Sized>(set: &S, max_level: u32) -> Result<()> {
    if grid_size(set.base(), max_level).is_none() {
        return Err(invalid(format!("max_level {max_level} too deep for base {}", set.base())));
    }
    if let Some(r) = set.resolution() {
        if r > max_level {
            return Err(invalid(format!("max_level {max_level} is shallower than the set's deepest cube ({r})")));
        }
    }
    Ok(())
}

pub fn content_upper<S: CubeSet + ?Sized>(set: &S, s: f64, max_level: u32) -> Result<UpperResult> {
    content_upper_capped(set, s, max_level, None)
}

/// As [`content_upper`], but cover elements must have diameter at most `max_diam`.
pub fn content_upper_capped<S: CubeSet + ?Sized>(
    set: &S,
    s: f64,
    max_level: u32,
    max_diam: Option<f64>,
) -> Result<UpperResult> {
    check_s(s)?;
    check_level(set, max_level)?;
    let min_level = match max_diam {
        None => 0,
        Some(t) if t > 0.0 => {
            let b = set.base() as f64;
            let k = (-(t.ln()) / b.ln() - 1e-9).ceil().max(0.0) as u32;
            if k > max_level {
                return Err(invalid(format!("diameter cap {t} is finer than level {max_level}")));
            }
            k
        }
        Some(t) => return Err(invalid(format!("diameter cap must be positive, got {t}"))),
    };
    let mut dp = Dp::new(set, s, max_level, min_level);
    let root = BadicCube::root(set.base(), set.dim());
    let (value, count) = dp.eval(&root);
    let witness = (count <= WITNESS_LIMIT).then(|| {
        let mut out = Vec::with_capacity(count as usize);
        dp.witness(&root, &mut out);
        out
    });
    Ok(UpperResult { s, value, witness_count: count, witness })
}

/// Mass distribution on the tree of a set: explicit on partial cubes, uniform below full ones.
#[derive(Clone, Debug)]
pub struct FrostmanMeasure {
    pub s: f64,
    pub base: u32,
    pub dim: usize,
    pub max_level: u32,
    nodes: HashMap<BadicCube, f64>,
    full_roots: HashMap<BadicCube, f64>,
}

impl FrostmanMeasure {
    pub fn total(&self) -> f64 {
        let root = BadicCube::root(self.base, self.dim);
        self.mass(&root)
    }

    pub fn mass(&self, q: &BadicCube) -> f64 {
        if let Some(m) = self.nodes.get(q) {
            return *m;
        }
        let fan = (self.base as f64).powi(self.dim as i32);
        for l in (0..q.level).rev() {
            let a = q.ancestor(l);
            if self.nodes.contains_key(&a) {
                return self.full_roots.get(&a).map_or(0.0, |m| m / fan.powi((q.level - l) as i32));
            }
        }
        0.0
    }

    pub fn explicit_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Largest `m(Q)/|Q|^s` over every tree cube down to `max_level`.
    pub fn max_ratio(&self) -> f64 {
        let b = self.base as f64;
        let fan = b.powi(self.dim as i32);
        let mut worst = 0.0f64;
        for (q, m) in &self.nodes {
            worst = worst.max(m / b.powf(-(q.level as f64) * self.s));
        }
        for (q, m) in &self.full_roots {
            for j in 0..=(self.max_level - q.level) {
                let level = (q.level + j) as f64;
                worst = worst.max(m / fan.powi(j as i32) / b.powf(-level * self.s));
            }
        }
        worst
    }
}

#[derive(Clone, Debug)]
pub struct FrostmanResult {
    pub total: f64,
    /// `total / (2^d b^max(s,d))`, which is `total / (2b)^d` for `s <= d`.
    pub lower: f64,
    pub measure: FrostmanMeasure,
    pub max_ratio: f64,
}

const FROSTMAN_NODE_BUDGET: usize = 5_000_000;

pub fn grid_to_ball_constant(base: u32, d: usize, s: f64) -> f64 {
    2f64.powi(d as i32) * (base as f64).powf(s.max(d as f64))
}

pub fn frostman_lower<S: CubeSet + ?Sized>(set: &S, s: f64, max_level: u32) -> Result<FrostmanResult> {
    check_s(s)?;
    check_level(set, max_level)?;
    let mut dp = Dp::new(set, s, max_level, 0);
    let root = BadicCube::root(set.base(), set.dim());
    let (total, _) = dp.eval(&root);
    if total <= 0.0 {
        return Err(Error::Precondition("set has zero content; no mass to distribute".into()));
    }
    let mut nodes = HashMap::new();
    let mut full_roots = HashMap::new();
    let mut stack = vec![(root, total)];
    while let Some((q, m)) = stack.pop() {
        if nodes.len() >= FROSTMAN_NODE_BUDGET {
            return Err(Error::Budget(format!("Frostman tree exceeds {FROSTMAN_NODE_BUDGET} nodes")));
        }
        let class = set.classify(&q);
        nodes.insert(q.clone(), m);
        match class {
            Class::Empty => {}
            Class::Full => {
                full_roots.insert(q, m);
            }
            Class::Partial if q.level >= max_level => {}
            Class::Partial => {
                let kids: Vec<(BadicCube, f64)> = q
                    .children()
                    .into_iter()
                    .map(|c| {
                        let v = dp.eval(&c).0;
                        (c, v)
                    })
                    .collect();
                let sum: f64 = kids.iter().map(|(_, v)| v).sum();
                for (c, v) in kids {
                    if v > 0.0 {
                        stack.push((c, m * v / sum));
                    }
                }
            }
        }
    }
    let measure = FrostmanMeasure { s, base: set.base(), dim: set.dim(), max_level, nodes, full_roots };
    let max_ratio = measure.max_ratio();
    let lower = total / grid_to_ball_constant(set.base(), set.dim(), s);
    Ok(FrostmanResult { total, lower, measure, max_ratio })
}

/// Upper bound with witness, lower bound from a Frostman measure.
#[derive(Clone, Debug, Serialize)]
pub struct CoverEstimate {
    pub s: f64,
    pub lower: f64,
    pub upper: f64,
    pub witness_count: u128,
    #[serde(skip)]
    pub witness: Option<Vec<BadicCube>>,
    /// Total mass of the Frostman measure behind `lower`.
    pub frostman_total: Option<f64>,
    /// Upper bounds at the last three levels when the exponent exceeds the measure's dimension.
    pub decay_certificate: Option<Vec<(u32, f64)>>,
}

pub fn estimate<S: CubeSet + ?Sized>(set: &S, s: f64, max_level: u32) -> Result<CoverEstimate> {
    let up = content_upper(set, s, max_level)?;
    let (lower, total) = if up.value > 0.0 {
        let f = frostman_lower(set, s, max_level)?;
        (f.lower.min(up.value), Some(f.total))
    } else {
        (0.0, None)
    };
    Ok(CoverEstimate {
        s,
        lower,
        upper: up.value,
        witness_count: up.witness_count,
        witness: up.witness,
        frostman_total: total,
        decay_certificate: None,
    })
}

/// `max_k { s tau_k - sum_{i<=k} (tau_k - tau_i) }` after scaling `tau_1` to 1.
pub fn g_tau(tau: &[f64], s: f64) -> Result<f64> {
    if tau.is_empty() {
        return Err(invalid("tau is empty"));
    }
    if !(tau[0] > 0.0) {
        return Err(invalid("tau entries must be positive"));
    }
    if tau.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid(format!("tau must be non-decreasing, got {tau:?}")));
    }
    let t: Vec<f64> = tau.iter().map(|x| x / tau[0]).collect();
    Ok((0..t.len())
        .map(|k| s * t[k] - t[..=k].iter().map(|ti| t[k] - ti).sum::<f64>())
        .fold(f64::NEG_INFINITY, f64::max))
}

#[derive(Clone, Debug, Serialize)]
pub struct SlopeReport {
    pub slope: f64,
    pub predicted: f64,
    /// `(r, content)` pairs.
    pub points: Vec<(f64, f64)>,
    pub r_squared: f64,
}

/// Log-log slope of the content of `R_tau(center, r)` against `r`, centered at `(1/2, .., 1/2)`.
pub fn rect_content_slope(tau: &[f64], s: f64, radii: &[f64], base: u32, max_level: u32) -> Result<SlopeReport> {
    let predicted = g_tau(tau, s)?;
    if radii.len() < 2 {
        return Err(invalid("need at least two radii"));
    }
    if let Some(r) = radii.iter().find(|r| !(**r > 0.0 && **r <= 0.25)) {
        return Err(invalid(format!("radius {r} outside (0, 1/4]")));
    }
    let center = vec![0.5; tau.len()];
    let points = radii
        .iter()
        .map(|&r| {
            let rect = AnisoRect::new(center.clone(), r, tau.to_vec())?;
            let set = BoxSet::region(&Region::Rect(rect), base)?;
            Ok((r, content_upper(&set, s, max_level)?.value))
        })
        .collect::<Result<Vec<_>>>()?;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let fit = crate::fit::least_squares(&xs, &ys)?;
    Ok(SlopeReport { slope: fit.slope, predicted, points, r_squared: fit.r_squared })
}

/// Restriction of a set to the part of a measure's support it sees.
struct Supported<'a, S: CubeSet + ?Sized> {
    inner: &'a S,
    mu: &'a CylinderMeasure,
    use_lo: bool,
    aligned: bool,
    full_support: bool,
}

const FULL_TAG: u64 = 0x9e37_79b9_7f4a_7c15;

impl<'a, S: CubeSet + ?Sized> Supported<'a, S> {
    fn new(inner: &'a S, mu: &'a CylinderMeasure, use_lo: bool) -> Self {
        let aligned = mu.grid_base() == Some(inner.base());
        let full_support = aligned && mu.ifs().len() == (inner.base() as usize).pow(inner.dim() as u32);
        Supported { inner, mu, use_lo, aligned, full_support }
    }

    fn charged(&self, q: &BadicCube) -> bool {
        let m = self.mu.cube_mass(q);
        (if self.use_lo { m.lo } else { m.hi }) > 0.0
    }
}

impl<'a, S: CubeSet + ?Sized> CubeSet for Supported<'a, S> {
    fn base(&self) -> u32 {
        self.inner.base()
    }

    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn classify(&self, q: &BadicCube) -> Class {
        match self.inner.classify(q) {
            Class::Empty => Class::Empty,
            _ if !self.charged(q) => Class::Empty,
            Class::Full if self.full_support => Class::Full,
            _ => Class::Partial,
        }
    }

    fn class_key(&self, q: &BadicCube) -> Option<u64> {
        // On an aligned grid the measure restricted to any charged cube is a
        // rescaled copy of itself, so only the inner set's shape matters.
        if !self.aligned {
            return None;
        }
        match self.inner.classify(q) {
            Class::Full => Some(FULL_TAG),
            _ => self.inner.class_key(q).map(|k| k.wrapping_mul(0x100_0000_01b3) ^ 0x5bd1_e995),
        }
    }

    fn resolution(&self) -> Option<u32> {
        self.inner.resolution()
    }
}

/// Upper bound on the `mu`-essential content alone.
pub fn essential_upper<S: CubeSet + ?Sized>(set: &S, mu: &CylinderMeasure, s: f64, max_level: u32) -> Result<f64> {
    if mu.dim() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: mu.dim() });
    }
    Ok(content_upper(&Supported::new(set, mu, false), s, max_level)?.value)
}

/// Frostman measure of `set` restricted to the cubes charged by `mu`.
pub fn essential_frostman<S: CubeSet + ?Sized>(
    set: &S,
    mu: &CylinderMeasure,
    s: f64,
    max_level: u32,
) -> Result<FrostmanResult> {
    if mu.dim() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: mu.dim() });
    }
    frostman_lower(&Supported::new(set, mu, false), s, max_level)
}

/// Bounds on the `mu`-essential content of `set`.
pub fn essential_content<S: CubeSet + ?Sized>(
    set: &S,
    mu: &CylinderMeasure,
    s: f64,
    max_level: u32,
) -> Result<CoverEstimate> {
    check_s(s)?;
    if mu.dim() != set.dim() {
        return Err(Error::DimensionMismatch { expected: set.dim(), got: mu.dim() });
    }
    let hi_set = Supported::new(set, mu, false);
    let up = content_upper(&hi_set, s, max_level)?;
    if s > mu.dimension() + 1e-12 {
        let mut cert = Vec::new();
        for l in max_level.saturating_sub(2)..max_level {
            cert.push((l, content_upper(&hi_set, s, l)?.value));
        }
        cert.push((max_level, up.value));
        return Ok(CoverEstimate {
            s,
            lower: 0.0,
            upper: up.value,
            witness_count: up.witness_count,
            witness: up.witness,
            frostman_total: None,
            decay_certificate: Some(cert),
        });
    }
    let lo_set = Supported::new(set, mu, true);
    let lo_val = content_upper(&lo_set, s, max_level)?.value;
    let lower = (lo_val / grid_to_ball_constant(set.base(), set.dim(), s)).min(up.value);
    Ok(CoverEstimate {
        s,
        lower,
        upper: up.value,
        witness_count: up.witness_count,
        witness: up.witness,
        frostman_total: Some(lo_val),
        decay_certificate: None,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConcavityReport {
    pub pass: bool,
    /// Upper bound at `s/delta`.
    pub lhs: f64,
    /// Lower bound at `s`, raised to `1/delta`.
    pub rhs: f64,
}

/// Checks `upper(s/delta) >= lower(s)^(1/delta)` for the essential content.
pub fn concavity_check<S: CubeSet + ?Sized>(
    set: &S,
    mu: &CylinderMeasure,
    s: f64,
    delta: f64,
    max_level: u32,
) -> Result<ConcavityReport> {
    if !(delta >= 1.0) {
        return Err(invalid(format!("delta must be >= 1, got {delta}")));
    }
    let lhs = essential_content(set, mu, s / delta, max_level)?.upper;
    let rhs = essential_content(set, mu, s, max_level)?.lower.powf(1.0 / delta);
    Ok(ConcavityReport { pass: lhs >= rhs * (1.0 - 1e-12), lhs, rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Ball;

    fn cube(base: u32, level: u32, c: &[u64]) -> BadicCube {
        BadicCube::new(base, level, c.to_vec()).unwrap()
    }

    fn ln23() -> f64 {
        2f64.ln() / 3f64.ln()
    }

    #[test]
    fn unit_interval_root_wins() {
        let e = RegionSet::new(vec![cube(2, 0, &[0])]).unwrap();
        let u = content_upper(&e, 1.0, 6).unwrap();
        assert_eq!(u.value, 1.0);
        assert_eq!(u.witness.unwrap(), vec![cube(2, 0, &[0])]);
    }

    #[test]
    fn cantor_content_is_one() {
        for k in 1..=8 {
            let e = RegionSet::cantor(k).unwrap();
            let u = content_upper(&e, ln23(), k).unwrap();
            assert!((u.value - 1.0).abs() < 1e-9, "k={k}: {}", u.value);
        }
    }

    #[test]
    fn two_dyadic_cells() {
        let e = RegionSet::new(vec![cube(2, 2, &[0]), cube(2, 2, &[2])]).unwrap();
        let u = content_upper(&e, 1.0, 4).unwrap();
        assert!((u.value - 0.5).abs() < 1e-15);
        assert_eq!(u.witness_count, 2);
        let f = frostman_lower(&e, 1.0, 4).unwrap();
        assert!((f.measure.mass(&cube(2, 2, &[0])) - 0.25).abs() < 1e-15);
        assert!((f.measure.mass(&cube(2, 2, &[2])) - 0.25).abs() < 1e-15);
        assert!((f.lower - 0.5 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn frostman_uniform_and_cantor() {
        let e = RegionSet::new(vec![cube(2, 0, &[0])]).unwrap();
        let f = frostman_lower(&e, 1.0, 5).unwrap();
        assert_eq!(f.total, 1.0);
        assert!((f.measure.mass(&cube(2, 3, &[5])) - 0.125).abs() < 1e-15);
        assert!(f.max_ratio <= 1.0 + 1e-12);
        let c = RegionSet::cantor(5).unwrap();
        let f = frostman_lower(&c, ln23(), 5).unwrap();
        assert!((f.total - 1.0).abs() < 1e-9);
        assert!((f.measure.mass(&cube(3, 5, &[0])) - 1.0 / 32.0).abs() < 1e-12);
        assert!((f.measure.mass(&cube(3, 2, &[8])) - 0.25).abs() < 1e-12);
        assert!(f.max_ratio <= 1.0 + 1e-9);
    }

    #[test]
    fn zero_content_is_an_error() {
        let e = RegionSet::new(vec![cube(2, 1, &[0])]).unwrap();
        assert!(frostman_lower(&e, 0.5, 3).is_ok());
        assert!(content_upper(&e, -1.0, 3).is_err());
        assert!(content_upper(&RegionSet::cantor(4).unwrap(), 0.5, 3).is_err());
    }

    #[test]
    fn g_tau_examples() {
        assert!((g_tau(&[1.0, 1.0], 0.7).unwrap() - 0.7).abs() < 1e-15);
        assert!((g_tau(&[1.0, 2.0], 1.5).unwrap() - 2.0).abs() < 1e-15);
        assert!((g_tau(&[1.0, 2.0, 3.0], 1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((g_tau(&[1.0, 3.0], 0.5).unwrap() - 0.5).abs() < 1e-15);
        assert!(g_tau(&[2.0, 1.0], 1.0).is_err());
    }

    #[test]
    fn rect_slopes_small() {
        let radii: Vec<f64> = (2..=5).map(|k| 2f64.powi(-k)).collect();
        let r = rect_content_slope(&[1.0, 1.0], 1.0, &radii, 2, 10).unwrap();
        assert!((r.slope - 1.0).abs() < 0.05, "{r:?}");
        let radii: Vec<f64> = (2..=6).map(|k| 2f64.powi(-k)).collect();
        let r = rect_content_slope(&[1.0, 3.0], 0.5, &radii, 3, 10).unwrap();
        assert!((r.slope - 0.5).abs() < 0.05, "{r:?}");
    }

    #[test]
    fn essential_examples() {
        let mu = CylinderMeasure::cantor(20);
        let a = BoxSet::new(vec![Aabb::new(vec![0.0], vec![1.0 / 3.0])], 3).unwrap();
        let e = essential_content(&a, &mu, ln23(), 8).unwrap();
        assert!((e.upper - 0.5).abs() < 1e-9);
        assert!(e.lower > 0.0 && e.lower <= e.upper);
        let gap = BoxSet::new(vec![Aabb::new(vec![1.0 / 3.0], vec![2.0 / 3.0])], 3).unwrap();
        assert_eq!(essential_content(&gap, &mu, ln23(), 8).unwrap().upper, 0.0);
        let leb = CylinderMeasure::lebesgue(2, 1, 20).unwrap();
        let ball = BoxSet::region(&Region::Ball(Ball::new(vec![0.375], 0.125).unwrap()), 2).unwrap();
        let e = essential_content(&ball, &leb, 0.5, 10).unwrap();
        assert!((e.upper - 0.5).abs() < 1e-12);
        let hot = essential_content(&a, &mu, 0.9, 8).unwrap();
        assert_eq!(hot.lower, 0.0);
        let cert = hot.decay_certificate.unwrap();
        assert!(cert.windows(2).all(|w| w[1].1 < w[0].1));
    }

    #[test]
    fn concavity_examples() {
        let leb = CylinderMeasure::lebesgue(2, 1, 20).unwrap();
        let unit = BoxSet::new(vec![Aabb::unit(1)], 2).unwrap();
        let r = concavity_check(&unit, &leb, 1.0, 2.0, 8).unwrap();
        assert!(r.pass && (r.lhs - 1.0).abs() < 1e-12);
        let quarter = BoxSet::new(vec![Aabb::new(vec![0.0], vec![0.25])], 2).unwrap();
        let r = concavity_check(&quarter, &leb, 1.0, 2.0, 8).unwrap();
        assert!(r.pass && (r.lhs - 0.5).abs() < 1e-12);
        let mu = CylinderMeasure::cantor(20);
        let c = RegionSet::cantor(6).unwrap();
        let r = concavity_check(&c, &mu, ln23(), 2.0, 8).unwrap();
        assert!(r.pass);
    }

    #[test]
    fn capped_cover_uses_small_cubes() {
        let e = RegionSet::new(vec![cube(2, 0, &[0])]).unwrap();
        let u = content_upper_capped(&e, 0.5, 6, Some(0.25)).unwrap();
        assert_eq!(u.witness_count, 4);
        assert!((u.value - 2.0).abs() < 1e-12);
    }
}
