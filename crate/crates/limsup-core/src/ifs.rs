//! Self-similar iterated function systems and their measures.
//!
//! A [`CylinderMeasure`] is the self-similar measure of an IFS with a
//! probability vector, seen through its cylinder tree: the cylinder of a word
//! `w` is `f_w([0,1]^d)` and carries mass `p_w`. Mass queries descend the tree
//! up to `depth_cap` and return an interval `[lo, hi]`: `lo` counts cylinders
//! inside the query, `hi` those meeting it.

use crate::error::{invalid, Error, Result};
use crate::fit::{least_squares, LineFit};
use crate::geometry::{Aabb, BadicCube, Ball, BoxIndex};
use serde::Serialize;
use std::collections::HashMap;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub struct SimilarityMap {
    ratio: f64,
    translation: Vec<f64>,
    /// Row-major orthogonal matrix; `None` is the identity.
    orthogonal: Option<Vec<f64>>,
}

impl SimilarityMap {
    pub fn new(ratio: f64, translation: Vec<f64>) -> Result<Self> {
        Self::with_orthogonal(ratio, translation, None)
    }

    pub fn with_orthogonal(ratio: f64, translation: Vec<f64>, orthogonal: Option<Vec<f64>>) -> Result<Self> {
        if !(ratio > 0.0 && ratio < 1.0) {
            return Err(invalid(format!("contraction ratio must lie in (0,1), got {ratio}")));
        }
        if translation.is_empty() || translation.iter().any(|t| !t.is_finite()) {
            return Err(invalid("translation must be a non-empty finite vector"));
        }
        let d = translation.len();
        if let Some(m) = &orthogonal {
            if m.len() != d * d {
                return Err(Error::DimensionMismatch { expected: d * d, got: m.len() });
            }
            for i in 0..d {
                for j in 0..d {
                    let dot: f64 = (0..d).map(|k| m[k * d + i] * m[k * d + j]).sum();
                    let want = if i == j { 1.0 } else { 0.0 };
                    if (dot - want).abs() > 1e-9 {
                        return Err(invalid("matrix is not orthogonal"));
                    }
                }
            }
        }
        Ok(SimilarityMap { ratio, translation, orthogonal })
    }

    pub fn ratio(&self) -> f64 {
        self.ratio
    }

    pub fn translation(&self) -> &[f64] {
        &self.translation
    }

    pub fn orthogonal(&self) -> Option<&[f64]> {
        self.orthogonal.as_deref()
    }

    pub fn dim(&self) -> usize {
        self.translation.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.affine().apply(x)
    }

    fn affine(&self) -> Affine {
        Affine { scale: self.ratio, rot: self.orthogonal.clone(), shift: self.translation.clone() }
    }
}

/// `x -> scale * rot * x + shift`.
#[derive(Clone, Debug)]
struct Affine {
    scale: f64,
    rot: Option<Vec<f64>>,
    shift: Vec<f64>,
}

impl Affine {
    fn identity(d: usize) -> Self {
        Affine { scale: 1.0, rot: None, shift: vec![0.0; d] }
    }

    fn rotate(&self, x: &[f64]) -> Vec<f64> {
        match &self.rot {
            None => x.to_vec(),
            Some(m) => {
                let d = x.len();
                (0..d).map(|i| (0..d).map(|j| m[i * d + j] * x[j]).sum()).collect()
            }
        }
    }

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.rotate(x).iter().zip(&self.shift).map(|(y, t)| self.scale * y + t).collect()
    }

    /// `self ∘ other`.
    fn then_inner(&self, other: &Affine) -> Affine {
        let d = self.shift.len();
        let rot = match (&self.rot, &other.rot) {
            (None, None) => None,
            (Some(a), None) => Some(a.clone()),
            (None, Some(b)) => Some(b.clone()),
            (Some(a), Some(b)) => Some(
                (0..d * d)
                    .map(|ij| {
                        let (i, j) = (ij / d, ij % d);
                        (0..d).map(|k| a[i * d + k] * b[k * d + j]).sum()
                    })
                    .collect(),
            ),
        };
        let shift = self.apply(&other.shift);
        Affine { scale: self.scale * other.scale, rot, shift }
    }

    /// Bounding box of the image of `[0,1]^d`.
    fn unit_image(&self) -> Aabb {
        let d = self.shift.len();
        match &self.rot {
            None => Aabb::new(self.shift.clone(), self.shift.iter().map(|t| t + self.scale).collect()),
            Some(m) => {
                let mut lo = self.shift.clone();
                let mut hi = self.shift.clone();
                for i in 0..d {
                    for j in 0..d {
                        let v = self.scale * m[i * d + j];
                        if v < 0.0 {
                            lo[i] += v;
                        } else {
                            hi[i] += v;
                        }
                    }
                }
                Aabb::new(lo, hi)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ifs {
    maps: Vec<SimilarityMap>,
    dim: usize,
}

impl Ifs {
    pub fn new(maps: Vec<SimilarityMap>) -> Result<Self> {
        if maps.len() < 2 {
            return Err(invalid(format!("an IFS needs at least 2 maps, got {}", maps.len())));
        }
        let dim = maps[0].dim();
        if let Some(m) = maps.iter().find(|m| m.dim() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: m.dim() });
        }
        Ok(Ifs { maps, dim })
    }

    /// `x/3` and `x/3 + 2/3`.
    pub fn middle_third() -> Self {
        Ifs::new(vec![
            SimilarityMap::new(1.0 / 3.0, vec![0.0]).unwrap(),
            SimilarityMap::new(1.0 / 3.0, vec![2.0 / 3.0]).unwrap(),
        ])
        .unwrap()
    }

    /// The `b^d` maps `x -> (x + j)/b`; with uniform weights this is Lebesgue measure.
    pub fn badic_grid(base: u32, d: usize) -> Result<Self> {
        if base < 2 || d == 0 {
            return Err(invalid("grid IFS needs base >= 2 and d >= 1"));
        }
        let b = base as u64;
        let count = b.pow(d as u32);
        let maps = (0..count)
            .map(|mut idx| {
                let mut t = vec![0.0; d];
                for i in (0..d).rev() {
                    t[i] = (idx % b) as f64 / base as f64;
                    idx /= b;
                }
                SimilarityMap::new(1.0 / base as f64, t)
            })
            .collect::<Result<Vec<_>>>()?;
        Ifs::new(maps)
    }

    pub fn maps(&self) -> &[SimilarityMap] {
        &self.maps
    }

    pub fn len(&self) -> usize {
        self.maps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.maps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.ratio).collect()
    }

    /// Conjugates the system so that `hull` becomes `[0,1]^d`. The hull must be a cube.
    pub fn normalized(&self, hull: &Aabb) -> Result<Ifs> {
        let d = self.dim;
        if hull.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: hull.dim() });
        }
        let side = hull.hi[0] - hull.lo[0];
        if !(side > 0.0) || (0..d).any(|i| ((hull.hi[i] - hull.lo[i]) - side).abs() > 1e-12 * side) {
            return Err(invalid("base hull must be a cube with positive side"));
        }
        let maps = self
            .maps
            .iter()
            .map(|m| {
                let a = m.affine();
                let image_lo = a.apply(&hull.lo);
                let t = (0..d).map(|i| (image_lo[i] - hull.lo[i]) / side).collect();
                SimilarityMap::with_orthogonal(m.ratio, t, m.orthogonal.clone())
            })
            .collect::<Result<Vec<_>>>()?;
        Ifs::new(maps)
    }

    /// Grid code when every map sends `[0,1]^d` onto a distinct level-1 cell of one b-adic grid.
    fn grid_code(&self) -> Option<GridCode> {
        let b = (1.0 / self.maps[0].ratio).round();
        if !(2.0..=64.0).contains(&b) {
            return None;
        }
        let mut cells = HashMap::new();
        for (idx, m) in self.maps.iter().enumerate() {
            if (m.ratio * b - 1.0).abs() > 1e-12 || m.orthogonal.is_some() {
                return None;
            }
            let mut coords = Vec::with_capacity(self.dim);
            for t in &m.translation {
                let j = (t * b).round();
                if (t * b - j).abs() > 1e-9 || j < 0.0 || j >= b {
                    return None;
                }
                coords.push(j as u64);
            }
            if cells.insert(coords, idx).is_some() {
                return None;
            }
        }
        Some(GridCode { base: b as u32, cells })
    }
}

#[derive(Clone, Debug)]
struct GridCode {
    base: u32,
    cells: HashMap<Vec<u64>, usize>,
}

/// A finite word over the alphabet `{0, .., m-1}` (printed 1-based).
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct Word(pub Vec<usize>);

impl Word {
    pub fn empty() -> Self {
        Word(Vec::new())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn ratio(&self, ifs: &Ifs) -> f64 {
        self.0.iter().map(|&i| ifs.maps[i].ratio).product()
    }

    pub fn weight(&self, weights: &[f64]) -> f64 {
        self.0.iter().map(|&i| weights[i]).product()
    }

    fn affine(&self, ifs: &Ifs) -> Affine {
        self.0
            .iter()
            .fold(Affine::identity(ifs.dim), |acc, &i| acc.then_inner(&ifs.maps[i].affine()))
    }

    /// `f_w(x) = f_{w_1} ∘ ... ∘ f_{w_k}(x)`.
    pub fn apply(&self, ifs: &Ifs, x: &[f64]) -> Vec<f64> {
        self.affine(ifs).apply(x)
    }

    /// Bounding box of the cylinder `f_w([0,1]^d)`.
    pub fn hull(&self, ifs: &Ifs) -> Aabb {
        self.affine(ifs).unit_image()
    }

    pub fn is_prefix_of(&self, other: &Word) -> bool {
        other.0.len() >= self.0.len() && other.0[..self.0.len()] == self.0[..]
    }
}

impl fmt::Display for Word {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "ε");
        }
        let wide = self.0.iter().any(|&i| i >= 9);
        for (k, i) in self.0.iter().enumerate() {
            if wide && k > 0 {
                write!(f, ".")?;
            }
            write!(f, "{}", i + 1)?;
        }
        Ok(())
    }
}

/// Root of `sum c_i^s = 1`: bisection (200 steps at most) and one Newton step.
pub fn similarity_dimension(ratios: &[f64]) -> Result<f64> {
    if ratios.len() < 2 {
        return Err(invalid(format!("need at least 2 ratios, got {}", ratios.len())));
    }
    if let Some(c) = ratios.iter().find(|c| !(**c > 0.0 && **c < 1.0)) {
        return Err(invalid(format!("ratio {c} outside (0,1)")));
    }
    let f = |s: f64| ratios.iter().map(|c| c.powf(s)).sum::<f64>() - 1.0;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = 0.5 * (lo + hi);
    let df: f64 = ratios.iter().map(|c| c.powf(s) * c.ln()).sum();
    let polished = s - f(s) / df;
    Ok(if f(polished).abs() <= f(s).abs() { polished } else { s })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeasureDimension {
    pub value: f64,
    /// Dimension regularity is taken as an input assumption and never checked.
    pub regularity_assumed: bool,
}

/// `min{d, sum p log p / sum p log c}`.
pub fn measure_dimension(weights: &[f64], ratios: &[f64], d: usize) -> Result<MeasureDimension> {
    if weights.len() != ratios.len() {
        return Err(Error::DimensionMismatch { expected: ratios.len(), got: weights.len() });
    }
    if weights.iter().any(|p| !(*p > 0.0)) {
        return Err(invalid("weights must be strictly positive"));
    }
    if ratios.iter().any(|c| !(*c > 0.0 && *c < 1.0)) {
        return Err(invalid("ratios must lie in (0,1)"));
    }
    let ent: f64 = weights.iter().map(|p| p * p.ln()).sum();
    let lyap: f64 = weights.iter().zip(ratios).map(|(p, c)| p * c.ln()).sum();
    Ok(MeasureDimension { value: (ent / lyap).min(d as f64), regularity_assumed: true })
}

/// Words `w` with `c_last * t^k < c_w <= t^k`.
pub fn cylinders_at_scale(ifs: &Ifs, t: f64, k: u32) -> Result<Vec<Word>> {
    if !(t > 0.0 && t < 1.0) {
        return Err(invalid(format!("scale t must lie in (0,1), got {t}")));
    }
    let target = t.powi(k as i32);
    let mut out = Vec::new();
    let mut stack = vec![(Word::empty(), 1.0f64)];
    // A word is emitted as soon as its ratio drops to the target, so its
    // parent was strictly above it; no emitted word prefixes another.
    while let Some((w, c)) = stack.pop() {
        if c <= target * (1.0 + 1e-12) {
            out.push(w);
            continue;
        }
        for i in (0..ifs.len()).rev() {
            let mut next = w.0.clone();
            next.push(i);
            stack.push((Word(next), c * ifs.maps[i].ratio));
        }
    }
    Ok(out)
}

/// Interval enclosure of a mass.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MassInterval {
    pub lo: f64,
    pub hi: f64,
}

impl MassInterval {
    pub fn mid(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

#[derive(Clone, Copy, PartialEq)]
enum Rel {
    Inside,
    Outside,
    Boundary,
}

#[derive(Clone, Debug)]
pub struct CylinderMeasure {
    ifs: Ifs,
    weights: Vec<f64>,
    depth_cap: u32,
    grid: Option<GridCode>,
}

impl CylinderMeasure {
    pub fn new(ifs: Ifs, weights: Vec<f64>, depth_cap: u32) -> Result<Self> {
        if weights.len() != ifs.len() {
            return Err(Error::DimensionMismatch { expected: ifs.len(), got: weights.len() });
        }
        if weights.iter().any(|p| !(*p > 0.0)) {
            return Err(invalid("weights must be strictly positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        let grid = ifs.grid_code();
        Ok(CylinderMeasure { ifs, weights, depth_cap, grid })
    }

    /// Uniform measure on the middle-third Cantor set.
    pub fn cantor(depth_cap: u32) -> Self {
        CylinderMeasure::new(Ifs::middle_third(), vec![0.5, 0.5], depth_cap).unwrap()
    }

    /// Lebesgue measure on `[0,1]^d` as a uniform b-adic tree.
    pub fn lebesgue(base: u32, d: usize, depth_cap: u32) -> Result<Self> {
        let ifs = Ifs::badic_grid(base, d)?;
        let m = ifs.len();
        CylinderMeasure::new(ifs, vec![1.0 / m as f64; m], depth_cap)
    }

    pub fn ifs(&self) -> &Ifs {
        &self.ifs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn depth_cap(&self) -> u32 {
        self.depth_cap
    }

    pub fn with_depth_cap(&self, depth_cap: u32) -> Self {
        CylinderMeasure { depth_cap, ..self.clone() }
    }

    pub fn dim(&self) -> usize {
        self.ifs.dim
    }

    pub fn dimension(&self) -> f64 {
        measure_dimension(&self.weights, &self.ifs.ratios(), self.ifs.dim).map(|m| m.value).unwrap_or(0.0)
    }

    /// Base of the b-adic grid the cylinders coincide with, if any.
    pub fn grid_base(&self) -> Option<u32> {
        self.grid.as_ref().map(|g| g.base)
    }

    /// Exact mass of a cube of the measure's own grid: `p_w` if the cube is the
    /// cylinder of `w`, else 0. `None` when the measure is not grid-aligned
    /// with the cube's base.
    pub fn grid_cube_mass(&self, cube: &BadicCube) -> Option<f64> {
        let g = self.grid.as_ref()?;
        if g.base != cube.base {
            return None;
        }
        let b = g.base as u64;
        let mut mass = 1.0;
        for lvl in 1..=cube.level {
            let digits: Vec<u64> = cube.ancestor(lvl).coords.iter().map(|c| c % b).collect();
            match g.cells.get(&digits) {
                Some(&i) => mass *= self.weights[i],
                None => return Some(0.0),
            }
        }
        Some(mass)
    }

    /// Sum of the masses of all depth-`k` cylinders.
    pub fn total_mass_at_depth(&self, k: u32) -> f64 {
        let mut layer = vec![1.0f64];
        for _ in 0..k {
            layer = layer.iter().flat_map(|m| self.weights.iter().map(move |p| m * p)).collect();
        }
        layer.iter().sum()
    }

    fn descend(&self, classify: impl Fn(&Aabb) -> Rel) -> MassInterval {
        let maps: Vec<Affine> = self.ifs.maps.iter().map(|m| m.affine()).collect();
        let mut lo = 0.0;
        let mut hi = 0.0;
        let mut stack = vec![(Affine::identity(self.ifs.dim), 1.0f64, 0u32)];
        while let Some((a, m, depth)) = stack.pop() {
            match classify(&a.unit_image()) {
                Rel::Inside => {
                    lo += m;
                    hi += m;
                }
                Rel::Outside => {}
                Rel::Boundary if depth >= self.depth_cap => hi += m,
                Rel::Boundary => {
                    for (f, p) in maps.iter().zip(&self.weights) {
                        stack.push((a.then_inner(f), m * p, depth + 1));
                    }
                }
            }
        }
        MassInterval { lo, hi }
    }

    /// `[lo, hi]` for a closed box: cylinders inside vs cylinders meeting it.
    pub fn box_mass(&self, q: &Aabb) -> MassInterval {
        self.descend(|h| {
            if q.contains(h) {
                Rel::Inside
            } else if !q.intersects(h) {
                Rel::Outside
            } else {
                Rel::Boundary
            }
        })
    }

    pub fn ball_mass(&self, b: &Ball) -> MassInterval {
        if b.radius() == 0.0 {
            // Only atoms can charge a point; cylinders shrink to points only in the limit.
            let q = b.bbox();
            let hi = self.descend(|h| if h.intersects(&q) { Rel::Boundary } else { Rel::Outside }).hi;
            let atom = if self.ifs.maps.iter().all(|m| m.ratio < 1.0) { 0.0 } else { hi };
            return MassInterval { lo: 0.0, hi: atom };
        }
        self.box_mass(&b.bbox())
    }

    /// Mass enclosure used for support pruning of a cube `q`:
    /// `lo` = cylinders inside the closed cube, `hi` = cylinders meeting its interior.
    pub fn cube_mass(&self, q: &BadicCube) -> MassInterval {
        if let Some(m) = self.grid_cube_mass(q) {
            return MassInterval { lo: m, hi: m };
        }
        let bb = q.bbox();
        self.descend(|h| {
            if bb.contains(h) && bb.overlaps_interior(h) {
                Rel::Inside
            } else if !bb.overlaps_interior(h) {
                Rel::Outside
            } else {
                Rel::Boundary
            }
        })
    }

    /// Mass of a finite union of closed boxes; `lo` only counts cylinders inside a single box.
    pub fn union_mass(&self, boxes: &[Aabb]) -> MassInterval {
        if boxes.is_empty() {
            return MassInterval { lo: 0.0, hi: 0.0 };
        }
        let index = BoxIndex::new(boxes);
        self.descend(|h| {
            let mut meets = false;
            for q in index.near(h) {
                if q.contains(h) {
                    return Rel::Inside;
                }
                meets |= q.intersects(h);
            }
            if meets {
                Rel::Boundary
            } else {
                Rel::Outside
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LocalDimEstimate {
    pub slope: f64,
    /// Root-mean-square residual of the log-log fit.
    pub residual: f64,
    pub used_radii: Vec<f64>,
    pub excluded_radii: Vec<f64>,
    /// Set when the residual exceeds 0.1.
    pub quality_warning: bool,
}

/// Least-squares slope of `log mid-mass` against `log r`.
pub fn local_dim_estimate(mu: &CylinderMeasure, x: &[f64], radii: &[f64]) -> Result<LocalDimEstimate> {
    if x.len() != mu.dim() {
        return Err(Error::DimensionMismatch { expected: mu.dim(), got: x.len() });
    }
    if radii.len() < 2 {
        return Err(invalid("need at least two radii"));
    }
    let r_min = radii.iter().cloned().fold(f64::INFINITY, f64::min);
    let smallest = mu.ball_mass(&Ball::new(x.to_vec(), r_min)?);
    if smallest.hi <= 0.0 {
        return Err(Error::NotInSupport(format!("zero mass at radius {r_min:e} around {x:?}")));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for &r in radii {
        let m = mu.ball_mass(&Ball::new(x.to_vec(), r)?).mid();
        if m > 0.0 {
            xs.push(r.ln());
            ys.push(m.ln());
            used.push(r);
        } else {
            excluded.push(r);
        }
    }
    if xs.len() < 2 {
        return Err(Error::NotInSupport("fewer than two radii carry mass".into()));
    }
    let LineFit { slope, rms_residual, .. } = least_squares(&xs, &ys)?;
    Ok(LocalDimEstimate {
        slope,
        residual: rms_residual,
        used_radii: used,
        excluded_radii: excluded,
        quality_warning: rms_residual > 0.1,
    })
}

/// `C_{beta,eps} = 6^{-beta/(2 eps)} / 2`.
pub fn doubling_constant(beta: f64, eps: f64) -> f64 {
    0.5 * 6f64.powf(-beta / (2.0 * eps))
}

/// Relative slack on the mass comparison, covering the width of midpoint masses.
const DOUBLING_SLACK: f64 = 1e-6;

/// `(1/n) #{0 <= k < n : mu(B(x, t^-(k+1))) >= C mu(B(x, t^-k))}`.
pub fn doubling_fraction(mu: &CylinderMeasure, x: &[f64], t: f64, n: u32, c: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("n must be >= 1"));
    }
    if !(t > 1.0) {
        return Err(invalid(format!("scale factor t must exceed 1, got {t}")));
    }
    let mass = |k: u32| -> Result<f64> { Ok(mu.ball_mass(&Ball::new(x.to_vec(), t.powi(-(k as i32)))?).mid()) };
    let mut prev = mass(0)?;
    let mut hits = 0;
    for k in 0..n {
        let next = mass(k + 1)?;
        if next >= c * prev * (1.0 - DOUBLING_SLACK) {
            hits += 1;
        }
        prev = next;
    }
    Ok(hits as f64 / n as f64)
}

/// Finite-resolution membership in the set of points with local dimension in
/// `[alpha, beta]` and mass bound `mu(B(x,r)) <= r^{dim - eps}` on the grid.
pub fn e_mu_member(
    mu: &CylinderMeasure,
    x: &[f64],
    alpha: f64,
    beta: f64,
    rho: f64,
    eps: f64,
    radii: &[f64],
) -> Result<bool> {
    if radii.iter().any(|&r| !(r > 0.0 && r <= rho)) {
        return Err(invalid("radii grid must lie in (0, rho]"));
    }
    let est = match local_dim_estimate(mu, x, radii) {
        Ok(e) => e,
        Err(Error::NotInSupport(_)) => return Ok(false),
        Err(e) => return Err(e),
    };
    let tol = 1e-6;
    if est.slope < alpha - tol || est.slope > beta + tol {
        return Ok(false);
    }
    for &r in radii {
        let hi = mu.ball_mass(&Ball::new(x.to_vec(), r)?).hi;
        if hi > r.powf(est.slope - eps) {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    const LOG23: f64 = std::f64::consts::LN_2 / 1.0986122886681098;

    #[test]
    fn simdim_examples() {
        let s = similarity_dimension(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((s - 0.6309297535714574).abs() < 1e-12);
        assert!((similarity_dimension(&[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-12);
        assert!((similarity_dimension(&[0.5, 0.25, 0.25]).unwrap() - 1.0).abs() < 1e-12);
        assert!(similarity_dimension(&[0.5]).is_err());
        assert!(similarity_dimension(&[0.5, 1.0]).is_err());
        assert!(similarity_dimension(&[0.5, 0.0]).is_err());
    }

    #[test]
    fn measure_dimension_examples() {
        let m = measure_dimension(&[0.5, 0.5], &[1.0 / 3.0, 1.0 / 3.0], 1).unwrap();
        assert!((m.value - LOG23).abs() < 1e-12);
        assert!(m.regularity_assumed);
        assert!((measure_dimension(&[0.5, 0.5], &[0.5, 0.5], 1).unwrap().value - 1.0).abs() < 1e-12);
        let v = measure_dimension(&[0.25, 0.75], &[1.0 / 3.0, 1.0 / 3.0], 1).unwrap().value;
        assert!((v - 0.51185).abs() < 1e-5);
        assert!(measure_dimension(&[0.0, 1.0], &[0.5, 0.5], 1).is_err());
    }

    #[test]
    fn words_compose_in_order() {
        let ifs = Ifs::middle_third();
        let w = Word(vec![1, 0]);
        // f_2(f_1(0)) = 2/3
        assert!((w.apply(&ifs, &[0.0])[0] - 2.0 / 3.0).abs() < 1e-15);
        let h = w.hull(&ifs);
        assert!((h.lo[0] - 2.0 / 3.0).abs() < 1e-15 && (h.hi[0] - 7.0 / 9.0).abs() < 1e-15);
        assert_eq!(w.to_string(), "21");
        assert!((w.ratio(&ifs) - 1.0 / 9.0).abs() < 1e-16);
    }

    #[test]
    fn scale_words() {
        let ifs = Ifs::middle_third();
        let w = cylinders_at_scale(&ifs, 1.0 / 3.0, 2).unwrap();
        assert_eq!(w.len(), 4);
        assert!(w.iter().all(|w| w.len() == 2));
        let e = cylinders_at_scale(&ifs, 0.3, 0).unwrap();
        assert_eq!(e, vec![Word::empty()]);
        let uneven = Ifs::new(vec![
            SimilarityMap::new(0.5, vec![0.0]).unwrap(),
            SimilarityMap::new(0.25, vec![0.75]).unwrap(),
        ])
        .unwrap();
        let names: Vec<String> = cylinders_at_scale(&uneven, 0.5, 2).unwrap().iter().map(|w| w.to_string()).collect();
        assert_eq!(names, vec!["11", "12", "2"]);
    }

    #[test]
    fn cantor_ball_masses() {
        let mu = CylinderMeasure::cantor(8);
        let m = mu.ball_mass(&Ball::new(vec![1.0 / 6.0], 1.0 / 6.0).unwrap());
        assert!((m.lo - 0.5).abs() < 1e-12 && (m.hi - 0.5).abs() < 1e-12);
        let all = mu.ball_mass(&Ball::new(vec![0.5], 0.75).unwrap());
        assert_eq!((all.lo, all.hi), (1.0, 1.0));
        let gap = mu.ball_mass(&Ball::new(vec![0.5], 0.1).unwrap());
        assert_eq!(gap.hi, 0.0);
    }

    #[test]
    fn lebesgue_interval_mass() {
        let mu = CylinderMeasure::lebesgue(2, 1, 8).unwrap();
        let m = mu.ball_mass(&Ball::new(vec![0.5], 0.25).unwrap());
        assert!((m.lo - (0.5 - 2f64.powi(-7))).abs() < 1e-15 || (m.lo - 0.5).abs() < 1e-15);
        assert!((m.hi - (0.5 + 2f64.powi(-7))).abs() < 1e-15);
    }

    #[test]
    fn degenerate_ball_has_no_atom() {
        let mu = CylinderMeasure::cantor(10);
        let m = mu.ball_mass(&Ball::degenerate(vec![0.0]).unwrap());
        assert_eq!((m.lo, m.hi), (0.0, 0.0));
    }

    #[test]
    fn grid_masses() {
        let mu = CylinderMeasure::cantor(4);
        assert_eq!(mu.grid_base(), Some(3));
        assert_eq!(mu.grid_cube_mass(&BadicCube::new(3, 2, vec![8]).unwrap()), Some(0.25));
        assert_eq!(mu.grid_cube_mass(&BadicCube::new(3, 2, vec![1]).unwrap()), Some(0.0));
        assert_eq!(mu.grid_cube_mass(&BadicCube::new(2, 2, vec![1]).unwrap()), None);
        let leb = CylinderMeasure::lebesgue(2, 2, 4).unwrap();
        assert_eq!(leb.grid_cube_mass(&BadicCube::new(2, 3, vec![5, 2]).unwrap()), Some(1.0 / 64.0));
    }

    #[test]
    fn local_dimension_examples() {
        let leb = CylinderMeasure::lebesgue(2, 1, 30).unwrap();
        let radii: Vec<f64> = (3..=10).map(|k| 2f64.powi(-k)).collect();
        let e = local_dim_estimate(&leb, &[0.5], &radii).unwrap();
        assert!((e.slope - 1.0).abs() < 0.02);
        let mu = CylinderMeasure::cantor(14);
        let radii: Vec<f64> = (2..=8).map(|k| 3f64.powi(-k)).collect();
        let e = local_dim_estimate(&mu, &[0.0], &radii).unwrap();
        assert!((e.slope - LOG23).abs() < 0.02);
        assert!(!e.quality_warning);
        let radii: Vec<f64> = (2..=5).map(|k| 0.1 * 2f64.powi(-k)).collect();
        assert!(matches!(local_dim_estimate(&mu, &[0.5], &radii), Err(Error::NotInSupport(_))));
    }

    #[test]
    fn doubling_examples() {
        let leb = CylinderMeasure::lebesgue(2, 1, 40).unwrap();
        assert_eq!(doubling_fraction(&leb, &[0.5], 5.5, 6, 1.0 / 5.5).unwrap(), 1.0);
        let mu = CylinderMeasure::cantor(36);
        let c = doubling_constant(LOG23, 0.5);
        let f = doubling_fraction(&mu, &[0.0], 5.5, 20, c).unwrap();
        assert!((0.5..=1.0).contains(&f));
        assert_eq!(doubling_fraction(&mu, &[0.3], 5.5, 8, 0.0).unwrap(), 1.0);
    }

    #[test]
    fn e_mu_examples() {
        let mu = CylinderMeasure::cantor(16);
        let grid: Vec<f64> = (2..=9).map(|k| 3f64.powi(-k)).collect();
        assert!(e_mu_member(&mu, &[0.0], 0.63, 0.64, 1.0 / 9.0, 0.1, &grid).unwrap());
        let leb = CylinderMeasure::lebesgue(2, 1, 40).unwrap();
        let grid: Vec<f64> = (5..=12).map(|k| 2f64.powi(-k)).collect();
        assert!(e_mu_member(&leb, &[0.5], 1.0, 1.0, 1.0 / 32.0, 0.2, &grid).unwrap());
        assert!(!e_mu_member(&leb, &[0.5], 0.2, 0.3, 1.0 / 32.0, 0.2, &grid).unwrap());
    }
}
