//! Regions of `R^d` under the sup-norm.
//!
//! Balls are cubes: `B(x, r) = prod [x_i - r, x_i + r]`, so `|B| = 2r`. All
//! regions are closed. Coordinate comparisons carry a slack of a few ulps
//! relative to the magnitude of the numbers compared, which absorbs rounding in
//! triadic coordinates without blurring small features near the origin.

use crate::error::{invalid, Error, Result};
use serde::{Deserialize, Serialize};

const ULP_SLACK: f64 = 64.0 * f64::EPSILON;

/// `a <= b` up to rounding.
#[inline]
pub fn le(a: f64, b: f64) -> bool {
    a <= b + ULP_SLACK * a.abs().max(b.abs())
}

/// `a < b` beyond rounding.
#[inline]
pub fn lt(a: f64, b: f64) -> bool {
    a < b - ULP_SLACK * a.abs().max(b.abs())
}

fn check_point(x: &[f64], what: &str) -> Result<()> {
    if x.is_empty() {
        return Err(invalid(format!("{what}: empty coordinate vector")));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(invalid(format!("{what}: non-finite coordinate")));
    }
    Ok(())
}

/// Closed axis-aligned box, the common currency of the region types.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl Aabb {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Self {
        debug_assert_eq!(lo.len(), hi.len());
        Aabb { lo, hi }
    }

    pub fn unit(d: usize) -> Self {
        Aabb { lo: vec![0.0; d], hi: vec![1.0; d] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Sup-norm diameter, the longest side.
    pub fn diameter(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(0.0, f64::max)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| (b - a).max(0.0)).product()
    }

    pub fn contains_point(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(i, &v)| le(self.lo[i], v) && le(v, self.hi[i]))
    }

    /// Closed boxes share a point.
    pub fn intersects(&self, o: &Aabb) -> bool {
        (0..self.dim()).all(|i| le(self.lo[i], o.hi[i]) && le(o.lo[i], self.hi[i]))
    }

    /// `o` meets the interior of `self` (for two fat boxes: overlap of positive volume).
    pub fn overlaps_interior(&self, o: &Aabb) -> bool {
        (0..self.dim()).all(|i| lt(self.lo[i], o.hi[i]) && lt(o.lo[i], self.hi[i]))
    }

    /// `o ⊆ self`.
    pub fn contains(&self, o: &Aabb) -> bool {
        (0..self.dim()).all(|i| le(self.lo[i], o.lo[i]) && le(o.hi[i], self.hi[i]))
    }

    pub fn intersection(&self, o: &Aabb) -> Option<Aabb> {
        let lo: Vec<f64> = self.lo.iter().zip(&o.lo).map(|(a, b)| a.max(*b)).collect();
        let hi: Vec<f64> = self.hi.iter().zip(&o.hi).map(|(a, b)| a.min(*b)).collect();
        if lo.iter().zip(&hi).all(|(a, b)| a <= b) {
            Some(Aabb { lo, hi })
        } else {
            None
        }
    }

    pub fn within_unit(&self) -> bool {
        Aabb::unit(self.dim()).contains(self)
    }

    fn require_unit(&self) -> Result<()> {
        if self.within_unit() {
            Ok(())
        } else {
            Err(Error::OutsideUnitCube { lo: self.lo.clone(), hi: self.hi.clone() })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    center: Vec<f64>,
    radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        check_point(&center, "ball center")?;
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(invalid(format!("ball radius must be positive and finite, got {radius}")));
        }
        Ok(Ball { center, radius })
    }

    /// Radius-zero ball, only meaningful as a mass query.
    pub fn degenerate(center: Vec<f64>) -> Result<Self> {
        check_point(&center, "ball center")?;
        Ok(Ball { center, radius: 0.0 })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn diameter(&self) -> f64 {
        2.0 * self.radius
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.bbox().contains_point(x)
    }

    /// `tB`: same center, radius times `t`.
    pub fn dilate(&self, t: f64) -> Ball {
        Ball { center: self.center.clone(), radius: self.radius * t }
    }

    pub fn bbox(&self) -> Aabb {
        Aabb {
            lo: self.center.iter().map(|c| c - self.radius).collect(),
            hi: self.center.iter().map(|c| c + self.radius).collect(),
        }
    }

    pub fn intersects(&self, o: &Ball) -> bool {
        self.bbox().intersects(&o.bbox())
    }

    /// Exact (no slack) intersection test, used where a precondition is checked.
    pub fn intersects_exact(&self, o: &Ball) -> bool {
        sup_dist(&self.center, &o.center) <= self.radius + o.radius
    }

    pub fn contains_ball(&self, o: &Ball) -> bool {
        self.bbox().contains(&o.bbox())
    }

    pub fn contains_ball_exact(&self, o: &Ball) -> bool {
        sup_dist(&self.center, &o.center) + o.radius <= self.radius
    }

    /// Interiors are disjoint (closed balls may touch).
    pub fn interiors_disjoint(&self, o: &Ball) -> bool {
        !self.bbox().overlaps_interior(&o.bbox())
    }
}

pub fn sup_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Boxes bucketed along the first axis, for neighbourhood queries.
#[derive(Clone, Debug)]
pub struct BoxIndex<'a> {
    boxes: &'a [Aabb],
    lo: f64,
    width: f64,
    buckets: Vec<Vec<u32>>,
}

impl<'a> BoxIndex<'a> {
    pub fn new(boxes: &'a [Aabb]) -> Self {
        let lo = boxes.iter().map(|b| b.lo[0]).fold(f64::INFINITY, f64::min);
        let hi = boxes.iter().map(|b| b.hi[0]).fold(f64::NEG_INFINITY, f64::max);
        let n = boxes.len().clamp(1, 1 << 14);
        let width = ((hi - lo) / n as f64).max(f64::MIN_POSITIVE);
        let mut buckets = vec![Vec::new(); n];
        let mut idx = BoxIndex { boxes, lo, width, buckets: Vec::new() };
        for (i, b) in boxes.iter().enumerate() {
            let (a, z) = idx.span(b.lo[0], b.hi[0], n);
            for bucket in &mut buckets[a..=z] {
                bucket.push(i as u32);
            }
        }
        idx.buckets = buckets;
        idx
    }

    fn span(&self, a: f64, z: f64, n: usize) -> (usize, usize) {
        let f = |x: f64| (((x - self.lo) / self.width).floor().max(0.0) as usize).min(n - 1);
        // one bucket of margin absorbs the comparison slack
        (f(a).saturating_sub(1), (f(z) + 1).min(n - 1))
    }

    /// Boxes whose first-axis extent may meet that of `h` (with repeats).
    pub fn near<'b>(&'b self, h: &Aabb) -> impl Iterator<Item = &'a Aabb> + 'b {
        let n = self.buckets.len();
        let (a, z) = if h.hi[0] < self.lo - self.width || h.lo[0] > self.lo + self.width * (n as f64 + 1.0) {
            (1, 0)
        } else {
            self.span(h.lo[0], h.hi[0], n)
        };
        let boxes = self.boxes;
        self.buckets[a.min(n)..(z + 1).min(n)].iter().flatten().map(move |&i| &boxes[i as usize])
    }
}

/// `B^delta = B(x, r^delta)`.
pub fn shrink_ball(b: &Ball, delta: f64) -> Result<Ball> {
    if !(delta >= 1.0 && delta.is_finite()) {
        return Err(invalid(format!("contraction exponent must be >= 1, got {delta}")));
    }
    if b.radius > 1.0 && delta > 1.0 {
        return Err(invalid(format!(
            "radius {} > 1 would grow under r^delta; contraction needs radius <= 1",
            b.radius
        )));
    }
    Ok(Ball { center: b.center.clone(), radius: b.radius.powf(delta) })
}

/// Closed cube `prod [c_i b^-k, (c_i + 1) b^-k]`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct BadicCube {
    pub base: u32,
    pub level: u32,
    pub coords: Vec<u64>,
}

/// `b^k` if it fits comfortably in a u64.
pub fn grid_size(base: u32, level: u32) -> Option<u64> {
    let n = (base as u64).checked_pow(level)?;
    (n <= 1u64 << 62).then_some(n)
}

impl BadicCube {
    pub fn new(base: u32, level: u32, coords: Vec<u64>) -> Result<Self> {
        if base < 2 {
            return Err(invalid(format!("base must be >= 2, got {base}")));
        }
        if coords.is_empty() {
            return Err(invalid("cube needs at least one coordinate"));
        }
        let n = grid_size(base, level)
            .ok_or_else(|| invalid(format!("level {level} too deep for base {base}")))?;
        if coords.iter().any(|&c| c >= n) {
            return Err(invalid(format!("cube coordinate out of range [0, {n})")));
        }
        Ok(BadicCube { base, level, coords })
    }

    pub fn root(base: u32, d: usize) -> Self {
        BadicCube { base, level: 0, coords: vec![0; d] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn side(&self) -> f64 {
        (self.base as f64).powi(-(self.level as i32))
    }

    pub fn diameter(&self) -> f64 {
        self.side()
    }

    pub fn bbox(&self) -> Aabb {
        let n = (self.base as f64).powi(self.level as i32);
        Aabb {
            lo: self.coords.iter().map(|&c| c as f64 / n).collect(),
            hi: self.coords.iter().map(|&c| (c + 1) as f64 / n).collect(),
        }
    }

    pub fn children(&self) -> Vec<BadicCube> {
        let b = self.base as u64;
        let d = self.dim();
        let count = b.pow(d as u32);
        (0..count)
            .map(|mut idx| {
                let mut coords = vec![0; d];
                for i in (0..d).rev() {
                    coords[i] = self.coords[i] * b + idx % b;
                    idx /= b;
                }
                BadicCube { base: self.base, level: self.level + 1, coords }
            })
            .collect()
    }

    pub fn parent(&self) -> Option<BadicCube> {
        (self.level > 0).then(|| self.ancestor(self.level - 1))
    }

    /// Ancestor at `level <= self.level` (itself when equal).
    pub fn ancestor(&self, level: u32) -> BadicCube {
        debug_assert!(level <= self.level);
        let f = (self.base as u64).pow(self.level - level);
        BadicCube { base: self.base, level, coords: self.coords.iter().map(|c| c / f).collect() }
    }

    /// `other ⊆ self` as cubes of the same grid.
    pub fn contains_cube(&self, other: &BadicCube) -> bool {
        other.base == self.base && other.level >= self.level && other.ancestor(self.level) == *self
    }
}

/// `R_tau(x, r) = prod [x_i - r^{tau_i}/2, x_i + r^{tau_i}/2]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnisoRect {
    center: Vec<f64>,
    r: f64,
    tau: Vec<f64>,
}

impl AnisoRect {
    pub fn new(center: Vec<f64>, r: f64, tau: Vec<f64>) -> Result<Self> {
        check_point(&center, "rectangle center")?;
        if center.len() != tau.len() {
            return Err(Error::DimensionMismatch { expected: center.len(), got: tau.len() });
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(invalid(format!("rectangle scale must be positive, got {r}")));
        }
        if tau[0] < 1.0 || tau.windows(2).any(|w| w[0] > w[1]) {
            return Err(invalid(format!("tau must satisfy 1 <= tau_1 <= ... <= tau_d, got {tau:?}")));
        }
        Ok(AnisoRect { center, r, tau })
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn side(&self, i: usize) -> f64 {
        self.r.powf(self.tau[i])
    }

    pub fn bbox(&self) -> Aabb {
        let d = self.center.len();
        Aabb {
            lo: (0..d).map(|i| self.center[i] - self.side(i) / 2.0).collect(),
            hi: (0..d).map(|i| self.center[i] + self.side(i) / 2.0).collect(),
        }
    }
}

/// A region that can be rasterized onto a b-adic grid.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    Ball(Ball),
    Rect(AnisoRect),
    Cube(BadicCube),
}

impl Region {
    pub fn bbox(&self) -> Aabb {
        match self {
            Region::Ball(b) => b.bbox(),
            Region::Rect(r) => r.bbox(),
            Region::Cube(c) => c.bbox(),
        }
    }

    pub fn dim(&self) -> usize {
        self.bbox().dim()
    }
}

/// All level-`level` cubes whose closed cube meets the closed region, in
/// lexicographic order of coordinates.
pub fn badic_cover(region: &Region, base: u32, level: u32) -> Result<Vec<BadicCube>> {
    if base < 2 {
        return Err(invalid(format!("base must be >= 2, got {base}")));
    }
    let bb = region.bbox();
    bb.require_unit()?;
    let n = grid_size(base, level).ok_or_else(|| invalid("level too deep for base"))?;
    let nf = n as f64;
    let ranges: Vec<(u64, u64)> = (0..bb.dim())
        .map(|i| {
            let lo = (bb.lo[i] * nf).ceil() - 1.0;
            let hi = (bb.hi[i] * nf).floor();
            let lo = if lo < 0.0 { 0 } else { lo as u64 };
            let hi = if hi >= nf { n - 1 } else { hi as u64 };
            (lo, hi)
        })
        .collect();
    let total: f64 = ranges.iter().map(|(a, b)| (b + 1 - a) as f64).product();
    if total > 5e7 {
        return Err(Error::Budget(format!("cover would hold {total:.0} cubes")));
    }
    let mut out = Vec::with_capacity(total as usize);
    let mut cur: Vec<u64> = ranges.iter().map(|r| r.0).collect();
    loop {
        out.push(BadicCube { base, level, coords: cur.clone() });
        let mut i = cur.len();
        loop {
            if i == 0 {
                return Ok(out);
            }
            i -= 1;
            if cur[i] < ranges[i].1 {
                cur[i] += 1;
                break;
            }
            cur[i] = ranges[i].0;
        }
    }
}

/// Geometric engulfing: for `A ∩ B ≠ ∅`, `A ⊄ qB`, `q >= 3`, returns whether `qB ⊆ 5A`.
///
/// Violated preconditions are reported as errors, never as `false`.
pub fn engulf_check(a: &Ball, b: &Ball, q: f64) -> Result<bool> {
    if !(q >= 3.0) {
        return Err(invalid(format!("dilation factor must be >= 3, got {q}")));
    }
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: b.dim() });
    }
    if !a.intersects_exact(b) {
        return Err(Error::Precondition("balls do not intersect".into()));
    }
    if b.dilate(q).contains_ball_exact(a) {
        return Err(Error::Precondition(format!("A is contained in {q}B")));
    }
    Ok(a.dilate(5.0).contains_ball(&b.dilate(q)))
}

/// A cover element: ball or b-adic cube.
#[derive(Clone, Debug, PartialEq)]
pub enum CoverElement {
    Ball(Ball),
    Cube(BadicCube),
}

impl CoverElement {
    pub fn diameter(&self) -> f64 {
        match self {
            CoverElement::Ball(b) => b.diameter(),
            CoverElement::Cube(c) => c.diameter(),
        }
    }

    pub fn bbox(&self) -> Aabb {
        match self {
            CoverElement::Ball(b) => b.bbox(),
            CoverElement::Cube(c) => c.bbox(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Cover {
    pub elements: Vec<CoverElement>,
    pub s: f64,
}

impl Cover {
    /// `sum |element|^s`.
    pub fn cost(&self) -> f64 {
        self.elements.iter().map(|e| e.diameter().powf(self.s)).sum()
    }

    pub fn covers_point(&self, x: &[f64]) -> bool {
        self.elements.iter().any(|e| e.bbox().contains_point(x))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ball(c: &[f64], r: f64) -> Ball {
        Ball::new(c.to_vec(), r).unwrap()
    }

    #[test]
    fn shrink_examples() {
        let b = ball(&[0.5], 0.25);
        assert_eq!(shrink_ball(&b, 1.0).unwrap(), b);
        assert_eq!(shrink_ball(&b, 2.0).unwrap().radius(), 0.0625);
        let r = shrink_ball(&ball(&[1.0 / 3.0, 1.0 / 3.0], 1e-2), 1.5).unwrap().radius();
        assert!((r - 1e-3).abs() < 1e-15);
        assert!(shrink_ball(&ball(&[0.5], 2.0), 1.5).is_err());
        assert!(shrink_ball(&ball(&[0.5], 2.0), 1.0).is_ok());
        assert!(shrink_ball(&b, 0.5).is_err());
    }

    #[test]
    fn cover_full_interval() {
        let c = badic_cover(&Region::Ball(ball(&[0.5], 0.5)), 2, 1).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c[0].coords, vec![0]);
        assert_eq!(c[1].coords, vec![1]);
    }

    #[test]
    fn cover_touching_boundary() {
        let c = badic_cover(&Region::Ball(ball(&[0.25], 0.1)), 2, 2).unwrap();
        let coords: Vec<u64> = c.iter().map(|q| q.coords[0]).collect();
        assert_eq!(coords, vec![0, 1]);
    }

    #[test]
    fn cover_rectangle_grid() {
        let r = AnisoRect::new(vec![0.5, 0.5], 0.5, vec![1.0, 2.0]).unwrap();
        let c = badic_cover(&Region::Rect(r), 2, 2).unwrap();
        assert_eq!(c.len(), 8);
        // lexicographic: x major
        assert_eq!(c[0].coords, vec![0, 1]);
        assert_eq!(c[1].coords, vec![0, 2]);
        assert_eq!(c[7].coords, vec![3, 2]);
    }

    #[test]
    fn cover_rejects_outside() {
        let e = badic_cover(&Region::Ball(ball(&[0.9], 0.2)), 2, 3).unwrap_err();
        assert!(matches!(e, Error::OutsideUnitCube { .. }));
        assert!(e.to_string().contains("clip"));
    }

    #[test]
    fn engulf_examples() {
        let a = ball(&[0.0], 1.0);
        assert!(engulf_check(&a, &ball(&[0.5], 0.1), 3.0).unwrap());
        assert!(engulf_check(&a, &ball(&[1.5], 0.6), 3.0).unwrap());
        assert!(matches!(engulf_check(&a, &ball(&[0.0], 2.0), 3.0), Err(Error::Precondition(_))));
        assert!(matches!(engulf_check(&a, &ball(&[5.0], 0.1), 3.0), Err(Error::Precondition(_))));
    }

    #[test]
    fn cube_family() {
        let c = BadicCube::new(3, 2, vec![4, 7]).unwrap();
        assert_eq!(c.parent().unwrap().coords, vec![1, 2]);
        let kids = c.children();
        assert_eq!(kids.len(), 9);
        assert!(kids.iter().all(|k| c.contains_cube(k)));
        assert!(BadicCube::new(2, 1, vec![2]).is_err());
        assert!(BadicCube::new(2, 70, vec![0]).is_err());
    }

    #[test]
    fn cover_cost() {
        let cov = Cover {
            elements: vec![
                CoverElement::Cube(BadicCube::new(2, 2, vec![0]).unwrap()),
                CoverElement::Ball(ball(&[0.6], 0.125)),
            ],
            s: 1.0,
        };
        assert!((cov.cost() - 0.5).abs() < 1e-15);
        assert!(cov.covers_point(&[0.7]));
        assert!(!cov.covers_point(&[0.3]));
    }
}
