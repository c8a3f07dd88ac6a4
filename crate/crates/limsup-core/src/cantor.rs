//! Finite-depth Cantor-type construction inside a limsup set, its gauge
//! function and an empirical check of the mass bound.

use crate::content::{essential_frostman, essential_upper, BoxSet};
use crate::covering::{besicovitch_families, BallFamily, IndexedBall};
use crate::error::{invalid, Error, Result};
use crate::geometry::{grid_size, sup_dist, Aabb, BadicCube, Ball};
use crate::ifs::CylinderMeasure;
use crate::lab::rational_index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Root,
    Target,
    Intermediate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationNode {
    pub kind: NodeKind,
    /// Generation of the enclosing target (0 at the root).
    pub generation: u32,
    /// Index of `B_n` for target nodes.
    pub index: Option<u64>,
    /// `U_n` for targets, the ball's box for intermediate balls.
    pub region: Aabb,
    pub parent_ball: Option<Ball>,
    /// Unnormalized weight among siblings.
    pub weight: f64,
    pub eta: f64,
    pub children: Vec<GenerationNode>,
}

impl GenerationNode {
    fn leaf(kind: NodeKind, generation: u32, index: Option<u64>, region: Aabb, parent_ball: Option<Ball>, weight: f64) -> Self {
        GenerationNode { kind, generation, index, region, parent_ball, weight, eta: 0.0, children: Vec::new() }
    }

    /// Depth-first iterator over the subtree.
    pub fn walk(&self) -> Vec<&GenerationNode> {
        let mut out = vec![self];
        let mut i = 0;
        while i < out.len() {
            out.extend(out[i].children.iter());
            i += 1;
        }
        out
    }

    /// Target nodes of generation `p`.
    pub fn targets(&self, p: u32) -> Vec<&GenerationNode> {
        self.walk().into_iter().filter(|n| n.kind == NodeKind::Target && n.generation == p).collect()
    }

    fn assign_eta(&mut self, eta: f64) {
        self.eta = eta;
        let total: f64 = self.children.iter().map(|c| c.weight).sum();
        for c in &mut self.children {
            c.assign_eta(eta * c.weight / total);
        }
    }

    /// Largest `|sum of children eta - eta|` over the subtree.
    pub fn conservation_error(&self) -> f64 {
        self.walk()
            .iter()
            .filter(|n| !n.children.is_empty())
            .map(|n| (n.children.iter().map(|c| c.eta).sum::<f64>() - n.eta).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaugeParams {
    pub target: f64,
    pub eps: Vec<f64>,
    pub q4: f64,
    /// Prefactor of the power laws, `2 q4 10^d` by default.
    pub constant: f64,
    /// Smallest target diameter of generations `1..=P`.
    pub min_diameters: Vec<f64>,
}

impl GaugeParams {
    pub fn new(target: f64, eps: Vec<f64>, q4: f64, d: usize, min_diameters: Vec<f64>) -> Result<Self> {
        let g = GaugeParams { target, eps, q4, constant: 2.0 * q4 * 10f64.powi(d as i32), min_diameters };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.target > 0.0) {
            return Err(invalid("target exponent must be positive"));
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) || self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("eps must be positive and strictly decreasing"));
        }
        if self.eps.first().is_some_and(|e| *e >= self.target) {
            return Err(invalid("eps_1 must be below the target exponent"));
        }
        if self.min_diameters.len() > self.eps.len() {
            return Err(invalid("fewer eps values than generations"));
        }
        Ok(())
    }

    /// `s_p = target - eps_p`, `p >= 1`.
    pub fn s(&self, p: usize) -> f64 {
        self.target - self.eps[p - 1]
    }

    /// Exponent of the gauge on the `p`-th bracket.
    pub fn exponent(&self, p: usize) -> f64 {
        self.s(p) - 5.0 * self.eps[p - 1]
    }

    /// Generation bracket of `r`, `None` above the first one.
    pub fn bracket(&self, r: f64) -> Option<usize> {
        let m = &self.min_diameters;
        if m.is_empty() || r >= m[0] / 3.0 {
            return None;
        }
        (1..m.len()).find(|&p| r >= m[p] / 3.0).or(Some(m.len()))
    }
}

/// `zeta(0) = 0`, `zeta = 1` above the first bracket, `K r^{s_p - 5 eps_p}` on the `p`-th.
pub fn gauge(r: f64, g: &GaugeParams) -> f64 {
    if r <= 0.0 {
        return 0.0;
    }
    match g.bracket(r) {
        None => 1.0,
        Some(p) => g.constant * r.powf(g.exponent(p)),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BuildParams {
    pub target: f64,
    pub eps: Vec<f64>,
    /// Index window `[lo, hi]` of the balls of each generation.
    pub windows: Vec<(u64, u64)>,
    pub depth: u32,
    /// Lower bound on the mass fraction covered by generation 1.
    pub ratio_min: f64,
    /// Sibling balls have disjoint dilates by this factor.
    pub dilation: f64,
    /// Intermediate balls are grid cells this many levels below the target's scale.
    pub intermediate_levels: u32,
    pub max_intermediate: usize,
    /// Extra levels resolved by the Frostman measures.
    pub frostman_levels: u32,
    /// Extra levels resolved by the content test.
    pub content_levels: u32,
    pub base: u32,
    pub seed: u64,
    /// Overrides the measured family count in the gauge constant.
    pub q4: Option<f64>,
}

impl BuildParams {
    /// Windows `q in [4,6]` then `q in [40,400]` over `rational_balls`, target `1/delta`.
    pub fn rational(delta: f64, depth: u32, seed: u64) -> Self {
        let qs = [(4u64, 6u64), (40, 400)];
        BuildParams {
            target: 1.0 / delta,
            eps: vec![0.08, 0.04],
            windows: qs.iter().map(|&(a, b)| (rational_index(a), rational_index(b + 1) - 1)).collect(),
            depth,
            ratio_min: 0.05,
            dilation: 4.0,
            intermediate_levels: 3,
            max_intermediate: 64,
            frostman_levels: 12,
            content_levels: 4,
            base: 2,
            seed,
            q4: None,
        }
    }

    pub fn s(&self, p: u32) -> f64 {
        self.target - self.eps[p as usize - 1]
    }

    fn validate(&self, d: usize) -> Result<()> {
        if (self.depth as usize) > self.windows.len() || (self.depth as usize) > self.eps.len() {
            return Err(invalid(format!("depth {} needs as many windows and eps values", self.depth)));
        }
        if !(self.target > 0.0 && self.target <= d as f64) {
            return Err(invalid("target exponent must lie in (0, d]"));
        }
        if self.eps.iter().any(|e| !(*e > 0.0)) || self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(invalid("eps must be positive and strictly decreasing"));
        }
        if self.eps.first().is_some_and(|e| *e >= self.target) {
            return Err(invalid("eps_1 must be below the target exponent"));
        }
        if !(self.dilation >= 1.0) || self.base < 2 || self.max_intermediate == 0 {
            return Err(invalid("need dilation >= 1, base >= 2 and max_intermediate >= 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: u32,
    pub targets: usize,
    pub intermediate: usize,
    pub min_diameter: f64,
    pub eta_total: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Construction {
    pub params: BuildParams,
    pub gauge: GaugeParams,
    /// Mass fraction of `[0,1]^d` carried by the generation-1 balls.
    pub first_ratio: f64,
    pub generations: Vec<GenerationStats>,
    /// Nodes with `mu(B) > (2b)^d |U|^{s_p}`.
    pub kernel_violations: usize,
    /// Intermediate balls with `2 q4 eta(B) / mu(B) > |U|^{-eps_{p+1}}`.
    pub majorant_flags: usize,
    pub root: GenerationNode,
}

struct Ctx<'a> {
    mu: &'a CylinderMeasure,
    balls: &'a BallFamily,
    targets: &'a BallFamily,
    params: &'a BuildParams,
    d: usize,
}

fn level_for(size: f64, base: u32) -> u32 {
    ((1.0 / size).ln() / (base as f64).ln()).ceil().max(0.0) as u32
}

impl<'a> Ctx<'a> {
    fn target_of(&self, b: &IndexedBall) -> Option<Aabb> {
        let u = self.targets.get(b.index)?;
        u.bbox().intersection(&Aabb::unit(self.d))
    }

    /// `U` passes when its essential content at exponent `s` is at least `mu(B)`.
    fn content_test(&self, b: &IndexedBall, s: f64) -> Option<(Aabb, f64)> {
        let m = self.mu.ball_mass(&b.ball).lo;
        if m <= 0.0 {
            return None;
        }
        let u = self.target_of(b)?;
        let side = u.lo.iter().zip(&u.hi).map(|(a, z)| z - a).fold(0.0, f64::max);
        if side <= 0.0 {
            return None;
        }
        let level = level_for(side, self.params.base) + self.params.content_levels;
        let set = BoxSet::new(vec![u.clone()], self.params.base).ok()?;
        let c = essential_upper(&set, self.mu, s, level).ok()?;
        (c >= m).then_some((u, m))
    }

    /// Content-tested candidates inside `region`, greedily thinned to disjoint dilates.
    fn select(&self, window: (u64, u64), region: &Aabb, p: u32) -> Vec<GenerationNode> {
        let s = self.params.s(p);
        let mut cands: Vec<(f64, &IndexedBall, Aabb)> = self
            .balls
            .window(window.0, window.1)
            .filter(|b| region.contains(&b.ball.bbox()))
            .collect::<Vec<_>>()
            .par_iter()
            .filter_map(|b| self.content_test(b, s).map(|(u, m)| (m, *b, u)))
            .collect();
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.index.cmp(&b.1.index)));
        let t = self.params.dilation;
        let mut chosen: Vec<GenerationNode> = Vec::new();
        for (m, b, u) in cands {
            let clash = chosen.iter().any(|c| {
                let o = c.parent_ball.as_ref().unwrap();
                sup_dist(o.center(), b.ball.center()) <= t * (o.radius() + b.ball.radius())
            });
            if !clash {
                chosen.push(GenerationNode::leaf(NodeKind::Target, p, Some(b.index), u, Some(b.ball.clone()), m));
            }
        }
        chosen
    }

    /// Grows intermediate balls and generation `p+1` below a generation-`p` target.
    /// Returns false when nothing survives.
    fn expand(&self, node: &mut GenerationNode, p: u32) -> bool {
        let params = self.params;
        if p >= params.depth {
            return true;
        }
        let window = params.windows[p as usize];
        let u = node.region.clone();
        let future: Vec<Aabb> = self
            .balls
            .window(window.0, window.1)
            .filter_map(|b| b.ball.bbox().intersection(&u))
            .filter(|b| b.volume() > 0.0)
            .collect();
        if future.is_empty() {
            return false;
        }
        let side = u.lo.iter().zip(&u.hi).map(|(a, z)| z - a).fold(0.0, f64::max);
        let level = level_for(side, params.base) + params.intermediate_levels;
        if grid_size(params.base, level + params.frostman_levels).is_none() {
            return false;
        }
        let Ok(set) = BoxSet::new(future, params.base) else {
            return false;
        };
        let Ok(fm) = essential_frostman(&set, self.mu, params.s(p + 1), level + params.frostman_levels) else {
            return false;
        };

        let cells = cells_inside(&u, params.base, level);
        let mut rng = ChaCha20Rng::seed_from_u64(params.seed);
        rng.set_stream(((p as u64) << 48) ^ node.index.unwrap_or(0));
        let mut keyed: Vec<(f64, BadicCube, f64)> = cells
            .into_iter()
            .filter_map(|c| {
                let m = fm.measure.mass(&c);
                (m > 0.0).then_some((c, m))
            })
            .map(|(c, m)| {
                let x: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
                (x.powf(1.0 / m), c, m)
            })
            .collect();
        keyed.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        let mut inter: Vec<GenerationNode> = Vec::new();
        for (_, c, m) in keyed {
            if inter.len() >= params.max_intermediate {
                break;
            }
            let bb = c.bbox();
            let center: Vec<f64> = bb.lo.iter().zip(&bb.hi).map(|(a, z)| 0.5 * (a + z)).collect();
            let cside = c.side();
            if inter.iter().all(|o| sup_dist(o.parent_ball.as_ref().unwrap().center(), &center) > params.dilation * cside) {
                let ball = Ball::new(center, 0.5 * cside).expect("cell center is finite");
                inter.push(GenerationNode::leaf(NodeKind::Intermediate, p, None, bb, Some(ball), m));
            }
        }
        inter.par_iter_mut().for_each(|ib| {
            let mut kids = self.select(window, &ib.region, p + 1);
            kids.retain_mut(|k| self.expand(k, p + 1));
            ib.children = kids;
        });
        inter.retain(|ib| !ib.children.is_empty());
        node.children = inter;
        !node.children.is_empty()
    }
}

fn cells_inside(u: &Aabb, base: u32, level: u32) -> Vec<BadicCube> {
    let n = grid_size(base, level).expect("level within grid limits") as f64;
    let ranges: Vec<(u64, u64)> = u
        .lo
        .iter()
        .zip(&u.hi)
        .map(|(&lo, &hi)| ((lo * n - 1e-9).ceil().max(0.0) as u64, ((hi * n + 1e-9).floor() as u64).min(n as u64)))
        .collect();
    if ranges.iter().any(|(a, z)| z <= a) {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut cur: Vec<u64> = ranges.iter().map(|r| r.0).collect();
    'outer: loop {
        let c = BadicCube { base, level, coords: cur.clone() };
        if u.contains(&c.bbox()) {
            out.push(c);
        }
        for i in (0..cur.len()).rev() {
            cur[i] += 1;
            if cur[i] < ranges[i].1 {
                continue 'outer;
            }
            cur[i] = ranges[i].0;
        }
        return out;
    }
}

/// Builds `depth` generations. `targets` holds `U_n` under the indices of `balls`.
pub fn build(mu: &CylinderMeasure, balls: &BallFamily, targets: &BallFamily, params: &BuildParams) -> Result<Construction> {
    let d = mu.dim();
    params.validate(d)?;
    if targets.len() < balls.len() {
        return Err(invalid("every ball needs a target"));
    }
    let ctx = Ctx { mu, balls, targets, params, d };
    let unit = Aabb::unit(d);
    let mut root = GenerationNode::leaf(NodeKind::Root, 0, None, unit.clone(), None, 1.0);
    let mut first_ratio = 1.0;
    let mut q4 = params.q4.unwrap_or(1.0);

    if params.depth > 0 {
        let w = params.windows[0];
        let first = ctx.select(w, &unit, 1);
        let total = mu.box_mass(&unit).hi;
        first_ratio = first.iter().map(|n| n.weight).sum::<f64>() / total;
        if first.is_empty() || first_ratio < params.ratio_min {
            return Err(Error::Construction {
                generation: 1,
                reason: format!("selected balls carry {first_ratio:.4} of the mass, need {}", params.ratio_min),
            });
        }
        if params.q4.is_none() {
            let inside: Vec<IndexedBall> = balls.window(w.0, w.1).filter(|b| unit.contains(&b.ball.bbox())).cloned().collect();
            let fam = BallFamily::new(inside, balls.radii_to_zero)?;
            q4 = besicovitch_families(&fam, 1.0 / params.dilation)?.len().max(1) as f64;
        }
        let mut first = first;
        first.par_iter_mut().for_each(|n| {
            if !ctx.expand(n, 1) {
                n.children.clear();
                n.weight = -1.0;
            }
        });
        let before = first.len();
        first.retain(|n| n.weight >= 0.0);
        if first.is_empty() {
            return Err(Error::Construction {
                generation: 2,
                reason: format!("none of the {before} generation-1 targets produced descendants"),
            });
        }
        root.children = first;
    }
    root.assign_eta(1.0);

    let mut generations = Vec::new();
    let mut min_diameters = Vec::new();
    for p in 1..=params.depth {
        let ts = root.targets(p);
        if ts.is_empty() {
            return Err(Error::Construction { generation: p as usize, reason: "no targets survived".into() });
        }
        let min_d = ts.iter().map(|n| n.region.diameter()).fold(f64::INFINITY, f64::min);
        min_diameters.push(min_d);
        let intermediate =
            root.walk().iter().filter(|n| n.kind == NodeKind::Intermediate && n.generation + 1 == p).count();
        generations.push(GenerationStats {
            generation: p,
            targets: ts.len(),
            intermediate,
            min_diameter: min_d,
            eta_total: ts.iter().map(|n| n.eta).sum(),
        });
    }

    let kappa = (2.0 * params.base as f64).powi(d as i32);
    let mut kernel_violations = 0;
    let mut majorant_flags = 0;
    for n in root.walk() {
        if n.kind == NodeKind::Target {
            let b = n.parent_ball.as_ref().unwrap();
            if mu.ball_mass(b).hi > kappa * n.region.diameter().powf(params.s(n.generation)) {
                kernel_violations += 1;
            }
            for ib in &n.children {
                let m = mu.ball_mass(ib.parent_ball.as_ref().unwrap()).mid();
                let bound = n.region.diameter().powf(-params.eps[n.generation as usize]);
                if m <= 0.0 || 2.0 * q4 * ib.eta / m > bound {
                    majorant_flags += 1;
                }
            }
        }
    }

    let gauge = GaugeParams::new(params.target, params.eps[..params.depth as usize].to_vec(), q4, d, min_diameters)?;
    Ok(Construction { params: params.clone(), gauge, first_ratio, generations, kernel_violations, majorant_flags, root })
}

/// `eta(A)` by descent: full mass for nodes inside `a`, none for disjoint
/// nodes, and a `mu`-proportional share of partially covered leaves.
pub fn eta_of(node: &GenerationNode, mu: &CylinderMeasure, a: &Aabb) -> f64 {
    if node.eta == 0.0 || !node.region.intersects(a) {
        return 0.0;
    }
    if a.contains(&node.region) {
        return node.eta;
    }
    if node.children.is_empty() {
        let Some(part) = node.region.intersection(a) else { return 0.0 };
        let whole = mu.box_mass(&node.region).mid();
        let share = if whole > 0.0 {
            mu.box_mass(&part).mid() / whole
        } else if node.region.volume() > 0.0 {
            part.volume() / node.region.volume()
        } else {
            1.0
        };
        return node.eta * share.clamp(0.0, 1.0);
    }
    node.children.iter().map(|c| eta_of(c, mu, a)).sum()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MassReport {
    pub samples: usize,
    pub seed: u64,
    pub max_ratio: f64,
    /// Largest ratio among balls small enough to fall in a generation bracket.
    pub max_bracket_ratio: f64,
    pub worst_center: Vec<f64>,
    pub worst_radius: f64,
    pub violations: usize,
    pub tolerance: f64,
    pub conservation_error: f64,
    pub pass: bool,
}

fn random_leaf<'a>(root: &'a GenerationNode, rng: &mut ChaCha20Rng) -> &'a GenerationNode {
    let mut n = root;
    while !n.children.is_empty() {
        n = &n.children[rng.gen_range(0..n.children.len())];
    }
    n
}

/// Samples balls with log-uniform radii and reports the largest `eta(A) / zeta(|A|)`.
pub fn mass_check(c: &Construction, mu: &CylinderMeasure, samples: usize, seed: u64, tolerance: f64) -> MassReport {
    let d = mu.dim();
    let leaves_min = c.root.walk().iter().filter(|n| n.children.is_empty()).map(|n| n.region.diameter()).fold(1.0, f64::min);
    let (lo, hi) = ((leaves_min * 1e-2).max(1e-300).ln(), 0.0);
    let results: Vec<(f64, Vec<f64>, f64)> = (0..samples)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let r = rng.gen_range(lo..=hi).exp();
            let center: Vec<f64> = if i % 2 == 0 {
                (0..d).map(|_| rng.gen_range(0.0..=1.0)).collect()
            } else {
                let leaf = random_leaf(&c.root, &mut rng);
                leaf.region.lo.iter().zip(&leaf.region.hi).map(|(a, z)| if z > a { rng.gen_range(*a..=*z) } else { *a }).collect()
            };
            let a = Ball::new(center.clone(), r).expect("sampled ball is valid");
            let eta = eta_of(&c.root, mu, &a.bbox());
            let z = gauge(a.diameter(), &c.gauge);
            let ratio = if eta == 0.0 { 0.0 } else { eta / z };
            (ratio, center, r)
        })
        .collect();
    let mut worst = (0.0, vec![0.5; d], 0.0);
    let mut violations = 0;
    let mut max_bracket_ratio = 0.0f64;
    for r in results {
        if c.gauge.bracket(2.0 * r.2).is_some() {
            max_bracket_ratio = max_bracket_ratio.max(r.0);
        }
        if r.0 > 1.0 + tolerance {
            violations += 1;
        }
        if r.0 > worst.0 {
            worst = r;
        }
    }
    let conservation_error = c.root.conservation_error();
    MassReport {
        samples,
        seed,
        max_ratio: worst.0,
        max_bracket_ratio,
        worst_center: worst.1,
        worst_radius: worst.2,
        violations,
        tolerance,
        conservation_error,
        pass: violations == 0 && conservation_error <= 1e-12,
    }
}

/// `rational_balls(q_max, 1)` with targets `B_n^delta`, the standard Lebesgue fixture.
pub fn rational_fixture(q_max: u64, delta: f64) -> Result<(BallFamily, BallFamily)> {
    let balls = crate::lab::rational_balls(q_max, 1.0)?;
    let targets = crate::lab::rational_balls(q_max, delta)?;
    Ok((balls, targets))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lebesgue() -> CylinderMeasure {
        CylinderMeasure::lebesgue(2, 1, 48).unwrap()
    }

    #[test]
    fn depth_zero_is_root_only() {
        let (b, t) = rational_fixture(10, 2.0).unwrap();
        let c = build(&lebesgue(), &b, &t, &BuildParams::rational(2.0, 0, 1)).unwrap();
        assert_eq!(c.root.eta, 1.0);
        assert!(c.root.children.is_empty());
        assert_eq!(c.root.region, Aabb::unit(1));
        assert_eq!(gauge(0.3, &c.gauge), 1.0);
    }

    #[test]
    fn gauge_shape() {
        let g = GaugeParams::new(0.5, vec![0.08, 0.04], 2.0, 1, vec![1e-2, 1e-6]).unwrap();
        assert_eq!(gauge(0.0, &g), 0.0);
        assert_eq!(gauge(1e-2 / 3.0, &g), 1.0);
        assert_eq!(g.bracket(1e-3), Some(1));
        assert_eq!(g.bracket(1e-7), Some(2));
        assert_eq!(g.bracket(1e-12), Some(2));
        let (r1, r2) = (1e-8, 1e-10);
        let slope = (gauge(r1, &g) / gauge(r2, &g)).ln() / (r1 / r2).ln();
        assert!((slope - (0.46 - 0.2)).abs() < 1e-12);
        assert!(GaugeParams::new(0.05, vec![0.08], 2.0, 1, vec![]).is_err());
    }

    #[test]
    fn null_targets_fail_at_generation_one() {
        // every target sits in the middle-third gap, where the Cantor measure vanishes
        let (b, _) = rational_fixture(10, 2.0).unwrap();
        let gap = b.balls().iter().map(|x| IndexedBall { index: x.index, ball: Ball::new(vec![0.5], 0.1).unwrap() }).collect();
        let targets = BallFamily::new(gap, false).unwrap();
        let mut params = BuildParams::rational(2.0, 1, 1);
        params.base = 3;
        params.target = 0.6;
        match build(&CylinderMeasure::cantor(20), &b, &targets, &params) {
            Err(Error::Construction { generation: 1, .. }) => {}
            other => panic!("expected a generation-1 failure, got {other:?}"),
        }
    }

    #[test]
    fn one_generation_selection() {
        let (b, t) = rational_fixture(10, 2.0).unwrap();
        let c = build(&lebesgue(), &b, &t, &BuildParams::rational(2.0, 1, 1)).unwrap();
        let gen1 = c.root.targets(1);
        assert!(!gen1.is_empty());
        for (i, x) in gen1.iter().enumerate() {
            let bx = x.parent_ball.as_ref().unwrap();
            assert!(bx.bbox().contains(&x.region));
            for y in &gen1[i + 1..] {
                let by = y.parent_ball.as_ref().unwrap();
                assert!(!bx.dilate(4.0).intersects(&by.dilate(4.0)));
            }
        }
        assert!((gen1.iter().map(|n| n.eta).sum::<f64>() - 1.0).abs() < 1e-12);
        let a = Ball::new(vec![0.5], 1.0).unwrap();
        assert!((eta_of(&c.root, &lebesgue(), &a.bbox()) - 1.0).abs() < 1e-12);
    }
}
