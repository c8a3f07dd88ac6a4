//! Closed-form dimension bounds and empirical critical exponents.

use crate::content::{essential_upper, BoxSet, CubeSet};
use crate::covering::BallFamily;
use crate::error::{invalid, Error, Result};
use crate::geometry::{shrink_ball, Aabb, Ball};
use crate::ifs::{similarity_dimension, CylinderMeasure, MassInterval};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FormulaId {
    ShrunkBall,
    Rectangle,
    Target,
    Mahler,
    Jarnik,
}

/// A lower bound on a Hausdorff dimension; `equality_claimed` marks the cases
/// where the bound is known to be attained.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BoundResult {
    pub formula: FormulaId,
    pub value: f64,
    pub equality_claimed: bool,
    /// Only for the Mahler formula: the first term of the minimum is active.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub saturated: Option<bool>,
    pub inputs: Value,
}

fn check_delta(delta: f64) -> Result<()> {
    if !(delta >= 1.0 && delta.is_finite()) {
        return Err(invalid(format!("delta must be >= 1, got {delta}")));
    }
    Ok(())
}

fn check_tau(tau: &[f64]) -> Result<()> {
    if tau.is_empty() {
        return Err(invalid("tau is empty"));
    }
    if tau[0] < 1.0 {
        return Err(invalid(format!("tau_1 must be >= 1, got {}", tau[0])));
    }
    if tau.windows(2).any(|w| w[0] > w[1]) {
        return Err(invalid(format!("tau must be non-decreasing, got {tau:?}")));
    }
    Ok(())
}

/// `dim_mu / delta`.
pub fn shrunk_ball_bound(dim_mu: f64, delta: f64) -> Result<BoundResult> {
    check_delta(delta)?;
    if !(dim_mu > 0.0) {
        return Err(invalid(format!("measure dimension must be positive, got {dim_mu}")));
    }
    Ok(BoundResult {
        formula: FormulaId::ShrunkBall,
        value: dim_mu / delta,
        equality_claimed: false,
        saturated: None,
        inputs: json!({ "dim_mu": dim_mu, "delta": delta }),
    })
}

/// `1/delta` for rational approximation in `[0,1]`.
pub fn jarnik_bound(delta: f64) -> Result<BoundResult> {
    check_delta(delta)?;
    Ok(BoundResult {
        formula: FormulaId::Jarnik,
        value: 1.0 / delta,
        equality_claimed: true,
        saturated: None,
        inputs: json!({ "delta": delta }),
    })
}

/// `min_i (dim_mu + sum_{j<=i} (tau_i - tau_j)) / tau_i`.
pub fn rect_bound(dim_mu: f64, tau: &[f64]) -> Result<BoundResult> {
    check_tau(tau)?;
    if !(dim_mu > 0.0) {
        return Err(invalid(format!("measure dimension must be positive, got {dim_mu}")));
    }
    let value = (0..tau.len())
        .map(|i| (dim_mu + tau[..=i].iter().map(|tj| tau[i] - tj).sum::<f64>()) / tau[i])
        .fold(f64::INFINITY, f64::min);
    Ok(BoundResult {
        formula: FormulaId::Rectangle,
        value,
        equality_claimed: false,
        saturated: None,
        inputs: json!({ "dim_mu": dim_mu, "tau": tau }),
    })
}

/// `min(dim_sim, d) / delta` for shrinking targets around IFS orbits.
pub fn target_bound(ratios: &[f64], delta: f64, d: usize) -> Result<BoundResult> {
    check_delta(delta)?;
    let dim_sim = similarity_dimension(ratios)?;
    if dim_sim > d as f64 + 1e-12 {
        return Err(Error::DimensionTooLarge { dim_sim, d });
    }
    Ok(BoundResult {
        formula: FormulaId::Target,
        value: dim_sim.min(d as f64) / delta,
        equality_claimed: true,
        saturated: None,
        inputs: json!({ "ratios": ratios, "delta": delta, "d": d }),
    })
}

/// `min(log 2/log 3, 1/delta)`; saturated while `delta <= log 3/log 2`.
pub fn mahler_bound(delta: f64) -> Result<BoundResult> {
    check_delta(delta)?;
    let cantor = 2f64.ln() / 3f64.ln();
    Ok(BoundResult {
        formula: FormulaId::Mahler,
        value: cantor.min(1.0 / delta),
        equality_claimed: true,
        saturated: Some(delta <= 1.0 / cantor * (1.0 + 1e-15)),
        inputs: json!({ "delta": delta }),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CriticalExponent {
    /// The content test holds at `lo` ...
    pub lo: f64,
    /// ... and fails at `hi` (unless both equal `d` or both 0).
    pub hi: f64,
    pub mass: MassInterval,
    /// The set has no essential content at any exponent.
    pub zero_content: bool,
    pub steps: u32,
}

impl CriticalExponent {
    pub fn value(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Bracket around `sup{s : essential upper content of U at s >= lo-mass of B}`.
pub fn critical_exponent<S: CubeSet + ?Sized>(
    b: &Ball,
    u: &S,
    mu: &CylinderMeasure,
    tol: f64,
    max_level: u32,
) -> Result<CriticalExponent> {
    if !(tol > 0.0) {
        return Err(invalid("tolerance must be positive"));
    }
    let mass = mu.ball_mass(b);
    if mass.lo <= 0.0 {
        return Err(Error::Precondition(format!("ball {b:?} has zero lower mass")));
    }
    let holds = |s: f64| -> Result<bool> { Ok(essential_upper(u, mu, s, max_level)? >= mass.lo) };
    if !holds(0.0)? {
        return Ok(CriticalExponent { lo: 0.0, hi: 0.0, mass, zero_content: true, steps: 0 });
    }
    let d = u.dim() as f64;
    if holds(d)? {
        return Ok(CriticalExponent { lo: d, hi: d, mass, zero_content: false, steps: 0 });
    }
    let (mut lo, mut hi, mut steps) = (0.0, d, 0);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if holds(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
        steps += 1;
    }
    Ok(CriticalExponent { lo, hi, mass, zero_content: false, steps })
}

#[derive(Clone, Debug, Serialize)]
pub struct TExponent {
    pub t: f64,
    /// `dim^2 / (delta t)`.
    pub s_delta: f64,
    pub dim: f64,
    /// `(index, log content / log |B^delta|)` per ball with positive content.
    pub per_ball: Vec<(u64, f64)>,
    /// Balls whose shrunk version carries no essential content.
    pub null_balls: usize,
}

/// Largest `log H^{mu, dim-eps}(B^delta) / log |B^delta|` over the balls indexed in `lo..=hi`.
/// Shrunk balls are clipped to the unit cube.
#[allow(clippy::too_many_arguments)]
pub fn t_exponent(
    mu: &CylinderMeasure,
    balls: &BallFamily,
    delta: f64,
    eps: f64,
    lo: u64,
    hi: u64,
    base: u32,
    max_level: u32,
) -> Result<TExponent> {
    check_delta(delta)?;
    let dim = mu.dimension();
    if !(eps > 0.0 && eps < dim) {
        return Err(invalid(format!("eps must lie in (0, dim) = (0, {dim}), got {eps}")));
    }
    let window: Vec<_> = balls.window(lo, hi).collect();
    if window.is_empty() {
        return Err(Error::Empty(format!("no balls indexed in [{lo}, {hi}]")));
    }
    let unit = Aabb::unit(mu.dim());
    let vals = window
        .par_iter()
        .map(|b| -> Result<Option<(u64, f64)>> {
            let shrunk = shrink_ball(&b.ball, delta)?;
            let Some(clip) = shrunk.bbox().intersection(&unit) else { return Ok(None) };
            let set = BoxSet::new(vec![clip], base)?;
            let up = essential_upper(&set, mu, dim - eps, max_level)?;
            Ok((up > 0.0).then(|| (b.index, up.ln() / shrunk.diameter().ln())))
        })
        .collect::<Result<Vec<_>>>()?;
    let null_balls = vals.iter().filter(|v| v.is_none()).count();
    let per_ball: Vec<(u64, f64)> = vals.into_iter().flatten().collect();
    if per_ball.is_empty() {
        return Err(Error::Empty("every shrunk ball in the window is null".into()));
    }
    let t = per_ball.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(TExponent { t, s_delta: dim * dim / (delta * t), dim, per_ball, null_balls })
}
