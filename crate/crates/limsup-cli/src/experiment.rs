use crate::io;
use anyhow::{anyhow, bail, Context, Result};
use limsup_core::cantor;
use limsup_core::content::rect_content_slope;
use limsup_core::formulas::{critical_exponent, jarnik_bound, mahler_bound, rect_bound, t_exponent, target_bound};
use limsup_core::geometry::Ball;
use limsup_core::ifs::{CylinderMeasure, Ifs};
use limsup_core::kv::{parse_number, KvFile};
use limsup_core::lab::{jarnik_matched, shrinking_targets, EpsSeq, MahlerTarget};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use std::cell::RefCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

pub const IDS: [&str; 6] = ["jarnik", "mahler", "rects", "targets", "cantor", "content-slopes"];

#[derive(clap::Args)]
pub struct ExperimentArgs {
    /// One of jarnik, mahler, rects, targets, cantor, content-slopes.
    id: Option<String>,
    /// Key-value file with `[experiment]` (id, seed, out) and `[params]` sections.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides one parameter, `key=value`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Parameter lookup that records every value it hands out.
struct Params {
    given: BTreeMap<String, String>,
    used: RefCell<BTreeMap<String, String>>,
}

impl Params {
    fn text(&self, key: &str, default: &str) -> String {
        let v = self.given.get(key).cloned().unwrap_or_else(|| default.to_string());
        self.used.borrow_mut().insert(key.to_string(), v.clone());
        v
    }

    fn optional(&self, key: &str) -> Option<String> {
        let v = self.given.get(key).cloned()?;
        self.used.borrow_mut().insert(key.to_string(), v.clone());
        Some(v)
    }

    fn number(&self, key: &str, default: &str) -> Result<f64> {
        parse_number(&self.text(key, default)).map_err(|e| anyhow!("parameter {key}: {e}"))
    }

    fn integer(&self, key: &str, default: u64) -> Result<u64> {
        let v = self.text(key, &default.to_string());
        v.parse().map_err(|_| anyhow!("parameter {key}: not a non-negative integer: {v:?}"))
    }

    fn numbers(&self, key: &str, default: &str) -> Result<Vec<f64>> {
        split(&self.text(key, default)).map_err(|e| anyhow!("parameter {key}: {e}"))
    }

    /// `;`-separated vectors.
    fn vectors(&self, key: &str, default: &str) -> Result<Vec<Vec<f64>>> {
        self.text(key, default).split(';').map(|v| split(v).map_err(|e| anyhow!("parameter {key}: {e}"))).collect()
    }

    fn check_unused(&self) -> Result<()> {
        let used = self.used.borrow();
        match self.given.keys().find(|k| !used.contains_key(*k)) {
            Some(k) => bail!("unknown parameter {k:?}"),
            None => Ok(()),
        }
    }
}

fn split(s: &str) -> std::result::Result<Vec<f64>, String> {
    let v: Vec<f64> = s.split(|c: char| c == ',' || c.is_whitespace()).filter(|t| !t.is_empty()).map(parse_number).collect::<std::result::Result<_, _>>()?;
    if v.is_empty() {
        return Err("empty list".into());
    }
    Ok(v)
}

#[derive(Clone, Copy, Serialize)]
#[serde(rename_all = "snake_case")]
enum Relation {
    /// `|measured - predicted| <= tolerance`.
    Within,
    /// `measured <= predicted + tolerance`.
    AtMost,
}

#[derive(Serialize)]
struct SummaryRow {
    label: String,
    predicted: f64,
    measured: f64,
    tolerance: f64,
    relation: Relation,
    pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
}

impl SummaryRow {
    fn new(label: String, predicted: f64, measured: f64, tolerance: f64, relation: Relation) -> Self {
        let pass = match relation {
            Relation::Within => (measured - predicted).abs() <= tolerance,
            Relation::AtMost => measured <= predicted + tolerance,
        };
        SummaryRow { label, predicted, measured, tolerance, relation, pass, note: None }
    }
}

struct Outcome {
    claim: &'static str,
    columns: &'static str,
    rows: Vec<String>,
    summary: Vec<SummaryRow>,
}

pub fn run(a: ExperimentArgs, json: bool) -> Result<i32> {
    let kv = a.config.as_ref().map(|p| io::read_kv(p)).transpose()?;
    let empty = KvFile::default();
    let kv = kv.as_ref().unwrap_or(&empty);
    let id = match (&a.id, kv.get("experiment", "id")) {
        (Some(id), _) => id.clone(),
        (None, Some(id)) => id.to_string(),
        (None, None) => bail!("no experiment id given (choose one of {})", IDS.join(", ")),
    };
    if !IDS.contains(&id.as_str()) {
        bail!("unknown experiment {id:?} (choose one of {})", IDS.join(", "));
    }
    let seed = match a.seed {
        Some(s) => Some(s),
        None => kv.get("experiment", "seed").map(|_| kv.integer("experiment", "seed")).transpose()?,
    };
    let out = a.out.clone().or_else(|| kv.get("experiment", "out").map(PathBuf::from)).unwrap_or_else(|| PathBuf::from("."));
    let mut given: BTreeMap<String, String> =
        kv.keys("params").into_iter().map(|k| (k.to_string(), kv.get("params", k).unwrap_or_default().to_string())).collect();
    for s in &a.set {
        let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("--set expects key=value, got {s:?}"))?;
        given.insert(k.trim().to_string(), v.trim().to_string());
    }
    let params = Params { given, used: RefCell::new(BTreeMap::new()) };

    std::fs::create_dir_all(&out).with_context(|| format!("cannot create output directory {}", out.display()))?;
    let csv_path = out.join(format!("{id}.csv"));
    let summary_path = out.join(format!("{id}.summary.json"));
    let log_path = out.join(format!("{id}.log"));
    for p in [&csv_path, &summary_path, &log_path] {
        std::fs::OpenOptions::new().create(true).append(true).open(p).with_context(|| format!("cannot write {}", p.display()))?;
    }

    let t = Instant::now();
    let outcome = match id.as_str() {
        "jarnik" => jarnik(&params)?,
        "mahler" => mahler(&params, seed.ok_or_else(|| anyhow!("experiment mahler needs --seed"))?)?,
        "rects" => rects(&params)?,
        "targets" => targets(&params)?,
        "cantor" => cantor_exp(&params, seed.ok_or_else(|| anyhow!("experiment cantor needs --seed"))?)?,
        "content-slopes" => content_slopes(&params)?,
        _ => unreachable!(),
    };
    params.check_unused()?;
    let elapsed = t.elapsed().as_secs_f64();

    let used = params.used.into_inner();
    let mut csv = format!("# experiment={id}\n# claim: {}\n", outcome.claim);
    if let Some(s) = seed {
        writeln!(csv, "# seed={s}")?;
    }
    for (k, v) in &used {
        writeln!(csv, "# {k}={v}")?;
    }
    writeln!(csv, "{}", outcome.columns)?;
    for r in &outcome.rows {
        writeln!(csv, "{r}")?;
    }
    let pass = outcome.summary.iter().all(|r| r.pass);
    let summary = serde_json::json!({
        "experiment": id,
        "claim": outcome.claim,
        "seed": seed,
        "params": used,
        "rows": outcome.summary,
        "pass": pass,
    });
    let summary_text = serde_json::to_string_pretty(&summary)? + "\n";
    io::write_text(Some(&csv_path), &csv)?;
    io::write_text(Some(&summary_path), &summary_text)?;
    let stamp = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    io::write_text(Some(&log_path), &format!("experiment={id}\nunix_time={stamp}\nruntime_s={elapsed:.3}\n"))?;

    if json {
        print!("{summary_text}");
    } else {
        println!("{:<40} {:>10} {:>10} {:>9}  result", "label", "predicted", "measured", "tol");
        for r in &outcome.summary {
            println!(
                "{:<40} {:>10.4} {:>10.4} {:>9.3}  {}{}",
                r.label,
                r.predicted,
                r.measured,
                r.tolerance,
                if r.pass { "pass" } else { "FAIL" },
                r.note.as_deref().map(|n| format!(" ({n})")).unwrap_or_default()
            );
        }
        println!("wrote {}, {}", csv_path.display(), summary_path.display());
    }
    Ok(if pass { 0 } else { 1 })
}

fn jarnik(p: &Params) -> Result<Outcome> {
    let deltas = p.numbers("delta", "2")?;
    let q = p.integer("q", 256)?;
    let q_min = p.integer("q_min", 32)?.max(1);
    let tol = p.number("tolerance", "0.1")?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &delta in &deltas {
        let predicted = jarnik_bound(delta)?.value;
        let mut qq = q_min;
        let mut last = None;
        while qq <= q {
            let m = jarnik_matched(qq, delta)?;
            rows.push(format!("{delta},{},{},{},{},{}", m.q_lo, m.q_hi, m.level, m.count, m.ratio));
            last = Some(m);
            if qq == q {
                break;
            }
            qq = (2 * qq).min(q);
        }
        let m = last.ok_or_else(|| anyhow!("q_min {q_min} exceeds q {q}"))?;
        summary.push(SummaryRow::new(format!("delta={delta} q in [{},{}]", m.q_lo, m.q_hi), predicted, m.ratio, tol, Relation::Within));
    }
    Ok(Outcome {
        claim: "limsup of B(p/q, q^-2delta) in [0,1] has Hausdorff dimension 1/delta",
        columns: "delta,q_lo,q_hi,level,count,ratio",
        rows,
        summary,
    })
}

fn mahler(p: &Params, seed: u64) -> Result<Outcome> {
    let delta = p.number("delta", "1.2")?;
    let q_max = p.integer("q", 400)?;
    let samples = p.integer("samples", 20)? as usize;
    let eps = EpsSeq::InvLog { scale: p.number("eps_scale", "1")? };
    let max_level = p.integer("max_level", 38)? as u32;
    let tol = p.number("tolerance", "0.1")?;
    if q_max < 2 {
        bail!("q must be at least 2");
    }
    let bound = mahler_bound(delta)?;
    let mu = CylinderMeasure::lebesgue(3, 1, max_level + 8)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut values = Vec::new();
    let mut attempts = 0;
    while values.len() < samples {
        attempts += 1;
        if attempts > 50 * samples.max(1) {
            bail!("could only place {} of {samples} targets", values.len());
        }
        let q = rng.gen_range(q_max.div_ceil(2)..=q_max);
        let pp = rng.gen_range(0..=q);
        let Some(target) = MahlerTarget::new(pp, q, delta, eps.at(q))? else { continue };
        let ball = Ball::new(vec![pp as f64 / q as f64], (q as f64).powi(-2))?;
        let ce = critical_exponent(&ball, &target, &mu, 1e-3, max_level)?;
        rows.push(format!("{pp},{q},{},{},{},{}", target.n, target.extra, ce.lo, ce.hi));
        values.push(ce.value());
    }
    values.sort_by(f64::total_cmp);
    let median = values[values.len() / 2];
    let mut row = SummaryRow::new(format!("delta={delta} median over {samples} targets"), bound.value, median, tol, Relation::Within);
    row.note = Some(format!("saturated={}", bound.saturated.unwrap_or(false)));
    Ok(Outcome {
        claim: "points of the middle-third Cantor set approximable at rate q^-2delta by rationals have dimension min(log2/log3, 1/delta)",
        columns: "p,q,generation,extra_generations,exponent_lo,exponent_hi",
        rows,
        summary: vec![row],
    })
}

fn radii(p: &Params) -> Result<Vec<f64>> {
    let lo = p.integer("radius_exp_min", 2)? as i32;
    let hi = p.integer("radius_exp_max", 7)? as i32;
    if hi <= lo {
        bail!("radius_exp_max must exceed radius_exp_min");
    }
    Ok((lo..=hi).map(|k| 2f64.powi(-k)).collect())
}

fn rects(p: &Params) -> Result<Outcome> {
    let taus = p.vectors("tau", "1,2")?;
    let base = p.integer("base", 3)? as u32;
    let max_level = p.integer("max_level", 14)? as u32;
    let tol = p.number("tolerance", "0.1")?;
    let step = p.number("bisection_tolerance", "0.01")?;
    let radii = radii(p)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for tau in &taus {
        let d = tau.len() as f64;
        let predicted = rect_bound(d, tau)?.value;
        // The slope of the content against r increases with s; solve slope = d.
        let (mut lo, mut hi) = (0.0, d);
        while hi - lo > step {
            let mid = 0.5 * (lo + hi);
            let slope = rect_content_slope(tau, mid, &radii, base, max_level)?.slope;
            rows.push(format!("\"{}\",{mid},{slope}", fmt_list(tau)));
            if slope < d {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        summary.push(SummaryRow::new(format!("tau=({})", fmt_list(tau)), predicted, 0.5 * (lo + hi), tol, Relation::Within));
    }
    Ok(Outcome {
        claim: "limsup of rectangles R_tau over a full-dimensional family has dimension at least the rectangle bound",
        columns: "tau,s,slope",
        rows,
        summary,
    })
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

fn targets(p: &Params) -> Result<Outcome> {
    let deltas = p.numbers("delta", "2")?;
    let depth = p.integer("depth", 8)? as u32;
    let eps = p.number("eps", "0.05")?;
    let base = p.integer("base", 3)? as u32;
    let tol = p.number("tolerance", "0.1")?;
    let (ifs, mu_of): (Ifs, Box<dyn Fn(u32) -> Result<CylinderMeasure>>) = match p.optional("ifs") {
        Some(path) => {
            let spec = io::read_ifs(std::path::Path::new(&path))?;
            (spec.ifs.clone(), Box::new(move |cap| Ok(spec.measure(cap)?)))
        }
        None => (Ifs::middle_third(), Box::new(|cap| Ok(CylinderMeasure::cantor(cap)))),
    };
    let x = p.numbers("x", "0.25")?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for &delta in &deltas {
        let predicted = target_bound(&ifs.ratios(), delta, ifs.dim())?.value;
        let fam = shrinking_targets(&ifs, &x, 1.0, depth)?;
        let last = (ifs.len() as u64).pow(depth);
        let n = fam.len() as u64;
        let max_level = (depth as f64 * delta).ceil() as u32 + 6;
        let mu = mu_of(max_level + 8)?;
        let te = t_exponent(&mu, &fam, delta, eps, n - last, n - 1, base, max_level)?;
        rows.push(format!("{delta},{depth},{},{},{},{}", te.t, te.s_delta, te.per_ball.len(), te.null_balls));
        summary.push(SummaryRow::new(format!("delta={delta} depth={depth}"), predicted, te.s_delta, tol, Relation::Within));
    }
    Ok(Outcome {
        claim: "limsup of B(f_w(x), c_w^delta) over an IFS with open set condition has dimension dim/delta",
        columns: "delta,depth,t,s_delta,balls,null_balls",
        rows,
        summary,
    })
}

fn cantor_exp(p: &Params, seed: u64) -> Result<Outcome> {
    let delta = p.number("delta", "2")?;
    let q_max = p.integer("q_max", 400)?;
    let depth = p.integer("depth", 2)? as u32;
    let samples = p.integer("samples", 10_000)? as usize;
    let tol = p.number("tolerance", "0.05")?;
    let mut params = cantor::BuildParams::rational(delta, depth, seed);
    if let Some(e) = p.optional("eps") {
        params.eps = split(&e).map_err(|m| anyhow!("parameter eps: {m}"))?;
    }
    params.ratio_min = p.number("ratio_min", &params.ratio_min.to_string())?;
    let mu = CylinderMeasure::lebesgue(params.base, 1, 48)?;
    let (balls, targets) = cantor::rational_fixture(q_max, delta)?;
    let built = cantor::build(&mu, &balls, &targets, &params)?;
    let rep = cantor::mass_check(&built, &mu, samples, seed, tol);
    let rows = built
        .generations
        .iter()
        .map(|g| format!("{},{},{},{},{}", g.generation, g.targets, g.intermediate, g.min_diameter, g.eta_total))
        .collect();
    let mut ratio = SummaryRow::new(format!("max eta/zeta over {samples} balls"), 1.0, rep.max_ratio, tol, Relation::AtMost);
    ratio.note = Some(format!("inside brackets {:.4}", rep.max_bracket_ratio));
    let conservation = SummaryRow::new("mass conservation error".into(), 0.0, rep.conservation_error, 1e-12, Relation::AtMost);
    Ok(Outcome {
        claim: "the finite Cantor construction satisfies eta(A) <= zeta(|A|), so the limsup set has positive zeta-measure",
        columns: "generation,targets,intermediate,min_diameter,eta_total",
        rows,
        summary: vec![ratio, conservation],
    })
}

fn content_slopes(p: &Params) -> Result<Outcome> {
    let taus = p.vectors("tau", "1,2")?;
    let ss = p.numbers("s", "1.5")?;
    let base = p.integer("base", 3)? as u32;
    let max_level = p.integer("max_level", 14)? as u32;
    let tol = p.number("tolerance", "0.05")?;
    let radii = radii(p)?;
    let mut rows = Vec::new();
    let mut summary = Vec::new();
    for tau in &taus {
        for &s in &ss {
            let rep = rect_content_slope(tau, s, &radii, base, max_level)?;
            for (r, c) in &rep.points {
                rows.push(format!("\"{}\",{s},{r},{c}", fmt_list(tau)));
            }
            summary.push(SummaryRow::new(format!("tau=({}) s={s}", fmt_list(tau)), rep.predicted, rep.slope, tol, Relation::Within));
        }
    }
    Ok(Outcome {
        claim: "the s-content of R_tau(x, r) scales like r^g_tau(s)",
        columns: "tau,s,r,content",
        rows,
        summary,
    })
}
