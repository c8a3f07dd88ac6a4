mod experiment;
mod io;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use limsup_core::cantor::{self, BuildParams, Construction};
use limsup_core::content::{essential_content, estimate, BoxSet, RegionSet};
use limsup_core::covering::{besicovitch_families, mu_ac_check, verify_families};
use limsup_core::formulas::{jarnik_bound, mahler_bound, rect_bound, shrunk_ball_bound, target_bound, BoundResult};
use limsup_core::geometry::{Aabb, Region};
use limsup_core::ifs::{measure_dimension, similarity_dimension, CylinderMeasure, Ifs};
use limsup_core::kv::KvFile;
use limsup_core::lab::{
    boxcount_dimension, mahler_targets, rational_window, shrinking_targets, EpsSeq, LimsupStage, StageRegion,
};
use serde_json::json;
use std::path::PathBuf;
use std::time::Instant;

pub const THREADS_ENV: &str = "LIMSUP_THREADS";

#[derive(Parser)]
#[command(name = "limsup", version, about = "Hausdorff contents, coverings and limsup sets of balls")]
struct Cli {
    /// Machine-readable JSON output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Closed-form dimension bounds.
    Dim(DimArgs),
    /// Upper/lower bounds on the s-dimensional content of a region file.
    Content(ContentArgs),
    /// Besicovitch-type families of a ball file.
    Cover(CoverArgs),
    /// Disjoint-selection ratios of a ball file inside open sets.
    Muac(MuacArgs),
    #[command(subcommand)]
    Limsup(LimsupCmd),
    #[command(subcommand)]
    Cantor(CantorCmd),
    /// Runs a named experiment and compares against its prediction.
    Experiment(experiment::ExperimentArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Formula {
    Shrunk,
    Jarnik,
    Rect,
    Target,
    Mahler,
    Similarity,
    Measure,
}

fn num(s: &str) -> std::result::Result<f64, String> {
    limsup_core::kv::parse_number(s)
}

#[derive(clap::Args)]
struct DimArgs {
    formula: Formula,
    #[arg(long, value_parser = num)]
    dim_mu: Option<f64>,
    #[arg(long, value_parser = num)]
    delta: Option<f64>,
    /// Comma-separated exponents, e.g. `1,3/2`.
    #[arg(long, value_delimiter = ',', value_parser = num)]
    tau: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = num)]
    ratios: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', value_parser = num)]
    weights: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1)]
    d: usize,
    /// IFS file supplying ratios and weights.
    #[arg(long)]
    ifs: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ContentArgs {
    /// JSON-lines region records.
    #[arg(long)]
    regions: PathBuf,
    #[arg(long, value_parser = num)]
    s: f64,
    #[arg(long, default_value_t = 2)]
    base: u32,
    #[arg(long)]
    max_level: u32,
    /// Measure the content is essential for, given as an IFS file.
    #[arg(long)]
    ifs: Option<PathBuf>,
    /// Essential content for Lebesgue measure.
    #[arg(long, conflicts_with = "ifs")]
    lebesgue: bool,
}

#[derive(clap::Args)]
struct CoverArgs {
    #[arg(long)]
    balls: PathBuf,
    #[arg(long, value_parser = num, default_value = "1")]
    v: f64,
}

#[derive(clap::Args)]
struct MuacArgs {
    #[arg(long)]
    balls: PathBuf,
    /// Region file forming one open set; repeat for several.
    #[arg(long, required = true)]
    omega: Vec<PathBuf>,
    /// Grid level used to rasterize non-cube omega records.
    #[arg(long, default_value_t = 8)]
    omega_level: u32,
    #[arg(long, default_value_t = 2)]
    base: u32,
    #[arg(long, value_delimiter = ',', default_value = "0")]
    g: Vec<u64>,
    #[arg(long, value_parser = num)]
    c: f64,
    #[arg(long)]
    ifs: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Generator {
    Rational,
    Targets,
    Mahler,
}

#[derive(Subcommand)]
enum LimsupCmd {
    /// Streams a finite stage as JSON-lines.
    Build {
        generator: Generator,
        #[arg(long, default_value_t = 1)]
        q_min: u64,
        #[arg(long, default_value_t = 100)]
        q_max: u64,
        #[arg(long, value_parser = num, default_value = "2")]
        delta: f64,
        /// IFS file for `targets` (middle-third Cantor set by default).
        #[arg(long)]
        ifs: Option<PathBuf>,
        #[arg(long, value_delimiter = ',', value_parser = num)]
        x: Option<Vec<f64>>,
        #[arg(long, default_value_t = 6)]
        depth: u32,
        #[arg(long, value_parser = num, default_value = "1")]
        eps_scale: f64,
        /// Cantor generations kept per Mahler target.
        #[arg(long, default_value_t = 10)]
        max_extra: u32,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Box counts of a stage file, CSV `level,N`.
    Boxcount {
        #[arg(long)]
        stage: PathBuf,
        #[arg(long, default_value_t = 2)]
        base: u32,
        /// Inclusive range `a..b`.
        #[arg(long, default_value = "4..10")]
        levels: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CantorCmd {
    /// Builds the construction and emits the tree as JSON.
    Build {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        depth: Option<u32>,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Samples balls against a built tree.
    Verify {
        #[arg(long)]
        tree: PathBuf,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, value_parser = num, default_value = "0.05")]
        tolerance: f64,
    },
}

fn main() {
    // Exit quietly when stdout is closed early, e.g. by `| head`.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    let cli = Cli::parse();
    if let Ok(n) = std::env::var(THREADS_ENV) {
        match n.parse::<usize>() {
            Ok(n) => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            Err(_) => {
                eprintln!("error: {THREADS_ENV} must be a positive integer, got {n:?}");
                std::process::exit(2);
            }
        }
    }
    match run(cli) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}

fn run(cli: Cli) -> Result<i32> {
    let json = cli.json;
    match cli.cmd {
        Cmd::Dim(a) => dim(a, json),
        Cmd::Content(a) => content(a, json),
        Cmd::Cover(a) => cover(a, json),
        Cmd::Muac(a) => muac(a, json),
        Cmd::Limsup(c) => limsup(c, json),
        Cmd::Cantor(c) => cantor_cmd(c, json),
        Cmd::Experiment(a) => experiment::run(a, json),
    }
}

fn need<T>(v: Option<T>, name: &str) -> Result<T> {
    v.ok_or_else(|| anyhow!("--{name} is required for this formula"))
}

fn dim(a: DimArgs, json: bool) -> Result<i32> {
    let spec = a.ifs.as_ref().map(|p| io::read_ifs(p)).transpose()?;
    let ratios = || -> Result<Vec<f64>> {
        match (&spec, &a.ratios) {
            (Some(s), _) => Ok(s.ifs.ratios()),
            (None, Some(r)) => Ok(r.clone()),
            _ => bail!("--ratios or --ifs is required for this formula"),
        }
    };
    let row = |formula: &str, inputs: serde_json::Value, value: f64, eq: bool| BoundRow {
        formula: formula.to_string(),
        inputs,
        value,
        equality_claimed: eq,
    };
    let r: BoundRow = match a.formula {
        Formula::Shrunk => bound_row(shrunk_ball_bound(need(a.dim_mu, "dim-mu")?, need(a.delta, "delta")?)?),
        Formula::Jarnik => bound_row(jarnik_bound(need(a.delta, "delta")?)?),
        Formula::Rect => bound_row(rect_bound(need(a.dim_mu, "dim-mu")?, &need(a.tau, "tau")?)?),
        Formula::Target => {
            let d = spec.as_ref().map_or(a.d, |s| s.ifs.dim());
            bound_row(target_bound(&ratios()?, need(a.delta, "delta")?, d)?)
        }
        Formula::Mahler => bound_row(mahler_bound(need(a.delta, "delta")?)?),
        Formula::Similarity => {
            let r = ratios()?;
            row("similarity", json!({ "ratios": r }), similarity_dimension(&r)?, true)
        }
        Formula::Measure => {
            let r = ratios()?;
            let w = match (&spec, &a.weights) {
                (Some(s), _) => s.weights.clone(),
                (None, Some(w)) => w.clone(),
                _ => vec![1.0 / r.len() as f64; r.len()],
            };
            let d = spec.as_ref().map_or(a.d, |s| s.ifs.dim());
            let m = measure_dimension(&w, &r, d)?;
            row("measure", json!({ "ratios": r, "weights": w, "d": d, "regularity_assumed": m.regularity_assumed }), m.value, true)
        }
    };
    if json {
        println!("{}", serde_json::to_string_pretty(&r)?);
    } else {
        println!("{:<12} {:<48} {:>12} equality_claimed", "formula", "inputs", "value");
        println!("{:<12} {:<48} {:>12.6} {}", r.formula, r.inputs.to_string(), r.value, r.equality_claimed);
    }
    Ok(0)
}

#[derive(serde::Serialize)]
struct BoundRow {
    formula: String,
    inputs: serde_json::Value,
    value: f64,
    equality_claimed: bool,
}

fn bound_row(b: BoundResult) -> BoundRow {
    let formula = serde_json::to_value(b.formula).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
    let mut inputs = b.inputs;
    if let (Some(s), Some(obj)) = (b.saturated, inputs.as_object_mut()) {
        obj.insert("saturated".into(), json!(s));
    }
    BoundRow { formula, inputs, value: b.value, equality_claimed: b.equality_claimed }
}

fn measure_for(ifs: &Option<PathBuf>, base: u32, d: usize, depth_cap: u32) -> Result<CylinderMeasure> {
    match ifs {
        Some(p) => Ok(io::read_ifs(p)?.measure(depth_cap)?),
        None => Ok(CylinderMeasure::lebesgue(base, d, depth_cap)?),
    }
}

fn content(a: ContentArgs, json: bool) -> Result<i32> {
    let regions = io::read_regions(&a.regions)?;
    let t = Instant::now();
    let d = regions[0].dim();
    let unit = Aabb::unit(d);
    let boxes: Vec<Aabb> = regions.iter().filter_map(|r| r.bbox().intersection(&unit)).collect();
    if boxes.is_empty() {
        bail!("no region meets the unit cube");
    }
    let set = BoxSet::new(boxes, a.base)?;
    let est = if a.ifs.is_some() || a.lebesgue {
        let mu = measure_for(&a.ifs, a.base, d, a.max_level + 8)?;
        essential_content(&set, &mu, a.s, a.max_level)?
    } else {
        estimate(&set, a.s, a.max_level)?
    };
    let ms = t.elapsed().as_secs_f64() * 1e3;
    let out = json!({
        "s": a.s,
        "lower": est.lower,
        "upper": est.upper,
        "witness_count": est.witness_count.to_string(),
        "runtime_ms": ms,
    });
    if json {
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("s = {}  lower = {:.6e}  upper = {:.6e}  witness cubes = {}  ({ms:.1} ms)", a.s, est.lower, est.upper, est.witness_count);
        if let Some(c) = est.decay_certificate {
            println!("decay certificate (level, upper): {c:?}");
        }
    }
    Ok(0)
}

fn cover(a: CoverArgs, json: bool) -> Result<i32> {
    let fam = io::read_balls(&a.balls)?;
    let families = besicovitch_families(&fam, a.v)?;
    let verified = verify_families(&fam, a.v, &families);
    if json {
        let out = json!({
            "v": a.v,
            "count": families.len(),
            "families": families,
            "verified": verified.is_ok(),
            "verifier_message": verified.as_ref().err(),
        });
        println!("{}", serde_json::to_string_pretty(&out)?);
    } else {
        println!("{} families (v = {})", families.len(), a.v);
        for (i, f) in families.iter().enumerate() {
            println!("  family {i}: {f:?}");
        }
        match &verified {
            Ok(()) => println!("verified"),
            Err(m) => println!("verification failed: {m}"),
        }
    }
    Ok(if verified.is_ok() { 0 } else { 1 })
}

fn muac(a: MuacArgs, json: bool) -> Result<i32> {
    let fam = io::read_balls(&a.balls)?;
    let d = fam.balls().first().map(|b| b.ball.dim()).ok_or_else(|| anyhow!("ball file is empty"))?;
    let omegas = a
        .omega
        .iter()
        .map(|p| -> Result<RegionSet> {
            let mut cubes = Vec::new();
            for r in io::read_regions(p)? {
                match r {
                    Region::Cube(c) => cubes.push(c),
                    other => cubes.extend(RegionSet::from_region(&other, a.base, a.omega_level)?.cubes().iter().cloned()),
                }
            }
            cubes.sort();
            cubes.dedup();
            Ok(RegionSet::new(cubes)?)
        })
        .collect::<Result<Vec<_>>>()?;
    let mu = measure_for(&a.ifs, a.base, d, 30)?;
    let rep = mu_ac_check(&fam, &mu, &omegas, &a.g, a.c)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&rep)?);
    } else {
        println!("C = {}  min ratio = {:.6}  {}", rep.c, rep.min_ratio, if rep.pass { "pass" } else { "fail" });
        for e in &rep.entries {
            println!("  omega {} g {}: ratio {:.6} with {} balls", e.omega, e.g, e.ratio, e.selected.len());
        }
    }
    Ok(if rep.pass { 0 } else { 1 })
}

fn parse_levels(s: &str) -> Result<std::ops::RangeInclusive<u32>> {
    let (a, b) = s.split_once("..").ok_or_else(|| anyhow!("levels must look like a..b"))?;
    let b = b.trim_start_matches('=');
    Ok(a.trim().parse()?..=b.trim().parse()?)
}

fn limsup(c: LimsupCmd, json: bool) -> Result<i32> {
    match c {
        LimsupCmd::Build { generator, q_min, q_max, delta, ifs, x, depth, eps_scale, max_extra, out } => {
            let regions: Vec<Region> = match generator {
                Generator::Rational => rational_window(q_min, q_max, delta)?.balls().iter().map(|b| Region::Ball(b.ball.clone())).collect(),
                Generator::Targets => {
                    let sys = match &ifs {
                        Some(p) => io::read_ifs(p)?.ifs,
                        None => Ifs::middle_third(),
                    };
                    let x = x.unwrap_or_else(|| vec![0.0; sys.dim()]);
                    shrinking_targets(&sys, &x, delta, depth)?.balls().iter().map(|b| Region::Ball(b.ball.clone())).collect()
                }
                Generator::Mahler => {
                    let (ts, _) = mahler_targets(q_max, delta, &EpsSeq::InvLog { scale: eps_scale })?;
                    ts.iter().filter(|t| t.q >= q_min).flat_map(|t| t.cells(max_extra)).map(Region::Cube).collect()
                }
            };
            io::write_regions(out.as_deref(), &regions)?;
            if !json && out.is_some() {
                eprintln!("{} regions written", regions.len());
            }
            Ok(0)
        }
        LimsupCmd::Boxcount { stage, base, levels, out } => {
            let regions = io::read_regions(&stage)?;
            let stage = LimsupStage {
                window: (0, regions.len().saturating_sub(1) as u64),
                regions: regions
                    .into_iter()
                    .map(|r| match r {
                        Region::Ball(b) => StageRegion::Ball(b),
                        Region::Rect(r) => StageRegion::Rect(r),
                        Region::Cube(c) => StageRegion::Cubes(vec![c]),
                    })
                    .collect(),
                generator_id: "file".into(),
                params: serde_json::Value::Null,
            };
            let bc = boxcount_dimension(&stage, base, parse_levels(&levels)?)?;
            let mut csv = String::from("level,N\n");
            for (k, n) in &bc.counts {
                csv.push_str(&format!("{k},{n}\n"));
            }
            io::write_text(out.as_deref(), &csv)?;
            if json {
                eprintln!("{}", serde_json::to_string(&json!({ "slope": bc.slope, "r_squared": bc.r_squared }))?);
            } else {
                eprintln!("slope {:.4} (r^2 {:.4})", bc.slope, bc.r_squared);
            }
            Ok(0)
        }
    }
}

/// `[cantor]` section: delta, q_max, depth, target, eps, ratio_min, dilation,
/// intermediate_levels, max_intermediate, frostman_levels, content_levels, q4.
pub fn cantor_params(kv: Option<&KvFile>, depth: Option<u32>, seed: u64) -> Result<(BuildParams, u64)> {
    let empty = KvFile::default();
    let kv = kv.unwrap_or(&empty);
    let sec = "cantor";
    let delta = kv.number_or(sec, "delta", 2.0)?;
    let q_max = kv.integer_or(sec, "q_max", 400)?;
    let depth = match depth {
        Some(d) => d,
        None => kv.integer_or(sec, "depth", 2)? as u32,
    };
    let mut p = BuildParams::rational(delta, depth, seed);
    p.target = kv.number_or(sec, "target", p.target)?;
    if kv.get(sec, "eps").is_some() {
        p.eps = kv.numbers(sec, "eps")?;
    }
    p.ratio_min = kv.number_or(sec, "ratio_min", p.ratio_min)?;
    p.dilation = kv.number_or(sec, "dilation", p.dilation)?;
    p.intermediate_levels = kv.integer_or(sec, "intermediate_levels", p.intermediate_levels as u64)? as u32;
    p.max_intermediate = kv.integer_or(sec, "max_intermediate", p.max_intermediate as u64)? as usize;
    p.frostman_levels = kv.integer_or(sec, "frostman_levels", p.frostman_levels as u64)? as u32;
    p.content_levels = kv.integer_or(sec, "content_levels", p.content_levels as u64)? as u32;
    if kv.get(sec, "q4").is_some() {
        p.q4 = Some(kv.number(sec, "q4")?);
    }
    if kv.get(sec, "windows").is_some() {
        p.windows = kv
            .get(sec, "windows")
            .unwrap()
            .split(',')
            .map(|w| -> Result<(u64, u64)> {
                let (a, b) = w.trim().split_once('-').ok_or_else(|| anyhow!("window {w:?} is not `qlo-qhi`"))?;
                let (a, b): (u64, u64) = (a.trim().parse()?, b.trim().parse()?);
                if a == 0 || b < a || b > q_max {
                    bail!("window {a}-{b} must lie in 1..={q_max}");
                }
                Ok((limsup_core::lab::rational_index(a), limsup_core::lab::rational_index(b + 1) - 1))
            })
            .collect::<Result<_>>()?;
    }
    Ok((p, q_max))
}

fn cantor_cmd(c: CantorCmd, json: bool) -> Result<i32> {
    match c {
        CantorCmd::Build { config, depth, seed, out } => {
            let kv = config.as_ref().map(|p| io::read_kv(p)).transpose()?;
            let (params, q_max) = cantor_params(kv.as_ref(), depth, seed)?;
            let mu = CylinderMeasure::lebesgue(params.base, 1, 48)?;
            let (balls, targets) = cantor::rational_fixture(q_max, 1.0 / params.target)?;
            let built = cantor::build(&mu, &balls, &targets, &params)?;
            io::write_text(out.as_deref(), &(serde_json::to_string(&built)? + "\n"))?;
            if !json {
                for g in &built.generations {
                    eprintln!(
                        "generation {}: {} targets, {} intermediate balls, min diameter {:.3e}, mass {:.15}",
                        g.generation, g.targets, g.intermediate, g.min_diameter, g.eta_total
                    );
                }
            }
            Ok(0)
        }
        CantorCmd::Verify { tree, samples, seed, tolerance } => {
            let text = std::fs::read_to_string(&tree).with_context(|| format!("reading {}", tree.display()))?;
            let built: Construction = serde_json::from_str(&text).context("parsing construction tree")?;
            let mu = CylinderMeasure::lebesgue(built.params.base, built.root.region.dim(), 48)?;
            let rep = cantor::mass_check(&built, &mu, samples, seed, tolerance);
            if json {
                println!("{}", serde_json::to_string_pretty(&rep)?);
            } else {
                println!(
                    "max eta/zeta {:.6} (inside brackets {:.6}), violations {}, conservation error {:.2e}: {}",
                    rep.max_ratio,
                    rep.max_bracket_ratio,
                    rep.violations,
                    rep.conservation_error,
                    if rep.pass { "pass" } else { "fail" }
                );
            }
            Ok(if rep.pass { 0 } else { 1 })
        }
    }
}
