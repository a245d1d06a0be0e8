use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use jsr_core::apps::{self, fixtures, DifferencePattern, SubdivisionScheme};
use jsr_core::gripenberg::{brute_force_bounds, classic_gripenberg, modified_gripenberg, random_modified_gripenberg, ClassicOptions};
use jsr_core::pipeline::{compute_jsr, PipelineOptions, PipelineReport};
use jsr_core::polytope::TraceRow;
use jsr_core::{JsrBounds, JsrError, MatrixSet, ProductWord};
use serde_json::json;

mod format;
use format::{interval, sig};

#[derive(Parser)]
#[command(name = "jsr", version, about = "Joint spectral radius via invariant polytopes")]
struct Cli {
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Print a JSON report instead of text.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Search for spectral maximizing candidates.
    Estimate(EstimateArgs),
    /// Certified bounds, exact when an invariant polytope closes.
    Exact(ExactArgs),
    /// Bounds from all products of length k.
    Brute(BruteArgs),
    /// Capacity of codes avoiding difference patterns (`o`, `+`, `-`, `p`).
    Capacity(CapacityArgs),
    /// Hölder regularity of a refinable function.
    Regularity(RegularityArgs),
    /// List the built-in matrix sets, or print one.
    Fixtures { name: Option<String> },
}

#[derive(Args)]
struct Input {
    /// Matrix set file.
    #[arg(long, short, conflicts_with = "fixture")]
    input: Option<PathBuf>,
    /// Built-in matrix set.
    #[arg(long, short)]
    fixture: Option<String>,
}

#[derive(Args)]
struct EstimateArgs {
    #[command(flatten)]
    input: Input,
    /// Products kept per level.
    #[arg(short = 'N', default_value_t = 20)]
    n: usize,
    /// Search depth.
    #[arg(short = 'D', default_value_t = 100)]
    depth: usize,
    /// Classic branch and bound with this accuracy instead.
    #[arg(long)]
    classic: Option<f64>,
    #[arg(long, default_value_t = 1000)]
    classic_depth: usize,
    /// Time limit in seconds for the classic search.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Add randomly kept products, seeded.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Clone)]
struct EngineArgs {
    #[arg(short = 'N', default_value_t = 20)]
    n: usize,
    #[arg(short = 'D', default_value_t = 100)]
    depth: usize,
    /// Safety factor in (0, 1]; below 1 the bounds are within 1/delta.
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 1e-10)]
    epsilon: f64,
    /// Nearly-candidate ratio.
    #[arg(long, default_value_t = 0.9999)]
    tau: f64,
    /// Extra vertex threshold.
    #[arg(long = "extra", default_value_t = 0.1)]
    extra_threshold: f64,
    #[arg(long)]
    no_extra: bool,
    /// Word length for the balancing suprema.
    #[arg(long, default_value_t = 10)]
    horizon: usize,
    #[arg(long, default_value_t = 500)]
    max_iterations: usize,
    #[arg(long, default_value_t = 100_000)]
    max_vertices: usize,
    /// Seconds.
    #[arg(long)]
    time_limit: Option<f64>,
    /// Comma separated factors, one per candidate tree.
    #[arg(long, value_delimiter = ',')]
    balancing: Option<Vec<f64>>,
    /// Candidate words (1-based, space separated), `;` between words.
    #[arg(long)]
    candidates: Option<String>,
    #[arg(long)]
    nearly: Option<String>,
    #[arg(long)]
    skip_reducibility_check: bool,
    /// Per-iteration CSV trace.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Suppress the per-iteration lines.
    #[arg(long, short)]
    quiet: bool,
}

#[derive(Args)]
struct ExactArgs {
    #[command(flatten)]
    input: Input,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct BruteArgs {
    #[command(flatten)]
    input: Input,
    #[arg(short, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 10_000_000)]
    budget: u128,
}

#[derive(Args)]
struct CapacityArgs {
    /// One or more patterns of equal length, e.g. `o+-` or `pp`.
    #[arg(required = true)]
    patterns: Vec<String>,
    #[command(flatten)]
    engine: EngineArgs,
}

#[derive(Args)]
struct RegularityArgs {
    /// Mask file: `dilation m` header, then one coefficient per line.
    #[arg(long, conflicts_with = "daubechies")]
    mask: Option<PathBuf>,
    #[arg(long)]
    daubechies: Option<usize>,
    /// Difference order (default 1, or n for Daubechies).
    #[arg(long)]
    order: Option<usize>,
    #[command(flatten)]
    engine: EngineArgs,
}

/// Exit status classes.
enum Failure {
    Input(anyhow::Error),
    Numeric(anyhow::Error),
    Complex(anyhow::Error),
}

impl From<JsrError> for Failure {
    fn from(e: JsrError) -> Self {
        match e {
            JsrError::ComplexLeading => Failure::Complex(e.into()),
            JsrError::NoConvergence | JsrError::DefectiveLeading | JsrError::RootFinding | JsrError::Residual(_) => {
                Failure::Numeric(e.into())
            }
            _ => Failure::Input(e.into()),
        }
    }
}

fn input_err(e: anyhow::Error) -> Failure {
    Failure::Input(e)
}

type Run = std::result::Result<u8, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(3);
        }
    }
    let res = match &cli.cmd {
        Cmd::Estimate(a) => estimate(a, cli.json),
        Cmd::Exact(a) => exact(a, cli.json),
        Cmd::Brute(a) => brute(a, cli.json),
        Cmd::Capacity(a) => capacity(a, cli.json),
        Cmd::Regularity(a) => regularity(a, cli.json),
        Cmd::Fixtures { name } => list_fixtures(name.as_deref()),
    };
    match res {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            let (code, e) = match f {
                Failure::Input(e) => (2, e),
                Failure::Numeric(e) => (3, e),
                Failure::Complex(e) => (4, e.context("case C: the leading eigenvalue of a candidate is complex, not supported")),
            };
            eprintln!("error: {e:#}");
            ExitCode::from(code)
        }
    }
}

fn load(input: &Input) -> std::result::Result<(MatrixSet, Option<String>), Failure> {
    match (&input.input, &input.fixture) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(input_err)?;
            let set = MatrixSet::parse(&text).map_err(|e| input_err(anyhow::Error::new(e).context(p.display().to_string())))?;
            Ok((set, None))
        }
        (None, Some(f)) => Ok((fixtures::fixture(f)?, Some(f.clone()))),
        (None, None) => Err(input_err(anyhow::anyhow!("give --input FILE or --fixture NAME"))),
    }
}

fn parse_words(s: &str, count: usize) -> std::result::Result<Vec<ProductWord>, Failure> {
    let mut out = Vec::new();
    for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let idx = part
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(|t| t.parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .with_context(|| format!("bad word `{part}`"))
            .map_err(input_err)?;
        let w = ProductWord::from_one_based(&idx)?;
        if let Some(&j) = w.indices.iter().find(|&&j| j >= count) {
            return Err(JsrError::IndexOutOfRange { index: j + 1, count }.into());
        }
        out.push(w);
    }
    Ok(out)
}

fn seconds(t: Option<f64>) -> std::result::Result<Option<Duration>, Failure> {
    match t {
        None => Ok(None),
        Some(s) if s > 0.0 && s.is_finite() => Ok(Some(Duration::from_secs_f64(s))),
        Some(s) => Err(input_err(anyhow::anyhow!("time limit must be positive, got {s}"))),
    }
}

fn pipeline_options(a: &EngineArgs, count: usize) -> std::result::Result<PipelineOptions, Failure> {
    let mut o = PipelineOptions { search_n: a.n, search_depth: a.depth, tau: a.tau, ..Default::default() };
    if a.n == 0 || a.depth == 0 {
        return Err(input_err(anyhow::anyhow!("-N and -D must be positive")));
    }
    o.skip_reducibility = a.skip_reducibility_check;
    o.engine.delta = a.delta;
    o.engine.epsilon = a.epsilon;
    o.engine.extra_threshold = a.extra_threshold;
    o.engine.add_extra_vertices = !a.no_extra;
    o.engine.horizon = a.horizon;
    o.engine.max_iterations = a.max_iterations;
    o.engine.max_vertices = a.max_vertices;
    o.engine.time_limit = seconds(a.time_limit)?;
    o.engine.balancing = a.balancing.clone();
    if let Some(c) = &a.candidates {
        o.candidates = Some(parse_words(c, count)?);
    }
    if let Some(c) = &a.nearly {
        if o.candidates.is_none() {
            return Err(input_err(anyhow::anyhow!("--nearly needs --candidates")));
        }
        o.nearly = Some(parse_words(c, count)?);
    }
    o.engine.validate()?;
    if !(a.tau > 0.0 && a.tau <= 1.0) {
        return Err(input_err(anyhow::anyhow!("tau must lie in (0, 1]")));
    }
    Ok(o)
}

fn write_trace(path: &Path, rows: &[TraceRow]) -> std::result::Result<(), Failure> {
    let mut s = String::from("iteration,vertices,selected,added,b,lower,upper,lp_calls,estimated,elapsed_ms\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{:e},{:e},{:e},{},{},{}\n",
            r.iteration, r.vertices, r.selected, r.added, r.b, r.lower, r.upper, r.lp_calls, r.estimated, r.elapsed_ms
        ));
    }
    fs::write(path, s).with_context(|| format!("writing {}", path.display())).map_err(input_err)
}

fn words_text(ws: &[ProductWord]) -> String {
    ws.iter().map(|w| w.to_string()).collect::<Vec<_>>().join(", ")
}

fn bounds_json(b: &JsrBounds) -> serde_json::Value {
    json!({
        "lower": b.lower,
        "upper": b.upper,
        "exact": b.exact,
        "words": b.words.iter().map(|w| w.plain()).collect::<Vec<_>>(),
        "vertices": b.vertex_count,
    })
}

fn report_json(r: &PipelineReport) -> serde_json::Value {
    let out = r.outcome.as_ref();
    json!({
        "bounds": bounds_json(&r.bounds),
        "case": format!("{:?}", r.case),
        "hull": r.kind.map(|k| format!("{k:?}")),
        "iterations": out.map(|o| o.iterations),
        "termination": out.map(|o| serde_json::to_value(&o.termination).unwrap_or_default()),
        "balancing": out.map(|o| o.balancing.clone()),
        "restarts": r.restarts,
        "blocks": r.blocks.iter().map(bounds_json).collect::<Vec<_>>(),
        "trace": out.map(|o| serde_json::to_value(&o.trace).unwrap_or_default()),
        "warnings": r.warnings,
    })
}

/// Runs the pipeline, prints progress and the common report lines.
fn run_pipeline(set: &MatrixSet, a: &EngineArgs, json: bool) -> std::result::Result<PipelineReport, Failure> {
    let opts = pipeline_options(a, set.count())?;
    let r = compute_jsr(set, &opts)?;
    if let (Some(p), Some(o)) = (&a.trace, &r.outcome) {
        write_trace(p, &o.trace)?;
    }
    if json {
        return Ok(r);
    }
    if let Some(o) = &r.outcome {
        if !a.quiet {
            for t in &o.trace {
                println!("iteration {:>3}: {} vertices, JSR ∈ {}", t.iteration, t.vertices, interval(t.lower, t.upper));
            }
        }
        println!("termination: {:?} after {} iterations", o.termination, o.iterations);
        if o.balancing.len() > 1 {
            println!("balancing: {}", o.balancing.iter().map(|&x| sig(x)).collect::<Vec<_>>().join(", "));
        }
    }
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    println!("case: {:?}", r.case);
    if !r.bounds.words.is_empty() {
        println!("s.m.p.: {}", words_text(&r.bounds.words));
    }
    println!("vertices: {}", r.bounds.vertex_count);
    Ok(r)
}

fn verdict(b: &JsrBounds) -> u8 {
    if b.exact {
        0
    } else {
        1
    }
}

fn exact(a: &ExactArgs, json: bool) -> Run {
    let (set, name) = load(&a.input)?;
    let r = run_pipeline(&set, &a.engine, json)?;
    // the example fixture comes from a dilation -3 scheme
    let holder = (name.as_deref() == Some("subdiv-example")).then(|| apps::holder_from_jsr(r.bounds.lower, r.bounds.upper, -3));
    if json {
        let mut v = report_json(&r);
        if let Some(h) = holder {
            v["holder"] = json!([h.0, h.1]);
        }
        println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
    } else {
        if r.bounds.exact {
            println!("JSR = {}", sig(r.bounds.lower));
        } else {
            println!("JSR ∈ {}", interval(r.bounds.lower, r.bounds.upper));
        }
        if let Some((lo, hi)) = holder {
            println!("alpha ∈ {}", interval(lo, hi));
        }
    }
    Ok(verdict(&r.bounds))
}

fn estimate(a: &EstimateArgs, json: bool) -> Run {
    let (set, _) = load(&a.input)?;
    if a.n == 0 || a.depth == 0 {
        return Err(input_err(anyhow::anyhow!("-N and -D must be positive")));
    }
    let rep = match (a.classic, a.seed) {
        (Some(d), _) => classic_gripenberg(
            &set,
            &ClassicOptions { delta: d, max_depth: a.classic_depth, time_limit: seconds(a.time_limit)?, ..Default::default() },
        )?,
        (None, Some(seed)) => random_modified_gripenberg(&set, a.n, a.depth, seed)?,
        (None, None) => modified_gripenberg(&set, a.n, a.depth)?,
    };
    if json {
        let v = json!({
            "rho_c": rep.lower_bound,
            "upper": rep.upper_bound,
            "upper_final": rep.upper_final,
            "candidates": rep.candidates.iter().map(|w| w.plain()).collect::<Vec<_>>(),
            "evaluations": rep.evaluations,
        });
        println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
    } else {
        println!("rho_c = {}", sig(rep.lower_bound));
        for w in &rep.candidates {
            println!("candidate: {}  ({})", w, w.plain());
        }
        if let Some(u) = rep.upper_bound {
            let tag = if rep.upper_final { "" } else { " (search stopped early)" };
            println!("JSR ∈ {}{tag}", interval(rep.lower_bound, u));
        }
        println!("evaluations: {}", rep.evaluations);
        if a.classic.is_none() {
            eprintln!("warning: rho_c is a lower bound; the candidate is not certified");
        }
    }
    Ok(0)
}

fn brute(a: &BruteArgs, json: bool) -> Run {
    let (set, _) = load(&a.input)?;
    let b = brute_force_bounds(&set, a.k, a.budget)?;
    if json {
        println!("{}", serde_json::to_string_pretty(&bounds_json(&b)).unwrap_or_default());
    } else {
        println!("JSR ∈ {}", interval(b.lower, b.upper));
        println!("best: {}", words_text(&b.words));
    }
    Ok(0)
}

fn capacity(a: &CapacityArgs, json: bool) -> Run {
    let pats = a
        .patterns
        .iter()
        .flat_map(|s| s.split(','))
        .map(|s| s.trim().parse::<DifferencePattern>())
        .collect::<std::result::Result<Vec<_>, _>>()?;
    let set = apps::capacity_matrices(&pats)?;
    let r = run_pipeline(&set, &a.engine, json)?;
    let (lo, hi) = apps::capacity_from_jsr(r.bounds.lower, r.bounds.upper);
    if json {
        let mut v = report_json(&r);
        v["capacity"] = json!([lo, hi]);
        v["count"] = json!(set.count());
        v["dim"] = json!(set.dim());
        println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
    } else {
        println!("matrices: {} of dimension {}", set.count(), set.dim());
        println!("JSR ∈ {}", interval(r.bounds.lower, r.bounds.upper));
        println!("capacity ∈ {}", interval(lo, hi));
    }
    Ok(verdict(&r.bounds))
}

fn regularity(a: &RegularityArgs, json: bool) -> Run {
    let (scheme, default_order) = match (&a.mask, a.daubechies) {
        (Some(p), _) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display())).map_err(input_err)?;
            let s = SubdivisionScheme::parse(&text).map_err(|e| input_err(anyhow::Error::new(e).context(p.display().to_string())))?;
            (s, 1)
        }
        (None, Some(n)) => (apps::daubechies_scheme(n)?, n),
        (None, None) => bail_input("give --mask FILE or --daubechies n")?,
    };
    if !scheme.sum_rule_ok() {
        eprintln!("warning: mask coefficients do not sum to |m|");
    }
    let order = a.order.unwrap_or(default_order);
    if order == 0 {
        return bail_input("--order must be at least 1");
    }
    let tm = apps::transition_matrices(&scheme, order)?;
    let Some(set) = tm.restricted else {
        println!("restricted dimension 0, alpha = inf");
        return Ok(0);
    };
    let r = run_pipeline(&set, &a.engine, json)?;
    let (lo, hi) = apps::holder_from_jsr(r.bounds.lower, r.bounds.upper, scheme.dilation);
    if json {
        let mut v = report_json(&r);
        v["holder"] = json!([lo, hi]);
        v["dim"] = json!(set.dim());
        v["count"] = json!(set.count());
        println!("{}", serde_json::to_string_pretty(&v).unwrap_or_default());
    } else {
        println!("transition matrices: {} of dimension {} (difference order {order})", set.count(), set.dim());
        println!("JSR ∈ {}", interval(r.bounds.lower, r.bounds.upper));
        if r.bounds.exact {
            println!("alpha = {}", sig(lo));
        } else {
            println!("alpha ∈ {}", interval(lo, hi));
        }
    }
    Ok(verdict(&r.bounds))
}

fn bail_input<T>(msg: &str) -> std::result::Result<T, Failure> {
    Err(input_err(anyhow::anyhow!("{msg}")))
}

fn list_fixtures(name: Option<&str>) -> Run {
    let mut out = std::io::stdout().lock();
    match name {
        None => {
            for n in fixtures::fixture_names() {
                let _ = writeln!(out, "{n}");
            }
        }
        Some(n) => {
            let set = fixtures::fixture(n)?;
            let _ = write!(out, "{}", set.to_text());
        }
    }
    Ok(0)
}
