//! Command-line front end. `georank <rank|quantile|reconstruct|contour|content|selftest>`.
//!
//! Exit codes: 0 ok, 1 self-test failure, 2 configuration, 3 numerical
//! failure, 4 non-convergence.

mod selftest;

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, CommandFactory, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::depth::{contour, probability_content_surface, ContentPath, ThetaTable};
use crate::error::{Error, Result};
use crate::measures::{empirical_from_csv, Measure, RadialFamily};
use crate::quantile::{default_tol, solve_quantile, QuantileQuery};
use crate::rankfield::{sample_grid, write_grid, RankEvaluator, SINGULARITY_RADIUS};
use crate::reconstruct::{reconstruct, reconstruct_odd_grid, EvalPoints, GridSpec, Method, ReconstructionConfig};

pub use self::selftest::{run_checks, Check, FAULT_ENV};

pub const EXIT_OK: i32 = 0;
pub const EXIT_SELFTEST: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;
pub const EXIT_NONCONVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "georank",
    version,
    about = "Geometric ranks, quantiles, depth and density recovery"
)]
pub struct Cli {
    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// JSON file of flag values; flags given on the command line win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Rank vectors at points or on a grid.
    Rank(RankArgs),
    /// Geometric quantiles Q(αu).
    Quantile(QuantileArgs),
    /// Density recovered from the rank field.
    Reconstruct(ReconstructArgs),
    /// Depth contour |R| = β.
    Contour(ContourArgs),
    /// Probability content of a ball, or of a depth region.
    Content(ContentArgs),
    /// Built-in consistency checks.
    Selftest(SelftestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Gaussian,
    Cauchy,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct MeasureArgs {
    /// Closed-form radial family.
    #[arg(long, value_enum)]
    pub family: Option<Family>,
    /// Dimension (required with --family).
    #[arg(long)]
    pub dim: Option<usize>,
    /// CSV of atoms, optionally with a trailing weight column.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use a Monte-Carlo sample of this size instead of the closed form.
    #[arg(long)]
    pub mc: Option<usize>,
    /// Seed for every randomized step.
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct OutputArgs {
    /// Output file (default: standard output).
    #[arg(short = 'o', long)]
    pub output: Option<PathBuf>,
    /// csv (default) or json.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct RankArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    /// CSV of evaluation points, d columns.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Cubic grid `lo:hi:nodes`; written in the grid format.
    #[arg(long, allow_hyphen_values = true)]
    pub grid: Option<String>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct QuantileArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    /// Rank length α in [0, 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Direction u, comma separated (normalized).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub direction: Option<Vec<f64>>,
    /// CSV of queries `alpha,u1..ud`.
    #[arg(long)]
    pub queries: Option<PathBuf>,
    /// Residual tolerance |R(Q) − αu|.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ReconstructArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    /// odd-local, singular, hankel or extension.
    #[arg(long)]
    pub method: Option<String>,
    /// Radii along the first axis: `start:stop:step` or a comma list.
    #[arg(long, allow_hyphen_values = true)]
    pub radii: Option<String>,
    /// CSV of evaluation points.
    #[arg(long)]
    pub points: Option<PathBuf>,
    /// Inner cutoff of the singular integral.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Outer truncation radius of the singular integral.
    #[arg(long)]
    pub r_max: Option<f64>,
    /// Finite-difference order (2 or 4).
    #[arg(long)]
    pub fd_order: Option<u32>,
    /// Grid box lower corner per axis.
    #[arg(long, allow_hyphen_values = true)]
    pub grid_lo: Option<f64>,
    /// Grid box upper corner per axis.
    #[arg(long, allow_hyphen_values = true)]
    pub grid_hi: Option<f64>,
    /// Grid nodes per axis.
    #[arg(long)]
    pub grid_nodes: Option<usize>,
    /// Half-width of the box on which grid errors are measured.
    #[arg(long)]
    pub grid_inner: Option<f64>,
    /// Extension height t.
    #[arg(long)]
    pub height: Option<f64>,
    /// Allowed change between successive refinements.
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Angular nodes of the polar rules.
    #[arg(long)]
    pub angles: Option<usize>,
    /// Monte-Carlo sample size where one is needed.
    #[arg(long)]
    pub mc_budget: Option<usize>,
    /// Add closed-form density columns and error diagnostics.
    #[arg(long)]
    pub reference: bool,
    /// Also write the JSON report here.
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ContourArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    /// Rank level β in [0, 1).
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of rays.
    #[arg(long)]
    pub rays: Option<usize>,
    /// Allowed | |R| − β | at emitted points.
    #[arg(long)]
    pub tol: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContentRoute {
    Analytic,
    Grid,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct ContentArgs {
    #[command(flatten)]
    #[serde(flatten)]
    pub measure: MeasureArgs,
    /// Ball radius: P[|Z| ≤ radius] by the surface integral.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Rank level: θ(β) = P[|R(Z)| ≤ β].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Surface integrand route (default: analytic for closed forms).
    #[arg(long, value_enum)]
    pub route: Option<ContentRoute>,
    /// Finite-difference step of the grid route.
    #[arg(long)]
    pub spacing: Option<f64>,
    /// Finite-difference order of the grid route (2 or 4).
    #[arg(long)]
    pub order: Option<u32>,
    /// Monte-Carlo sample size for θ without a closed form.
    #[arg(long)]
    pub mc_budget: Option<usize>,
    #[command(flatten)]
    #[serde(flatten)]
    pub out: OutputArgs,
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
pub struct SelftestArgs {
    /// Machine-readable results array.
    #[arg(long)]
    pub json: bool,
}

/// The clap command tree, for help generation and flag introspection.
pub fn command() -> clap::Command {
    Cli::command()
}

/// Parses `std::env::args_os()` and runs; returns the exit code.
pub fn run() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}

/// Runs with explicit arguments (including the program name) and streams.
pub fn run_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if code == EXIT_OK {
                write!(out, "{text}")
            } else {
                write!(err, "{text}")
            };
            return code;
        }
    };
    match dispatch(cli, out) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonConvergence { .. } => EXIT_NONCONVERGENCE,
        Error::Singularity { .. }
        | Error::Budget { .. }
        | Error::Stencil(_)
        | Error::DegenerateSupport(_)
        | Error::ToleranceNotMet { .. }
        | Error::Decay(_)
        | Error::Bracket(_) => EXIT_NUMERIC,
        _ => EXIT_CONFIG,
    }
}

fn dispatch(cli: Cli, out: &mut dyn Write) -> Result<i32> {
    let config = match &cli.config {
        Some(p) => Some(load_config(p)?),
        None => None,
    };
    let threads = match (cli.threads, config.as_ref().and_then(|c| c.get("threads"))) {
        (Some(n), _) => Some(n),
        (None, Some(v)) => Some(
            v.as_u64()
                .ok_or_else(|| Error::Config("config key 'threads' must be a positive integer".into()))?
                as usize,
        ),
        (None, None) => None,
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        if n == 0 {
            return Err(Error::Config("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let cfg = config.as_ref();
    // standard output is collected here because its lock cannot cross into the pool
    let mut buf: Vec<u8> = Vec::new();
    let sink = &mut buf;
    let code = pool.install(|| match cli.command {
        Command::Rank(a) => cmd_rank(&merge(a, cfg)?, sink),
        Command::Quantile(a) => cmd_quantile(&merge(a, cfg)?, sink),
        Command::Reconstruct(a) => cmd_reconstruct(&merge(a, cfg)?, sink),
        Command::Contour(a) => cmd_contour(&merge(a, cfg)?, sink),
        Command::Content(a) => cmd_content(&merge(a, cfg)?, sink),
        Command::Selftest(a) => cmd_selftest(&merge(a, cfg)?, sink),
    });
    out.write_all(&buf).map_err(|e| Error::io("<stdout>", e))?;
    code
}

fn load_config(path: &Path) -> Result<Value> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let v: Value = serde_json::from_reader(file).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    if !v.is_object() {
        return Err(Error::Config(format!("{}: expected a JSON object", path.display())));
    }
    Ok(v)
}

/// Overlays the flags that were given on the config file's values.
fn merge<T: Serialize + DeserializeOwned>(flags: T, config: Option<&Value>) -> Result<T> {
    let Some(Value::Object(cfg)) = config else {
        return Ok(flags);
    };
    let Value::Object(given) = serde_json::to_value(&flags)? else {
        unreachable!("argument structs serialize to objects")
    };
    let mut merged = serde_json::Map::new();
    for (k, v) in cfg {
        if k == "threads" {
            continue;
        }
        if !given.contains_key(k) {
            return Err(Error::Config(format!("unknown config key '{k}' for this command")));
        }
        merged.insert(k.clone(), v.clone());
    }
    for (k, v) in given {
        if !(v.is_null() || v == Value::Bool(false)) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(format!("config: {e}")))
}

fn build_evaluator(m: &MeasureArgs) -> Result<RankEvaluator> {
    let measure = match (&m.family, &m.data) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(Error::Config(
                "give exactly one measure source: --family or --data".into(),
            ))
        }
        (Some(f), None) => {
            let d = m.dim.ok_or_else(|| Error::Config("--family needs --dim".into()))?;
            let family = match f {
                Family::Gaussian => RadialFamily::Gaussian,
                Family::Cauchy => RadialFamily::Cauchy,
            };
            Measure::radial(family, d).map_err(|e| Error::Config(format!("--dim: {e}")))?
        }
        (None, Some(path)) => empirical_from_csv(path, m.dim)?,
    };
    match m.mc {
        None => RankEvaluator::exact(measure),
        Some(n) => {
            let seed = require_seed(m, "--mc")?;
            RankEvaluator::monte_carlo(measure, n, seed)
        }
    }
}

fn require_seed(m: &MeasureArgs, what: &str) -> Result<u64> {
    m.seed
        .ok_or_else(|| Error::Config(format!("{what} is randomized and needs an explicit --seed")))
}

fn open_output<'a>(path: &Option<PathBuf>, out: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).map_err(|e| Error::io(p, e))?)),
        None => Box::new(out),
    })
}

fn finish(mut w: Box<dyn Write + '_>, path: &Option<PathBuf>) -> Result<()> {
    w.flush()
        .map_err(|e| Error::io(path.clone().unwrap_or_else(|| "<stdout>".into()), e))
}

/// Rows of `d` finite numbers; a first row with any non-numeric field is a header.
pub fn read_points(path: &Path, d: usize) -> Result<Vec<Vec<f64>>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(file);
    let mut rows = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed: Vec<Option<f64>> = rec
            .iter()
            .map(|f| f.parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        if idx == 0 && parsed.iter().any(Option::is_none) {
            continue;
        }
        if rec.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rec.len(),
            });
        }
        let mut row = Vec::with_capacity(d);
        for (col, v) in parsed.into_iter().enumerate() {
            row.push(v.ok_or_else(|| Error::Parse {
                row: idx + 1,
                column: col + 1,
                message: format!("'{}' is not a finite number", &rec[col]),
            })?);
        }
        rows.push(row);
    }
    Ok(rows)
}

/// `start:stop:step` (inclusive) or a comma-separated list.
pub fn parse_radii(spec: &str) -> Result<Vec<f64>> {
    let bad = || Error::Config(format!("--radii: cannot parse '{spec}'"));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    let radii: Vec<f64> = if spec.contains(':') {
        let parts: Vec<f64> = spec.split(':').map(num).collect::<Result<_>>()?;
        let [a, b, h] = parts[..] else { return Err(bad()) };
        if !(h > 0.0) || b < a {
            return Err(bad());
        }
        let n = ((b - a) / h + 1e-9).floor() as usize;
        (0..=n).map(|k| a + k as f64 * h).collect()
    } else {
        spec.split(',').map(num).collect::<Result<_>>()?
    };
    if radii.is_empty() || radii.iter().any(|r| !(*r >= 0.0) || !r.is_finite()) {
        return Err(Error::Config(format!("--radii must be non-negative, got '{spec}'")));
    }
    Ok(radii)
}

fn parse_grid(spec: &str) -> Result<(f64, f64, usize)> {
    let bad = || Error::Config(format!("--grid: expected lo:hi:nodes, got '{spec}'"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else { return Err(bad()) };
    Ok((
        lo.trim().parse().map_err(|_| bad())?,
        hi.trim().parse().map_err(|_| bad())?,
        n.trim().parse().map_err(|_| bad())?,
    ))
}

fn fmt_row(values: impl IntoIterator<Item = f64>) -> Vec<String> {
    values.into_iter().map(|v| format!("{v:e}")).collect()
}

fn cmd_rank(a: &RankArgs, out: &mut dyn Write) -> Result<i32> {
    let ev = build_evaluator(&a.measure)?;
    let d = ev.dim().get();
    let w = open_output(&a.out.output, out)?;
    match (&a.points, &a.grid) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(Error::Config("give exactly one of --points or --grid".into()))
        }
        (None, Some(g)) => {
            let (lo, hi, n) = parse_grid(g)?;
            let field = sample_grid(&ev, lo, hi, n)?;
            write_grid(&field, w)?;
            return Ok(EXIT_OK);
        }
        (Some(p), None) => {
            let points = read_points(p, d)?;
            let mc = matches!(ev.quadrature(), crate::rankfield::Quadrature::MonteCarlo { .. });
            let mut rows = Vec::with_capacity(points.len());
            for x in &points {
                let (r, se) = ev.rank_with_stderr(x)?;
                let at_atom = ev.nearest_atom_distance(x) < SINGULARITY_RADIUS;
                rows.push((x, r, se, at_atom));
            }
            match a.out.format.unwrap_or(Format::Csv) {
                Format::Json => {
                    let v: Vec<Value> = rows
                        .iter()
                        .map(|(x, r, se, at)| {
                            let mut o = serde_json::json!({ "x": x, "rank": r, "at_atom": at });
                            if mc {
                                o["stderr"] = serde_json::json!(se);
                            }
                            o
                        })
                        .collect();
                    let mut w = w;
                    serde_json::to_writer_pretty(&mut w, &serde_json::json!({ "points": v }))?;
                    finish(w, &a.out.output)?;
                }
                Format::Csv => {
                    let mut c = csv::Writer::from_writer(w);
                    let mut header: Vec<String> = (1..=d).map(|k| format!("x{k}")).collect();
                    header.extend((1..=d).map(|k| format!("r{k}")));
                    if mc {
                        header.extend((1..=d).map(|k| format!("se{k}")));
                    }
                    header.push("at_atom".into());
                    c.write_record(&header)?;
                    for (x, r, se, at) in rows {
                        let mut row = fmt_row(x.iter().copied().chain(r));
                        if mc {
                            row.extend(fmt_row(se));
                        }
                        row.push(if at { "1" } else { "0" }.into());
                        c.write_record(&row)?;
                    }
                    c.flush().map_err(|e| Error::io("<rank>", e))?;
                }
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_quantile(a: &QuantileArgs, out: &mut dyn Write) -> Result<i32> {
    let ev = build_evaluator(&a.measure)?;
    let d = ev.dim().get();
    let tol = a.tol.unwrap_or_else(|| default_tol(&ev));
    let queries: Vec<QuantileQuery> = match (&a.queries, a.alpha) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(Error::Config("give exactly one of --queries or --alpha".into()))
        }
        (None, Some(alpha)) => {
            let u = a.direction.clone().unwrap_or_else(|| {
                let mut e = vec![0.0; d];
                e[0] = 1.0;
                e
            });
            if u.len() != d {
                return Err(Error::Config(format!(
                    "--direction needs {d} components, got {}",
                    u.len()
                )));
            }
            vec![QuantileQuery::along(alpha, &u)?]
        }
        (Some(p), None) => read_points(p, d + 1)?
            .into_iter()
            .map(|r| QuantileQuery::along(r[0], &r[1..]))
            .collect::<Result<_>>()?,
    };
    let mut results = Vec::with_capacity(queries.len());
    for q in &queries {
        let x = solve_quantile(&ev, q, tol)?;
        let r = ev.rank(&x)?;
        let res = r
            .iter()
            .zip(&q.u)
            .map(|(a, b)| (a - q.alpha * b).powi(2))
            .sum::<f64>()
            .sqrt();
        results.push((q, x, res));
    }
    let mut w = open_output(&a.out.output, out)?;
    match a.out.format.unwrap_or(Format::Csv) {
        Format::Json => {
            let v: Vec<Value> = results
                .iter()
                .map(|(q, x, res)| serde_json::json!({ "alpha": q.alpha, "u": q.u, "quantile": x, "residual": res }))
                .collect();
            serde_json::to_writer_pretty(&mut w, &serde_json::json!({ "tol": tol, "quantiles": v }))?;
            finish(w, &a.out.output)?;
        }
        Format::Csv => {
            let mut c = csv::Writer::from_writer(w);
            let mut header = vec!["alpha".to_string()];
            header.extend((1..=d).map(|k| format!("u{k}")));
            header.extend((1..=d).map(|k| format!("q{k}")));
            header.push("residual".into());
            c.write_record(&header)?;
            for (q, x, res) in results {
                let row = fmt_row(
                    std::iter::once(q.alpha)
                        .chain(q.u.iter().copied())
                        .chain(x)
                        .chain([res]),
                );
                c.write_record(&row)?;
            }
            c.flush().map_err(|e| Error::io("<quantile>", e))?;
        }
    }
    Ok(EXIT_OK)
}

fn reconstruction_config(a: &ReconstructArgs) -> Result<ReconstructionConfig> {
    let mut cfg = ReconstructionConfig::default();
    if let Some(m) = &a.method {
        cfg.method = m.parse()?;
    }
    let grid_default = GridSpec::default();
    cfg.grid = GridSpec {
        lo: a.grid_lo.unwrap_or(grid_default.lo),
        hi: a.grid_hi.unwrap_or(grid_default.hi),
        nodes: a.grid_nodes.unwrap_or(grid_default.nodes),
        inner: a.grid_inner.or(grid_default.inner),
    };
    cfg.eta = a.eta.unwrap_or(cfg.eta);
    cfg.r_max = a.r_max.unwrap_or(cfg.r_max);
    cfg.fd_order = a.fd_order.unwrap_or(cfg.fd_order);
    cfg.extension_height = a.height.unwrap_or(cfg.extension_height);
    cfg.tolerance = a.tolerance.unwrap_or(cfg.tolerance);
    cfg.angles = a.angles.unwrap_or(cfg.angles);
    cfg.mc_budget = a.mc_budget.unwrap_or(cfg.mc_budget);
    cfg.seed = a.measure.seed.unwrap_or(cfg.seed);
    cfg.validate()?;
    Ok(cfg)
}

fn cmd_reconstruct(a: &ReconstructArgs, out: &mut dyn Write) -> Result<i32> {
    let cfg = reconstruction_config(a)?;
    let ev = build_evaluator(&a.measure)?;
    let d = ev.dim();
    let odd_method = cfg.method == Method::OddLocal;
    if d.is_odd() != odd_method {
        return Err(Error::Parity {
            method: if odd_method {
                "odd-local reconstruction"
            } else {
                "even-dimension reconstruction"
            },
            required: if odd_method { "an odd" } else { "an even" },
            d: d.get(),
        });
    }
    let points = match (&a.radii, &a.points) {
        (Some(_), Some(_)) => return Err(Error::Config("give at most one of --radii or --points".into())),
        (Some(r), None) => Some(EvalPoints::Radii(parse_radii(r)?)),
        (None, Some(p)) => Some(EvalPoints::Points(read_points(p, d.get())?)),
        (None, None) => None,
    };
    let mut report = match points {
        Some(p) => reconstruct(&ev, &cfg, &p)?,
        None if odd_method => reconstruct_odd_grid(&ev, &cfg)?,
        None => return Err(Error::Config("even-dimension methods need --radii or --points".into())),
    };
    if !a.reference {
        for s in &mut report.samples {
            s.f_reference = None;
        }
        let diag = &mut report.diagnostics;
        diag.sup_error = None;
        diag.l2_error = None;
        diag.relative_sup_error = None;
        diag.coarse_relative_sup_error = None;
        diag.fd_order_estimate = None;
        if let Some(e) = &mut diag.extension {
            e.error_ratio = None;
        }
    }
    if let Some(p) = &a.report {
        let f = File::create(p).map_err(|e| Error::io(p, e))?;
        report.write_json(BufWriter::new(f))?;
    }
    let mut w = open_output(&a.out.output, out)?;
    match a.out.format.unwrap_or(Format::Csv) {
        Format::Json => report.write_json(&mut w)?,
        Format::Csv => report.write_csv(&mut w)?,
    }
    finish(w, &a.out.output)?;
    Ok(EXIT_OK)
}

fn cmd_contour(a: &ContourArgs, out: &mut dyn Write) -> Result<i32> {
    let beta = a.beta.ok_or_else(|| Error::Config("contour needs --beta".into()))?;
    let ev = build_evaluator(&a.measure)?;
    let c = contour(&ev, beta, a.rays.unwrap_or(64), a.tol.unwrap_or(1e-8))?;
    let mut w = open_output(&a.out.output, out)?;
    match a.out.format.unwrap_or(Format::Csv) {
        Format::Json => c.write_json(&mut w)?,
        Format::Csv => c.write_csv(&mut w)?,
    }
    finish(w, &a.out.output)?;
    Ok(EXIT_OK)
}

fn cmd_content(a: &ContentArgs, out: &mut dyn Write) -> Result<i32> {
    let ev = build_evaluator(&a.measure)?;
    let (label, value, tol, how) = match (a.radius, a.beta) {
        (Some(_), Some(_)) | (None, None) => {
            return Err(Error::Config("give exactly one of --radius or --beta".into()))
        }
        (Some(r), None) => {
            if ev.dim().is_even() {
                return Err(Error::Parity {
                    method: "surface-integral probability content",
                    required: "an odd",
                    d: ev.dim().get(),
                });
            }
            let closed = ev.profile().is_some();
            let route = a.route.unwrap_or(if closed {
                ContentRoute::Analytic
            } else {
                ContentRoute::Grid
            });
            let (path, tol, how) = match route {
                ContentRoute::Analytic => (ContentPath::Analytic, 1e-6, "analytic surface integral"),
                ContentRoute::Grid => (
                    ContentPath::Grid {
                        spacing: a.spacing.unwrap_or(0.05),
                        order: a.order.unwrap_or(2),
                    },
                    1e-3,
                    "finite-difference surface integral",
                ),
            };
            let v = probability_content_surface(&ev, r, path)?;
            (format!("P[|Z| <= {r}]"), v, tol, how)
        }
        (None, Some(beta)) => {
            let table = if ev.profile().is_some() {
                ThetaTable::new(&ev, 1, 0)?
            } else {
                let seed = require_seed(&a.measure, "θ by Monte Carlo")?;
                ThetaTable::monte_carlo(&ev, a.mc_budget.unwrap_or(100_000), seed)?
            };
            let v = table.theta(beta)?;
            let (tol, how) = match &table {
                ThetaTable::Radial(_) => (1e-10, "radial quadrature"),
                ThetaTable::MonteCarlo(s) => (
                    3.0 * (v * (1.0 - v) / s.len() as f64).sqrt(),
                    "Monte Carlo, 3 standard errors",
                ),
            };
            (format!("theta({beta}) = P[|R(Z)| <= {beta}]"), v, tol, how)
        }
    };
    let mut w = open_output(&a.out.output, out)?;
    let io = |e| Error::io("<content>", e);
    match a.out.format {
        Some(Format::Json) => {
            serde_json::to_writer_pretty(
                &mut w,
                &serde_json::json!({ "quantity": label, "value": value, "tolerance": tol, "method": how }),
            )?;
            writeln!(w).map_err(io)?;
        }
        _ => writeln!(w, "{label} = {value:.7} ± {tol:.0e} ({how})").map_err(io)?,
    }
    finish(w, &a.out.output)?;
    Ok(EXIT_OK)
}

fn cmd_selftest(a: &SelftestArgs, out: &mut dyn Write) -> Result<i32> {
    let fault = std::env::var(FAULT_ENV).ok();
    let checks = run_checks(fault.as_deref());
    let failed: Vec<&Check> = checks.iter().filter(|c| !c.passed).collect();
    let io = |e| Error::io("<stdout>", e);
    if a.json {
        serde_json::to_writer_pretty(&mut *out, &checks)?;
        writeln!(out).map_err(io)?;
    } else {
        let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
        for c in &checks {
            let mark = if c.passed { "PASS" } else { "FAIL" };
            writeln!(out, "{mark}  {:width$}  {}", c.name, c.detail).map_err(io)?;
        }
        writeln!(out, "\n{} checks, {} failed", checks.len(), failed.len()).map_err(io)?;
        writeln!(out, "\n{}", selftest::cauchy_note()).map_err(io)?;
        if !failed.is_empty() {
            let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
            writeln!(out, "failed: {}", names.join(", ")).map_err(io)?;
        }
    }
    Ok(if failed.is_empty() { EXIT_OK } else { EXIT_SELFTEST })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(args: &[&str]) -> (i32, String, String) {
        let mut out = Vec::new();
        let mut err = Vec::new();
        let code = run_with(
            std::iter::once("georank").chain(args.iter().copied()),
            &mut out,
            &mut err,
        );
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn radii_specs() {
        assert_eq!(parse_radii("0:1:0.25").unwrap(), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        assert_eq!(parse_radii("0:4:0.1").unwrap().len(), 41);
        assert_eq!(parse_radii("1, 2.5").unwrap(), vec![1.0, 2.5]);
        assert!(parse_radii("1:0:0.1").is_err());
        assert!(parse_radii("-1").is_err());
    }

    #[test]
    fn missing_dim_names_the_flag() {
        let (code, _, err) = run(&["content", "--family", "gaussian", "--radius", "1"]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("--dim"), "{err}");
    }

    #[test]
    fn content_prints_ball_probability() {
        let (code, out, _) = run(&["content", "--family", "gaussian", "--dim", "3", "--radius", "1"]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("0.198748"), "{out}");
    }

    #[test]
    fn parity_mismatch_is_a_config_error() {
        let (code, _, err) = run(&[
            "reconstruct",
            "--family",
            "gaussian",
            "--dim",
            "3",
            "--method",
            "singular",
        ]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("parity"), "{err}");
    }

    #[test]
    fn config_file_merges_under_flags() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        std::fs::write(&p, r#"{"family": "cauchy", "dim": 3, "radius": 200.0, "threads": 2}"#).unwrap();
        let (code, out, _) = run(&[
            "content",
            "--config",
            p.to_str().unwrap(),
            "--radius",
            "1",
            "--family",
            "gaussian",
        ]);
        assert_eq!(code, EXIT_OK);
        assert!(out.contains("0.198748"), "{out}");
        std::fs::write(&p, r#"{"radious": 1.0}"#).unwrap();
        let (code, _, err) = run(&["content", "--config", p.to_str().unwrap()]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("radious"));
    }

    #[test]
    fn monte_carlo_needs_a_seed() {
        let (code, _, err) = run(&[
            "contour", "--family", "gaussian", "--dim", "2", "--mc", "100", "--beta", "0.3",
        ]);
        assert_eq!(code, EXIT_CONFIG);
        assert!(err.contains("--seed"));
    }

    #[test]
    fn exit_codes() {
        assert_eq!(
            exit_code(&Error::NonConvergence {
                iterations: 1,
                residual: 1.0
            }),
            EXIT_NONCONVERGENCE
        );
        assert_eq!(exit_code(&Error::Decay("x".into())), EXIT_NUMERIC);
        assert_eq!(exit_code(&Error::Config("x".into())), EXIT_CONFIG);
    }
}
