//! The `fadsim` command line.
//!
//! Exit codes: 0 success, 1 I/O failure, 2 invalid input, 3 a bound check failed.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;

use crate::analytics::{run_seeds, RestrictedFadRule};
use crate::error::{Error, Result};
use crate::io::{self as files, Format, OracleRow, SweepRow};
use crate::model::{Likelihood, Model, ModelParams};
use crate::oracle::{self, expected_gap_interval};
use crate::sim::{simulate, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_VERIFY_FAILED: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "fadsim",
    version,
    about = "Social learning with a changing state: cascades and fads"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate one or more seeds and write a fad report.
    Simulate(SimulateArgs),
    /// Write one full trace plus plot guide values.
    Trace(TraceArgs),
    /// Run a parameter grid and write one summary row per point.
    Sweep(SweepArgs),
    /// Check the closed-form bounds on a parameter grid.
    Verify(VerifyArgs),
    /// Certified intervals for the expected time to the next sign switch.
    Oracle(OracleArgs),
}

#[derive(Debug, Args, Default)]
pub struct Common {
    /// Signal precision, in (1/2, 1).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Per-period state switch probability, in (0, alpha(1-alpha)).
    #[arg(long = "eps")]
    pub eps: Option<f64>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_parser = parse_format)]
    pub format: Option<Format>,
    /// JSON file supplying defaults for any flag.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SeedArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated list (`1,5,9`) or half-open range (`0..32`).
    #[arg(long, conflicts_with = "seed_count")]
    pub seeds: Option<String>,
    /// Use this many consecutive seeds starting at `--seed` (default 0).
    #[arg(long)]
    pub seed_count: Option<u64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: Common,
    /// Horizon N (periods).
    #[arg(long)]
    pub n: Option<u64>,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Which action changes count as restricted fads.
    #[arg(long, value_parser = parse_rule)]
    pub restricted_rule: Option<RestrictedFadRule>,
}

#[derive(Debug, Args)]
pub struct TraceArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Guide-value file; defaults to `<out>.guides.<csv|json>`.
    #[arg(long)]
    pub guides: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub n: Option<u64>,
    #[command(flatten)]
    pub seeds: SeedArgs,
    /// Comma-separated alpha values.
    #[arg(long)]
    pub alpha_grid: Option<String>,
    /// Comma-separated epsilon values.
    #[arg(long, conflicts_with = "eps_rel_grid")]
    pub eps_grid: Option<String>,
    /// Comma-separated epsilon values as fractions of alpha(1-alpha).
    #[arg(long)]
    pub eps_rel_grid: Option<String>,
    /// Worker threads (default: available cores).
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long, value_parser = parse_rule)]
    pub restricted_rule: Option<RestrictedFadRule>,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub common: Common,
    #[arg(long)]
    pub alpha_grid: Option<String>,
    #[arg(long, conflicts_with = "eps_rel_grid")]
    pub eps_grid: Option<String>,
    #[arg(long)]
    pub eps_rel_grid: Option<String>,
    /// Minimum enumeration depth (default 10*(floor(K)+2)).
    #[arg(long)]
    pub depth: Option<u64>,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub common: Common,
    /// Enumeration depth (default 10*(floor(K)+2)).
    #[arg(long)]
    pub depth: Option<u64>,
    /// Starting public likelihood; defaults to every post-switch value
    /// reachable from zero within 12 periods.
    #[arg(long, allow_hyphen_values = true)]
    pub l0: Option<f64>,
}

/// Keys accepted by `--config`; flags take precedence.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub alpha: Option<f64>,
    #[serde(alias = "epsilon")]
    pub eps: Option<f64>,
    pub n: Option<u64>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub format: Option<String>,
    pub out: Option<PathBuf>,
    pub depth: Option<u64>,
    pub l0: Option<f64>,
    pub alpha_grid: Option<Vec<f64>>,
    pub eps_grid: Option<Vec<f64>>,
    pub eps_rel_grid: Option<Vec<f64>>,
    pub restricted_rule: Option<RestrictedFadRule>,
    pub jobs: Option<usize>,
}

fn parse_format(s: &str) -> std::result::Result<Format, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

fn parse_rule(s: &str) -> std::result::Result<RestrictedFadRule, String> {
    match s {
        "no_preceding_change" | "no-preceding-change" => Ok(RestrictedFadRule::NoPrecedingChange),
        "isolated" => Ok(RestrictedFadRule::Isolated),
        other => Err(format!(
            "unknown rule {other:?} (expected no_preceding_change or isolated)"
        )),
    }
}

pub fn parse_real_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| {
            x.parse()
                .map_err(|_| Error::Invalid(format!("not a number: {x:?}")))
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|v| {
            if v.is_empty() {
                Err(Error::Invalid("empty list".into()))
            } else {
                Ok(v)
            }
        })
}

/// `a,b,c` or `lo..hi` (half-open).
pub fn parse_seed_list(s: &str) -> Result<Vec<u64>> {
    let bad = || Error::Invalid(format!("bad seed list {s:?}"));
    if let Some((lo, hi)) = s.split_once("..") {
        let lo: u64 = lo.trim().parse().map_err(|_| bad())?;
        let hi: u64 = hi.trim().parse().map_err(|_| bad())?;
        if hi <= lo {
            return Err(bad());
        }
        return Ok((lo..hi).collect());
    }
    let v = s
        .split(',')
        .map(|x| x.trim().parse().map_err(|_| bad()))
        .collect::<Result<Vec<u64>>>()?;
    if v.is_empty() {
        return Err(bad());
    }
    Ok(v)
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Invalid(format!("config {}: {e}", p.display())))
        }
    }
}

struct Resolved<'a> {
    common: &'a Common,
    file: FileConfig,
}

impl<'a> Resolved<'a> {
    fn new(common: &'a Common) -> Result<Self> {
        let file = load_config(common.config.as_deref())?;
        Ok(Resolved { common, file })
    }

    fn params(&self) -> Result<ModelParams> {
        let alpha = self
            .common
            .alpha
            .or(self.file.alpha)
            .ok_or_else(|| Error::Invalid("--alpha is required".into()))?;
        let eps = self
            .common
            .eps
            .or(self.file.eps)
            .ok_or_else(|| Error::Invalid("--eps is required".into()))?;
        ModelParams::new(alpha, eps)
    }

    fn format(&self, default: Format) -> Result<Format> {
        match (self.common.format, &self.file.format) {
            (Some(f), _) => Ok(f),
            (None, Some(s)) => s.parse(),
            (None, None) => Ok(default),
        }
    }

    fn out(&self) -> Option<PathBuf> {
        self.common.out.clone().or_else(|| self.file.out.clone())
    }

    fn horizon(&self, flag: Option<u64>) -> Result<u64> {
        let n = flag
            .or(self.file.n)
            .ok_or_else(|| Error::Invalid("--n is required".into()))?;
        if n < 2 {
            return Err(Error::Horizon(n));
        }
        Ok(n)
    }

    fn seeds(&self, args: &SeedArgs) -> Result<Vec<u64>> {
        if let Some(list) = &args.seeds {
            return parse_seed_list(list);
        }
        let base = args.seed.or(self.file.seed);
        if let Some(count) = args.seed_count {
            if count == 0 {
                return Err(Error::Invalid("--seed-count must be at least 1".into()));
            }
            let base = base.unwrap_or(0);
            return Ok((base..base + count).collect());
        }
        if let Some(s) = base {
            return Ok(vec![s]);
        }
        match &self.file.seeds {
            Some(v) if !v.is_empty() => Ok(v.clone()),
            _ => Err(Error::Invalid(
                "a seed is required (--seed, --seeds or --seed-count)".into(),
            )),
        }
    }

    fn grid(
        &self,
        alpha: &Option<String>,
        eps: &Option<String>,
        rel: &Option<String>,
    ) -> Result<Vec<(f64, f64)>> {
        let alphas = match alpha {
            Some(s) => parse_real_list(s)?,
            None => self
                .file
                .alpha_grid
                .clone()
                .unwrap_or_else(|| vec![0.55, 0.6, 0.7, 0.8, 0.9, 0.95]),
        };
        let absolute = match eps {
            Some(s) => Some(parse_real_list(s)?),
            None => self.file.eps_grid.clone(),
        };
        let grid = if let Some(eps) = absolute {
            alphas
                .iter()
                .flat_map(|&a| eps.iter().map(move |&e| (a, e)))
                .collect()
        } else {
            let fracs = match rel {
                Some(s) => parse_real_list(s)?,
                None => self
                    .file
                    .eps_rel_grid
                    .clone()
                    .unwrap_or_else(|| vec![0.5, 0.1, 0.01, 0.001]),
            };
            alphas
                .iter()
                .flat_map(|&a| fracs.iter().map(move |&f| (a, f * a * (1.0 - a))))
                .collect::<Vec<_>>()
        };
        for &(a, e) in &grid {
            ModelParams::new(a, e)?;
        }
        Ok(grid)
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn summary_line(out: Option<&Path>, line: &str) {
    if out.is_some() {
        println!("{line}");
    } else {
        eprintln!("{line}");
    }
}

fn cmd_simulate(args: &SimulateArgs) -> Result<i32> {
    let r = Resolved::new(&args.common)?;
    let params = r.params()?;
    let horizon = r.horizon(args.n)?;
    if horizon < 3 {
        return Err(Error::Horizon(horizon));
    }
    let seeds = r.seeds(&args.seeds)?;
    let format = r.format(Format::Json)?;
    let rule = args
        .restricted_rule
        .or(r.file.restricted_rule)
        .unwrap_or_default();
    let report = run_seeds(params, horizon, &seeds, rule)?;
    let out = r.out();
    let mut w = open_out(out.as_deref())?;
    files::write_report(&mut w, &report, format)?;
    w.flush()?;
    summary_line(
        out.as_deref(),
        &format!(
            "Q_a={:.6} Q_theta={:.6} fads={}",
            report.q_a, report.q_theta, report.fads_emerged
        ),
    );
    Ok(EXIT_OK)
}

fn guides_path(out: &Path, format: Format) -> PathBuf {
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let mut name = out.file_stem().unwrap_or_default().to_os_string();
    name.push(format!(".guides.{ext}"));
    out.with_file_name(name)
}

fn cmd_trace(args: &TraceArgs) -> Result<i32> {
    let r = Resolved::new(&args.common)?;
    let params = r.params()?;
    let horizon = r.horizon(args.n)?;
    let seed = args
        .seed
        .or(r.file.seed)
        .ok_or_else(|| Error::Invalid("--seed is required".into()))?;
    let format = r.format(Format::Csv)?;
    let trace = simulate(&RunConfig::new(params, horizon, seed)?)?;
    let out = r.out();
    let mut w = open_out(out.as_deref())?;
    match format {
        Format::Csv => files::write_trace_csv(&mut w, &trace.steps)?,
        Format::Json => files::write_trace_jsonl(&mut w, &trace.steps)?,
    }
    w.flush()?;
    let guides = files::guides(&Model::new(params));
    let gpath = args
        .guides
        .clone()
        .or_else(|| out.as_deref().map(|o| guides_path(o, format)));
    match gpath {
        Some(p) => {
            let mut g = BufWriter::new(File::create(&p)?);
            files::write_guides(&mut g, &guides, format)?;
            g.flush()?;
        }
        None => files::write_guides(io::stderr().lock(), &guides, format)?,
    }
    Ok(EXIT_OK)
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32> {
    let r = Resolved::new(&args.common)?;
    let grid = r.grid(&args.alpha_grid, &args.eps_grid, &args.eps_rel_grid)?;
    let horizon = r.horizon(args.n)?;
    if horizon < 3 {
        return Err(Error::Horizon(horizon));
    }
    let seeds = r.seeds(&args.seeds)?;
    let format = r.format(Format::Csv)?;
    let rule = args
        .restricted_rule
        .or(r.file.restricted_rule)
        .unwrap_or_default();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(j) = args.jobs.or(r.file.jobs) {
        if j == 0 {
            return Err(Error::Invalid("--jobs must be at least 1".into()));
        }
        pool = pool.num_threads(j);
    }
    let pool = pool.build().map_err(|e| Error::Invalid(e.to_string()))?;
    // collect keeps grid order regardless of completion order
    let rows = pool.install(|| {
        grid.par_iter()
            .enumerate()
            .map(|(i, &(a, e))| {
                let report = run_seeds(ModelParams::new(a, e)?, horizon, &seeds, rule)?;
                Ok(SweepRow::from_report(i, &report))
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let out = r.out();
    let mut w = open_out(out.as_deref())?;
    files::write_sweep(&mut w, &rows, format)?;
    w.flush()?;
    for row in &rows {
        summary_line(
            out.as_deref(),
            &format!(
                "alpha={} eps={} Q_a={:.6} Q_theta={:.6} ratio={} fads={}",
                row.alpha,
                row.epsilon,
                row.q_a,
                row.q_theta,
                row.ratio.map_or("NA".to_string(), |x| format!("{x:.4}")),
                row.fads_emerged
            ),
        );
    }
    Ok(EXIT_OK)
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32> {
    let r = Resolved::new(&args.common)?;
    let grid = r.grid(&args.alpha_grid, &args.eps_grid, &args.eps_rel_grid)?;
    let format = r.format(Format::Csv)?;
    let report = oracle::verify_bounds(&grid, args.depth.or(r.file.depth))?;
    let out = r.out();
    let mut w = open_out(out.as_deref())?;
    files::write_verify(&mut w, &report.rows, format)?;
    w.flush()?;
    for f in &report.failures {
        eprintln!("FAIL {f}");
    }
    let passed = report.rows.iter().filter(|r| r.pass).count();
    summary_line(
        out.as_deref(),
        &format!("verify: {passed}/{} grid points pass", report.rows.len()),
    );
    Ok(if report.all_pass() {
        EXIT_OK
    } else {
        EXIT_VERIFY_FAILED
    })
}

fn cmd_oracle(args: &OracleArgs) -> Result<i32> {
    let r = Resolved::new(&args.common)?;
    let params = r.params()?;
    let model = Model::new(params);
    let format = r.format(Format::Csv)?;
    let depth = args
        .depth
        .or(r.file.depth)
        .unwrap_or_else(|| oracle::default_depth(&model));
    let results = match args.l0.or(r.file.l0) {
        Some(l0) => vec![expected_gap_interval(Likelihood(l0), &params, depth)?],
        None => oracle::post_switch_values(&params, oracle::POST_SWITCH_PERIODS)
            .par_iter()
            .map(|&l0| expected_gap_interval(Likelihood(l0), &params, depth))
            .collect::<Result<Vec<_>>>()?,
    };
    let rows: Vec<OracleRow> = results
        .into_iter()
        .map(|result| OracleRow {
            alpha: params.alpha(),
            epsilon: params.epsilon(),
            result,
        })
        .collect();
    let out = r.out();
    let mut w = open_out(out.as_deref())?;
    files::write_oracle(&mut w, &rows, format)?;
    w.flush()?;
    let worst = rows
        .iter()
        .map(|r| r.result.value_high)
        .fold(f64::NEG_INFINITY, f64::max);
    let m = model.constants.fad_bound_m;
    summary_line(
        out.as_deref(),
        &format!(
            "oracle: {} starting values, max interval_high={worst:.4} M={m:.4} below={}",
            rows.len(),
            worst < m
        ),
    );
    Ok(EXIT_OK)
}

pub fn execute(cli: &Cli) -> Result<i32> {
    match &cli.command {
        Command::Simulate(a) => cmd_simulate(a),
        Command::Trace(a) => cmd_trace(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Verify(a) => cmd_verify(a),
        Command::Oracle(a) => cmd_oracle(a),
    }
}

/// Parses `args` (program name first) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() {
                EXIT_VALIDATION
            } else {
                EXIT_OK
            };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                EXIT_VALIDATION
            } else {
                EXIT_IO
            }
        }
    }
}
