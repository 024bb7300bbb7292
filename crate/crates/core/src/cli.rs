//! Command-line front end.
//!
//! Exit codes: `0` success, `1` configuration error, `2` solver failure.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;

use crate::config::RunConfig;
use crate::error::Error;
use crate::nehari::State;
use crate::scaling::{bracket, degree_sign_check, eval_m, solve_scaling, ScalingCoeffs};
use crate::sync::{sync_criterion, sync_solve, unboundedness_experiment_with};
use crate::system::{continue_to, lambda_sweep, uncoupled_product, verify_solution, write_sweep_csv, write_trace_csv};
use crate::selftest;

/// Environment variable overriding the configured seed.
pub const SEED_ENV: &str = "NEHARI_FORGE_SEED";

#[derive(Debug, Parser)]
#[command(name = "nehari-forge", version, about = "Positive solutions of competitive elliptic systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Continue from the uncoupled system to `t` and certify the result.
    Solve {
        config: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        /// Output directory for report.json, trace.csv and u<i>.csv.
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Unique positive zero of the scaling map for inline coefficients.
    ScalingSolve {
        #[arg(long)]
        p: f64,
        /// Comma list.
        #[arg(long)]
        a: String,
        /// Comma list.
        #[arg(long)]
        b: String,
        /// Matrix with rows separated by `;` (default zero).
        #[arg(long)]
        d: Option<String>,
        /// Matrix with rows separated by `;` (default ones, or p/4 without `--d`).
        #[arg(long)]
        alpha: Option<String>,
        /// Matrix with rows separated by `;` (default ones, or p/4 without `--d`).
        #[arg(long)]
        beta: Option<String>,
    },
    /// Evaluate the synchronization criterion of a two-species config.
    SyncCheck { config: PathBuf },
    /// Construct the synchronized pair `(w, ρw)`.
    SyncSolve {
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Re-solve with `λ` scaled by each multiplier of `[sweep]`.
    SweepLambda {
        config: PathBuf,
        /// CSV destination (stdout when omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate the profiles of `−Δw = μw^p − aw^q` over `[unbounded] a`.
    Unbounded {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant suite.
    Selftest {
        /// Optional config with a `[selftest]` section.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

struct Failure {
    code: i32,
    msg: String,
}

fn config_error(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 1,
        msg: e.to_string(),
    }
}

fn solver_error(e: impl std::fmt::Display) -> Failure {
    Failure {
        code: 2,
        msg: e.to_string(),
    }
}

fn io_error(path: &Path, e: std::io::Error) -> Failure {
    Failure {
        code: 2,
        msg: format!("{}: {e}", path.display()),
    }
}

/// Parses `args` (including the program name) and runs the command; returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command) {
        Ok(code) => code,
        Err(f) => {
            eprintln!("error: {}", f.msg);
            f.code
        }
    }
}

fn dispatch(command: Command) -> Result<i32, Failure> {
    match command {
        Command::Solve { config, t, out } => solve(&config, t, &out),
        Command::ScalingSolve { p, a, b, d, alpha, beta } => scaling_solve(p, &a, &b, d, alpha, beta),
        Command::SyncCheck { config } => sync_check(&config),
        Command::SyncSolve { config, out } => sync_solve_cmd(&config, &out),
        Command::SweepLambda { config, out } => sweep(&config, out.as_deref()),
        Command::Unbounded { config, out } => unbounded(&config, out.as_deref()),
        Command::Selftest { config, seed } => selftest_cmd(config.as_deref(), seed),
    }
}

fn load(path: &Path) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::from_path(path).map_err(|e| config_error(format!("{}: {e}", path.display())))?;
    if let Some(seed) = seed_override()? {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn seed_override() -> Result<Option<u64>, Failure> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| config_error(format!("{SEED_ENV} = `{v}` is not a nonnegative integer"))),
        Err(_) => Ok(None),
    }
}

fn timestamp() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(value).map_err(solver_error)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

fn write_fields(out: &Path, u: &State) -> Result<(), Failure> {
    for (i, c) in u.components().iter().enumerate() {
        let path = out.join(format!("u{}.csv", i + 1));
        let file = fs::File::create(&path).map_err(|e| io_error(&path, e))?;
        c.write_csv(std::io::BufWriter::new(file)).map_err(|e| io_error(&path, e))?;
    }
    Ok(())
}

fn grid_json(cfg: &RunConfig) -> Result<serde_json::Value, Failure> {
    let d = cfg.domain().map_err(config_error)?;
    let (nx, ny) = d.nodes();
    let lengths = d.lengths();
    Ok(if d.dim() == 1 {
        json!({ "lengths": [lengths[0]], "nodes": [nx] })
    } else {
        json!({ "lengths": lengths, "nodes": [nx, ny] })
    })
}

fn solve(path: &Path, t: f64, out: &Path) -> Result<i32, Failure> {
    let cfg = load(path)?;
    let params = cfg.params().map_err(config_error)?;
    let domain = cfg.domain().map_err(config_error)?;
    if !(0.0..=1.0).contains(&t) {
        return Err(config_error(format!("--t {t} must lie in [0, 1]")));
    }
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let base = uncoupled_product(params, domain).map_err(solver_error)?;
    let run = continue_to(params, &base, t, &cfg.solver).map_err(solver_error)?;
    let mut report = verify_solution(params, &run.state, t).map_err(solver_error)?;
    report.iterations = run.newton_iterations;
    let doc = json!({
        "command": "solve",
        "timestamp": timestamp(),
        "seed": cfg.seed,
        "t": t,
        "grid": grid_json(&cfg)?,
        "params": params,
        "solver": cfg.solver,
        "continuation": {
            "steps": run.trace.len() - 1,
            "guard": run.guard,
            "max_sup_norm": run.trace.iter().fold(0.0, |m: f64, r| m.max(r.sup_norm)),
        },
        "report": report,
    });
    write_json(&out.join("report.json"), &doc)?;
    let trace_path = out.join("trace.csv");
    let file = fs::File::create(&trace_path).map_err(|e| io_error(&trace_path, e))?;
    write_trace_csv(&run.trace, std::io::BufWriter::new(file)).map_err(|e| io_error(&trace_path, e))?;
    write_fields(out, &run.state)?;
    println!(
        "t = {t}: residual {:.3e}, nehari {:.3e}, certified {}",
        report.relative_residual, report.nehari_relative, report.certified
    );
    Ok(if report.certified { 0 } else { 2 })
}

fn parse_list(s: &str, what: &str) -> Result<Vec<f64>, Failure> {
    s.split(',')
        .map(|c| c.trim().parse::<f64>().map_err(|_| config_error(format!("{what}: cannot parse `{c}`"))))
        .collect()
}

fn parse_matrix(s: Option<&str>, l: usize, fill: f64, what: &str) -> Result<Vec<f64>, Failure> {
    let Some(s) = s else {
        return Ok(vec![fill; l * l]);
    };
    let rows: Vec<&str> = s.split(';').collect();
    if rows.len() != l {
        return Err(config_error(format!("{what}: {} rows, expected {l}", rows.len())));
    }
    let mut out = Vec::with_capacity(l * l);
    for row in rows {
        let r = parse_list(row, what)?;
        if r.len() != l {
            return Err(config_error(format!("{what}: row `{row}` has {} entries, expected {l}", r.len())));
        }
        out.extend(r);
    }
    Ok(out)
}

fn scaling_solve(
    p: f64,
    a: &str,
    b: &str,
    d: Option<String>,
    alpha: Option<String>,
    beta: Option<String>,
) -> Result<i32, Failure> {
    let a = parse_list(a, "a")?;
    let b = parse_list(b, "b")?;
    let l = a.len();
    // without coupling the exponents never enter; keep the defaults admissible for any p
    let e = if d.is_some() { 1.0 } else { p / 4.0 };
    let d = parse_matrix(d.as_deref(), l, 0.0, "d")?;
    let alpha = parse_matrix(alpha.as_deref(), l, e, "alpha")?;
    let beta = parse_matrix(beta.as_deref(), l, e, "beta")?;
    let c = ScalingCoeffs::new(p, a, b, d, alpha, beta).map_err(config_error)?;
    let s = solve_scaling(&c).map_err(solver_error)?;
    let (r, big) = bracket(&c).map_err(solver_error)?;
    let residual = eval_m(&c, &s)
        .map_err(solver_error)?
        .iter()
        .fold(0.0, |m: f64, v| m.max(v.abs()));
    let doc = json!({
        "s": s,
        "degree_sign": degree_sign_check(&c, &s).map_err(solver_error)?,
        "max_residual": residual,
        "bracket": [r, big],
    });
    println!("{}", serde_json::to_string_pretty(&doc).map_err(solver_error)?);
    Ok(0)
}

fn sync_check(path: &Path) -> Result<i32, Failure> {
    let cfg = load(path)?;
    let verdict = sync_criterion(cfg.params().map_err(config_error)?).map_err(config_error)?;
    println!("{}", serde_json::to_string_pretty(&verdict).map_err(solver_error)?);
    Ok(0)
}

fn sync_solve_cmd(path: &Path, out: &Path) -> Result<i32, Failure> {
    let cfg = load(path)?;
    let params = cfg.params().map_err(config_error)?;
    let domain = cfg.domain().map_err(config_error)?;
    let verdict = sync_criterion(params).map_err(config_error)?;
    let pair = sync_solve(params, domain).map_err(|e| match e {
        Error::CriterionFails(_) => Failure { code: 2, msg: e.to_string() },
        e => solver_error(e),
    })?;
    fs::create_dir_all(out).map_err(|e| io_error(out, e))?;
    let report = verify_solution(params, &pair, 1.0).map_err(solver_error)?;
    let doc = json!({
        "command": "sync-solve",
        "timestamp": timestamp(),
        "seed": cfg.seed,
        "grid": grid_json(&cfg)?,
        "params": params,
        "verdict": verdict,
        "report": report,
    });
    write_json(&out.join("report.json"), &doc)?;
    write_fields(out, &pair)?;
    println!(
        "synchronized pair: a = {}, rho = {}, residual {:.3e}",
        verdict.a, verdict.rho, report.relative_residual
    );
    Ok(0)
}

fn output(out: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    Ok(match out {
        Some(path) => Box::new(std::io::BufWriter::new(fs::File::create(path).map_err(|e| io_error(path, e))?)),
        None => Box::new(std::io::stdout()),
    })
}

fn sweep(path: &Path, out: Option<&Path>) -> Result<i32, Failure> {
    let cfg = load(path)?;
    let params = cfg.params().map_err(config_error)?;
    let domain = cfg.domain().map_err(config_error)?;
    let sweep = cfg.sweep.as_ref().ok_or_else(|| config_error("missing [sweep] section"))?;
    let points = lambda_sweep(params, &sweep.multipliers, domain, &cfg.solver).map_err(|e| match e {
        Error::InvalidParams(_) => config_error(e),
        e => solver_error(e),
    })?;
    for pt in points.iter().filter(|p| p.error.is_some()) {
        eprintln!("kappa = {}: {}", pt.kappa, pt.error.as_deref().unwrap_or_default());
    }
    let sink = output(out)?;
    write_sweep_csv(&points, params.len(), sink).map_err(solver_error)?;
    Ok(0)
}

fn unbounded(path: &Path, out: Option<&Path>) -> Result<i32, Failure> {
    let cfg = load(path)?;
    let domain = cfg.domain().map_err(config_error)?;
    let u = cfg.unbounded.as_ref().ok_or_else(|| config_error("missing [unbounded] section"))?;
    let table = unboundedness_experiment_with(u.mu, u.p, u.q, &u.a, domain, u.workers).map_err(config_error)?;
    for row in table.rows.iter().filter(|r| r.error.is_some()) {
        eprintln!("a = {}: {}", row.a, row.error.as_deref().unwrap_or_default());
    }
    table.write_csv(output(out)?).map_err(solver_error)?;
    Ok(0)
}

fn selftest_cmd(config: Option<&Path>, seed: Option<u64>) -> Result<i32, Failure> {
    let cfg = match config {
        Some(path) => load(path)?,
        None => {
            let mut cfg = RunConfig::parse("").map_err(config_error)?;
            if let Some(s) = seed_override()? {
                cfg.seed = s;
            }
            cfg
        }
    };
    let seed = seed.unwrap_or(cfg.seed);
    let summary = selftest::run(&cfg.selftest, seed);
    println!("{summary}");
    Ok(if summary.passed() { 0 } else { 2 })
}
