//! The `fpe` command line: argument parsing, per-system presets and exit codes.
//!
//! Exit codes: 0 success, 1 i/o failure, 2 bad system or arguments, 3 branch budget
//! exceeded without `--allow-partial`, 4 insufficient data for a fit, 5 a verifier
//! sample without a witness. Summary lines on stdout are `key=value`.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::entropy::{eps_schedule, estimate_entropy, estimate_from_set, EntropyReport};
use crate::error::{FpeError, Result};
use crate::integrate::{check_invariant_set, generate_trajectories, BranchPolicy, Generated, SampledTrajectory};
use crate::io;
use crate::psvf::{classify_point, PiecewiseSystem, Tolerances, Vec2};
use crate::systems::bean::{self, BeanEntropy, Chart};
use crate::systems::symbolic::{symbolic_entropy, ArcLibrary};
use crate::systems::{builtin, controls, figure8, list_systems, load_system_json, parse_alpha, rosette};
use crate::traj_space::{SampledSet, TrajectoryMetricConfig};

#[derive(Parser, Debug)]
#[command(name = "fpe", version, about = "Trajectories, capacities and entropy of planar Filippov systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct SystemArgs {
    /// Built-in system: rosette:<alpha>, figure8, bean, node0, smooth-rot.
    #[arg(long)]
    pub system: Option<String>,
    /// JSON system file with polynomial X, Y, f and a domain.
    #[arg(long)]
    pub system_file: Option<PathBuf>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Classify evenly spaced points of Σ.
    Classify {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 100)]
        sigma_samples: usize,
        /// CSV destination; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate branching trajectories on [−W, W].
    Simulate {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long = "W", default_value_t = 8.0)]
        window: f64,
        #[arg(long, default_value_t = 20_000)]
        branch_max: usize,
        #[arg(long, default_value_t = 0.1)]
        slide_exit_grid: f64,
        /// `origin`, `x,y` or `sigma:lo:hi:count`; repeatable.
        #[arg(long, allow_hyphen_values = true)]
        seed: Vec<String>,
        /// Forward times `lo:hi` where every continuation is explored (default `0:W`).
        #[arg(long, allow_hyphen_values = true)]
        branch_window: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        allow_partial: bool,
    },
    /// Capacity counts and entropy estimate; writes a JSON report and a plotting CSV.
    Entropy {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long)]
        dt: Option<f64>,
        /// Truncation half-width W′ of ρ; the trajectory window is W′ + max n.
        #[arg(long = "W")]
        w_prime: Option<i64>,
        /// One value ε₀ (five halvings follow) or a comma list.
        #[arg(long)]
        eps: Option<String>,
        /// `a..b` or a comma list.
        #[arg(long)]
        n: Option<String>,
        #[arg(long, default_value_t = 20_000)]
        branch_max: usize,
        #[arg(long)]
        slide_exit_grid: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
        #[arg(long)]
        allow_partial: bool,
    },
    /// Sampled check of the escape/return sufficient condition on an interval J of Σ^e.
    Verify {
        #[command(flatten)]
        sys: SystemArgs,
        #[arg(long = "J", default_value = "-0.6:-0.1", allow_hyphen_values = true)]
        j: String,
        #[arg(long, default_value_t = 32)]
        samples: usize,
        #[arg(long, default_value_t = 20.0)]
        horizon: f64,
        #[arg(long, default_value_t = 0.01)]
        dt: f64,
        #[arg(long, default_value_t = 0.1)]
        slide_exit_grid: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Names of the built-in systems.
    ListSystems,
}

/// A failure with the exit code it maps to.
#[derive(Debug)]
pub struct Exit {
    pub code: i32,
    pub message: String,
}

impl From<FpeError> for Exit {
    fn from(e: FpeError) -> Self {
        let code = match e {
            FpeError::Io(_) => 1,
            FpeError::BranchBudgetExceeded { .. } => 3,
            FpeError::InsufficientData(_) => 4,
            _ => 2,
        };
        Exit { code, message: e.to_string() }
    }
}

fn bad(msg: impl Into<String>) -> Exit {
    Exit { code: 2, message: msg.into() }
}

/// Parses `argv`, caps the worker pool from `FPE_THREADS`, runs the command and
/// returns the exit code. Output goes to `stdout`, diagnostics to stderr.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    if let Some(n) = std::env::var("FPE_THREADS").ok().and_then(|v| v.parse::<usize>().ok()) {
        // Fails harmlessly if a pool already exists (repeated calls in one process).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    match run(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", e.message);
            e.code
        }
    }
}

pub fn run(cmd: Command, out: &mut dyn Write) -> std::result::Result<i32, Exit> {
    match cmd {
        Command::ListSystems => {
            for (name, about) in list_systems() {
                say(out, format!("{name}\t{about}"))?;
            }
            Ok(0)
        }
        Command::Classify { sys, sigma_samples, out: path } => cmd_classify(&sys, sigma_samples, path.as_deref(), out),
        Command::Simulate { sys, dt, window, branch_max, slide_exit_grid, seed, branch_window, out: path, format, allow_partial } => {
            // The bean branches at every slide exit, so its default window is short.
            let bw = match branch_window {
                Some(s) => parse_pair(&s)?,
                None if sys.system.as_deref() == Some("bean") => (0.0, window.min(1.5)),
                None => (0.0, window),
            };
            let policy = BranchPolicy {
                max_branches: branch_max,
                slide_exit_grid,
                horizon: window,
                dedupe: true,
                branch_window: Some(bw),
            };
            cmd_simulate(&sys, &policy, dt, &seed, path.as_deref(), format, allow_partial, out)
        }
        Command::Entropy { sys, dt, w_prime, eps, n, branch_max, slide_exit_grid, out: path, format, allow_partial } => {
            let opts = EntropyOptions {
                dt,
                w_prime,
                eps: eps.as_deref().map(parse_eps).transpose()?,
                ns: n.as_deref().map(parse_ns).transpose()?,
                branch_max,
                slide_exit_grid,
            };
            cmd_entropy(&sys, &opts, path.as_deref(), format, allow_partial, out)
        }
        Command::Verify { sys, j, samples, horizon, dt, slide_exit_grid, out: path } => {
            let (a, b) = parse_pair(&j)?;
            cmd_verify(&sys, Chart { a, b }, samples, horizon, dt, slide_exit_grid, path.as_deref(), out)
        }
    }
}

fn say(out: &mut dyn Write, line: String) -> std::result::Result<(), Exit> {
    writeln!(out, "{line}").map_err(|e| Exit { code: 1, message: e.to_string() })
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn parse_pair(s: &str) -> std::result::Result<(f64, f64), Exit> {
    let (a, b) = s.split_once(':').ok_or_else(|| bad(format!("expected lo:hi, got `{s}`")))?;
    let p = |v: &str| v.trim().parse::<f64>().map_err(|_| bad(format!("not a number: `{v}`")));
    let (a, b) = (p(a)?, p(b)?);
    if !(a <= b) {
        return Err(bad(format!("empty interval `{s}`")));
    }
    Ok((a, b))
}

pub fn parse_eps(s: &str) -> std::result::Result<Vec<f64>, Exit> {
    let v: Vec<f64> = s
        .split(',')
        .map(|x| x.trim().parse::<f64>().map_err(|_| bad(format!("bad ε `{x}`"))))
        .collect::<std::result::Result<_, _>>()?;
    if v.iter().any(|e| !(*e > 0.0)) {
        return Err(bad("ε values must be positive"));
    }
    Ok(if v.len() == 1 { eps_schedule(v[0], 5) } else { v })
}

pub fn parse_ns(s: &str) -> std::result::Result<Vec<usize>, Exit> {
    let p = |x: &str| x.trim().parse::<usize>().map_err(|_| bad(format!("bad n `{x}`")));
    let v: Vec<usize> = match s.split_once("..") {
        Some((a, b)) => (p(a)?..=p(b)?).collect(),
        None => s.split(',').map(p).collect::<std::result::Result<_, _>>()?,
    };
    if v.is_empty() || v.contains(&0) {
        return Err(bad("n values must be positive"));
    }
    Ok(v)
}

/// The system selected by `--system` or `--system-file`.
pub fn load_system(args: &SystemArgs) -> Result<PiecewiseSystem> {
    match (&args.system, &args.system_file) {
        (Some(name), None) => builtin(name),
        (None, Some(path)) => load_system_json(&std::fs::read_to_string(path).map_err(|e| FpeError::InvalidSystem(format!("{}: {e}", path.display())))?),
        _ => Err(FpeError::InvalidArgument("give exactly one of --system and --system-file".into())),
    }
}

fn sigma_points(sys: &PiecewiseSystem, count: usize) -> Vec<Vec2> {
    let d = sys.domain;
    let ymid = 0.5 * (d.ymin + d.ymax);
    (0..count)
        .map(|i| {
            let x = d.xmin + (d.xmax - d.xmin) * (i as f64 + 0.5) / count as f64;
            let start = if sys.f.eval(Vec2::new(x, 0.0)).abs() < sys.f.eval(Vec2::new(x, ymid)).abs() { 0.0 } else { ymid };
            sys.f.project(Vec2::new(x, start))
        })
        .filter(|p| sys.domain.contains(*p) && sys.f.eval(*p).abs() <= 1e-9)
        .collect()
}

fn cmd_classify(args: &SystemArgs, samples: usize, path: Option<&Path>, out: &mut dyn Write) -> std::result::Result<i32, Exit> {
    let sys = load_system(args)?;
    let tol = Tolerances::default();
    let mut table = String::from("x,y,class\n");
    let mut counts: std::collections::BTreeMap<String, usize> = Default::default();
    for p in sigma_points(&sys, samples) {
        let c = classify_point(&sys, p, &tol).label();
        let _ = writeln!(table, "{},{},{}", p.x, p.y, c);
        *counts.entry(c).or_default() += 1;
    }
    match path {
        Some(p) => std::fs::write(p, &table).map_err(FpeError::from)?,
        None => out.write_all(table.as_bytes()).map_err(FpeError::from)?,
    }
    let summary: Vec<String> = counts.iter().map(|(k, v)| format!("{k}={v}")).collect();
    say(out, format!("system={} samples={} {}", sys.name, samples, summary.join(" ")))?;
    Ok(0)
}

/// Seeds for `simulate` when none are given.
fn default_seeds(name: &str, sys: &PiecewiseSystem) -> Vec<Vec2> {
    match name {
        "bean" => controls::sigma_seeds(bean::DEFAULT_J.0, bean::DEFAULT_J.1, 8),
        "node0" => controls::sigma_seeds(-0.8, -0.2, 8),
        "figure8" => vec![Vec2::zeros()],
        "smooth-rot" => (1..=5).map(|i| Vec2::new(0.3 * i as f64, 0.0)).collect(),
        _ => sigma_points(sys, 8),
    }
}

fn parse_seed(s: &str, sys: &PiecewiseSystem) -> std::result::Result<Vec<Vec2>, Exit> {
    if s == "origin" {
        return Ok(vec![Vec2::zeros()]);
    }
    if let Some(rest) = s.strip_prefix("sigma:") {
        let parts: Vec<&str> = rest.split(':').collect();
        if parts.len() != 3 {
            return Err(bad(format!("expected sigma:lo:hi:count, got `{s}`")));
        }
        let lo: f64 = parts[0].parse().map_err(|_| bad(format!("bad seed `{s}`")))?;
        let hi: f64 = parts[1].parse().map_err(|_| bad(format!("bad seed `{s}`")))?;
        let k: usize = parts[2].parse().map_err(|_| bad(format!("bad seed `{s}`")))?;
        return Ok(controls::sigma_seeds(lo, hi, k).into_iter().map(|p| sys.f.project(p)).collect());
    }
    let (x, y) = s.split_once(',').ok_or_else(|| bad(format!("bad seed `{s}`")))?;
    let x: f64 = x.trim().parse().map_err(|_| bad(format!("bad seed `{s}`")))?;
    let y: f64 = y.trim().parse().map_err(|_| bad(format!("bad seed `{s}`")))?;
    Ok(vec![Vec2::new(x, y)])
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    args: &SystemArgs,
    policy: &BranchPolicy,
    dt: f64,
    seeds: &[String],
    path: Option<&Path>,
    format: Format,
    allow_partial: bool,
    out: &mut dyn Write,
) -> std::result::Result<i32, Exit> {
    let sys = load_system(args)?;
    let name = args.system.clone().unwrap_or_default();
    let g: Generated = if let Some(a) = name.strip_prefix("rosette:") {
        rosette::build_rosette(parse_alpha(a)?)?.generate(policy, dt)?
    } else {
        let seeds: Vec<Vec2> = if seeds.is_empty() {
            default_seeds(&name, &sys)
        } else {
            let mut v = Vec::new();
            for s in seeds {
                v.extend(parse_seed(s, &sys)?);
            }
            v
        };
        generate_trajectories(&sys, &seeds, policy, dt, &Tolerances::default())?
    };
    if g.budget_exceeded && !allow_partial {
        return Err(FpeError::BranchBudgetExceeded { budget: policy.max_branches }.into());
    }
    let invariant = match name.as_str() {
        "bean" => Some(check_invariant_set(&|p| bean::in_k(p, 0.0), &g.trajectories, Tolerances::default().tol_f)),
        _ => None,
    };
    if let Some(p) = path {
        let w = create(p)?;
        match format {
            Format::Json => io::write_trajectories_json(w, &g.trajectories)?,
            Format::Csv => io::write_trajectories_csv(w, &g.trajectories)?,
        }
    }
    let inv = match &invariant {
        Some(r) => format!("invariant={} invariant_violations={}", r.holds, r.violations),
        None => "invariant=n/a".into(),
    };
    say(
        out,
        format!(
            "system={} trajectories={} budget_exceeded={} domain_exits={} {inv}",
            sys.name,
            g.trajectories.len(),
            g.budget_exceeded,
            g.domain_exits
        ),
    )?;
    Ok(0)
}

/// Overrides for the per-system entropy presets.
#[derive(Clone, Debug, Default)]
pub struct EntropyOptions {
    pub dt: Option<f64>,
    pub w_prime: Option<i64>,
    pub eps: Option<Vec<f64>>,
    pub ns: Option<Vec<usize>>,
    pub branch_max: usize,
    pub slide_exit_grid: Option<f64>,
}

/// Core margins `m` with `μ/2^m ≤ ε` for each requested ε; `[1, 2]` by default.
fn symbolic_margins(lib: &ArcLibrary, eps: Option<&[f64]>) -> Vec<u32> {
    let mut ms: Vec<u32> = match eps {
        None => vec![1, 2],
        Some(v) => v.iter().map(|&e| (lib.mu / e).log2().ceil().max(0.0) as u32).collect(),
    };
    ms.sort_unstable();
    ms.dedup();
    ms
}

fn symbolic_report(name: &str, lib: &ArcLibrary, opts: &EntropyOptions) -> Result<EntropyReport> {
    let ns = opts.ns.clone().unwrap_or_else(|| vec![1, 2, 3, 4]);
    let ms = symbolic_margins(lib, opts.eps.as_deref());
    let mut r = symbolic_entropy(name, lib, &ms, &ns, opts.w_prime.unwrap_or(8), lib.extent())?;
    r.notes.push(format!("all words over [−m, m+n) at ε = μ/2^m, m in {ms:?}; μ = {}", lib.mu));
    Ok(r)
}

/// The entropy report for a named built-in or a loaded system.
pub fn entropy_report(args: &SystemArgs, opts: &EntropyOptions) -> Result<EntropyReport> {
    let name = args.system.clone().unwrap_or_default();
    if let Some(a) = name.strip_prefix("rosette:") {
        let r = rosette::build_rosette(parse_alpha(a)?)?;
        return symbolic_report(&name, &r.library, opts);
    }
    if name == "figure8" {
        let f = figure8::build_figure8()?;
        return symbolic_report(&name, &f.library, opts);
    }
    if name == "bean" {
        let mut p = BeanEntropy { max_branches: opts.branch_max, ..Default::default() };
        if let Some(e) = &opts.eps {
            p.eps = e.clone();
        }
        if let Some(ns) = &opts.ns {
            p.ns = ns.clone();
        }
        if let Some(w) = opts.w_prime {
            p.w_prime = w;
        }
        if let Some(dt) = opts.dt {
            p.dt = dt;
        }
        if let Some(g) = opts.slide_exit_grid {
            p.exit_grid = g;
        }
        return bean::bean_entropy(&p);
    }
    let sys = load_system(args)?;
    let ns = opts.ns.clone().unwrap_or_else(|| (1..=6).collect());
    let w_prime = opts.w_prime.unwrap_or(12);
    let window = (w_prime + *ns.iter().max().unwrap() as i64) as f64;
    let dt = opts.dt.unwrap_or(0.01);
    let eps = opts.eps.clone().unwrap_or_else(|| eps_schedule(0.4, 5));
    let g = match name.as_str() {
        "node0" => controls::node0_family(20, window, dt)?,
        "smooth-rot" => controls::smooth_rot_family(20, window, dt)?,
        _ => {
            let policy = BranchPolicy {
                max_branches: opts.branch_max,
                slide_exit_grid: opts.slide_exit_grid.unwrap_or(0.1),
                horizon: window,
                dedupe: true,
                branch_window: Some((0.0, 1.0)),
            };
            let seeds = sigma_points(&sys, 16);
            return estimate_entropy(&sys, &seeds, &policy, dt, &eps, &ns, w_prime, 0.05, sys.domain.diameter());
        }
    };
    let cfg = TrajectoryMetricConfig::new(window, 0.05, sys.domain.diameter())?;
    let set = SampledSet::new(g.trajectories, &cfg)?;
    estimate_from_set(&sys.name, &set, &eps, &ns, w_prime)
}

fn known_log(h: f64) -> String {
    for k in 2..=8u32 {
        if (h - (k as f64).ln()).abs() < 0.02 {
            return format!(" (log {k})");
        }
    }
    String::new()
}

fn cmd_entropy(
    args: &SystemArgs,
    opts: &EntropyOptions,
    path: Option<&Path>,
    format: Format,
    allow_partial: bool,
    out: &mut dyn Write,
) -> std::result::Result<i32, Exit> {
    if args.system.is_some() == args.system_file.is_some() {
        return Err(bad("give exactly one of --system and --system-file"));
    }
    if let Some(n) = &args.system {
        builtin(n)?;
    }
    let r = entropy_report(args, opts)?;
    if r.partial && !allow_partial {
        return Err(FpeError::BranchBudgetExceeded { budget: opts.branch_max }.into());
    }
    if let Some(p) = path {
        let (json, csv) = match format {
            Format::Json => (p.to_path_buf(), p.with_extension("csv")),
            Format::Csv => (p.with_extension("json"), p.to_path_buf()),
        };
        io::write_report_json(create(&json)?, &r)?;
        io::write_report_csv(create(&csv)?, &r)?;
    }
    let slopes: Vec<String> = r.slopes.iter().map(|s| format!("{:.4}", s.sep.slope)).collect();
    say(out, format!("h ≈ {:.4}{}", r.h_estimate, known_log(r.h_estimate)))?;
    say(
        out,
        format!(
            "system={} h_estimate={:.6} verdict={} sep_slopes={} slopes_increasing={} set_size={} partial={}",
            r.system,
            r.h_estimate,
            r.verdict,
            slopes.join(","),
            r.slopes_increasing,
            r.set_size,
            r.partial
        ),
    )?;
    Ok(0)
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    args: &SystemArgs,
    j: Chart,
    samples: usize,
    horizon: f64,
    dt: f64,
    exit_grid: f64,
    path: Option<&Path>,
    out: &mut dyn Write,
) -> std::result::Result<i32, Exit> {
    let sys = load_system(args)?;
    let rep = bean::verify_sufficient_conditions(&sys, j, samples, horizon, dt, exit_grid);
    if let Some(p) = path {
        io::write_json(p, &rep)?;
    }
    if !rep.precondition_ok {
        return Err(bad(rep.precondition_error.unwrap_or_default()));
    }
    let fmt = |v: Option<f64>| v.map_or("none".to_string(), |m| format!("{m:.6}"));
    say(
        out,
        format!(
            "system={} J={}:{} samples={} all_found={} M={} c={}",
            sys.name,
            j.a,
            j.b,
            samples,
            rep.all_found,
            fmt(rep.m),
            rep.c.map_or("none".into(), |c| c.to_string())
        ),
    )?;
    if rep.all_found {
        Ok(0)
    } else {
        let failed: Vec<String> = rep.witnesses.iter().filter(|w| !w.found).map(|w| format!("{:.6}", w.x)).collect();
        say(out, format!("failed_x={}", failed.join(",")))?;
        Ok(5)
    }
}

/// Writes trajectories in the requested format; used by examples.
pub fn write_trajectories(path: &Path, trajs: &[SampledTrajectory], format: Format) -> Result<()> {
    let w = create(path)?;
    match format {
        Format::Json => io::write_trajectories_json(w, trajs),
        Format::Csv => io::write_trajectories_csv(w, trajs),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_args(args: &[&str]) -> (i32, String) {
        let mut buf = Vec::new();
        let code = main_with_args(std::iter::once("fpe").chain(args.iter().copied()), &mut buf);
        (code, String::from_utf8(buf).unwrap())
    }

    #[test]
    fn parsers() {
        assert_eq!(parse_pair("-0.6:-0.1").unwrap(), (-0.6, -0.1));
        assert!(parse_pair("0.2:0.1").is_err());
        assert_eq!(parse_ns("2..4").unwrap(), vec![2, 3, 4]);
        assert_eq!(parse_ns("1,3").unwrap(), vec![1, 3]);
        assert!(parse_ns("0..2").is_err());
        assert_eq!(parse_eps("0.4").unwrap().len(), 5);
        assert!(parse_eps("0.4,-1").is_err());
    }

    #[test]
    fn classify_bean_sigma() {
        let (code, out) = run_args(&["classify", "--system", "bean", "--sigma-samples", "100"]);
        assert_eq!(code, 0);
        for line in out.lines().skip(1).filter(|l| l.contains(',')) {
            let cols: Vec<&str> = line.split(',').collect();
            let x: f64 = cols[0].parse().unwrap();
            let escaping = x > -std::f64::consts::FRAC_1_SQRT_2 && x < 0.0;
            assert_eq!(cols[2] == "Escaping", escaping, "{line}");
        }
        let (code, out) = run_args(&["classify", "--system", "bean", "--sigma-samples", "0"]);
        assert_eq!((code, out.lines().next()), (0, Some("x,y,class")));
    }

    #[test]
    fn unknown_system_exits_2() {
        assert_eq!(run_args(&["classify", "--system", "nope"]).0, 2);
        assert_eq!(run_args(&["entropy", "--system", "rosette:1"]).0, 2);
    }

    #[test]
    fn list_systems_names_builtins() {
        let (code, out) = run_args(&["list-systems"]);
        assert_eq!(code, 0);
        assert!(out.contains("bean") && out.contains("rosette:<alpha>"));
    }

    #[test]
    fn simulate_rosette_counts_itineraries() {
        let (code, out) = run_args(&["simulate", "--system", "rosette:3", "--seed", "origin", "--W", "6"]);
        assert_eq!(code, 0);
        assert!(out.contains("trajectories=729"), "{out}");
        let (code, out) = run_args(&["simulate", "--system", "rosette:3", "--W", "0"]);
        assert!(code == 0 && out.contains("trajectories=1"), "{out}");
    }

    #[test]
    fn simulate_budget_exit_code() {
        let args = ["simulate", "--system", "rosette:3", "--W", "6", "--branch-max", "10"];
        assert_eq!(run_args(&args).0, 3);
        let mut with = args.to_vec();
        with.push("--allow-partial");
        let (code, out) = run_args(&with);
        assert!(code == 0 && out.contains("budget_exceeded=true"), "{out}");
    }

    #[test]
    fn verify_gate_and_short_horizon() {
        assert_eq!(run_args(&["verify", "--system", "bean", "--J", "-0.3:0.3", "--samples", "4"]).0, 2);
        let (code, out) = run_args(&["verify", "--system", "bean", "--J", "-0.6:-0.1", "--samples", "4", "--horizon", "0.1"]);
        assert_eq!(code, 5);
        assert!(out.contains("failed_x="));
    }

    #[test]
    fn entropy_needs_three_n_values() {
        let (code, _) = run_args(&["entropy", "--system", "smooth-rot", "--n", "1,2"]);
        assert_eq!(code, 4);
    }
}
