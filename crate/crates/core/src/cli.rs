//! Command-line front end: plan generation, route queries, simulation runs
//! and paired comparisons.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};

use crate::constellation::{
    generate_contact_plan, positions_csv, IslConstraints, WalkerParams,
};
use crate::contactplan::{parse_contact_plan, reference_plan, ContactPlan};
use crate::forwarding::{trace_to_csv, Policy};
use crate::routesearch::{routes_to_csv, yen_plus, Timing, DEFAULT_K};
use crate::simcore::{bundles_to_csv, metrics_to_csv, run_with_options, OwltMode, RunSummary, SimOptions};
use crate::traffic::{generate_scenario, read_task_file, write_task_file, ScenarioSpec};
use crate::tsrcg::TsrcgGraph;

pub const OUT_ENV: &str = "CGRLAB_OUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] crate::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Input(String),
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "cgrlab", version, about = "Contact graph routing experiments")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a Walker-delta contact plan.
    GenPlan(GenPlanArgs),
    /// Print the K best routes between two nodes as CSV.
    Route(RouteArgs),
    /// Run seeded simulations under one policy.
    Simulate(SimulateArgs),
    /// Per-seed differences between two simulate summaries.
    Compare(CompareArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Walker {
    pub sats_per_plane: u32,
    pub planes: u32,
}

fn parse_walker(s: &str) -> Result<Walker, String> {
    let (a, b) = s
        .split_once(['x', 'X', '*'])
        .ok_or_else(|| format!("expected SATSxPLANES, got `{s}`"))?;
    let n = |v: &str| v.trim().parse::<u32>().map_err(|_| format!("bad count `{v}`"));
    Ok(Walker {
        sats_per_plane: n(a)?,
        planes: n(b)?,
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Seeds(pub Vec<u64>);

fn parse_seed_arg(s: &str) -> Result<Seeds, String> {
    parse_seeds(s).map(Seeds)
}

/// `1..20`, `3`, `1,4,7` or a mix.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let n = |v: &str| v.trim().parse::<u64>().map_err(|_| format!("bad seed `{v}`"));
        match part.split_once("..") {
            Some((a, b)) => {
                let b = b.strip_prefix('=').unwrap_or(b);
                let (a, b) = (n(a)?, n(b)?);
                if a > b {
                    return Err(format!("empty seed range `{part}`"));
                }
                out.extend(a..=b);
            }
            None => out.push(n(part)?),
        }
    }
    if out.is_empty() {
        return Err("no seeds given".into());
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct GenPlanArgs {
    /// Satellites per plane and plane count, e.g. 12x10.
    #[arg(long, value_parser = parse_walker)]
    pub walker: Walker,
    #[arg(long)]
    pub phase: u32,
    /// Altitude in km.
    #[arg(long)]
    pub alt: f64,
    /// Inclination in degrees.
    #[arg(long)]
    pub inc: f64,
    #[arg(long, default_value_t = 6565)]
    pub horizon: u64,
    /// Interorbit range limit in km; 0 keeps only in-plane links.
    #[arg(long, default_value_t = 4909.0)]
    pub max_interorbit: f64,
    #[arg(long, default_value_t = 4)]
    pub terminals: u32,
    /// Sampling step in seconds.
    #[arg(long, default_value_t = 1)]
    pub step: u64,
    /// Link rate in Mb/s.
    #[arg(long, default_value_t = 1.0)]
    pub rate: f64,
    /// Plan file; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write `t,sat_id,x,y,z` samples here.
    #[arg(long)]
    pub positions: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("plan_source").required(true).args(["plan", "reference"])))]
pub struct RouteArgs {
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Use the built-in six-node example plan.
    #[arg(long)]
    pub reference: bool,
    #[arg(long)]
    pub from: String,
    #[arg(long)]
    pub to: String,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    #[arg(long, default_value_t = 0)]
    pub depart: u64,
    /// Add the OWLT safety margin to every hop.
    #[arg(long)]
    pub margin: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum PolicyArg {
    Standard,
    Rmdg,
}

impl From<PolicyArg> for Policy {
    fn from(p: PolicyArg) -> Policy {
        match p {
            PolicyArg::Standard => Policy::StandardCgr,
            PolicyArg::Rmdg => Policy::RmdgCgr,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OwltArg {
    /// 1 s on every hop.
    Uniform,
    /// The plan's OWLT values.
    File,
}

#[derive(Debug, Args)]
#[command(group(ArgGroup::new("plan_source").required(true).args(["plan", "nels"])))]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub policy: PolicyArg,
    #[arg(long)]
    pub plan: Option<PathBuf>,
    /// Generate the 12x10/1 plan at 1200 km, 55°.
    #[arg(long)]
    pub nels: bool,
    /// Task file; replaces the generated scenario.
    #[arg(long, conflicts_with_all = ["no_critical", "bundles", "duration", "split_by_volume"])]
    pub tasks: Option<PathBuf>,
    #[arg(long, default_value = "1", value_parser = parse_seed_arg)]
    pub seed: Seeds,
    #[arg(long, default_value_t = DEFAULT_K)]
    pub k: usize,
    /// Source node of generated traffic; unused with a task file.
    #[arg(long, default_value = "1")]
    pub source: String,
    /// Leave out the critical streaming class.
    #[arg(long)]
    pub no_critical: bool,
    #[arg(long, default_value_t = 40)]
    pub bundles: usize,
    /// Split the classes 25/75 by megabits rather than by bundle count.
    #[arg(long)]
    pub split_by_volume: bool,
    /// Generation window in seconds.
    #[arg(long, default_value_t = 60)]
    pub duration: u64,
    #[arg(long, value_enum, default_value_t = OwltArg::Uniform)]
    pub owlt: OwltArg,
    /// Write the per-dispatch trace as well.
    #[arg(long)]
    pub trace: bool,
    /// Output directory; `CGRLAB_OUT` takes precedence.
    #[arg(long, default_value = "out")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Summary CSV of the reference runs.
    #[arg(long)]
    pub baseline: PathBuf,
    /// Summary CSV of the runs compared against it.
    #[arg(long)]
    pub candidate: PathBuf,
    /// Report file; standard output only when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn read(path: &Path) -> CliResult<String> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write(path: &Path, text: &str) -> CliResult<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn load_plan(path: &Path) -> CliResult<ContactPlan> {
    Ok(parse_contact_plan(&read(path)?)?)
}

pub fn nels_plan(horizon: u64) -> crate::Result<ContactPlan> {
    generate_contact_plan(&WalkerParams::nels(), &IslConstraints::nels(), horizon, 1)
}

/// Runs a command, writing its standard output to `stdout` and warnings to
/// `stderr`.
pub fn run(cli: Cli, stdout: &mut String, stderr: &mut String) -> CliResult<()> {
    match cli.command {
        Command::GenPlan(a) => gen_plan(a, stdout),
        Command::Route(a) => route(a, stdout, stderr),
        Command::Simulate(a) => simulate(a, stdout, stderr),
        Command::Compare(a) => compare(a, stdout),
    }
}

fn gen_plan(a: GenPlanArgs, stdout: &mut String) -> CliResult<()> {
    let params = WalkerParams {
        sats_per_plane: a.walker.sats_per_plane,
        planes: a.walker.planes,
        phase_factor: a.phase,
        altitude: a.alt,
        inclination: a.inc,
    };
    let constraints = IslConstraints {
        intraorbit_permanent: true,
        max_interorbit_km: a.max_interorbit,
        terminals_per_sat: a.terminals,
        rate: a.rate,
    };
    let plan = generate_contact_plan(&params, &constraints, a.horizon, a.step)?;
    let text = plan.to_text();
    match &a.out {
        Some(p) => write(p, &text)?,
        None => stdout.push_str(&text),
    }
    if let Some(p) = &a.positions {
        write(p, &positions_csv(&params, a.horizon, a.step))?;
    }
    Ok(())
}

fn route(a: RouteArgs, stdout: &mut String, stderr: &mut String) -> CliResult<()> {
    let plan = match &a.plan {
        Some(p) => load_plan(p)?,
        None => reference_plan(),
    };
    let node = |name: &str| {
        plan.node(name)
            .ok_or_else(|| crate::Error::UnknownNode(name.to_string()))
    };
    let (s, d) = (node(&a.from)?, node(&a.to)?);
    if s == d {
        return Err(crate::Error::SameEndpoints(a.from).into());
    }
    let graph = TsrcgGraph::build(&plan, s, d, a.depart);
    let timing = Timing {
        owlt_margin: a.margin,
    };
    let routes = yen_plus(&graph, a.k, a.depart as f64, timing)?;
    if routes.is_empty() {
        let _ = writeln!(stderr, "warning: no route from {} to {}", a.from, a.to);
    }
    stdout.push_str(&routes_to_csv(&routes));
    Ok(())
}

pub const SUMMARY_HEADER: &str = "seed,policy,bundles,delivered,delivery_rate,early_deliveries,mean_r_o,computing,peak_at_sending,peak_storage_bundles";

fn summary_line(seed: &str, policy: &str, n: usize, s: &RunSummary) -> String {
    format!(
        "{seed},{policy},{n},{},{:.6},{},{:.6},{},{},{}",
        s.delivered,
        s.delivery_rate,
        s.early_deliveries,
        s.mean_r_o,
        s.computing,
        s.peak_at_sending,
        s.peak_storage_bundles
    )
}

fn output_dir(flag: &Path) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => flag.to_path_buf(),
    }
}

fn simulate(a: SimulateArgs, stdout: &mut String, stderr: &mut String) -> CliResult<()> {
    let policy: Policy = a.policy.into();
    let dir = output_dir(&a.out);
    let plan = match &a.plan {
        Some(p) => load_plan(p)?,
        None => nels_plan(a.duration + 200)?,
    };
    let fixed_tasks = match &a.tasks {
        Some(p) => Some(read_task_file(&read(p)?, &plan)?),
        None => None,
    };
    let source = match fixed_tasks {
        Some(_) => None,
        None => Some(
            plan.node(&a.source)
                .ok_or_else(|| crate::Error::UnknownNode(a.source.clone()))?,
        ),
    };
    let opts = SimOptions {
        k: a.k,
        owlt: match a.owlt {
            OwltArg::Uniform => OwltMode::Uniform(1.0),
            OwltArg::File => OwltMode::File,
        },
        trace: a.trace,
        ..SimOptions::default()
    };
    let mut summary = format!("{SUMMARY_HEADER}\n");
    let mut totals: Vec<RunSummary> = Vec::new();
    let mut sizes = 0usize;
    for &seed in &a.seed.0 {
        let bundles = match &fixed_tasks {
            Some(b) => b.clone(),
            None => {
                let source = source.expect("resolved when no task file is given");
                let mut spec = ScenarioSpec::for_plan(seed, &plan, source);
                spec.with_critical = !a.no_critical;
                spec.total_bundles = Some(a.bundles);
                spec.duration = a.duration;
                spec.split_by_volume = a.split_by_volume;
                let b = generate_scenario(&spec)?;
                write(
                    &dir.join(format!("tasks_seed{seed}.csv")),
                    &write_task_file(&b, &plan),
                )?;
                b
            }
        };
        let m = run_with_options(&plan, &bundles, policy, seed, &opts)?;
        if let Err(e) = crate::simcore::check_all(&m, &plan, &bundles) {
            let _ = writeln!(stderr, "warning: seed {seed}: invariant check failed: {e}");
        }
        let tag = format!("{}_seed{seed}", policy.name());
        write(&dir.join(format!("metrics_{tag}.csv")), &metrics_to_csv(&m))?;
        write(&dir.join(format!("bundles_{tag}.csv")), &bundles_to_csv(&m))?;
        if a.trace {
            write(&dir.join(format!("trace_{tag}.csv")), &trace_to_csv(&m.trace, &plan))?;
        }
        let s = m.summary();
        summary.push_str(&summary_line(&seed.to_string(), policy.name(), bundles.len(), &s));
        summary.push('\n');
        sizes += bundles.len();
        totals.push(s);
    }
    let n = totals.len() as f64;
    let avg = |f: &dyn Fn(&RunSummary) -> f64| totals.iter().map(f).sum::<f64>() / n;
    let mean_line = format!(
        "mean,{},{:.3},{:.3},{:.6},{:.3},{:.6},{:.3},{:.3},{:.3}",
        policy.name(),
        sizes as f64 / n,
        avg(&|s| s.delivered as f64),
        avg(&|s| s.delivery_rate),
        avg(&|s| s.early_deliveries as f64),
        avg(&|s| s.mean_r_o),
        avg(&|s| s.computing as f64),
        avg(&|s| s.peak_at_sending),
        avg(&|s| s.peak_storage_bundles as f64)
    );
    summary.push_str(&mean_line);
    summary.push('\n');
    let path = dir.join(format!("summary_{}.csv", policy.name()));
    write(&path, &summary)?;
    let _ = writeln!(stdout, "{SUMMARY_HEADER}\n{mean_line}");
    let _ = writeln!(stdout, "wrote {}", path.display());
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
struct SummaryRow {
    seed: String,
    delivery_rate: f64,
    early: f64,
    mean_r_o: f64,
    computing: f64,
    peak_storage: f64,
}

fn parse_summary(path: &Path) -> CliResult<Vec<SummaryRow>> {
    let text = read(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 10 {
            return Err(CliError::Input(format!(
                "{}:{}: expected 10 fields",
                path.display(),
                i + 1
            )));
        }
        if f[0] == "mean" {
            continue;
        }
        let num = |j: usize| {
            f[j].parse::<f64>().map_err(|_| {
                CliError::Input(format!("{}:{}: bad number `{}`", path.display(), i + 1, f[j]))
            })
        };
        out.push(SummaryRow {
            seed: f[0].to_string(),
            delivery_rate: num(4)?,
            early: num(5)?,
            mean_r_o: num(6)?,
            computing: num(7)?,
            peak_storage: num(8)?,
        });
    }
    Ok(out)
}

pub const COMPARE_HEADER: &str =
    "seed,delivery_rate_delta,early_delivery_delta,mean_r_o_delta,computing_delta,peak_storage_delta";

fn compare(a: CompareArgs, stdout: &mut String) -> CliResult<()> {
    let base = parse_summary(&a.baseline)?;
    let cand = parse_summary(&a.candidate)?;
    let mut report = format!("{COMPARE_HEADER}\n");
    let mut deltas: Vec<[f64; 5]> = Vec::new();
    for b in &base {
        let Some(c) = cand.iter().find(|c| c.seed == b.seed) else {
            return Err(CliError::Input(format!("seed {} missing from candidate", b.seed)));
        };
        let d = [
            c.delivery_rate - b.delivery_rate,
            c.early - b.early,
            c.mean_r_o - b.mean_r_o,
            c.computing - b.computing,
            c.peak_storage - b.peak_storage,
        ];
        let _ = writeln!(
            report,
            "{},{:.6},{},{:.6},{},{}",
            b.seed, d[0], d[1], d[2], d[3], d[4]
        );
        deltas.push(d);
    }
    if deltas.is_empty() {
        return Err(CliError::Input("no paired seeds".into()));
    }
    let n = deltas.len() as f64;
    let mean: Vec<f64> = (0..5)
        .map(|j| deltas.iter().map(|d| d[j]).sum::<f64>() / n)
        .collect();
    let _ = writeln!(
        report,
        "mean,{:.6},{:.3},{:.6},{:.3},{:.3}",
        mean[0], mean[1], mean[2], mean[3], mean[4]
    );
    if let Some(p) = &a.out {
        write(p, &report)?;
    }
    stdout.push_str(&report);
    let wins = deltas.iter().filter(|d| d[0] >= 0.0).count();
    let _ = writeln!(
        stdout,
        "candidate delivery rate >= baseline in {wins}/{} seeds",
        deltas.len()
    );
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("1..3").unwrap(), vec![1, 2, 3]);
        assert_eq!(parse_seeds("1..=2,7").unwrap(), vec![1, 2, 7]);
        assert_eq!(parse_seeds("5").unwrap(), vec![5]);
        assert!(parse_seeds("3..1").is_err());
        assert!(parse_seeds("x").is_err());
    }

    #[test]
    fn walker_spec() {
        assert_eq!(
            parse_walker("12x10").unwrap(),
            Walker {
                sats_per_plane: 12,
                planes: 10
            }
        );
        assert!(parse_walker("12").is_err());
    }

    #[test]
    fn missing_altitude_is_usage_error() {
        let e = Cli::try_parse_from(["cgrlab", "gen-plan", "--walker", "12x10", "--phase", "1", "--inc", "55"])
            .unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn bad_policy_is_usage_error() {
        let e = Cli::try_parse_from(["cgrlab", "simulate", "--policy", "flood", "--nels"]).unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn reference_route_list() {
        let cli = Cli::try_parse_from(["cgrlab", "route", "--reference", "--from", "A", "--to", "F"]).unwrap();
        let (mut out, mut err) = (String::new(), String::new());
        run(cli, &mut out, &mut err).unwrap();
        let rows: Vec<&str> = out.lines().skip(1).collect();
        assert_eq!(rows.len(), 7);
        assert!(rows[0].starts_with("1,32,"));
        assert!(err.is_empty());
    }
}
