//! `hubbard-anneal`: Bethe tables, annealing runs and sweeps, scaling fits,
//! circuit export and the oracle suite.

mod output;
mod ranges;
mod sweep;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hubbard_anneal::analysis::{self, OnsetConfig};
use hubbard_anneal::anneal::{
    self, AnnealSchedule, E0Source, GroupingMode, RunOptions, ScheduleKind, DEFAULT_TAU,
};
use hubbard_anneal::bethe;
use hubbard_anneal::hamiltonian::HubbardParams;
use hubbard_anneal::oracles;
use hubbard_anneal::records::SweepRecord;

use output::Header;

pub const VERSION: &str = env!("HUBBARD_ANNEAL_VERSION");

/// Bad command-line input detected by the driver itself.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// Oracle cases failed; reported, exit status 1.
#[derive(Debug)]
struct OracleFailure(usize);

impl fmt::Display for OracleFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} oracle case(s) failed", self.0)
    }
}

impl std::error::Error for OracleFailure {}

#[derive(Parser, Debug)]
#[command(name = "hubbard-anneal", version = VERSION, about = "Gate-based annealing of the 1D Hubbard chain")]
struct Cli {
    /// Directory for output files written without an explicit path.
    #[arg(long, global = true, env = "HUBBARD_ANNEAL_OUT", default_value = ".")]
    out_dir: PathBuf,
    /// Seed recorded with every run record.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for sweeps.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(tag = "command", rename_all = "lowercase")]
enum Command {
    /// Bethe-ansatz ground energies as CSV.
    Bethe(BetheArgs),
    /// One annealing run.
    Anneal(AnnealArgs),
    /// Resumable grid of annealing runs appended to a record file.
    Sweep(SweepArgs),
    /// Onset detection and power-law fits over a record file.
    Fit(FitArgs),
    /// Write the annealing circuit as OpenQASM 2.0 or JSON.
    Export(ExportArgs),
    /// Run the oracle cross-check suite.
    Oracles(OracleArgs),
    /// Wall time of the Bethe solver against chain length.
    Timing(TimingArgs),
}

#[derive(Args, Debug, Serialize, Clone)]
struct ModelArgs {
    /// Interaction strength U.
    #[arg(long = "U")]
    u: f64,
    /// Hopping amplitude.
    #[arg(long = "t", default_value_t = 1.0)]
    t: f64,
    /// Spin-up particles (default: half filling).
    #[arg(long)]
    n_up: Option<usize>,
    /// Spin-down particles (default: half filling).
    #[arg(long)]
    n_down: Option<usize>,
}

impl ModelArgs {
    fn params(&self, l: usize) -> Result<HubbardParams> {
        params_for(l, self.t, self.u, self.n_up, self.n_down)
    }
}

fn params_for(
    l: usize,
    t: f64,
    u: f64,
    n_up: Option<usize>,
    n_down: Option<usize>,
) -> Result<HubbardParams> {
    match (n_up, n_down) {
        (None, None) => {
            if l % 2 == 1 {
                return Err(UsageError(format!(
                    "half filling needs an even L (N_down = L/2), got L = {l}"
                ))
                .into());
            }
            Ok(HubbardParams::half_filled(l, t, u)?)
        }
        (Some(a), Some(b)) => Ok(HubbardParams::new(l, t, u, a, b)?),
        _ => Err(UsageError("give both --n-up and --n-down, or neither".into()).into()),
    }
}

#[derive(Args, Debug, Serialize, Clone)]
struct ScheduleArgs {
    /// Product-formula step.
    #[arg(long, default_value_t = DEFAULT_TAU)]
    tau: f64,
    #[arg(long, default_value = "linear")]
    schedule: ScheduleKind,
    #[arg(long, default_value = "xx-yy-zz")]
    grouping: GroupingMode,
    /// Keep every hopping half-step separate instead of fusing neighbours.
    #[arg(long)]
    no_merge: bool,
    /// Reference energy: auto, bethe, ed or a number.
    #[arg(long, default_value = "auto", value_parser = parse_e0)]
    e0: E0Arg,
}

#[derive(Clone, Copy, Debug, Serialize)]
#[serde(transparent)]
struct E0Arg(E0Source);

fn parse_e0(s: &str) -> std::result::Result<E0Arg, String> {
    Ok(E0Arg(match s {
        "auto" => E0Source::Auto,
        "bethe" => E0Source::Bethe,
        "ed" => E0Source::Ed,
        v => E0Source::Value(
            v.parse()
                .map_err(|_| format!("expected auto, bethe, ed or a number, got {v:?}"))?,
        ),
    }))
}

#[derive(Args, Debug, Serialize)]
struct BetheArgs {
    /// Chain length, list (2,4,6) or inclusive range (2..20, 2..20..2).
    #[arg(long = "L")]
    l: String,
    #[arg(long = "U")]
    u: f64,
    #[arg(long = "t", default_value_t = 1.0)]
    t: f64,
    /// `half`, or `N:N_down` with N the total particle number.
    #[arg(long, default_value = "half")]
    filling: String,
    /// Write here instead of standard output.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct AnnealArgs {
    #[arg(long = "L")]
    l: usize,
    #[command(flatten)]
    model: ModelArgs,
    /// Total annealing time.
    #[arg(long = "TA")]
    t_a: f64,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// csv or json.
    #[arg(long, default_value = "csv")]
    format: String,
}

#[derive(Args, Debug, Serialize)]
struct SweepArgs {
    /// Sizes: list or range.
    #[arg(long = "L")]
    l: String,
    /// Interaction strengths, comma separated.
    #[arg(long = "U")]
    u: String,
    #[arg(long = "t", default_value_t = 1.0)]
    t: f64,
    #[arg(long)]
    n_up: Option<usize>,
    #[arg(long)]
    n_down: Option<usize>,
    /// `lo:hi:log10` or a list of times.
    #[arg(long = "TA")]
    t_a: String,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// Record file (default: <out-dir>/sweep.csv).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct FitArgs {
    /// Record file, CSV or JSON.
    records: PathBuf,
    /// Expected decay power (default: 2 for linear, 4 for sinusoidal).
    #[arg(long)]
    p: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    tolerance: f64,
    #[arg(long, default_value_t = 3)]
    min_points: usize,
    /// Print plain-text tables instead of JSON.
    #[arg(long)]
    table: bool,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct ExportArgs {
    #[arg(long = "L")]
    l: usize,
    #[command(flatten)]
    model: ModelArgs,
    /// Total annealing time; `--steps` may be given instead.
    #[arg(long = "TA", conflicts_with = "steps")]
    t_a: Option<f64>,
    /// Number of product-formula steps.
    #[arg(long)]
    steps: Option<usize>,
    #[command(flatten)]
    schedule: ScheduleArgs,
    /// qasm or json.
    #[arg(long, default_value = "qasm")]
    format: String,
    /// Output file (default: <out-dir>/anneal_L<L>_U<U>_<steps>steps.<ext>).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args, Debug, Serialize)]
struct OracleArgs {
    /// Comma-separated case ids.
    #[arg(long)]
    only: Option<String>,
    /// Also write a JUnit XML report here.
    #[arg(long)]
    junit: Option<PathBuf>,
    /// Print the report as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug, Serialize)]
struct TimingArgs {
    #[arg(long = "L", default_value = "20..200..20")]
    l: String,
    #[arg(long = "U", default_value_t = 4.0)]
    u: f64,
    #[arg(long = "t", default_value_t = 1.0)]
    t: f64,
    #[arg(long, default_value_t = 3)]
    repeats: usize,
}

/// Everything a run depends on, embedded in each output file.
#[derive(Serialize)]
struct RunConfig<'a> {
    #[serde(flatten)]
    command: &'a Command,
    out_dir: &'a std::path::Path,
    seed: u64,
    jobs: usize,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

/// 2 argument error, 3 capacity error, 4 solver non-convergence, 1 otherwise.
fn exit_code(e: &anyhow::Error) -> u8 {
    use hubbard_anneal::Error as E;
    for cause in e.chain() {
        if cause.is::<UsageError>() {
            return 2;
        }
        if let Some(f) = cause.downcast_ref::<sweep::SweepFailed>() {
            return f.code;
        }
        if let Some(err) = cause.downcast_ref::<E>() {
            return core_exit_code(err);
        }
    }
    1
}

pub fn core_exit_code(err: &hubbard_anneal::Error) -> u8 {
    use hubbard_anneal::Error as E;
    match err {
        E::InvalidArgument(_) | E::Qasm(_) => 2,
        E::Capacity { .. } => 3,
        E::NonConvergence { .. } | E::Solver(_) => 4,
    }
}

fn run(cli: &Cli) -> Result<()> {
    if cli.jobs == 0 {
        return Err(UsageError("--jobs must be at least 1".into()).into());
    }
    let config = RunConfig {
        command: &cli.command,
        out_dir: &cli.out_dir,
        seed: cli.seed,
        jobs: cli.jobs,
    };
    let header = Header::new(serde_json::to_string(&config)?);
    match &cli.command {
        Command::Bethe(a) => cmd_bethe(a, &header),
        Command::Anneal(a) => cmd_anneal(a, cli.seed, &header),
        Command::Sweep(a) => sweep::cmd_sweep(a, cli, &header),
        Command::Fit(a) => cmd_fit(a, &header),
        Command::Export(a) => cmd_export(a, cli, &header),
        Command::Oracles(a) => cmd_oracles(a),
        Command::Timing(a) => cmd_timing(a, &header),
    }
}

#[derive(Serialize)]
struct BetheRow {
    #[serde(rename = "L")]
    l: usize,
    #[serde(rename = "U")]
    u: f64,
    #[serde(rename = "t_H")]
    t: f64,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "N_down")]
    n_down: usize,
    #[serde(rename = "E0")]
    e0: f64,
    residual: f64,
    solve_seconds: f64,
}

fn cmd_bethe(a: &BetheArgs, header: &Header) -> Result<()> {
    let filling = parse_filling(&a.filling)?;
    let sizes = ranges::parse_sizes(&a.l, if filling.is_none() { 2 } else { 1 })?;
    let params: Vec<HubbardParams> = sizes
        .iter()
        .map(|&l| match filling {
            None => params_for(l, a.t, a.u, None, None),
            Some((n, n_down)) => {
                if n_down > n {
                    return Err(UsageError(format!("N_down = {n_down} exceeds N = {n}")).into());
                }
                params_for(l, a.t, a.u, Some(n - n_down), Some(n_down))
            }
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for p in &params {
        let sol = bethe::solve_with_report(p)
            .with_context(|| format!("Bethe solve at L = {}", p.l))?;
        rows.push(BetheRow {
            l: sol.l,
            u: sol.u,
            t: p.t,
            n: sol.n,
            n_down: sol.n_down,
            e0: sol.e0,
            residual: sol.residual_norm,
            solve_seconds: sol.solve_time,
        });
    }
    output::write_csv(a.output.as_deref(), header, &rows)
}

fn parse_filling(text: &str) -> Result<Option<(usize, usize)>> {
    if text == "half" {
        return Ok(None);
    }
    let bad = || UsageError(format!("filling must be `half` or `N:N_down`, got {text:?}"));
    let (n, d) = text.split_once(':').ok_or_else(bad)?;
    Ok(Some((
        n.trim().parse().map_err(|_| bad())?,
        d.trim().parse().map_err(|_| bad())?,
    )))
}

fn schedule_for(s: &ScheduleArgs, t_a: f64) -> Result<AnnealSchedule> {
    Ok(AnnealSchedule::new(s.schedule, t_a, s.tau)?)
}

fn run_options(s: &ScheduleArgs, seed: u64) -> RunOptions {
    RunOptions {
        merge: !s.no_merge,
        e0: s.e0.0,
        seed,
    }
}

fn cmd_anneal(a: &AnnealArgs, seed: u64, header: &Header) -> Result<()> {
    let params = a.model.params(a.l)?;
    let sched = schedule_for(&a.schedule, a.t_a)?;
    if !matches!(a.format.as_str(), "csv" | "json") {
        return Err(UsageError(format!("unknown format {:?}", a.format)).into());
    }
    let out = anneal::run_anneal(&params, &sched, a.schedule.grouping, &run_options(&a.schedule, seed))?;
    if out.norm_deviation > 1e-10 {
        eprintln!("warning: final norm deviates by {:e}", out.norm_deviation);
    }
    if a.format == "json" {
        println!("{}", serde_json::to_string_pretty(&out.record)?);
        Ok(())
    } else {
        output::write_csv(None, header, &[out.record])
    }
}

#[derive(Serialize)]
struct FitGroup {
    #[serde(rename = "U")]
    u: f64,
    #[serde(rename = "t_H")]
    t: f64,
    schedule: ScheduleKind,
    grouping: GroupingMode,
    report: analysis::ScalingReport,
}

#[derive(Serialize)]
struct FitOutput<'a> {
    version: &'a str,
    config: serde_json::Value,
    groups: Vec<FitGroup>,
}

fn cmd_fit(a: &FitArgs, header: &Header) -> Result<()> {
    let records = output::read_records(&a.records)?;
    if records.is_empty() {
        return Err(UsageError(format!("no records in {}", a.records.display())).into());
    }
    let mut groups: std::collections::BTreeMap<(String, String, &str, &str), Vec<SweepRecord>> =
        Default::default();
    for r in records {
        let key = (
            format!("{:.11e}", r.u),
            format!("{:.11e}", r.t),
            r.schedule.as_str(),
            r.grouping.as_str(),
        );
        groups.entry(key).or_default().push(r);
    }
    let mut out = Vec::new();
    for recs in groups.values() {
        let first = &recs[0];
        let power = a.p.unwrap_or(match first.schedule {
            ScheduleKind::Linear => 2.0,
            ScheduleKind::Sinusoidal => 4.0,
        });
        let cfg = OnsetConfig {
            power,
            tolerance: a.tolerance,
            min_points: a.min_points,
        };
        out.push(FitGroup {
            u: first.u,
            t: first.t,
            schedule: first.schedule,
            grouping: first.grouping,
            report: analysis::scaling_report(recs, &cfg)?,
        });
    }
    let text = if a.table {
        let mut s = header.comment_lines("# ");
        for g in &out {
            s += &format!(
                "U = {}  t_H = {}  schedule = {}  grouping = {}\n",
                g.u,
                g.t,
                g.schedule.as_str(),
                g.grouping.as_str()
            );
            s += &g.report.to_table();
        }
        s
    } else {
        let doc = FitOutput {
            version: VERSION,
            config: serde_json::from_str(&header.config)?,
            groups: out,
        };
        serde_json::to_string_pretty(&doc)? + "\n"
    };
    output::write_text(a.output.as_deref(), &text)
}

fn cmd_export(a: &ExportArgs, cli: &Cli, header: &Header) -> Result<()> {
    let params = a.model.params(a.l)?;
    let t_a = match (a.t_a, a.steps) {
        (Some(t), None) => t,
        (None, Some(n)) if n > 0 => n as f64 * a.schedule.tau,
        (None, None) => a.schedule.tau,
        _ => return Err(UsageError("--steps must be positive".into()).into()),
    };
    let sched = schedule_for(&a.schedule, t_a)?;
    let circuit =
        anneal::build_anneal_circuit(&params, &sched, a.schedule.grouping, !a.schedule.no_merge)?;
    let step = anneal::step_gate_formula(params.l);
    let counts = format!(
        "gates: prep {} boundary {} steps {} ({} per step)",
        circuit.prep_counts().total(),
        circuit.boundary_counts().total(),
        circuit.trotter_counts().total(),
        step.total()
    );
    let (text, ext) = match a.format.as_str() {
        "qasm" => {
            let qasm = circuit.to_qasm();
            let (head, rest) = qasm
                .split_once("include \"qelib1.inc\";\n")
                .context("unexpected QASM layout")?;
            let text = format!(
                "{head}include \"qelib1.inc\";\n{}// {counts}\n{rest}",
                header.comment_lines("// ")
            );
            (text, "qasm")
        }
        "json" => {
            let doc = serde_json::json!({
                "version": VERSION,
                "config": serde_json::from_str::<serde_json::Value>(&header.config)?,
                "circuit": serde_json::from_str::<serde_json::Value>(&circuit.to_json())?,
            });
            (serde_json::to_string_pretty(&doc)? + "\n", "json")
        }
        f => return Err(UsageError(format!("unknown format {f:?}")).into()),
    };
    let path = a.output.clone().unwrap_or_else(|| {
        cli.out_dir.join(format!(
            "anneal_L{}_U{}_{}_{}steps.{ext}",
            params.l,
            params.u,
            sched.kind().as_str(),
            sched.n_steps()
        ))
    });
    output::write_text(Some(&path), &text)?;
    eprintln!("wrote {} ({counts})", path.display());
    Ok(())
}

fn cmd_oracles(a: &OracleArgs) -> Result<()> {
    let only: Option<Vec<String>> = a
        .only
        .as_ref()
        .map(|s| s.split(',').map(|x| x.trim().to_string()).collect());
    if let Some(ids) = &only {
        let known = oracles::case_ids();
        if let Some(bad) = ids.iter().find(|i| !known.contains(&i.as_str())) {
            return Err(UsageError(format!("unknown oracle case {bad:?}")).into());
        }
    }
    let report = oracles::run_selected(|id| only.as_ref().map_or(true, |o| o.iter().any(|x| x == id)));
    if a.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        print!("{}", report.to_text());
    }
    if let Some(path) = &a.junit {
        output::write_text(Some(path), &report.to_junit_xml())?;
    }
    let failed = report.failures().count();
    if failed > 0 {
        return Err(OracleFailure(failed).into());
    }
    Ok(())
}

fn cmd_timing(a: &TimingArgs, header: &Header) -> Result<()> {
    let sizes = ranges::parse_sizes(&a.l, 2)?;
    if let Some(l) = sizes.iter().find(|l| *l % 2 == 1) {
        return Err(UsageError(format!("timing runs at half filling; L = {l} is odd")).into());
    }
    let times = bethe::timing_study(&sizes, a.t, a.u, a.repeats)?;
    #[derive(Serialize)]
    struct Row {
        #[serde(rename = "L")]
        l: usize,
        seconds: f64,
    }
    let rows: Vec<Row> = times.iter().map(|&(l, seconds)| Row { l, seconds }).collect();
    output::write_csv(None, header, &rows)?;
    if times.len() >= 3 {
        let pts: Vec<_> = times.iter().map(|&(l, s)| (l as f64, s.max(1e-9))).collect();
        let fit = analysis::fit_power_law(&pts)?;
        println!("# exponent {:.3} (r^2 = {:.3})", fit.exponent, fit.r_squared);
    }
    Ok(())
}
