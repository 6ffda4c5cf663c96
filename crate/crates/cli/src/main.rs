use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use vacrel::analysis::{self, parse_event_set, SystemAnalysis};
use vacrel::config::RunConfig;
use vacrel::economics::{profit_curve, ProfitPoint};
use vacrel::mmap::assemble_mmap;
use vacrel::optimizer::{default_starts, optimize_vacation, Coxian2, NelderMeadOptions, OptimizationResult};
use vacrel::sim::{simulate, SimulationConfig};
use vacrel::{EventLabel, SystemSpec};

const EXIT_VALIDATION: u8 = 2;
const EXIT_PARSE: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "vacrel", version, about = "Reliability and profit analysis of a degrading unit served by a vacationing repairperson")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a configuration and report every violated invariant.
    Validate(Common),
    /// Stationary macro-state probabilities and availability.
    Stationary(Common),
    /// Transient phase probabilities on a time grid.
    Transient {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
    },
    /// Availability, reliability, ROCOF and mean event counts, plus the stationary row.
    Measures {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
        /// Extra event set to count, e.g. `PM+I_PM`.
        #[arg(long)]
        events: Option<String>,
    },
    /// Expected, total and average net reward on a time grid.
    ProfitCurve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        grid: Grid,
    },
    /// Maximize the long-run net reward over Coxian-2 vacation rates.
    Optimize {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 500)]
        max_evals: usize,
    },
    /// Estimate occupancies and event rates by discrete-event simulation.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 2e5)]
        horizon: f64,
        #[arg(long, default_value_t = 1e3)]
        warmup: f64,
        #[arg(long, default_value_t = 1)]
        replications: usize,
    },
    /// Write the nonzero entries of the event matrices.
    DumpMmap {
        #[command(flatten)]
        common: Common,
        /// Only this event label.
        #[arg(long)]
        event: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// JSON configuration file.
    config: PathBuf,
    /// Replace the vacation law by a Coxian-2 with these rates.
    #[arg(long, requires = "lambda2")]
    lambda1: Option<f64>,
    #[arg(long, requires = "lambda1")]
    lambda2: Option<f64>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Output file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Grid {
    /// Evenly spaced times `start:stop:step`.
    #[arg(long, conflicts_with = "times")]
    t_grid: Option<String>,
    /// Comma-separated times.
    #[arg(long)]
    times: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

enum Failure {
    Validation(String),
    Parse(String),
    Numerical(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Validation(_) => EXIT_VALIDATION,
            Failure::Parse(_) => EXIT_PARSE,
            Failure::Numerical(_) => EXIT_NUMERICAL,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Validation(m) | Failure::Parse(m) | Failure::Numerical(m) => m,
        }
    }
}

impl From<vacrel::Error> for Failure {
    fn from(e: vacrel::Error) -> Self {
        use vacrel::Error as E;
        match e {
            E::Config(_) => Failure::Parse(e.to_string()),
            E::InvalidSpec(_) | E::InvalidPhaseType(_) | E::InvalidEconomics(_) | E::InvalidSimulation(_) => {
                Failure::Validation(e.to_string())
            }
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_PARSE) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn run(command: Command) -> CliResult<()> {
    match command {
        Command::Validate(c) => validate(&c),
        Command::Stationary(c) => stationary(&c),
        Command::Transient { common, grid } => transient(&common, &grid),
        Command::Measures { common, grid, events } => measures(&common, &grid, events.as_deref()),
        Command::ProfitCurve { common, grid } => profit(&common, &grid),
        Command::Optimize { common, max_evals } => optimize(&common, max_evals),
        Command::Simulate { common, seed, horizon, warmup, replications } => {
            let cfg = SimulationConfig { horizon, replications, seed, warmup };
            run_simulation(&common, &cfg)
        }
        Command::DumpMmap { common, event } => dump_mmap(&common, event.as_deref()),
    }
}

fn load(c: &Common) -> CliResult<RunConfig> {
    let cfg = RunConfig::load(&c.config)?;
    Ok(match (c.lambda1, c.lambda2) {
        (Some(a), Some(b)) => cfg.with_coxian2(a, b),
        _ => cfg,
    })
}

fn checked(c: &Common) -> CliResult<(RunConfig, SystemSpec)> {
    let cfg = load(c)?;
    let report = cfg.validate();
    if !report.is_valid() {
        return Err(Failure::Validation(format!("invalid configuration:\n{report}")));
    }
    let spec = cfg.system_spec()?;
    Ok((cfg, spec))
}

fn emit(c: &Common, text: &str) -> CliResult<()> {
    match &c.out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Parse(format!("{}: {e}", path.display()))),
        None => io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Numerical(e.to_string())),
    }
}

fn emit_json(c: &Common, v: &Value) -> CliResult<()> {
    let mut s = serde_json::to_string_pretty(v).expect("json value serializes");
    s.push('\n');
    emit(c, &s)
}

fn parse_f64(s: &str, what: &str) -> CliResult<f64> {
    s.trim().parse::<f64>().map_err(|_| Failure::Parse(format!("{what}: `{s}` is not a number")))
}

fn times(grid: &Grid) -> CliResult<Vec<f64>> {
    if let Some(list) = &grid.times {
        return list.split(',').map(|s| parse_f64(s, "--times")).collect();
    }
    let spec = grid.t_grid.as_deref().unwrap_or("0:100:1");
    let parts: Vec<&str> = spec.split(':').collect();
    let [start, stop, step] = parts[..] else {
        return Err(Failure::Parse(format!("--t-grid expects start:stop:step, got `{spec}`")));
    };
    let (start, stop, step) = (parse_f64(start, "--t-grid")?, parse_f64(stop, "--t-grid")?, parse_f64(step, "--t-grid")?);
    if !(step > 0.0) || stop < start {
        return Err(Failure::Parse(format!("--t-grid `{spec}` needs step > 0 and stop >= start")));
    }
    let n = ((stop - start) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|k| start + k as f64 * step).collect())
}

fn validate(c: &Common) -> CliResult<()> {
    let cfg = load(c)?;
    let report = cfg.validate();
    let text = match c.format {
        Format::Json => format!("{}\n", serde_json::to_string_pretty(&report).expect("report serializes")),
        Format::Csv => report.to_string(),
    };
    emit(c, &text)?;
    if report.is_valid() {
        Ok(())
    } else {
        Err(Failure::Validation(format!("{} error(s)", report.errors().count())))
    }
}

fn stationary(c: &Common) -> CliResult<()> {
    let (_, spec) = checked(c)?;
    let a = SystemAnalysis::new(&spec)?;
    let masses = a.stationary.masses();
    let avail = a.stationary_availability();
    match c.format {
        Format::Csv => {
            let header: Vec<&str> = masses.iter().map(|(s, _)| s.label()).chain(["availability"]).collect();
            let row: Vec<String> = masses.iter().map(|(_, v)| v.to_string()).chain([avail.to_string()]).collect();
            emit(c, &format!("{}\n{}\n", header.join(","), row.join(",")))
        }
        Format::Json => {
            let m: serde_json::Map<String, Value> = masses.iter().map(|(s, v)| (s.label().to_string(), json!(v))).collect();
            emit_json(c, &json!({ "macro_states": m, "availability": avail, "pi": a.stationary.pi }))
        }
    }
}

fn transient(c: &Common, grid: &Grid) -> CliResult<()> {
    let (_, spec) = checked(c)?;
    let mmap = assemble_mmap(&spec)?;
    let theta = vacrel::initial_distribution(&spec)?;
    let states = analysis::transient_grid(&mmap, &theta, &times(grid)?)?;
    match c.format {
        Format::Csv => {
            let mut s = String::from("t");
            for i in 0..mmap.dim() {
                s.push_str(&format!(",p_{i}"));
            }
            s.push('\n');
            for st in &states {
                s.push_str(&st.t.to_string());
                for v in &st.p {
                    s.push_str(&format!(",{v}"));
                }
                s.push('\n');
            }
            emit(c, &s)
        }
        Format::Json => {
            let rows: Vec<Value> = states.iter().map(|st| json!({ "t": st.t, "p": st.p })).collect();
            emit_json(c, &Value::Array(rows))
        }
    }
}

fn measures(c: &Common, grid: &Grid, events: Option<&str>) -> CliResult<()> {
    let (_, spec) = checked(c)?;
    let extra: Option<Vec<EventLabel>> = events.map(parse_event_set).transpose()?;
    let a = SystemAnalysis::new(&spec)?;
    let ts = times(grid)?;
    let rows = a.measures_grid(&ts)?;
    let station = a.stationary_measures();
    let custom: Option<(Vec<f64>, f64)> = match &extra {
        Some(ev) => Some((
            ts.iter().map(|&t| analysis::mean_events(&a.mmap, &a.theta, ev, t)).collect::<Result<_, _>>()?,
            a.mean_events_rate(ev),
        )),
        None => None,
    };
    let custom_at = |k: Option<usize>| custom.as_ref().map(|(v, r)| k.map_or(*r, |k| v[k]));
    match c.format {
        Format::Csv => {
            let mut s = analysis::MeasureRow::csv_header();
            if custom.is_some() {
                s.push_str(",mn_custom");
            }
            s.push('\n');
            for (k, row) in rows.iter().enumerate().map(|(k, r)| (Some(k), r)).chain([(None, &station)]) {
                s.push_str(&row.csv_line());
                if let Some(v) = custom_at(k) {
                    s.push_str(&format!(",{v}"));
                }
                s.push('\n');
            }
            emit(c, &s)
        }
        Format::Json => {
            let mut out: Vec<Value> = Vec::new();
            for (k, row) in rows.iter().enumerate().map(|(k, r)| (Some(k), r)).chain([(None, &station)]) {
                let mut obj = json!({
                    "t": row.t,
                    "availability": row.availability,
                    "reliability": row.reliability,
                    "rocof_rf": row.rocof_rf,
                    "rocof_nrf": row.rocof_nrf,
                });
                for (name, v) in &row.mean_events {
                    obj[format!("mn_{name}")] = json!(v);
                }
                if let Some(v) = custom_at(k) {
                    obj["mn_custom"] = json!(v);
                }
                out.push(obj);
            }
            emit_json(c, &Value::Array(out))
        }
    }
}

fn profit(c: &Common, grid: &Grid) -> CliResult<()> {
    let (cfg, spec) = checked(c)?;
    let econ = cfg.economic_spec()?;
    let a = SystemAnalysis::new(&spec)?;
    let points = profit_curve(&a, &econ, &times(grid)?)?;
    match c.format {
        Format::Csv => {
            let mut s = format!("{}\n", ProfitPoint::CSV_HEADER);
            for p in &points {
                s.push_str(&p.csv_line());
                s.push('\n');
            }
            emit(c, &s)
        }
        Format::Json => {
            let rows: Vec<Value> =
                points.iter().map(|p| json!({ "t": p.t, "phi": p.phi, "psi": p.psi, "gamma": p.gamma })).collect();
            emit_json(c, &Value::Array(rows))
        }
    }
}

fn summary(res: &OptimizationResult) -> String {
    format!(
        "best lambda1={} lambda2={} gamma={} after {} evaluations ({})",
        res.best_params[0],
        res.best_params[1],
        res.best_value,
        res.evaluations,
        if res.converged { "converged" } else { "evaluation budget exhausted" }
    )
}

fn optimize(c: &Common, max_evals: usize) -> CliResult<()> {
    let (cfg, spec) = checked(c)?;
    let econ = cfg.economic_spec()?;
    let opts = NelderMeadOptions { max_evals, ..NelderMeadOptions::default() };
    let res = optimize_vacation(&spec, &econ, &Coxian2, &default_starts(), &opts)?;
    eprintln!("{}", summary(&res));
    match c.format {
        Format::Csv => emit(c, &res.trace_csv()),
        Format::Json => {
            let trace: Vec<Value> = res
                .trace
                .iter()
                .map(|e| json!({ "eval_index": e.eval_index, "start_index": e.start_index, "params": e.params, "gamma": e.value }))
                .collect();
            emit_json(
                c,
                &json!({
                    "best_params": res.best_params,
                    "best_value": res.best_value,
                    "evaluations": res.evaluations,
                    "converged": res.converged,
                    "trace": trace,
                }),
            )
        }
    }
}

fn run_simulation(c: &Common, sim: &SimulationConfig) -> CliResult<()> {
    let (_, spec) = checked(c)?;
    let est = simulate(&spec, sim)?;
    match c.format {
        Format::Csv => emit(c, &est.csv()),
        Format::Json => {
            let mut occ = serde_json::Map::new();
            for &s in &est.states {
                let e = est.occupancy(s);
                occ.insert(s.label().to_string(), json!({ "estimate": e.mean, "std_error": e.std_error }));
            }
            let mut rates = serde_json::Map::new();
            for &l in &est.labels {
                let e = est.rate(&[l]);
                rates.insert(l.name().to_string(), json!({ "estimate": e.mean, "std_error": e.std_error }));
            }
            let a = est.availability();
            emit_json(
                c,
                &json!({
                    "occupancy": occ,
                    "availability": { "estimate": a.mean, "std_error": a.std_error },
                    "rates": rates,
                    "total_events": est.total_events,
                }),
            )
        }
    }
}

fn dump_mmap(c: &Common, event: Option<&str>) -> CliResult<()> {
    let (_, spec) = checked(c)?;
    let mmap = assemble_mmap(&spec)?;
    let labels: Vec<EventLabel> = match event {
        Some(e) => vec![e.parse()?],
        None => EventLabel::for_variant(spec.variant).to_vec(),
    };
    match c.format {
        Format::Csv => {
            let mut s = String::from("event,row,col,value\n");
            for l in &labels {
                for line in mmap.event_csv(*l).lines().skip(1) {
                    s.push_str(&format!("{},{line}\n", l.name()));
                }
            }
            emit(c, &s)
        }
        Format::Json => {
            let mut out = serde_json::Map::new();
            for l in &labels {
                let m = mmap.event_matrix(*l);
                let rows: Vec<Vec<f64>> = (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect()).collect();
                out.insert(l.name().to_string(), json!(rows));
            }
            emit_json(c, &json!({ "dim": mmap.dim(), "events": out }))
        }
    }
}
