use std::fmt;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gridcascade::dynamics::{
    simulate_cascade_traced, ControlConfig, ControlMode, SimConfig,
};
use gridcascade::error::{ErrorCategory, GridError};
use gridcascade::flow::OverloadThreshold;
use gridcascade::harness::{
    classify_lines, critical_gain_table, gain_sweep, resolve_faults, FaultSelection,
    GainSelection, SweepSpec,
};
use gridcascade::ingest::{
    apply_overrides, builtin_five_node, parse_grid_file, parse_ieee_cdf, serialize_grid_file,
    CdfOptions, GridCase, Overrides, Susceptance,
};
use gridcascade::report::{self, ReportData, ReportFormat};

/// Cascading line failures in swing-equation grid models.
#[derive(Parser)]
#[command(name = "gridcascade", version)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// RK4 step h in seconds.
    #[arg(long, global = true)]
    step: Option<f64>,
    /// Simulation horizon T_max in seconds.
    #[arg(long, global = true)]
    horizon: Option<f64>,
    /// Overload threshold α in [0, 1].
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Pinned nodes for pinning control, e.g. `2,5`. Defaults to the generators.
    #[arg(long, global = true, value_delimiter = ',')]
    pinned: Vec<u32>,
    /// Parameter overrides file applied after loading the case.
    #[arg(long, global = true)]
    sidecar: Option<PathBuf>,
    /// Coupling from IEEE CDF branches.
    #[arg(long, global = true, value_enum, default_value_t = CouplingArg::Reactance)]
    coupling: CouplingArg,
    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,
    /// Write the report here instead of standard output.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum CouplingArg {
    /// K = 1/x
    Reactance,
    /// K = x/(r² + x²)
    Series,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Off,
    Full,
    #[value(alias = "pinning")]
    Pin,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => ReportFormat::Csv,
            FormatArg::Json => ReportFormat::Json,
        }
    }
}

impl From<ModeArg> for ControlMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Off => ControlMode::Off,
            ModeArg::Full => ControlMode::Full,
            ModeArg::Pin => ControlMode::Pinning,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Label every line as safe, static-failure or dynamic-only.
    Classify {
        /// Case file, or `five-node` for the built-in grid.
        case: String,
    },
    /// Number of failed lines as a function of the control gain.
    Sweep {
        case: String,
        /// Initial fault as `i,j`.
        #[arg(long, value_parser = parse_pair)]
        fault: (u32, u32),
        #[arg(long, value_enum, default_value_t = ModeArg::Full)]
        mode: ModeArg,
        /// Comma-separated list or `min:max:step`. Defaults to a grid around
        /// the critical gain.
        #[arg(long)]
        gains: Option<String>,
    },
    /// Critical full-control gain for each fault.
    CriticalGain {
        case: String,
        /// Restrict to these faults (repeatable). Default: every line.
        #[arg(long, value_parser = parse_pair)]
        fault: Vec<(u32, u32)>,
    },
    /// One cascade simulation.
    Simulate {
        case: String,
        #[arg(long, value_parser = parse_pair)]
        fault: (u32, u32),
        /// Control gain k_c.
        #[arg(long, default_value_t = 0.0)]
        kc: f64,
        #[arg(long, value_enum, default_value_t = ModeArg::Full)]
        mode: ModeArg,
        /// Write the sampled trajectory as CSV.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Keep every n-th integration step in the trace.
        #[arg(long, default_value_t = 10)]
        trace_stride: usize,
    },
    /// Read an IEEE CDF file, print a summary and optionally convert it.
    ParseCdf {
        file: PathBuf,
        /// Write the case in the native format.
        #[arg(long)]
        native: Option<PathBuf>,
    },
}

fn parse_pair(s: &str) -> Result<(u32, u32), String> {
    let (a, b) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `i,j`, got `{s}`"))?;
    let p = |x: &str| x.trim().parse::<u32>().map_err(|e| format!("`{x}`: {e}"));
    Ok((p(a)?, p(b)?))
}

fn parse_gains(s: &str) -> Result<GainSelection, CliError> {
    let num = |x: &str| {
        x.trim().parse::<f64>().map_err(|e| {
            CliError::Grid(GridError::InvalidParameter(format!("gain `{x}`: {e}")))
        })
    };
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [min, max, step] => Ok(GainSelection::Range {
            min: num(min)?,
            max: num(max)?,
            step: num(step)?,
        }),
        [list] => Ok(GainSelection::List(
            list.split(',').map(num).collect::<Result<_, _>>()?,
        )),
        _ => Err(CliError::Grid(GridError::InvalidParameter(format!(
            "gains `{s}`: use a list or min:max:step"
        )))),
    }
}

#[derive(Debug)]
enum CliError {
    Grid(GridError),
    Io(PathBuf, io::Error),
}

impl From<GridError> for CliError {
    fn from(e: GridError) -> Self {
        CliError::Grid(e)
    }
}

impl CliError {
    fn category(&self) -> ErrorCategory {
        match self {
            CliError::Grid(e) => e.category(),
            CliError::Io(..) => ErrorCategory::Io,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Grid(e) => write!(f, "{e}"),
            CliError::Io(p, e) => write!(f, "{}: {e}", p.display()),
        }
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_path_buf(), e))
}

fn cdf_options(g: &Global) -> CdfOptions {
    CdfOptions {
        susceptance: match g.coupling {
            CouplingArg::Reactance => Susceptance::Reactance,
            CouplingArg::Series => Susceptance::SeriesAdmittance,
        },
        ..CdfOptions::default()
    }
}

fn load(source: &str, g: &Global) -> Result<GridCase, CliError> {
    let mut case = if source == "five-node" || source == "builtin:five-node" {
        builtin_five_node()
    } else {
        let text = read(Path::new(source))?;
        if text.contains("BUS DATA FOLLOWS") {
            parse_ieee_cdf(&text, &cdf_options(g))?.case
        } else {
            parse_grid_file(&text)?
        }
    };
    if let Some(path) = &g.sidecar {
        case = apply_overrides(&case, &Overrides::parse(&read(path)?)?)?;
    }
    Ok(case)
}

fn sim_config(case: &GridCase, g: &Global) -> Result<SimConfig, CliError> {
    let mut sim = case.sim;
    if let Some(h) = g.step {
        sim.step = h;
    }
    if let Some(t) = g.horizon {
        sim.horizon = t;
    }
    if let Some(a) = g.alpha {
        sim.threshold = OverloadThreshold::new(a)?;
    }
    sim.validate()?;
    Ok(sim)
}

fn pinned(case: &GridCase, g: &Global) -> Result<Vec<usize>, CliError> {
    if g.pinned.is_empty() {
        Ok(case.topology.generators().iter().map(|n| n.index()).collect())
    } else {
        Ok(g.pinned.iter().map(|&l| case.index_of(l)).collect::<Result<_, _>>()?)
    }
}

fn emit(g: &Global, contents: &str) -> Result<(), CliError> {
    match &g.out {
        Some(path) => report::write_report(path, contents).map_err(|e| CliError::Io(path.clone(), e)),
        None => io::stdout()
            .write_all(contents.as_bytes())
            .map_err(|e| CliError::Io(PathBuf::from("<stdout>"), e)),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let g = &cli.global;
    match cli.command {
        Command::Classify { case } => {
            let case = load(&case, g)?;
            let sim = sim_config(&case, g)?;
            let faults = resolve_faults(&case, &FaultSelection::All)?;
            let table = classify_lines(&case, &sim, &faults);
            emit(g, &report::render(&case, ReportData::Classification(&table), g.format.into()))
        }
        Command::Sweep { case: source, fault, mode, gains } => {
            let case = load(&source, g)?;
            let sim = sim_config(&case, g)?;
            let sweep = SweepSpec {
                case: source,
                faults: FaultSelection::Lines(vec![fault]),
                gains: match gains {
                    Some(s) => parse_gains(&s)?,
                    None => GainSelection::Default,
                },
                mode: mode.into(),
                pinned: Vec::new(),
                report: g.out.clone(),
                trace: None,
            };
            let key = sweep.fault_lines(&case)?[0];
            let values = sweep.gain_values(&case, key)?;
            let curve = gain_sweep(&case, &sim, key, &values, sweep.mode, &pinned(&case, g)?)?;
            emit(g, &report::render(&case, ReportData::Sweep(&[curve]), g.format.into()))
        }
        Command::CriticalGain { case, fault } => {
            let case = load(&case, g)?;
            let selection = if fault.is_empty() {
                FaultSelection::All
            } else {
                FaultSelection::Lines(fault)
            };
            let faults = resolve_faults(&case, &selection)?;
            let rows = critical_gain_table(&case, &faults)?;
            emit(g, &report::render(&case, ReportData::CriticalGains(&rows), g.format.into()))
        }
        Command::Simulate { case, fault, kc, mode, trace, trace_stride } => {
            let case = load(&case, g)?;
            let sim = sim_config(&case, g)?;
            let key = case.line_key(fault.0, fault.1)?;
            let n = case.node_count();
            let control = match ControlMode::from(mode) {
                ControlMode::Off => ControlConfig::off(n),
                ControlMode::Full => ControlConfig::full(n, kc)?,
                ControlMode::Pinning => ControlConfig::pinning(n, kc, pinned(&case, g)?)?,
            };
            let (result, trajectory) = simulate_cascade_traced(
                &case.topology,
                &case.params,
                key,
                &sim,
                &control,
                trace_stride,
            )?;
            if let Some(path) = &trace {
                report::write_report(path, &report::trajectory_csv(&case, &trajectory))
                    .map_err(|e| CliError::Io(path.clone(), e))?;
            }
            emit(g, &report::render(&case, ReportData::Cascade(&result), g.format.into()))
        }
        Command::ParseCdf { file, native } => {
            let parsed = parse_ieee_cdf(&read(&file)?, &cdf_options(g))?;
            if let Some(path) = &native {
                report::write_report(path, &serialize_grid_file(&parsed.case))
                    .map_err(|e| CliError::Io(path.clone(), e))?;
            }
            let s = &parsed.summary;
            emit(g, &match g.format {
                FormatArg::Json => {
                    let mut j = serde_json::to_string_pretty(s).expect("summary serializes");
                    j.push('\n');
                    j
                }
                FormatArg::Csv => format!(
                    "buses,machines,branch_records,lines,base_mva,slack_bus,raw_imbalance\n{},{},{},{},{},{},{}\n",
                    s.bus_count,
                    s.machine_count,
                    s.branch_records,
                    s.line_count,
                    s.base_mva,
                    s.slack_bus.map(|b| b.to_string()).unwrap_or_default(),
                    s.raw_imbalance
                ),
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let category = e.category();
            eprintln!("error[{}]: {e}", category.as_str());
            ExitCode::from(category.exit_code() as u8)
        }
    }
}
