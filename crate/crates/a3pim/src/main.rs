use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use a3pim::config::{dump_config, parse_config};
use a3pim::report::{cluster_rows, metrics_rows, render_rows, ComparisonReport, Format, ScheduleReport};
use a3pim::text::{parse_program, parse_trace, serialize_program, serialize_trace};
use a3pim::{parallel, view};
use a3pim_core::ir::{Program, Trace};
use a3pim_core::schedule::{Granularity, OffloadConfig, Offloader, ScheduleError, Strategy};
use a3pim_core::workload::{generate, random_program, Archetype, WorkloadSpec};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "a3pim", version, about = "Static CPU/PIM offloading analysis and scheduling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Inputs {
    /// Program file
    #[arg(long)]
    ir: PathBuf,
    /// Trace file matching the program's profile
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Configuration file (key = value)
    #[arg(long, env = "A3PIM_CONFIG")]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct Output {
    /// Write to this file instead of standard output
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Format {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum GranularityArg {
    Bbls,
    Func,
}

impl From<GranularityArg> for Granularity {
    fn from(g: GranularityArg) -> Granularity {
        match g {
            GranularityArg::Bbls => Granularity::BasicBlocks,
            GranularityArg::Func => Granularity::Functions,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Per-region static metrics
    Analyze {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value = "bbls")]
        granularity: GranularityArg,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[command(flatten)]
        output: Output,
    },
    /// Connectivity clusters and their classifier decisions
    Cluster {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value = "bbls")]
        granularity: GranularityArg,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[command(flatten)]
        output: Output,
    },
    /// Run one strategy and report its assignment and cost breakdown
    Schedule {
        #[command(flatten)]
        inputs: Inputs,
        /// cpu-only, pim-only, mpki, greedy, tub, a3pim-bbls, a3pim-func, or
        /// a3pim (granularity taken from --granularity)
        #[arg(long)]
        strategy: String,
        #[arg(long, value_enum, default_value = "bbls")]
        granularity: GranularityArg,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        #[command(flatten)]
        output: Output,
    },
    /// Run every strategy and compare them
    Compare {
        #[command(flatten)]
        inputs: Inputs,
        #[arg(long, value_enum, default_value = "csv")]
        format: FormatArg,
        #[command(flatten)]
        output: Output,
    },
    /// Generate a synthetic program and trace
    Gen {
        /// Workload archetype, or `random` for a small fuzzing program
        #[arg(long, default_value = "mixed-phase")]
        archetype: String,
        #[arg(long, default_value_t = 16)]
        regions: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Fraction of memory references redirected into a shared pool
        #[arg(long, default_value_t = 0.05)]
        sharing: f64,
        /// Program destination
        #[arg(long)]
        out: Option<PathBuf>,
        /// Trace destination
        #[arg(long)]
        trace_out: Option<PathBuf>,
    },
    /// Print the effective configuration
    Config {
        #[arg(long, env = "A3PIM_CONFIG")]
        config: Option<PathBuf>,
        /// Print every key with its value (the default action)
        #[arg(long)]
        dump: bool,
        #[command(flatten)]
        output: Output,
    },
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Failure { code: 2, message: message.into() }
    }
}

impl From<ScheduleError> for Failure {
    fn from(e: ScheduleError) -> Self {
        let code = match e {
            ScheduleError::MissingTrace(_) | ScheduleError::UnitLimit { .. } => 3,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::usage(format!("{}: {e}", path.display())))
}

fn load_config(path: Option<&Path>) -> Result<OffloadConfig, Failure> {
    match path {
        Some(p) => parse_config(&read(p)?).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => Ok(OffloadConfig::default()),
    }
}

fn load(inputs: &Inputs) -> Result<(Program, Option<Trace>, OffloadConfig), Failure> {
    let config = load_config(inputs.config.as_deref())?;
    let program =
        parse_program(&read(&inputs.ir)?).map_err(|e| Failure::usage(format!("{}: {e}", inputs.ir.display())))?;
    let trace = match &inputs.trace {
        Some(p) => Some(parse_trace(&read(p)?, &program).map_err(|e| Failure::usage(format!("{}: {e}", p.display())))?),
        None => None,
    };
    Ok((program, trace, config))
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Failure> {
    match out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::usage(format!("{}: {e}", p.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::usage(e.to_string())),
    }
}

fn parse_strategy(name: &str, granularity: Granularity) -> Result<Strategy, Failure> {
    if name == "a3pim" {
        return Ok(match granularity {
            Granularity::BasicBlocks => Strategy::A3pimBbls,
            Granularity::Functions => Strategy::A3pimFunc,
        });
    }
    name.parse::<Strategy>().map_err(|e| Failure::usage(e.to_string()))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let report = |e: a3pim::report::ReportError| Failure::usage(e.to_string());
    match cli.command {
        Command::Analyze { inputs, granularity, format, output } => {
            let (program, trace, config) = load(&inputs)?;
            let v = view::build(&program, trace.as_ref(), &config, granularity.into())?;
            let rows = metrics_rows(&v.program, &v.metrics, v.misses.as_ref());
            emit(output.out.as_deref(), &render_rows(&rows, format.into()).map_err(report)?)
        }
        Command::Cluster { inputs, granularity, format, output } => {
            let (program, trace, config) = load(&inputs)?;
            let v = view::build(&program, trace.as_ref(), &config, granularity.into())?;
            let rows = cluster_rows(&v.program, &v.metrics, &v.clusters, &config);
            emit(output.out.as_deref(), &render_rows(&rows, format.into()).map_err(report)?)
        }
        Command::Schedule { inputs, strategy, granularity, format, output } => {
            let strategy = parse_strategy(&strategy, granularity.into())?;
            let (program, trace, config) = load(&inputs)?;
            let off = Offloader::new(&program, trace.as_ref(), &config)?;
            let result = parallel::run(&off, strategy)?;
            emit(output.out.as_deref(), &ScheduleReport::new(&result).render(format.into()).map_err(report)?)
        }
        Command::Compare { inputs, format, output } => {
            let (program, trace, config) = load(&inputs)?;
            let off = Offloader::new(&program, trace.as_ref(), &config)?;
            let outcomes = parallel::run_all(&off);
            emit(output.out.as_deref(), &ComparisonReport::new(&outcomes).render(format.into()).map_err(report)?)
        }
        Command::Gen { archetype, regions, seed, sharing, out, trace_out } => {
            let (program, trace) = if archetype == "random" {
                if !(1..=12).contains(&regions) {
                    return Err(Failure::usage("random programs take 1 to 12 regions"));
                }
                random_program(seed, regions)
            } else {
                let archetype = Archetype::from_name(&archetype)
                    .ok_or_else(|| Failure::usage(format!("unknown archetype `{archetype}`")))?;
                let mut spec = WorkloadSpec::new(archetype, regions, seed);
                spec.sharing_density = sharing;
                generate(&spec).map_err(|e| Failure::usage(e.to_string()))?
            };
            emit(out.as_deref(), &serialize_program(&program))?;
            match trace_out {
                Some(p) => emit(Some(&p), &serialize_trace(&trace)),
                None => Ok(()),
            }
        }
        Command::Config { config, dump: _, output } => {
            let cfg = load_config(config.as_deref())?;
            emit(output.out.as_deref(), &dump_config(&cfg))
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("a3pim: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
