//! `gatesim` binary: scenario-driven experiments over the gate-energy
//! measurement model. Reports go to `--output` (or stdout); human-readable
//! summaries and errors go to stderr; exit codes are the machine-readable
//! failure channel: 0 ok, 2 config error, 3 all gates closed, 4 bound
//! violation.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use gatesim::cli::{
    cmd_born_check_with, cmd_entangle_with, cmd_independence, cmd_simulate_with, cmd_trace_ops,
    write_csv_header, write_csv_row, write_independence_csv, write_trace_ops_csv, CliError,
    RunReport, ScenarioConfig,
};

#[derive(Parser)]
#[command(
    name = "gatesim",
    version,
    about = "Deterministic gate-energy simulator of projective quantum measurement"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured scenario and write a full report or per-step rows.
    Simulate(CommonArgs),
    /// Check repeated-measurement frequencies against the deterministic bound.
    BornCheck(CommonArgs),
    /// Evaluate the post-measurement decoupling residuals.
    Independence(CommonArgs),
    /// Probe the branch-operator sum identity and Schrödinger residuals.
    TraceOps(TraceOpsArgs),
    /// Measure an entangled pair once per trial, fresh ledger each trial.
    Entangle(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Scenario config file (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output path; stdout when omitted.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Report encoding.
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Override the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Fan out this many consecutive seeds, each its own run and output file.
    #[arg(long, default_value_t = 1)]
    jobs: u64,
}

#[derive(Args)]
struct TraceOpsArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Probe times, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0,0.37,1")]
    times: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("gatesim: {err}");
            err.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (common, times) = match &cli.command {
        Command::Simulate(c)
        | Command::BornCheck(c)
        | Command::Independence(c)
        | Command::Entangle(c) => (c, Vec::new()),
        Command::TraceOps(t) => (&t.common, t.times.clone()),
    };
    let mut config = load_config(&common.config)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    if common.jobs <= 1 {
        return run_one(
            &cli.command,
            &config,
            common,
            &times,
            common.output.as_deref(),
        );
    }
    let base_output = common.output.as_deref().ok_or_else(|| {
        CliError::Config("--jobs > 1 requires --output (one file per seed)".into())
    })?;
    // Independent seeds, independent ledgers; the worst exit code wins.
    let results: Vec<Result<(), CliError>> = std::thread::scope(|scope| {
        let command = &cli.command;
        let config = &config;
        let times = &times;
        let handles: Vec<_> = (0..common.jobs)
            .map(|k| {
                scope.spawn(move || {
                    let mut job_config = config.clone();
                    job_config.seed = config.seed.wrapping_add(k);
                    let output = suffixed_output(base_output, job_config.seed);
                    run_one(command, &job_config, common, times, Some(&output))
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("job thread panicked"))
            .collect()
    });
    let mut worst: Option<CliError> = None;
    for result in results {
        if let Err(err) = result {
            eprintln!("gatesim: {err}");
            if worst
                .as_ref()
                .is_none_or(|w| err.exit_code() > w.exit_code())
            {
                worst = Some(err);
            }
        }
    }
    match worst {
        Some(err) => Err(err),
        None => Ok(()),
    }
}

fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let mut text = String::new();
    File::open(path)
        .map_err(|e| CliError::Config(format!("cannot open {}: {e}", path.display())))?
        .read_to_string(&mut text)?;
    ScenarioConfig::from_json(&text)
}

fn suffixed_output(base: &Path, seed: u64) -> PathBuf {
    match base.extension() {
        Some(ext) => base.with_extension(format!("seed{seed}.{}", ext.to_string_lossy())),
        None => base.with_extension(format!("seed{seed}")),
    }
}

fn run_one(
    command: &Command,
    config: &ScenarioConfig,
    common: &CommonArgs,
    times: &[f64],
    output: Option<&Path>,
) -> Result<(), CliError> {
    let mut sink = OutputSink::create(output)?;
    let report = match command {
        Command::Simulate(_) => with_step_stream(common.format, &mut sink, config, |cfg, f| {
            cmd_simulate_with(cfg, f)
        })?,
        Command::BornCheck(_) => with_step_stream(common.format, &mut sink, config, |cfg, f| {
            cmd_born_check_with(cfg, f)
        })?,
        Command::Entangle(_) => with_step_stream(common.format, &mut sink, config, |cfg, f| {
            cmd_entangle_with(cfg, f)
        })?,
        Command::Independence(_) => cmd_independence(config)?,
        Command::TraceOps(_) => cmd_trace_ops(config, times)?,
    };
    match common.format {
        Format::Json => {
            sink.write_all(report.to_json().as_bytes())?;
            sink.write_all(b"\n")?;
        }
        Format::Csv => match command {
            Command::Independence(_) => write_independence_csv(&mut sink, &report)?,
            Command::TraceOps(_) => write_trace_ops_csv(&mut sink, &report)?,
            // Per-step rows were streamed during the run.
            _ => {}
        },
    }
    sink.finish()?;
    print_summary(&report);
    Ok(())
}

/// Streams per-step CSV rows while the command runs; JSON runs get a no-op
/// observer. An I/O failure inside the observer is surfaced afterwards.
fn with_step_stream<F>(
    format: Format,
    sink: &mut OutputSink,
    config: &ScenarioConfig,
    run: F,
) -> Result<RunReport, CliError>
where
    F: FnOnce(
        &ScenarioConfig,
        &mut dyn FnMut(&gatesim::ensemble::StepRecord),
    ) -> Result<RunReport, CliError>,
{
    if format != Format::Csv {
        return run(config, &mut |_| {});
    }
    write_csv_header(sink, config.gate_count())?;
    let mut io_error: Option<io::Error> = None;
    let report = {
        let mut observer = |rec: &gatesim::ensemble::StepRecord| {
            if io_error.is_none() {
                if let Err(e) = write_csv_row(sink, rec) {
                    io_error = Some(e);
                }
            }
        };
        run(config, &mut observer)?
    };
    match io_error {
        Some(e) => Err(e.into()),
        None => Ok(report),
    }
}

enum OutputSink {
    File(BufWriter<File>),
    Stdout(io::Stdout),
}

impl OutputSink {
    fn create(path: Option<&Path>) -> Result<Self, CliError> {
        Ok(match path {
            Some(p) => OutputSink::File(BufWriter::new(File::create(p)?)),
            None => OutputSink::Stdout(io::stdout()),
        })
    }

    fn finish(&mut self) -> io::Result<()> {
        self.flush()
    }
}

impl Write for OutputSink {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            OutputSink::File(w) => w.write(buf),
            OutputSink::Stdout(w) => w.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            OutputSink::File(w) => w.flush(),
            OutputSink::Stdout(w) => w.flush(),
        }
    }
}

fn print_summary(report: &RunReport) {
    match report.command.as_str() {
        "simulate" | "entangle" => {
            eprintln!(
                "{}: {} steps, counts {:?}, max deviation {:.3e}",
                report.command,
                report.outcomes.len(),
                report.counts,
                report.max_deviation
            );
        }
        "born-check" => {
            let envelope = if report.config.steps == 0 {
                f64::INFINITY
            } else {
                report.bound_b.abs().max(report.bound_upper) / report.config.steps as f64
            };
            if let Some(dev) = &report.freq_deviation {
                for (j, d) in dev.iter().enumerate() {
                    eprintln!(
                        "gate {}: |n_j/n - c_j| = {:.6e} (bound {:.6e})",
                        j + 1,
                        d,
                        envelope
                    );
                }
            }
            if let Some(iid_dev) = report.iid_max_deviation {
                eprintln!(
                    "iid baseline: max |n*c_j - n_j| = {:.3} vs deterministic {:.3}",
                    iid_dev, report.max_deviation
                );
            }
            eprintln!("born-check: every prefix within bounds");
        }
        "independence" => {
            if let Some(residuals) = &report.independence_residuals {
                for (j, r) in residuals.iter().enumerate() {
                    eprintln!("gate {}: residual = {:.3e}", j + 1, r);
                }
            }
            let verdict = match report.independence_compatible {
                Some(true) => "independence-compatible",
                _ => "not independence-compatible",
            };
            eprintln!("independence: {verdict}");
        }
        "trace-ops" => {
            if let Some(rows) = &report.trace_ops {
                for row in rows {
                    eprintln!(
                        "t = {}: sum residual {:.3e}, max Schrodinger residual {:.3e}",
                        row.t,
                        row.sum_residual,
                        row.schrodinger_residuals
                            .iter()
                            .cloned()
                            .fold(0.0, f64::max)
                    );
                }
            }
        }
        _ => {}
    }
}
