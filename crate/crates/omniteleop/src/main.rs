use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use omniteleop::error::{AppError, AppResult};
use omniteleop::log::{read_log, LogWriter};
use omniteleop::plot::{write_plot, PlotKind};
use omniteleop::runner::{default_output, run_to_files};
use omniteleop::service::{Recording, Service, BIND_ENV, DEFAULT_BIND};
use omniteleop::session::{replay, session_header, InputLog};
use omniteleop::Scenario;

/// Bilateral teleoperation simulator for an omnidirectional aerial vehicle.
#[derive(Parser)]
#[command(name = "omniteleop", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario headless and write its log.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// CSV wrench trace; replaces the scenario's operator.
        #[arg(long)]
        trace: Option<PathBuf>,
        /// Log path (default: $OMNITELEOP_LOG_DIR or ./runs, named after the scenario).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Run length [s].
        #[arg(long)]
        duration: Option<f64>,
        /// Keep every n-th record.
        #[arg(long)]
        decimation: Option<u64>,
    },
    /// Check a scenario file.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Serve the live simulation over WebSocket.
    Serve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, env = BIND_ENV, default_value = DEFAULT_BIND)]
        bind: String,
        /// Directory for the session log and input log.
        #[arg(long)]
        record: Option<PathBuf>,
        /// Stop after this many seconds instead of waiting for Ctrl-C.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Replay a recorded session headless.
    Replay {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        inputs: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Turn a log into plot columns.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// `decoupling` or `push-slide`; chosen from the log header if omitted.
        #[arg(long)]
        kind: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> AppResult<()> {
    match command {
        Command::Run {
            config,
            trace,
            out,
            seed,
            duration,
            decimation,
        } => {
            let mut scenario = Scenario::load(&config)?;
            if let Some(t) = trace {
                scenario = scenario.with_trace(t)?;
            }
            if let Some(s) = seed {
                scenario = scenario.with_seed(s);
            }
            if let Some(d) = duration {
                scenario = scenario.with_duration(d)?;
            }
            if let Some(n) = decimation {
                scenario = scenario.with_decimation(n)?;
            }
            let out = default_output(&scenario, out);
            let (summary, logs) = run_to_files(&scenario, &out)?;
            print!("{}", summary.render());
            for log in logs {
                println!("log           {}", log.display());
            }
            Ok(())
        }
        Command::Validate { config } => {
            let scenario = Scenario::load(&config)?;
            println!(
                "{}: ok ({}, {} ticks at dt = {} s)",
                config.display(),
                scenario.experiment.kind(),
                scenario.params.ticks(scenario.duration),
                scenario.params.dt
            );
            Ok(())
        }
        Command::Serve {
            config,
            bind,
            record,
            duration,
        } => {
            let scenario = Scenario::load(&config)?;
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| AppError::io(&config, e))?;
            runtime.block_on(async {
                let service = Service::start(&scenario, &bind, record.map(|dir| Recording { dir })).await?;
                println!("serving ws://{}/ws", service.local_addr());
                match duration {
                    Some(s) => tokio::time::sleep(std::time::Duration::from_secs_f64(s)).await,
                    None => {
                        let _ = tokio::signal::ctrl_c().await;
                    }
                }
                let stats = service.shutdown().await?;
                println!(
                    "stepped {} ticks, {} late (max lateness {:?})",
                    stats.ticks, stats.late_ticks, stats.max_lateness
                );
                if stats.diverged {
                    return Err(AppError::Sim(omniteleop::core::Error::NonFiniteState {
                        what: "live session",
                    }));
                }
                Ok(())
            })
        }
        Command::Replay { config, inputs, out } => {
            let scenario = Scenario::load(&config)?;
            let log = InputLog::read(&inputs)?;
            let writer = LogWriter::create(&out, &session_header(&scenario, "replay", log.span()))?;
            replay(&scenario, &log, writer)?;
            println!("replayed {} ticks into {}", log.span(), out.display());
            Ok(())
        }
        Command::Plot { log, out, kind } => {
            let (header, records) = read_log(&log)?;
            let kind = match kind.as_deref() {
                None => PlotKind::for_log(&header),
                Some("decoupling") => PlotKind::Decoupling,
                Some("push-slide") | Some("push_slide") => PlotKind::PushSlide,
                Some(other) => {
                    return Err(AppError::Config {
                        path: "--kind".into(),
                        msg: format!("unknown plot kind `{other}`"),
                    })
                }
            };
            let file = std::fs::File::create(&out).map_err(|e| AppError::io(&out, e))?;
            write_plot(std::io::BufWriter::new(file), kind, &header, &records).map_err(|e| AppError::io(&out, e))?;
            Ok(())
        }
    }
}
