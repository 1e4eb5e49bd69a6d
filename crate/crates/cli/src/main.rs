mod batch;
mod serve;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use riskmaps::sim::{load_scenario, make_gap_scenario, make_no_gap_scenario, Scenario};

/// Exit status for unusable scenario files, parameters or arguments.
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 1;

#[derive(Parser)]
#[command(
    name = "riskmaps",
    version,
    about = "Risk-based lane-change warnings on a local dynamic map"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario to completion and write trace files plus a summary.
    Run {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Output directory.
        #[arg(long, short, default_value = "out")]
        out: PathBuf,
    },
    /// Serve live sessions over WebSocket at /ws.
    Serve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        /// Keep the scenario's ego mode instead of handing the ego to the client.
        #[arg(long)]
        autopilot: bool,
        /// Time warp; 2 runs the world twice as fast as real time.
        #[arg(long, default_value_t = 1.0)]
        speed: f64,
    },
    /// Write the bundled map and scenario files.
    Gen {
        #[arg(long, short, default_value = "scenarios")]
        out: PathBuf,
    },
    /// Export the risk-field grid of one cycle.
    Plot {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, default_value_t = 0)]
        cycle: usize,
        #[arg(long, value_enum, default_value_t = PlotFormat::Text)]
        format: PlotFormat,
        /// Output file; stdout when absent.
        #[arg(long, short)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum PlotFormat {
    Text,
    Json,
    /// Coarse character heatmap.
    Ascii,
}

#[derive(Clone, Copy, ValueEnum)]
enum Bundled {
    Gap,
    NoGap,
}

#[derive(Args, Clone)]
#[group(required = true, multiple = false, id = "source")]
struct Source {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: Option<PathBuf>,
    /// One of the bundled scenarios.
    #[arg(long, value_enum)]
    bundled: Option<Bundled>,
}

#[derive(Args, Clone)]
struct ScenarioArgs {
    #[command(flatten)]
    source: Source,
    #[arg(long)]
    seed: Option<u64>,
    /// Turn on observation noise.
    #[arg(long)]
    noise: bool,
    /// Parameter override `section.key=value`, repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

impl ScenarioArgs {
    fn load(&self) -> riskmaps::Result<Scenario> {
        let mut sc = match (&self.source.scenario, self.source.bundled) {
            (Some(path), _) => load_scenario(path)?,
            (None, Some(Bundled::NoGap)) => make_no_gap_scenario(),
            (None, _) => make_gap_scenario(),
        };
        if let Some(seed) = self.seed {
            sc.seed = seed;
        }
        sc.noise.enabled |= self.noise;
        sc.params = sc.params.with_overrides(&self.overrides)?;
        sc.validate()?;
        Ok(sc)
    }
}

/// A failure and the exit status it maps to.
pub struct Failure {
    code: u8,
    error: anyhow::Error,
}

impl Failure {
    pub fn config(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_CONFIG,
            error: error.into(),
        }
    }

    pub fn runtime(error: impl Into<anyhow::Error>) -> Self {
        Self {
            code: EXIT_RUNTIME,
            error: error.into(),
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "riskmaps=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out } => scenario
            .load()
            .map_err(Failure::config)
            .and_then(|sc| batch::run(sc, &out)),
        Command::Gen { out } => batch::gen(&out),
        Command::Plot {
            scenario,
            cycle,
            format,
            out,
        } => scenario
            .load()
            .map_err(Failure::config)
            .and_then(|sc| batch::plot(sc, cycle, format, out.as_deref())),
        Command::Serve {
            scenario,
            addr,
            autopilot,
            speed,
        } => scenario.load().map_err(Failure::config).and_then(|sc| {
            if !(speed > 0.0 && speed.is_finite()) {
                return Err(Failure::config(anyhow::anyhow!("--speed must be positive")));
            }
            serve::serve(sc, addr, autopilot, speed)
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let kind = if f.code == EXIT_CONFIG { "config error" } else { "error" };
            eprintln!("{kind}: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
