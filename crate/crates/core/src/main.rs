use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use thrustwalk::sim::{bench_report, run_scenario, write_csv, ConfigError, Metrics, SimConfig};

#[derive(Parser)]
#[command(name = "thrustwalk", version, about = "Thruster-assisted quadruped walking simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the CSV log.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Simulated time [s].
        #[arg(long)]
        duration: Option<f64>,
        /// Output CSV path. Defaults to the config's output.csv, then thrustwalk.csv.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Keep every N-th step.
        #[arg(long)]
        decimate: Option<usize>,
        /// Log every step.
        #[arg(long)]
        full_rate: bool,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Check a config and print the effective configuration.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Report per-step wall time of the closed loop.
    Bench {
        /// Scenario to time; defaults are used when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Simulated time [s].
        #[arg(long, default_value_t = 2.0)]
        duration: f64,
    },
}

const EXIT_CONFIG: u8 = 2;
const EXIT_FAULT: u8 = 3;

fn config_failure(err: ConfigError) -> ExitCode {
    eprintln!("error: {err}");
    ExitCode::from(EXIT_CONFIG)
}

fn load(path: Option<&Path>) -> Result<SimConfig, ConfigError> {
    match path {
        Some(p) => SimConfig::load(p),
        None => Ok(SimConfig::default()),
    }
}

fn print_metrics(m: &Metrics) {
    println!("steps                 {}", m.steps);
    println!("simulated time [s]    {:.4}", m.simulated_time);
    println!("mean forward speed    {:.4} m/s", m.mean_forward_speed);
    println!("max ERG violation     {:.4} N", m.max_erg_violation);
    println!("max friction excess   {:.4} N", m.max_friction_violation);
    println!("peak normal force     {:.3} N", m.peak_normal);
    println!("observer RMS error    {:.4} N", m.observer_rms);
    println!("constrained RMS error {:.4} N", m.constrained_rms);
    println!("mean step time        {:.2} us", m.mean_step_seconds * 1e6);
}

fn run(
    config: &Path,
    duration: Option<f64>,
    out: Option<PathBuf>,
    decimate: Option<usize>,
    full_rate: bool,
    seed: Option<u64>,
) -> ExitCode {
    let mut cfg = match SimConfig::load(config) {
        Ok(c) => c,
        Err(e) => return config_failure(e),
    };
    if let Some(d) = duration {
        cfg.scenario.duration = d;
    }
    if let Some(n) = decimate {
        cfg.scenario.log_decimation = n;
    }
    if let Some(s) = seed {
        cfg.scenario.seed = s;
    }
    cfg.scenario.full_rate |= full_rate;
    if let Err(e) = cfg.validate() {
        return config_failure(e);
    }
    let out = out
        .or_else(|| cfg.output.csv.clone())
        .unwrap_or_else(|| PathBuf::from("thrustwalk.csv"));
    let metadata = [
        ("thrustwalk", env!("CARGO_PKG_VERSION").to_string()),
        ("config_sha256", cfg.hash()),
        ("dt", cfg.scenario.dt.to_string()),
        ("decimation", cfg.scenario.effective_decimation().to_string()),
        ("seed", cfg.scenario.seed.to_string()),
    ];
    let result = match run_scenario(cfg) {
        Ok(r) => r,
        Err(e) => return config_failure(e),
    };
    let trailer = result.fault.as_ref().map(|f| format!("fault: {f}"));
    if let Err(e) = write_csv(&out, &metadata, &result.records, trailer.as_deref()) {
        eprintln!("error: {e}");
        return ExitCode::FAILURE;
    }
    print_metrics(&result.metrics);
    println!("wrote {} rows to {}", result.records.len(), out.display());
    match result.fault {
        Some(f) => {
            eprintln!("simulation fault: {f}");
            ExitCode::from(EXIT_FAULT)
        }
        None => ExitCode::SUCCESS,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            config,
            duration,
            out,
            decimate,
            full_rate,
            seed,
        } => run(&config, duration, out, decimate, full_rate, seed),
        Command::Validate { config } => match SimConfig::load(&config) {
            Ok(cfg) => {
                print!("{}", cfg.to_toml());
                ExitCode::SUCCESS
            }
            Err(e) => config_failure(e),
        },
        Command::Bench { config, duration } => {
            let mut cfg = match load(config.as_deref()) {
                Ok(c) => c,
                Err(e) => return config_failure(e),
            };
            cfg.scenario.duration = duration;
            let result = match run_scenario(cfg) {
                Ok(r) => r,
                Err(e) => return config_failure(e),
            };
            let Some(report) = bench_report(&result.step_seconds) else {
                eprintln!("no steps were run");
                return ExitCode::from(EXIT_FAULT);
            };
            println!("steps  {}", report.steps);
            println!("mean   {:.2} us", report.mean * 1e6);
            println!("p50    {:.2} us", report.p50 * 1e6);
            println!("p90    {:.2} us", report.p90 * 1e6);
            println!("p99    {:.2} us", report.p99 * 1e6);
            println!("max    {:.2} us", report.max * 1e6);
            if let Some(f) = result.fault {
                eprintln!("simulation fault: {f}");
                return ExitCode::from(EXIT_FAULT);
            }
            ExitCode::SUCCESS
        }
    }
}
