//! Simulation harness: integrator, configuration, closed loop and telemetry.

pub mod config;
pub mod integrator;
pub mod scenario;
pub mod telemetry;

pub use config::{ConfigError, SimConfig};
pub use integrator::{rk4_step, Integrable, NonFiniteDerivative};
pub use scenario::{bench_report, run_scenario, BenchReport, LogRecord, Metrics, RunResult, SimFault, Simulation};
pub use telemetry::{read_csv, write_csv, write_log, TelemetryError};
