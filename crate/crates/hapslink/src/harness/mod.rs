//! Monte Carlo harness: scenario configuration, SNR sweeps for the
//! single-user and NOMA links with either receiver, metric records, CSV
//! output and a console report.

mod config;
mod csv;
mod metrics;
mod report;
mod sweep;

pub use config::{CnnArch, EstimatorKind, ScenarioConfig, SweepMode};
pub use csv::{parse_csv, read_csv, records_to_csv, records_to_csv_with_comments, write_csv, CSV_HEADER};
pub use metrics::{ber, mse, MetricRecord};
pub use report::format_report;
pub use sweep::{run_noma_dl_sweep, run_noma_ul_sweep, run_oma_sweep, run_sweep, CnnModels};
