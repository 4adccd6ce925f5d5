//! Measurement harness: synthetic traffic, bandwidth probes, litmus
//! tests, demo kernels and the analytic performance model.

pub mod kernels;
pub mod litmus;
pub mod perf;
pub mod rwratio;
pub mod traffic;

pub use litmus::{run_litmus, LitmusReport, LITMUS_NAMES};
pub use perf::{perf_model, PerfModel};
pub use rwratio::{measure_rw_ratio, RwRatioReport};
pub use traffic::{run_traffic, Pattern, TrafficParams, TrafficReport};
