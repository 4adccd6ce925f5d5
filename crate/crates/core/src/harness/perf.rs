//! First-order analytic performance model of a platform: peak FLOPS,
//! bisection bandwidth, aggregate local-memory bandwidth and off-chip
//! bandwidth, all derived from the configured geometry and clocks.

use serde::Serialize;

use crate::mem::{BANK_WIDTH, NUM_BANKS};
use crate::platform::PlatformConfig;

#[derive(Debug, Clone, Serialize)]
pub struct PerfModel {
    pub platform: String,
    pub cores: usize,
    pub clock_ghz: f64,
    /// One fused multiply-add per core per cycle.
    pub peak_gflops: f64,
    /// Bytes/s across the narrower mid-line cut, both directions.
    pub bisection_gbps: f64,
    /// All cores hitting all four scratchpad banks every cycle.
    pub local_memory_gbps: f64,
    /// Sum of eLink rates over the four chip edges.
    pub offchip_gbps: f64,
}

pub fn perf_model(cfg: &PlatformConfig) -> PerfModel {
    let ghz = cfg.clock_hz as f64 / 1e9;
    let cores = cfg.num_cores();
    let link = cfg.link_bytes_per_cycle as f64;
    PerfModel {
        platform: cfg.name.clone(),
        cores,
        clock_ghz: ghz,
        peak_gflops: cores as f64 * 2.0 * ghz,
        bisection_gbps: cfg.rows.min(cfg.cols) as f64 * link * 2.0 * ghz,
        local_memory_gbps: cores as f64 * (NUM_BANKS as f64 * BANK_WIDTH as f64) * ghz,
        offchip_gbps: cfg.elink_rates.sum() * link * ghz,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn e64_headline_numbers() {
        let m = perf_model(&PlatformConfig::e64());
        assert!((m.peak_gflops - 102.4).abs() < 1e-9);
        assert!((m.bisection_gbps - 102.4).abs() < 1e-9);
        assert!((m.local_memory_gbps - 1638.4).abs() < 1e-9);
        assert!((m.offchip_gbps - 32.0).abs() < 1e-9);
    }

    #[test]
    fn e16_scales_with_clock() {
        let m = perf_model(&PlatformConfig::e16());
        assert!((m.peak_gflops - 32.0).abs() < 1e-9);
        assert!((m.local_memory_gbps - 512.0).abs() < 1e-9);
    }
}
