//! Streaming-write versus blocking-read bandwidth between the two most
//! distant cores. Writes pipeline one per cycle; each read waits for its
//! reply, so the gap is roughly the round-trip latency.

use serde::Serialize;

use crate::addr::encode_address;
use crate::isa::Width;
use crate::platform::PlatformConfig;
use crate::sim::Simulation;

#[derive(Debug, Clone, Serialize)]
pub struct RwRatioReport {
    pub platform: String,
    /// Manhattan distance between the probe endpoints.
    pub distance: u64,
    pub cycles: u64,
    pub write_bytes_per_cycle: f64,
    pub read_bytes_per_cycle: f64,
    pub ratio: f64,
}

pub fn measure_rw_ratio(cfg: &PlatformConfig, cycles: u64) -> RwRatioReport {
    let a = cfg.node_at(0);
    let b = cfg.node_at(cfg.num_cores() - 1);
    let addr = encode_address(b, 0x1000).expect("probe target");
    let distance = (b.row - a.row) as u64 + (b.col - a.col) as u64;

    let mut s = Simulation::new(cfg.clone());
    for _ in 0..cycles {
        s.synthetic_write(a, addr, 0xA5A5_A5A5, Width::Double);
        s.step();
    }
    let write_bpc = s.noc.counters.ejected_bytes as f64 / cycles as f64;

    let mut s = Simulation::new(cfg.clone());
    let mut outstanding = false;
    let mut completed = 0u64;
    for _ in 0..cycles {
        if !outstanding {
            outstanding = s.synthetic_read(a, addr, Width::Double);
        }
        s.step();
        if !s.synthetic_replies.is_empty() {
            s.synthetic_replies.clear();
            outstanding = false;
            completed += 1;
        }
    }
    let read_bpc = completed as f64 * Width::Double.bytes() as f64 / cycles as f64;

    RwRatioReport {
        platform: cfg.name.clone(),
        distance,
        cycles,
        write_bytes_per_cycle: write_bpc,
        read_bytes_per_cycle: read_bpc,
        ratio: write_bpc / read_bpc,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn writes_dominate_blocking_reads() {
        let r = measure_rw_ratio(&PlatformConfig::e16(), 2000);
        assert!(r.write_bytes_per_cycle > 7.0, "write stream {:.2} B/c", r.write_bytes_per_cycle);
        assert!(
            r.ratio >= 8.0 && r.ratio <= 32.0,
            "ratio {:.1} outside the expected band",
            r.ratio
        );
    }
}
