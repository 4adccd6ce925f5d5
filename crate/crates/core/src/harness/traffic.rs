//! Seeded synthetic traffic driven straight into the network model,
//! without cores. Used for saturation, latency and deadlock-freedom
//! measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::addr::{encode_address, NodeAddress};
use crate::isa::Width;
use crate::mesh::{NocState, Packet, PacketKind};
use crate::platform::PlatformConfig;

const DRAIN_LIMIT: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pattern {
    UniformRandom,
    NearestNeighbor,
    /// Mirror across the vertical mid-line: (r, c) -> (r, cols-1-c).
    /// Every flow crosses the bisection, making this the stress case.
    Transpose,
    /// Everyone hammers the centre node.
    HotSpot,
    /// Corner nodes exchange with their opposite corners.
    CornerToCorner,
}

impl Pattern {
    pub const ALL: [Pattern; 5] = [
        Pattern::UniformRandom,
        Pattern::NearestNeighbor,
        Pattern::Transpose,
        Pattern::HotSpot,
        Pattern::CornerToCorner,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Pattern::UniformRandom => "uniform",
            Pattern::NearestNeighbor => "neighbor",
            Pattern::Transpose => "transpose",
            Pattern::HotSpot => "hotspot",
            Pattern::CornerToCorner => "corner",
        }
    }
}

impl std::str::FromStr for Pattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Pattern, String> {
        Pattern::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown pattern '{s}' (try uniform, neighbor, transpose, hotspot, corner)"))
    }
}

#[derive(Debug, Clone)]
pub struct TrafficParams {
    pub pattern: Pattern,
    /// Offered injection probability per node per cycle, 0..=1.
    pub rate: f64,
    pub cycles: u64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrafficReport {
    pub pattern: String,
    pub rate: f64,
    pub cycles: u64,
    pub seed: u64,
    pub offered: u64,
    pub accepted: u64,
    pub delivered: u64,
    pub delivered_bytes: u64,
    pub throughput_bytes_per_cycle: f64,
    pub bisection_bytes_per_cycle: f64,
    pub mean_latency: f64,
    pub p99_latency: u64,
    pub max_latency: u64,
    pub drain_cycles: u64,
    pub in_flight_after_drain: u64,
    /// Every accepted packet was delivered exactly once and the network
    /// drained: no loss, no duplication, no deadlock.
    pub conserved: bool,
}

fn pick_dest(
    cfg: &PlatformConfig,
    src: NodeAddress,
    pattern: Pattern,
    rng: &mut ChaCha8Rng,
) -> Option<NodeAddress> {
    let (rows, cols) = (cfg.rows as i32, cfg.cols as i32);
    let r = (src.row - cfg.origin[0]) as i32;
    let c = (src.col - cfg.origin[1]) as i32;
    let at = |r: i32, c: i32| {
        NodeAddress::new(cfg.origin[0] + r as u8, cfg.origin[1] + c as u8)
    };
    match pattern {
        Pattern::UniformRandom => {
            let n = cfg.num_cores();
            loop {
                let d = rng.gen_range(0..n);
                let dst = cfg.node_at(d);
                if dst != src {
                    return Some(dst);
                }
            }
        }
        Pattern::NearestNeighbor => {
            let opts: Vec<(i32, i32)> = [(r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)]
                .into_iter()
                .filter(|&(nr, nc)| nr >= 0 && nr < rows && nc >= 0 && nc < cols)
                .collect();
            let (nr, nc) = opts[rng.gen_range(0..opts.len())];
            Some(at(nr, nc))
        }
        Pattern::Transpose => {
            let mc = cols - 1 - c;
            (mc != c).then(|| at(r, mc))
        }
        Pattern::HotSpot => {
            let (hr, hc) = (rows / 2, cols / 2);
            (r != hr || c != hc).then(|| at(hr, hc))
        }
        Pattern::CornerToCorner => {
            let corner = (r == 0 || r == rows - 1) && (c == 0 || c == cols - 1);
            corner.then(|| at(rows - 1 - r, cols - 1 - c))
        }
    }
}

pub fn run_traffic(cfg: &PlatformConfig, p: &TrafficParams) -> TrafficReport {
    let mut noc = NocState::new(cfg);
    let mcast = vec![u32::MAX; cfg.num_cores()];
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let (mut offered, mut accepted, mut delivered) = (0u64, 0u64, 0u64);
    let mut delivered_bytes = 0u64;
    let mut t = 0u64;
    while t < p.cycles {
        for i in 0..cfg.num_cores() {
            if !rng.gen_bool(p.rate.clamp(0.0, 1.0)) {
                continue;
            }
            let src = cfg.node_at(i);
            let Some(dst) = pick_dest(cfg, src, p.pattern, &mut rng) else { continue };
            offered += 1;
            let pkt = Packet {
                kind: PacketKind::Write,
                dest: encode_address(dst, (i as u32 & 0xFFF) * 8).expect("core dest"),
                data: t,
                width: Width::Double,
                src,
                inject_cycle: t,
            };
            if noc.try_inject(src, pkt, t) {
                accepted += 1;
            }
        }
        t += 1;
        for d in noc.step(cfg, t, &mcast) {
            delivered += 1;
            delivered_bytes += d.packet.width.bytes() as u64;
        }
    }
    let mut drain = 0u64;
    while noc.in_flight() > 0 && drain < DRAIN_LIMIT {
        t += 1;
        drain += 1;
        for d in noc.step(cfg, t, &mcast) {
            delivered += 1;
            delivered_bytes += d.packet.width.bytes() as u64;
        }
    }
    let k = &noc.counters;
    TrafficReport {
        pattern: p.pattern.name().to_string(),
        rate: p.rate,
        cycles: p.cycles,
        seed: p.seed,
        offered,
        accepted,
        delivered,
        delivered_bytes,
        throughput_bytes_per_cycle: delivered_bytes as f64 / p.cycles as f64,
        bisection_bytes_per_cycle: k.bisection_bytes as f64 / t as f64,
        mean_latency: k.latency.mean(),
        p99_latency: k.latency.percentile(0.99),
        max_latency: k.latency.max,
        drain_cycles: drain,
        in_flight_after_drain: noc.in_flight(),
        conserved: accepted == delivered && noc.in_flight() == 0,
    }
}
