//! Demo kernels the throughput measurements run: a dual-issue FMADD
//! stream and a deliberately branchy control loop.

use crate::isa::assemble;
use crate::platform::PlatformConfig;
use crate::sim::{Simulation, StopCondition};

/// Straight-line FMADD/ADD pairs. Eight rotating accumulators keep the
/// FPU dependency distance above its latency, so a well-behaved pipeline
/// sustains one float and one integer op per cycle.
pub fn fmadd_kernel(pairs: usize) -> String {
    let mut s = String::from(".org 0x100\n_start:\n");
    // R20 = 1.0f
    s.push_str(" MOV R20, #0\n MOVT R20, #16256\n");
    for k in 0..8 {
        s.push_str(&format!(" MOV R{k}, #0\n"));
    }
    for i in 0..pairs {
        s.push_str(&format!(" FMADD R{}, R20, R20\n ADD R10, R10, #1\n", i % 8));
    }
    s.push_str(" TRAP #0\n");
    s
}

/// A tight counted loop: two ALU ops and a taken backward branch per
/// iteration. Every branch eats the redirect penalty, so IPC collapses
/// relative to the straight-line kernel.
pub fn branchy_kernel(iters: u32) -> String {
    format!(
        "\
.org 0x100
_start:
 MOV R1, #{iters}
loop:
 ADD R2, R2, #1
 SUB R1, R1, #1
 BNE loop
 TRAP #0
"
    )
}

/// Instructions retired per cycle for `src` on one core of `cfg`.
pub fn measure_ipc(cfg: &PlatformConfig, src: &str) -> (f64, u64, u64) {
    let mut s = Simulation::new(cfg.clone());
    let img = assemble(src).expect("kernel assembles");
    s.load_image(0, &img);
    s.start_core(0, img.entry);
    s.run(StopCondition::CoreHalted(0), 10_000_000);
    assert!(s.cores[0].halted().is_some(), "kernel did not finish");
    let retired = s.cores[0].retired;
    (retired as f64 / s.cycle as f64, retired, s.cycle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fmadd_stream_dual_issues() {
        let (ipc, retired, cycles) = measure_ipc(&PlatformConfig::e16(), &fmadd_kernel(512));
        assert!(ipc >= 1.9, "ipc {ipc:.3} ({retired} in {cycles})");
    }

    #[test]
    fn branchy_loop_pays_the_redirect_penalty() {
        let (ipc, ..) = measure_ipc(&PlatformConfig::e16(), &branchy_kernel(500));
        // 3 instructions per iteration over ~6 cycles (redirect costs 3).
        assert!(ipc < 0.7, "branchy ipc {ipc:.3}");
    }
}
