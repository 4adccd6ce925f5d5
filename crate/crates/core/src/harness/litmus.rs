//! Memory-ordering litmus tests run as real programs on the simulated
//! platform. Each test reports the number of runs and observed
//! violations of the property it checks.

use serde::Serialize;

use crate::addr::encode_address;
use crate::isa::{assemble, Width};
use crate::platform::PlatformConfig;
use crate::sim::{RunOutcome, Simulation, StopCondition};

pub const LITMUS_NAMES: &[&str] = &[
    "same-dest-waw",
    "diff-dest-waw",
    "mp-barrier",
    "mp-no-barrier",
    "testset-mutex",
    "wand-barrier",
];

#[derive(Debug, Clone, Serialize)]
pub struct LitmusReport {
    pub name: String,
    pub runs: u64,
    pub violations: u64,
    pub pass: bool,
    pub detail: String,
}

pub fn run_litmus(name: &str, runs: u64) -> Option<LitmusReport> {
    match name {
        "same-dest-waw" => Some(same_dest_waw(runs)),
        "diff-dest-waw" => Some(diff_dest_waw(runs)),
        "mp-barrier" => Some(message_passing(runs, true)),
        "mp-no-barrier" => Some(message_passing(runs, false)),
        "testset-mutex" => Some(testset_mutex()),
        "wand-barrier" => Some(wand_barrier()),
        _ => None,
    }
}

fn mov32(reg: u8, value: u32) -> String {
    format!(" MOV R{reg}, #{}\n MOVT R{reg}, #{}\n", value & 0xFFFF, value >> 16)
}

fn load(s: &mut Simulation, core: usize, src: &str) {
    let img = assemble(src).unwrap_or_else(|e| panic!("litmus program: {e}"));
    s.load_image(core, &img);
    s.start_core(core, img.entry);
}

/// Two stores from one core to the same remote word must commit in
/// program order: the second value always wins.
fn same_dest_waw(runs: u64) -> LitmusReport {
    let mut violations = 0;
    for seed in 0..runs {
        let mut s = Simulation::new(PlatformConfig::e16());
        let dest = encode_address(s.cfg.node_at(5), 0x700).unwrap();
        let v1 = 1000 + (seed % 20000) as u32;
        let v2 = v1 + 1;
        let spin = seed % 23;
        let src = format!(
            "\
_start:
{} MOV R7, #{spin}
spin:
 SUB R7, R7, #1
 BGTE spin
 MOV R3, #{v1}
 STR R3, [R1]
 MOV R3, #{v2}
 STR R3, [R1]
 TRAP #0
",
            mov32(1, dest)
        );
        load(&mut s, 0, &src);
        s.run(StopCondition::CoreHalted(0), 50_000);
        s.run(StopCondition::Cycles(s.cycle + 100), 100_000);
        if s.mems[5].read(0x700, Width::Word) != v2 as u64 {
            violations += 1;
        }
    }
    LitmusReport {
        name: "same-dest-waw".into(),
        runs,
        violations,
        pass: violations == 0,
        detail: "stores from one source to one destination stay ordered".into(),
    }
}

/// Two stores from one core to different destinations carry no ordering
/// guarantee; a near store issued second lands before a far store issued
/// first. The test passes once reordering has been observed.
fn diff_dest_waw(runs: u64) -> LitmusReport {
    let mut observed = 0;
    for seed in 0..runs {
        let mut s = Simulation::new(PlatformConfig::e16());
        let far = encode_address(s.cfg.node_at(15), 0x700).unwrap();
        let near = encode_address(s.cfg.node_at(1), 0x700).unwrap();
        let v = 1 + (seed % 30000) as u32;
        let src = format!(
            "\
_start:
{}{} MOV R3, #{v}
 STR R3, [R1]
 STR R3, [R2]
 TRAP #0
",
            mov32(1, far),
            mov32(2, near)
        );
        load(&mut s, 0, &src);
        let (mut far_at, mut near_at) = (None, None);
        for _ in 0..50_000 {
            s.step();
            if far_at.is_none() && s.mems[15].read(0x700, Width::Word) == v as u64 {
                far_at = Some(s.cycle);
            }
            if near_at.is_none() && s.mems[1].read(0x700, Width::Word) == v as u64 {
                near_at = Some(s.cycle);
            }
            if far_at.is_some() && near_at.is_some() {
                break;
            }
        }
        if let (Some(f), Some(n)) = (far_at, near_at) {
            if n < f {
                observed += 1;
            }
        }
    }
    LitmusReport {
        name: "diff-dest-waw".into(),
        runs,
        violations: observed,
        pass: observed >= 1,
        detail: "program order is not arrival order across destinations".into(),
    }
}

/// Producer/consumer through a third core's memory. With the write-back
/// confirmation before raising the flag the consumer never reads stale
/// data; without it the test merely records what it saw.
fn message_passing(runs: u64, barrier: bool) -> LitmusReport {
    let mut violations = 0;
    for seed in 0..runs {
        let mut s = Simulation::new(PlatformConfig::e16());
        let shared = s.cfg.node_at(5);
        let data = encode_address(shared, 0x700).unwrap();
        let flag = encode_address(shared, 0x704).unwrap();
        let v = 1 + (seed % 30000) as u32;
        let wspin = seed % 19;
        let rspin = (seed / 19) % 13;
        let confirm = if barrier {
            "confirm:\n LDR R4, [R1]\n SUB R4, R4, R3\n BNE confirm\n"
        } else {
            ""
        };
        let writer = format!(
            "\
_start:
{}{} MOV R7, #{wspin}
wspin:
 SUB R7, R7, #1
 BGTE wspin
 MOV R3, #{v}
 STR R3, [R1]
{confirm} MOV R5, #1
 STR R5, [R2]
 TRAP #0
",
            mov32(1, data),
            mov32(2, flag)
        );
        let reader = format!(
            "\
_start:
{}{} MOV R7, #{rspin}
rspin:
 SUB R7, R7, #1
 BGTE rspin
poll:
 LDR R5, [R2]
 SUB R5, R5, #1
 BNE poll
 LDR R6, [R1]
 TRAP #0
",
            mov32(1, data),
            mov32(2, flag)
        );
        load(&mut s, 0, &writer);
        load(&mut s, 15, &reader);
        if s.run(StopCondition::AllHalted, 100_000) != RunOutcome::Satisfied
            || s.cores[15].regs[6] != v
        {
            violations += 1;
        }
    }
    let name = if barrier { "mp-barrier" } else { "mp-no-barrier" };
    LitmusReport {
        name: name.into(),
        runs,
        violations,
        // The unfenced variant is informational: it documents how often
        // the race was actually lost, not a pass/fail property.
        pass: if barrier { violations == 0 } else { true },
        detail: if barrier {
            "flag raised only after the data write is confirmed visible".into()
        } else {
            "no fence: stale reads are permitted and simply counted".into()
        },
    }
}

const MUTEX_ROUNDS: u32 = 64;

/// Every core increments a shared counter under a TESTSET spinlock.
/// Lost updates mean mutual exclusion failed.
fn testset_mutex() -> LitmusReport {
    let mut s = Simulation::new(PlatformConfig::e16());
    let lock = encode_address(s.cfg.node_at(0), 0x600).unwrap();
    let counter = encode_address(s.cfg.node_at(0), 0x604).unwrap();
    for core in 0..s.cfg.num_cores() {
        let src = format!(
            "\
_start:
{}{} MOV R7, #{MUTEX_ROUNDS}
round:
acquire:
 MOV R5, #1
 TESTSET R5, [R1, R0]
 ORR R5, R5, R5
 BNE acquire
 LDR R6, [R2]
 ADD R6, R6, #1
 STR R6, [R2]
 MOV R6, #0
 STR R6, [R1]
 SUB R7, R7, #1
 BNE round
 TRAP #0
",
            mov32(1, lock),
            mov32(2, counter)
        );
        load(&mut s, core, &src);
    }
    let runs = s.cfg.num_cores() as u64 * MUTEX_ROUNDS as u64;
    let outcome = s.run(StopCondition::AllHalted, 5_000_000);
    s.run(StopCondition::Cycles(s.cycle + 200), 10_000_000);
    let count = s.mems[0].read(0x604, Width::Word);
    let violations = if outcome != RunOutcome::Satisfied {
        runs
    } else {
        runs.abs_diff(count)
    };
    LitmusReport {
        name: "testset-mutex".into(),
        runs,
        violations,
        pass: violations == 0,
        detail: format!("16 cores x {MUTEX_ROUNDS} increments -> counter {count}"),
    }
}

/// Cores arrive at a WAND barrier at staggered times; the release
/// interrupt must hit every core in the same cycle.
fn wand_barrier() -> LitmusReport {
    let mut s = Simulation::new(PlatformConfig::e16());
    let n = s.cfg.num_cores();
    for core in 0..n {
        let spin = 7 * core;
        let src = format!(
            "\
.org 0x1C
 B handler
.org 0x40
_start:
 MOV R1, #{spin}
spin:
 SUB R1, R1, #1
 BGTE spin
 WAND
 IDLE
handler:
 MOVFS R6, CTIMER0
 TRAP #0
"
        );
        load(&mut s, core, &src);
        s.cores[core].ctimer[0] = u32::MAX; // free-running cycle marker
    }
    let outcome = s.run(StopCondition::AllHalted, 100_000);
    let stamps: Vec<u32> = (0..n).map(|i| s.cores[i].regs[6]).collect();
    let violations = if outcome != RunOutcome::Satisfied {
        n as u64
    } else {
        stamps.iter().filter(|&&t| t != stamps[0]).count() as u64
    };
    LitmusReport {
        name: "wand-barrier".into(),
        runs: n as u64,
        violations,
        pass: violations == 0,
        detail: format!("release stamps {stamps:?}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_test_runs_and_passes() {
        for name in LITMUS_NAMES {
            let r = run_litmus(name, 5).unwrap();
            assert!(r.pass, "{name}: {r:?}");
        }
    }

    #[test]
    fn unknown_name_is_rejected() {
        assert!(run_litmus("nonesuch", 1).is_none());
    }
}
