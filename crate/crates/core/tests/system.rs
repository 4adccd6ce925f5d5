//! Cross-core behaviour: remote memory, atomics, barriers, DMA, host I/O.

use episim_core::ecore::RunState;
use episim_core::isa::assemble;
use episim_core::sim::{RunOutcome, Simulation, StopCondition};
use episim_core::{encode_address, PlatformConfig};

fn sim(preset: &str) -> Simulation {
    Simulation::new(PlatformConfig::preset(preset).unwrap())
}

fn load_asm(s: &mut Simulation, core: usize, src: &str) {
    let img = assemble(src).unwrap_or_else(|e| panic!("{e}"));
    s.load_image(core, &img);
    s.start_core(core, img.entry);
}

/// `MOV`/`MOVT` pair materialising a 32-bit constant.
fn mov32(reg: u8, value: u32) -> String {
    format!(" MOV R{reg}, #{}\n MOVT R{reg}, #{}\n", value & 0xFFFF, value >> 16)
}

#[test]
fn remote_store_lands_in_peer_memory() {
    let mut s = sim("e16");
    let dest = encode_address(s.cfg.node_at(5), 0x200).unwrap();
    let src = format!(
        "_start:\n{} MOV R0, #4242\n STR R0, [R1]\n TRAP #0\n",
        mov32(1, dest)
    );
    load_asm(&mut s, 0, &src);
    assert_eq!(s.run(StopCondition::CoreHalted(0), 10_000), RunOutcome::Satisfied);
    // The store may still be in flight when the core halts.
    s.run(StopCondition::Cycles(s.cycle + 50), 20_000);
    assert_eq!(s.mems[5].read(0x200, episim_core::isa::Width::Word), 4242);
}

#[test]
fn remote_load_blocks_until_reply() {
    let mut s = sim("e16");
    let peer = s.cfg.node_at(10);
    let addr = encode_address(peer, 0x300).unwrap();
    s.host_write_u32(addr, 0xBEEF);
    let src = format!("_start:\n{} LDR R0, [R1]\n ADD R2, R0, #1\n TRAP #0\n", mov32(1, addr));
    load_asm(&mut s, 0, &src);
    assert_eq!(s.run(StopCondition::CoreHalted(0), 10_000), RunOutcome::Satisfied);
    assert_eq!(s.cores[0].regs[0], 0xBEEF);
    assert_eq!(s.cores[0].regs[2], 0xBEF0);
    // Round trip over the mesh: far more than a local load's 2 cycles.
    assert!(s.cycle > 10, "finished suspiciously fast ({} cycles)", s.cycle);
}

#[test]
fn testset_grants_exactly_one_winner() {
    let mut s = sim("e16");
    let lock = encode_address(s.cfg.node_at(0), 0x600).unwrap();
    for core in 0..s.cfg.num_cores() {
        // Each core tries the lock once and stores the old value at 0x500.
        let src = format!(
            "_start:\n{} MOV R5, #1\n TESTSET R5, [R1, R2]\n MOV R3, #1280\n STR R5, [R3]\n TRAP #0\n",
            mov32(1, lock)
        );
        load_asm(&mut s, core, &src);
    }
    assert_eq!(s.run(StopCondition::AllHalted, 100_000), RunOutcome::Satisfied);
    s.run(StopCondition::Cycles(s.cycle + 100), 200_000);
    let winners = (0..s.cfg.num_cores())
        .filter(|&i| s.mems[i].read(1280, episim_core::isa::Width::Word) == 0)
        .count();
    assert_eq!(winners, 1);
    assert_eq!(s.mems[0].read(0x600, episim_core::isa::Width::Word), 1);
}

#[test]
fn wand_barrier_releases_all_cores_in_the_same_cycle() {
    let mut s = sim("e16");
    let n = s.cfg.num_cores();
    for core in 0..n {
        // Slot 7 (offset 0x1C) vectors to the release handler. Spin for a
        // core-dependent time first so arrivals are staggered.
        let spin = 5 * core;
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
        load_asm(&mut s, core, &src);
        s.cores[core].ctimer[0] = u32::MAX; // free-running cycle marker
    }
    assert_eq!(s.run(StopCondition::AllHalted, 100_000), RunOutcome::Satisfied);
    let stamps: Vec<u32> = (0..n).map(|i| s.cores[i].regs[6]).collect();
    assert!(stamps.windows(2).all(|w| w[0] == w[1]), "release skewed: {stamps:?}");
}

#[test]
fn sync_wakes_idle_cores() {
    let mut s = sim("e16");
    // Core 0 raises SYNC; everyone else idles until slot 0 fires.
    for core in 1..s.cfg.num_cores() {
        load_asm(
            &mut s,
            core,
            "\
.org 0x0
 B handler
.org 0x40
_start:
 IDLE
handler:
 TRAP #5
",
        );
    }
    load_asm(&mut s, 0, ".org 0x40\n_start:\n SYNC\n TRAP #5\n");
    assert_eq!(s.run(StopCondition::AllHalted, 10_000), RunOutcome::Satisfied);
    for c in &s.cores {
        assert_eq!(c.halted(), Some(5));
    }
}

#[test]
fn dma_copies_block_to_remote_core() {
    let mut s = sim("e16");
    let dest_node = s.cfg.node_at(3);
    let dest = encode_address(dest_node, 0x800).unwrap();
    for k in 0..8u32 {
        s.host_write_u32(encode_address(s.cfg.node_at(0), 0x400 + 4 * k).unwrap(), 100 + k);
    }
    let src = format!(
        "\
.org 0x14
 B done            ; DMA0 completion vector
.org 0x40
_start:
 MOV R1, #1024
 MOVTS DMA0SRC, R1
{} MOVTS DMA0DST, R2
 MOV R3, #8
 MOVTS DMA0COUNT, R3
{} MOVTS DMA0STRIDE, R4
{} MOVTS DMA0CONFIG, R5
wait:
 IDLE
 B wait
done:
 TRAP #0
",
        mov32(2, dest),
        mov32(4, 0x0004_0004),
        mov32(5, 0x8000_0002),
    );
    load_asm(&mut s, 0, &src);
    assert_eq!(s.run(StopCondition::CoreHalted(0), 50_000), RunOutcome::Satisfied);
    s.run(StopCondition::Cycles(s.cycle + 100), 100_000);
    for k in 0..8u32 {
        assert_eq!(
            s.mems[3].read(0x800 + 4 * k, episim_core::isa::Width::Word),
            (100 + k) as u64,
            "element {k}"
        );
    }
}

#[test]
fn host_writes_can_ride_the_mesh() {
    let mut cfg = PlatformConfig::preset("parallella").unwrap();
    cfg.host_via_mesh = true;
    let mut s = Simulation::new(cfg);
    let addr = encode_address(s.cfg.node_at(7), 0x123 & !3).unwrap();
    s.host_write_u32(addr, 77);
    assert_eq!(s.host_read_u32(addr), 0, "not yet delivered");
    s.run(StopCondition::Cycles(200), 300);
    assert_eq!(s.host_read_u32(addr), 77);
}

#[test]
fn report_schema_is_stable() {
    let mut s = sim("e16");
    load_asm(&mut s, 0, "_start:\n TRAP #3\n");
    let outcome = s.run(StopCondition::CoreHalted(0), 1000);
    let report = s.report(outcome);
    let json = serde_json::to_value(&report).unwrap();
    for key in ["platform", "rows", "cols", "cycles", "outcome", "cores", "network"] {
        assert!(json.get(key).is_some(), "missing {key}");
    }
    let core0 = &json["cores"][0];
    for key in ["row", "col", "state", "halt_code", "pc", "retired", "active_cycles"] {
        assert!(core0.get(key).is_some(), "missing cores[0].{key}");
    }
    for key in [
        "injected",
        "ejected",
        "dropped",
        "in_flight",
        "mean_latency",
        "p99_latency",
        "bisection_bytes",
    ] {
        assert!(json["network"].get(key).is_some(), "missing network.{key}");
    }
    assert_eq!(json["cores"][0]["halt_code"], 3);
    assert_eq!(json["outcome"], "ok");
}

#[test]
fn message_passing_needs_the_barrier() {
    // Writer pushes data then flag to a third core; reader polls the flag
    // then fetches the data. With the write-back confirmation ("barrier")
    // the reader must never observe a stale value.
    let mut s = sim("e16");
    let shared = s.cfg.node_at(5);
    let data = encode_address(shared, 0x700).unwrap();
    let flag = encode_address(shared, 0x704).unwrap();
    let writer = format!(
        "\
_start:
{} {} MOV R3, #1234
 STR R3, [R1]
confirm:
 LDR R4, [R1]      ; read back: data visible before flag is raised
 SUB R4, R4, R3
 BNE confirm
 MOV R5, #1
 STR R5, [R2]
 TRAP #0
",
        mov32(1, data),
        mov32(2, flag)
    );
    let reader = format!(
        "\
_start:
{} {} poll:
 LDR R5, [R2]
 SUB R5, R5, #1
 BNE poll
 LDR R6, [R1]
 TRAP #0
",
        mov32(1, data),
        mov32(2, flag)
    );
    load_asm(&mut s, 0, &writer);
    load_asm(&mut s, 15, &reader);
    assert_eq!(s.run(StopCondition::AllHalted, 100_000), RunOutcome::Satisfied);
    assert_eq!(s.cores[15].regs[6], 1234);
    assert_eq!(s.cores[15].state, RunState::Halted(0));
}
