//! The core engine: a dual-issue in-order scalar pipeline with an IEEE
//! binary32 FPU, modelled with a register scoreboard rather than explicit
//! pipeline stages.
//!
//! Instruction semantics apply at issue; each destination register gets a
//! ready-cycle stamp equal to the producing instruction's latency, and an
//! instruction stalls until its sources (and destination, for in-order
//! completion) are ready. Latencies: integer ops 1 cycle, local loads 2
//! (one load-use stall), FPU ops 3 in truncate mode and 4 in
//! round-to-nearest. A taken branch or interrupt dispatch redirects fetch
//! and costs 3 dead cycles. Condition flags are forwarded immediately.
//!
//! Up to two instructions issue per cycle: one FPU plus one integer or
//! load/store (NOP pairs with either), with no dependences inside the
//! pair and at most one memory operation.
//!
//! Remote loads and TESTSET block the core until the reply returns; there
//! is one outstanding read per core. Remote stores retry under mesh
//! pushback without blocking retirement of earlier instructions.

use std::collections::VecDeque;

use crate::addr::{encode_address, NodeAddress, Region, LOCAL_SPACE};
use crate::dma::{region_of, DmaChannel, DmaEvent};
use crate::fpu::{self, Rounding};
use crate::isa::{
    decode_instruction, eval_condition, issue_pair_allowed, length_of, AddrMode, Alu2Op, Alu3Op,
    AluImmOp, Instruction, SpecialReg, Width, LINK_REG,
};
use crate::mem::{aligned, BankArbiter, Scratchpad};
use crate::mesh::{NocState, Packet, PacketKind, ReplyTag};
use crate::platform::PlatformConfig;

/// Interrupt slots, highest priority first. The vector table occupies
/// the first ten words of local memory.
pub const IRQ_SYNC: u8 = 0;
pub const IRQ_SWEXCEPT: u8 = 1;
pub const IRQ_MEMFAULT: u8 = 2;
pub const IRQ_TIMER0: u8 = 3;
pub const IRQ_TIMER1: u8 = 4;
pub const IRQ_DMA0: u8 = 5;
pub const IRQ_DMA1: u8 = 6;
pub const IRQ_WAND: u8 = 7;
pub const IRQ_USER: u8 = 8;

/// Halt code reported for BKPT (TRAP codes are the 8-bit operand).
pub const HALT_BKPT: u16 = 0x100;

/// Cycles lost to a taken branch, interrupt entry or RTI.
pub const BRANCH_PENALTY: u64 = 3;

/// Integer and floating-point condition flags.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Flags {
    pub an: bool,
    pub az: bool,
    pub av: bool,
    pub ac: bool,
    pub bn: bool,
    pub bz: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunState {
    Off,
    Running,
    Idle,
    /// Blocked on the reply to a remote load or TESTSET.
    WaitingReply,
    Halted(u16),
}

enum Exec {
    /// Retired; the second issue slot may proceed.
    Done,
    /// Retired and ended the cycle (redirect, halt, wait).
    Break,
    /// Not issued this cycle; retry.
    Stall,
}

#[derive(Debug, Clone)]
pub struct CoreEngine {
    pub node: NodeAddress,
    pub regs: [u32; 64],
    reg_ready: [u64; 64],
    pub pc: u32,
    fetch_buf: VecDeque<u16>,
    fetch_addr: u32,
    pub flags: Flags,
    pub sticky_invalid: bool,
    pub sticky_underflow: bool,
    pub sticky_overflow: bool,
    pub gie: bool,
    pub config: u32,
    pub imask: u32,
    pub ilat: u32,
    pub ipend: u32,
    pub iret: u32,
    pub ctimer: [u32; 2],
    pub multicast: u32,
    pub dma: [DmaChannel; 2],
    pub state: RunState,
    stall_until: u64,
    pub retired: u64,
    pub active_cycles: u64,
    /// Latched barrier/debug requests collected by the platform at the
    /// end of the cycle.
    pub wand_latched: bool,
    pub sync_request: bool,
    pub mbkpt_request: bool,
}

impl CoreEngine {
    pub fn new(node: NodeAddress) -> CoreEngine {
        CoreEngine {
            node,
            regs: [0; 64],
            reg_ready: [0; 64],
            pc: 0,
            fetch_buf: VecDeque::new(),
            fetch_addr: 0,
            flags: Flags::default(),
            sticky_invalid: false,
            sticky_underflow: false,
            sticky_overflow: false,
            gie: true,
            config: 0,
            imask: 0,
            ilat: 0,
            ipend: 0,
            iret: 0,
            ctimer: [0; 2],
            multicast: u32::MAX, // matches no sane group until programmed
            dma: Default::default(),
            state: RunState::Off,
            stall_until: 0,
            retired: 0,
            active_cycles: 0,
            wand_latched: false,
            sync_request: false,
            mbkpt_request: false,
        }
    }

    pub fn rounding(&self) -> Rounding {
        if self.config & 1 != 0 { Rounding::Truncate } else { Rounding::Nearest }
    }

    pub fn coreid(&self) -> u32 {
        ((self.node.row as u32) << 6) | self.node.col as u32
    }

    pub fn status(&self) -> u32 {
        (self.flags.an as u32)
            | (self.flags.az as u32) << 1
            | (self.flags.av as u32) << 2
            | (self.flags.ac as u32) << 3
            | (self.flags.bn as u32) << 4
            | (self.flags.bz as u32) << 5
            | (self.sticky_invalid as u32) << 6
            | (self.sticky_underflow as u32) << 7
            | (self.sticky_overflow as u32) << 8
            | (self.gie as u32) << 9
    }

    fn set_status(&mut self, v: u32) {
        self.flags.an = v & 1 != 0;
        self.flags.az = v & 2 != 0;
        self.flags.av = v & 4 != 0;
        self.flags.ac = v & 8 != 0;
        self.flags.bn = v & 16 != 0;
        self.flags.bz = v & 32 != 0;
        self.sticky_invalid = v & 64 != 0;
        self.sticky_underflow = v & 128 != 0;
        self.sticky_overflow = v & 256 != 0;
    }

    /// Begin executing at `entry`.
    pub fn start(&mut self, entry: u32) {
        self.pc = entry;
        self.fetch_addr = entry;
        self.fetch_buf.clear();
        self.state = RunState::Running;
    }

    pub fn raise_irq(&mut self, slot: u8) {
        self.ilat |= 1 << slot;
    }

    pub fn halted(&self) -> Option<u16> {
        match self.state {
            RunState::Halted(c) => Some(c),
            _ => None,
        }
    }

    /// Reply to this core's outstanding remote load.
    pub fn complete_read(&mut self, rd: u8, data: u64, width: Width, cycle: u64) {
        debug_assert_eq!(self.state, RunState::WaitingReply);
        self.write_reg_pair(rd, data, width, cycle + 1);
        self.state = RunState::Running;
    }

    fn write_reg_pair(&mut self, rd: u8, data: u64, width: Width, ready: u64) {
        self.regs[rd as usize] = data as u32;
        self.reg_ready[rd as usize] = ready;
        if width == Width::Double {
            self.regs[rd as usize + 1] = (data >> 32) as u32;
            self.reg_ready[rd as usize + 1] = ready;
        }
    }

    pub fn cycle(
        &mut self,
        cycle: u64,
        mem: &mut Scratchpad,
        arb: &mut BankArbiter,
        noc: &mut NocState,
        cfg: &PlatformConfig,
    ) {
        if self.state == RunState::Off {
            return;
        }
        self.active_cycles += 1;
        for ch in 0..2 {
            let mut dma = std::mem::take(&mut self.dma[ch]);
            let ev = dma.cycle(ch as u8, self.node, mem, arb, noc, cfg, cycle);
            self.dma[ch] = dma;
            match ev {
                DmaEvent::None => {}
                DmaEvent::Complete => self.raise_irq(IRQ_DMA0 + ch as u8),
                DmaEvent::Fault(_) => self.raise_irq(IRQ_MEMFAULT),
            }
        }
        self.tick_timers();
        if self.state == RunState::Idle && self.wake_pending() {
            self.state = RunState::Running;
        }
        if self.state == RunState::Running && self.stall_until <= cycle {
            if !self.try_dispatch_interrupt(cycle) {
                self.issue(cycle, mem, arb, noc, cfg);
            }
        }
        if !matches!(self.state, RunState::Halted(_)) {
            self.refill(mem, arb);
        }
    }

    fn tick_timers(&mut self) {
        for t in 0..2 {
            if self.ctimer[t] > 0 {
                self.ctimer[t] -= 1;
                if self.ctimer[t] == 0 {
                    self.raise_irq(IRQ_TIMER0 + t as u8);
                }
            }
        }
    }

    fn wake_pending(&self) -> bool {
        self.ilat & !(self.imask & !1) != 0
    }

    fn try_dispatch_interrupt(&mut self, cycle: u64) -> bool {
        // Slot 0 cannot be masked; everything else honours IMASK and GIE.
        let unmasked = self.ilat & !(self.imask & !1);
        let pending = if self.gie { unmasked } else { unmasked & 1 };
        if pending == 0 {
            return false;
        }
        let slot = pending.trailing_zeros();
        if self.ipend != 0 && slot >= self.ipend.trailing_zeros() {
            return false; // an equal-or-higher-priority handler is live
        }
        self.ilat &= !(1 << slot);
        self.ipend |= 1 << slot;
        self.iret = self.pc;
        self.gie = false;
        self.redirect((slot * 4) as u32, cycle);
        true
    }

    fn redirect(&mut self, target: u32, cycle: u64) {
        self.pc = target;
        self.fetch_addr = target;
        self.fetch_buf.clear();
        self.stall_until = cycle + 1 + BRANCH_PENALTY;
    }

    fn refill(&mut self, mem: &mut Scratchpad, arb: &mut BankArbiter) {
        if self.fetch_buf.len() > 4 {
            return;
        }
        let line = self.fetch_addr & !7;
        if !mem.in_range(line, 8) {
            return;
        }
        if !arb.request(line) {
            return;
        }
        let mut a = self.fetch_addr & !1;
        while a < line + 8 {
            self.fetch_buf.push_back(mem.read(a, Width::Half) as u16);
            a += 2;
        }
        self.fetch_addr = line + 8;
    }

    fn peek_instr(&self) -> Option<(Instruction, usize)> {
        let h0 = *self.fetch_buf.front()?;
        let units = length_of(h0).halfwords();
        let buf = if units == 2 {
            [h0, *self.fetch_buf.get(1)?]
        } else {
            [h0, 0]
        };
        let (instr, len) = decode_instruction(&buf[..units]).ok()?;
        Some((instr, len.halfwords()))
    }

    fn ready(&self, instr: &Instruction, cycle: u64) -> bool {
        let srcs_ok = instr.src_regs().iter().all(|&r| self.reg_ready[r as usize] <= cycle);
        let dest_ok = match instr.dest_reg() {
            Some(rd) => {
                self.reg_ready[rd as usize] <= cycle
                    && match instr {
                        Instruction::Load { width: Width::Double, .. } if rd < 63 => {
                            self.reg_ready[rd as usize + 1] <= cycle
                        }
                        _ => true,
                    }
            }
            None => true,
        };
        srcs_ok && dest_ok
    }

    fn issue(
        &mut self,
        cycle: u64,
        mem: &mut Scratchpad,
        arb: &mut BankArbiter,
        noc: &mut NocState,
        cfg: &PlatformConfig,
    ) {
        let Some((first, units1)) = self.peek_instr() else { return };
        if !self.ready(&first, cycle) {
            return;
        }
        match self.exec(&first, units1, cycle, mem, arb, noc, cfg) {
            Exec::Stall | Exec::Break => return,
            Exec::Done => {}
        }
        let Some((second, units2)) = self.peek_instr() else { return };
        if !issue_pair_allowed(&first, &second) || !self.ready(&second, cycle) {
            return;
        }
        let _ = self.exec(&second, units2, cycle, mem, arb, noc, cfg);
    }

    fn consume(&mut self, units: usize) {
        for _ in 0..units {
            self.fetch_buf.pop_front();
        }
        self.pc += 2 * units as u32;
        self.retired += 1;
    }

    fn fpu_latency(&self) -> u64 {
        match self.rounding() {
            Rounding::Truncate => 3,
            Rounding::Nearest => 4,
        }
    }

    fn set_int_flags(&mut self, r: u32) {
        self.flags.an = r & 0x8000_0000 != 0;
        self.flags.az = r == 0;
    }

    fn apply_fp(&mut self, rd: u8, res: fpu::FpResult, cycle: u64) {
        self.regs[rd as usize] = res.value.to_bits();
        self.reg_ready[rd as usize] = cycle + self.fpu_latency();
        self.flags.bn = res.value.is_sign_negative();
        self.flags.bz = res.value == 0.0;
        self.sticky_invalid |= res.invalid;
        self.sticky_underflow |= res.underflow;
        self.sticky_overflow |= res.overflow;
    }

    fn sreg_read(&self, sreg: SpecialReg) -> u32 {
        use SpecialReg::*;
        match sreg {
            Config => self.config,
            Status => self.status(),
            Pc => self.pc,
            CoreId => self.coreid(),
            Imask => self.imask,
            Ilat => self.ilat,
            Ipend => self.ipend,
            Iret => self.iret,
            CTimer0 => self.ctimer[0],
            CTimer1 => self.ctimer[1],
            Multicast => self.multicast,
            Dma0Src => self.dma[0].read_reg(0),
            Dma0Dst => self.dma[0].read_reg(1),
            Dma0Count => self.dma[0].read_reg(2),
            Dma0Stride => self.dma[0].read_reg(3),
            Dma0Config => self.dma[0].read_reg(4),
            Dma1Src => self.dma[1].read_reg(0),
            Dma1Dst => self.dma[1].read_reg(1),
            Dma1Count => self.dma[1].read_reg(2),
            Dma1Stride => self.dma[1].read_reg(3),
            Dma1Config => self.dma[1].read_reg(4),
        }
    }

    /// Returns false for registers that may not be written.
    fn sreg_write(&mut self, sreg: SpecialReg, v: u32) -> bool {
        use SpecialReg::*;
        match sreg {
            Config => self.config = v,
            Status => self.set_status(v),
            Pc | CoreId | Ipend => return false,
            Imask => self.imask = v,
            Ilat => self.ilat = v,
            Iret => self.iret = v,
            CTimer0 => self.ctimer[0] = v,
            CTimer1 => self.ctimer[1] = v,
            Multicast => self.multicast = v,
            Dma0Src => drop(self.dma[0].write_reg(0, v)),
            Dma0Dst => drop(self.dma[0].write_reg(1, v)),
            Dma0Count => drop(self.dma[0].write_reg(2, v)),
            Dma0Stride => drop(self.dma[0].write_reg(3, v)),
            Dma0Config => {
                if self.dma[0].write_reg(4, v) && self.dma[0].read_reg(2) == 0 {
                    self.raise_irq(IRQ_DMA0); // zero-length transfer
                }
            }
            Dma1Src => drop(self.dma[1].write_reg(0, v)),
            Dma1Dst => drop(self.dma[1].write_reg(1, v)),
            Dma1Count => drop(self.dma[1].write_reg(2, v)),
            Dma1Stride => drop(self.dma[1].write_reg(3, v)),
            Dma1Config => {
                if self.dma[1].write_reg(4, v) && self.dma[1].read_reg(2) == 0 {
                    self.raise_irq(IRQ_DMA1);
                }
            }
        }
        true
    }

    fn exec(
        &mut self,
        instr: &Instruction,
        units: usize,
        cycle: u64,
        mem: &mut Scratchpad,
        arb: &mut BankArbiter,
        noc: &mut NocState,
        cfg: &PlatformConfig,
    ) -> Exec {
        use Instruction as I;
        let mode = self.rounding();
        let f32_of = |v: u32| f32::from_bits(v);
        match *instr {
            I::Nop => {
                self.consume(units);
                Exec::Done
            }
            I::Alu3 { op, rd, rn, rm } => {
                let a = self.regs[rn as usize];
                let b = self.regs[rm as usize];
                match op {
                    Alu3Op::Add | Alu3Op::Sub => {
                        let r = self.add_sub(a, b, op == Alu3Op::Sub);
                        self.regs[rd as usize] = r;
                        self.reg_ready[rd as usize] = cycle + 1;
                    }
                    Alu3Op::And | Alu3Op::Orr | Alu3Op::Eor | Alu3Op::Lsl | Alu3Op::Lsr
                    | Alu3Op::Asr => {
                        let r = match op {
                            Alu3Op::And => a & b,
                            Alu3Op::Orr => a | b,
                            Alu3Op::Eor => a ^ b,
                            Alu3Op::Lsl => a.wrapping_shl(b & 31),
                            Alu3Op::Lsr => a.wrapping_shr(b & 31),
                            _ => (a as i32).wrapping_shr(b & 31) as u32,
                        };
                        self.regs[rd as usize] = r;
                        self.reg_ready[rd as usize] = cycle + 1;
                        self.set_int_flags(r);
                    }
                    Alu3Op::FAdd | Alu3Op::FSub | Alu3Op::FMul | Alu3Op::FMadd | Alu3Op::FMsub => {
                        let x = f32_of(a);
                        let y = f32_of(b);
                        let acc = f32_of(self.regs[rd as usize]);
                        let res = match op {
                            Alu3Op::FAdd => fpu::fadd(x, y, mode),
                            Alu3Op::FSub => fpu::fsub(x, y, mode),
                            Alu3Op::FMul => fpu::fmul(x, y, mode),
                            Alu3Op::FMadd => fpu::fmadd(acc, x, y, mode),
                            _ => fpu::fmsub(acc, x, y, mode),
                        };
                        self.apply_fp(rd, res, cycle);
                    }
                }
                self.consume(units);
                Exec::Done
            }
            I::Alu2 { op, rd, rn } => {
                let a = self.regs[rn as usize];
                match op {
                    Alu2Op::Bitr => {
                        let r = a.reverse_bits();
                        self.regs[rd as usize] = r;
                        self.reg_ready[rd as usize] = cycle + 1;
                        self.set_int_flags(r);
                    }
                    Alu2Op::Fix => {
                        let (r, invalid) = fpu::fix(f32_of(a));
                        self.regs[rd as usize] = r as u32;
                        self.reg_ready[rd as usize] = cycle + self.fpu_latency();
                        self.set_int_flags(r as u32);
                        self.sticky_invalid |= invalid;
                    }
                    Alu2Op::Float => {
                        let res = fpu::float(a as i32, mode);
                        self.apply_fp(rd, res, cycle);
                    }
                    Alu2Op::FAbs => {
                        let v = fpu::fabs(f32_of(a));
                        self.regs[rd as usize] = v.to_bits();
                        self.reg_ready[rd as usize] = cycle + self.fpu_latency();
                        self.flags.bn = false;
                        self.flags.bz = v == 0.0;
                    }
                }
                self.consume(units);
                Exec::Done
            }
            I::AluImm { op, rd, rn, imm } => {
                let a = self.regs[rn as usize];
                let r = match op {
                    AluImmOp::Add => {
                        let r = self.add_sub(a, imm as u32, false);
                        self.regs[rd as usize] = r;
                        self.reg_ready[rd as usize] = cycle + 1;
                        self.consume(units);
                        return Exec::Done;
                    }
                    AluImmOp::Sub => {
                        let r = self.add_sub(a, imm as u32, true);
                        self.regs[rd as usize] = r;
                        self.reg_ready[rd as usize] = cycle + 1;
                        self.consume(units);
                        return Exec::Done;
                    }
                    AluImmOp::Lsl => a.wrapping_shl(imm as u32),
                    AluImmOp::Lsr => a.wrapping_shr(imm as u32),
                    AluImmOp::Asr => (a as i32).wrapping_shr(imm as u32) as u32,
                };
                self.regs[rd as usize] = r;
                self.reg_ready[rd as usize] = cycle + 1;
                self.set_int_flags(r);
                self.consume(units);
                Exec::Done
            }
            I::MovImm { rd, imm } => {
                self.regs[rd as usize] = imm as u32;
                self.reg_ready[rd as usize] = cycle + 1;
                self.consume(units);
                Exec::Done
            }
            I::MovT { rd, imm } => {
                let r = (self.regs[rd as usize] & 0xFFFF) | ((imm as u32) << 16);
                self.regs[rd as usize] = r;
                self.reg_ready[rd as usize] = cycle + 1;
                self.consume(units);
                Exec::Done
            }
            I::MovCond { cond, rd, rn } => {
                if eval_condition(cond, &self.flags) {
                    self.regs[rd as usize] = self.regs[rn as usize];
                    self.reg_ready[rd as usize] = cycle + 1;
                }
                self.consume(units);
                Exec::Done
            }
            I::MovFromSpecial { rd, sreg } => {
                self.regs[rd as usize] = self.sreg_read(sreg);
                self.reg_ready[rd as usize] = cycle + 1;
                self.consume(units);
                Exec::Done
            }
            I::MovToSpecial { sreg, rn } => {
                let v = self.regs[rn as usize];
                self.consume(units);
                if !self.sreg_write(sreg, v) {
                    self.raise_irq(IRQ_SWEXCEPT);
                }
                Exec::Done
            }
            I::Load { rd, rn, width, mode } => self.mem_op(
                MemOp::Load { rd },
                rn,
                width,
                mode,
                units,
                cycle,
                mem,
                arb,
                noc,
                cfg,
            ),
            I::Store { rd, rn, width, mode } => self.mem_op(
                MemOp::Store { rd },
                rn,
                width,
                mode,
                units,
                cycle,
                mem,
                arb,
                noc,
                cfg,
            ),
            I::TestSet { rd, rn, rm } => self.mem_op(
                MemOp::TestSet { rd },
                rn,
                Width::Word,
                AddrMode::Index(rm),
                units,
                cycle,
                mem,
                arb,
                noc,
                cfg,
            ),
            I::Branch { cond, disp } => {
                if eval_condition(cond, &self.flags) {
                    let target = self.pc.wrapping_add(disp as u32);
                    self.retired += 1;
                    self.redirect(target, cycle);
                    Exec::Break
                } else {
                    self.consume(units);
                    Exec::Done
                }
            }
            I::BranchLink { disp } => {
                let target = self.pc.wrapping_add(disp as u32);
                self.regs[LINK_REG as usize] = self.pc + 2 * units as u32;
                self.reg_ready[LINK_REG as usize] = cycle + 1;
                self.retired += 1;
                self.redirect(target, cycle);
                Exec::Break
            }
            I::JumpReg { rn } => {
                let target = self.regs[rn as usize];
                self.retired += 1;
                self.redirect(target & !1, cycle);
                Exec::Break
            }
            I::JumpLinkReg { rn } => {
                let target = self.regs[rn as usize];
                self.regs[LINK_REG as usize] = self.pc + 2 * units as u32;
                self.reg_ready[LINK_REG as usize] = cycle + 1;
                self.retired += 1;
                self.redirect(target & !1, cycle);
                Exec::Break
            }
            I::Idle => {
                self.consume(units);
                self.state = RunState::Idle;
                Exec::Break
            }
            I::Trap(n) => {
                self.consume(units);
                self.state = RunState::Halted(n as u16);
                Exec::Break
            }
            I::Bkpt | I::Mbkpt => {
                if matches!(instr, I::Mbkpt) {
                    self.mbkpt_request = true;
                }
                self.consume(units);
                self.state = RunState::Halted(HALT_BKPT);
                Exec::Break
            }
            I::Rti => {
                let target = self.iret;
                if self.ipend != 0 {
                    self.ipend &= self.ipend - 1; // clear the live handler
                }
                self.gie = true;
                self.retired += 1;
                self.redirect(target, cycle);
                Exec::Break
            }
            I::Gid => {
                self.gie = false;
                self.consume(units);
                Exec::Done
            }
            I::Gie => {
                self.gie = true;
                self.consume(units);
                Exec::Done
            }
            I::Unimpl => {
                self.consume(units);
                self.raise_irq(IRQ_SWEXCEPT);
                Exec::Done
            }
            I::Sync => {
                self.sync_request = true;
                self.consume(units);
                Exec::Done
            }
            I::Wand => {
                self.wand_latched = true;
                self.consume(units);
                Exec::Done
            }
        }
    }

    fn add_sub(&mut self, a: u32, b: u32, sub: bool) -> u32 {
        let (r, av, ac) = if sub {
            let r = a.wrapping_sub(b);
            (r, ((a ^ b) & (a ^ r)) >> 31 != 0, a >= b)
        } else {
            let r = a.wrapping_add(b);
            (r, ((a ^ r) & (b ^ r)) >> 31 != 0, (a as u64 + b as u64) > u32::MAX as u64)
        };
        self.flags.an = r & 0x8000_0000 != 0;
        self.flags.az = r == 0;
        self.flags.av = av;
        self.flags.ac = ac;
        r
    }

    #[allow(clippy::too_many_arguments)]
    fn mem_op(
        &mut self,
        what: MemOp,
        rn: u8,
        width: Width,
        mode: AddrMode,
        units: usize,
        cycle: u64,
        mem: &mut Scratchpad,
        arb: &mut BankArbiter,
        noc: &mut NocState,
        cfg: &PlatformConfig,
    ) -> Exec {
        let base = self.regs[rn as usize];
        let (ea, writeback) = match mode {
            AddrMode::Displacement(d) => (base.wrapping_add(d as u32), None),
            AddrMode::Index(rm) => (base.wrapping_add(self.regs[rm as usize]), None),
            AddrMode::Postmodify(d) => (base, Some(base.wrapping_add(d as u32))),
        };
        if !aligned(ea, width) {
            self.consume(units);
            self.raise_irq(IRQ_SWEXCEPT);
            return Exec::Done;
        }
        if matches!(what, MemOp::Load { rd } | MemOp::TestSet { rd } if width == Width::Double && rd == 63)
        {
            self.consume(units);
            self.raise_irq(IRQ_SWEXCEPT);
            return Exec::Done;
        }
        let region = region_of(ea, cfg, self.node);
        let result = match region {
            Region::LocalCore => {
                let off = ea & (LOCAL_SPACE - 1);
                if !mem.in_range(off, width.bytes()) {
                    self.consume(units);
                    self.raise_irq(IRQ_MEMFAULT);
                    return Exec::Done;
                }
                if !arb.request(off) {
                    return Exec::Stall;
                }
                match what {
                    MemOp::Load { rd } => {
                        let v = mem.read(off, width);
                        self.write_reg_pair(rd, v, width, cycle + 2);
                    }
                    MemOp::Store { rd } => {
                        let v = self.store_data(rd, width);
                        mem.write(off, width, v);
                    }
                    MemOp::TestSet { rd } => {
                        let old = mem.read(off, width);
                        if old == 0 {
                            mem.write(off, width, self.regs[rd as usize] as u64);
                        }
                        self.write_reg_pair(rd, old, width, cycle + 2);
                    }
                }
                Exec::Done
            }
            Region::RemoteCore | Region::OffChipWindow(_) => {
                let packet = match what {
                    MemOp::Load { rd } => Packet {
                        kind: PacketKind::ReadRequest {
                            tag: ReplyTag::CoreLoad { rd },
                            testset: None,
                        },
                        dest: ea,
                        data: 0,
                        width,
                        src: self.node,
                        inject_cycle: cycle,
                    },
                    MemOp::TestSet { rd } => Packet {
                        kind: PacketKind::ReadRequest {
                            tag: ReplyTag::CoreLoad { rd },
                            testset: Some(self.regs[rd as usize] as u64),
                        },
                        dest: ea,
                        data: 0,
                        width,
                        src: self.node,
                        inject_cycle: cycle,
                    },
                    MemOp::Store { rd } => Packet {
                        kind: PacketKind::Write,
                        dest: ea,
                        data: self.store_data(rd, width),
                        width,
                        src: self.node,
                        inject_cycle: cycle,
                    },
                };
                if !noc.try_inject(self.node, packet, cycle) {
                    return Exec::Stall;
                }
                match what {
                    MemOp::Load { rd } | MemOp::TestSet { rd } => {
                        self.reg_ready[rd as usize] = u64::MAX;
                        self.state = RunState::WaitingReply;
                        self.consume(units);
                        if let Some(wb) = writeback {
                            self.regs[rn as usize] = wb;
                            self.reg_ready[rn as usize] = cycle + 1;
                        }
                        return Exec::Break;
                    }
                    MemOp::Store { .. } => Exec::Done,
                }
            }
            Region::Unmapped => {
                self.consume(units);
                self.raise_irq(IRQ_MEMFAULT);
                return Exec::Done;
            }
        };
        if let Some(wb) = writeback {
            self.regs[rn as usize] = wb;
            self.reg_ready[rn as usize] = cycle + 1;
        }
        self.consume(units);
        result
    }

    fn store_data(&self, rd: u8, width: Width) -> u64 {
        let lo = self.regs[rd as usize] as u64;
        if width == Width::Double {
            let hi = self.regs[(rd as usize + 1).min(63)] as u64;
            lo | (hi << 32)
        } else {
            lo
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum MemOp {
    Load { rd: u8 },
    Store { rd: u8 },
    TestSet { rd: u8 },
}

/// Address a core uses for a peer's local memory.
pub fn remote_addr(node: NodeAddress, offset: u32) -> u32 {
    encode_address(node, offset).expect("valid offset")
}
