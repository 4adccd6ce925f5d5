//! Binary instruction encoding.
//!
//! Layout summary (full tables in `docs/ENCODING.md`):
//!
//! * Bit 15 of the first halfword is the length flag: 0 = 16-bit form,
//!   1 = 32-bit form. Bits 14:9 are the opcode in both forms, so length
//!   is decided by the first halfword alone.
//! * Short forms pack three 3-bit register fields (R0-R7) or small
//!   unsigned immediates into bits 8:0.
//! * Long forms pack operands into the 25-bit field formed by bits 8:0 of
//!   the first halfword followed by the entire second halfword.

use super::*;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Length {
    Short,
    Long,
}

impl Length {
    pub fn halfwords(self) -> usize {
        match self {
            Length::Short => 1,
            Length::Long => 2,
        }
    }
}

/// One encoded instruction: one or two 16-bit units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodedInstruction {
    pub halfwords: [u16; 2],
    pub len: Length,
}

impl EncodedInstruction {
    pub fn units(&self) -> &[u16] {
        &self.halfwords[..self.len.halfwords()]
    }

    pub fn byte_len(&self) -> u32 {
        2 * self.len.halfwords() as u32
    }

    pub fn bytes(&self) -> Vec<u8> {
        self.units().iter().flat_map(|h| h.to_le_bytes()).collect()
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum EncodeError {
    #[error("register index {0} out of range")]
    RegisterOutOfRange(u8),
    #[error("immediate {0} does not fit any encoding form")]
    ImmediateOutOfRange(i64),
    #[error("branch displacement {0} must be even")]
    OddBranchDisplacement(i32),
    #[error("instruction has no {0:?} form")]
    NoSuchForm(Length),
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum DecodeError {
    #[error("truncated 32-bit instruction")]
    Truncated,
}

// Opcode assignments (bits 14:9).
mod op {
    pub const NOP: u16 = 0;
    pub const ADD: u16 = 1;
    pub const SUB: u16 = 2;
    pub const AND: u16 = 3;
    pub const ORR: u16 = 4;
    pub const EOR: u16 = 5;
    pub const LSL: u16 = 6;
    pub const LSR: u16 = 7;
    pub const ASR: u16 = 8;
    pub const BITR: u16 = 9;
    pub const FADD: u16 = 10;
    pub const FSUB: u16 = 11;
    pub const FMUL: u16 = 12;
    pub const FMADD: u16 = 13;
    pub const FMSUB: u16 = 14;
    pub const FIX: u16 = 15;
    pub const FLOAT: u16 = 16;
    pub const FABS: u16 = 17;
    pub const ADDI: u16 = 18;
    pub const SUBI: u16 = 19;
    pub const LSLI: u16 = 20;
    pub const LSRI: u16 = 21;
    pub const ASRI: u16 = 22;
    pub const MOVIMM: u16 = 23;
    pub const MOVT: u16 = 24;
    pub const MOVCOND: u16 = 25;
    pub const MOVFS: u16 = 26;
    pub const MOVTS: u16 = 27;
    pub const TESTSET: u16 = 28;
    pub const LDR: u16 = 29;
    pub const STR: u16 = 30;
    pub const LDRW_DISP: u16 = 31;
    pub const LDRW_IDX: u16 = 32;
    pub const STRW_DISP: u16 = 33;
    pub const STRW_IDX: u16 = 34;
    pub const B: u16 = 35;
    pub const BL: u16 = 36;
    pub const JR: u16 = 37;
    pub const JALR: u16 = 38;
    pub const IDLE: u16 = 39;
    pub const TRAP: u16 = 40;
    pub const BKPT: u16 = 41;
    pub const RTI: u16 = 42;
    pub const GID: u16 = 43;
    pub const GIE: u16 = 44;
    pub const UNIMPL: u16 = 45;
    pub const SYNC: u16 = 46;
    pub const MBKPT: u16 = 47;
    pub const WAND: u16 = 48;
}

fn short(opc: u16, fields: u16) -> EncodedInstruction {
    debug_assert!(opc < 64 && fields < 512);
    EncodedInstruction { halfwords: [(opc << 9) | fields, 0], len: Length::Short }
}

fn long(opc: u16, u25: u32) -> EncodedInstruction {
    debug_assert!(opc < 64 && u25 < (1 << 25));
    EncodedInstruction {
        halfwords: [0x8000 | (opc << 9) | ((u25 >> 16) as u16), u25 as u16],
        len: Length::Long,
    }
}

fn short3(opc: u16, a: u8, b: u8, c: u8) -> EncodedInstruction {
    short(opc, ((a as u16) << 6) | ((b as u16) << 3) | c as u16)
}

fn regs_short(regs: &[u8]) -> bool {
    regs.iter().all(|&r| r < 8)
}

fn sign_extend(v: u32, bits: u32) -> i32 {
    ((v << (32 - bits)) as i32) >> (32 - bits)
}

fn fits_signed(v: i64, bits: u32) -> bool {
    v >= -(1i64 << (bits - 1)) && v < (1i64 << (bits - 1))
}

fn alu3_opcode(o: Alu3Op) -> u16 {
    match o {
        Alu3Op::Add => op::ADD,
        Alu3Op::Sub => op::SUB,
        Alu3Op::And => op::AND,
        Alu3Op::Orr => op::ORR,
        Alu3Op::Eor => op::EOR,
        Alu3Op::Lsl => op::LSL,
        Alu3Op::Lsr => op::LSR,
        Alu3Op::Asr => op::ASR,
        Alu3Op::FAdd => op::FADD,
        Alu3Op::FSub => op::FSUB,
        Alu3Op::FMul => op::FMUL,
        Alu3Op::FMadd => op::FMADD,
        Alu3Op::FMsub => op::FMSUB,
    }
}

fn alu2_opcode(o: Alu2Op) -> u16 {
    match o {
        Alu2Op::Fix => op::FIX,
        Alu2Op::Float => op::FLOAT,
        Alu2Op::FAbs => op::FABS,
        Alu2Op::Bitr => op::BITR,
    }
}

fn aluimm_opcode(o: AluImmOp) -> u16 {
    match o {
        AluImmOp::Add => op::ADDI,
        AluImmOp::Sub => op::SUBI,
        AluImmOp::Lsl => op::LSLI,
        AluImmOp::Lsr => op::LSRI,
        AluImmOp::Asr => op::ASRI,
    }
}

fn check_regs(regs: &[u8]) -> Result<(), EncodeError> {
    for &r in regs {
        if r >= NUM_REGS {
            return Err(EncodeError::RegisterOutOfRange(r));
        }
    }
    Ok(())
}

/// Emits the 16-bit form whenever the operand constraint permits it, else
/// the 32-bit form.
pub fn encode_instruction(instr: &Instruction) -> Result<EncodedInstruction, EncodeError> {
    encode_with_length(instr, None)
}

/// Encode with an optional forced length (used by the assembler for
/// branches to labels and by the disassembler round trip).
pub fn encode_with_length(
    instr: &Instruction,
    force: Option<Length>,
) -> Result<EncodedInstruction, EncodeError> {
    let enc = encode_inner(instr)?;
    match (force, enc.len) {
        (None, _) => Ok(enc),
        (Some(l), el) if l == el => Ok(enc),
        (Some(Length::Long), _) => widen(instr).ok_or(EncodeError::NoSuchForm(Length::Long)),
        (Some(Length::Short), _) => Err(EncodeError::NoSuchForm(Length::Short)),
    }
}

/// Long form of an instruction whose canonical form is short.
fn widen(instr: &Instruction) -> Option<EncodedInstruction> {
    match *instr {
        Instruction::Alu3 { op: o, rd, rn, rm } => Some(long(
            alu3_opcode(o),
            ((rd as u32) << 12) | ((rn as u32) << 6) | rm as u32,
        )),
        Instruction::Alu2 { op: o, rd, rn } => {
            Some(long(alu2_opcode(o), ((rd as u32) << 6) | rn as u32))
        }
        Instruction::AluImm { op: o, rd, rn, imm } => Some(long(
            aluimm_opcode(o),
            ((rd as u32) << 18) | ((rn as u32) << 12) | (imm as u32 & 0xFFF),
        )),
        Instruction::MovImm { rd, imm } => {
            Some(long(op::MOVIMM, ((rd as u32) << 16) | imm as u32))
        }
        Instruction::TestSet { rd, rn, rm } => Some(long(
            op::TESTSET,
            ((rd as u32) << 12) | ((rn as u32) << 6) | rm as u32,
        )),
        Instruction::Load { rd, rn, width, mode } => Some(long_ls(op::LDR, rd, rn, width, mode)),
        Instruction::Store { rd, rn, width, mode } => Some(long_ls(op::STR, rd, rn, width, mode)),
        Instruction::Branch { cond, disp } => Some(long(
            op::B,
            ((cond.code() as u32) << 21) | (disp as u32 & 0x1F_FFFF),
        )),
        Instruction::BranchLink { disp } => Some(long(op::BL, disp as u32 & 0x1FF_FFFF)),
        Instruction::JumpReg { rn } => Some(long(op::JR, rn as u32)),
        Instruction::JumpLinkReg { rn } => Some(long(op::JALR, rn as u32)),
        _ => None,
    }
}

fn long_ls(opc: u16, rd: u8, rn: u8, width: Width, mode: AddrMode) -> EncodedInstruction {
    let (amode, low9) = match mode {
        AddrMode::Displacement(d) => (0u32, d as u32 & 0x1FF),
        AddrMode::Index(rm) => (1u32, rm as u32),
        AddrMode::Postmodify(d) => (2u32, d as u32 & 0x1FF),
    };
    long(
        opc,
        ((width.code() as u32) << 23)
            | (amode << 21)
            | ((rd as u32) << 15)
            | ((rn as u32) << 9)
            | low9,
    )
}

fn encode_inner(instr: &Instruction) -> Result<EncodedInstruction, EncodeError> {
    use Instruction as I;
    match *instr {
        I::Nop => Ok(short(op::NOP, 0)),
        I::Idle => Ok(short(op::IDLE, 0)),
        I::Bkpt => Ok(short(op::BKPT, 0)),
        I::Mbkpt => Ok(short(op::MBKPT, 0)),
        I::Rti => Ok(short(op::RTI, 0)),
        I::Gid => Ok(short(op::GID, 0)),
        I::Gie => Ok(short(op::GIE, 0)),
        I::Unimpl => Ok(short(op::UNIMPL, 0)),
        I::Sync => Ok(short(op::SYNC, 0)),
        I::Wand => Ok(short(op::WAND, 0)),
        I::Trap(code) => {
            if code >= 64 {
                return Err(EncodeError::ImmediateOutOfRange(code as i64));
            }
            Ok(short(op::TRAP, code as u16))
        }
        I::Alu3 { rd, rn, rm, .. } => {
            check_regs(&[rd, rn, rm])?;
            if regs_short(&[rd, rn, rm]) {
                Ok(short3(alu3_opcode(match *instr { I::Alu3 { op, .. } => op, _ => unreachable!() }), rd, rn, rm))
            } else {
                Ok(widen(instr).unwrap())
            }
        }
        I::Alu2 { op: o, rd, rn } => {
            check_regs(&[rd, rn])?;
            if regs_short(&[rd, rn]) {
                Ok(short3(alu2_opcode(o), rd, rn, 0))
            } else {
                Ok(widen(instr).unwrap())
            }
        }
        I::AluImm { op: o, rd, rn, imm } => {
            check_regs(&[rd, rn])?;
            let shift = matches!(o, AluImmOp::Lsl | AluImmOp::Lsr | AluImmOp::Asr);
            if shift && !(0..=31).contains(&imm) {
                return Err(EncodeError::ImmediateOutOfRange(imm as i64));
            }
            if !shift && !fits_signed(imm as i64, 12) {
                return Err(EncodeError::ImmediateOutOfRange(imm as i64));
            }
            if regs_short(&[rd, rn]) && (0..=7).contains(&imm) {
                Ok(short3(aluimm_opcode(o), rd, rn, imm as u8))
            } else {
                Ok(widen(instr).unwrap())
            }
        }
        I::MovImm { rd, imm } => {
            check_regs(&[rd])?;
            if rd < 8 && imm < 64 {
                Ok(short(op::MOVIMM, ((rd as u16) << 6) | imm))
            } else {
                Ok(widen(instr).unwrap())
            }
        }
        I::MovT { rd, imm } => {
            check_regs(&[rd])?;
            Ok(long(op::MOVT, ((rd as u32) << 16) | imm as u32))
        }
        I::MovCond { cond, rd, rn } => {
            check_regs(&[rd, rn])?;
            Ok(long(
                op::MOVCOND,
                ((cond.code() as u32) << 12) | ((rd as u32) << 6) | rn as u32,
            ))
        }
        I::MovFromSpecial { rd, sreg } => {
            check_regs(&[rd])?;
            Ok(long(op::MOVFS, ((rd as u32) << 6) | sreg.code() as u32))
        }
        I::MovToSpecial { sreg, rn } => {
            check_regs(&[rn])?;
            Ok(long(op::MOVTS, ((sreg.code() as u32) << 6) | rn as u32))
        }
        I::TestSet { rd, rn, rm } => {
            check_regs(&[rd, rn, rm])?;
            if regs_short(&[rd, rn, rm]) {
                Ok(short3(op::TESTSET, rd, rn, rm))
            } else {
                Ok(widen(instr).unwrap())
            }
        }
        I::Load { rd, rn, width, mode } | I::Store { rd, rn, width, mode } => {
            let is_load = matches!(instr, I::Load { .. });
            check_regs(&[rd, rn])?;
            if let AddrMode::Index(rm) = mode {
                check_regs(&[rm])?;
            }
            match mode {
                AddrMode::Displacement(d) | AddrMode::Postmodify(d) => {
                    if !fits_signed(d as i64, 9) {
                        return Err(EncodeError::ImmediateOutOfRange(d as i64));
                    }
                }
                AddrMode::Index(_) => {}
            }
            // Word-size short forms only.
            if width == Width::Word && regs_short(&[rd, rn]) {
                match mode {
                    AddrMode::Displacement(d) if d % 4 == 0 && (0..=28).contains(&d) => {
                        let opc = if is_load { op::LDRW_DISP } else { op::STRW_DISP };
                        return Ok(short3(opc, rd, rn, (d / 4) as u8));
                    }
                    AddrMode::Index(rm) if rm < 8 => {
                        let opc = if is_load { op::LDRW_IDX } else { op::STRW_IDX };
                        return Ok(short3(opc, rd, rn, rm));
                    }
                    _ => {}
                }
            }
            Ok(widen(instr).unwrap())
        }
        I::Branch { disp, .. } => {
            if disp % 2 != 0 {
                return Err(EncodeError::OddBranchDisplacement(disp));
            }
            if !fits_signed(disp as i64, 21) {
                return Err(EncodeError::ImmediateOutOfRange(disp as i64));
            }
            if fits_signed(disp as i64, 5) {
                let cond = match *instr { I::Branch { cond, .. } => cond, _ => unreachable!() };
                Ok(short(op::B, ((cond.code() as u16) << 5) | (disp as u16 & 0x1F)))
            } else {
                Ok(widen(instr).unwrap())
            }
        }
        I::BranchLink { disp } => {
            if disp % 2 != 0 {
                return Err(EncodeError::OddBranchDisplacement(disp));
            }
            if !fits_signed(disp as i64, 25) {
                return Err(EncodeError::ImmediateOutOfRange(disp as i64));
            }
            if fits_signed(disp as i64, 9) {
                Ok(short(op::BL, disp as u16 & 0x1FF))
            } else {
                Ok(widen(instr).unwrap())
            }
        }
        I::JumpReg { rn } => {
            check_regs(&[rn])?;
            if rn < 8 {
                Ok(short3(op::JR, rn, 0, 0))
            } else {
                Ok(widen(instr).unwrap())
            }
        }
        I::JumpLinkReg { rn } => {
            check_regs(&[rn])?;
            if rn < 8 {
                Ok(short3(op::JALR, rn, 0, 0))
            } else {
                Ok(widen(instr).unwrap())
            }
        }
    }
}

/// Length of the instruction starting with `first`, from the first
/// halfword alone.
pub fn length_of(first: u16) -> Length {
    if first & 0x8000 != 0 {
        Length::Long
    } else {
        Length::Short
    }
}

/// Total decode: malformed patterns decode to UNIMPL (which raises a
/// software exception when executed). Only a missing second halfword of a
/// 32-bit form is an error.
pub fn decode_instruction(halfwords: &[u16]) -> Result<(Instruction, Length), DecodeError> {
    let first = *halfwords.first().ok_or(DecodeError::Truncated)?;
    let opc = (first >> 9) & 0x3F;
    if length_of(first) == Length::Short {
        let a = ((first >> 6) & 7) as u8;
        let b = ((first >> 3) & 7) as u8;
        let c = (first & 7) as u8;
        let instr = decode_short(opc, first, a, b, c);
        return Ok((instr, Length::Short));
    }
    let second = *halfwords.get(1).ok_or(DecodeError::Truncated)?;
    let u25 = (((first & 0x1FF) as u32) << 16) | second as u32;
    Ok((decode_long(opc, u25), Length::Long))
}

fn decode_short(opc: u16, first: u16, a: u8, b: u8, c: u8) -> Instruction {
    use Instruction as I;
    match opc {
        op::NOP => I::Nop,
        op::ADD => I::Alu3 { op: Alu3Op::Add, rd: a, rn: b, rm: c },
        op::SUB => I::Alu3 { op: Alu3Op::Sub, rd: a, rn: b, rm: c },
        op::AND => I::Alu3 { op: Alu3Op::And, rd: a, rn: b, rm: c },
        op::ORR => I::Alu3 { op: Alu3Op::Orr, rd: a, rn: b, rm: c },
        op::EOR => I::Alu3 { op: Alu3Op::Eor, rd: a, rn: b, rm: c },
        op::LSL => I::Alu3 { op: Alu3Op::Lsl, rd: a, rn: b, rm: c },
        op::LSR => I::Alu3 { op: Alu3Op::Lsr, rd: a, rn: b, rm: c },
        op::ASR => I::Alu3 { op: Alu3Op::Asr, rd: a, rn: b, rm: c },
        op::BITR => I::Alu2 { op: Alu2Op::Bitr, rd: a, rn: b },
        op::FADD => I::Alu3 { op: Alu3Op::FAdd, rd: a, rn: b, rm: c },
        op::FSUB => I::Alu3 { op: Alu3Op::FSub, rd: a, rn: b, rm: c },
        op::FMUL => I::Alu3 { op: Alu3Op::FMul, rd: a, rn: b, rm: c },
        op::FMADD => I::Alu3 { op: Alu3Op::FMadd, rd: a, rn: b, rm: c },
        op::FMSUB => I::Alu3 { op: Alu3Op::FMsub, rd: a, rn: b, rm: c },
        op::FIX => I::Alu2 { op: Alu2Op::Fix, rd: a, rn: b },
        op::FLOAT => I::Alu2 { op: Alu2Op::Float, rd: a, rn: b },
        op::FABS => I::Alu2 { op: Alu2Op::FAbs, rd: a, rn: b },
        op::ADDI => I::AluImm { op: AluImmOp::Add, rd: a, rn: b, imm: c as i32 },
        op::SUBI => I::AluImm { op: AluImmOp::Sub, rd: a, rn: b, imm: c as i32 },
        op::LSLI => I::AluImm { op: AluImmOp::Lsl, rd: a, rn: b, imm: c as i32 },
        op::LSRI => I::AluImm { op: AluImmOp::Lsr, rd: a, rn: b, imm: c as i32 },
        op::ASRI => I::AluImm { op: AluImmOp::Asr, rd: a, rn: b, imm: c as i32 },
        op::MOVIMM => I::MovImm { rd: a, imm: first & 0x3F },
        op::TESTSET => I::TestSet { rd: a, rn: b, rm: c },
        op::LDRW_DISP => I::Load { rd: a, rn: b, width: Width::Word, mode: AddrMode::Displacement(c as i32 * 4) },
        op::LDRW_IDX => I::Load { rd: a, rn: b, width: Width::Word, mode: AddrMode::Index(c) },
        op::STRW_DISP => I::Store { rd: a, rn: b, width: Width::Word, mode: AddrMode::Displacement(c as i32 * 4) },
        op::STRW_IDX => I::Store { rd: a, rn: b, width: Width::Word, mode: AddrMode::Index(c) },
        op::B => {
            let cond = Cond::from_code(((first >> 5) & 0xF) as u8);
            let disp = sign_extend((first & 0x1F) as u32, 5);
            match cond {
                Some(cond) if disp % 2 == 0 => I::Branch { cond, disp },
                _ => I::Unimpl,
            }
        }
        op::BL => {
            let disp = sign_extend((first & 0x1FF) as u32, 9);
            if disp % 2 == 0 {
                I::BranchLink { disp }
            } else {
                I::Unimpl
            }
        }
        op::JR => I::JumpReg { rn: a },
        op::JALR => I::JumpLinkReg { rn: a },
        op::IDLE => I::Idle,
        op::TRAP => I::Trap((first & 0x3F) as u8),
        op::BKPT => I::Bkpt,
        op::RTI => I::Rti,
        op::GID => I::Gid,
        op::GIE => I::Gie,
        op::UNIMPL => I::Unimpl,
        op::SYNC => I::Sync,
        op::MBKPT => I::Mbkpt,
        op::WAND => I::Wand,
        _ => I::Unimpl,
    }
}

fn decode_long(opc: u16, u25: u32) -> Instruction {
    use Instruction as I;
    let r = |shift: u32| ((u25 >> shift) & 0x3F) as u8;
    match opc {
        op::ADD => I::Alu3 { op: Alu3Op::Add, rd: r(12), rn: r(6), rm: r(0) },
        op::SUB => I::Alu3 { op: Alu3Op::Sub, rd: r(12), rn: r(6), rm: r(0) },
        op::AND => I::Alu3 { op: Alu3Op::And, rd: r(12), rn: r(6), rm: r(0) },
        op::ORR => I::Alu3 { op: Alu3Op::Orr, rd: r(12), rn: r(6), rm: r(0) },
        op::EOR => I::Alu3 { op: Alu3Op::Eor, rd: r(12), rn: r(6), rm: r(0) },
        op::LSL => I::Alu3 { op: Alu3Op::Lsl, rd: r(12), rn: r(6), rm: r(0) },
        op::LSR => I::Alu3 { op: Alu3Op::Lsr, rd: r(12), rn: r(6), rm: r(0) },
        op::ASR => I::Alu3 { op: Alu3Op::Asr, rd: r(12), rn: r(6), rm: r(0) },
        op::BITR => I::Alu2 { op: Alu2Op::Bitr, rd: r(6), rn: r(0) },
        op::FADD => I::Alu3 { op: Alu3Op::FAdd, rd: r(12), rn: r(6), rm: r(0) },
        op::FSUB => I::Alu3 { op: Alu3Op::FSub, rd: r(12), rn: r(6), rm: r(0) },
        op::FMUL => I::Alu3 { op: Alu3Op::FMul, rd: r(12), rn: r(6), rm: r(0) },
        op::FMADD => I::Alu3 { op: Alu3Op::FMadd, rd: r(12), rn: r(6), rm: r(0) },
        op::FMSUB => I::Alu3 { op: Alu3Op::FMsub, rd: r(12), rn: r(6), rm: r(0) },
        op::FIX => I::Alu2 { op: Alu2Op::Fix, rd: r(6), rn: r(0) },
        op::FLOAT => I::Alu2 { op: Alu2Op::Float, rd: r(6), rn: r(0) },
        op::FABS => I::Alu2 { op: Alu2Op::FAbs, rd: r(6), rn: r(0) },
        op::ADDI => I::AluImm { op: AluImmOp::Add, rd: r(18), rn: r(12), imm: sign_extend(u25 & 0xFFF, 12) },
        op::SUBI => I::AluImm { op: AluImmOp::Sub, rd: r(18), rn: r(12), imm: sign_extend(u25 & 0xFFF, 12) },
        op::LSLI | op::LSRI | op::ASRI => {
            let imm = (u25 & 0xFFF) as i32;
            if imm > 31 {
                return I::Unimpl;
            }
            let o = match opc {
                op::LSLI => AluImmOp::Lsl,
                op::LSRI => AluImmOp::Lsr,
                _ => AluImmOp::Asr,
            };
            I::AluImm { op: o, rd: r(18), rn: r(12), imm }
        }
        op::MOVIMM => I::MovImm { rd: ((u25 >> 16) & 0x3F) as u8, imm: u25 as u16 },
        op::MOVT => I::MovT { rd: ((u25 >> 16) & 0x3F) as u8, imm: u25 as u16 },
        op::MOVCOND => match Cond::from_code(((u25 >> 12) & 0xF) as u8) {
            Some(cond) => I::MovCond { cond, rd: r(6), rn: r(0) },
            None => I::Unimpl,
        },
        op::MOVFS => match SpecialReg::from_code((u25 & 0x3F) as u8) {
            Some(sreg) => I::MovFromSpecial { rd: r(6), sreg },
            None => I::Unimpl,
        },
        op::MOVTS => match SpecialReg::from_code(((u25 >> 6) & 0x3F) as u8) {
            Some(sreg) => I::MovToSpecial { sreg, rn: r(0) },
            None => I::Unimpl,
        },
        op::TESTSET => I::TestSet { rd: r(12), rn: r(6), rm: r(0) },
        op::LDR | op::STR => {
            let width = Width::from_code(((u25 >> 23) & 3) as u8);
            let amode = (u25 >> 21) & 3;
            let rd = ((u25 >> 15) & 0x3F) as u8;
            let rn = ((u25 >> 9) & 0x3F) as u8;
            let mode = match amode {
                0 => AddrMode::Displacement(sign_extend(u25 & 0x1FF, 9)),
                1 => AddrMode::Index((u25 & 0x3F) as u8),
                2 => AddrMode::Postmodify(sign_extend(u25 & 0x1FF, 9)),
                _ => return I::Unimpl,
            };
            if opc == op::LDR {
                I::Load { rd, rn, width, mode }
            } else {
                I::Store { rd, rn, width, mode }
            }
        }
        op::B => {
            let cond = Cond::from_code(((u25 >> 21) & 0xF) as u8);
            let disp = sign_extend(u25 & 0x1F_FFFF, 21);
            match cond {
                Some(cond) if disp % 2 == 0 => I::Branch { cond, disp },
                _ => I::Unimpl,
            }
        }
        op::BL => {
            let disp = sign_extend(u25 & 0x1FF_FFFF, 25);
            if disp % 2 == 0 {
                I::BranchLink { disp }
            } else {
                I::Unimpl
            }
        }
        op::JR => I::JumpReg { rn: r(0) },
        op::JALR => I::JumpLinkReg { rn: r(0) },
        _ => I::Unimpl,
    }
}
