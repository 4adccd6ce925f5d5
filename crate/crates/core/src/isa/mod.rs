//! The eCore instruction set: decoded representation, the documented
//! 16/32-bit binary encoding, a two-pass assembler and a disassembler.
//!
//! The bit-level layout is specific to this simulator and is documented in
//! `docs/ENCODING.md`; the contract it satisfies is that instructions using
//! only R0-R7 and short immediate fields get 16-bit encodings, and that the
//! first halfword alone determines instruction length.

pub mod asm;
pub mod disasm;
pub mod encode;
pub mod image;

pub use asm::{assemble, AsmError};
pub use disasm::disassemble;
pub use encode::{decode_instruction, encode_instruction, encode_with_length, length_of, DecodeError, EncodeError, EncodedInstruction, Length};
pub use image::ProgramImage;

use crate::ecore::Flags;

pub const NUM_REGS: u8 = 64;
/// Link register used by BL and JALR.
pub const LINK_REG: u8 = 14;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Width {
    Byte,
    Half,
    Word,
    Double,
}

impl Width {
    pub fn bytes(self) -> u32 {
        match self {
            Width::Byte => 1,
            Width::Half => 2,
            Width::Word => 4,
            Width::Double => 8,
        }
    }

    pub fn from_code(code: u8) -> Width {
        match code & 3 {
            0 => Width::Byte,
            1 => Width::Half,
            2 => Width::Word,
            _ => Width::Double,
        }
    }

    pub fn code(self) -> u8 {
        match self {
            Width::Byte => 0,
            Width::Half => 1,
            Width::Word => 2,
            Width::Double => 3,
        }
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Width::Byte => "B",
            Width::Half => "H",
            Width::Word => "",
            Width::Double => "D",
        }
    }
}

/// The three load/store addressing modes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AddrMode {
    /// base + signed byte displacement
    Displacement(i32),
    /// base + index register
    Index(u8),
    /// use base, then base += displacement
    Postmodify(i32),
}

/// Three-operand register ops (integer ALU and FPU).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alu3Op {
    Add,
    Sub,
    And,
    Orr,
    Eor,
    Lsl,
    Lsr,
    Asr,
    FAdd,
    FSub,
    FMul,
    FMadd,
    FMsub,
}

impl Alu3Op {
    pub fn is_fpu(self) -> bool {
        matches!(self, Alu3Op::FAdd | Alu3Op::FSub | Alu3Op::FMul | Alu3Op::FMadd | Alu3Op::FMsub)
    }
}

/// Two-operand register ops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Alu2Op {
    Fix,
    Float,
    FAbs,
    Bitr,
}

impl Alu2Op {
    pub fn is_fpu(self) -> bool {
        !matches!(self, Alu2Op::Bitr)
    }
}

/// Register-immediate ALU ops.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AluImmOp {
    Add,
    Sub,
    Lsl,
    Lsr,
    Asr,
}

/// The sixteen condition codes over the six flags.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cond {
    Eq = 0,
    Ne = 1,
    Gtu = 2,
    Gteu = 3,
    Lteu = 4,
    Ltu = 5,
    Gt = 6,
    Gte = 7,
    Lt = 8,
    Lte = 9,
    FEq = 10,
    FNe = 11,
    FLt = 12,
    FLte = 13,
    Always = 14,
}

impl Cond {
    pub fn from_code(code: u8) -> Option<Cond> {
        Some(match code {
            0 => Cond::Eq,
            1 => Cond::Ne,
            2 => Cond::Gtu,
            3 => Cond::Gteu,
            4 => Cond::Lteu,
            5 => Cond::Ltu,
            6 => Cond::Gt,
            7 => Cond::Gte,
            8 => Cond::Lt,
            9 => Cond::Lte,
            10 => Cond::FEq,
            11 => Cond::FNe,
            12 => Cond::FLt,
            13 => Cond::FLte,
            14 => Cond::Always,
            _ => return None, // 15 is reserved
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn suffix(self) -> &'static str {
        match self {
            Cond::Eq => "EQ",
            Cond::Ne => "NE",
            Cond::Gtu => "GTU",
            Cond::Gteu => "GTEU",
            Cond::Lteu => "LTEU",
            Cond::Ltu => "LTU",
            Cond::Gt => "GT",
            Cond::Gte => "GTE",
            Cond::Lt => "LT",
            Cond::Lte => "LTE",
            Cond::FEq => "FEQ",
            Cond::FNe => "FNE",
            Cond::FLt => "FLT",
            Cond::FLte => "FLTE",
            Cond::Always => "",
        }
    }

    pub fn from_suffix(s: &str) -> Option<Cond> {
        Some(match s {
            "" => Cond::Always,
            "EQ" => Cond::Eq,
            "NE" => Cond::Ne,
            "GTU" => Cond::Gtu,
            "GTEU" => Cond::Gteu,
            "LTEU" => Cond::Lteu,
            "LTU" => Cond::Ltu,
            "GT" => Cond::Gt,
            "GTE" => Cond::Gte,
            "LT" => Cond::Lt,
            "LTE" => Cond::Lte,
            "FEQ" => Cond::FEq,
            "FNE" => Cond::FNe,
            "FLT" => Cond::FLt,
            "FLTE" => Cond::FLte,
            _ => return None,
        })
    }
}

/// Pure predicate over the flag state.
pub fn eval_condition(cond: Cond, f: &Flags) -> bool {
    match cond {
        Cond::Eq => f.az,
        Cond::Ne => !f.az,
        Cond::Gtu => f.ac && !f.az,
        Cond::Gteu => f.ac,
        Cond::Lteu => !f.ac || f.az,
        Cond::Ltu => !f.ac,
        Cond::Gt => !f.az && (f.an == f.av),
        Cond::Gte => f.an == f.av,
        Cond::Lt => f.an != f.av,
        Cond::Lte => f.az || (f.an != f.av),
        Cond::FEq => f.bz,
        Cond::FNe => !f.bz,
        Cond::FLt => f.bn && !f.bz,
        Cond::FLte => f.bn || f.bz,
        Cond::Always => true,
    }
}

/// Special (control) register numbering used by MOVFS/MOVTS.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpecialReg {
    Config = 0,
    Status = 1,
    Pc = 2,
    CoreId = 3,
    Imask = 4,
    Ilat = 5,
    Ipend = 6,
    Iret = 7,
    CTimer0 = 8,
    CTimer1 = 9,
    Multicast = 10,
    Dma0Src = 11,
    Dma0Dst = 12,
    Dma0Count = 13,
    Dma0Stride = 14,
    Dma0Config = 15,
    Dma1Src = 16,
    Dma1Dst = 17,
    Dma1Count = 18,
    Dma1Stride = 19,
    Dma1Config = 20,
}

impl SpecialReg {
    pub fn from_code(code: u8) -> Option<SpecialReg> {
        use SpecialReg::*;
        Some(match code {
            0 => Config,
            1 => Status,
            2 => Pc,
            3 => CoreId,
            4 => Imask,
            5 => Ilat,
            6 => Ipend,
            7 => Iret,
            8 => CTimer0,
            9 => CTimer1,
            10 => Multicast,
            11 => Dma0Src,
            12 => Dma0Dst,
            13 => Dma0Count,
            14 => Dma0Stride,
            15 => Dma0Config,
            16 => Dma1Src,
            17 => Dma1Dst,
            18 => Dma1Count,
            19 => Dma1Stride,
            20 => Dma1Config,
            _ => return None,
        })
    }

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        use SpecialReg::*;
        match self {
            Config => "CONFIG",
            Status => "STATUS",
            Pc => "PC",
            CoreId => "COREID",
            Imask => "IMASK",
            Ilat => "ILAT",
            Ipend => "IPEND",
            Iret => "IRET",
            CTimer0 => "CTIMER0",
            CTimer1 => "CTIMER1",
            Multicast => "MULTICAST",
            Dma0Src => "DMA0SRC",
            Dma0Dst => "DMA0DST",
            Dma0Count => "DMA0COUNT",
            Dma0Stride => "DMA0STRIDE",
            Dma0Config => "DMA0CONFIG",
            Dma1Src => "DMA1SRC",
            Dma1Dst => "DMA1DST",
            Dma1Count => "DMA1COUNT",
            Dma1Stride => "DMA1STRIDE",
            Dma1Config => "DMA1CONFIG",
        }
    }

    pub fn from_name(s: &str) -> Option<SpecialReg> {
        (0..=20).map(|c| SpecialReg::from_code(c).unwrap()).find(|r| r.name() == s)
    }
}

/// One decoded instruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Instruction {
    Nop,
    Alu3 { op: Alu3Op, rd: u8, rn: u8, rm: u8 },
    Alu2 { op: Alu2Op, rd: u8, rn: u8 },
    AluImm { op: AluImmOp, rd: u8, rn: u8, imm: i32 },
    MovImm { rd: u8, imm: u16 },
    MovT { rd: u8, imm: u16 },
    MovCond { cond: Cond, rd: u8, rn: u8 },
    MovFromSpecial { rd: u8, sreg: SpecialReg },
    MovToSpecial { sreg: SpecialReg, rn: u8 },
    TestSet { rd: u8, rn: u8, rm: u8 },
    Load { rd: u8, rn: u8, width: Width, mode: AddrMode },
    Store { rd: u8, rn: u8, width: Width, mode: AddrMode },
    /// PC-relative byte displacement from the branch's own address.
    Branch { cond: Cond, disp: i32 },
    BranchLink { disp: i32 },
    JumpReg { rn: u8 },
    JumpLinkReg { rn: u8 },
    Idle,
    Trap(u8),
    Bkpt,
    Mbkpt,
    Rti,
    Gid,
    Gie,
    Unimpl,
    Sync,
    Wand,
}

/// Issue class used by the dual-issue pairing rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IssueClass {
    /// FPU pipeline ops.
    Fpu,
    /// Integer ALU, moves, loads and stores.
    IntLs,
    /// NOP: uses no ports and pairs with anything.
    Neutral,
    /// Branches, jumps and core-state ops: never dual-issued.
    Control,
}

impl Instruction {
    pub fn issue_class(&self) -> IssueClass {
        match self {
            Instruction::Nop => IssueClass::Neutral,
            Instruction::Alu3 { op, .. } if op.is_fpu() => IssueClass::Fpu,
            Instruction::Alu2 { op, .. } if op.is_fpu() => IssueClass::Fpu,
            Instruction::Alu3 { .. }
            | Instruction::Alu2 { .. }
            | Instruction::AluImm { .. }
            | Instruction::MovImm { .. }
            | Instruction::MovT { .. }
            | Instruction::MovCond { .. }
            | Instruction::TestSet { .. }
            | Instruction::Load { .. }
            | Instruction::Store { .. } => IssueClass::IntLs,
            _ => IssueClass::Control,
        }
    }

    /// Destination register written by this instruction, if any.
    pub fn dest_reg(&self) -> Option<u8> {
        match *self {
            Instruction::Alu3 { rd, .. }
            | Instruction::Alu2 { rd, .. }
            | Instruction::AluImm { rd, .. }
            | Instruction::MovImm { rd, .. }
            | Instruction::MovT { rd, .. }
            | Instruction::MovCond { rd, .. }
            | Instruction::MovFromSpecial { rd, .. }
            | Instruction::TestSet { rd, .. }
            | Instruction::Load { rd, .. } => Some(rd),
            Instruction::BranchLink { .. } | Instruction::JumpLinkReg { .. } => Some(LINK_REG),
            _ => None,
        }
    }

    /// Source registers read by this instruction.
    pub fn src_regs(&self) -> Vec<u8> {
        match *self {
            Instruction::Alu3 { op, rd, rn, rm } => {
                // Fused multiply-add accumulates into rd.
                if matches!(op, Alu3Op::FMadd | Alu3Op::FMsub) {
                    vec![rd, rn, rm]
                } else {
                    vec![rn, rm]
                }
            }
            Instruction::Alu2 { rn, .. } => vec![rn],
            Instruction::AluImm { rn, .. } => vec![rn],
            Instruction::MovT { rd, .. } => vec![rd],
            Instruction::MovCond { rn, .. } => vec![rn],
            Instruction::MovToSpecial { rn, .. } => vec![rn],
            Instruction::TestSet { rd, rn, rm } => vec![rd, rn, rm],
            Instruction::Load { rn, mode, .. } => match mode {
                AddrMode::Index(rm) => vec![rn, rm],
                _ => vec![rn],
            },
            Instruction::Store { rd, rn, mode, .. } => match mode {
                AddrMode::Index(rm) => vec![rd, rn, rm],
                _ => vec![rd, rn],
            },
            Instruction::JumpReg { rn } | Instruction::JumpLinkReg { rn } => vec![rn],
            _ => vec![],
        }
    }

    pub fn is_mem(&self) -> bool {
        matches!(
            self,
            Instruction::Load { .. } | Instruction::Store { .. } | Instruction::TestSet { .. }
        )
    }
}

/// Dual-issue legality: one FPU op pairs with one integer/load/store op
/// (NOP pairs with anything) absent RAW/WAW register overlap, within the
/// register-file port budget.
pub fn issue_pair_allowed(first: &Instruction, second: &Instruction) -> bool {
    let (c1, c2) = (first.issue_class(), second.issue_class());
    let classes_ok = match (c1, c2) {
        (IssueClass::Neutral, IssueClass::Control) | (IssueClass::Control, _) => false,
        (IssueClass::Neutral, _) | (_, IssueClass::Neutral) => true,
        (IssueClass::Fpu, IssueClass::IntLs) | (IssueClass::IntLs, IssueClass::Fpu) => true,
        _ => false,
    };
    if !classes_ok {
        return false;
    }
    // RAW: second reads first's destination. WAW: same destination.
    if let Some(rd) = first.dest_reg() {
        if second.src_regs().contains(&rd) {
            return false;
        }
        if second.dest_reg() == Some(rd) {
            return false;
        }
    }
    // Port budget: at most one 64-bit load/store access per cycle; the
    // FPU/IALU read and write budgets are structurally met by the class
    // rule (one FPU op reads <=3 and writes 1, one integer op reads <=2
    // and writes 1).
    if first.is_mem() && second.is_mem() {
        return false;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn add(rd: u8, rn: u8, rm: u8) -> Instruction {
        Instruction::Alu3 { op: Alu3Op::Add, rd, rn, rm }
    }

    fn fmadd(rd: u8, rn: u8, rm: u8) -> Instruction {
        Instruction::Alu3 { op: Alu3Op::FMadd, rd, rn, rm }
    }

    #[test]
    fn pairing_rules() {
        // FPU + integer pairs.
        assert!(issue_pair_allowed(&fmadd(0, 1, 2), &add(4, 5, 6)));
        // RAW on R1.
        assert!(!issue_pair_allowed(&add(1, 2, 3), &add(4, 1, 5)));
        // Two FPU ops never pair.
        assert!(!issue_pair_allowed(
            &Instruction::Alu3 { op: Alu3Op::FAdd, rd: 0, rn: 1, rm: 2 },
            &Instruction::Alu3 { op: Alu3Op::FMul, rd: 3, rn: 4, rm: 5 }
        ));
        // Two integer ops never pair.
        assert!(!issue_pair_allowed(&add(0, 1, 2), &add(3, 4, 5)));
        // NOP pairs with an integer op.
        assert!(issue_pair_allowed(&Instruction::Nop, &add(0, 1, 2)));
        assert!(issue_pair_allowed(&fmadd(0, 1, 2), &Instruction::Nop));
        // WAW never pairs.
        assert!(!issue_pair_allowed(&fmadd(0, 1, 2), &add(0, 5, 6)));
        // Branches never pair.
        assert!(!issue_pair_allowed(&Instruction::Branch { cond: Cond::Always, disp: 0 }, &add(0, 1, 2)));
        assert!(!issue_pair_allowed(&add(0, 1, 2), &Instruction::Branch { cond: Cond::Always, disp: 0 }));
    }

    #[test]
    fn eq_ne_complementary_over_all_flag_combinations() {
        for bits in 0..64u32 {
            let f = Flags {
                an: bits & 1 != 0,
                az: bits & 2 != 0,
                av: bits & 4 != 0,
                ac: bits & 8 != 0,
                bn: bits & 16 != 0,
                bz: bits & 32 != 0,
                ..Flags::default()
            };
            assert_ne!(eval_condition(Cond::Eq, &f), eval_condition(Cond::Ne, &f));
            assert!(eval_condition(Cond::Always, &f));
        }
    }

    #[test]
    fn condition_basics() {
        let mut f = Flags::default();
        f.az = true;
        assert!(eval_condition(Cond::Eq, &f));
        assert!(!eval_condition(Cond::Ne, &f));
    }
}
