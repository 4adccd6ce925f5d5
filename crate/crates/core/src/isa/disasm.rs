//! Linear-sweep disassembler.
//!
//! Every decoded instruction is re-encoded and compared against the
//! original bytes; anything that does not reproduce itself exactly is
//! emitted as a `.half` data directive instead. Instructions whose
//! stored length differs from the canonical (shortest) encoding get a
//! `.S`/`.L` suffix. The output therefore reassembles to the identical
//! byte image.

use super::encode::{decode_instruction, encode_instruction, encode_with_length, length_of, Length};
use super::image::ProgramImage;
use super::*;

/// Render one instruction in assembler syntax (no length suffix).
pub fn format_instruction(instr: &Instruction) -> String {
    use Instruction as I;
    let mem = |rn: u8, mode: &AddrMode| match mode {
        AddrMode::Displacement(0) => format!("[R{rn}]"),
        AddrMode::Displacement(d) => format!("[R{rn}, #{d}]"),
        AddrMode::Index(rm) => format!("[R{rn}, R{rm}]"),
        AddrMode::Postmodify(d) => format!("[R{rn}], #{d}"),
    };
    match instr {
        I::Nop => "NOP".into(),
        I::Idle => "IDLE".into(),
        I::Bkpt => "BKPT".into(),
        I::Mbkpt => "MBKPT".into(),
        I::Rti => "RTI".into(),
        I::Gid => "GID".into(),
        I::Gie => "GIE".into(),
        I::Unimpl => "UNIMPL".into(),
        I::Sync => "SYNC".into(),
        I::Wand => "WAND".into(),
        I::Trap(n) => format!("TRAP #{n}"),
        I::Alu3 { op, rd, rn, rm } => {
            let m = match op {
                Alu3Op::Add => "ADD",
                Alu3Op::Sub => "SUB",
                Alu3Op::And => "AND",
                Alu3Op::Orr => "ORR",
                Alu3Op::Eor => "EOR",
                Alu3Op::Lsl => "LSL",
                Alu3Op::Lsr => "LSR",
                Alu3Op::Asr => "ASR",
                Alu3Op::FAdd => "FADD",
                Alu3Op::FSub => "FSUB",
                Alu3Op::FMul => "FMUL",
                Alu3Op::FMadd => "FMADD",
                Alu3Op::FMsub => "FMSUB",
            };
            format!("{m} R{rd}, R{rn}, R{rm}")
        }
        I::Alu2 { op, rd, rn } => {
            let m = match op {
                Alu2Op::Fix => "FIX",
                Alu2Op::Float => "FLOAT",
                Alu2Op::FAbs => "FABS",
                Alu2Op::Bitr => "BITR",
            };
            format!("{m} R{rd}, R{rn}")
        }
        I::AluImm { op, rd, rn, imm } => {
            let m = match op {
                AluImmOp::Add => "ADD",
                AluImmOp::Sub => "SUB",
                AluImmOp::Lsl => "LSL",
                AluImmOp::Lsr => "LSR",
                AluImmOp::Asr => "ASR",
            };
            format!("{m} R{rd}, R{rn}, #{imm}")
        }
        I::MovImm { rd, imm } => format!("MOV R{rd}, #{imm}"),
        I::MovT { rd, imm } => format!("MOVT R{rd}, #{imm}"),
        I::MovCond { cond, rd, rn } => format!("MOV{} R{rd}, R{rn}", cond.suffix()),
        I::MovFromSpecial { rd, sreg } => format!("MOVFS R{rd}, {}", sreg.name()),
        I::MovToSpecial { sreg, rn } => format!("MOVTS {}, R{rn}", sreg.name()),
        I::TestSet { rd, rn, rm } => format!("TESTSET R{rd}, [R{rn}, R{rm}]"),
        I::Load { rd, rn, width, mode } => format!("LDR{} R{rd}, {}", width.suffix(), mem(*rn, mode)),
        I::Store { rd, rn, width, mode } => format!("STR{} R{rd}, {}", width.suffix(), mem(*rn, mode)),
        I::Branch { cond, disp } => format!("B{} #{disp}", cond.suffix()),
        I::BranchLink { disp } => format!("BL #{disp}"),
        I::JumpReg { rn } => format!("JR R{rn}"),
        I::JumpLinkReg { rn } => format!("JALR R{rn}"),
    }
}

/// Disassemble an image to assembler text that reassembles byte-for-byte.
pub fn disassemble(img: &ProgramImage) -> String {
    let mut out = String::new();
    if img.base != 0 {
        out.push_str(&format!(".org {:#x}\n", img.base));
    }
    let mut p = 0usize;
    let n = img.bytes.len();
    while p + 1 < n + 1 && p < n {
        let addr = img.base + p as u32;
        if addr == img.entry && img.entry != img.base {
            out.push_str("_start:\n");
        }
        let hw0 = u16::from_le_bytes([img.bytes[p], img.bytes[p + 1]]);
        let avail = (n - p) / 2;
        let want = length_of(hw0).halfwords();
        // Never let an instruction swallow the entry point: keep it on
        // an item boundary so the `_start` label can be placed.
        let crosses_entry = img.entry > addr && img.entry < addr + 2 * want as u32;
        if want > avail || crosses_entry {
            out.push_str(&format!("  .half {hw0:#06x}\n"));
            p += 2;
            continue;
        }
        let hw1 = if want == 2 { u16::from_le_bytes([img.bytes[p + 2], img.bytes[p + 3]]) } else { 0 };
        let units = [hw0, hw1];
        let (instr, len) = decode_instruction(&units[..want]).expect("length checked");
        let stored = &units[..want];
        let canonical = encode_instruction(&instr);
        let line = match canonical {
            Ok(enc) if enc.units() == stored => Some(format_instruction(&instr)),
            _ => match encode_with_length(&instr, Some(len)) {
                Ok(enc) if enc.units() == stored => {
                    let sfx = if len == Length::Long { ".L" } else { ".S" };
                    let text = format_instruction(&instr);
                    // Attach the suffix to the mnemonic, before operands.
                    Some(match text.find(' ') {
                        Some(sp) => format!("{}{sfx}{}", &text[..sp], &text[sp..]),
                        None => format!("{text}{sfx}"),
                    })
                }
                _ => None,
            },
        };
        match line {
            Some(text) => {
                out.push_str(&format!("  {text}\n"));
                p += 2 * want;
            }
            None => {
                out.push_str(&format!("  .half {hw0:#06x}\n"));
                p += 2;
            }
        }
    }
    out
}
