//! Two-pass text assembler.
//!
//! Grammar (one item per line, `;` starts a comment):
//!
//! ```text
//! line      := [label ':'] [item] [';' comment]
//! item      := directive | instruction
//! directive := '.org' imm | '.word' imm | '.half' imm | '.float' float
//!            | '.space' imm | '.entry' label
//! ```
//!
//! Mnemonics are case-insensitive. Condition codes suffix `B` and `MOV`
//! (`BEQ`, `MOVLT`); load/store width suffixes are `B`/`H`/`D` (none =
//! word). An optional `.S`/`.L` suffix forces the 16- or 32-bit form;
//! otherwise the shortest form that fits is chosen. Branches to labels
//! always use the 32-bit form so that sizes are fixed in pass one.
//! Registers are `R0`..`R63` (`LR` = R14); immediates are `#n` with
//! decimal or `0x` hex, the `#` optional.

use std::collections::BTreeMap;

use super::encode::{encode_with_length, EncodeError, Length};
use super::image::ProgramImage;
use super::*;

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum AsmError {
    #[error("line {0}: syntax error: {1}")]
    Syntax(usize, String),
    #[error("line {0}: undefined label {1}")]
    UndefinedLabel(usize, String),
    #[error("line {0}: branch out of range (displacement {1})")]
    BranchOutOfRange(usize, i64),
    #[error("line {0}: {1}")]
    Encode(usize, EncodeError),
}

#[derive(Debug, Clone)]
enum Item {
    Instr { instr: Instruction, force: Option<Length>, branch_target: Option<String>, size: u32 },
    Data(Vec<u8>),
    Org(u32),
    Entry(String),
}

struct Line {
    number: usize,
    item: Item,
}

/// Assemble source text into a program image.
pub fn assemble(source: &str) -> Result<ProgramImage, AsmError> {
    // Pass 1: parse, size every item, collect symbols.
    let mut items: Vec<Line> = Vec::new();
    let mut symbols: BTreeMap<String, u32> = BTreeMap::new();
    let mut lc: u32 = 0;
    let mut base: Option<u32> = None;
    let mut entry_label: Option<(usize, String)> = None;
    let mut emitted = false;

    for (idx, raw) in source.lines().enumerate() {
        let number = idx + 1;
        let mut line = raw;
        if let Some(p) = line.find(';') {
            line = &line[..p];
        }
        let mut line = line.trim();
        // Leading labels.
        while let Some(p) = line.find(':') {
            let (lab, rest) = line.split_at(p);
            let lab = lab.trim();
            if !is_ident(lab) {
                return Err(AsmError::Syntax(number, format!("bad label `{lab}`")));
            }
            symbols.insert(lab.to_string(), lc);
            line = rest[1..].trim();
        }
        if line.is_empty() {
            continue;
        }
        let item = parse_item(number, line)?;
        match &item {
            Item::Org(addr) => {
                if !emitted && base.is_none() {
                    base = Some(*addr);
                    lc = *addr;
                } else if *addr < lc {
                    return Err(AsmError::Syntax(number, ".org may not move backwards".into()));
                } else {
                    lc = *addr;
                }
                // Labels on the same line were recorded before the move;
                // re-pin them to the new location counter.
            }
            Item::Entry(lab) => entry_label = Some((number, lab.clone())),
            Item::Data(bytes) => {
                emitted = true;
                lc += bytes.len() as u32;
            }
            Item::Instr { size, .. } => {
                emitted = true;
                lc += size;
            }
        }
        items.push(Line { number, item });
    }

    let base = base.unwrap_or(0);

    // Pass 2: emit with label resolution.
    let mut bytes: Vec<u8> = Vec::new();
    let mut lc = base;
    for line in &items {
        match &line.item {
            Item::Org(addr) => {
                while lc < *addr {
                    bytes.push(0);
                    lc += 1;
                }
            }
            Item::Entry(_) => {}
            Item::Data(d) => {
                bytes.extend_from_slice(d);
                lc += d.len() as u32;
            }
            Item::Instr { instr, force, branch_target, size } => {
                let mut instr = *instr;
                if let Some(label) = branch_target {
                    let target = *symbols
                        .get(label)
                        .ok_or_else(|| AsmError::UndefinedLabel(line.number, label.clone()))?;
                    let disp = target as i64 - lc as i64;
                    match &mut instr {
                        Instruction::Branch { disp: d, .. } | Instruction::BranchLink { disp: d } => {
                            *d = disp as i32
                        }
                        _ => unreachable!(),
                    }
                    if disp % 2 != 0 || !(-(1 << 20)..(1 << 20)).contains(&disp) {
                        return Err(AsmError::BranchOutOfRange(line.number, disp));
                    }
                }
                let enc = encode_with_length(&instr, *force).map_err(|e| match e {
                    EncodeError::ImmediateOutOfRange(v)
                        if matches!(instr, Instruction::Branch { .. } | Instruction::BranchLink { .. }) =>
                    {
                        AsmError::BranchOutOfRange(line.number, v)
                    }
                    e => AsmError::Encode(line.number, e),
                })?;
                debug_assert_eq!(enc.byte_len(), *size);
                bytes.extend_from_slice(&enc.bytes());
                lc += enc.byte_len();
            }
        }
    }

    let entry = match entry_label {
        Some((n, lab)) => *symbols.get(&lab).ok_or(AsmError::UndefinedLabel(n, lab))?,
        None => *symbols.get("_start").or_else(|| symbols.get("start")).unwrap_or(&base),
    };

    let img = ProgramImage { base, bytes, symbols, entry };
    img.validate().map_err(|e| AsmError::Syntax(0, e.to_string()))?;
    Ok(img)
}

fn is_ident(s: &str) -> bool {
    !s.is_empty()
        && s.chars().next().unwrap().is_ascii_alphabetic()
            | (s.starts_with('_') || s.starts_with('.'))
        && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '.')
}

fn parse_item(number: usize, line: &str) -> Result<Item, AsmError> {
    let syn = |m: String| AsmError::Syntax(number, m);
    let (head, rest) = match line.find(char::is_whitespace) {
        Some(p) => (&line[..p], line[p..].trim()),
        None => (line, ""),
    };
    if let Some(directive) = head.strip_prefix('.') {
        return match directive.to_ascii_lowercase().as_str() {
            "org" => Ok(Item::Org(parse_imm(rest).ok_or_else(|| syn(format!("bad .org operand `{rest}`")))? as u32)),
            "word" => {
                let v = parse_imm(rest).ok_or_else(|| syn(format!("bad .word operand `{rest}`")))? as u32;
                Ok(Item::Data(v.to_le_bytes().to_vec()))
            }
            "half" => {
                let v = parse_imm(rest).ok_or_else(|| syn(format!("bad .half operand `{rest}`")))? as u16;
                Ok(Item::Data(v.to_le_bytes().to_vec()))
            }
            "float" => {
                let v: f32 = rest.parse().map_err(|_| syn(format!("bad .float operand `{rest}`")))?;
                Ok(Item::Data(v.to_le_bytes().to_vec()))
            }
            "space" => {
                let v = parse_imm(rest).ok_or_else(|| syn(format!("bad .space operand `{rest}`")))?;
                Ok(Item::Data(vec![0; v as usize]))
            }
            "entry" => Ok(Item::Entry(rest.to_string())),
            other => Err(syn(format!("unknown directive .{other}"))),
        };
    }
    let (instr, force, branch_target) = parse_instruction(number, head, rest)?;
    // Size everything now so pass one is exact: label branches are long.
    let size = if branch_target.is_some() {
        4
    } else {
        encode_with_length(&instr, force)
            .map_err(|e| AsmError::Encode(number, e))?
            .byte_len()
    };
    let force = if branch_target.is_some() { Some(Length::Long) } else { force };
    Ok(Item::Instr { instr, force, branch_target, size })
}

struct Operands<'a> {
    parts: Vec<&'a str>,
}

impl<'a> Operands<'a> {
    fn parse(s: &'a str) -> Operands<'a> {
        // Split on top-level commas; brackets group.
        let mut parts = Vec::new();
        let mut depth = 0;
        let mut start = 0;
        for (i, c) in s.char_indices() {
            match c {
                '[' => depth += 1,
                ']' => depth -= 1,
                ',' if depth == 0 => {
                    parts.push(s[start..i].trim());
                    start = i + 1;
                }
                _ => {}
            }
        }
        let last = s[start..].trim();
        if !last.is_empty() {
            parts.push(last);
        }
        Operands { parts }
    }
}

fn parse_reg(s: &str) -> Option<u8> {
    let s = s.trim();
    if s.eq_ignore_ascii_case("LR") {
        return Some(LINK_REG);
    }
    let rest = s.strip_prefix(['r', 'R'])?;
    let n: u8 = rest.parse().ok()?;
    (n < NUM_REGS).then_some(n)
}

fn parse_imm(s: &str) -> Option<i64> {
    let s = s.trim().strip_prefix('#').unwrap_or_else(|| s.trim()).trim();
    let (neg, s) = match s.strip_prefix('-') {
        Some(r) => (true, r),
        None => (false, s),
    };
    let v = if let Some(hex) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) {
        i64::from_str_radix(hex, 16).ok()?
    } else {
        s.parse::<i64>().ok()?
    };
    Some(if neg { -v } else { v })
}

/// `[Rn, #d]` / `[Rn, Rm]` / `[Rn]` (+ trailing `, #d` = postmodify).
fn parse_mem_operands(ops: &[&str]) -> Option<(u8, AddrMode)> {
    let first = ops[0];
    let inner = first.strip_prefix('[')?.strip_suffix(']')?;
    let inner_parts: Vec<&str> = inner.split(',').map(str::trim).collect();
    match (inner_parts.len(), ops.len()) {
        (1, 1) => Some((parse_reg(inner_parts[0])?, AddrMode::Displacement(0))),
        (1, 2) => {
            // [Rn], #d postmodify
            let d = parse_imm(ops[1])? as i32;
            Some((parse_reg(inner_parts[0])?, AddrMode::Postmodify(d)))
        }
        (2, 1) => {
            let rn = parse_reg(inner_parts[0])?;
            if let Some(rm) = parse_reg(inner_parts[1]) {
                Some((rn, AddrMode::Index(rm)))
            } else {
                Some((rn, AddrMode::Displacement(parse_imm(inner_parts[1])? as i32)))
            }
        }
        _ => None,
    }
}

fn parse_instruction(
    number: usize,
    head: &str,
    rest: &str,
) -> Result<(Instruction, Option<Length>, Option<String>), AsmError> {
    use Instruction as I;
    let syn = |m: String| AsmError::Syntax(number, m);
    let mut mnem = head.to_ascii_uppercase();
    let mut force = None;
    if let Some(m) = mnem.strip_suffix(".L") {
        force = Some(Length::Long);
        mnem = m.to_string();
    } else if let Some(m) = mnem.strip_suffix(".S") {
        force = Some(Length::Short);
        mnem = m.to_string();
    }
    let ops = Operands::parse(rest).parts;
    let reg = |i: usize| -> Result<u8, AsmError> {
        ops.get(i)
            .and_then(|s| parse_reg(s))
            .ok_or_else(|| syn(format!("expected register operand {i}")))
    };
    let imm = |i: usize| -> Result<i64, AsmError> {
        ops.get(i)
            .and_then(|s| parse_imm(s))
            .ok_or_else(|| syn(format!("expected immediate operand {i}")))
    };
    let nops = |n: usize| -> Result<(), AsmError> {
        if ops.len() == n {
            Ok(())
        } else {
            Err(syn(format!("expected {n} operands, got {}", ops.len())))
        }
    };

    let alu3 = |op: Alu3Op, imm_op: Option<AluImmOp>| -> Result<Instruction, AsmError> {
        nops(3)?;
        let rd = reg(0)?;
        let rn = reg(1)?;
        if let Some(rm) = parse_reg(ops[2]) {
            Ok(I::Alu3 { op, rd, rn, rm })
        } else if let Some(io) = imm_op {
            Ok(I::AluImm { op: io, rd, rn, imm: imm(2)? as i32 })
        } else {
            Err(syn(format!("`{mnem}` takes three registers")))
        }
    };

    let instr = match mnem.as_str() {
        "NOP" => { nops(0)?; I::Nop }
        "IDLE" => { nops(0)?; I::Idle }
        "BKPT" => { nops(0)?; I::Bkpt }
        "MBKPT" => { nops(0)?; I::Mbkpt }
        "RTI" => { nops(0)?; I::Rti }
        "GID" => { nops(0)?; I::Gid }
        "GIE" => { nops(0)?; I::Gie }
        "UNIMPL" => { nops(0)?; I::Unimpl }
        "SYNC" => { nops(0)?; I::Sync }
        "WAND" => { nops(0)?; I::Wand }
        "TRAP" => { nops(1)?; I::Trap(imm(0)? as u8) }
        "ADD" => alu3(Alu3Op::Add, Some(AluImmOp::Add))?,
        "SUB" => alu3(Alu3Op::Sub, Some(AluImmOp::Sub))?,
        "AND" => alu3(Alu3Op::And, None)?,
        "ORR" => alu3(Alu3Op::Orr, None)?,
        "EOR" => alu3(Alu3Op::Eor, None)?,
        "LSL" => alu3(Alu3Op::Lsl, Some(AluImmOp::Lsl))?,
        "LSR" => alu3(Alu3Op::Lsr, Some(AluImmOp::Lsr))?,
        "ASR" => alu3(Alu3Op::Asr, Some(AluImmOp::Asr))?,
        "FADD" => alu3(Alu3Op::FAdd, None)?,
        "FSUB" => alu3(Alu3Op::FSub, None)?,
        "FMUL" => alu3(Alu3Op::FMul, None)?,
        "FMADD" => alu3(Alu3Op::FMadd, None)?,
        "FMSUB" => alu3(Alu3Op::FMsub, None)?,
        "BITR" => { nops(2)?; I::Alu2 { op: Alu2Op::Bitr, rd: reg(0)?, rn: reg(1)? } }
        "FIX" => { nops(2)?; I::Alu2 { op: Alu2Op::Fix, rd: reg(0)?, rn: reg(1)? } }
        "FLOAT" => { nops(2)?; I::Alu2 { op: Alu2Op::Float, rd: reg(0)?, rn: reg(1)? } }
        "FABS" => { nops(2)?; I::Alu2 { op: Alu2Op::FAbs, rd: reg(0)?, rn: reg(1)? } }
        "MOVT" => { nops(2)?; I::MovT { rd: reg(0)?, imm: imm(1)? as u16 } }
        "MOVTS" => {
            nops(2)?;
            let sreg = SpecialReg::from_name(&ops[0].to_ascii_uppercase())
                .ok_or_else(|| syn(format!("unknown special register `{}`", ops[0])))?;
            I::MovToSpecial { sreg, rn: reg(1)? }
        }
        "MOVFS" => {
            nops(2)?;
            let sreg = SpecialReg::from_name(&ops[1].to_ascii_uppercase())
                .ok_or_else(|| syn(format!("unknown special register `{}`", ops[1])))?;
            I::MovFromSpecial { rd: reg(0)?, sreg }
        }
        "TESTSET" => {
            nops(2)?;
            let rd = reg(0)?;
            let (rn, mode) = parse_mem_operands(&ops[1..])
                .ok_or_else(|| syn("TESTSET needs [Rn, Rm]".into()))?;
            match mode {
                AddrMode::Index(rm) => I::TestSet { rd, rn, rm },
                _ => return Err(syn("TESTSET supports only the [Rn, Rm] form".into())),
            }
        }
        "BL" => {
            nops(1)?;
            if let Some(d) = parse_imm(ops[0]) {
                I::BranchLink { disp: d as i32 }
            } else {
                return Ok((I::BranchLink { disp: 0 }, force, Some(ops[0].to_string())));
            }
        }
        "JR" => { nops(1)?; I::JumpReg { rn: reg(0)? } }
        "JALR" => { nops(1)?; I::JumpLinkReg { rn: reg(0)? } }
        _ => {
            if let Some(suffix) = mnem.strip_prefix("LDR").or_else(|| mnem.strip_prefix("STR")) {
                let width = match suffix {
                    "" => Width::Word,
                    "B" => Width::Byte,
                    "H" => Width::Half,
                    "D" => Width::Double,
                    _ => return Err(syn(format!("unknown mnemonic `{mnem}`"))),
                };
                if ops.is_empty() {
                    return Err(syn("load/store needs operands".into()));
                }
                let rd = reg(0)?;
                let (rn, mode) = parse_mem_operands(&ops[1..])
                    .ok_or_else(|| syn("bad load/store address operand".into()))?;
                let i = if mnem.starts_with("LDR") {
                    I::Load { rd, rn, width, mode }
                } else {
                    I::Store { rd, rn, width, mode }
                };
                return Ok((i, force, None));
            }
            if let Some(suffix) = mnem.strip_prefix("MOV") {
                let cond = Cond::from_suffix(suffix)
                    .ok_or_else(|| syn(format!("unknown mnemonic `{mnem}`")))?;
                nops(2)?;
                let rd = reg(0)?;
                if let Some(rn) = parse_reg(ops[1]) {
                    return Ok((I::MovCond { cond, rd, rn }, force, None));
                }
                if cond != Cond::Always {
                    return Err(syn("conditional MOV takes a register source".into()));
                }
                let v = imm(1)?;
                if !(0..=0xFFFF).contains(&v) {
                    return Err(AsmError::Encode(number, EncodeError::ImmediateOutOfRange(v)));
                }
                return Ok((I::MovImm { rd, imm: v as u16 }, force, None));
            }
            if let Some(suffix) = mnem.strip_prefix('B') {
                let cond = Cond::from_suffix(suffix)
                    .ok_or_else(|| syn(format!("unknown mnemonic `{mnem}`")))?;
                nops(1)?;
                if let Some(d) = parse_imm(ops[0]) {
                    return Ok((I::Branch { cond, disp: d as i32 }, force, None));
                }
                return Ok((I::Branch { cond, disp: 0 }, force, Some(ops[0].to_string())));
            }
            return Err(syn(format!("unknown mnemonic `{mnem}`")));
        }
    };
    Ok((instr, force, None))
}
