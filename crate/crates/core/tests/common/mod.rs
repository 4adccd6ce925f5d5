//! Exact binary32 reference arithmetic on big integers. Shares no code
//! with the production floating-point path: operands are decoded into
//! sign/mantissa/exponent triples, combined exactly, and rounded once.

use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};

use episim_core::fpu::Rounding;

pub const QNAN_BITS: u32 = 0x7FC0_0000;
const MAX_BITS: u32 = 0x7F7F_FFFF; // f32::MAX
const INF_BITS: u32 = 0x7F80_0000;

/// Reference result: value bits plus the three sticky exceptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RefResult {
    pub bits: u32,
    pub invalid: bool,
    pub underflow: bool,
    pub overflow: bool,
}

impl RefResult {
    fn exact(bits: u32) -> RefResult {
        RefResult { bits, invalid: false, underflow: false, overflow: false }
    }

    fn invalid() -> RefResult {
        RefResult { bits: QNAN_BITS, invalid: true, underflow: false, overflow: false }
    }
}

#[derive(Debug, Clone)]
enum Num {
    Nan,
    Inf(bool),
    Zero(bool),
    /// value = (-1)^neg * mant * 2^exp, mant > 0
    Finite { neg: bool, mant: BigInt, exp: i64 },
}

fn decode(x: f32) -> Num {
    if x.is_nan() {
        return Num::Nan;
    }
    if x.is_infinite() {
        return Num::Inf(x < 0.0);
    }
    if x == 0.0 {
        return Num::Zero(x.is_sign_negative());
    }
    let b = x.to_bits();
    let neg = b >> 31 == 1;
    let e = (b >> 23) & 0xFF;
    let m = b & 0x7F_FFFF;
    if e == 0 {
        Num::Finite { neg, mant: BigInt::from(m), exp: -149 }
    } else {
        Num::Finite { neg, mant: BigInt::from(m | 0x80_0000), exp: e as i64 - 127 - 23 }
    }
}

fn signed_bits(neg: bool, magnitude: u32) -> u32 {
    magnitude | if neg { 0x8000_0000 } else { 0 }
}

/// Round the exact value `(-1)^neg * mant * 2^exp` (mant > 0) to binary32.
fn round(neg: bool, mant: &BigInt, exp: i64, mode: Rounding) -> RefResult {
    debug_assert!(mant.is_positive());
    let bits = mant.bits() as i64;
    // Final exponent of the unit in the last place, clamped for subnormals.
    let target_exp = (bits - 24 + exp).max(-149);
    let shift = target_exp - exp;
    let (mut q, rem_zero, rem_vs_half) = if shift <= 0 {
        (mant << ((-shift) as u64), true, std::cmp::Ordering::Less)
    } else {
        let sh = shift as u64;
        let q: BigInt = mant >> sh;
        let rem: BigInt = mant - (&q << sh);
        let half: BigInt = BigInt::one() << (sh - 1);
        let rz = rem.is_zero();
        (q, rz, rem.cmp(&half))
    };
    let inexact = !rem_zero;
    let mut texp = target_exp;
    if mode == Rounding::Nearest {
        let up = match rem_vs_half {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Equal => q.bit(0), // ties to even
            std::cmp::Ordering::Less => false,
        };
        if up {
            q += 1;
        }
    }
    if q.bits() > 24 {
        q >>= 1;
        texp += 1;
    }
    let qv = q.to_u32().expect("24-bit quotient");
    let magnitude = if qv == 0 {
        0
    } else if qv < 1 << 23 {
        debug_assert_eq!(texp, -149);
        qv // subnormal: exponent field 0
    } else {
        let unbiased = texp + 23;
        if unbiased > 127 {
            let m = match mode {
                Rounding::Nearest => INF_BITS,
                Rounding::Truncate => MAX_BITS,
            };
            return RefResult {
                bits: signed_bits(neg, m),
                invalid: false,
                underflow: false,
                overflow: true,
            };
        }
        (((unbiased + 127) as u32) << 23) | (qv & 0x7F_FFFF)
    };
    let tiny = magnitude < 0x0080_0000; // below the smallest normal
    RefResult {
        bits: signed_bits(neg, magnitude),
        invalid: false,
        underflow: tiny && inexact,
        overflow: false,
    }
}

/// Exact sum of two decoded finite nonzero numbers, rounded once.
fn round_sum(
    (n1, m1, e1): (bool, &BigInt, i64),
    (n2, m2, e2): (bool, &BigInt, i64),
    mode: Rounding,
) -> RefResult {
    let e = e1.min(e2);
    let v1: BigInt = m1 << (e1 - e) as u64;
    let v2: BigInt = m2 << (e2 - e) as u64;
    let total: BigInt = (if n1 { -v1 } else { v1 }) + (if n2 { -v2 } else { v2 });
    if total.is_zero() {
        // Exact cancellation gives +0 in both supported modes.
        return RefResult::exact(0);
    }
    let neg = total.is_negative();
    round(neg, &BigInt::from(total.magnitude().clone()), e, mode)
}

pub fn ref_add(a: f32, b: f32, mode: Rounding) -> RefResult {
    match (decode(a), decode(b)) {
        (Num::Nan, _) | (_, Num::Nan) => RefResult::invalid(),
        (Num::Inf(x), Num::Inf(y)) if x != y => RefResult::invalid(),
        (Num::Inf(x), _) | (_, Num::Inf(x)) => RefResult::exact(signed_bits(x, INF_BITS)),
        (Num::Zero(x), Num::Zero(y)) => RefResult::exact(signed_bits(x && y, 0)),
        (Num::Zero(_), _) => RefResult::exact(b.to_bits()),
        (_, Num::Zero(_)) => RefResult::exact(a.to_bits()),
        (Num::Finite { neg: n1, mant: m1, exp: e1 }, Num::Finite { neg: n2, mant: m2, exp: e2 }) => {
            round_sum((n1, &m1, e1), (n2, &m2, e2), mode)
        }
    }
}

pub fn ref_mul(a: f32, b: f32, mode: Rounding) -> RefResult {
    match (decode(a), decode(b)) {
        (Num::Nan, _) | (_, Num::Nan) => RefResult::invalid(),
        (Num::Inf(_), Num::Zero(_)) | (Num::Zero(_), Num::Inf(_)) => RefResult::invalid(),
        (Num::Inf(x), other) | (other, Num::Inf(x)) => {
            let oneg = match other {
                Num::Inf(y) => y,
                Num::Zero(y) => y,
                Num::Finite { neg, .. } => neg,
                Num::Nan => unreachable!(),
            };
            RefResult::exact(signed_bits(x != oneg, INF_BITS))
        }
        (Num::Zero(x), other) | (other, Num::Zero(x)) => {
            let oneg = match other {
                Num::Zero(y) => y,
                Num::Finite { neg, .. } => neg,
                _ => unreachable!(),
            };
            RefResult::exact(signed_bits(x != oneg, 0))
        }
        (Num::Finite { neg: n1, mant: m1, exp: e1 }, Num::Finite { neg: n2, mant: m2, exp: e2 }) => {
            round(n1 != n2, &(m1 * m2), e1 + e2, mode)
        }
    }
}

/// Fused `acc + a * b`, rounded once.
#[allow(dead_code)] // each integration test binary uses its own subset
pub fn ref_fmadd(acc: f32, a: f32, b: f32, mode: Rounding) -> RefResult {
    let (da, db, dacc) = (decode(a), decode(b), decode(acc));
    if matches!(da, Num::Nan) || matches!(db, Num::Nan) || matches!(dacc, Num::Nan) {
        return RefResult::invalid();
    }
    // Resolve the product's class first.
    let prod = match (&da, &db) {
        (Num::Inf(_), Num::Zero(_)) | (Num::Zero(_), Num::Inf(_)) => return RefResult::invalid(),
        (Num::Inf(x), Num::Inf(y)) => Num::Inf(x != y),
        (Num::Inf(x), Num::Finite { neg, .. }) | (Num::Finite { neg, .. }, Num::Inf(x)) => {
            Num::Inf(x != neg)
        }
        (Num::Zero(x), Num::Zero(y)) => Num::Zero(x != y),
        (Num::Zero(x), Num::Finite { neg, .. }) | (Num::Finite { neg, .. }, Num::Zero(x)) => {
            Num::Zero(x != neg)
        }
        (
            Num::Finite { neg: n1, mant: m1, exp: e1 },
            Num::Finite { neg: n2, mant: m2, exp: e2 },
        ) => Num::Finite { neg: n1 != n2, mant: m1 * m2, exp: e1 + e2 },
        _ => unreachable!(),
    };
    match (dacc, prod) {
        (Num::Inf(x), Num::Inf(y)) if x != y => RefResult::invalid(),
        (Num::Inf(x), _) => RefResult::exact(signed_bits(x, INF_BITS)),
        (_, Num::Inf(y)) => RefResult::exact(signed_bits(y, INF_BITS)),
        (Num::Zero(x), Num::Zero(y)) => RefResult::exact(signed_bits(x && y, 0)),
        (Num::Zero(_), Num::Finite { neg, mant, exp }) => round(neg, &mant, exp, mode),
        (Num::Finite { .. }, Num::Zero(_)) => RefResult::exact(acc.to_bits()),
        (
            Num::Finite { neg: n1, mant: m1, exp: e1 },
            Num::Finite { neg: n2, mant: m2, exp: e2 },
        ) => round_sum((n1, &m1, e1), (n2, &m2, e2), mode),
        (Num::Nan, _) | (_, Num::Nan) => unreachable!(),
    }
}
