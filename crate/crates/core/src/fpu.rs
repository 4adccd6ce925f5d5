//! IEEE-754 binary32 arithmetic with selectable rounding.
//!
//! Strategy: operands are widened to f64, where products of two binary32
//! values are exact and sums leave an exactly-representable residual
//! (Knuth two-sum). The pair `(s, r)` with `exact = s + r` is then rounded
//! to binary32 in the requested mode, stepping the f64-rounded value by one
//! ulp when the residual shows it landed on the wrong side of a grid point
//! or tie. This yields single-rounding (fused) FMADD/FMSUB as well.
//!
//! Only the three sticky exceptions the core exposes are reported:
//! invalid, underflow (tiny and inexact) and overflow.

/// Rounding mode, selected by CONFIG bit 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounding {
    /// Round to nearest, ties to even.
    #[default]
    Nearest,
    /// Round toward zero.
    Truncate,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FpResult {
    pub value: f32,
    pub invalid: bool,
    pub underflow: bool,
    pub overflow: bool,
}

impl FpResult {
    fn exact(value: f32) -> FpResult {
        FpResult { value, invalid: false, underflow: false, overflow: false }
    }
}

pub const QNAN: f32 = f32::from_bits(0x7FC0_0000);
const MIN_NORMAL: f64 = 1.1754943508222875e-38; // 2^-126

/// `a + b` with `|err| = a + b - fl(a + b)` exact (Knuth two-sum).
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

fn next_toward_zero(x: f32) -> f32 {
    debug_assert!(x != 0.0 && x.is_finite());
    f32::from_bits(x.to_bits() - 1)
}

fn next_away_from_zero(x: f32) -> f32 {
    f32::from_bits(x.to_bits() + 1)
}

/// Round `exact = s + r` (with `r` the exact residual of the f64 sum) to
/// binary32. `s` is the f64 nearest to `exact`, so `exact` can only fall
/// on the far side of a binary32 grid point or tie point when `s` lies
/// exactly on it; those are the two cases the residual corrects.
fn round_residual(s: f64, r: f64, mode: Rounding) -> FpResult {
    debug_assert!(s.is_finite());
    if s == 0.0 {
        // `exact` is at most a quarter-ulp of the smallest f64 subnormal.
        let sign = if r != 0.0 { r } else { s };
        let value = if sign.is_sign_negative() { -0.0 } else { 0.0 };
        return FpResult { value, invalid: false, underflow: r != 0.0, overflow: false };
    }
    let mut value = s as f32; // rounds to nearest, ties to even
    match mode {
        Rounding::Nearest => {
            if value.is_infinite() && r != 0.0 {
                // `s` can sit exactly on the overflow threshold
                // (2^128 - 2^103, halfway between MAX and 2^128) with the
                // true value a hair below it; the finite-neighbour tie
                // logic below cannot express that midpoint.
                let threshold = f32::MAX as f64 + 2f64.powi(103);
                if s.abs() == threshold && (r < 0.0) != (s < 0.0) {
                    value = if s < 0.0 { f32::MIN } else { f32::MAX };
                }
            }
            if value.is_finite() && r != 0.0 && (value as f64) != s {
                // `s` may sit exactly halfway between two binary32
                // neighbours; the residual then breaks the tie.
                let below = if (value as f64) <= s { value } else { next_toward_zero_signed(value) };
                if below.is_finite() {
                    let above = next_up(below);
                    if above.is_finite() {
                        let mid = (below as f64 + above as f64) * 0.5;
                        if s == mid {
                            value = if r > 0.0 { above } else { below };
                        }
                    }
                }
            }
            if value.is_infinite() {
                return FpResult { value, invalid: false, underflow: false, overflow: true };
            }
        }
        Rounding::Truncate => {
            if value.is_infinite() {
                value = if value > 0.0 { f32::MAX } else { f32::MIN };
            } else if value != 0.0 && (value as f64).abs() > s.abs() {
                value = next_toward_zero(value);
            } else if value != 0.0
                && (value as f64) == s
                && r != 0.0
                && (r < 0.0) != (s < 0.0)
            {
                // Exactly on the grid but the true value is a hair
                // closer to zero.
                value = next_toward_zero(value);
            } else if value == 0.0 {
                value = if s < 0.0 { -0.0 } else { 0.0 };
            }
        }
    }
    let inexact = (value as f64) != s || r != 0.0;
    let tiny = value.abs() < MIN_NORMAL as f32;
    let overflow = mode == Rounding::Truncate && value.abs() == f32::MAX && s.abs() > f32::MAX as f64;
    FpResult { value, invalid: false, underflow: tiny && inexact, overflow }
}

/// Largest binary32 strictly below `x` in value order (toward -inf).
fn next_toward_zero_signed(x: f32) -> f32 {
    if x > 0.0 {
        next_toward_zero(x)
    } else if x < 0.0 {
        -next_away_from_zero(-x)
    } else if x.is_sign_negative() {
        // -0.0: next below is the smallest negative subnormal.
        -f32::from_bits(1)
    } else {
        -0.0
    }
}

fn next_up(x: f32) -> f32 {
    if x >= 0.0 {
        if x == 0.0 { f32::from_bits(1) } else { next_away_from_zero(x) }
    } else {
        let t = next_toward_zero(-x);
        if t == 0.0 { 0.0 } else { -t }
    }
}

fn nan_result() -> FpResult {
    FpResult { value: QNAN, invalid: true, underflow: false, overflow: false }
}

fn round_sum_pair(s: f64, r: f64, mode: Rounding) -> FpResult {
    if s.is_nan() {
        return nan_result();
    }
    if s.is_infinite() {
        // Unreachable from binary32 operands, but keep it total.
        return match mode {
            Rounding::Nearest => FpResult { value: s as f32, invalid: false, underflow: false, overflow: true },
            Rounding::Truncate => FpResult {
                value: if s > 0.0 { f32::MAX } else { f32::MIN },
                invalid: false,
                underflow: false,
                overflow: true,
            },
        };
    }
    round_residual(s, r, mode)
}

pub fn fadd(a: f32, b: f32, mode: Rounding) -> FpResult {
    if a.is_nan() || b.is_nan() {
        return nan_result();
    }
    if a.is_infinite() || b.is_infinite() {
        let v = a + b; // inf + -inf -> NaN
        return if v.is_nan() { nan_result() } else { FpResult::exact(v) };
    }
    let (s, r) = two_sum(a as f64, b as f64);
    round_sum_pair(s, r, mode)
}

pub fn fsub(a: f32, b: f32, mode: Rounding) -> FpResult {
    fadd(a, -b, mode)
}

pub fn fmul(a: f32, b: f32, mode: Rounding) -> FpResult {
    if a.is_nan() || b.is_nan() {
        return nan_result();
    }
    if (a.is_infinite() && b == 0.0) || (b.is_infinite() && a == 0.0) {
        return nan_result();
    }
    if a.is_infinite() || b.is_infinite() {
        return FpResult::exact(a * b);
    }
    // The product of two binary32 values is exact in binary64.
    let p = a as f64 * b as f64;
    round_sum_pair(p, 0.0, mode)
}

/// Fused `acc + a * b` with a single rounding.
pub fn fmadd(acc: f32, a: f32, b: f32, mode: Rounding) -> FpResult {
    if acc.is_nan() || a.is_nan() || b.is_nan() {
        return nan_result();
    }
    if (a.is_infinite() && b == 0.0) || (b.is_infinite() && a == 0.0) {
        return nan_result();
    }
    let p = a as f64 * b as f64; // exact
    if p.is_infinite() || acc.is_infinite() {
        let v = acc as f64 + p;
        return if v.is_nan() { nan_result() } else { FpResult::exact(v as f32) };
    }
    let (s, r) = two_sum(acc as f64, p);
    round_sum_pair(s, r, mode)
}

/// Fused `acc - a * b` with a single rounding.
pub fn fmsub(acc: f32, a: f32, b: f32, mode: Rounding) -> FpResult {
    fmadd(acc, -a, b, mode)
}

pub fn fabs(a: f32) -> f32 {
    f32::from_bits(a.to_bits() & 0x7FFF_FFFF)
}

/// Float-to-int conversion, truncating. Out-of-range and NaN saturate
/// (NaN to zero) and raise invalid.
pub fn fix(a: f32) -> (i32, bool) {
    if a.is_nan() {
        return (0, true);
    }
    if a >= 2147483648.0 {
        return (i32::MAX, true);
    }
    if a < -2147483648.0 {
        return (i32::MIN, true);
    }
    (a.trunc() as i32, false)
}

/// Int-to-float conversion in the given rounding mode.
pub fn float(v: i32, mode: Rounding) -> FpResult {
    round_sum_pair(v as f64, 0.0, mode)
}
