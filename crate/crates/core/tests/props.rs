//! Property tests: randomized invariants that complement the directed
//! suites.

mod common;

use proptest::prelude::*;

use episim_core::fpu::{self, Rounding};
use episim_core::harness::{run_traffic, Pattern, TrafficParams};
use episim_core::isa::Width;
use episim_core::mem::Scratchpad;
use episim_core::{decode_address, encode_address, NodeAddress, PlatformConfig};

proptest! {
    #[test]
    fn address_encode_decode_round_trips(row in 0u8..64, col in 0u8..64, off in 0u32..(1 << 20)) {
        let raw = encode_address(NodeAddress::new(row, col), off).unwrap();
        let ga = decode_address(raw);
        prop_assert_eq!((ga.node.row, ga.node.col, ga.offset), (row, col, off));
    }

    #[test]
    fn fadd_matches_oracle_and_commutes(a in any::<u32>(), b in any::<u32>()) {
        let (x, y) = (f32::from_bits(a), f32::from_bits(b));
        for mode in [Rounding::Nearest, Rounding::Truncate] {
            let r = fpu::fadd(x, y, mode);
            prop_assert_eq!(r.value.to_bits(), common::ref_add(x, y, mode).bits);
            prop_assert_eq!(r.value.to_bits(), fpu::fadd(y, x, mode).value.to_bits());
        }
    }

    #[test]
    fn fmul_matches_oracle_and_commutes(a in any::<u32>(), b in any::<u32>()) {
        let (x, y) = (f32::from_bits(a), f32::from_bits(b));
        for mode in [Rounding::Nearest, Rounding::Truncate] {
            let r = fpu::fmul(x, y, mode);
            prop_assert_eq!(r.value.to_bits(), common::ref_mul(x, y, mode).bits);
            prop_assert_eq!(r.value.to_bits(), fpu::fmul(y, x, mode).value.to_bits());
        }
    }

    #[test]
    fn truncate_never_exceeds_nearest_magnitude(a in any::<u32>(), b in any::<u32>()) {
        let (x, y) = (f32::from_bits(a), f32::from_bits(b));
        let n = fpu::fadd(x, y, Rounding::Nearest).value;
        let t = fpu::fadd(x, y, Rounding::Truncate).value;
        if !n.is_nan() && !t.is_nan() {
            prop_assert!(t.abs() <= n.abs() || n.is_infinite());
        }
    }

    #[test]
    fn scratchpad_round_trips(off in 0u32..32760, w in 0usize..4, data in any::<u64>()) {
        let width = [Width::Byte, Width::Half, Width::Word, Width::Double][w];
        let off = off & !(width.bytes() - 1);
        let mut m = Scratchpad::new(32 * 1024);
        m.write(off, width, data);
        let mask = if width.bytes() == 8 { u64::MAX } else { (1u64 << (8 * width.bytes())) - 1 };
        prop_assert_eq!(m.read(off, width), data & mask);
    }

    #[test]
    fn traffic_conserves_packets(rate in 0.05f64..1.0, seed in any::<u64>(), pat in 0usize..5) {
        let cfg = PlatformConfig::e16();
        let pattern = Pattern::ALL[pat];
        let r = run_traffic(&cfg, &TrafficParams { pattern, rate, cycles: 200, seed });
        prop_assert!(r.conserved, "{:?}", r);
    }
}
