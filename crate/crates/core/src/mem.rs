//! Per-core scratchpad: flat byte array backed by four 8-byte-wide banks.
//!
//! Each bank serves one access per cycle. The four requesters, in fixed
//! priority order, are network writes, DMA, core load/store and fetch;
//! the simulation visits them in that order each cycle, so the arbiter
//! only needs to record which banks are taken. Aligned accesses never
//! span banks; unaligned accesses are rejected by the caller.

use crate::isa::Width;

pub const NUM_BANKS: usize = 4;
pub const BANK_WIDTH: u32 = 8;

/// Requesters in decreasing priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Port {
    NetworkWrite,
    Dma,
    LoadStore,
    Fetch,
}

pub fn bank_of(offset: u32) -> usize {
    ((offset / BANK_WIDTH) as usize) % NUM_BANKS
}

/// Per-node, per-cycle bank grant state. Reset at the top of each cycle.
#[derive(Debug, Clone, Default)]
pub struct BankArbiter {
    taken: [bool; NUM_BANKS],
}

impl BankArbiter {
    pub fn reset(&mut self) {
        self.taken = [false; NUM_BANKS];
    }

    /// Claim the bank holding `offset`; false if already in use this cycle.
    pub fn request(&mut self, offset: u32) -> bool {
        let b = bank_of(offset);
        if self.taken[b] {
            false
        } else {
            self.taken[b] = true;
            true
        }
    }
}

#[derive(Debug, Clone)]
pub struct Scratchpad {
    bytes: Vec<u8>,
}

impl Scratchpad {
    pub fn new(size: usize) -> Scratchpad {
        Scratchpad { bytes: vec![0; size] }
    }

    pub fn size(&self) -> u32 {
        self.bytes.len() as u32
    }

    pub fn in_range(&self, offset: u32, len: u32) -> bool {
        (offset as u64 + len as u64) <= self.bytes.len() as u64
    }

    /// Little-endian read; caller has validated range and alignment.
    pub fn read(&self, offset: u32, width: Width) -> u64 {
        let p = offset as usize;
        let n = width.bytes() as usize;
        let mut v = 0u64;
        for i in 0..n {
            v |= (self.bytes[p + i] as u64) << (8 * i);
        }
        v
    }

    pub fn write(&mut self, offset: u32, width: Width, value: u64) {
        let p = offset as usize;
        for i in 0..width.bytes() as usize {
            self.bytes[p + i] = (value >> (8 * i)) as u8;
        }
    }

    pub fn load_bytes(&mut self, offset: u32, data: &[u8]) {
        self.bytes[offset as usize..offset as usize + data.len()].copy_from_slice(data);
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }
}

/// True if `offset` is aligned for `width` (bank-crossing is impossible
/// for aligned accesses because the bank row is 8 bytes).
pub fn aligned(offset: u32, width: Width) -> bool {
    offset % width.bytes() == 0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bank_mapping_strides_by_eight() {
        assert_eq!(bank_of(0), 0);
        assert_eq!(bank_of(7), 0);
        assert_eq!(bank_of(8), 1);
        assert_eq!(bank_of(24), 3);
        assert_eq!(bank_of(32), 0);
    }

    #[test]
    fn arbiter_one_grant_per_bank() {
        let mut a = BankArbiter::default();
        assert!(a.request(0));
        assert!(!a.request(4)); // same bank
        assert!(a.request(8)); // next bank
        a.reset();
        assert!(a.request(0));
    }

    #[test]
    fn little_endian_round_trip() {
        let mut m = Scratchpad::new(64);
        m.write(8, Width::Word, 0x1122_3344);
        assert_eq!(m.read(8, Width::Byte), 0x44);
        assert_eq!(m.read(9, Width::Byte), 0x33);
        assert_eq!(m.read(8, Width::Word), 0x1122_3344);
        m.write(16, Width::Double, 0xAABB_CCDD_0011_2233);
        assert_eq!(m.read(16, Width::Double), 0xAABB_CCDD_0011_2233);
        assert_eq!(m.read(20, Width::Word), 0xAABB_CCDD);
    }

    #[test]
    fn alignment_rules() {
        assert!(aligned(4, Width::Word));
        assert!(!aligned(2, Width::Word));
        assert!(aligned(2, Width::Half));
        assert!(!aligned(4, Width::Double));
        assert!(aligned(1, Width::Byte));
    }
}
