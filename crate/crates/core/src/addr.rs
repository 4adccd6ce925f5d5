//! The flat 32-bit distributed address space.
//!
//! An address is split into a 6-bit mesh row, a 6-bit mesh column, and a
//! 20-bit local byte offset, giving 4096 addressable nodes of up to 1 MiB
//! each. All functions here are pure.

use serde::{Deserialize, Serialize};

use crate::platform::PlatformConfig;

pub const LOCAL_BITS: u32 = 20;
pub const LOCAL_SPACE: u32 = 1 << LOCAL_BITS;
pub const MAX_COORD: u8 = 64;

/// (row, column) mesh coordinate of one node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct NodeAddress {
    pub row: u8,
    pub col: u8,
}

impl NodeAddress {
    pub fn new(row: u8, col: u8) -> Self {
        debug_assert!(row < MAX_COORD && col < MAX_COORD);
        NodeAddress { row, col }
    }

    pub fn manhattan(self, other: NodeAddress) -> u32 {
        let dr = (self.row as i32 - other.row as i32).unsigned_abs();
        let dc = (self.col as i32 - other.col as i32).unsigned_abs();
        dr + dc
    }
}

impl std::fmt::Display for NodeAddress {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{})", self.row, self.col)
    }
}

/// A 32-bit global address broken into node coordinate and local offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GlobalAddress {
    pub raw: u32,
    pub node: NodeAddress,
    pub offset: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Region {
    /// The address names the querying node itself.
    LocalCore,
    /// Another instantiated core on the platform.
    RemoteCore,
    /// A configured off-chip memory window; carries the window index.
    OffChipWindow(usize),
    Unmapped,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum AddrError {
    #[error("offset {0:#x} exceeds the 20-bit local space")]
    OffsetOutOfRange(u32),
}

/// Pure bit slicing of a raw address; total over all 32-bit values.
pub fn decode_address(raw: u32) -> GlobalAddress {
    GlobalAddress {
        raw,
        node: NodeAddress {
            row: (raw >> 26) as u8,
            col: ((raw >> 20) & 0x3f) as u8,
        },
        offset: raw & (LOCAL_SPACE - 1),
    }
}

pub fn encode_address(node: NodeAddress, offset: u32) -> Result<u32, AddrError> {
    if offset >= LOCAL_SPACE {
        return Err(AddrError::OffsetOutOfRange(offset));
    }
    Ok(((node.row as u32) << 26) | ((node.col as u32) << 20) | offset)
}

/// Classify an address as seen from `this` node under `config`.
///
/// Node coordinates outside the instantiated grid and all windows are
/// `Unmapped`; a local offset past the configured core memory still
/// classifies as `LocalCore` and faults on access instead.
pub fn classify(raw: u32, config: &PlatformConfig, this: NodeAddress) -> Region {
    let ga = decode_address(raw);
    if ga.node == this {
        return Region::LocalCore;
    }
    if config.contains_core(ga.node) {
        return Region::RemoteCore;
    }
    if let Some(idx) = config.window_containing(ga.node) {
        return Region::OffChipWindow(idx);
    }
    Region::Unmapped
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::platform::PlatformConfig;

    #[test]
    fn decode_known_addresses() {
        // Shared DRAM window base on the Parallella memory map.
        let ga = decode_address(0x8E00_0000);
        assert_eq!((ga.node.row, ga.node.col, ga.offset), (35, 32, 0));
        let ga = decode_address(0);
        assert_eq!((ga.node.row, ga.node.col, ga.offset), (0, 0, 0));
        // Grid origin of the 4x4 Parallella core array.
        let ga = decode_address(0x8080_0000);
        assert_eq!((ga.node.row, ga.node.col, ga.offset), (32, 8, 0));
    }

    #[test]
    fn encode_known_addresses() {
        assert_eq!(encode_address(NodeAddress::new(35, 32), 0).unwrap(), 0x8E00_0000);
        assert_eq!(encode_address(NodeAddress::new(0, 0), 0x14).unwrap(), 0x0000_0014);
        assert_eq!(encode_address(NodeAddress::new(32, 8), 0x7FFC).unwrap(), 0x8080_7FFC);
    }

    #[test]
    fn encode_rejects_oversized_offset() {
        assert_eq!(
            encode_address(NodeAddress::new(0, 0), LOCAL_SPACE),
            Err(AddrError::OffsetOutOfRange(LOCAL_SPACE))
        );
    }

    #[test]
    fn classify_parallella() {
        let cfg = PlatformConfig::parallella();
        let me = NodeAddress::new(32, 8);
        assert!(matches!(classify(0x8E00_1000, &cfg, me), Region::OffChipWindow(_)));
        assert_eq!(classify(0x8080_0000, &cfg, me), Region::LocalCore);
        assert_eq!(classify(0x0000_0000, &cfg, me), Region::Unmapped);
        assert_eq!(classify(0x8090_0000, &cfg, me), Region::RemoteCore);
    }

    #[test]
    fn node_capacity_is_4096() {
        use std::collections::HashSet;
        let mut nodes = HashSet::new();
        for raw in (0..u32::MAX).step_by(1 << 20) {
            nodes.insert(decode_address(raw).node);
        }
        nodes.insert(decode_address(u32::MAX).node);
        assert_eq!(nodes.len(), 4096);
    }
}
