//! Deterministic full-system simulator of a 2D-mesh manycore: scratchpad
//! cores with a dual-issue pipeline, three-channel packet network, DMA
//! engines and a host runtime, plus the assembler and measurement
//! harnesses the command-line tool builds on.

pub mod addr;
pub mod dma;
pub mod ecore;
pub mod fpu;
pub mod harness;
pub mod isa;
pub mod mem;
pub mod mesh;
pub mod platform;
pub mod sim;
pub mod trace;

pub use addr::{decode_address, encode_address, GlobalAddress, NodeAddress, Region};
pub use platform::{PlatformConfig, Side};
