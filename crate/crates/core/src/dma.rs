//! Per-core DMA: two channels driven by the special-register file.
//!
//! A channel moves one element (1-8 bytes) per cycle between strided
//! source and destination addresses. Local accesses contend for memory
//! banks like any other port; remote reads block the channel on the
//! reply, remote writes retry under mesh pushback. Writing the channel
//! CONFIG register with the start bit set arms the transfer; completion
//! raises the channel's interrupt.

use crate::addr::{classify, NodeAddress, Region, LOCAL_SPACE};
use crate::isa::Width;
use crate::mem::{aligned, BankArbiter, Scratchpad};
use crate::mesh::{NocState, Packet, PacketKind, ReplyTag};
use crate::platform::PlatformConfig;

/// CONFIG bit that launches the transfer.
pub const DMA_START: u32 = 1 << 31;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DmaEvent {
    None,
    Complete,
    /// Address that could not be accessed.
    Fault(u32),
}

#[derive(Debug, Clone, Default)]
pub struct DmaChannel {
    pub src: u32,
    pub dst: u32,
    pub count: u32,
    /// Low half: source stride; high half: destination stride. Both are
    /// signed byte strides applied after every element.
    pub stride: u32,
    pub config: u32,
    active: bool,
    waiting: bool,
    /// Element read but not yet written (destination busy last cycle).
    pending: Option<u64>,
}

impl DmaChannel {
    pub fn width(&self) -> Width {
        Width::from_code(self.config as u8 & 3)
    }

    pub fn busy(&self) -> bool {
        self.active
    }

    /// Register index: 0 src, 1 dst, 2 count, 3 stride, 4 config.
    /// Returns true when this write starts a transfer.
    pub fn write_reg(&mut self, which: usize, v: u32) -> bool {
        match which {
            0 => self.src = v,
            1 => self.dst = v,
            2 => self.count = v,
            3 => self.stride = v,
            4 => {
                self.config = v;
                if v & DMA_START != 0 {
                    self.active = true;
                    self.waiting = false;
                    self.pending = None;
                    return true;
                }
            }
            _ => {}
        }
        false
    }

    pub fn read_reg(&self, which: usize) -> u32 {
        match which {
            0 => self.src,
            1 => self.dst,
            2 => self.count,
            3 => self.stride,
            4 => self.config,
            _ => 0,
        }
    }

    /// Reply to this channel's outstanding remote read.
    pub fn complete_read(&mut self, data: u64) {
        debug_assert!(self.waiting);
        self.waiting = false;
        self.pending = Some(data);
    }

    fn advance(&mut self) -> DmaEvent {
        self.src = self.src.wrapping_add((self.stride & 0xFFFF) as u16 as i16 as u32);
        self.dst = self.dst.wrapping_add((self.stride >> 16) as u16 as i16 as u32);
        self.count -= 1;
        if self.count == 0 {
            self.active = false;
            self.config &= !DMA_START;
            DmaEvent::Complete
        } else {
            DmaEvent::None
        }
    }

    fn fault(&mut self, addr: u32) -> DmaEvent {
        self.active = false;
        self.config &= !DMA_START;
        DmaEvent::Fault(addr)
    }

    pub fn cycle(
        &mut self,
        channel: u8,
        node: NodeAddress,
        mem: &mut Scratchpad,
        arb: &mut BankArbiter,
        noc: &mut NocState,
        cfg: &PlatformConfig,
        cycle: u64,
    ) -> DmaEvent {
        if !self.active || self.waiting {
            return DmaEvent::None;
        }
        if self.count == 0 {
            self.active = false;
            self.config &= !DMA_START;
            return DmaEvent::Complete;
        }
        let w = self.width();
        // Read phase (skipped when an element is already latched).
        if self.pending.is_none() {
            if !aligned(self.src, w) {
                return self.fault(self.src);
            }
            match region_of(self.src, cfg, node) {
                Region::LocalCore => {
                    let off = self.src & (LOCAL_SPACE - 1);
                    if !mem.in_range(off, w.bytes()) {
                        return self.fault(self.src);
                    }
                    if !arb.request(off) {
                        return DmaEvent::None; // bank busy, retry
                    }
                    self.pending = Some(mem.read(off, w));
                }
                Region::RemoteCore | Region::OffChipWindow(_) => {
                    let req = Packet {
                        kind: PacketKind::ReadRequest {
                            tag: ReplyTag::Dma { channel },
                            testset: None,
                        },
                        dest: self.src,
                        data: 0,
                        width: w,
                        src: node,
                        inject_cycle: cycle,
                    };
                    if noc.try_inject(node, req, cycle) {
                        self.waiting = true;
                    }
                    return DmaEvent::None;
                }
                Region::Unmapped => return self.fault(self.src),
            }
        }
        let data = self.pending.expect("element latched");
        if !aligned(self.dst, w) {
            return self.fault(self.dst);
        }
        match region_of(self.dst, cfg, node) {
            Region::LocalCore => {
                let off = self.dst & (LOCAL_SPACE - 1);
                if !mem.in_range(off, w.bytes()) {
                    return self.fault(self.dst);
                }
                if !arb.request(off) {
                    return DmaEvent::None;
                }
                mem.write(off, w, data);
            }
            Region::RemoteCore | Region::OffChipWindow(_) => {
                let p = Packet {
                    kind: PacketKind::Write,
                    dest: self.dst,
                    data,
                    width: w,
                    src: node,
                    inject_cycle: cycle,
                };
                if !noc.try_inject(node, p, cycle) {
                    return DmaEvent::None; // hub full, retry
                }
            }
            Region::Unmapped => return self.fault(self.dst),
        }
        self.pending = None;
        self.advance()
    }
}

/// Like `addr::classify` but treating the low 1 MiB as the core's own
/// scratchpad alias.
pub fn region_of(raw: u32, cfg: &PlatformConfig, this: NodeAddress) -> Region {
    if raw < LOCAL_SPACE {
        Region::LocalCore
    } else {
        classify(raw, cfg, this)
    }
}
