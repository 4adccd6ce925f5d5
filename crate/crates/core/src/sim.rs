//! Whole-platform simulation: cores, scratchpads, network and host access.
//!
//! Cycle ordering is fixed and deterministic: the network moves first,
//! then every node (row-major) applies its accepted packets, runs DMA and
//! the core pipeline, and finally chip-wide effects (WAND barriers, SYNC,
//! MBKPT) resolve. Host operations happen between cycles and are atomic.

use std::collections::VecDeque;

use serde::Serialize;

use crate::addr::{decode_address, encode_address, NodeAddress, LOCAL_SPACE};
use crate::ecore::{CoreEngine, RunState, HALT_BKPT, IRQ_MEMFAULT, IRQ_SYNC, IRQ_WAND};
use crate::isa::{ProgramImage, Width};
use crate::mem::{BankArbiter, Scratchpad};
use crate::mesh::{Delivery, NocState, Packet, PacketKind, ReplyTag};
use crate::platform::PlatformConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopCondition {
    /// Every started core has halted.
    AllHalted,
    /// A specific core (row-major index) has halted.
    CoreHalted(usize),
    /// A fixed cycle count.
    Cycles(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunOutcome {
    Satisfied,
    /// The cycle budget ran out first.
    Timeout,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoreReport {
    pub row: u8,
    pub col: u8,
    pub state: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub halt_code: Option<u16>,
    pub pc: u32,
    pub retired: u64,
    pub active_cycles: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkReport {
    pub injected: u64,
    pub injected_bytes: u64,
    pub ejected: u64,
    pub ejected_bytes: u64,
    pub exited: u64,
    pub dropped: u64,
    pub in_flight: u64,
    pub mean_latency: f64,
    pub p99_latency: u64,
    pub max_latency: u64,
    pub bisection_bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub platform: String,
    pub rows: u8,
    pub cols: u8,
    pub cycles: u64,
    pub outcome: String,
    pub cores: Vec<CoreReport>,
    pub network: NetworkReport,
}

#[derive(Debug, Clone)]
pub struct Simulation {
    pub cfg: PlatformConfig,
    pub cores: Vec<CoreEngine>,
    pub mems: Vec<Scratchpad>,
    arbs: Vec<BankArbiter>,
    pub noc: NocState,
    pub cycle: u64,
    /// Read requests whose reply could not be injected yet, per node.
    pending_replies: Vec<VecDeque<Packet>>,
    /// Replies to synthetic (harness-issued) reads.
    pub synthetic_replies: Vec<Packet>,
}

impl Simulation {
    pub fn new(cfg: PlatformConfig) -> Simulation {
        let n = cfg.num_cores();
        let cores = (0..n).map(|i| CoreEngine::new(cfg.node_at(i))).collect();
        let mems = (0..n).map(|_| Scratchpad::new(cfg.core_mem_bytes as usize)).collect();
        Simulation {
            noc: NocState::new(&cfg),
            cores,
            mems,
            arbs: vec![BankArbiter::default(); n],
            cycle: 0,
            pending_replies: vec![VecDeque::new(); n],
            synthetic_replies: Vec::new(),
            cfg,
        }
    }

    pub fn index_of(&self, node: NodeAddress) -> Option<usize> {
        self.cfg.core_index(node)
    }

    /// Copy a program into a core's scratchpad (no state change).
    pub fn load_image(&mut self, core: usize, img: &ProgramImage) {
        self.mems[core].load_bytes(img.base, &img.bytes);
    }

    pub fn start_core(&mut self, core: usize, entry: u32) {
        self.cores[core].start(entry);
    }

    /// Host write, untimed unless the platform routes host traffic over
    /// the mesh (in which case writes ride the eLink and arrive later;
    /// host reads remain direct).
    pub fn host_write(&mut self, addr: u32, data: &[u8]) {
        if self.cfg.host_via_mesh {
            if let Some(idx) = self.index_of(decode_address(addr).node) {
                let node = self.cfg.node_at(idx);
                let _ = node;
                let mut a = addr;
                for chunk in data.chunks(4) {
                    let mut v = 0u64;
                    for (k, b) in chunk.iter().enumerate() {
                        v |= (*b as u64) << (8 * k);
                    }
                    let width = match chunk.len() {
                        1 => Width::Byte,
                        2 => Width::Half,
                        _ => Width::Word,
                    };
                    let p = Packet {
                        kind: PacketKind::Write,
                        dest: a,
                        data: v,
                        width,
                        src: self.cfg.origin_node(),
                        inject_cycle: self.cycle,
                    };
                    self.noc.host_inject(self.cfg.host_side(), p, 0);
                    a += chunk.len() as u32;
                }
                return;
            }
        }
        self.host_write_direct(addr, data);
    }

    fn host_write_direct(&mut self, addr: u32, data: &[u8]) {
        let ga = decode_address(addr);
        if let Some(idx) = self.index_of(ga.node) {
            self.mems[idx].load_bytes(ga.offset, data);
        } else if let Some(wi) = self.cfg.window_containing(ga.node) {
            let base = self.cfg.external_windows[wi].node_index(ga.node) as usize
                * LOCAL_SPACE as usize
                + ga.offset as usize;
            self.noc.windows[wi][base..base + data.len()].copy_from_slice(data);
        }
    }

    pub fn host_read(&self, addr: u32, out: &mut [u8]) {
        let ga = decode_address(addr);
        if let Some(idx) = self.index_of(ga.node) {
            let s = &self.mems[idx].as_bytes()[ga.offset as usize..];
            out.copy_from_slice(&s[..out.len()]);
        } else if let Some(wi) = self.cfg.window_containing(ga.node) {
            let base = self.cfg.external_windows[wi].node_index(ga.node) as usize
                * LOCAL_SPACE as usize
                + ga.offset as usize;
            out.copy_from_slice(&self.noc.windows[wi][base..base + out.len()]);
        }
    }

    pub fn host_write_u32(&mut self, addr: u32, v: u32) {
        self.host_write(addr, &v.to_le_bytes());
    }

    pub fn host_read_u32(&self, addr: u32) -> u32 {
        let mut b = [0u8; 4];
        self.host_read(addr, &mut b);
        u32::from_le_bytes(b)
    }

    /// Issue a synthetic read over the mesh (used by bandwidth probes).
    pub fn synthetic_read(&mut self, from: NodeAddress, addr: u32, width: Width) -> bool {
        let p = Packet {
            kind: PacketKind::ReadRequest { tag: ReplyTag::Synthetic, testset: None },
            dest: addr,
            data: 0,
            width,
            src: from,
            inject_cycle: self.cycle,
        };
        self.noc.try_inject(from, p, self.cycle)
    }

    /// Issue a synthetic write over the mesh.
    pub fn synthetic_write(&mut self, from: NodeAddress, addr: u32, data: u64, width: Width) -> bool {
        let p = Packet {
            kind: PacketKind::Write,
            dest: addr,
            data,
            width,
            src: from,
            inject_cycle: self.cycle,
        };
        self.noc.try_inject(from, p, self.cycle)
    }

    fn apply_delivery(&mut self, idx: usize, d: Delivery, cycle: u64) {
        let packet = d.packet;
        match packet.kind {
            PacketKind::Write | PacketKind::Multicast { .. } => {
                let off = packet.dest & (LOCAL_SPACE - 1);
                if !self.mems[idx].in_range(off, packet.width.bytes()) {
                    self.cores[idx].raise_irq(IRQ_MEMFAULT);
                    return;
                }
                // Network writes own the bank this cycle (highest priority).
                self.arbs[idx].request(off);
                self.mems[idx].write(off, packet.width, packet.data);
            }
            PacketKind::ReadRequest { tag, testset } => {
                let off = packet.dest & (LOCAL_SPACE - 1);
                if !self.mems[idx].in_range(off, packet.width.bytes()) {
                    self.cores[idx].raise_irq(IRQ_MEMFAULT);
                    return;
                }
                self.arbs[idx].request(off);
                let old = self.mems[idx].read(off, packet.width);
                if let Some(v) = testset {
                    if old == 0 {
                        self.mems[idx].write(off, packet.width, v);
                    }
                }
                let reply = Packet {
                    kind: PacketKind::ReadReply { tag },
                    dest: encode_address(packet.src, 0).expect("requester encodes"),
                    data: old,
                    width: packet.width,
                    src: d.node,
                    inject_cycle: cycle,
                };
                let here = d.node;
                if !self.noc.try_inject(here, reply, cycle) {
                    self.pending_replies[idx].push_back(reply);
                }
            }
            PacketKind::ReadReply { tag } => match tag {
                ReplyTag::CoreLoad { rd } => {
                    self.cores[idx].complete_read(rd, packet.data, packet.width, cycle);
                }
                ReplyTag::Dma { channel } => {
                    self.cores[idx].dma[channel as usize].complete_read(packet.data);
                }
                ReplyTag::Synthetic => self.synthetic_replies.push(packet),
            },
        }
    }

    /// Work groups for barrier-style operations: configured groups, or
    /// one chip-wide group per chip when none are configured.
    fn groups(&self) -> Vec<Vec<usize>> {
        if !self.cfg.work_groups.is_empty() {
            return self
                .cfg
                .work_groups
                .iter()
                .map(|g| {
                    g.iter()
                        .map(|&[r, c]| (r as usize) * self.cfg.cols as usize + c as usize)
                        .collect()
                })
                .collect();
        }
        let mut by_chip: std::collections::BTreeMap<(u8, u8), Vec<usize>> = Default::default();
        for i in 0..self.cores.len() {
            let node = self.cfg.node_at(i);
            by_chip.entry(self.cfg.chip_of(node)).or_default().push(i);
        }
        by_chip.into_values().collect()
    }

    pub fn step(&mut self) {
        let cycle = self.cycle;
        let mcast: Vec<u32> = self.cores.iter().map(|c| c.multicast).collect();
        let deliveries = self.noc.step(&self.cfg, cycle, &mcast);
        for (src, addr) in std::mem::take(&mut self.noc.faults) {
            if let Some(idx) = self.index_of(src) {
                let _ = addr;
                self.cores[idx].raise_irq(IRQ_MEMFAULT);
            }
        }
        // Group this cycle's accepted packets by node.
        let mut per_node: Vec<Vec<Delivery>> = vec![Vec::new(); self.cores.len()];
        for d in deliveries {
            if let Some(idx) = self.index_of(d.node) {
                per_node[idx].push(d);
            }
        }
        for idx in 0..self.cores.len() {
            self.arbs[idx].reset();
            // Replies that lost the hub last cycle retry first.
            while let Some(reply) = self.pending_replies[idx].pop_front() {
                let node = self.cfg.node_at(idx);
                if !self.noc.try_inject(node, reply, cycle) {
                    self.pending_replies[idx].push_front(reply);
                    break;
                }
            }
            for d in std::mem::take(&mut per_node[idx]) {
                self.apply_delivery(idx, d, cycle);
            }
            let mut core = std::mem::replace(&mut self.cores[idx], CoreEngine::new(self.cfg.node_at(idx)));
            core.cycle(cycle, &mut self.mems[idx], &mut self.arbs[idx], &mut self.noc, &self.cfg);
            self.cores[idx] = core;
        }
        // Chip-wide effects resolve once everyone has run.
        for group in self.groups() {
            if !group.is_empty() && group.iter().all(|&i| self.cores[i].wand_latched) {
                for &i in &group {
                    self.cores[i].wand_latched = false;
                    self.cores[i].raise_irq(IRQ_WAND);
                }
            }
            if group.iter().any(|&i| self.cores[i].sync_request) {
                for &i in &group {
                    self.cores[i].sync_request = false;
                    self.cores[i].raise_irq(IRQ_SYNC);
                }
            }
            if group.iter().any(|&i| self.cores[i].mbkpt_request) {
                for &i in &group {
                    self.cores[i].mbkpt_request = false;
                    if self.cores[i].state != RunState::Off {
                        self.cores[i].state = RunState::Halted(HALT_BKPT);
                    }
                }
            }
        }
        self.cycle += 1;
    }

    fn satisfied(&self, cond: StopCondition) -> bool {
        match cond {
            StopCondition::AllHalted => self
                .cores
                .iter()
                .filter(|c| c.state != RunState::Off)
                .all(|c| c.halted().is_some()),
            StopCondition::CoreHalted(i) => self.cores[i].halted().is_some(),
            StopCondition::Cycles(n) => self.cycle >= n,
        }
    }

    pub fn run(&mut self, cond: StopCondition, max_cycles: u64) -> RunOutcome {
        while !self.satisfied(cond) {
            if self.cycle >= max_cycles {
                return RunOutcome::Timeout;
            }
            self.step();
        }
        RunOutcome::Satisfied
    }

    pub fn report(&self, outcome: RunOutcome) -> RunReport {
        let cores = self
            .cores
            .iter()
            .map(|c| CoreReport {
                row: c.node.row,
                col: c.node.col,
                state: match c.state {
                    RunState::Off => "off",
                    RunState::Running => "running",
                    RunState::Idle => "idle",
                    RunState::WaitingReply => "waiting",
                    RunState::Halted(_) => "halted",
                }
                .to_string(),
                halt_code: c.halted(),
                pc: c.pc,
                retired: c.retired,
                active_cycles: c.active_cycles,
            })
            .collect();
        let k = &self.noc.counters;
        RunReport {
            platform: self.cfg.name.clone(),
            rows: self.cfg.rows,
            cols: self.cfg.cols,
            cycles: self.cycle,
            outcome: match outcome {
                RunOutcome::Satisfied => "ok".into(),
                RunOutcome::Timeout => "timeout".into(),
            },
            cores,
            network: NetworkReport {
                injected: k.injected,
                injected_bytes: k.injected_bytes,
                ejected: k.ejected,
                ejected_bytes: k.ejected_bytes,
                exited: k.exited,
                dropped: k.dropped,
                in_flight: self.noc.in_flight(),
                mean_latency: k.latency.mean(),
                p99_latency: k.latency.percentile(0.99),
                max_latency: k.latency.max,
                bisection_bytes: k.bisection_bytes,
            },
        }
    }
}
