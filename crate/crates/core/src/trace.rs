//! Cycle-level event trace, written as CSV.

use std::io::{self, Write};

pub const TRACE_HEADER: &str = "cycle,mesh,event,row,col,kind,dest";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceEvent {
    pub cycle: u64,
    pub mesh: &'static str,
    pub event: &'static str,
    pub row: u8,
    pub col: u8,
    pub kind: &'static str,
    pub dest: u32,
}

pub struct TraceWriter<W: Write> {
    out: io::BufWriter<W>,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(sink: W) -> io::Result<TraceWriter<W>> {
        let mut out = io::BufWriter::new(sink);
        writeln!(out, "{TRACE_HEADER}")?;
        Ok(TraceWriter { out })
    }

    pub fn record(&mut self, e: &TraceEvent) -> io::Result<()> {
        writeln!(
            self.out,
            "{},{},{},{},{},{},{:#010x}",
            e.cycle, e.mesh, e.event, e.row, e.col, e.kind, e.dest
        )
    }

    pub fn finish(mut self) -> io::Result<()> {
        self.out.flush()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_shape() {
        let mut buf = Vec::new();
        {
            let mut w = TraceWriter::new(&mut buf).unwrap();
            w.record(&TraceEvent {
                cycle: 7,
                mesh: "cmesh",
                event: "hop",
                row: 32,
                col: 9,
                kind: "write",
                dest: 0x8080_0010,
            })
            .unwrap();
            w.finish().unwrap();
        }
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(TRACE_HEADER));
        assert_eq!(lines.next(), Some("7,cmesh,hop,32,9,write,0x80800010"));
    }
}
