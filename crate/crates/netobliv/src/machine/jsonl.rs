use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::{MachineError, Pair, SuperstepRecord, Trace};

/// One trace line: `{"seq":..,"label":..,"pairs":[[src,dst,dummy],..]}`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordLine {
    pub seq: usize,
    pub label: u32,
    pub pairs: Vec<(u32, u32, bool)>,
}

impl From<&SuperstepRecord> for RecordLine {
    fn from(r: &SuperstepRecord) -> Self {
        RecordLine {
            seq: r.seq,
            label: r.label,
            pairs: r.pairs().iter().map(|p| (p.src, p.dst, p.dummy)).collect(),
        }
    }
}

/// Writes one JSON object per superstep.
pub fn write_jsonl<W: Write>(trace: &Trace, mut out: W) -> std::io::Result<()> {
    for r in &trace.records {
        serde_json::to_writer(&mut out, &RecordLine::from(r))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Reads a trace written by [`write_jsonl`]; `v` and `n` come from the caller.
pub fn read_jsonl<R: BufRead>(v: usize, n: usize, input: R) -> Result<Trace, MachineError> {
    let mut records = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line.map_err(|e| MachineError::InvalidInput(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: RecordLine = serde_json::from_str(&line)
            .map_err(|e| MachineError::InvalidInput(format!("line {}: {e}", i + 1)))?;
        let pairs = rec
            .pairs
            .iter()
            .map(|&(s, d, x)| Pair { src: s, dst: d, dummy: x })
            .collect();
        records.push(SuperstepRecord::new(rec.seq, rec.label, pairs));
    }
    Trace::new(v, n, records)
}
