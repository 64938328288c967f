//! Folding of an M(v) trace onto M(p), p <= v.
//!
//! Processor `j` owns the VPs `[j*v/p, (j+1)*v/p)`. A superstep whose label
//! is at least `log2 p` stays inside one processor and becomes local.

use std::collections::HashMap;
use std::io::Write;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::machine::{log2_exact, Pair, Trace};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FoldError {
    #[error("p = {p} must be a power of two no larger than v = {v}")]
    BadP { p: usize, v: usize },
    #[error("no superstep with seq {0}")]
    NoSuchSuperstep(usize),
}

/// Per-processor counts of one folded superstep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldedRecord {
    pub seq: usize,
    pub label: u32,
    pub local: bool,
    pub sent: Arc<[u64]>,
    pub received: Arc<[u64]>,
    pub degree: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FoldedTrace {
    pub p: usize,
    pub v: usize,
    pub n: usize,
    pub records: Vec<FoldedRecord>,
}

/// `S^i` and `F^i` for `i < max(1, log p)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DegreeProfile {
    pub p: usize,
    pub s: Vec<u64>,
    pub f: Vec<u64>,
}

impl DegreeProfile {
    pub fn zeros(p: usize) -> Self {
        let len = profile_len(p);
        DegreeProfile {
            p,
            s: vec![0; len],
            f: vec![0; len],
        }
    }

    pub fn levels(&self) -> usize {
        self.s.len()
    }

    /// CSV rows `p,i,S_i,F_i`.
    pub fn write_csv<W: Write>(&self, out: W, header: bool) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
        if header {
            w.write_record(["p", "i", "S_i", "F_i"])?;
        }
        for i in 0..self.levels() {
            w.serialize((self.p, i, self.s[i], self.f[i]))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn profile_len(p: usize) -> usize {
    (log2_exact(p) as usize).max(1)
}

/// Per-processor (sent, received, degree) of one pair list at `p`.
fn tally(pairs: &[Pair], v: usize, p: usize) -> (Vec<u64>, Vec<u64>, u64) {
    let block = (v / p) as u32;
    let mut sent = vec![0u64; p];
    let mut recv = vec![0u64; p];
    for pr in pairs {
        let a = (pr.src / block) as usize;
        let b = (pr.dst / block) as usize;
        if a != b {
            sent[a] += 1;
            recv[b] += 1;
        }
    }
    let degree = sent.iter().chain(recv.iter()).copied().max().unwrap_or(0);
    (sent, recv, degree)
}

/// Folds `trace` onto `p` processors.
pub fn fold(trace: &Trace, p: usize) -> Result<FoldedTrace, FoldError> {
    if p == 0 || !p.is_power_of_two() || p > trace.v {
        return Err(FoldError::BadP { p, v: trace.v });
    }
    let log_p = log2_exact(p);
    let zeros: Arc<[u64]> = vec![0u64; p].into();
    let mut cache: HashMap<*const Pair, (Arc<[u64]>, Arc<[u64]>, u64)> = HashMap::new();
    let mut records = Vec::with_capacity(trace.records.len());
    for r in &trace.records {
        let local = p == 1 || r.label >= log_p;
        let (sent, received, degree) = if local {
            (zeros.clone(), zeros.clone(), 0)
        } else {
            // Identical patterns share one allocation, so the pointer is a
            // valid cache key for the lifetime of `trace`.
            let key = r.pairs_arc().as_ptr();
            cache
                .entry(key)
                .or_insert_with(|| {
                    let (s, d, h) = tally(r.pairs(), trace.v, p);
                    (s.into(), d.into(), h)
                })
                .clone()
        };
        records.push(FoldedRecord {
            seq: r.seq,
            label: r.label,
            local,
            sent,
            received,
            degree,
        });
    }
    Ok(FoldedTrace {
        p,
        v: trace.v,
        n: trace.n,
        records,
    })
}

/// Degree `h^s` of superstep `seq`: max over processors of sends and receives.
pub fn superstep_degree(folded: &FoldedTrace, seq: usize) -> Result<u64, FoldError> {
    folded
        .records
        .iter()
        .find(|r| r.seq == seq)
        .map(|r| r.degree)
        .ok_or(FoldError::NoSuchSuperstep(seq))
}

pub fn degree_profile(folded: &FoldedTrace) -> DegreeProfile {
    let mut prof = DegreeProfile::zeros(folded.p);
    let log_p = log2_exact(folded.p);
    for r in &folded.records {
        if folded.p == 1 {
            // One slot: F^0 stays 0, S^0 counts 0-supersteps.
            if r.label == 0 {
                prof.s[0] += 1;
            }
        } else if r.label < log_p {
            prof.s[r.label as usize] += 1;
            prof.f[r.label as usize] += r.degree;
        }
    }
    prof
}

/// `fold` followed by `degree_profile`.
pub fn profile(trace: &Trace, p: usize) -> Result<DegreeProfile, FoldError> {
    Ok(degree_profile(&fold(trace, p)?))
}

/// Profiles for every power of two `p` in `[1, v]`, indexed by `log2 p`.
pub fn all_profiles(trace: &Trace) -> Vec<DegreeProfile> {
    let mut out = Vec::new();
    let mut p = 1;
    while p <= trace.v {
        out.push(profile(trace, p).expect("p is a power of two <= v"));
        p *= 2;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::machine::SuperstepRecord;

    fn one_cross(v: usize) -> Trace {
        Trace::new(v, v, vec![SuperstepRecord::new(0, 0, vec![Pair::new(0, v / 2, false)])]).unwrap()
    }

    #[test]
    fn crossing_the_bisection() {
        let f = fold(&one_cross(8), 2).unwrap();
        assert_eq!(&f.records[0].sent[..], &[1, 0]);
        assert_eq!(&f.records[0].received[..], &[0, 1]);
        assert_eq!(superstep_degree(&f, 0).unwrap(), 1);
    }

    #[test]
    fn one_processor_is_all_local() {
        let prof = profile(&one_cross(8), 1).unwrap();
        assert_eq!(prof.f, vec![0]);
        assert_eq!(prof.s, vec![1]);
    }

    #[test]
    fn bad_p_is_rejected() {
        assert!(fold(&one_cross(8), 16).is_err());
        assert!(fold(&one_cross(8), 3).is_err());
    }

    #[test]
    fn csv_rows() {
        let prof = DegreeProfile { p: 4, s: vec![2, 1], f: vec![4, 5] };
        let mut buf = Vec::new();
        prof.write_csv(&mut buf, true).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "p,i,S_i,F_i\n4,0,2,4\n4,1,1,5\n");
    }
}
