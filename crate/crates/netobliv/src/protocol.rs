//! Folded execution on D-BSP with the ascend/descend protocol.
//!
//! Each `i`-superstep with `i < log p` is replaced by generated supersteps
//! on `p` processors. Ascend, for `k = log p - 1` down to `i + 1`: in every
//! `k`-cluster, messages bound outside the cluster are dealt round-robin over
//! its processors. Descend, for `k = i .. log p - 1`: in every `k`-cluster,
//! messages are dealt round-robin over the `(k+1)`-subcluster holding their
//! destination. Every iteration is preceded by a tree prefix inside the
//! clusters that computes the ranks used for dealing.
//!
//! Messages are ranked by (holding processor, source VP, send ordinal).

use std::io::{BufRead, Write};
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::folding::{fold, profile, superstep_degree, FoldError};
use crate::machine::{
    log2_exact, run_with, AlgorithmSpec, RecordLine, Envelope, MachineError, Pair, Router, RunConfig, SuperstepRecord, Trace,
};
use crate::metrics::{
    comm_complexity, comm_time, estimate_fullness, ratio, to_f64, DbspParams, EvalParams, MetricsError, Q,
};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error(transparent)]
    Machine(#[from] MachineError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Fold(#[from] FoldError),
    #[error("p = {p} must be a power of two with 1 <= p <= v = {v}")]
    BadP { p: usize, v: usize },
    #[error("cluster ({level}, {index}) does not exist for p = {p}")]
    BadCluster { level: u32, index: usize, p: usize },
    #[error("cluster of {size} processors given {got} values")]
    BadValues { size: usize, got: usize },
    #[error("fullness is undefined: {0}")]
    UndefinedFullness(MetricsError),
    #[error("bad protocol trace: {0}")]
    BadTrace(String),
}

/// A `k`-cluster: the `p/2^k` processors whose indices share their `k`
/// most significant bits, equal to `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ClusterId {
    pub level: u32,
    pub index: usize,
}

impl ClusterId {
    pub fn new(level: u32, index: usize, p: usize) -> Result<Self, ProtocolError> {
        if !p.is_power_of_two() || level > log2_exact(p) || index >= 1 << level {
            return Err(ProtocolError::BadCluster { level, index, p });
        }
        Ok(ClusterId { level, index })
    }

    /// The `k`-cluster holding processor `proc_`.
    pub fn of(proc_: usize, level: u32, p: usize) -> Self {
        ClusterId { level, index: proc_ / (p >> level) }
    }

    pub fn size(&self, p: usize) -> usize {
        p >> self.level
    }

    pub fn processors(&self, p: usize) -> Range<usize> {
        let s = self.size(p);
        self.index * s..(self.index + 1) * s
    }
}

/// How prefix supersteps are labelled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PrefixStrategy {
    /// Every prefix superstep of a `k`-cluster is a `k`-superstep.
    #[default]
    Flat,
    /// Each tree level uses the smallest cluster holding its pairs, so a
    /// prefix costs `sum_t g_{log p - 1 - t}` rather than `g_k log p`.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Prefix,
    Ascend,
    Descend,
}

/// One generated superstep on `p` processors.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolRecord {
    pub record: SuperstepRecord,
    pub origin_seq: usize,
    pub phase: Phase,
    /// Iteration level that generated it.
    pub k: u32,
}

/// A generated superstep of a prefix computation: label and `(src, dst)`
/// processor pairs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PrefixStep {
    pub label: u32,
    pub pairs: Vec<(u32, u32)>,
}

/// Up-sweep/down-sweep positions of a tree over `c` processors, as
/// `(label offset t, up, pairs in local indices)`; a step at offset `t`
/// keeps its pairs inside aligned blocks of `2^(t+1)` processors.
fn tree_steps(c: usize) -> Vec<(u32, bool, Vec<(usize, usize)>)> {
    let depth = log2_exact(c);
    let mut out = Vec::with_capacity(2 * depth as usize);
    for t in 0..depth {
        let s = 1usize << t;
        let pairs = (0..c).filter(|j| j % (2 * s) == s - 1).map(|j| (j, j + s)).collect();
        out.push((t, true, pairs));
    }
    for t in (0..depth).rev() {
        let s = 1usize << t;
        let mut pairs = Vec::new();
        for j in (0..c).filter(|j| j % (2 * s) == 2 * s - 1) {
            pairs.push((j, j - s));
            pairs.push((j - s, j));
        }
        out.push((t, false, pairs));
    }
    out
}

fn step_label(strategy: PrefixStrategy, level: u32, log_p: u32, t: u32) -> u32 {
    match strategy {
        PrefixStrategy::Flat => level,
        PrefixStrategy::Geometric => log_p - 1 - t,
    }
}

/// Inclusive prefix of `values` over the processors of `cluster`, computed
/// by an up-sweep/down-sweep tree. Returns the per-processor results and
/// the generated supersteps (`2 log(cluster size)` of degree 1, in global
/// processor ids).
pub fn prefix_within_cluster<T: Clone>(
    cluster: ClusterId,
    p: usize,
    values: &[T],
    zero: T,
    combine: impl Fn(&T, &T) -> T,
    strategy: PrefixStrategy,
) -> Result<(Vec<T>, Vec<PrefixStep>), ProtocolError> {
    let cluster = ClusterId::new(cluster.level, cluster.index, p)?;
    let c = cluster.size(p);
    if values.len() != c {
        return Err(ProtocolError::BadValues { size: c, got: values.len() });
    }
    let log_p = log2_exact(p);
    let base = cluster.processors(p).start as u32;
    let mut a = values.to_vec();
    let mut steps = Vec::new();
    if c == 1 {
        a[0] = zero.clone();
    }
    for (t, up, pairs) in tree_steps(c) {
        let s = 1usize << t;
        if up {
            for &(j, r) in &pairs {
                a[r] = combine(&a[j], &a[r]);
            }
        } else {
            if t + 1 == log2_exact(c) {
                a[c - 1] = zero.clone();
            }
            for j in (0..c).filter(|j| j % (2 * s) == 2 * s - 1) {
                let left = a[j - s].clone();
                a[j - s] = a[j].clone();
                a[j] = combine(&a[j], &left);
            }
        }
        steps.push(PrefixStep {
            label: step_label(strategy, cluster.level, log_p, t),
            pairs: pairs.into_iter().map(|(x, y)| (base + x as u32, base + y as u32)).collect(),
        });
    }
    // The sweeps leave the exclusive prefix; add the own value locally.
    let out = a.iter().zip(values).map(|(e, v)| combine(e, v)).collect();
    Ok((out, steps))
}

/// The protocol as a [`Router`]; collects the generated supersteps.
pub struct NovelRouter {
    p: usize,
    log_p: u32,
    strategy: PrefixStrategy,
    records: Vec<ProtocolRecord>,
    /// Cached prefix step patterns for all clusters of a level.
    prefix_cache: Vec<Option<Vec<PrefixStep>>>,
}

type Counts = [u64; 2];

fn add(a: &Counts, b: &Counts) -> Counts {
    [a[0] + b[0], a[1] + b[1]]
}

impl NovelRouter {
    pub fn new(p: usize, strategy: PrefixStrategy) -> Result<Self, ProtocolError> {
        if p == 0 || !p.is_power_of_two() {
            return Err(ProtocolError::BadP { p, v: 0 });
        }
        let log_p = log2_exact(p);
        Ok(NovelRouter { p, log_p, strategy, records: Vec::new(), prefix_cache: vec![None; log_p as usize + 1] })
    }

    pub fn into_records(self) -> Vec<ProtocolRecord> {
        self.records
    }

    fn push(&mut self, origin_seq: usize, phase: Phase, k: u32, label: u32, pairs: Vec<Pair>) {
        let seq = self.records.len();
        self.records.push(ProtocolRecord { record: SuperstepRecord::new(seq, label, pairs), origin_seq, phase, k });
    }

    /// Runs the prefix of `counts` in every `level`-cluster and returns the
    /// exclusive prefix per processor.
    fn prefix(&mut self, origin: usize, level: u32, counts: &[Counts]) -> Result<Vec<Counts>, ProtocolError> {
        let p = self.p;
        let c = p >> level;
        let mut excl = vec![[0; 2]; p];
        let mut merged: Option<Vec<Vec<Pair>>> = None;
        for index in 0..1usize << level {
            let cl = ClusterId { level, index };
            let r = cl.processors(p);
            let (incl, steps) = prefix_within_cluster(cl, p, &counts[r.clone()], [0; 2], add, self.strategy)?;
            for (j, x) in r.clone().enumerate() {
                excl[x] = [incl[j][0] - counts[x][0], incl[j][1] - counts[x][1]];
            }
            if self.prefix_cache[level as usize].is_none() {
                let m = merged.get_or_insert_with(|| vec![Vec::new(); steps.len()]);
                for (acc, s) in m.iter_mut().zip(&steps) {
                    acc.extend(s.pairs.iter().map(|&(a, b)| Pair { src: a, dst: b, dummy: false }));
                }
            }
            let _ = c;
        }
        if let Some(m) = merged {
            let labels = tree_steps(c).iter().map(|s| step_label(self.strategy, level, self.log_p, s.0)).collect::<Vec<_>>();
            self.prefix_cache[level as usize] = Some(
                m.into_iter()
                    .zip(labels)
                    .map(|(pairs, label)| PrefixStep { label, pairs: pairs.into_iter().map(|q| (q.src, q.dst)).collect() })
                    .collect(),
            );
        }
        let steps = self.prefix_cache[level as usize].clone().unwrap_or_default();
        for s in steps {
            let pairs = s.pairs.iter().map(|&(a, b)| Pair { src: a, dst: b, dummy: false }).collect();
            self.push(origin, Phase::Prefix, level, s.label, pairs);
        }
        Ok(excl)
    }

    /// One dealing step. `target(m)` is `None` for messages that stay, or
    /// `Some((slot, first, size))`: deal over processors
    /// `first .. first + size` using prefix slot `slot`.
    fn deal(
        &mut self,
        origin: usize,
        level: u32,
        phase: Phase,
        holder: &mut [usize],
        envs: &[Envelope],
        target: impl Fn(usize, usize) -> Option<(usize, usize, usize)>,
    ) -> Result<(), ProtocolError> {
        let p = self.p;
        // Messages grouped by holder; within a holder they keep the
        // (src, ordinal) order of `envs`.
        let mut by_holder: Vec<Vec<usize>> = vec![Vec::new(); p];
        for (m, &h) in holder.iter().enumerate() {
            by_holder[h].push(m);
        }
        let mut counts = vec![[0u64; 2]; p];
        for (m, &h) in holder.iter().enumerate() {
            if let Some((slot, _, _)) = target(m, h) {
                counts[h][slot] += 1;
            }
        }
        let excl = self.prefix(origin, level, &counts)?;
        let mut pairs = Vec::new();
        for (h, ms) in by_holder.iter().enumerate() {
            let mut local = [0u64; 2];
            for &m in ms {
                let Some((slot, first, size)) = target(m, h) else { continue };
                let rank = excl[h][slot] + local[slot];
                local[slot] += 1;
                let to = first + (rank % size as u64) as usize;
                if to != h {
                    pairs.push(Pair { src: h as u32, dst: to as u32, dummy: envs[m].dummy });
                }
                holder[m] = to;
            }
        }
        self.push(origin, phase, level, level, pairs);
        Ok(())
    }
}

impl Router for NovelRouter {
    fn processors(&self) -> usize {
        self.p
    }

    fn route(&mut self, seq: usize, label: u32, v: usize, envs: &[Envelope]) -> Result<Vec<usize>, MachineError> {
        let block = v / self.p;
        let dst: Vec<usize> = envs.iter().map(|e| e.dst.get() / block).collect();
        if label >= self.log_p {
            return Ok(dst);
        }
        let p = self.p;
        let mut holder: Vec<usize> = envs.iter().map(|e| e.src.get() / block).collect();
        let err = |e: ProtocolError| MachineError::Routing(e.to_string());
        for k in (label + 1..self.log_p).rev() {
            let c = p >> k;
            self.deal(seq, k, Phase::Ascend, &mut holder, envs, |m, h| {
                let first = h / c * c;
                (dst[m] / c != h / c).then_some((0, first, c))
            })
            .map_err(err)?;
        }
        for k in label..self.log_p {
            let half = p >> (k + 1);
            self.deal(seq, k, Phase::Descend, &mut holder, envs, |m, h| {
                let sub = dst[m] / half;
                // Lower or upper half of the holder's k-cluster.
                Some((sub % 2, sub * half, half)).filter(|_| dst[m] / (2 * half) == h / (2 * half))
            })
            .map_err(err)?;
        }
        Ok(holder)
    }
}

/// JSON line of a [`ProtocolTrace`]: a trace line plus its tags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolLine {
    #[serde(flatten)]
    pub record: RecordLine,
    pub origin_seq: usize,
    pub phase: Phase,
    pub k: u32,
}

/// The transformed algorithm: supersteps on `p` processors.
#[derive(Debug, Clone)]
pub struct ProtocolTrace {
    pub base: String,
    pub p: usize,
    pub n: usize,
    pub strategy: PrefixStrategy,
    pub records: Vec<ProtocolRecord>,
}

impl ProtocolTrace {
    /// The generated supersteps as a trace on `v = p` VPs.
    pub fn as_trace(&self) -> Result<Trace, MachineError> {
        Trace::new(self.p, self.n, self.records.iter().map(|r| r.record.clone()).collect())
    }

    pub fn comm_time(&self, params: &DbspParams) -> Result<Q, ProtocolError> {
        Ok(comm_time(&profile(&self.as_trace()?, self.p)?, params)?)
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            let line = ProtocolLine { record: RecordLine::from(&r.record), origin_seq: r.origin_seq, phase: r.phase, k: r.k };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(base: &str, p: usize, n: usize, strategy: PrefixStrategy, input: R) -> Result<Self, ProtocolError> {
        let mut records = Vec::new();
        for (i, line) in input.lines().enumerate() {
            let line = line.map_err(|e| ProtocolError::BadTrace(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let l: ProtocolLine =
                serde_json::from_str(&line).map_err(|e| ProtocolError::BadTrace(format!("line {}: {e}", i + 1)))?;
            let pairs = l.record.pairs.iter().map(|&(s, d, x)| Pair { src: s, dst: d, dummy: x }).collect();
            records.push(ProtocolRecord {
                record: SuperstepRecord::new(l.record.seq, l.record.label, pairs),
                origin_seq: l.origin_seq,
                phase: l.phase,
                k: l.k,
            });
        }
        let t = ProtocolTrace { base: base.to_string(), p, n, strategy, records };
        t.as_trace()?;
        Ok(t)
    }
}

/// Result of [`execute_novel`].
#[derive(Debug, Clone)]
pub struct NovelExecution<O> {
    pub output: O,
    /// Trace of the program on its own VPs.
    pub base_trace: Trace,
    pub protocol: ProtocolTrace,
    /// Communication time of the generated supersteps.
    pub d: Q,
}

/// Runs `spec` folded on `p` processors with the novel protocol.
pub fn execute_novel<A: AlgorithmSpec>(
    spec: &A,
    input: &A::Input,
    p: usize,
    params: &DbspParams,
    strategy: PrefixStrategy,
) -> Result<NovelExecution<A::Output>, ProtocolError> {
    let v = spec.vps(spec.input_size(input))?;
    if p == 0 || !p.is_power_of_two() || p > v {
        return Err(ProtocolError::BadP { p, v });
    }
    if params.p != p {
        return Err(MetricsError::PMismatch { profile: p, params: params.p }.into());
    }
    let mut router = NovelRouter::new(p, strategy)?;
    let e = run_with(spec, input, RunConfig { observe: None, router: Some(&mut router) })?;
    let protocol = ProtocolTrace {
        base: spec.problem_id().to_string(),
        p,
        n: e.trace.n,
        strategy,
        records: router.into_records(),
    };
    let d = protocol.comm_time(params)?;
    Ok(NovelExecution { output: e.output, base_trace: e.trace, protocol, d })
}

/// Communication time of the plain folding of `trace` on `params.p`
/// processors.
pub fn standard_comm_time(trace: &Trace, params: &DbspParams) -> Result<Q, ProtocolError> {
    Ok(comm_time(&profile(trace, params.p)?, params)?)
}

/// Limits checked by [`check_lemma6`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma6Bounds {
    /// Data supersteps per origin superstep and level.
    pub c1: usize,
    /// Data degree over `ceil(2^k h(n, 2^k) / p)`.
    pub c2: f64,
    /// Prefix supersteps per origin superstep and level, over `log p`.
    pub c3: f64,
    /// Prefix degree.
    pub c4: u64,
}

impl Default for Lemma6Bounds {
    fn default() -> Self {
        Lemma6Bounds { c1: 2, c2: 8.0, c3: 4.0, c4: 1 }
    }
}

/// Measured constants over all origin supersteps `s` and levels
/// `i < k < log p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma6Report {
    pub p: usize,
    pub c1: usize,
    pub c2: f64,
    pub c3: f64,
    pub c4: u64,
    pub bounds: Lemma6Bounds,
    pub ok: bool,
}

/// Counts the generated `k`-supersteps per origin superstep and measures
/// the constants of the two families (data moves and prefix steps).
pub fn check_lemma6(protocol: &ProtocolTrace, base: &Trace, bounds: &Lemma6Bounds) -> Result<Lemma6Report, ProtocolError> {
    let p = protocol.p;
    let log_p = log2_exact(p);
    let folds = (0..=log_p).map(|k| fold(base, 1 << k)).collect::<Result<Vec<_>, _>>()?;
    let gen = protocol.as_trace()?;
    let gen_fold = fold(&gen, p)?;
    let lg = log_p.max(1) as f64;
    let (mut c1, mut c2, mut c3, mut c4) = (0usize, 0f64, 0f64, 0u64);
    let mut i = 0;
    while i < protocol.records.len() {
        let origin = protocol.records[i].origin_seq;
        let mut j = i;
        while j < protocol.records.len() && protocol.records[j].origin_seq == origin {
            j += 1;
        }
        let label = base
            .records
            .get(origin)
            .ok_or_else(|| ProtocolError::BadTrace(format!("no base superstep {origin}")))?
            .label;
        for k in label + 1..log_p {
            let h = superstep_degree(&folds[k as usize], origin)?;
            let scale = ((1u64 << k) * h).div_ceil(p as u64).max(1) as f64;
            let (mut data, mut pre) = (0usize, 0usize);
            for r in &protocol.records[i..j] {
                if r.record.label != k {
                    continue;
                }
                let deg = gen_fold.records[r.record.seq].degree;
                if r.phase == Phase::Prefix {
                    pre += 1;
                    c4 = c4.max(deg);
                } else {
                    data += 1;
                    c2 = c2.max(deg as f64 / scale);
                }
            }
            c1 = c1.max(data);
            c3 = c3.max(pre as f64 / lg);
        }
        i = j;
    }
    let ok = c1 <= bounds.c1 && c2 <= bounds.c2 && c3 <= bounds.c3 && c4 <= bounds.c4;
    Ok(Lemma6Report { p, c1, c2, c3, c4, bounds: bounds.clone(), ok })
}

/// One grid point of [`fullness_optimality_report`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullnessRow {
    pub j: u32,
    #[serde(serialize_with = "crate::metrics::ser_q")]
    pub sigma: Q,
    #[serde(serialize_with = "crate::metrics::ser_q")]
    pub h_base: Q,
    #[serde(serialize_with = "crate::metrics::ser_q")]
    pub h_protocol: Q,
    /// `h_protocol / ((1 + 1/γ) log² p · h_base)`.
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FullnessReport {
    pub p: usize,
    #[serde(serialize_with = "crate::metrics::ser_q")]
    pub gamma: Q,
    /// `1 / ((1 + 1/γ) log² p)`; the optimality factor is β times this.
    pub factor_over_beta: f64,
    pub rows: Vec<FullnessRow>,
    /// Largest `c` over the grid.
    pub c: f64,
}

impl FullnessReport {
    /// The inequality holds on every grid point with constant `c_max`.
    pub fn holds(&self, c_max: f64) -> bool {
        self.c <= c_max
    }
}

/// Measures `H` of the transformed algorithm against `H` of the original on
/// `M(2^j, σ)` for `1 <= j <= log p` and every σ in `sigmas`.
pub fn fullness_optimality_report<A: AlgorithmSpec>(
    spec: &A,
    input: &A::Input,
    p: usize,
    params: &DbspParams,
    strategy: PrefixStrategy,
    sigmas: &[Q],
) -> Result<FullnessReport, ProtocolError> {
    let e = execute_novel(spec, input, p, params, strategy)?;
    let gamma = estimate_fullness(&e.base_trace, p).map_err(ProtocolError::UndefinedFullness)?;
    let gen = e.protocol.as_trace()?;
    let lg = log2_exact(p).max(1) as f64;
    let g = to_f64(&gamma);
    let denom = (1.0 + 1.0 / g) * lg * lg;
    let mut rows = Vec::new();
    let mut c = 0f64;
    for j in 1..=log2_exact(p) {
        let pj = 1usize << j;
        let base_prof = profile(&e.base_trace, pj)?;
        let gen_prof = profile(&gen, pj)?;
        for s in sigmas {
            let eval = EvalParams::new(pj, s.clone())?;
            let hb = comm_complexity(&base_prof, &eval)?;
            let hp = comm_complexity(&gen_prof, &eval)?;
            let r = if hb == ratio(0, 1) { if hp == ratio(0, 1) { 0.0 } else { f64::INFINITY } } else { to_f64(&(hp.clone() / hb.clone())) / denom };
            c = c.max(r);
            rows.push(FullnessRow { j, sigma: s.clone(), h_base: hb, h_protocol: hp, c: r });
        }
    }
    Ok(FullnessReport { p, gamma, factor_over_beta: 1.0 / denom, rows, c })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn four_ones() {
        let (out, steps) =
            prefix_within_cluster(ClusterId { level: 0, index: 0 }, 4, &[1u64, 1, 1, 1], 0, |a, b| a + b, PrefixStrategy::Flat)
                .unwrap();
        assert_eq!(out, vec![1, 2, 3, 4]);
        assert_eq!(steps.len(), 4);
    }

    #[test]
    fn single_processor_cluster() {
        let (out, steps) =
            prefix_within_cluster(ClusterId { level: 2, index: 3 }, 4, &[7u64], 0, |a, b| a + b, PrefixStrategy::Flat).unwrap();
        assert_eq!(out, vec![7]);
        assert!(steps.is_empty());
    }
}
