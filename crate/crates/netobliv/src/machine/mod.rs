//! Deterministic simulator of the machine M(v).
//!
//! A program is driven superstep by superstep: [`Machine::step`] runs one
//! block of per-VP code on every VP in ascending index order, and
//! [`Machine::sync`] closes the superstep with a labeled barrier. Messages
//! sent before a barrier become receivable after it.

mod jsonl;

use std::collections::hash_map::DefaultHasher;
use std::collections::{BTreeMap, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use jsonl::{read_jsonl, write_jsonl, RecordLine};

/// Faults raised while building or running a machine.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MachineError {
    #[error("machine size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("superstep {seq}: VP {src} sent to index {dst}, outside [0, {v})")]
    OutOfRange {
        seq: usize,
        src: usize,
        dst: usize,
        v: usize,
    },
    #[error("superstep {seq}: message {src} -> {dst} leaves its {label}-cluster")]
    ClusterViolation {
        seq: usize,
        label: u32,
        src: usize,
        dst: usize,
    },
    #[error("superstep {seq}: label {label} is outside [0, {bound})")]
    BadLabel { seq: usize, label: u32, bound: u32 },
    #[error("input size {got} does not match the expected size {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("VP {vp}: {what}")]
    Program { vp: usize, what: String },
    #[error("routing fault: {0}")]
    Routing(String),
    #[error("local tail of the program tried to send from VP {0}")]
    SendAfterLastSync(usize),
}

/// `log x = max(1, log2 x)` for a power of two `x`.
pub fn log2c(x: usize) -> u32 {
    if x <= 2 {
        1
    } else {
        x.trailing_zeros()
    }
}

/// Exact `log2` of a power of two (0 for 1).
pub fn log2_exact(x: usize) -> u32 {
    debug_assert!(x.is_power_of_two());
    x.trailing_zeros()
}

/// Index of a processing element of M(v).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VpIndex(u32);

impl VpIndex {
    pub fn new(value: usize, v: usize) -> Result<Self, MachineError> {
        if !v.is_power_of_two() {
            return Err(MachineError::NotPowerOfTwo(v));
        }
        if value >= v {
            return Err(MachineError::OutOfRange {
                seq: 0,
                src: value,
                dst: value,
                v,
            });
        }
        Ok(VpIndex(value as u32))
    }

    pub fn get(self) -> usize {
        self.0 as usize
    }
}

impl std::fmt::Display for VpIndex {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "VP{}", self.0)
    }
}

/// A delivered message.
#[derive(Debug, Clone, PartialEq)]
pub struct Message<W> {
    pub src: VpIndex,
    pub dst: VpIndex,
    pub payload: W,
    /// Ordinal of the superstep in which the message was sent.
    pub superstep_seq: usize,
    /// Position among the messages sent by `src` in that superstep.
    pub ordinal: u32,
    pub dummy: bool,
}

/// One source-destination pair of a superstep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Pair {
    pub src: u32,
    pub dst: u32,
    pub dummy: bool,
}

impl Pair {
    pub fn new(src: usize, dst: usize, dummy: bool) -> Self {
        Pair {
            src: src as u32,
            dst: dst as u32,
            dummy,
        }
    }
}

/// One executed superstep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuperstepRecord {
    pub seq: usize,
    pub label: u32,
    pairs: Arc<[Pair]>,
}

impl SuperstepRecord {
    pub fn new(seq: usize, label: u32, pairs: Vec<Pair>) -> Self {
        SuperstepRecord {
            seq,
            label,
            pairs: pairs.into(),
        }
    }

    pub(crate) fn shared(seq: usize, label: u32, pairs: Arc<[Pair]>) -> Self {
        SuperstepRecord { seq, label, pairs }
    }

    /// Pairs in send order: ascending source, then send ordinal.
    pub fn pairs(&self) -> &[Pair] {
        &self.pairs
    }

    pub(crate) fn pairs_arc(&self) -> &Arc<[Pair]> {
        &self.pairs
    }

    /// Messages sent per VP (self-sends included).
    pub fn sent(&self) -> BTreeMap<VpIndex, u64> {
        let mut m = BTreeMap::new();
        for p in self.pairs.iter() {
            *m.entry(VpIndex(p.src)).or_insert(0) += 1;
        }
        m
    }

    /// Messages received per VP (self-sends included).
    pub fn received(&self) -> BTreeMap<VpIndex, u64> {
        let mut m = BTreeMap::new();
        for p in self.pairs.iter() {
            *m.entry(VpIndex(p.dst)).or_insert(0) += 1;
        }
        m
    }

    /// Pair multiset in canonical order.
    pub fn sorted_pairs(&self) -> Vec<Pair> {
        let mut v = self.pairs.to_vec();
        v.sort_unstable();
        v
    }
}

/// Full communication record of one run on M(v).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trace {
    pub v: usize,
    pub n: usize,
    pub records: Vec<SuperstepRecord>,
}

impl Trace {
    pub fn new(v: usize, n: usize, records: Vec<SuperstepRecord>) -> Result<Self, MachineError> {
        if !v.is_power_of_two() {
            return Err(MachineError::NotPowerOfTwo(v));
        }
        let bound = log2c(v);
        for r in &records {
            if r.label >= bound {
                return Err(MachineError::BadLabel {
                    seq: r.seq,
                    label: r.label,
                    bound,
                });
            }
            for p in r.pairs.iter() {
                if p.src as usize >= v || p.dst as usize >= v {
                    return Err(MachineError::OutOfRange {
                        seq: r.seq,
                        src: p.src as usize,
                        dst: p.dst as usize,
                        v,
                    });
                }
            }
        }
        Ok(Trace { v, n, records })
    }

    pub fn labels(&self) -> Vec<u32> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn label_set(&self) -> std::collections::BTreeSet<u32> {
        self.records.iter().map(|r| r.label).collect()
    }

    pub fn message_count(&self) -> usize {
        self.records.iter().map(|r| r.pairs.len()).sum()
    }
}

/// True when `a` and `b` agree in the `label` most significant bits of a
/// `log_v`-bit index.
pub fn same_cluster(a: usize, b: usize, label: u32, log_v: u32) -> bool {
    if label >= log_v {
        return a == b;
    }
    let shift = log_v - label;
    (a >> shift) == (b >> shift)
}

/// A pair that breaks the cluster rule of its superstep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub seq: usize,
    pub label: u32,
    pub src: usize,
    pub dst: usize,
}

/// Every pair whose endpoints disagree in the superstep's label MSBs.
pub fn validate_cluster_constraint(trace: &Trace) -> Vec<Violation> {
    let log_v = log2_exact(trace.v);
    let mut out = Vec::new();
    for r in &trace.records {
        for p in r.pairs.iter() {
            if !same_cluster(p.src as usize, p.dst as usize, r.label, log_v) {
                out.push(Violation {
                    seq: r.seq,
                    label: r.label,
                    src: p.src as usize,
                    dst: p.dst as usize,
                });
            }
        }
    }
    out
}

/// Metadata of one message handed to a [`Router`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Envelope {
    pub src: VpIndex,
    pub dst: VpIndex,
    pub ordinal: u32,
    pub dummy: bool,
}

/// Alternative delivery strategy for folded execution on `processors()`
/// processors. `route` returns, per envelope, the processor holding the
/// message once routing ends; the machine checks it owns the destination.
pub trait Router {
    fn processors(&self) -> usize;
    fn route(
        &mut self,
        seq: usize,
        label: u32,
        v: usize,
        envelopes: &[Envelope],
    ) -> Result<Vec<usize>, MachineError>;
}

/// Knobs for one run.
#[derive(Default)]
pub struct RunConfig<'r> {
    /// Tally per-superstep degrees live, as if running natively on `p`
    /// processors.
    pub observe: Option<usize>,
    pub router: Option<&'r mut dyn Router>,
}

/// Degrees tallied live during a run, one per recorded superstep.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ObservedDegrees {
    pub p: usize,
    pub degrees: Vec<u64>,
}

/// Result of running a program.
#[derive(Debug, Clone)]
pub struct Execution<O> {
    pub output: O,
    pub trace: Trace,
    pub observed: Option<ObservedDegrees>,
}

/// A runnable network-oblivious program.
pub trait AlgorithmSpec {
    type Input;
    type Output;

    fn problem_id(&self) -> &'static str;
    /// Input size `n` of an instance.
    fn input_size(&self, input: &Self::Input) -> usize;
    /// Number of VPs `v(n)`.
    fn vps(&self, n: usize) -> Result<usize, MachineError>;
    fn execute(
        &self,
        input: &Self::Input,
        cfg: RunConfig<'_>,
    ) -> Result<Execution<Self::Output>, MachineError>;
}

/// Runs `spec` on `input` and returns the output with its trace.
pub fn run<A: AlgorithmSpec>(spec: &A, input: &A::Input) -> Result<(A::Output, Trace), MachineError> {
    let e = run_with(spec, input, RunConfig::default())?;
    Ok((e.output, e.trace))
}

/// Like [`run`] with explicit configuration.
pub fn run_with<A: AlgorithmSpec>(
    spec: &A,
    input: &A::Input,
    cfg: RunConfig<'_>,
) -> Result<Execution<A::Output>, MachineError> {
    let n = spec.input_size(input);
    let v = spec.vps(n)?;
    if v == 0 || !v.is_power_of_two() {
        return Err(MachineError::NotPowerOfTwo(v));
    }
    let e = spec.execute(input, cfg)?;
    if e.trace.v != v {
        return Err(MachineError::SizeMismatch {
            expected: v,
            got: e.trace.v,
        });
    }
    Ok(e)
}

/// True iff every input yields the same superstep count, label sequence
/// and per-superstep pair multiset.
pub fn check_static<A: AlgorithmSpec>(spec: &A, inputs: &[A::Input]) -> Result<bool, MachineError> {
    let traces = inputs.iter().map(|i| run(spec, i).map(|r| r.1)).collect::<Result<Vec<_>, _>>()?;
    Ok(same_structure(&traces))
}

/// The comparison behind [`check_static`], on traces already at hand.
pub fn same_structure(traces: &[Trace]) -> bool {
    let Some((first, rest)) = traces.split_first() else { return true };
    rest.iter().all(|t| {
        t.records.len() == first.records.len()
            && t.records.iter().zip(&first.records).all(|(a, b)| {
                a.label == b.label && (Arc::ptr_eq(&a.pairs_arc(), &b.pairs_arc()) || a.sorted_pairs() == b.sorted_pairs())
            })
    })
}

/// Per-VP view handed to program code.
pub struct Ctx<'a, W> {
    r: usize,
    v: usize,
    seq: usize,
    inbox: &'a mut Vec<Message<W>>,
    out: &'a mut Vec<Message<W>>,
    ordinal: &'a mut u32,
    fault: &'a mut Option<MachineError>,
    may_send: bool,
}

impl<W> Ctx<'_, W> {
    pub fn index(&self) -> usize {
        self.r
    }

    pub fn v(&self) -> usize {
        self.v
    }

    /// Drains every message received so far, ordered by (sender, ordinal).
    pub fn receive(&mut self) -> Vec<Message<W>> {
        std::mem::take(self.inbox)
    }

    /// Drains the inbox, dropping dummy messages.
    pub fn receive_data(&mut self) -> Vec<Message<W>> {
        let mut all = self.receive();
        all.retain(|m| !m.dummy);
        all
    }

    pub fn send(&mut self, dst: usize, payload: W) {
        self.push(dst, payload, false);
    }

    /// Records a program fault; the current step returns it as an error.
    pub fn fail(&mut self, what: impl Into<String>) {
        if self.fault.is_none() {
            *self.fault = Some(MachineError::Program {
                vp: self.r,
                what: what.into(),
            });
        }
    }

    fn push(&mut self, dst: usize, payload: W, dummy: bool) {
        if !self.may_send {
            if self.fault.is_none() {
                *self.fault = Some(MachineError::SendAfterLastSync(self.r));
            }
            return;
        }
        if dst >= self.v {
            if self.fault.is_none() {
                *self.fault = Some(MachineError::OutOfRange {
                    seq: self.seq,
                    src: self.r,
                    dst,
                    v: self.v,
                });
            }
            return;
        }
        let ordinal = *self.ordinal;
        *self.ordinal += 1;
        self.out.push(Message {
            src: VpIndex(self.r as u32),
            dst: VpIndex(dst as u32),
            payload,
            superstep_seq: self.seq,
            ordinal,
            dummy,
        });
    }
}

impl<W: Default> Ctx<'_, W> {
    /// Sends a message flagged as dummy; it carries no problem data.
    pub fn send_dummy(&mut self, dst: usize) {
        self.push(dst, W::default(), true);
    }
}

/// The machine M(v) with per-VP state `S` and message payload `W`.
pub struct Machine<'r, S, W> {
    v: usize,
    n: usize,
    log_v: u32,
    states: Vec<S>,
    inboxes: Vec<Vec<Message<W>>>,
    outbox: Vec<Message<W>>,
    ordinals: Vec<u32>,
    records: Vec<SuperstepRecord>,
    interned: HashMap<u64, Vec<Arc<[Pair]>>>,
    router: Option<&'r mut dyn Router>,
    observe: Option<(usize, Vec<u64>)>,
    scratch: Vec<u64>,
}

impl<'r, S, W> Machine<'r, S, W> {
    pub fn new(v: usize, n: usize, states: Vec<S>, cfg: RunConfig<'r>) -> Result<Self, MachineError> {
        if v == 0 || !v.is_power_of_two() {
            return Err(MachineError::NotPowerOfTwo(v));
        }
        if states.len() != v {
            return Err(MachineError::SizeMismatch {
                expected: v,
                got: states.len(),
            });
        }
        let observe = match cfg.observe {
            Some(p) if !p.is_power_of_two() || p > v => return Err(MachineError::NotPowerOfTwo(p)),
            Some(p) => Some((p, Vec::new())),
            None => None,
        };
        if let Some(r) = cfg.router.as_ref() {
            let p = r.processors();
            if p == 0 || !p.is_power_of_two() || p > v {
                return Err(MachineError::Routing(format!(
                    "router wants {p} processors on a machine of {v}"
                )));
            }
        }
        Ok(Machine {
            v,
            n,
            log_v: log2_exact(v),
            states,
            inboxes: (0..v).map(|_| Vec::new()).collect(),
            outbox: Vec::new(),
            ordinals: vec![0; v],
            records: Vec::new(),
            interned: HashMap::new(),
            router: cfg.router,
            observe,
            scratch: Vec::new(),
        })
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn log_v(&self) -> u32 {
        self.log_v
    }

    /// Number of supersteps closed so far.
    pub fn seq(&self) -> usize {
        self.records.len()
    }

    /// Runs `f` on every VP in ascending index order, inside the current
    /// superstep.
    pub fn step<F>(&mut self, f: F) -> Result<(), MachineError>
    where
        F: FnMut(&mut Ctx<'_, W>, &mut S),
    {
        self.run_block(f, true)
    }

    fn run_block<F>(&mut self, mut f: F, may_send: bool) -> Result<(), MachineError>
    where
        F: FnMut(&mut Ctx<'_, W>, &mut S),
    {
        let seq = self.records.len();
        let mut fault = None;
        for r in 0..self.v {
            let mut ctx = Ctx {
                r,
                v: self.v,
                seq,
                inbox: &mut self.inboxes[r],
                out: &mut self.outbox,
                ordinal: &mut self.ordinals[r],
                fault: &mut fault,
                may_send,
            };
            f(&mut ctx, &mut self.states[r]);
            if let Some(e) = fault {
                return Err(e);
            }
        }
        Ok(())
    }

    /// Closes the current superstep with `sync(label)`.
    pub fn sync(&mut self, label: u32) -> Result<(), MachineError> {
        let seq = self.records.len();
        let bound = log2c(self.v);
        if label >= bound {
            return Err(MachineError::BadLabel { seq, label, bound });
        }
        let mut msgs = std::mem::take(&mut self.outbox);
        msgs.sort_by_key(|m| (m.src, m.ordinal));
        for m in &msgs {
            if !same_cluster(m.src.get(), m.dst.get(), label, self.log_v) {
                return Err(MachineError::ClusterViolation {
                    seq,
                    label,
                    src: m.src.get(),
                    dst: m.dst.get(),
                });
            }
        }
        let pairs: Vec<Pair> = msgs
            .iter()
            .map(|m| Pair::new(m.src.get(), m.dst.get(), m.dummy))
            .collect();
        self.observe_superstep(label, &pairs);
        let shared = self.intern(pairs);
        self.records.push(SuperstepRecord::shared(seq, label, shared));
        if let Some(router) = self.router.as_deref_mut() {
            let envelopes: Vec<Envelope> = msgs
                .iter()
                .map(|m| Envelope {
                    src: m.src,
                    dst: m.dst,
                    ordinal: m.ordinal,
                    dummy: m.dummy,
                })
                .collect();
            let landed = router.route(seq, label, self.v, &envelopes)?;
            if landed.len() != msgs.len() {
                return Err(MachineError::Routing(format!(
                    "superstep {seq}: {} of {} messages accounted for",
                    landed.len(),
                    msgs.len()
                )));
            }
            let block = self.v / router.processors();
            for (m, &proc_) in msgs.iter().zip(&landed) {
                if m.dst.get() / block != proc_ {
                    return Err(MachineError::Routing(format!(
                        "superstep {seq}: message {} -> {} ended on processor {proc_}",
                        m.src.get(),
                        m.dst.get()
                    )));
                }
            }
        }
        for m in msgs {
            self.inboxes[m.dst.get()].push(m);
        }
        self.ordinals.iter_mut().for_each(|o| *o = 0);
        Ok(())
    }

    /// `step(f)` followed by `sync(label)`.
    pub fn superstep<F>(&mut self, label: u32, f: F) -> Result<(), MachineError>
    where
        F: FnMut(&mut Ctx<'_, W>, &mut S),
    {
        self.step(f)?;
        self.sync(label)
    }

    /// Runs trailing local work after the last barrier (it may receive but
    /// not send) and returns the final states with the trace.
    pub fn finish<F>(mut self, f: F) -> Result<(Vec<S>, Trace, Option<ObservedDegrees>), MachineError>
    where
        F: FnMut(&mut Ctx<'_, W>, &mut S),
    {
        if !self.outbox.is_empty() {
            return Err(MachineError::SendAfterLastSync(self.outbox[0].src.get()));
        }
        self.run_block(f, false)?;
        let trace = Trace {
            v: self.v,
            n: self.n,
            records: self.records,
        };
        let observed = self.observe.map(|(p, degrees)| ObservedDegrees { p, degrees });
        Ok((self.states, trace, observed))
    }

    fn intern(&mut self, pairs: Vec<Pair>) -> Arc<[Pair]> {
        let mut h = DefaultHasher::new();
        pairs.hash(&mut h);
        let key = h.finish();
        let bucket = self.interned.entry(key).or_default();
        if let Some(found) = bucket.iter().find(|a| a[..] == pairs[..]) {
            return found.clone();
        }
        let a: Arc<[Pair]> = pairs.into();
        bucket.push(a.clone());
        a
    }

    fn observe_superstep(&mut self, label: u32, pairs: &[Pair]) {
        let Some((p, degrees)) = self.observe.as_mut() else {
            return;
        };
        let p = *p;
        if p == 1 || label >= log2_exact(p) {
            degrees.push(0);
            return;
        }
        let block = (self.v / p) as u32;
        self.scratch.clear();
        self.scratch.resize(2 * p, 0);
        for pr in pairs {
            let (a, b) = ((pr.src / block) as usize, (pr.dst / block) as usize);
            if a != b {
                self.scratch[2 * a] += 1;
                self.scratch[2 * b + 1] += 1;
            }
        }
        degrees.push(self.scratch.iter().copied().max().unwrap_or(0));
    }
}
