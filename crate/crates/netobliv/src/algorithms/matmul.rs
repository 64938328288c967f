//! Eight-way recursive matrix multiplication on M(n) over a semiring.
//!
//! At level `i` a segment of `q = n/8^i` VPs holds an `s x s` operand pair
//! (`s = sqrt(n)/2^i`) in row-major order, `e = s^2/q` entries per VP. It
//! replicates the quadrants into eight child segments, recurses, and adds
//! the two partial products of every output quadrant.

use serde::Serialize;

use super::pad;
use crate::machine::{log2_exact, AlgorithmSpec, Ctx, Execution, Machine, MachineError, RunConfig};
use crate::problem::{Matrix, MatrixInstance, Semiring};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Entry {
    tag: u8,
    slot: u32,
    val: i64,
}

const A: u8 = 0;
const B: u8 = 1;
const C: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Replicate(usize),
    Gather(usize),
    Scatter(usize),
    Combine(usize),
}

/// Shape of one recursion level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Level {
    s: usize,
    q: usize,
    e: usize,
}

fn levels(n: usize) -> Vec<Level> {
    let side = 1usize << (log2_exact(n) / 2);
    let mut out = Vec::new();
    let (mut s, mut q) = (side, n);
    loop {
        out.push(Level { s, q, e: s * s / q });
        if q < 8 {
            return out;
        }
        s /= 2;
        q /= 8;
    }
}

fn schedule(lv: &[Level]) -> Vec<Op> {
    let depth = lv.len() - 1;
    let mut ops: Vec<Op> = (0..depth).map(Op::Replicate).collect();
    if lv[depth].q > 1 {
        ops.push(Op::Gather(depth));
        ops.push(Op::Scatter(depth));
    }
    ops.extend((0..depth).rev().map(Op::Combine));
    ops
}

/// Per-run instrumentation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct MmStats {
    /// Most multiplicative terms computed by one VP.
    pub max_mults: u64,
    /// Most matrix entries stored by one VP at any time.
    pub peak_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MmOutput {
    pub c: Matrix,
    pub stats: MmStats,
}

#[derive(Debug, Clone, Default)]
struct State {
    a: Vec<Vec<i64>>,
    b: Vec<Vec<i64>>,
    c: Vec<Vec<i64>>,
    full: Vec<i64>,
    pending: Option<Op>,
    mults: u64,
    peak: usize,
}

impl State {
    fn stored(&self) -> usize {
        let sum = |v: &Vec<Vec<i64>>| v.iter().map(Vec::len).sum::<usize>();
        sum(&self.a) + sum(&self.b) + sum(&self.c) + self.full.len()
    }
}

fn local_product(a: &[i64], b: &[i64], s: usize, sr: Semiring, mults: &mut u64) -> Vec<i64> {
    let mut c = vec![sr.zero(); s * s];
    for i in 0..s {
        for k in 0..s {
            let x = a[i * s + k];
            for j in 0..s {
                c[i * s + j] = sr.add(c[i * s + j], sr.mul(x, b[k * s + j]));
            }
        }
    }
    *mults += (s * s * s) as u64;
    c
}

/// The recursive algorithm; `dummies` toggles wiseness padding.
#[derive(Debug, Clone, Copy)]
pub struct MatMul {
    pub dummies: bool,
}

impl Default for MatMul {
    fn default() -> Self {
        MatMul { dummies: true }
    }
}

/// Labels of the program on `n` VPs, in order.
pub fn labels(n: usize) -> Vec<u32> {
    let lv = levels(n);
    schedule(&lv)
        .iter()
        .map(|op| match op {
            Op::Replicate(i) | Op::Gather(i) | Op::Scatter(i) | Op::Combine(i) => 3 * *i as u32,
        })
        .collect()
}

impl AlgorithmSpec for MatMul {
    type Input = MatrixInstance;
    type Output = MmOutput;

    fn problem_id(&self) -> &'static str {
        "matmul"
    }

    fn input_size(&self, input: &MatrixInstance) -> usize {
        input.n()
    }

    fn vps(&self, n: usize) -> Result<usize, MachineError> {
        if n < 4 || !n.is_power_of_two() || n.trailing_zeros() % 2 != 0 {
            return Err(MachineError::InvalidInput(format!("n = {n} is not an even power of two >= 4")));
        }
        Ok(n)
    }

    fn execute(&self, input: &MatrixInstance, cfg: RunConfig<'_>) -> Result<Execution<MmOutput>, MachineError> {
        let n = input.validate()?;
        self.vps(n)?;
        let sr = input.semiring;
        let lv = levels(n);
        let depth = lv.len() - 1;
        let states: Vec<State> = (0..n)
            .map(|t| State {
                a: vec![vec![input.a.data[t]]],
                b: vec![vec![input.b.data[t]]],
                c: vec![Vec::new(); depth + 1],
                ..Default::default()
            })
            .collect();
        let mut m: Machine<State, Entry> = Machine::new(n, n, states, cfg)?;
        let dummies = self.dummies;
        for op in schedule(&lv) {
            let i = match op {
                Op::Replicate(i) | Op::Gather(i) | Op::Scatter(i) | Op::Combine(i) => i,
            };
            let label = 3 * i as u32;
            m.step(|ctx, st| {
                absorb(ctx, st, &lv, sr);
                let r = ctx.index();
                match op {
                    Op::Replicate(i) => replicate(ctx, st, r, lv[i], lv[i + 1], i),
                    Op::Gather(d) => {
                        let Level { q, e, .. } = lv[d];
                        let base = r - r % q;
                        let off = (r % q) * e;
                        for j in 0..e {
                            ctx.send(base, Entry { tag: A, slot: (off + j) as u32, val: st.a[d][j] });
                            ctx.send(base, Entry { tag: B, slot: (off + j) as u32, val: st.b[d][j] });
                        }
                    }
                    Op::Scatter(d) => {
                        let Level { e, .. } = lv[d];
                        for (t, &val) in st.full.iter().enumerate() {
                            ctx.send(r + t / e, Entry { tag: C, slot: (t % e) as u32, val });
                        }
                        st.full.clear();
                    }
                    Op::Combine(i) => combine(ctx, st, r, lv[i], lv[i + 1], i),
                }
                st.pending = Some(op);
                if dummies {
                    pad(ctx, label, 1 << i);
                }
            })?;
            m.sync(label)?;
        }
        let (states, trace, observed) = m.finish(|ctx, st| absorb(ctx, st, &lv, sr))?;
        let mut stats = MmStats::default();
        let mut data = Vec::with_capacity(n);
        for st in &states {
            stats.max_mults = stats.max_mults.max(st.mults);
            stats.peak_entries = stats.peak_entries.max(st.peak);
            data.push(st.c[0][0]);
        }
        let c = Matrix { side: lv[0].s, data };
        let _ = depth;
        Ok(Execution { output: MmOutput { c, stats }, trace, observed })
    }
}

fn replicate(ctx: &mut Ctx<'_, Entry>, st: &State, r: usize, cur: Level, child: Level, i: usize) {
    let Level { s, q, e } = cur;
    let h2 = s / 2;
    let base = r - r % q;
    let cq = q / 8;
    let off = (r % q) * e;
    for j in 0..e {
        let t = off + j;
        let (row, col) = (t / s, t % s);
        let sub = (row % h2) * h2 + col % h2;
        let (dvp, slot) = (sub / child.e, (sub % child.e) as u32);
        let (rb, cb) = (row / h2, col / h2);
        for x in 0..2 {
            // A_{hk} feeds children (h, k, l); B_{kl} feeds children (h, k, l).
            let ca = 4 * rb + 2 * cb + x;
            ctx.send(base + ca * cq + dvp, Entry { tag: A, slot, val: st.a[i][j] });
            let cbi = 4 * x + 2 * rb + cb;
            ctx.send(base + cbi * cq + dvp, Entry { tag: B, slot, val: st.b[i][j] });
        }
    }
}

fn combine(ctx: &mut Ctx<'_, Entry>, st: &State, r: usize, cur: Level, child: Level, i: usize) {
    let Level { s, q, e } = cur;
    let h2 = s / 2;
    let base = r - r % q;
    let cq = q / 8;
    let c = (r % q) / cq;
    let (h, l) = (c >> 2, c & 1);
    let off = (r % cq) * child.e;
    for (j, &val) in st.c[i + 1].iter().enumerate() {
        let t = off + j;
        let (pr, pc) = (t / h2, t % h2);
        let full = (h * h2 + pr) * s + l * h2 + pc;
        ctx.send(base + full / e, Entry { tag: C, slot: (full % e) as u32, val });
    }
}

fn absorb(ctx: &mut Ctx<'_, Entry>, st: &mut State, lv: &[Level], sr: Semiring) {
    let msgs = ctx.receive_data();
    match st.pending.take() {
        Some(Op::Replicate(i)) => {
            let e = lv[i + 1].e;
            let mut a = vec![sr.zero(); e];
            let mut b = vec![sr.zero(); e];
            for m in msgs {
                let w = m.payload;
                if w.tag == A { a[w.slot as usize] = w.val } else { b[w.slot as usize] = w.val }
            }
            if lv[i + 1].q == 1 {
                let s = lv[i + 1].s;
                st.c[i + 1] = local_product(&a, &b, s, sr, &mut st.mults);
            }
            st.a.push(a);
            st.b.push(b);
        }
        Some(Op::Gather(d)) => {
            let s = lv[d].s;
            if !msgs.is_empty() {
                let mut a = vec![sr.zero(); s * s];
                let mut b = vec![sr.zero(); s * s];
                for m in msgs {
                    let w = m.payload;
                    if w.tag == A { a[w.slot as usize] = w.val } else { b[w.slot as usize] = w.val }
                }
                st.peak = st.peak.max(st.stored() + 2 * s * s);
                st.full = local_product(&a, &b, s, sr, &mut st.mults);
            }
        }
        Some(Op::Scatter(d)) | Some(Op::Combine(d)) => {
            let e = lv[d].e;
            let mut c = vec![sr.zero(); e];
            for m in msgs {
                let w = m.payload;
                c[w.slot as usize] = sr.add(c[w.slot as usize], w.val);
            }
            st.c[d] = c;
            if d + 1 < st.a.len() {
                st.a.truncate(d + 1);
                st.b.truncate(d + 1);
                st.c.iter_mut().skip(d + 1).for_each(Vec::clear);
            }
        }
        None => {}
    }
    st.peak = st.peak.max(st.stored());
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_shapes() {
        assert_eq!(levels(64).len(), 3);
        assert_eq!(levels(16).last().unwrap().q, 2);
        let l = levels(4096);
        assert_eq!(l.len(), 5);
        assert_eq!(l[4], Level { s: 4, q: 1, e: 16 });
        assert_eq!(labels(64), vec![0, 3, 3, 0]);
    }
}
