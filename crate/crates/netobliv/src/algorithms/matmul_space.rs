//! Space-efficient recursive matrix multiplication: four segments, two
//! rounds, one entry of each matrix per VP throughout.
//!
//! Matrices are laid out in Z-order. Segment `(x, y)` of a level owns the
//! output quadrant `C_xy` and multiplies `A_{x,x^y} B_{x^y,y}` in the first
//! round and `A_{x,1-(x^y)} B_{1-(x^y),y}` in the second.

use serde::Serialize;

use super::pad;
use crate::machine::{log2_exact, AlgorithmSpec, Execution, Machine, MachineError, RunConfig};
use crate::problem::{Matrix, MatrixInstance, Semiring};

/// Z-order index of `(i, j)` with the row bit above the column bit.
pub fn morton(i: usize, j: usize, bits: u32) -> usize {
    let mut z = 0;
    for b in 0..bits {
        z |= ((j >> b) & 1) << (2 * b);
        z |= ((i >> b) & 1) << (2 * b + 1);
    }
    z
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Entry {
    is_b: bool,
    val: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Permute(u32),
    Swap(u32),
    Restore(u32),
}

fn schedule(i: u32, depth: u32, out: &mut Vec<Op>) {
    out.push(Op::Permute(i));
    if i + 1 < depth {
        schedule(i + 1, depth, out);
    }
    out.push(Op::Swap(i));
    if i + 1 < depth {
        schedule(i + 1, depth, out);
    }
    out.push(Op::Restore(i));
}

/// Number of supersteps on `n` VPs: `3 (2^d - 1)`, `d = log_4 n`.
pub fn superstep_count(n: usize) -> usize {
    3 * ((1usize << (log2_exact(n) / 2)) - 1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub struct SpaceStats {
    /// Most matrix entries held by one VP at once, in-flight ones included.
    pub peak_entries: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SpaceOutput {
    pub c: Matrix,
    pub stats: SpaceStats,
}

#[derive(Debug, Clone, Copy)]
struct State {
    a: i64,
    b: i64,
    c: i64,
    pending: Option<Op>,
    peak: usize,
}

#[derive(Debug, Clone, Copy)]
pub struct MatMulSpace {
    pub dummies: bool,
}

impl Default for MatMulSpace {
    fn default() -> Self {
        MatMulSpace { dummies: true }
    }
}

/// Destination quadrant of the A and B blocks held by quadrant `(h, k)`.
fn moves(op: Op, h: usize, k: usize) -> ((usize, usize), (usize, usize)) {
    match op {
        Op::Permute(_) => ((h, h ^ k), (h ^ k, k)),
        Op::Swap(_) => ((h, 1 - k), (1 - h, k)),
        Op::Restore(_) => ((h, 1 - (h ^ k)), (1 - (h ^ k), k)),
    }
}

impl AlgorithmSpec for MatMulSpace {
    type Input = MatrixInstance;
    type Output = SpaceOutput;

    fn problem_id(&self) -> &'static str {
        "matmul_space_efficient"
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

    fn execute(&self, input: &MatrixInstance, cfg: RunConfig<'_>) -> Result<Execution<SpaceOutput>, MachineError> {
        let n = input.validate()?;
        self.vps(n)?;
        let sr = input.semiring;
        let bits = log2_exact(n) / 2;
        let side = 1usize << bits;
        let mut states = vec![State { a: 0, b: 0, c: sr.zero(), pending: None, peak: 3 }; n];
        for i in 0..side {
            for j in 0..side {
                let z = morton(i, j, bits);
                states[z].a = input.a.get(i, j);
                states[z].b = input.b.get(i, j);
            }
        }
        let mut m: Machine<State, Entry> = Machine::new(n, n, states, cfg)?;
        let mut ops = Vec::new();
        schedule(0, bits, &mut ops);
        let dummies = self.dummies;
        for op in ops {
            let i = match op {
                Op::Permute(i) | Op::Swap(i) | Op::Restore(i) => i,
            };
            let label = 2 * i;
            m.step(|ctx, st| {
                absorb(ctx.receive_data().iter().map(|m| m.payload), st, bits, sr);
                let r = ctx.index();
                let q = n >> (2 * i);
                let sub = q / 4;
                let base = r - r % q;
                let quad = (r % q) / sub;
                let off = r % sub;
                let (da, db) = moves(op, quad >> 1, quad & 1);
                ctx.send(base + (2 * da.0 + da.1) * sub + off, Entry { is_b: false, val: st.a });
                ctx.send(base + (2 * db.0 + db.1) * sub + off, Entry { is_b: true, val: st.b });
                st.pending = Some(op);
                if dummies {
                    pad(ctx, label, 1);
                }
            })?;
            m.sync(label)?;
        }
        let (states, trace, observed) =
            m.finish(|ctx, st| absorb(ctx.receive_data().iter().map(|m| m.payload), st, bits, sr))?;
        let mut data = vec![0; n];
        let mut stats = SpaceStats::default();
        for i in 0..side {
            for j in 0..side {
                let st = &states[morton(i, j, bits)];
                data[i * side + j] = st.c;
                stats.peak_entries = stats.peak_entries.max(st.peak);
            }
        }
        Ok(Execution { output: SpaceOutput { c: Matrix { side, data }, stats }, trace, observed })
    }
}

fn absorb(msgs: impl Iterator<Item = Entry>, st: &mut State, depth: u32, sr: Semiring) {
    let Some(op) = st.pending.take() else { return };
    let mut held = 3;
    for e in msgs {
        held += 1;
        if e.is_b { st.b = e.val } else { st.a = e.val }
    }
    st.peak = st.peak.max(held);
    match op {
        Op::Permute(i) | Op::Swap(i) if i + 1 == depth => {
            st.c = sr.add(st.c, sr.mul(st.a, st.b));
        }
        _ => {}
    }
}
