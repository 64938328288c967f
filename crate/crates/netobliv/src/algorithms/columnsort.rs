//! Recursive Columnsort on M(n), one key per VP.
//!
//! A segment of `m` VPs views its keys as an `r x s` matrix in column-major
//! order, each column on `r` consecutive VPs. Phases 1, 3, 5 and 7 sort the
//! columns recursively; phases 2, 4, 6 and 8 are single permutations
//! (transpose, its inverse, an `r/2` cyclic shift and its inverse).

use super::pad;
use crate::machine::{log2_exact, AlgorithmSpec, Execution, Machine, MachineError, RunConfig};
use crate::problem::SortInstance;

/// Column height for a segment of `m` keys: the smallest power of two
/// `r >= m^(2/3)` that also satisfies `r >= 2 (s - 1)^2`, `s = m / r`.
pub fn column_height(m: usize) -> usize {
    let mut r = 1usize;
    while (r as u128).pow(3) < (m as u128).pow(2) {
        r *= 2;
    }
    r = r.min(m);
    while r < m {
        let s = m / r;
        if r >= 2 * (s - 1) * (s - 1) {
            break;
        }
        r *= 2;
    }
    r
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Item {
    /// Bit `d` cleared while the item sits in the wrapped half of column 0
    /// during the phase-7 sort at depth `d`.
    mask: u32,
    key: i64,
    orig: u32,
}

impl Item {
    fn order(&self) -> (u32, i64) {
        (self.mask, self.key)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Perm {
    Transpose,
    Untranspose,
    Shift,
    Unshift,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Op {
    Permute { m: usize, r: usize, depth: u32, perm: Perm },
    Gather { m: usize },
    Scatter { m: usize },
}

impl Op {
    fn m(&self) -> usize {
        match *self {
            Op::Permute { m, .. } | Op::Gather { m } | Op::Scatter { m } => m,
        }
    }
}

fn schedule(m: usize, depth: u32, out: &mut Vec<Op>) {
    if m <= 1 {
        return;
    }
    let r = column_height(m);
    if r == m {
        out.push(Op::Gather { m });
        out.push(Op::Scatter { m });
        return;
    }
    for perm in [Perm::Transpose, Perm::Untranspose, Perm::Shift, Perm::Unshift] {
        schedule(r, depth + 1, out);
        out.push(Op::Permute { m, r, depth, perm });
    }
}

/// Superstep labels of the program on `n` VPs.
pub fn labels(n: usize) -> Vec<u32> {
    let mut ops = Vec::new();
    schedule(n, 0, &mut ops);
    ops.iter().map(|op| log2_exact(n) - log2_exact(op.m())).collect()
}

fn target(perm: Perm, t: usize, m: usize, r: usize) -> usize {
    let s = m / r;
    match perm {
        Perm::Transpose => (t % s) * r + t / s,
        Perm::Untranspose => (t % r) * s + t / r,
        Perm::Shift => (t + r / 2) % m,
        Perm::Unshift => (t + m - r / 2) % m,
    }
}

#[derive(Debug, Clone, Default)]
struct State {
    item: Item,
    buffer: Vec<Item>,
    pending: Option<Op>,
}

#[derive(Debug, Clone, Copy)]
pub struct Columnsort {
    pub dummies: bool,
}

impl Default for Columnsort {
    fn default() -> Self {
        Columnsort { dummies: true }
    }
}

impl AlgorithmSpec for Columnsort {
    type Input = SortInstance;
    /// Rank of every input key.
    type Output = Vec<usize>;

    fn problem_id(&self) -> &'static str {
        "columnsort"
    }

    fn input_size(&self, input: &SortInstance) -> usize {
        input.keys.len()
    }

    fn vps(&self, n: usize) -> Result<usize, MachineError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(MachineError::InvalidInput(format!("n = {n} is not a power of two >= 2")));
        }
        Ok(n)
    }

    fn execute(&self, input: &SortInstance, cfg: RunConfig<'_>) -> Result<Execution<Vec<usize>>, MachineError> {
        let n = self.vps(input.keys.len())?;
        let mut sorted = input.keys.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return Err(MachineError::InvalidInput(format!("duplicate key {}", w[0])));
        }
        let states = input
            .keys
            .iter()
            .enumerate()
            .map(|(i, &key)| State { item: Item { mask: u32::MAX, key, orig: i as u32 }, ..Default::default() })
            .collect();
        let mut mach: Machine<State, Item> = Machine::new(n, n, states, cfg)?;
        let mut ops = Vec::new();
        schedule(n, 0, &mut ops);
        let log_n = log2_exact(n);
        let dummies = self.dummies;
        for op in ops {
            let label = log_n - log2_exact(op.m());
            mach.step(|ctx, st| {
                absorb(ctx.receive_data().into_iter().map(|m| m.payload).collect(), st);
                let r = ctx.index();
                match op {
                    Op::Permute { m, r: rows, depth, perm } => {
                        let base = r - r % m;
                        let t = r % m;
                        let mut item = st.item;
                        match perm {
                            Perm::Shift if t + rows / 2 >= m => item.mask &= !(1 << depth),
                            Perm::Unshift => item.mask |= 1 << depth,
                            _ => {}
                        }
                        ctx.send(base + target(perm, t, m, rows), item);
                    }
                    Op::Gather { m } => ctx.send(r - r % m, st.item),
                    Op::Scatter { .. } => {
                        for (i, item) in std::mem::take(&mut st.buffer).into_iter().enumerate() {
                            ctx.send(r + i, item);
                        }
                    }
                }
                st.pending = Some(op);
                if dummies {
                    pad(ctx, label, 1);
                }
            })?;
            mach.sync(label)?;
        }
        let (states, trace, observed) =
            mach.finish(|ctx, st| absorb(ctx.receive_data().into_iter().map(|m| m.payload).collect(), st))?;
        let mut ranks = vec![0usize; n];
        for (t, st) in states.iter().enumerate() {
            ranks[st.item.orig as usize] = t;
        }
        Ok(Execution { output: ranks, trace, observed })
    }
}

fn absorb(mut msgs: Vec<Item>, st: &mut State) {
    match st.pending.take() {
        Some(Op::Gather { .. }) => {
            msgs.sort_by_key(Item::order);
            st.buffer = msgs;
        }
        Some(_) => {
            if let Some(item) = msgs.pop() {
                st.item = item;
            }
        }
        None => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shapes() {
        assert_eq!(column_height(4096), 512);
        assert_eq!(column_height(512), 128);
        assert_eq!(column_height(64), 32);
        assert_eq!(column_height(4), 4);
        assert_eq!(column_height(8), 4);
    }

    #[test]
    fn transpose_round_trip() {
        let (m, r) = (64, 32);
        for t in 0..m {
            let u = target(Perm::Transpose, t, m, r);
            assert_eq!(target(Perm::Untranspose, u, m, r), t);
            assert_eq!(target(Perm::Unshift, target(Perm::Shift, t, m, r), m, r), t);
        }
    }
}
