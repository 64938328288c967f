//! Recursive FFT on M(n): sub-FFTs on `2^floor(log m / 2)`-segments, a
//! transpose, then sub-FFTs on the complementary segments.

use num::complex::Complex64;

use super::pad;
use crate::machine::{log2_exact, AlgorithmSpec, Execution, Machine, MachineError, RunConfig};
use crate::problem::{mod_pow, mod_root, FftInstance, FftOutput, MOD_P};

/// Successors of DAG node `<w, l>`: `<w, l+1>` and `<w xor 2^l, l+1>`.
pub fn successors(w: usize, l: u32, n: usize) -> Option<[(usize, u32); 2]> {
    if l >= log2_exact(n) || w >= n {
        return None;
    }
    Some([(w, l + 1), (w ^ (1 << l), l + 1)])
}

pub fn bit_reverse(x: usize, bits: u32) -> usize {
    if bits == 0 {
        0
    } else {
        x.reverse_bits() >> (usize::BITS - bits)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Val {
    #[default]
    Nil,
    C(Complex64),
    M(u64),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Msg {
    w: u32,
    val: Val,
}

#[derive(Debug, Clone, Copy)]
enum Op {
    /// Butterfly on bit `l` between VP pairs `2j, 2j+1`.
    Exchange { l: u32 },
    /// Transpose inside every `m`-segment; `m1` sub-FFT size, `l0` lowest
    /// bit handled by the segment.
    Transpose { m: usize, m1: usize, l0: u32 },
}

fn schedule(m: usize, l0: u32, out: &mut Vec<Op>) {
    match m {
        1 => {}
        2 => out.push(Op::Exchange { l: l0 }),
        _ => {
            let m1 = 1usize << (log2_exact(m) / 2);
            let m2 = m / m1;
            schedule(m1, l0, out);
            out.push(Op::Transpose { m, m1, l0 });
            schedule(m2, l0 + log2_exact(m1), out);
        }
    }
}

/// Superstep labels of the program on `n` inputs, in order.
pub fn labels(n: usize) -> Vec<u32> {
    let mut ops = Vec::new();
    schedule(n, 0, &mut ops);
    let log_n = log2_exact(n);
    ops.iter()
        .map(|op| match op {
            Op::Exchange { .. } => log_n - 1,
            Op::Transpose { m, .. } => log_n - log2_exact(*m),
        })
        .collect()
}

#[derive(Debug, Clone, Copy)]
struct State {
    w: u32,
    val: Val,
    pending: Option<Op>,
}

fn butterfly(own: &State, other: &Msg, l: u32) -> Val {
    let bit = 1u32 << l;
    let (lo, hi) = if own.w & bit == 0 { (own.val, other.val) } else { (other.val, own.val) };
    let j = (own.w & (bit - 1)) as u64;
    let upper = own.w & bit != 0;
    match (lo, hi) {
        (Val::C(a), Val::C(b)) => {
            let ang = -2.0 * std::f64::consts::PI * j as f64 / (2 * bit) as f64;
            let t = b * Complex64::from_polar(1.0, ang);
            Val::C(if upper { a - t } else { a + t })
        }
        (Val::M(a), Val::M(b)) => {
            let t = b * mod_pow(mod_root(2 * bit as usize), j) % MOD_P;
            Val::M(if upper { (a + MOD_P - t) % MOD_P } else { (a + t) % MOD_P })
        }
        _ => Val::Nil,
    }
}

/// The FFT program. `strict` accepts only `n = 2^(2^k)`.
#[derive(Debug, Clone, Copy)]
pub struct Fft {
    pub dummies: bool,
    pub strict: bool,
}

impl Default for Fft {
    fn default() -> Self {
        Fft { dummies: true, strict: false }
    }
}

impl AlgorithmSpec for Fft {
    type Input = FftInstance;
    type Output = FftOutput;

    fn problem_id(&self) -> &'static str {
        "fft"
    }

    fn input_size(&self, input: &FftInstance) -> usize {
        input.len()
    }

    fn vps(&self, n: usize) -> Result<usize, MachineError> {
        if n < 2 || !n.is_power_of_two() {
            return Err(MachineError::InvalidInput(format!("n = {n} is not a power of two >= 2")));
        }
        if self.strict && !log2_exact(n).is_power_of_two() {
            return Err(MachineError::InvalidInput(format!("n = {n} is not of the form 2^(2^k)")));
        }
        if n > 1 << 23 {
            return Err(MachineError::InvalidInput("n exceeds the modular root range".into()));
        }
        Ok(n)
    }

    fn execute(&self, input: &FftInstance, cfg: RunConfig<'_>) -> Result<Execution<FftOutput>, MachineError> {
        let n = self.vps(input.len())?;
        let bits = log2_exact(n);
        let states: Vec<State> = (0..n)
            .map(|t| {
                let src = bit_reverse(t, bits);
                let val = match input {
                    FftInstance::Complex(v) => Val::C(v[src]),
                    FftInstance::Modular(v) => Val::M(v[src] % MOD_P),
                };
                State { w: t as u32, val, pending: None }
            })
            .collect();
        let mut m: Machine<State, Msg> = Machine::new(n, n, states, cfg)?;
        let mut ops = Vec::new();
        schedule(n, 0, &mut ops);
        let dummies = self.dummies;
        for op in ops {
            let label = match op {
                Op::Exchange { .. } => bits - 1,
                Op::Transpose { m, .. } => bits - log2_exact(m),
            };
            m.step(|ctx, s| {
                absorb(ctx.receive_data().first().map(|m| m.payload), s);
                let r = ctx.index();
                let msg = Msg { w: s.w, val: s.val };
                match op {
                    Op::Exchange { .. } => ctx.send(r ^ 1, msg),
                    Op::Transpose { m, m1, l0 } => {
                        let rel = (s.w as usize >> l0) & (m - 1);
                        let (hi, lo) = (rel / m1, rel % m1);
                        ctx.send((r & !(m - 1)) + lo * (m / m1) + hi, msg);
                    }
                }
                s.pending = Some(op);
                if dummies {
                    pad(ctx, label, 1);
                }
            })?;
            m.sync(label)?;
        }
        let (states, trace, observed) = m.finish(|ctx, s| {
            absorb(ctx.receive_data().first().map(|m| m.payload), s);
        })?;
        let output = match input {
            FftInstance::Complex(_) => {
                let mut out = vec![Complex64::new(0.0, 0.0); n];
                for s in &states {
                    if let Val::C(c) = s.val {
                        out[s.w as usize] = c;
                    }
                }
                FftOutput::Complex(out)
            }
            FftInstance::Modular(_) => {
                let mut out = vec![0u64; n];
                for s in &states {
                    if let Val::M(x) = s.val {
                        out[s.w as usize] = x;
                    }
                }
                FftOutput::Modular(out)
            }
        };
        Ok(Execution { output, trace, observed })
    }
}

fn absorb(msg: Option<Msg>, s: &mut State) {
    match (s.pending.take(), msg) {
        (Some(Op::Exchange { l }), Some(other)) => s.val = butterfly(s, &other, l),
        (Some(Op::Transpose { .. }), Some(other)) => {
            s.w = other.w;
            s.val = other.val;
        }
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_successors() {
        assert_eq!(successors(0, 0, 4), Some([(0, 1), (1, 1)]));
        assert_eq!(successors(0, 2, 4), None);
    }

    #[test]
    fn label_sets() {
        let l: std::collections::BTreeSet<u32> = labels(16).into_iter().collect();
        assert_eq!(l, [0, 2, 3].into_iter().collect());
        assert_eq!(labels(2), vec![0]);
    }
}
