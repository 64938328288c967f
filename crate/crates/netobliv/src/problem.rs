//! Problem instances, value domains and seeded generators shared by the
//! algorithms and the oracles.

use num::complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::machine::MachineError;

/// Semiring used by the matrix algorithms.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Semiring {
    /// `(+, x)` on wrapping 64-bit integers.
    Integer,
    /// `(min, +)` with `i64::MAX` as infinity.
    MinPlus,
}

pub const INF: i64 = i64::MAX;

impl Semiring {
    pub fn zero(self) -> i64 {
        match self {
            Semiring::Integer => 0,
            Semiring::MinPlus => INF,
        }
    }

    pub fn one(self) -> i64 {
        match self {
            Semiring::Integer => 1,
            Semiring::MinPlus => 0,
        }
    }

    pub fn add(self, a: i64, b: i64) -> i64 {
        match self {
            Semiring::Integer => a.wrapping_add(b),
            Semiring::MinPlus => a.min(b),
        }
    }

    pub fn mul(self, a: i64, b: i64) -> i64 {
        match self {
            Semiring::Integer => a.wrapping_mul(b),
            Semiring::MinPlus => {
                if a == INF || b == INF {
                    INF
                } else {
                    a.saturating_add(b).min(INF)
                }
            }
        }
    }
}

/// Square matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix {
    pub side: usize,
    pub data: Vec<i64>,
}

impl Matrix {
    pub fn new(side: usize, data: Vec<i64>) -> Result<Self, MachineError> {
        if data.len() != side * side {
            return Err(MachineError::SizeMismatch { expected: side * side, got: data.len() });
        }
        Ok(Matrix { side, data })
    }

    pub fn identity(side: usize, s: Semiring) -> Self {
        let mut data = vec![s.zero(); side * side];
        for i in 0..side {
            data[i * side + i] = s.one();
        }
        Matrix { side, data }
    }

    pub fn get(&self, i: usize, j: usize) -> i64 {
        self.data[i * self.side + j]
    }
}

/// `A x B` over a semiring; `n = side^2`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixInstance {
    pub a: Matrix,
    pub b: Matrix,
    pub semiring: Semiring,
}

impl MatrixInstance {
    pub fn n(&self) -> usize {
        self.a.side * self.a.side
    }

    /// Checks shapes and that `n` is an even power of two.
    pub fn validate(&self) -> Result<usize, MachineError> {
        let n = self.n();
        if self.b.side != self.a.side || self.a.data.len() != n || self.b.data.len() != n {
            return Err(MachineError::InvalidInput("A and B must be square of equal side".into()));
        }
        if !n.is_power_of_two() || n.trailing_zeros() % 2 != 0 {
            return Err(MachineError::InvalidInput(format!("n = {n} is not an even power of two")));
        }
        Ok(n)
    }
}

/// Prime modulus of the exact FFT mode, `119 * 2^23 + 1`.
pub const MOD_P: u64 = 998_244_353;
/// Generator of the multiplicative group mod [`MOD_P`].
pub const MOD_G: u64 = 3;

pub fn mod_pow(mut b: u64, mut e: u64) -> u64 {
    let mut r = 1u64;
    b %= MOD_P;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % MOD_P;
        }
        b = b * b % MOD_P;
        e >>= 1;
    }
    r
}

/// Principal `n`-th root of unity mod [`MOD_P`], `n | 2^23`.
pub fn mod_root(n: usize) -> u64 {
    mod_pow(MOD_G, (MOD_P - 1) / n as u64)
}

/// FFT input values. The transform is `X_k = sum_j x_j w^(jk)` with
/// `w = exp(-2 pi i / n)` or the principal modular root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FftInstance {
    Complex(Vec<Complex64>),
    Modular(Vec<u64>),
}

impl FftInstance {
    pub fn len(&self) -> usize {
        match self {
            FftInstance::Complex(v) => v.len(),
            FftInstance::Modular(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Transform values, indexed by frequency.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FftOutput {
    Complex(Vec<Complex64>),
    Modular(Vec<u64>),
}

/// Distinct keys to be ranked.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SortInstance {
    pub keys: Vec<i64>,
}

/// Function evaluated at every stencil node over its predecessor values,
/// listed in lexicographic order of the offsets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeFn {
    Sum,
    Mix,
}

impl NodeFn {
    pub fn eval(self, preds: &[i64]) -> i64 {
        match self {
            NodeFn::Sum => preds.iter().fold(0i64, |a, &b| a.wrapping_add(b)),
            NodeFn::Mix => preds
                .iter()
                .fold(0x9e37_79b9_i64, |a, &b| a.wrapping_mul(1_000_003) ^ b),
        }
    }
}

/// The `(n, d)`-stencil: nodes `(x, t)` with `x` in `[0, n)^d`, `t` in
/// `[0, n)`; `(x, t)` reads `(x + delta, t - 1)` for every `delta` in
/// `{-1, 0, 1}^d` inside the grid. Row `t = -1` holds `inputs`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StencilInstance {
    pub d: usize,
    pub n: usize,
    pub func: NodeFn,
    /// `n^d` values, `x` linearised with `x_0` fastest.
    pub inputs: Vec<i64>,
}

impl StencilInstance {
    pub fn points(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn validate(&self) -> Result<(), MachineError> {
        if !(1..=2).contains(&self.d) {
            return Err(MachineError::InvalidInput(format!("d = {} is not 1 or 2", self.d)));
        }
        if self.n < 2 || !self.n.is_power_of_two() {
            return Err(MachineError::InvalidInput(format!("n = {} is not a power of two >= 2", self.n)));
        }
        if self.inputs.len() != self.points() {
            return Err(MachineError::SizeMismatch { expected: self.points(), got: self.inputs.len() });
        }
        Ok(())
    }
}

/// Broadcast `V[0]` into every entry of `V`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BroadcastInstance {
    pub values: Vec<i64>,
}

/// Deterministic instance generator.
pub struct Gen {
    rng: ChaCha8Rng,
}

impl Gen {
    pub fn new(seed: u64) -> Self {
        Gen { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn matrix(&mut self, side: usize, s: Semiring) -> Matrix {
        let data = (0..side * side)
            .map(|_| match s {
                Semiring::Integer => self.rng.gen_range(-50..=50),
                Semiring::MinPlus => {
                    if self.rng.gen_bool(0.1) {
                        INF
                    } else {
                        self.rng.gen_range(0..=1000)
                    }
                }
            })
            .collect();
        Matrix { side, data }
    }

    pub fn matrix_instance(&mut self, n: usize, s: Semiring) -> MatrixInstance {
        let side = (n as f64).sqrt().round() as usize;
        MatrixInstance { a: self.matrix(side, s), b: self.matrix(side, s), semiring: s }
    }

    pub fn fft_complex(&mut self, n: usize) -> FftInstance {
        FftInstance::Complex(
            (0..n)
                .map(|_| Complex64::new(self.rng.gen_range(-1.0..1.0), self.rng.gen_range(-1.0..1.0)))
                .collect(),
        )
    }

    pub fn fft_modular(&mut self, n: usize) -> FftInstance {
        FftInstance::Modular((0..n).map(|_| self.rng.gen_range(0..MOD_P)).collect())
    }

    /// A random permutation of `n` distinct keys drawn from a wide range.
    pub fn keys(&mut self, n: usize) -> SortInstance {
        let mut keys: Vec<i64> = Vec::with_capacity(n);
        let mut seen = std::collections::HashSet::new();
        while keys.len() < n {
            let k = self.rng.gen_range(-1_000_000_000..1_000_000_000);
            if seen.insert(k) {
                keys.push(k);
            }
        }
        keys.shuffle(&mut self.rng);
        SortInstance { keys }
    }

    pub fn stencil(&mut self, d: usize, n: usize, func: NodeFn) -> StencilInstance {
        let inputs = (0..n.pow(d as u32)).map(|_| self.rng.gen_range(-1000..=1000)).collect();
        StencilInstance { d, n, func, inputs }
    }

    pub fn broadcast(&mut self, n: usize) -> BroadcastInstance {
        BroadcastInstance { values: (0..n).map(|_| self.rng.gen_range(-1000..=1000)).collect() }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
