//! Sequential reference implementations. Nothing here depends on
//! `crate::algorithms`.

use std::collections::HashSet;

use num::complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::problem::{mod_pow, mod_root, FftInstance, FftOutput, Matrix, NodeFn, Semiring, StencilInstance, MOD_P};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("duplicate key {0}")]
    DuplicateKey(i64),
}

/// Output of an oracle with a checksum of its JSON form.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleResult {
    pub problem: String,
    pub n: usize,
    pub output: serde_json::Value,
    pub checksum: u64,
}

impl OracleResult {
    pub fn new<T: Serialize>(problem: &str, n: usize, output: &T) -> Self {
        let output = serde_json::to_value(output).expect("oracle outputs serialize");
        // FNV-1a over the canonical JSON text.
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in output.to_string().bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x100_0000_01b3);
        }
        OracleResult { problem: problem.to_string(), n, output, checksum: h }
    }
}

/// Triple loop over the semiring.
pub fn oracle_matmul(a: &Matrix, b: &Matrix, s: Semiring) -> Result<Matrix, OracleError> {
    let m = a.side;
    if b.side != m || a.data.len() != m * m || b.data.len() != m * m {
        return Err(OracleError::Shape(format!("{}x{} times {}x{}", a.side, a.side, b.side, b.side)));
    }
    let mut c = vec![s.zero(); m * m];
    for i in 0..m {
        for j in 0..m {
            let mut acc = s.zero();
            for k in 0..m {
                acc = s.add(acc, s.mul(a.get(i, k), b.get(k, j)));
            }
            c[i * m + j] = acc;
        }
    }
    Ok(Matrix { side: m, data: c })
}

/// Naive `O(n^2)` DFT.
pub fn oracle_dft(x: &FftInstance) -> FftOutput {
    match x {
        FftInstance::Complex(v) => {
            let n = v.len();
            let out = (0..n)
                .map(|k| {
                    v.iter()
                        .enumerate()
                        .map(|(j, &xj)| {
                            let ang = -2.0 * std::f64::consts::PI * ((j * k) % n) as f64 / n as f64;
                            xj * Complex64::from_polar(1.0, ang)
                        })
                        .sum()
                })
                .collect();
            FftOutput::Complex(out)
        }
        FftInstance::Modular(v) => {
            let n = v.len();
            let w = mod_root(n);
            let out = (0..n)
                .map(|k| {
                    v.iter().enumerate().fold(0u64, |acc, (j, &xj)| {
                        (acc + xj % MOD_P * mod_pow(w, ((j * k) % n) as u64)) % MOD_P
                    })
                })
                .collect();
            FftOutput::Modular(out)
        }
    }
}

/// `max_k |a_k - b_k| / max_k |b_k|`.
pub fn max_rel_error(a: &[Complex64], b: &[Complex64]) -> f64 {
    let scale = b.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max) / scale
}

/// Rank of every key (number of smaller keys), via a comparison sort.
pub fn oracle_sort(keys: &[i64]) -> Result<Vec<usize>, OracleError> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by_key(|&i| keys[i]);
    for w in idx.windows(2) {
        if keys[w[0]] == keys[w[1]] {
            return Err(OracleError::DuplicateKey(keys[w[0]]));
        }
    }
    let mut rank = vec![0; keys.len()];
    for (r, &i) in idx.iter().enumerate() {
        rank[i] = r;
    }
    Ok(rank)
}

/// Ranks by direct pairwise counting.
pub fn oracle_rank_count(keys: &[i64]) -> Vec<usize> {
    keys.iter().map(|k| keys.iter().filter(|o| *o < k).count()).collect()
}

/// Inclusive prefix sums.
pub fn oracle_prefix(values: &[i64]) -> Vec<i64> {
    values
        .iter()
        .scan(0i64, |acc, &v| {
            *acc = acc.wrapping_add(v);
            Some(*acc)
        })
        .collect()
}

/// Broadcast: every processor ends with the value of processor 0.
pub fn oracle_broadcast(values: &[i64]) -> Vec<i64> {
    values.first().map(|&x| vec![x; values.len()]).unwrap_or_default()
}

/// Offsets `{-1,0,1}^d` in lexicographic order (`delta_0` most significant).
pub fn offsets(d: usize) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for _ in 0..d {
        out = out
            .into_iter()
            .flat_map(|v| {
                (-1..=1).map(move |x| {
                    let mut w = v.clone();
                    w.push(x);
                    w
                })
            })
            .collect();
    }
    out
}

/// Every node of the stencil, row by row; index `t * n^d + x_0 + n x_1`.
pub fn oracle_stencil(inst: &StencilInstance) -> Result<Vec<i64>, OracleError> {
    let (d, n) = (inst.d, inst.n);
    let pts = n.pow(d as u32);
    if inst.inputs.len() != pts || !(1..=2).contains(&d) {
        return Err(OracleError::Shape(format!("{} inputs for d = {d}, n = {n}", inst.inputs.len())));
    }
    let offs = offsets(d);
    let mut prev = inst.inputs.clone();
    let mut out = Vec::with_capacity(pts * n);
    let mut preds = Vec::with_capacity(offs.len());
    for _t in 0..n {
        let mut row = vec![0i64; pts];
        for (lin, slot) in row.iter_mut().enumerate() {
            let x = [lin % n, lin / n];
            preds.clear();
            for o in &offs {
                let mut ok = true;
                let mut plin = 0usize;
                let mut mul = 1usize;
                for dim in 0..d {
                    let c = x[dim] as i64 + o[dim];
                    if c < 0 || c >= n as i64 {
                        ok = false;
                        break;
                    }
                    plin += c as usize * mul;
                    mul *= n;
                }
                if ok {
                    preds.push(prev[plin]);
                }
            }
            *slot = inst.func.eval(&preds);
        }
        out.extend_from_slice(&row);
        prev = row;
    }
    Ok(out)
}

/// Diamond of side `m`: `(i0, i1)` of the `(2m-1)`-stencil (`i0` space,
/// `i1` time) inside the four bounding half-planes.
pub fn diamond_contains(m: i64, i0: i64, i1: i64) -> bool {
    let s = 2 * m - 1;
    (0..s).contains(&i0)
        && (0..s).contains(&i1)
        && i0 + i1 >= m - 1
        && i0 - i1 <= m - 1
        && i0 - i1 >= -(m - 1)
        && i0 + i1 <= 3 * (m - 1)
}

/// Octahedron of side `m` in the `(2m-1, 2)`-stencil (`i2` is time).
pub fn octahedron_contains(m: i64, i0: i64, i1: i64, i2: i64) -> bool {
    let s = 2 * m - 1;
    let inside = [i0, i1, i2].iter().all(|c| (0..s).contains(c));
    inside
        && i0 + i2 >= m - 1
        && i0 - i2 <= m - 1
        && i0 - i2 >= -(m - 1)
        && i0 + i2 <= 3 * (m - 1)
        && i0 + i1 >= m - 1
        && i0 - i1 <= m - 1
        && i0 - i1 >= -(m - 1)
        && i0 + i1 <= 3 * (m - 1)
}

/// Tetrahedron of side `m` in the `(2m-1, 2)`-stencil.
pub fn tetrahedron_contains(m: i64, i0: i64, i1: i64, i2: i64) -> bool {
    let s = 2 * m - 1;
    let inside = [i0, i1, i2].iter().all(|c| (0..s).contains(c));
    inside && i0 + i1 >= m - 1 && i0 - i1 >= m - 1 && i1 + i2 <= 2 * (m - 1) && i1 - i2 <= 0
}

/// Lattice points of the `(side, d)`-stencil accepted by `pred`, in
/// topological (time-major) order. Time is the last coordinate.
pub fn region_nodes(d: usize, side: i64, pred: impl Fn(&[i64]) -> bool) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    let total = (side as usize).pow(d as u32 + 1);
    for lin in 0..total {
        let mut c = Vec::with_capacity(d + 1);
        let mut r = lin;
        for _ in 0..=d {
            c.push((r % side as usize) as i64);
            r /= side as usize;
        }
        if pred(&c) {
            out.push(c);
        }
    }
    out
}

/// Evaluates `nodes` (topologically ordered) where predecessors outside
/// the set take `boundary(coords)`. Returns values in `nodes` order.
pub fn region_eval(
    d: usize,
    side: i64,
    nodes: &[Vec<i64>],
    func: NodeFn,
    boundary: impl Fn(&[i64]) -> i64,
) -> Vec<i64> {
    let members: std::collections::HashMap<&[i64], usize> =
        nodes.iter().enumerate().map(|(i, c)| (c.as_slice(), i)).collect();
    let offs = offsets(d);
    let mut vals = vec![0i64; nodes.len()];
    let mut preds = Vec::new();
    for (idx, c) in nodes.iter().enumerate() {
        preds.clear();
        for o in &offs {
            let mut q: Vec<i64> = (0..d).map(|k| c[k] + o[k]).collect();
            if q.iter().any(|&x| x < 0 || x >= side) {
                continue;
            }
            q.push(c[d] - 1);
            match members.get(q.as_slice()) {
                Some(&j) => preds.push(vals[j]),
                None => preds.push(boundary(&q)),
            }
        }
        vals[idx] = func.eval(&preds);
    }
    vals
}

/// Keys that occur more than once.
pub fn duplicates(keys: &[i64]) -> Vec<i64> {
    let mut seen = HashSet::new();
    let mut d: Vec<i64> = keys.iter().copied().filter(|k| !seen.insert(*k)).collect();
    d.sort_unstable();
    d.dedup();
    d
}
