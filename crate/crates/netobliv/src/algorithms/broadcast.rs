//! Broadcast of `V[0]` to every entry of `V`, one entry per processor.

use num::{BigInt, ToPrimitive, Zero};
use serde::Serialize;

use crate::folding::profile;
use crate::machine::{log2_exact, AlgorithmSpec, Execution, Machine, MachineError, RunConfig, Trace};
use crate::metrics::{comm_complexity, EvalParams, Q};
use crate::problem::BroadcastInstance;

/// Smallest power of two `>= max(2, sigma)`.
pub fn kappa_for(sigma: &Q) -> usize {
    let c = sigma.ceil().to_integer();
    let c = if c < BigInt::from(2) { 2 } else { c.to_usize().unwrap_or(usize::MAX / 2) };
    c.next_power_of_two()
}

fn check(values: &[i64]) -> Result<usize, MachineError> {
    let p = values.len();
    if p == 0 || !p.is_power_of_two() {
        return Err(MachineError::NotPowerOfTwo(p));
    }
    Ok(p)
}

/// Runs the fan-out schedule: in superstep `i` every holder at a multiple
/// of `p/fan^i` sends to the multiples of `p/fan^(i+1)` in its block.
fn fan_out(
    values: &[i64],
    fan: usize,
    label_of: impl Fn(usize, usize) -> u32,
    cfg: RunConfig<'_>,
) -> Result<Execution<Vec<i64>>, MachineError> {
    let p = check(values)?;
    let mut m: Machine<i64, i64> = Machine::new(p, p, values.to_vec(), cfg)?;
    let mut block = p;
    let mut i = 0;
    while block > 1 {
        let next = (block / fan).max(1);
        m.step(|ctx, s| {
            if let Some(msg) = ctx.receive().pop() {
                *s = msg.payload;
            }
            let r = ctx.index();
            if r % block == 0 {
                for t in 1..block / next {
                    ctx.send(r + t * next, *s);
                }
            }
        })?;
        m.sync(label_of(i, block))?;
        block = next;
        i += 1;
    }
    let (states, trace, observed) = m.finish(|ctx, s| {
        if let Some(msg) = ctx.receive().pop() {
            *s = msg.payload;
        }
    })?;
    Ok(Execution { output: states, trace, observed })
}

/// Parameter-aware broadcast on M(p) with fan-out `kappa`.
#[derive(Debug, Clone)]
pub struct BroadcastAware {
    pub kappa: usize,
}

impl BroadcastAware {
    pub fn new(sigma: &Q) -> Self {
        BroadcastAware { kappa: kappa_for(sigma) }
    }
}

impl AlgorithmSpec for BroadcastAware {
    type Input = BroadcastInstance;
    type Output = Vec<i64>;

    fn problem_id(&self) -> &'static str {
        "broadcast_aware"
    }

    fn input_size(&self, input: &BroadcastInstance) -> usize {
        input.values.len()
    }

    fn vps(&self, n: usize) -> Result<usize, MachineError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(MachineError::NotPowerOfTwo(n));
        }
        Ok(n)
    }

    fn execute(&self, input: &BroadcastInstance, cfg: RunConfig<'_>) -> Result<Execution<Vec<i64>>, MachineError> {
        let p = check(&input.values)?;
        let log_p = log2_exact(p);
        fan_out(&input.values, self.kappa, |_, block| log_p - log2_exact(block), cfg)
    }
}

/// Binary doubling: `log p` supersteps, the `i`-th labeled `i`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BroadcastOblivious;

impl AlgorithmSpec for BroadcastOblivious {
    type Input = BroadcastInstance;
    type Output = Vec<i64>;

    fn problem_id(&self) -> &'static str {
        "broadcast_oblivious"
    }

    fn input_size(&self, input: &BroadcastInstance) -> usize {
        input.values.len()
    }

    fn vps(&self, n: usize) -> Result<usize, MachineError> {
        if n == 0 || !n.is_power_of_two() {
            return Err(MachineError::NotPowerOfTwo(n));
        }
        Ok(n)
    }

    fn execute(&self, input: &BroadcastInstance, cfg: RunConfig<'_>) -> Result<Execution<Vec<i64>>, MachineError> {
        fan_out(&input.values, 2, |i, _| i as u32, cfg)
    }
}

/// One grid point of a GAP study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapRow {
    pub sigma: String,
    pub h_oblivious: String,
    pub h_aware: String,
    pub ratio: f64,
    /// Running maximum of `ratio` up to this point.
    pub gap: f64,
    /// `log max(2,s2) / (log max(2,s1) + log log max(2,s2))` with `s1` the
    /// first grid point and `s2` this one.
    pub lower_bound_shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    pub p: usize,
    pub rows: Vec<GapRow>,
    pub gap: f64,
}

fn lg(x: f64) -> f64 {
    x.log2().max(1.0)
}

/// `max` over `grid` of `H_oblivious(sigma) / H_aware(sigma)` at `p`, with
/// the aware algorithm re-run at each `sigma`. The grid is sorted first.
pub fn gap_ratio(oblivious: &Trace, p: usize, grid: &[Q]) -> Result<GapReport, MachineError> {
    if grid.is_empty() {
        return Err(MachineError::InvalidInput("empty sigma grid".into()));
    }
    if grid.iter().any(|s| s < &Q::zero()) {
        return Err(MachineError::InvalidInput("negative sigma".into()));
    }
    let mut grid = grid.to_vec();
    grid.sort();
    grid.dedup();
    let obl = profile(oblivious, p).map_err(|e| MachineError::InvalidInput(e.to_string()))?;
    let input = BroadcastInstance { values: vec![0; p] };
    let s1 = grid[0].to_f64().unwrap_or(0.0).max(2.0);
    let mut rows = Vec::with_capacity(grid.len());
    let mut best = 0.0f64;
    for sigma in &grid {
        let eval = EvalParams::new(p, sigma.clone()).map_err(|e| MachineError::InvalidInput(e.to_string()))?;
        let h_obl = comm_complexity(&obl, &eval).map_err(|e| MachineError::InvalidInput(e.to_string()))?;
        let (_, aware_trace) = crate::machine::run(&BroadcastAware::new(sigma), &input)?;
        let aw = profile(&aware_trace, p).map_err(|e| MachineError::InvalidInput(e.to_string()))?;
        let h_aw = comm_complexity(&aw, &eval).map_err(|e| MachineError::InvalidInput(e.to_string()))?;
        let ratio = if h_aw.is_zero() { 1.0 } else { (&h_obl / &h_aw).to_f64().unwrap_or(f64::NAN) };
        best = best.max(ratio);
        let s2 = sigma.to_f64().unwrap_or(0.0).max(2.0);
        rows.push(GapRow {
            sigma: sigma.to_string(),
            h_oblivious: h_obl.to_string(),
            h_aware: h_aw.to_string(),
            ratio,
            gap: best,
            lower_bound_shape: lg(s2) / (lg(s1) + lg(lg(s2))),
        });
    }
    Ok(GapReport { p, rows, gap: best })
}

/// `sigma1`, every power of two strictly between, and `sigma2`.
pub fn pow2_grid(sigma1: u64, sigma2: u64) -> Vec<Q> {
    let mut out = vec![Q::from_integer(sigma1.into())];
    let mut s = 1u64;
    while s < sigma2 {
        if s > sigma1 {
            out.push(Q::from_integer(s.into()));
        }
        s *= 2;
    }
    if sigma2 > sigma1 {
        out.push(Q::from_integer(sigma2.into()));
    }
    out
}

