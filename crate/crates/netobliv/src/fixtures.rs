//! Small hand-built programs used as fixtures by tests and the CLI.

use crate::machine::{log2_exact, AlgorithmSpec, Execution, Machine, MachineError, RunConfig};

fn require_pow2(n: usize, min: usize) -> Result<usize, MachineError> {
    if n < min || !n.is_power_of_two() {
        return Err(MachineError::InvalidInput(format!("n = {n} must be a power of two >= {min}")));
    }
    Ok(n)
}

/// VP 0 sends its `n` input values to VP `n/2` in one 0-superstep. Full
/// but far from wise. Output: per-VP sum of received values.
#[derive(Debug, Clone, Copy, Default)]
pub struct SingleSender;

impl AlgorithmSpec for SingleSender {
    type Input = Vec<i64>;
    type Output = Vec<i64>;

    fn problem_id(&self) -> &'static str {
        "single_sender"
    }

    fn input_size(&self, input: &Vec<i64>) -> usize {
        input.len()
    }

    fn vps(&self, n: usize) -> Result<usize, MachineError> {
        require_pow2(n, 2)
    }

    fn execute(&self, input: &Vec<i64>, cfg: RunConfig<'_>) -> Result<Execution<Vec<i64>>, MachineError> {
        let v = self.vps(input.len())?;
        let mut m: Machine<i64, i64> = Machine::new(v, v, vec![0; v], cfg)?;
        m.superstep(0, |ctx, _| {
            if ctx.index() == 0 {
                for &x in input {
                    ctx.send(v / 2, x);
                }
            }
        })?;
        let (states, trace, observed) = m.finish(|ctx, s| {
            *s = ctx.receive().iter().map(|m| m.payload).sum();
        })?;
        Ok(Execution { output: states, trace, observed })
    }
}

/// One superstep per label `i`: every VP swaps its value with the VP that
/// differs in bit `log v - 1 - i`.
#[derive(Debug, Clone, Copy, Default)]
pub struct BalancedMatching;

impl AlgorithmSpec for BalancedMatching {
    type Input = Vec<i64>;
    type Output = Vec<i64>;

    fn problem_id(&self) -> &'static str {
        "balanced_matching"
    }

    fn input_size(&self, input: &Vec<i64>) -> usize {
        input.len()
    }

    fn vps(&self, n: usize) -> Result<usize, MachineError> {
        require_pow2(n, 2)
    }

    fn execute(&self, input: &Vec<i64>, cfg: RunConfig<'_>) -> Result<Execution<Vec<i64>>, MachineError> {
        let v = self.vps(input.len())?;
        let mut m: Machine<i64, i64> = Machine::new(v, v, input.clone(), cfg)?;
        for i in 0..log2_exact(v) {
            m.step(|ctx, s| {
                if let Some(msg) = ctx.receive().pop() {
                    *s = msg.payload;
                }
                ctx.send(ctx.index() ^ (v >> (i + 1)), *s);
            })?;
            m.sync(i)?;
        }
        let (states, trace, observed) = m.finish(|ctx, s| {
            if let Some(msg) = ctx.receive().pop() {
                *s = msg.payload;
            }
        })?;
        Ok(Execution { output: states, trace, observed })
    }
}

/// Sends from VP 0 to VP 1 only when `input[0]` is even: not static.
#[derive(Debug, Clone, Copy, Default)]
pub struct DataDependentToy;

impl AlgorithmSpec for DataDependentToy {
    type Input = Vec<i64>;
    type Output = Vec<i64>;

    fn problem_id(&self) -> &'static str {
        "data_dependent_toy"
    }

    fn input_size(&self, input: &Vec<i64>) -> usize {
        input.len()
    }

    fn vps(&self, n: usize) -> Result<usize, MachineError> {
        require_pow2(n, 2)
    }

    fn execute(&self, input: &Vec<i64>, cfg: RunConfig<'_>) -> Result<Execution<Vec<i64>>, MachineError> {
        let v = self.vps(input.len())?;
        let mut m: Machine<i64, i64> = Machine::new(v, v, input.clone(), cfg)?;
        m.superstep(0, |ctx, s| {
            if ctx.index() == 0 && *s % 2 == 0 {
                ctx.send(1, *s);
            }
        })?;
        let (states, trace, observed) = m.finish(|ctx, s| {
            for msg in ctx.receive() {
                *s = msg.payload;
            }
        })?;
        Ok(Execution { output: states, trace, observed })
    }
}

/// `v = 2`: VP 0 sends its value to VP 1 in one 0-superstep.
#[derive(Debug, Clone, Copy, Default)]
pub struct TrivialExchange;

impl AlgorithmSpec for TrivialExchange {
    type Input = [i64; 2];
    type Output = [i64; 2];

    fn problem_id(&self) -> &'static str {
        "trivial_exchange"
    }

    fn input_size(&self, _: &[i64; 2]) -> usize {
        2
    }

    fn vps(&self, _: usize) -> Result<usize, MachineError> {
        Ok(2)
    }

    fn execute(&self, input: &[i64; 2], cfg: RunConfig<'_>) -> Result<Execution<[i64; 2]>, MachineError> {
        let mut m: Machine<i64, i64> = Machine::new(2, 2, input.to_vec(), cfg)?;
        m.superstep(0, |ctx, s| {
            if ctx.index() == 0 {
                ctx.send(1, *s);
            }
        })?;
        let (states, trace, observed) = m.finish(|ctx, s| {
            for msg in ctx.receive() {
                *s = msg.payload;
            }
        })?;
        Ok(Execution { output: [states[0], states[1]], trace, observed })
    }
}
