//! Instance generation and execution for one (algorithm, n) point.

use netobliv::algorithms::broadcast::{BroadcastAware, BroadcastOblivious};
use netobliv::algorithms::columnsort::Columnsort;
use netobliv::algorithms::fft::Fft;
use netobliv::algorithms::matmul::MatMul;
use netobliv::algorithms::matmul_space::MatMulSpace;
use netobliv::algorithms::stencil::Stencil;
use netobliv::machine::{run, AlgorithmSpec, Trace};
use netobliv::metrics::{q, DbspParams, Q};
use netobliv::oracles::*;
use netobliv::problem::*;
use netobliv::protocol::{execute_novel, PrefixStrategy, ProtocolTrace};

use crate::config::AlgoId;
use crate::CliError;

pub struct Request<'a> {
    pub algo: AlgoId,
    pub n: usize,
    pub instances: usize,
    pub seed: u64,
    pub dummies: bool,
    /// Tuning parameter of the aware broadcast.
    pub sigma: &'a Q,
    /// Processor counts to run the novel protocol on.
    pub novel: &'a [usize],
    pub strategy: PrefixStrategy,
}

pub struct NovelRun {
    pub p: usize,
    pub protocol: ProtocolTrace,
    pub matches: bool,
}

pub struct Case {
    pub ok: bool,
    pub trace: Trace,
    pub novel: Vec<NovelRun>,
}

/// Fails with a usage error when `n` is not a legal size.
pub fn check_size(algo: AlgoId, n: usize) -> Result<(), CliError> {
    let bad = |e: netobliv::MachineError| CliError::Usage(format!("{algo} n = {n}: {e}"));
    match algo {
        AlgoId::Matmul => MatMul::default().vps(n).map_err(bad)?,
        AlgoId::MatmulSpaceEfficient => MatMulSpace::default().vps(n).map_err(bad)?,
        AlgoId::Fft => Fft::default().vps(n).map_err(bad)?,
        AlgoId::Columnsort => Columnsort::default().vps(n).map_err(bad)?,
        AlgoId::Stencil1d | AlgoId::Stencil2d => {
            if n < 2 || !n.is_power_of_two() {
                return Err(CliError::Usage(format!("{algo} n = {n}: not a power of two >= 2")));
            }
            n
        }
        AlgoId::BroadcastAware | AlgoId::BroadcastOblivious => BroadcastOblivious.vps(n).map_err(bad)?,
    };
    Ok(())
}

/// Runs `req.instances` random instances and checks each against its
/// oracle.
pub fn execute(req: &Request<'_>) -> Result<Vec<Case>, CliError> {
    let mut g = Gen::new(req.seed);
    let n = req.n;
    let k = req.instances;
    let d = req.dummies;
    match req.algo {
        AlgoId::Matmul => {
            let inputs = (0..k).map(|i| g.matrix_instance(n, semiring(i))).collect();
            go(&MatMul { dummies: d }, inputs, req, |i, o| oracle_matmul(&i.a, &i.b, i.semiring).is_ok_and(|c| c == o.c))
        }
        AlgoId::MatmulSpaceEfficient => {
            let inputs = (0..k).map(|i| g.matrix_instance(n, semiring(i))).collect();
            go(&MatMulSpace { dummies: d }, inputs, req, |i, o| {
                oracle_matmul(&i.a, &i.b, i.semiring).is_ok_and(|c| c == o.c)
            })
        }
        AlgoId::Fft => {
            let inputs = (0..k).map(|i| if i % 2 == 0 { g.fft_complex(n) } else { g.fft_modular(n) }).collect();
            go(&Fft { dummies: d, ..Fft::default() }, inputs, req, |i, o| match (o, oracle_dft(i)) {
                (FftOutput::Complex(a), FftOutput::Complex(b)) => max_rel_error(a, &b) <= 1e-9,
                (a, b) => *a == b,
            })
        }
        AlgoId::Columnsort => {
            let inputs = (0..k).map(|_| g.keys(n)).collect();
            go(&Columnsort { dummies: d }, inputs, req, |i: &SortInstance, o| oracle_sort(&i.keys).is_ok_and(|r| r == *o))
        }
        AlgoId::Stencil1d | AlgoId::Stencil2d => {
            let dim = if req.algo == AlgoId::Stencil1d { 1 } else { 2 };
            let inputs = (0..k).map(|i| g.stencil(dim, n, if i % 2 == 0 { NodeFn::Sum } else { NodeFn::Mix })).collect();
            let spec = Stencil { dummies: d, ..if dim == 1 { Stencil::one_d() } else { Stencil::two_d() } };
            go(&spec, inputs, req, |i: &StencilInstance, o| oracle_stencil(i).is_ok_and(|r| r == *o))
        }
        AlgoId::BroadcastAware => {
            let inputs = (0..k).map(|_| g.broadcast(n)).collect();
            go(&BroadcastAware::new(req.sigma), inputs, req, |i: &BroadcastInstance, o| *o == oracle_broadcast(&i.values))
        }
        AlgoId::BroadcastOblivious => {
            let inputs = (0..k).map(|_| g.broadcast(n)).collect();
            go(&BroadcastOblivious, inputs, req, |i: &BroadcastInstance, o| *o == oracle_broadcast(&i.values))
        }
    }
}

/// Odd instances use the (min, +) semiring.
fn semiring(i: usize) -> Semiring {
    if i % 2 == 0 {
        Semiring::Integer
    } else {
        Semiring::MinPlus
    }
}

fn go<A>(spec: &A, inputs: Vec<A::Input>, req: &Request<'_>, oracle: impl Fn(&A::Input, &A::Output) -> bool) -> Result<Vec<Case>, CliError>
where
    A: AlgorithmSpec,
    A::Output: PartialEq,
{
    let mut out = Vec::with_capacity(inputs.len());
    for input in &inputs {
        let (output, trace) = run(spec, input).map_err(|e| CliError::Failed(format!("{} n = {}: {e}", req.algo, req.n)))?;
        let ok = oracle(input, &output);
        let mut novel = Vec::new();
        for &p in req.novel {
            let params = DbspParams::flat(p, q(1)).map_err(|e| CliError::Usage(e.to_string()))?;
            let e = execute_novel(spec, input, p, &params, req.strategy)
                .map_err(|e| CliError::Failed(format!("{} n = {} p = {p}: {e}", req.algo, req.n)))?;
            novel.push(NovelRun { p, matches: e.output == output, protocol: e.protocol });
        }
        out.push(Case { ok, trace, novel });
    }
    Ok(out)
}
