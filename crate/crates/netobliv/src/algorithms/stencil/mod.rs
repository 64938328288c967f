//! Stencil evaluation on M(n^d), `d` in {1, 2}, by recursive tiling.
//!
//! The grid is split into 5 (d = 1) or 17 (d = 2) top-level tiles run one
//! after the other on the whole machine. A tile of side `M >= k` is split
//! into tiles of side `M/k`, evaluated stripe by stripe, each stripe in
//! parallel on disjoint VP segments; every phase opens with a superstep
//! that moves the stripe's external inputs into the segments. Smaller
//! tiles are evaluated row by row.

pub mod geometry;
pub mod planner;

use std::collections::HashMap;

use super::pad;
use crate::machine::{AlgorithmSpec, Ctx, Execution, Machine, MachineError, RunConfig};
use crate::problem::{NodeFn, StencilInstance};
use geometry::Geometry;
use planner::{Action, Plan, Planner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Val {
    node: u32,
    val: i64,
}

type Store = HashMap<u32, i64>;

/// The stencil program for dimension `d`.
#[derive(Debug, Clone, Copy)]
pub struct Stencil {
    pub d: usize,
    pub dummies: bool,
    /// Dummy messages per VP per superstep.
    pub dummy_count: usize,
}

impl Stencil {
    pub fn one_d() -> Self {
        Stencil { d: 1, dummies: true, dummy_count: 1 }
    }

    pub fn two_d() -> Self {
        Stencil { d: 2, dummies: true, dummy_count: 1 }
    }
}

fn compute(ctx: &mut Ctx<'_, Val>, st: &mut Store, g: &Geometry, func: NodeFn, id: u32, preds: &mut Vec<u32>, vals: &mut Vec<i64>) {
    let (x, t) = g.coords(id);
    g.preds(x, t, preds);
    vals.clear();
    for p in preds.iter() {
        match st.get(p) {
            Some(&v) => vals.push(v),
            None => {
                ctx.fail(format!("node {:?}@{} is missing predecessor {:?}", x, t, g.coords(*p)));
                return;
            }
        }
    }
    st.insert(id, func.eval(vals));
}

impl AlgorithmSpec for Stencil {
    type Input = StencilInstance;
    /// Every node value, index `t * n^d + x_0 + n x_1`.
    type Output = Vec<i64>;

    fn problem_id(&self) -> &'static str {
        if self.d == 1 {
            "stencil_1d"
        } else {
            "stencil_2d"
        }
    }

    /// The side `n` of the grid.
    fn input_size(&self, input: &StencilInstance) -> usize {
        input.n
    }

    fn vps(&self, n: usize) -> Result<usize, MachineError> {
        if n < 2 || !n.is_power_of_two() || !(1..=2).contains(&self.d) {
            return Err(MachineError::InvalidInput(format!("n = {n}, d = {} is not supported", self.d)));
        }
        Ok(n.pow(self.d as u32))
    }

    fn execute(&self, input: &StencilInstance, cfg: RunConfig<'_>) -> Result<Execution<Vec<i64>>, MachineError> {
        input.validate()?;
        if input.d != self.d {
            return Err(MachineError::InvalidInput(format!("instance has d = {}, program d = {}", input.d, self.d)));
        }
        let g = Geometry::new(self.d, input.n);
        let v = g.v();
        let states: Vec<Store> = (0..v).map(|xl| Store::from([(xl as u32, input.inputs[xl])])).collect();
        let mut m: Machine<Store, Val> = Machine::new(v, input.points(), states, cfg)?;
        let func = input.func;
        let (dummies, count) = (self.dummies, self.dummy_count);
        let mut preds = Vec::new();
        let mut vals = Vec::new();
        let mut emit = |plan: Plan| -> Result<(), MachineError> {
            m.step(|ctx, st| {
                for msg in ctx.receive_data() {
                    st.insert(msg.payload.node, msg.payload.val);
                }
                for a in &plan.actions[ctx.index()] {
                    match *a {
                        Action::Compute(id) => compute(ctx, st, &g, func, id, &mut preds, &mut vals),
                        Action::Send { node, dst } => match st.get(&node) {
                            Some(&val) => ctx.send(dst as usize, Val { node, val }),
                            None => ctx.fail(format!("cannot send missing node {:?}", g.coords(node))),
                        },
                    }
                }
                if dummies {
                    pad(ctx, plan.label, count);
                }
            })?;
            m.sync(plan.label)
        };
        let (computer, carry) = Planner::new(g, &mut emit).run()?;
        let mut last: Vec<Vec<u32>> = vec![Vec::new(); v];
        for (vp, id) in carry {
            last[vp as usize].push(id);
        }
        let mut preds = Vec::new();
        let mut vals = Vec::new();
        let (stores, trace, observed) = m.finish(|ctx, st| {
            for msg in ctx.receive_data() {
                st.insert(msg.payload.node, msg.payload.val);
            }
            for &id in &last[ctx.index()] {
                compute(ctx, st, &g, func, id, &mut preds, &mut vals);
            }
        })?;
        let mut out = Vec::with_capacity(g.points * input.n);
        for id in g.points..g.points * (input.n + 1) {
            let vp = computer[id] as usize;
            let val = stores
                .get(vp)
                .and_then(|s| s.get(&(id as u32)))
                .copied()
                .ok_or_else(|| MachineError::Program { vp, what: format!("node {:?} never computed", g.coords(id as u32)) })?;
            out.push(val);
        }
        Ok(Execution { output: out, trace, observed })
    }
}
