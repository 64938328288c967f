//! Streams the stencil program one superstep at a time as per-VP action
//! lists.

use std::collections::{BTreeSet, HashMap};
use std::rc::Rc;

use super::geometry::{Geometry, Tile};
use crate::machine::{log2_exact, MachineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Compute(u32),
    Send { node: u32, dst: u32 },
}

/// One superstep: its label and the actions of every VP, computes first.
pub struct Plan {
    pub label: u32,
    pub actions: Vec<Vec<Action>>,
}

/// Where a tile's external inputs were placed by its phase-start superstep.
type Holders = Rc<HashMap<u32, u32>>;

struct Active {
    tile: Tile,
    base: usize,
    holders: Holders,
}

pub struct Planner<'e> {
    g: Geometry,
    log_v: u32,
    /// VP that computed each node (inputs: their initial owner).
    pub computer: Vec<u32>,
    carry: Vec<(u32, u32)>,
    emit: &'e mut dyn FnMut(Plan) -> Result<(), MachineError>,
    scratch: Vec<u32>,
}

impl<'e> Planner<'e> {
    pub fn new(g: Geometry, emit: &'e mut dyn FnMut(Plan) -> Result<(), MachineError>) -> Self {
        let total = g.points * (g.n as usize + 1);
        let mut computer = vec![u32::MAX; total];
        for (xl, c) in computer.iter_mut().take(g.points).enumerate() {
            *c = xl as u32;
        }
        Planner { g, log_v: log2_exact(g.v()), computer, carry: Vec::new(), emit, scratch: Vec::new() }
    }

    /// Runs the whole program; returns the computes left for the final
    /// local step.
    pub fn run(mut self) -> Result<(Vec<u32>, Vec<(u32, u32)>), MachineError> {
        let stages = self.g.stages();
        let root = [Active { tile: stages[0], base: 0, holders: Rc::new(HashMap::new()) }];
        for stage in stages {
            let mut kids = vec![Active { tile: stage, base: 0, holders: Rc::new(HashMap::new()) }];
            self.deliver(&root, &[0], &mut kids, 0)?;
            self.eval(kids)?;
        }
        Ok((self.computer, self.carry))
    }

    fn label_for(&self, t: &Tile) -> u32 {
        self.log_v - log2_exact(t.block(&self.g))
    }

    fn fresh(&mut self, label: u32) -> Plan {
        let mut actions = vec![Vec::new(); self.g.v()];
        for (vp, node) in self.carry.drain(..) {
            actions[vp as usize].push(Action::Compute(node));
        }
        Plan { label, actions }
    }

    fn is_base(&self, t: &Tile) -> bool {
        t.m < self.g.k
    }

    /// Evaluates tiles of one level in lockstep.
    fn eval(&mut self, tiles: Vec<Active>) -> Result<(), MachineError> {
        let Some(first) = tiles.first() else { return Ok(()) };
        let proto = first.tile;
        if self.is_base(&proto) {
            return self.eval_base(&tiles, proto.m);
        }
        let g = self.g;
        let label = self.label_for(&proto);
        for dd in g.phases(&proto) {
            let mut kids = Vec::new();
            let mut owners = Vec::new();
            for (ti, act) in tiles.iter().enumerate() {
                for b0 in 0..g.k {
                    for b1 in 0..if g.d == 2 { g.k } else { 1 } {
                        let Some(c) = act.tile.child(&g, dd, [b0, b1]) else { continue };
                        if c.nodes(&g).is_empty() {
                            continue;
                        }
                        let seg = (b0 + b1 * g.k) as usize;
                        let base = act.base + seg * c.block(&g);
                        kids.push(Active { tile: c, base, holders: Rc::new(HashMap::new()) });
                        owners.push(ti);
                    }
                }
            }
            self.deliver(&tiles, &owners, &mut kids, label)?;
            if kids.is_empty() {
                self.skip(shape(&g, &proto, dd))?;
            } else {
                self.eval(kids)?;
            }
        }
        Ok(())
    }

    /// Phase-start superstep moving the external inputs of every kid into
    /// its block: spread round-robin for recursive kids, copied to each VP
    /// that reads them for base kids. `owners[j]` indexes the tile in
    /// `tiles` that contains `kids[j]`.
    fn deliver(&mut self, tiles: &[Active], owners: &[usize], kids: &mut [Active], label: u32) -> Result<(), MachineError> {
        let mut plan = self.fresh(label);
        let g = self.g;
        for (kid, &owner) in kids.iter_mut().zip(owners) {
            let parent = tiles[owner].holders.clone();
            let nodes = kid.tile.nodes(&g);
            let base_kid = self.is_base(&kid.tile);
            let mut ext: BTreeSet<u32> = BTreeSet::new();
            let mut needs: BTreeSet<(u32, u32)> = BTreeSet::new();
            for &(x, t) in &nodes {
                g.preds(x, t, &mut self.scratch);
                let vp = (kid.base + kid.tile.local_vp(&g, x)) as u32;
                for &p in &self.scratch {
                    let (px, pt) = g.coords(p);
                    if pt < 0 || !kid.tile.contains(&g, px, pt) {
                        ext.insert(p);
                        if base_kid {
                            needs.insert((p, vp));
                        }
                    }
                }
            }
            let computer = &self.computer;
            let sender = |p: u32| parent.get(&p).copied().unwrap_or(computer[p as usize]);
            if base_kid {
                for (p, vp) in needs {
                    let src = sender(p);
                    if src != vp {
                        plan.actions[src as usize].push(Action::Send { node: p, dst: vp });
                    }
                }
            } else {
                let block = kid.tile.block(&g);
                let mut holders = HashMap::with_capacity(ext.len());
                for (i, p) in ext.into_iter().enumerate() {
                    let dst = (kid.base + i % block) as u32;
                    let src = sender(p);
                    if src != dst {
                        plan.actions[src as usize].push(Action::Send { node: p, dst });
                    }
                    holders.insert(p, dst);
                }
                kid.holders = Rc::new(holders);
            }
        }
        (self.emit)(plan)
    }

    /// Emits the supersteps of a level where no segment has a tile.
    fn skip(&mut self, t: Tile) -> Result<(), MachineError> {
        let g = self.g;
        let label = self.label_for(&t);
        if self.is_base(&t) {
            for _ in 0..(2 * t.m - 2).max(0) {
                let plan = self.fresh(label);
                (self.emit)(plan)?;
            }
            return Ok(());
        }
        for dd in g.phases(&t) {
            let plan = self.fresh(label);
            (self.emit)(plan)?;
            self.skip(shape(&g, &t, dd))?;
        }
        Ok(())
    }

    /// Row-by-row evaluation of base tiles of side `m`: `2m - 2` supersteps,
    /// the last row carried into the next superstep.
    fn eval_base(&mut self, tiles: &[Active], m: i64) -> Result<(), MachineError> {
        let g = self.g;
        let label = self.label_for(&tiles[0].tile);
        let rows = (2 * m - 1) as usize;
        // rows_of[tile][j]: (node, vp, x, t) on row t0 + j.
        let mut rows_of: Vec<Vec<Vec<(u32, u32, [i64; 2], i64)>>> = Vec::with_capacity(tiles.len());
        for act in tiles {
            let t0 = act.tile.t0(&g);
            let mut r = vec![Vec::new(); rows];
            for (x, t) in act.tile.nodes(&g) {
                let vp = (act.base + act.tile.local_vp(&g, x)) as u32;
                let id = g.id(x, t);
                self.computer[id as usize] = vp;
                r[(t - t0) as usize].push((id, vp, x, t));
            }
            rows_of.push(r);
        }
        let mut succ = Vec::new();
        for j in 0..rows - 1 {
            let mut plan = self.fresh(label);
            for (ti, act) in tiles.iter().enumerate() {
                for &(id, vp, x, t) in &rows_of[ti][j] {
                    plan.actions[vp as usize].push(Action::Compute(id));
                    g.succs(x, t, &mut succ);
                    let mut dsts: Vec<u32> = succ
                        .iter()
                        .filter(|(y, s)| act.tile.contains(&g, *y, *s))
                        .map(|(y, _)| (act.base + act.tile.local_vp(&g, *y)) as u32)
                        .filter(|&d| d != vp)
                        .collect();
                    dsts.sort_unstable();
                    dsts.dedup();
                    for dst in dsts {
                        plan.actions[vp as usize].push(Action::Send { node: id, dst });
                    }
                }
            }
            for a in plan.actions.iter_mut() {
                // Computes of this row come after the carried ones but before any send.
                a.sort_by_key(|x| matches!(x, Action::Send { .. }));
            }
            (self.emit)(plan)?;
        }
        for r in &rows_of {
            for &(id, vp, _, _) in &r[rows - 1] {
                self.carry.push((vp, id));
            }
        }
        Ok(())
    }
}

/// A child of `t` with stripe offset `dd`; only its side and offsets matter.
fn shape(g: &Geometry, t: &Tile, dd: [i64; 2]) -> Tile {
    let mut c = Tile { level: t.level + 1, m: t.m / g.k, a: [0; 2], b: [0; 2] };
    for i in 0..g.d {
        c.b[i] = g.k * t.b[i];
        c.a[i] = g.k * t.a[i] + dd[i];
    }
    c
}
