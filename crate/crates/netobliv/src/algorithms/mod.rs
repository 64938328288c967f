//! Reference network-oblivious programs.

use crate::machine::Ctx;

/// Wiseness padding for a superstep with label `label`: VP `j` sends `c`
/// dummies to VP `j + v/2^(label+1)` for every `j < v/2^(label+1)`.
pub(crate) fn pad<W: Default>(ctx: &mut Ctx<'_, W>, label: u32, c: usize) {
    let half = ctx.v() >> (label + 1);
    let r = ctx.index();
    if r < half {
        for _ in 0..c {
            ctx.send_dummy(r + half);
        }
    }
}

pub mod bounds;
pub mod broadcast;
pub mod columnsort;
pub mod fft;
pub mod matmul;
pub mod matmul_space;
pub mod stencil;
