//! Tiles of the stencil domain.
//!
//! With `N = n/2` and `u_i = x_i + t`, `w_i = x_i - t`, a tile of side `M`
//! is the set of nodes with `floor((u_i + N) / 2M) = A_i` and
//! `floor((w_i + N) / 2M) = B_i` in every dimension. Tiles of side `M/k`
//! nest inside tiles of side `M`. A side-`M` tile spans `2M` positions per
//! dimension and is evaluated on `(2M)^d` VPs.

pub fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

/// Fixed problem shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Geometry {
    pub d: usize,
    pub n: i64,
    pub half: i64,
    pub k: i64,
    pub points: usize,
}

impl Geometry {
    pub fn new(d: usize, n: usize) -> Self {
        Geometry {
            d,
            n: n as i64,
            half: n as i64 / 2,
            k: branching(n) as i64,
            points: n.pow(d as u32),
        }
    }

    pub fn v(&self) -> usize {
        self.points
    }

    /// Id of node `(x, t)`, `t >= -1`; row `-1` holds the inputs.
    pub fn id(&self, x: [i64; 2], t: i64) -> u32 {
        let xl = x[0] + if self.d == 2 { self.n * x[1] } else { 0 };
        ((t + 1) * self.points as i64 + xl) as u32
    }

    pub fn coords(&self, id: u32) -> ([i64; 2], i64) {
        let id = id as i64;
        let p = self.points as i64;
        let xl = id % p;
        let t = id / p - 1;
        ([xl % self.n, if self.d == 2 { xl / self.n } else { 0 }], t)
    }

    pub fn in_grid(&self, x: [i64; 2]) -> bool {
        (0..self.d).all(|i| (0..self.n).contains(&x[i]))
    }

    /// Predecessor ids of `(x, t)` in lexicographic offset order.
    pub fn preds(&self, x: [i64; 2], t: i64, out: &mut Vec<u32>) {
        out.clear();
        for o in offsets(self.d) {
            let y = [x[0] + o[0], x[1] + o[1]];
            if self.in_grid(y) {
                out.push(self.id(y, t - 1));
            }
        }
    }

    /// Successors of `(x, t)` inside the grid.
    pub fn succs(&self, x: [i64; 2], t: i64, out: &mut Vec<([i64; 2], i64)>) {
        out.clear();
        if t + 1 >= self.n {
            return;
        }
        for o in offsets(self.d) {
            let y = [x[0] + o[0], x[1] + o[1]];
            if self.in_grid(y) {
                out.push((y, t + 1));
            }
        }
    }

    /// Top-level tiles (side `N`) that contain at least one node, in
    /// evaluation order.
    pub fn stages(&self) -> Vec<Tile> {
        let mut out = Vec::new();
        let dims = if self.d == 2 { 2 } else { 1 };
        let range: Vec<[i64; 2]> = match dims {
            1 => (-1..=2).map(|a| [a, 0]).collect(),
            _ => (-1..=2).flat_map(|a| (-1..=2).map(move |b| [a, b])).collect(),
        };
        for a in &range {
            for b in &range {
                let t = Tile { level: 0, m: self.half, a: *a, b: *b };
                if t.is_consistent(self) && !t.nodes(self).is_empty() {
                    out.push(t);
                }
            }
        }
        out.sort_by_key(|t| t.order_key(self.d));
        out
    }

    /// Child stripe offsets `D = a - b` inside `parent`, in evaluation
    /// order. In two dimensions only offsets giving a non-empty time band
    /// are kept.
    pub fn phases(&self, parent: &Tile) -> Vec<[i64; 2]> {
        let k = self.k;
        let skew = if self.d == 2 { k * ((parent.a[0] - parent.b[0]) - (parent.a[1] - parent.b[1])) } else { 0 };
        let mut out = Vec::new();
        if self.d == 1 {
            for x in -(k - 1)..k {
                out.push([x, 0]);
            }
        } else {
            for x in -(k - 1)..k {
                for y in -(k - 1)..k {
                    if (skew + x - y).abs() <= 1 {
                        out.push([x, y]);
                    }
                }
            }
        }
        out.sort_by_key(|d| (d[0] + d[1], d[0]));
        out
    }
}

/// `k = 2^ceil(sqrt(log n))` with `log n = max(1, log2 n)`.
pub fn branching(n: usize) -> usize {
    let lg = (n.trailing_zeros()).max(1) as f64;
    let mut e = lg.sqrt().ceil() as u32;
    // Correct float rounding: smallest e with e^2 >= lg.
    while e > 0 && ((e - 1) * (e - 1)) as f64 >= lg {
        e -= 1;
    }
    while ((e * e) as f64) < lg {
        e += 1;
    }
    1 << e
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Tile {
    pub level: u32,
    pub m: i64,
    pub a: [i64; 2],
    pub b: [i64; 2],
}

impl Tile {
    fn dims(&self, g: &Geometry) -> usize {
        g.d
    }

    /// Every dimension agrees on the time band (`|D_0 - D_1| <= 1`).
    pub fn is_consistent(&self, g: &Geometry) -> bool {
        g.d == 1 || ((self.a[0] - self.b[0]) - (self.a[1] - self.b[1])).abs() <= 1
    }

    pub fn order_key(&self, d: usize) -> (i64, i64, i64, i64) {
        let d0 = self.a[0] - self.b[0];
        let d1 = if d == 2 { self.a[1] - self.b[1] } else { 0 };
        (d0 + d1, d0, self.b[0], self.b[1])
    }

    pub fn x_lo(&self, g: &Geometry, i: usize) -> i64 {
        self.m * (self.a[i] + self.b[i]) - g.half
    }

    pub fn contains(&self, g: &Geometry, x: [i64; 2], t: i64) -> bool {
        let w = 2 * self.m;
        (0..self.dims(g)).all(|i| {
            floor_div(x[i] + t + g.half, w) == self.a[i] && floor_div(x[i] - t + g.half, w) == self.b[i]
        })
    }

    /// Inclusive time band.
    pub fn t_range(&self, g: &Geometry) -> (i64, i64) {
        let ds: Vec<i64> = (0..g.d).map(|i| self.a[i] - self.b[i]).collect();
        let max = *ds.iter().max().unwrap();
        let min = *ds.iter().min().unwrap();
        (self.m * max - self.m + 1, self.m * min + self.m - 1)
    }

    /// First row of the schedule; rows run `t0 .. t0 + 2M - 1`.
    pub fn t0(&self, g: &Geometry) -> i64 {
        self.t_range(g).0
    }

    pub fn block(&self, g: &Geometry) -> usize {
        (2 * self.m as usize).pow(g.d as u32)
    }

    /// VP offset of position `x` inside the tile's block.
    pub fn local_vp(&self, g: &Geometry, x: [i64; 2]) -> usize {
        let w = 2 * self.m;
        let mut r = 0i64;
        let mut mul = 1i64;
        for i in 0..g.d {
            r += (x[i] - self.x_lo(g, i)) * mul;
            mul *= w;
        }
        r as usize
    }

    /// Nodes in grid order: time-major, then position.
    pub fn nodes(&self, g: &Geometry) -> Vec<([i64; 2], i64)> {
        let (lo, hi) = self.t_range(g);
        let mut out = Vec::new();
        let w = 2 * self.m;
        for t in lo.max(0)..=hi.min(g.n - 1) {
            let x1s: Vec<i64> = if g.d == 2 {
                let l = self.x_lo(g, 1);
                (l.max(0)..(l + w).min(g.n)).collect()
            } else {
                vec![0]
            };
            for &x1 in &x1s {
                let l = self.x_lo(g, 0);
                for x0 in l.max(0)..(l + w).min(g.n) {
                    if self.contains(g, [x0, x1], t) {
                        out.push(([x0, x1], t));
                    }
                }
            }
        }
        out
    }

    /// The child in stripe offset `dd` and segment coordinates `b`.
    pub fn child(&self, g: &Geometry, dd: [i64; 2], b: [i64; 2]) -> Option<Tile> {
        let mut a = [0; 2];
        for i in 0..g.d {
            a[i] = b[i] + dd[i];
            if !(0..g.k).contains(&a[i]) {
                return None;
            }
        }
        let mut c = Tile { level: self.level + 1, m: self.m / g.k, a: [0; 2], b: [0; 2] };
        for i in 0..g.d {
            c.a[i] = g.k * self.a[i] + a[i];
            c.b[i] = g.k * self.b[i] + b[i];
        }
        Some(c)
    }
}

/// `{-1, 0, 1}^d` padded to two coordinates, lexicographic.
pub fn offsets(d: usize) -> &'static [[i64; 2]] {
    const ONE: [[i64; 2]; 3] = [[-1, 0], [0, 0], [1, 0]];
    const TWO: [[i64; 2]; 9] = [[-1, -1], [-1, 0], [-1, 1], [0, -1], [0, 0], [0, 1], [1, -1], [1, 0], [1, 1]];
    if d == 1 {
        &ONE
    } else {
        &TWO
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn branching_factor() {
        assert_eq!(branching(16), 4);
        assert_eq!(branching(256), 8);
        assert_eq!(branching(1024), 16);
        assert_eq!(branching(2), 2);
    }

    #[test]
    fn stage_counts() {
        for n in [4, 8, 16, 64] {
            assert_eq!(Geometry::new(1, n).stages().len(), 5, "n = {n}");
        }
        for n in [4, 8, 16] {
            assert_eq!(Geometry::new(2, n).stages().len(), 17, "n = {n}");
        }
    }

    #[test]
    fn stages_partition_the_grid() {
        for (d, n) in [(1, 16), (2, 8)] {
            let g = Geometry::new(d, n);
            let mut seen = HashSet::new();
            for s in g.stages() {
                for (x, t) in s.nodes(&g) {
                    assert!(seen.insert(g.id(x, t)));
                }
            }
            assert_eq!(seen.len(), g.points * n);
        }
    }

    #[test]
    fn phase_counts() {
        let g = Geometry::new(1, 256);
        let flat = Tile { level: 0, m: 128, a: [0; 2], b: [0; 2] };
        assert_eq!(g.phases(&flat).len(), 2 * 8 - 1);
        let g = Geometry::new(2, 16);
        assert_eq!(g.phases(&flat).len(), 6 * 4 - 5);
        let skewed = Tile { level: 0, m: 8, a: [1, 0], b: [0, 0] };
        assert_eq!(g.phases(&skewed).len(), 3 * 4 - 3);
    }
}
