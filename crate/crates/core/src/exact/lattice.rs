//! Dense, temperature-scaled view of a Chimera model arranged for
//! column-by-column elimination.
//!
//! Column `c` holds the `8n` nodes of the cells `(0..n, c)`. Its boundary is
//! the `4n` right-side nodes, encoded as a bitmask with bit `4 * row + index`
//! set when that spin is `+1`. Given the boundary, the left-side nodes of a
//! column form four independent vertical chains (one per cell index), which
//! is what keeps the per-column work linear in the table size.

use rand::Rng;
use rayon::prelude::*;

use super::table::PairKernel;
use crate::graph::{EdgeKind, Side};
use crate::model::IsingModel;

pub(crate) struct Lattice {
    pub n: usize,
    /// Full-grid fields, already multiplied by beta; zero on masked nodes.
    h: Vec<f64>,
    active: Vec<bool>,
    /// `[cell][left][right]`
    intra: Vec<[[f64; 4]; 4]>,
    /// Coupling between `(r, c, L, k)` and `(r + 1, c, L, k)`, indexed `r * n + c`.
    vert: Vec<[f64; 4]>,
    /// Coupling between `(r, c, R, k)` and `(r, c + 1, R, k)`, indexed `r * n + c`.
    horiz: Vec<[f64; 4]>,
}

#[inline]
pub(crate) fn spin(bit: bool) -> f64 {
    if bit {
        1.0
    } else {
        -1.0
    }
}

#[inline]
fn full_id(n: usize, row: usize, col: usize, side: Side, index: usize) -> usize {
    crate::graph::node_id(n, row, col, side, index)
}

/// Per-row, per-cell-state quantities for one column.
struct RowSetup {
    /// `-sum_k h_R s_k` for the 16 right-cell states, `-inf` if a masked
    /// right node would be `-1`.
    right_log: [f64; 16],
    /// Normalized local weights of the left nodes: `[state][k][s]`.
    left_w: [[[f64; 2]; 4]; 16],
    left_off: [[f64; 4]; 16],
    /// Kernel to the row above (`row + 1`), per chain.
    up: [PairKernel; 4],
}

pub(crate) struct ColumnSetup {
    rows: Vec<RowSetup>,
}

/// Per-column statistics accumulated against boundary probabilities.
#[derive(Clone)]
pub(crate) struct ColumnStats {
    /// `E[s]` for left nodes, `[row][k]`.
    pub left: Vec<[f64; 4]>,
    /// `E[s]` for right nodes, `[row][k]`.
    pub right: Vec<[f64; 4]>,
    /// `E[s_L s_R]`, `[row][left][right]`.
    pub intra: Vec<[[f64; 4]; 4]>,
    /// `E[s_(r,k) s_(r+1,k)]` for left chains, `[row][k]`.
    pub vert: Vec<[f64; 4]>,
}

impl ColumnStats {
    fn zeros(n: usize) -> Self {
        ColumnStats {
            left: vec![[0.0; 4]; n],
            right: vec![[0.0; 4]; n],
            intra: vec![[[0.0; 4]; 4]; n],
            vert: vec![[0.0; 4]; n.saturating_sub(1)],
        }
    }

    fn add(&mut self, other: &ColumnStats) {
        fn add4(a: &mut [[f64; 4]], b: &[[f64; 4]]) {
            for (x, y) in a.iter_mut().zip(b) {
                for k in 0..4 {
                    x[k] += y[k];
                }
            }
        }
        add4(&mut self.left, &other.left);
        add4(&mut self.right, &other.right);
        add4(&mut self.vert, &other.vert);
        for (x, y) in self.intra.iter_mut().zip(&other.intra) {
            add4(x, y);
        }
    }

    fn scale(&mut self, f: f64) {
        let all = self
            .left
            .iter_mut()
            .chain(self.right.iter_mut())
            .chain(self.vert.iter_mut())
            .chain(self.intra.iter_mut().flat_map(|m| m.iter_mut()));
        for x in all {
            for v in x.iter_mut() {
                *v *= f;
            }
        }
    }
}

impl Lattice {
    pub fn new(model: &IsingModel, beta: f64) -> Self {
        let g = model.graph();
        let n = g.n();
        let total = g.full_node_count();
        let mut h = vec![0.0; total];
        let mut active = vec![false; total];
        for (i, &v) in g.nodes().iter().enumerate() {
            h[v] = beta * model.h()[i];
            active[v] = true;
        }
        let mut intra = vec![[[0.0; 4]; 4]; n * n];
        let mut vert = vec![[0.0; 4]; n * n];
        let mut horiz = vec![[0.0; 4]; n * n];
        for (kind, &w) in g.edge_kinds().iter().zip(model.j()) {
            let w = beta * w;
            match *kind {
                EdgeKind::Intra { row, col, left, right } => intra[row * n + col][left][right] = w,
                EdgeKind::Vertical { row, col, index } => vert[row * n + col][index] = w,
                EdgeKind::Horizontal { row, col, index } => horiz[row * n + col][index] = w,
            }
        }
        Lattice {
            n,
            h,
            active,
            intra,
            vert,
            horiz,
        }
    }

    pub fn boundary_bits(&self) -> usize {
        4 * self.n
    }

    pub fn table_len(&self) -> usize {
        1 << self.boundary_bits()
    }

    /// Kernels for the couplers between column `col` and `col + 1`.
    pub fn horizontal_kernels(&self, col: usize) -> Vec<PairKernel> {
        let n = self.n;
        (0..4 * n)
            .map(|bit| PairKernel::new(self.horiz[(bit / 4) * n + col][bit % 4]))
            .collect()
    }

    pub fn column_setup(&self, col: usize) -> ColumnSetup {
        let n = self.n;
        let rows = (0..n)
            .map(|row| {
                let cell = row * n + col;
                let mut right_log = [0.0; 16];
                let mut left_w = [[[0.0; 2]; 4]; 16];
                let mut left_off = [[0.0; 4]; 16];
                for cs in 0..16usize {
                    let mut g = 0.0;
                    let mut allowed = true;
                    for k in 0..4 {
                        let up = cs >> k & 1 == 1;
                        let id = full_id(n, row, col, Side::Right, k);
                        if !self.active[id] && !up {
                            allowed = false;
                        }
                        g += self.h[id] * spin(up);
                    }
                    right_log[cs] = if allowed { -g } else { f64::NEG_INFINITY };
                    for k in 0..4 {
                        let id = full_id(n, row, col, Side::Left, k);
                        let mut f = self.h[id];
                        for kr in 0..4 {
                            f += self.intra[cell][k][kr] * spin(cs >> kr & 1 == 1);
                        }
                        let a = f.abs();
                        let plus = (-f - a).exp();
                        let minus = if self.active[id] { (f - a).exp() } else { 0.0 };
                        left_w[cs][k] = [minus, plus];
                        left_off[cs][k] = a;
                    }
                }
                let up = if row + 1 < n {
                    let v = self.vert[cell];
                    [0, 1, 2, 3].map(|k| PairKernel::new(v[k]))
                } else {
                    [PairKernel::new(0.0); 4]
                };
                RowSetup {
                    right_log,
                    left_w,
                    left_off,
                    up,
                }
            })
            .collect();
        ColumnSetup { rows }
    }

    /// Log of the column weight for every boundary state: the right-node
    /// fields plus the left chains summed out.
    pub fn column_log_factor(&self, col: usize) -> Vec<f64> {
        let setup = self.column_setup(col);
        let n = self.n;
        let mut out = vec![0.0; self.table_len()];
        // rows are visited top-down so each top-row state owns a contiguous block
        let block = 1usize << (4 * (n - 1));
        out.par_chunks_mut(block).enumerate().for_each(|(top_state, chunk)| {
            let init = ChainFront::empty();
            let front = init.push(&setup.rows[n - 1], top_state, None);
            let acc = setup.rows[n - 1].right_log[top_state];
            if n == 1 {
                chunk[0] = acc + front.log_total();
            } else {
                descend(&setup, n - 2, 0, front, acc, chunk);
            }
        });
        out
    }

    /// Boundary-conditional statistics of one column, weighted by `probs`
    /// (normalized boundary probabilities).
    pub fn column_stats(&self, col: usize, probs: &[f64]) -> ColumnStats {
        let setup = self.column_setup(col);
        let n = self.n;
        let chunk = 4096.min(probs.len());
        let partials: Vec<ColumnStats> = probs
            .par_chunks(chunk)
            .enumerate()
            .map(|(ci, ps)| {
                let mut acc = ColumnStats::zeros(n);
                let mut fwd = vec![[0.0f64; 2]; n];
                let mut bwd = vec![[0.0f64; 2]; n];
                for (off, &p) in ps.iter().enumerate() {
                    if p == 0.0 {
                        continue;
                    }
                    let b = ci * chunk + off;
                    for r in 0..n {
                        let cs = (b >> (4 * r)) & 15;
                        for k in 0..4 {
                            acc.right[r][k] += p * spin(cs >> k & 1 == 1);
                        }
                    }
                    for k in 0..4 {
                        chain_posterior(&setup, b, k, &mut fwd, &mut bwd);
                        for r in 0..n {
                            let cs = (b >> (4 * r)) & 15;
                            let (pm, pp) = (fwd[r][0] * bwd[r][0], fwd[r][1] * bwd[r][1]);
                            let z = pm + pp;
                            let m = (pp - pm) / z;
                            acc.left[r][k] += p * m;
                            for kr in 0..4 {
                                acc.intra[r][k][kr] += p * m * spin(cs >> kr & 1 == 1);
                            }
                            if r + 1 < n {
                                let cs1 = (b >> (4 * (r + 1))) & 15;
                                let w1 = &setup.rows[r + 1].left_w[cs1][k];
                                let kern = &setup.rows[r].up[k];
                                let mut num = 0.0;
                                let mut den = 0.0;
                                for x in 0..2 {
                                    for y in 0..2 {
                                        let t = fwd[r][x] * kern.get(x == 1, y == 1) * w1[y] * bwd[r + 1][y];
                                        den += t;
                                        num += if x == y { t } else { -t };
                                    }
                                }
                                acc.vert[r][k] += p * num / den;
                            }
                        }
                    }
                }
                acc
            })
            .collect();
        let mut total = ColumnStats::zeros(n);
        for p in &partials {
            total.add(p);
        }
        // probs are normalized already; guard against rounding in the caller
        let mass: f64 = probs.iter().sum();
        total.scale(1.0 / mass);
        total
    }

    /// Samples the four left chains of column `col` given boundary `b`.
    /// Returns the left spins as `[row][k]` booleans packed per row.
    pub fn sample_left<R: Rng>(&self, setup: &ColumnSetup, b: usize, rng: &mut R) -> Vec<u8> {
        let n = self.n;
        let mut fwd = vec![[0.0f64; 2]; n];
        let mut out = vec![0u8; n];
        for k in 0..4 {
            chain_forward(setup, b, k, &mut fwd);
            let mut next: Option<usize> = None;
            for r in (0..n).rev() {
                let mut p = fwd[r];
                if let Some(y) = next {
                    let kern = &setup.rows[r].up[k];
                    p[0] *= kern.get(false, y == 1);
                    p[1] *= kern.get(true, y == 1);
                }
                let u: f64 = rng.random();
                let x = if u * (p[0] + p[1]) < p[1] { 1 } else { 0 };
                if x == 1 {
                    out[r] |= 1 << k;
                }
                next = Some(x);
            }
        }
        out
    }

    /// Maps full-grid positions to spins of a configuration in canonical order.
    pub fn is_active(&self, id: usize) -> bool {
        self.active[id]
    }
}

/// Forward vectors of the four left chains over the rows visited so far.
#[derive(Clone, Copy)]
struct ChainFront {
    v: [[f64; 2]; 4],
    off: [f64; 4],
    started: bool,
}

impl ChainFront {
    fn empty() -> Self {
        ChainFront {
            v: [[1.0; 2]; 4],
            off: [0.0; 4],
            started: false,
        }
    }

    /// Adds one row with cell state `cs`; `kernel_row` names the row whose
    /// `up` kernels couple it to the previously pushed row.
    #[inline]
    fn push(&self, row: &RowSetup, cs: usize, link: Option<&[PairKernel; 4]>) -> ChainFront {
        let mut next = *self;
        for k in 0..4 {
            let w = row.left_w[cs][k];
            if self.started {
                let kern = &link.expect("link kernel for a continuing chain")[k];
                let (a, b) = (self.v[k][0], self.v[k][1]);
                let m = w[0] * (a * kern.same + b * kern.opposite);
                let p = w[1] * (a * kern.opposite + b * kern.same);
                next.v[k] = [m, p];
                next.off[k] = self.off[k] + row.left_off[cs][k] + kern.log_norm;
            } else {
                next.v[k] = w;
                next.off[k] = row.left_off[cs][k];
            }
            let mx = next.v[k][0].max(next.v[k][1]);
            if mx < 1e-150 && mx > 0.0 {
                next.v[k][0] /= mx;
                next.v[k][1] /= mx;
                next.off[k] += mx.ln();
            }
        }
        next.started = true;
        next
    }

    #[inline]
    fn log_total(&self) -> f64 {
        let s = [0, 1, 2, 3].map(|k| self.v[k][0] + self.v[k][1]);
        let prod = s[0] * s[1] * s[2] * s[3];
        let off: f64 = self.off.iter().sum();
        if prod > 1e-300 && prod.is_finite() {
            off + prod.ln()
        } else {
            off + s.iter().map(|x| x.ln()).sum::<f64>()
        }
    }
}

fn descend(setup: &ColumnSetup, row: usize, base: usize, front: ChainFront, acc: f64, out: &mut [f64]) {
    let rs = &setup.rows[row];
    let link = &setup.rows[row].up;
    let stride = 1usize << (4 * row);
    for cs in 0..16 {
        let f = front.push(rs, cs, Some(link));
        let a = acc + rs.right_log[cs];
        let idx = base + cs * stride;
        if row == 0 {
            out[idx] = if a == f64::NEG_INFINITY { a } else { a + f.log_total() };
        } else {
            descend(setup, row - 1, idx, f, a, out);
        }
    }
}

/// Normalized forward messages of chain `k` from row 0 upward.
fn chain_forward(setup: &ColumnSetup, b: usize, k: usize, fwd: &mut [[f64; 2]]) {
    let n = setup.rows.len();
    for r in 0..n {
        let cs = (b >> (4 * r)) & 15;
        let w = setup.rows[r].left_w[cs][k];
        let v = if r == 0 {
            w
        } else {
            let kern = &setup.rows[r - 1].up[k];
            let [a, c] = fwd[r - 1];
            [
                w[0] * (a * kern.same + c * kern.opposite),
                w[1] * (a * kern.opposite + c * kern.same),
            ]
        };
        let z = v[0] + v[1];
        fwd[r] = [v[0] / z, v[1] / z];
    }
}

/// Forward and backward messages of chain `k`; `fwd[r] * bwd[r]` is
/// proportional to the posterior of row `r`.
fn chain_posterior(setup: &ColumnSetup, b: usize, k: usize, fwd: &mut [[f64; 2]], bwd: &mut [[f64; 2]]) {
    let n = setup.rows.len();
    chain_forward(setup, b, k, fwd);
    bwd[n - 1] = [1.0, 1.0];
    for r in (0..n - 1).rev() {
        let cs1 = (b >> (4 * (r + 1))) & 15;
        let w1 = setup.rows[r + 1].left_w[cs1][k];
        let kern = &setup.rows[r].up[k];
        let (y0, y1) = (w1[0] * bwd[r + 1][0], w1[1] * bwd[r + 1][1]);
        let v = [kern.same * y0 + kern.opposite * y1, kern.opposite * y0 + kern.same * y1];
        let z = v[0] + v[1];
        bwd[r] = [v[0] / z, v[1] / z];
    }
}
