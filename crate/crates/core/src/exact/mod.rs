//! Exact inference for Chimera models of bounded size.
//!
//! Columns of unit cells are eliminated left to right. The message between
//! columns is a table over the `4n` right-side spins of a column, so the
//! work per column is `O(n 2^(4n))` and memory a handful of such tables.
//! `C_5` (200 spins, tables of `2^20` entries) is the default ceiling.

mod lattice;
mod table;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{node_id, EdgeKind, Side};
use crate::model::{IsingModel, SampleSet, SpinConfig};
use crate::rng;
use crate::stats::SufficientStats;
use lattice::{spin, Lattice};
use table::{ladder_descending, transfer, ScaledTable};

pub const DEFAULT_MAX_N: usize = 5;
const SAMPLE_BATCH: usize = 16_384;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EliminationOrder {
    /// Eliminate columns of cells left to right.
    ColumnMajor,
    /// Eliminate rows of cells top to bottom (runs on the transposed model).
    RowMajor,
}

#[derive(Clone, Copy, Debug)]
pub struct ExactOptions {
    /// Largest grid side accepted; tables hold `2^(4 max_n)` entries.
    pub max_n: usize,
    pub order: EliminationOrder,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions {
            max_n: DEFAULT_MAX_N,
            order: EliminationOrder::ColumnMajor,
        }
    }
}

/// Exact first and second moments of `B(s) ∝ exp(-beta E(s))`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExactMarginals {
    /// `P(s_v = +1)` per node.
    pub node_marg: Vec<f64>,
    /// `E[s_u s_v]` per edge.
    pub edge_marg: Vec<f64>,
    pub log_z: f64,
}

impl ExactMarginals {
    pub fn to_stats(&self) -> SufficientStats {
        SufficientStats::from_expectations(
            self.node_marg.iter().map(|p| 2.0 * p - 1.0).collect(),
            self.edge_marg.clone(),
        )
    }
}

fn check(model: &IsingModel, beta: f64, opts: &ExactOptions) -> Result<()> {
    let n = model.graph().n();
    if n > opts.max_n {
        return Err(Error::ResourceLimit(format!(
            "exact inference on C_{n} needs tables of 2^{} entries; the limit is C_{}",
            4 * n,
            opts.max_n
        )));
    }
    if !(beta.is_finite() && beta >= 0.0) {
        return Err(Error::invalid(format!(
            "inverse temperature {beta} must be finite and >= 0"
        )));
    }
    Ok(())
}

pub fn log_partition(model: &IsingModel, beta: f64) -> Result<f64> {
    log_partition_with(model, beta, &ExactOptions::default())
}

/// `ln sum_s exp(-beta E(s))`.
pub fn log_partition_with(model: &IsingModel, beta: f64, opts: &ExactOptions) -> Result<f64> {
    check(model, beta, opts)?;
    if opts.order == EliminationOrder::RowMajor {
        let t = model.transposed();
        return log_partition_with(
            &t,
            beta,
            &ExactOptions {
                order: EliminationOrder::ColumnMajor,
                ..*opts
            },
        );
    }
    let lat = Lattice::new(model, beta);
    let alpha = forward(&lat, false)?;
    Ok(alpha.last().unwrap().log_sum())
}

/// Forward messages. With `keep_all` every column's table is returned,
/// otherwise only the last.
fn forward(lat: &Lattice, keep_all: bool) -> Result<Vec<ScaledTable>> {
    let n = lat.n;
    let mut out = Vec::new();
    let mut alpha = ScaledTable::from_log(&lat.column_log_factor(0))?;
    for col in 1..n {
        let moved = transfer(&alpha, &lat.horizontal_kernels(col - 1))?;
        let next = moved.mul_log(&lat.column_log_factor(col))?;
        if keep_all {
            out.push(alpha);
        }
        alpha = next;
    }
    out.push(alpha);
    Ok(out)
}

pub fn exact_marginals(model: &IsingModel, beta: f64) -> Result<ExactMarginals> {
    exact_marginals_with(model, beta, &ExactOptions::default())
}

pub fn exact_marginals_with(model: &IsingModel, beta: f64, opts: &ExactOptions) -> Result<ExactMarginals> {
    check(model, beta, opts)?;
    if opts.order == EliminationOrder::RowMajor {
        let t = model.transposed();
        let tm = exact_marginals_with(
            &t,
            beta,
            &ExactOptions {
                order: EliminationOrder::ColumnMajor,
                ..*opts
            },
        )?;
        return Ok(untranspose_marginals(model, &t, tm));
    }
    let g = model.graph();
    let n = g.n();
    let lat = Lattice::new(model, beta);
    let factors: Vec<Vec<f64>> = (0..n).map(|c| lat.column_log_factor(c)).collect();

    // backward messages: gamma[c] sums everything right of column c
    let mut gamma: Vec<Option<ScaledTable>> = vec![None; n];
    gamma[n - 1] = Some(ScaledTable {
        log_scale: 0.0,
        values: vec![1.0; lat.table_len()],
    });
    let mut deltas: Vec<Option<ScaledTable>> = vec![None; n];
    for col in (1..n).rev() {
        let delta = gamma[col].as_ref().unwrap().mul_log(&factors[col])?;
        gamma[col - 1] = Some(transfer(&delta, &lat.horizontal_kernels(col - 1))?);
        deltas[col] = Some(delta);
    }

    let mut full_node = vec![0.0; g.full_node_count()];
    let mut left_stats = Vec::with_capacity(n);
    let mut horiz_stats: Vec<Vec<f64>> = Vec::with_capacity(n.saturating_sub(1));
    let mut alpha = ScaledTable::from_log(&factors[0])?;
    let mut log_z = f64::NAN;
    for col in 0..n {
        let gm = gamma[col].as_ref().unwrap();
        let mut probs: Vec<f64> = alpha.values.iter().zip(&gm.values).map(|(a, b)| a * b).collect();
        let mass: f64 = probs.iter().sum();
        if !(mass > 0.0 && mass.is_finite()) {
            return Err(Error::Numeric(format!(
                "boundary distribution of column {col} underflowed"
            )));
        }
        if col == n - 1 {
            log_z = alpha.log_sum();
        }
        probs.iter_mut().for_each(|p| *p /= mass);
        let cs = lat.column_stats(col, &probs);
        for r in 0..n {
            for k in 0..4 {
                full_node[node_id(n, r, col, Side::Left, k)] = cs.left[r][k];
                full_node[node_id(n, r, col, Side::Right, k)] = cs.right[r][k];
            }
        }
        left_stats.push(cs);
        if col + 1 < n {
            let delta = deltas[col + 1].take().unwrap();
            horiz_stats.push(horizontal_moments(&alpha, &delta, &lat.horizontal_kernels(col))?);
            let moved = transfer(&alpha, &lat.horizontal_kernels(col))?;
            alpha = moved.mul_log(&factors[col + 1])?;
        }
    }

    let node_marg = g
        .nodes()
        .iter()
        .map(|&v| ((1.0 + full_node[v]) / 2.0).clamp(0.0, 1.0))
        .collect();
    let edge_marg = g
        .edge_kinds()
        .iter()
        .map(|kind| {
            let m = match *kind {
                EdgeKind::Intra { row, col, left, right } => left_stats[col].intra[row][left][right],
                EdgeKind::Vertical { row, col, index } => left_stats[col].vert[row][index],
                EdgeKind::Horizontal { row, col, index } => horiz_stats[col][4 * row + index],
            };
            m.clamp(-1.0, 1.0)
        })
        .collect();
    Ok(ExactMarginals {
        node_marg,
        edge_marg,
        log_z,
    })
}

/// `E[x_i x'_i]` for every coupler between a column (forward table `alpha`)
/// and the next (backward table `delta`, which already includes that
/// column's own factor).
fn horizontal_moments(alpha: &ScaledTable, delta: &ScaledTable, kernels: &[table::PairKernel]) -> Result<Vec<f64>> {
    let m = kernels.len();
    let mut out = vec![0.0; m];
    let mut u = delta.values.clone();
    let mut failed = None;
    ladder_descending(&alpha.values, kernels, |i, t| {
        let k = &kernels[i];
        let stride = 1usize << i;
        let mut acc = [0.0f64; 4]; // --, -+, +-, ++
        for (tb, ub) in t.chunks_exact(stride << 1).zip(u.chunks_exact(stride << 1)) {
            let (t0, t1) = tb.split_at(stride);
            let (u0, u1) = ub.split_at(stride);
            for j in 0..stride {
                acc[0] += t0[j] * k.same * u0[j];
                acc[1] += t0[j] * k.opposite * u1[j];
                acc[2] += t1[j] * k.opposite * u0[j];
                acc[3] += t1[j] * k.same * u1[j];
            }
        }
        let z: f64 = acc.iter().sum();
        if !(z > 0.0 && z.is_finite()) {
            failed = Some(i);
        }
        out[i] = (acc[0] + acc[3] - acc[1] - acc[2]) / z;
        table::transform_bit(&mut u, i, k);
    });
    if let Some(i) = failed {
        return Err(Error::Numeric(format!(
            "pair marginal for boundary bit {i} underflowed"
        )));
    }
    Ok(out)
}

fn untranspose_marginals(model: &IsingModel, t: &IsingModel, tm: ExactMarginals) -> ExactMarginals {
    let g = model.graph();
    let tg = t.graph();
    let node_marg = g
        .nodes()
        .iter()
        .map(|&v| tm.node_marg[tg.index_of(g.transpose_id(v)).unwrap()])
        .collect();
    let edge_marg = g
        .edges()
        .iter()
        .map(|&(u, v)| tm.edge_marg[tg.edge_index(g.transpose_id(u), g.transpose_id(v)).unwrap()])
        .collect();
    ExactMarginals {
        node_marg,
        edge_marg,
        log_z: tm.log_z,
    }
}

/// `exp(-beta E(s)) / Z` for each listed state (not renormalized over the list).
pub fn exact_mode_probabilities(model: &IsingModel, beta: f64, states: &[SpinConfig]) -> Result<Vec<f64>> {
    let log_z = log_partition(model, beta)?;
    states
        .iter()
        .map(|s| Ok((-beta * model.energy(s)? - log_z).exp()))
        .collect()
}

pub fn exact_sample(model: &IsingModel, beta: f64, count: usize, seed: u64) -> Result<SampleSet> {
    exact_sample_with(model, beta, count, seed, &ExactOptions::default())
}

/// I.i.d. samples by forward filtering and backward sampling over columns.
///
/// Sample `i` draws only from random stream `i` under `seed`, so the output
/// is independent of batching and thread count.
pub fn exact_sample_with(
    model: &IsingModel,
    beta: f64,
    count: usize,
    seed: u64,
    opts: &ExactOptions,
) -> Result<SampleSet> {
    check(model, beta, opts)?;
    if count == 0 {
        return Err(Error::invalid("sample count must be at least 1"));
    }
    if opts.order == EliminationOrder::RowMajor {
        let t = model.transposed();
        let ts = exact_sample_with(
            &t,
            beta,
            count,
            seed,
            &ExactOptions {
                order: EliminationOrder::ColumnMajor,
                ..*opts
            },
        )?;
        let g = model.graph();
        let tg = t.graph();
        let perm: Vec<usize> = g
            .nodes()
            .iter()
            .map(|&v| tg.index_of(g.transpose_id(v)).unwrap())
            .collect();
        let mut flat = Vec::with_capacity(count * g.node_count());
        for s in ts.iter() {
            flat.extend(perm.iter().map(|&p| s[p]));
        }
        return SampleSet::from_flat(model.graph_arc().clone(), flat);
    }

    let g = model.graph();
    let n = g.n();
    let lat = Lattice::new(model, beta);
    let alphas = forward(&lat, true)?;
    let setups: Vec<_> = (0..n).map(|c| lat.column_setup(c)).collect();
    let last = &alphas[n - 1].values;
    let mut cdf = Vec::with_capacity(last.len());
    let mut run = 0.0;
    for &v in last {
        run += v;
        cdf.push(run);
    }

    let mut flat = Vec::with_capacity(count * g.node_count());
    let mut start = 0;
    while start < count {
        let end = (start + SAMPLE_BATCH).min(count);
        let mut rngs: Vec<_> = (start..end).map(|i| rng::stream(seed, i as u64)).collect();
        // boundaries[c][s] = right-side bits of column c for sample s
        let mut boundaries = vec![vec![0usize; end - start]; n];
        for (s, r) in rngs.iter_mut().enumerate() {
            let u: f64 = r.random::<f64>() * run;
            let idx = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            boundaries[n - 1][s] = idx;
        }
        for col in (0..n - 1).rev() {
            let kernels = lat.horizontal_kernels(col);
            let next = boundaries[col + 1].clone();
            let cur = &mut boundaries[col];
            ladder_descending(&alphas[col].values, &kernels, |i, t| {
                let k = &kernels[i];
                let low_mask = (1usize << i) - 1;
                for ((b, &bn), r) in cur.iter_mut().zip(&next).zip(rngs.iter_mut()) {
                    let base = (bn & low_mask) | *b;
                    let xn = bn >> i & 1 == 1;
                    let p0 = t[base] * k.get(false, xn);
                    let p1 = t[base | (1 << i)] * k.get(true, xn);
                    let u: f64 = r.random();
                    if u * (p0 + p1) < p1 {
                        *b |= 1 << i;
                    }
                }
            });
        }
        for (s, r) in rngs.iter_mut().enumerate() {
            let mut full = vec![false; g.full_node_count()];
            for col in 0..n {
                let b = boundaries[col][s];
                let left = lat.sample_left(&setups[col], b, r);
                for row in 0..n {
                    for k in 0..4 {
                        full[node_id(n, row, col, Side::Right, k)] = b >> (4 * row + k) & 1 == 1;
                        full[node_id(n, row, col, Side::Left, k)] = left[row] >> k & 1 == 1;
                    }
                }
            }
            flat.extend(g.nodes().iter().map(|&v| spin(full[v]) as i8));
        }
        start = end;
    }
    debug_assert!(g.nodes().iter().all(|&v| lat.is_active(v)));
    SampleSet::from_flat(model.graph_arc().clone(), flat)
}

/// Exact log-partition for each of several models, evaluated in parallel.
pub fn log_partitions(models: &[IsingModel], beta: f64) -> Result<Vec<f64>> {
    models.par_iter().map(|m| log_partition(m, beta)).collect()
}

#[cfg(test)]
mod tests;
