//! Tables over boundary states, stored as `exp(log_scale) * values` with the
//! largest value normalized to 1.

use crate::error::{Error, Result};

/// Two-valued coupling kernel `K(x, x') = exp(-J x x')`, divided by
/// `exp(|J|)` so its largest entry is 1.
#[derive(Clone, Copy, Debug)]
pub(crate) struct PairKernel {
    pub same: f64,
    pub opposite: f64,
    pub log_norm: f64,
}

impl PairKernel {
    /// `coupling` is already multiplied by the inverse temperature.
    pub fn new(coupling: f64) -> Self {
        let a = coupling.abs();
        PairKernel {
            same: (-coupling - a).exp(),
            opposite: (coupling - a).exp(),
            log_norm: a,
        }
    }

    #[inline]
    pub fn get(&self, x: bool, y: bool) -> f64 {
        if x == y {
            self.same
        } else {
            self.opposite
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ScaledTable {
    pub log_scale: f64,
    pub values: Vec<f64>,
}

impl ScaledTable {
    pub fn from_log(logs: &[f64]) -> Result<Self> {
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            return Err(Error::Numeric(format!("table has no finite log-weight (max = {max})")));
        }
        Ok(ScaledTable {
            log_scale: max,
            values: logs.iter().map(|&l| (l - max).exp()).collect(),
        })
    }

    /// Pointwise product with `exp(logs)`, renormalized.
    pub fn mul_log(&self, logs: &[f64]) -> Result<Self> {
        let combined: Vec<f64> = self
            .values
            .iter()
            .zip(logs)
            .map(|(&v, &l)| if v > 0.0 { v.ln() + l } else { f64::NEG_INFINITY })
            .collect();
        let mut t = ScaledTable::from_log(&combined)?;
        t.log_scale += self.log_scale;
        Ok(t)
    }

    pub fn log_sum(&self) -> f64 {
        self.log_scale + self.values.iter().sum::<f64>().ln()
    }

    pub fn renormalize(&mut self) -> Result<()> {
        let max = self.values.iter().copied().fold(0.0, f64::max);
        if !(max > 0.0 && max.is_finite()) {
            return Err(Error::Numeric(format!("transfer table degenerate (max entry {max})")));
        }
        let inv = 1.0 / max;
        self.values.iter_mut().for_each(|v| *v *= inv);
        self.log_scale += max.ln();
        Ok(())
    }
}

/// Sums out bit `bit` against the kernel: `out[.., x', ..] = sum_x in[.., x, ..] K(x, x')`.
pub(crate) fn transform_bit(values: &mut [f64], bit: usize, k: &PairKernel) {
    let stride = 1usize << bit;
    let (ks, ko) = (k.same, k.opposite);
    for block in values.chunks_exact_mut(stride << 1) {
        let (lo, hi) = block.split_at_mut(stride);
        for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
            let (x0, x1) = (*a, *b);
            *a = x0 * ks + x1 * ko;
            *b = x0 * ko + x1 * ks;
        }
    }
}

/// Applies every bit kernel, i.e. the full transfer across one column
/// boundary. Bit `i` of the index is the spin of boundary node `i`.
pub(crate) fn transfer(table: &ScaledTable, kernels: &[PairKernel]) -> Result<ScaledTable> {
    let mut out = table.clone();
    for (bit, k) in kernels.iter().enumerate() {
        transform_bit(&mut out.values, bit, k);
        out.log_scale += k.log_norm;
    }
    out.renormalize()?;
    Ok(out)
}

/// Visits `T_i` for `i = m - 1, ..., 0`, where `T_i` is `base` with the
/// kernels for bits `0..i` applied.
///
/// Intermediate tables are checkpointed every `ceil(sqrt(m))` bits and
/// recomputed per segment, which bounds memory at about `2 sqrt(m)` tables.
pub(crate) fn ladder_descending(base: &[f64], kernels: &[PairKernel], mut visit: impl FnMut(usize, &[f64])) {
    let m = kernels.len();
    if m == 0 {
        return;
    }
    let step = (m as f64).sqrt().ceil() as usize;
    let mut checkpoints: Vec<Vec<f64>> = Vec::new();
    let mut cur = base.to_vec();
    for i in 0..m {
        if i % step == 0 {
            checkpoints.push(cur.clone());
        }
        if i + 1 < m {
            transform_bit(&mut cur, i, &kernels[i]);
        }
    }
    drop(cur);
    for (seg, start_table) in checkpoints.iter().enumerate().rev() {
        let start = seg * step;
        let end = (start + step).min(m);
        let mut segment: Vec<Vec<f64>> = Vec::with_capacity(end - start);
        let mut cur = start_table.clone();
        for i in start..end {
            if i > start {
                transform_bit(&mut cur, i - 1, &kernels[i - 1]);
            }
            segment.push(cur.clone());
        }
        for (offset, t) in segment.iter().enumerate().rev() {
            visit(start + offset, t);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ladder_matches_direct_prefix_transforms() {
        let kernels: Vec<PairKernel> = [0.3, -0.7, 1.1, 0.0, -0.2]
            .iter()
            .map(|&j| PairKernel::new(j))
            .collect();
        let base: Vec<f64> = (0..32).map(|i| 1.0 + (i as f64 * 0.37).sin().abs()).collect();
        let mut seen = Vec::new();
        ladder_descending(&base, &kernels, |i, t| {
            let mut direct = base.clone();
            for (b, k) in kernels.iter().enumerate().take(i) {
                transform_bit(&mut direct, b, k);
            }
            for (x, y) in t.iter().zip(&direct) {
                assert!((x - y).abs() < 1e-12);
            }
            seen.push(i);
        });
        assert_eq!(seen, vec![4, 3, 2, 1, 0]);
    }

    #[test]
    fn single_bit_transfer() {
        // two spins coupled by J = 1: Z = 2e^-1 + 2e^1
        let t = ScaledTable::from_log(&[0.0, 0.0]).unwrap();
        let out = transfer(&t, &[PairKernel::new(1.0)]).unwrap();
        let z = out.log_sum();
        assert!((z - (2.0 * (-1f64).exp() + 2.0 * 1f64.exp()).ln()).abs() < 1e-14);
    }
}
