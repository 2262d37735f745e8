use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg::Mat;

use super::gates::SeqGates;

/// Generalized gates of one block of `2^l` consecutive nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqBlock {
    /// Node → block exit.
    pub source: Vec<f64>,
    /// Block entry → block exit.
    pub transition: f64,
    /// Block entry → node.
    pub mark: Vec<f64>,
    /// Node → node, rows are sources.
    pub gating: Mat,
}

/// All blocks of one level.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqLevelTensors {
    pub level: usize,
    pub blocks: Vec<SeqBlock>,
}

impl SeqLevelTensors {
    pub fn level0(gates: &SeqGates) -> Result<Self> {
        gates.check()?;
        let blocks = (0..gates.len())
            .map(|n| SeqBlock {
                source: vec![gates.source[n]],
                transition: gates.transition[n],
                mark: vec![gates.mark[n]],
                gating: Mat::scalar(gates.direct[n]),
            })
            .collect();
        Ok(SeqLevelTensors { level: 0, blocks })
    }

    pub fn block_size(&self) -> usize {
        1 << self.level
    }

    /// Merges neighbouring blocks `2a` and `2a + 1`.
    pub fn merge(&self) -> Self {
        let blocks = self.blocks.par_chunks(2).map(|pair| merge_pair(&pair[0], &pair[1])).collect();
        SeqLevelTensors { level: self.level + 1, blocks }
    }
}

fn merge_pair(a: &SeqBlock, b: &SeqBlock) -> SeqBlock {
    let s = a.source.len();
    let source = a.source.iter().map(|&v| v * b.transition).chain(b.source.iter().copied()).collect();
    let mark = a.mark.iter().copied().chain(b.mark.iter().map(|&v| a.transition * v)).collect();
    let mut gating = Mat::zeros(2 * s, 2 * s);
    gating.set_block(0, 0, &a.gating);
    gating.set_block(s, s, &b.gating);
    for i in 0..s {
        for j in 0..s {
            gating[(i, s + j)] = a.source[i] * b.mark[j];
        }
    }
    SeqBlock { source, transition: a.transition * b.transition, mark, gating }
}

/// Result of a full parallel scan.
#[derive(Debug, Clone, PartialEq)]
pub struct ScanOutput {
    /// Rows are source nodes.
    pub gating: Mat,
    /// Number of merge levels executed.
    pub merge_levels: usize,
}

/// Parallel scan over a sequence of exactly `2^levels` nodes.
pub fn scan_1d(gates: &SeqGates, levels: usize) -> Result<ScanOutput> {
    if gates.len() != 1 << levels {
        return Err(Error::Length { len: gates.len(), levels });
    }
    let mut t = SeqLevelTensors::level0(gates)?;
    let mut merge_levels = 0;
    while t.blocks.len() > 1 {
        t = t.merge();
        merge_levels += 1;
    }
    Ok(ScanOutput { gating: t.blocks.swap_remove(0).gating, merge_levels })
}

/// Smallest `L` with `2^L ≥ n`.
pub fn levels_for(n: usize) -> usize {
    n.max(1).next_power_of_two().trailing_zeros() as usize
}

/// Pads to the next power of two, scans, and crops back to `gates.len()`.
pub fn gating_1d(gates: &SeqGates) -> Result<ScanOutput> {
    let n = gates.len();
    let levels = levels_for(n);
    let out = scan_1d(&gates.padded(1 << levels), levels)?;
    let gating = Mat::from_fn(n, n, |i, j| out.gating[(i, j)]);
    Ok(ScanOutput { gating, merge_levels: out.merge_levels })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_ones_gives_strict_lower_ones() {
        let out = scan_1d(&SeqGates::constant(4, 1.0, 1.0, 1.0, 0.0), 2).unwrap();
        let want = Mat::from_fn(4, 4, |s, d| if s < d { 1.0 } else { 0.0 });
        assert_eq!(out.gating, want);
        assert_eq!(out.merge_levels, 2);
    }

    #[test]
    fn constant_half_transition() {
        let out = scan_1d(&SeqGates::constant(8, 1.0, 0.5, 1.0, 0.0), 3).unwrap();
        assert_eq!(out.gating[(0, 7)], 0.5f64.powi(6));
    }

    #[test]
    fn unpadded_length_is_rejected() {
        assert!(matches!(scan_1d(&SeqGates::constant(5, 1.0, 1.0, 1.0, 0.0), 3), Err(Error::Length { .. })));
    }

    #[test]
    fn merge_levels_is_ceil_log2() {
        for (n, l) in [(1, 0), (2, 1), (5, 3), (64, 6), (65, 7)] {
            assert_eq!(gating_1d(&SeqGates::constant(n, 1.0, 1.0, 1.0, 0.0)).unwrap().merge_levels, l);
        }
    }
}
