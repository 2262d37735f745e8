use crate::error::{Error, Result};
use crate::kernel::{apply_gating, GatingMatrix, Qkv};
use crate::linalg::Mat;

use super::gates::{DirectionCombo, GridGates};
use super::scan2d::gating_2d;

/// Gating matrix of one cover, computed by reflecting it onto the down-right
/// cover, scanning, and mapping the node indices back.
pub fn cover_gating(gates: &GridGates, combo: DirectionCombo) -> Result<GatingMatrix<f64>> {
    let (w, h) = (gates.width, gates.height);
    let out = gating_2d(&gates.reflected(combo))?;
    let n = w * h;
    let r = |v| combo.reflect(v, w, h);
    Ok(GatingMatrix::from_mat(&Mat::from_fn(n, n, |a, b| out.gating[(r(a), r(b))])))
}

/// Sum of the gating matrices of the supplied covers, accumulated in the
/// order given.
pub fn multidirectional_gating(covers: &[(DirectionCombo, GridGates)]) -> Result<GatingMatrix<f64>> {
    let (first, rest) = covers.split_first().ok_or_else(|| Error::Shape("no direction covers supplied".into()))?;
    let (w, h) = (first.1.width, first.1.height);
    let mut total = cover_gating(&first.1, first.0)?;
    for (combo, gates) in rest {
        if (gates.width, gates.height) != (w, h) {
            return Err(Error::Shape("direction covers differ in grid size".into()));
        }
        total.accumulate(&cover_gating(gates, *combo)?);
    }
    Ok(total)
}

/// All covers folded into one gating matrix and applied in a single pass.
pub fn multidirectional_2d(covers: &[(DirectionCombo, GridGates)], qkv: &Qkv) -> Result<Mat> {
    apply_gating(&multidirectional_gating(covers)?, qkv)
}
