//! Root-mean-square normalization over fixed-width row segments.

use crate::linalg::Mat;

/// Normalized values and the per-segment RMS, row-major by segment.
#[derive(Debug, Clone)]
pub struct RmsOut {
    pub normalized: Mat,
    pub rms: Vec<f64>,
}

/// Normalizes each `seg`-wide slice of every row to unit RMS (before gain).
pub fn rms_forward(x: &Mat, seg: usize, eps: f64) -> RmsOut {
    let per_row = x.cols() / seg;
    let mut normalized = x.clone();
    let mut rms = Vec::with_capacity(x.rows() * per_row);
    for r in 0..x.rows() {
        for s in 0..per_row {
            let range = r * x.cols() + s * seg..r * x.cols() + (s + 1) * seg;
            let chunk = &mut normalized.as_mut_slice()[range];
            let ms = chunk.iter().map(|v| v * v).sum::<f64>() / seg as f64;
            let rr = (ms + eps).sqrt();
            chunk.iter_mut().for_each(|v| *v /= rr);
            rms.push(rr);
        }
    }
    RmsOut { normalized, rms }
}

/// `dx = (dŷ − ŷ · mean(dŷ ⊙ ŷ)) / r` per segment.
pub fn rms_backward(d_normalized: &Mat, out: &RmsOut, seg: usize) -> Mat {
    let cols = d_normalized.cols();
    let per_row = cols / seg;
    let mut dx = Mat::zeros(d_normalized.rows(), cols);
    for r in 0..d_normalized.rows() {
        for s in 0..per_row {
            let base = r * cols + s * seg;
            let y = &out.normalized.as_slice()[base..base + seg];
            let dy = &d_normalized.as_slice()[base..base + seg];
            let m = y.iter().zip(dy).map(|(a, b)| a * b).sum::<f64>() / seg as f64;
            let rr = out.rms[r * per_row + s];
            for i in 0..seg {
                dx.as_mut_slice()[base + i] = (dy[i] - y[i] * m) / rr;
            }
        }
    }
    dx
}

/// Multiplies every row elementwise by `gain` (`1×cols`).
pub fn apply_gain(x: &Mat, gain: &Mat) -> Mat {
    Mat::from_fn(x.rows(), x.cols(), |i, j| x[(i, j)] * gain[(0, j)])
}
