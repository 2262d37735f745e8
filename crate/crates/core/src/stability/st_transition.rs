//! State-tracking transition matrices `U·diag(σ)·Vᵀ` with orthogonal factors
//! and singular values in `[-1, 1]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::Mat;

/// Parameterization of an orthogonal `J×J` factor.
#[derive(Debug, Clone, PartialEq)]
pub enum Orthogonal {
    /// Product `H(v₁)·H(v₂)·…` of Householder reflections `I − 2vvᵀ/vᵀv`.
    Householder(Vec<Vec<f64>>),
    /// `exp(A − Aᵀ)` for a square `A`.
    SkewExp(Mat),
}

impl Orthogonal {
    pub fn build(&self, dim: usize) -> Result<Mat> {
        match self {
            Orthogonal::Householder(vs) => {
                let mut acc = Mat::identity(dim);
                for v in vs {
                    if v.len() != dim {
                        return Err(Error::Shape(format!("reflection vector of length {} for dimension {dim}", v.len())));
                    }
                    let vv: f64 = v.iter().map(|x| x * x).sum();
                    if vv == 0.0 {
                        return Err(Error::Range("zero Householder vector".into()));
                    }
                    let h = Mat::from_fn(dim, dim, |i, j| {
                        let id = if i == j { 1.0 } else { 0.0 };
                        id - 2.0 * v[i] * v[j] / vv
                    });
                    acc = acc.matmul(&h);
                }
                Ok(acc)
            }
            Orthogonal::SkewExp(a) => {
                if a.rows() != dim || a.cols() != dim {
                    return Err(Error::Shape(format!("skew generator must be {dim}×{dim}")));
                }
                let a = DMatrix::from_row_slice(dim, dim, a.as_slice());
                let skew = &a - a.transpose();
                let e = skew.exp();
                Ok(Mat::from_fn(dim, dim, |i, j| e[(i, j)]))
            }
        }
    }
}

/// How raw singular-value parameters are mapped into `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SigmaMap {
    Tanh,
    Sign,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StTransition {
    pub dim: usize,
    pub u: Orthogonal,
    pub v: Orthogonal,
    pub sigma: Vec<f64>,
    pub sigma_map: SigmaMap,
}

impl StTransition {
    /// Two Householder reflections per factor from the given vectors.
    pub fn householder(u: [Vec<f64>; 2], v: [Vec<f64>; 2], sigma: Vec<f64>) -> Self {
        let dim = sigma.len();
        StTransition { dim, u: Orthogonal::Householder(u.to_vec()), v: Orthogonal::Householder(v.to_vec()), sigma, sigma_map: SigmaMap::Tanh }
    }

    fn sigma_values(&self) -> Vec<f64> {
        self.sigma
            .iter()
            .map(|&s| match self.sigma_map {
                SigmaMap::Tanh => s.tanh(),
                SigmaMap::Sign => {
                    if s < 0.0 {
                        -1.0
                    } else {
                        1.0
                    }
                }
            })
            .collect()
    }
}

/// Maximum entry of `|QᵀQ − I|`.
pub fn orthogonality_error(q: &Mat) -> f64 {
    q.transpose().matmul(q).max_abs_diff(&Mat::identity(q.cols()))
}

/// Tolerance for the orthogonality of the built factors.
pub const ORTHOGONALITY_TOL: f64 = 1e-10;

pub fn st_transition_build(spec: &StTransition) -> Result<Mat> {
    if spec.sigma.len() != spec.dim {
        return Err(Error::Shape(format!("{} singular values for dimension {}", spec.sigma.len(), spec.dim)));
    }
    let u = spec.u.build(spec.dim)?;
    let v = spec.v.build(spec.dim)?;
    for q in [&u, &v] {
        let err = orthogonality_error(q);
        if err > ORTHOGONALITY_TOL {
            return Err(Error::Range(format!("orthogonal factor deviates by {err:e}")));
        }
    }
    let sigma = spec.sigma_values();
    let us = Mat::from_fn(spec.dim, spec.dim, |i, j| u[(i, j)] * sigma[j]);
    Ok(us.matmul(&v.transpose()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::spectral_norm;

    #[test]
    fn identity_when_factors_trivial() {
        let spec = StTransition {
            dim: 3,
            u: Orthogonal::Householder(vec![]),
            v: Orthogonal::SkewExp(Mat::zeros(3, 3)),
            sigma: vec![1.0; 3],
            sigma_map: SigmaMap::Sign,
        };
        let m = st_transition_build(&spec).unwrap();
        assert!(m.max_abs_diff(&Mat::identity(3)) < 1e-15);
    }

    #[test]
    fn single_reflection_has_unit_norm() {
        let spec = StTransition {
            dim: 2,
            u: Orthogonal::Householder(vec![vec![1.0, 1.0]]),
            v: Orthogonal::Householder(vec![]),
            sigma: vec![1.0, 1.0],
            sigma_map: SigmaMap::Sign,
        };
        let m = st_transition_build(&spec).unwrap();
        assert!(m.max_abs_diff(&Mat::from_vec(2, 2, vec![0.0, -1.0, -1.0, 0.0])) < 1e-15);
        assert!((spectral_norm(&m, 100) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn skew_exponential_is_orthogonal() {
        let a = Mat::from_fn(4, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 * 0.4 - 0.8);
        let q = Orthogonal::SkewExp(a).build(4).unwrap();
        assert!(orthogonality_error(&q) < 1e-12);
    }
}
