use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};

use super::params::{CellStateField, Qkv, StmParams};

/// Default floor of the normalizer channel.
pub const NORMALIZER_EPS: f64 = 1e-6;

/// Sequential evaluation in topological order.
///
/// `C_e = Σ_{e'} T_{e'e} C_{e'} + S_e K_n V_nᵀ` for every outgoing edge `e`
/// of `n`, and `H_n = Qₙᵀ Σ_{e'} M_{e'} C_{e'} + D_n (Q_n·K_n) V_n`.
/// Returns the cell field and the `N×V` hidden states.
pub fn forward_recurrent(dag: &Dag, params: &StmParams) -> Result<(CellStateField, Mat)> {
    params.check(dag)?;
    let g = &params.gates;
    let Qkv { query, key, value } = &params.qkv;
    let (kd, vd) = (key.cols(), value.cols());
    let mut cells = vec![Mat::zeros(kd, vd); dag.edge_count()];
    let mut hidden = Mat::zeros(dag.node_count(), vd);
    for &n in dag.topological_order() {
        let (q, k, v) = (query.row(n), key.row(n), value.row(n));
        let ins = dag.in_edges(n);
        for (j, &e) in dag.out_edges(n).iter().enumerate() {
            let mut c = Mat::zeros(kd, vd);
            for (i, &ein) in ins.iter().enumerate() {
                axpy(&mut c, g.transition[n][i][j], &cells[ein]);
            }
            let s = g.source[n][j];
            for a in 0..kd {
                for b in 0..vd {
                    c[(a, b)] += s * k[a] * v[b];
                }
            }
            cells[e] = c;
        }
        let h = &mut hidden.as_mut_slice()[n * vd..(n + 1) * vd];
        for (i, &ein) in ins.iter().enumerate() {
            let m = g.mark[n][i];
            let c = &cells[ein];
            for (b, hb) in h.iter_mut().enumerate() {
                let qc: f64 = (0..kd).map(|a| q[a] * c[(a, b)]).sum();
                *hb += m * qc;
            }
        }
        let direct = g.direct[n] * dot(q, k);
        for (hb, &vb) in h.iter_mut().zip(v) {
            *hb += direct * vb;
        }
    }
    Ok((CellStateField { cells }, hidden))
}

fn axpy(y: &mut Mat, a: f64, x: &Mat) {
    for (yv, xv) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *yv += a * xv;
    }
}

/// Runs the same gates once more with an all-ones value channel and divides
/// the hidden state elementwise by `max(|n|, eps)`.
pub fn forward_normalized(dag: &Dag, params: &StmParams, eps: f64) -> Result<Mat> {
    let (_, hidden) = forward_recurrent(dag, params)?;
    let mut ones = params.clone();
    ones.qkv.value = Mat::from_fn(dag.node_count(), 1, |_, _| 1.0);
    let (_, norm) = forward_recurrent(dag, &ones)?;
    let vd = hidden.cols();
    Ok(Mat::from_fn(hidden.rows(), vd, |n, b| hidden[(n, b)] / norm[(n, 0)].abs().max(eps)))
}

/// Sum of the causal pass on `dag` and a pass on `dag.reversed()` with
/// `reverse_params` (built for the reversed graph).
pub fn forward_bidirectional(dag: &Dag, params: &StmParams, reverse_params: &StmParams) -> Result<Mat> {
    if params.qkv.value.cols() != reverse_params.qkv.value.cols() {
        return Err(Error::Shape("both directions need the same value dimension".into()));
    }
    let (_, mut fwd) = forward_recurrent(dag, params)?;
    let (_, bwd) = forward_recurrent(&dag.reversed(), reverse_params)?;
    fwd.add_assign(&bwd);
    Ok(fwd)
}
