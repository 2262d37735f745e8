use crate::dag::Dag;
use crate::error::{Error, Result};
use crate::linalg::{dot, Mat};

use super::forward::forward_recurrent;
use super::params::{Gates, Qkv, StmParams};

/// Gradients of every [`StmParams`] field plus the cotangent of each cell state.
#[derive(Debug, Clone, PartialEq)]
pub struct StmGrads {
    pub params: StmParams,
    pub cells: Vec<Mat>,
}

/// Vector–Jacobian product of [`forward_recurrent`] for the hidden cotangent
/// `grad_hidden` (`N×V`), accumulated in reverse topological order with
/// transposed transitions.
pub fn backward_recurrent(dag: &Dag, params: &StmParams, grad_hidden: &Mat) -> Result<StmGrads> {
    let (fwd, _) = forward_recurrent(dag, params)?;
    let cells = &fwd.cells;
    let Qkv { query, key, value } = &params.qkv;
    let (n_nodes, kd, vd) = (dag.node_count(), key.cols(), value.cols());
    if grad_hidden.rows() != n_nodes || grad_hidden.cols() != vd {
        return Err(Error::Shape(format!("grad_hidden must be {n_nodes}×{vd}")));
    }
    let g = &params.gates;
    let mut dg = Gates::constant(dag, 0.0, 0.0, 0.0, 0.0);
    let mut dq = Mat::zeros(n_nodes, kd);
    let mut dk = Mat::zeros(n_nodes, kd);
    let mut dv = Mat::zeros(n_nodes, vd);
    let mut dc = vec![Mat::zeros(kd, vd); dag.edge_count()];

    for &n in dag.topological_order().iter().rev() {
        let (q, k, v, gh) = (query.row(n), key.row(n), value.row(n), grad_hidden.row(n));
        let ins = dag.in_edges(n);
        let outs = dag.out_edges(n);

        // Outgoing cells: C_j = Σ_i T_ij C_i + S_j k vᵀ.
        for (j, &eo) in outs.iter().enumerate() {
            let dcj = dc[eo].clone();
            let mut ds = 0.0;
            for a in 0..kd {
                let row_dot_v = dot(dcj.row(a), v);
                ds += k[a] * row_dot_v;
                dk[(n, a)] += g.source[n][j] * row_dot_v;
            }
            dg.source[n][j] = ds;
            for b in 0..vd {
                let col_dot_k: f64 = (0..kd).map(|a| k[a] * dcj[(a, b)]).sum();
                dv[(n, b)] += g.source[n][j] * col_dot_k;
            }
            for (i, &ei) in ins.iter().enumerate() {
                dg.transition[n][i][j] = dot(dcj.as_slice(), cells[ei].as_slice());
                let t = g.transition[n][i][j];
                for (d, &x) in dc[ei].as_mut_slice().iter_mut().zip(dcj.as_slice()) {
                    *d += t * x;
                }
            }
        }

        // Hidden: H = Σ_i M_i qᵀC_i + D (q·k) v.
        let vg = dot(v, gh);
        let qk = dot(q, k);
        dg.direct[n] = qk * vg;
        for a in 0..kd {
            dq[(n, a)] += g.direct[n] * vg * k[a];
            dk[(n, a)] += g.direct[n] * vg * q[a];
        }
        for b in 0..vd {
            dv[(n, b)] += g.direct[n] * qk * gh[b];
        }
        for (i, &ei) in ins.iter().enumerate() {
            let c = &cells[ei];
            let m = g.mark[n][i];
            let mut dm = 0.0;
            for a in 0..kd {
                let cg = dot(c.row(a), gh);
                dm += q[a] * cg;
                dq[(n, a)] += m * cg;
            }
            dg.mark[n][i] = dm;
            let d = &mut dc[ei];
            for a in 0..kd {
                for b in 0..vd {
                    d[(a, b)] += m * q[a] * gh[b];
                }
            }
        }
    }
    Ok(StmGrads { params: StmParams { gates: dg, qkv: Qkv { query: dq, key: dk, value: dv } }, cells: dc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let dag = Dag::grid(3, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let params = StmParams::random(&dag, 2, 3, &mut rng);
        let grads = backward_recurrent(&dag, &params, &Mat::zeros(6, 3)).unwrap();
        assert!(grads.params.values().all(|v| v == 0.0));
    }

    #[test]
    fn single_node_direct_gradient() {
        let dag = Dag::new(1, vec![]).unwrap();
        let params = StmParams {
            gates: Gates::constant(&dag, 0.0, 0.0, 0.0, 0.7),
            qkv: Qkv {
                query: Mat::from_vec(1, 2, vec![1.0, 2.0]),
                key: Mat::from_vec(1, 2, vec![0.5, -1.0]),
                value: Mat::from_vec(1, 2, vec![3.0, 4.0]),
            },
        };
        let grads = backward_recurrent(&dag, &params, &Mat::from_vec(1, 2, vec![1.0, 0.0])).unwrap();
        // ∂H₀/∂D = (q·k) v₀
        assert_eq!(grads.params.gates.direct[0], -1.5 * 3.0);
    }
}
