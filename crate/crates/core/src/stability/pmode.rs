use crate::error::{Error, Result};
use crate::grid::GridGates;
use crate::kernel::Gates;
use crate::linalg::Mat;

/// Column normalization target for P-mode transitions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PMode {
    /// Divide by `max(1, Σ|·|)`, so column sums are at most one.
    SubCritical,
    /// Divide by `Σ|·|`, so column sums are exactly one.
    Critical,
}

/// Normalizes one column (the transitions out of a single incoming edge).
/// Returns `false` for an all-zero column in critical mode, leaving it unchanged.
pub fn normalize_column(column: &mut [f64], mode: PMode) -> bool {
    let total: f64 = column.iter().map(|v| v.abs()).sum();
    let div = match mode {
        PMode::SubCritical => total.max(1.0),
        PMode::Critical if total == 0.0 => return false,
        PMode::Critical => total,
    };
    column.iter_mut().for_each(|v| *v /= div);
    true
}

/// Applies [`normalize_column`] to every incoming edge of every node.
pub fn pmode_normalize(gates: &mut Gates<f64>, mode: PMode) -> Result<()> {
    for (node, rows) in gates.transition.iter_mut().enumerate() {
        for (column, row) in rows.iter_mut().enumerate() {
            if !row.is_empty() && !normalize_column(row, mode) {
                return Err(Error::DegenerateColumn { node, column });
            }
        }
    }
    Ok(())
}

/// Grid form: the horizontal input column is `(t_rr, t_rd)`, the vertical
/// one `(t_dr, t_dd)`.
pub fn pmode_normalize_grid(gates: &mut GridGates, mode: PMode) -> Result<()> {
    for n in 0..gates.node_count() {
        let mut h = [gates.t_rr[n], gates.t_rd[n]];
        let mut v = [gates.t_dr[n], gates.t_dd[n]];
        if !normalize_column(&mut h, mode) {
            return Err(Error::DegenerateColumn { node: n, column: 0 });
        }
        if !normalize_column(&mut v, mode) {
            return Err(Error::DegenerateColumn { node: n, column: 1 });
        }
        [gates.t_rr[n], gates.t_rd[n]] = h;
        [gates.t_dr[n], gates.t_dd[n]] = v;
    }
    Ok(())
}

/// `γ·[[α, β], [1−α, 1−β]]` with rows (horizontal out, vertical out) and
/// columns (horizontal in, vertical in).
pub fn critical_transition_2d_general(alpha: f64, beta: f64, gamma: f64) -> Result<Mat> {
    for (name, v) in [("alpha", alpha), ("beta", beta), ("gamma", gamma)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Range(format!("{name} = {v} is outside [0, 1]")));
        }
    }
    Ok(Mat::from_vec(2, 2, vec![gamma * alpha, gamma * beta, gamma * (1.0 - alpha), gamma * (1.0 - beta)]))
}

/// `γ·[[α, α], [1−α, 1−α]]`: propagation along the direction with
/// horizontal share `α`, decayed by `γ`.
pub fn critical_transition_2d(alpha: f64, gamma: f64) -> Result<Mat> {
    critical_transition_2d_general(alpha, alpha, gamma)
}

/// Writes the critical transition into every node of `gates`.
pub fn set_critical_grid(gates: &mut GridGates, alpha: f64, gamma: f64) -> Result<()> {
    let t = critical_transition_2d(alpha, gamma)?;
    gates.t_rr.iter_mut().for_each(|v| *v = t[(0, 0)]);
    gates.t_dr.iter_mut().for_each(|v| *v = t[(0, 1)]);
    gates.t_rd.iter_mut().for_each(|v| *v = t[(1, 0)]);
    gates.t_dd.iter_mut().for_each(|v| *v = t[(1, 1)]);
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sub_critical_leaves_small_columns() {
        let mut c = [0.5, 0.3];
        assert!(normalize_column(&mut c, PMode::SubCritical));
        assert_eq!(c, [0.5, 0.3]);
    }

    #[test]
    fn critical_divides_by_sum() {
        let mut c = [2.0, 2.0];
        assert!(normalize_column(&mut c, PMode::Critical));
        assert_eq!(c, [0.5, 0.5]);
        let mut z = [0.0, 0.0];
        assert!(!normalize_column(&mut z, PMode::Critical));
    }

    #[test]
    fn degenerate_column_reports_position() {
        let dag = crate::Dag::grid(2, 2);
        let mut g = Gates::constant(&dag, 1.0, 0.0, 1.0, 0.0);
        assert!(matches!(pmode_normalize(&mut g, PMode::Critical), Err(Error::DegenerateColumn { .. })));
        assert!(pmode_normalize(&mut g, PMode::SubCritical).is_ok());
    }

    #[test]
    fn critical_matrices() {
        assert_eq!(critical_transition_2d(0.5, 1.0).unwrap().as_slice(), &[0.5, 0.5, 0.5, 0.5]);
        assert_eq!(critical_transition_2d(1.0, 1.0).unwrap().as_slice(), &[1.0, 1.0, 0.0, 0.0]);
        let t = critical_transition_2d(0.3, 0.9).unwrap();
        for c in 0..2 {
            assert!((t[(0, c)] + t[(1, c)] - 0.9).abs() < 1e-15);
        }
        assert!(matches!(critical_transition_2d(1.2, 1.0), Err(Error::Range(_))));
        assert!(matches!(critical_transition_2d(0.5, -0.1), Err(Error::Range(_))));
    }
}
