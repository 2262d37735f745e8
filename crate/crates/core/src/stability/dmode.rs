//! Distribution mode: one cross transition family is removed so that the
//! line graph of the grid becomes a multitree.
//!
//! With `t_rd` masked, a path from `(0, 0)` to `(x, y)` must go down first,
//! turn right at most once (at row `y`) and then continue right, so it is
//! unique. Setting every retained transition, source and mark to one (the
//! D-mode critical assignment) therefore gives a gating entry of exactly one
//! for every node in the lower-right quadrant of the source.

use crate::dag::{Dag, LineGraph};
use crate::grid::GridGates;
use crate::kernel::Gates;

/// Which cross transition family is zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DModeMask {
    /// Horizontal input to vertical output (`t_rd`).
    RightToDown,
    /// Vertical input to horizontal output (`t_dr`).
    DownToRight,
}

pub fn dmode_apply(gates: &GridGates, mask: DModeMask) -> GridGates {
    let mut g = gates.clone();
    let family = match mask {
        DModeMask::RightToDown => &mut g.t_rd,
        DModeMask::DownToRight => &mut g.t_dr,
    };
    family.iter_mut().for_each(|v| *v = 0.0);
    g
}

/// D-mode critical assignment on a `width × height` grid.
pub fn dmode_critical(width: usize, height: usize, mask: DModeMask) -> GridGates {
    dmode_apply(&GridGates::constant(width, height, 1.0), mask)
}

/// Line graph restricted to the transitions that are non-zero in `gates`.
pub fn support_line_graph<'a>(dag: &'a Dag, gates: &Gates<f64>) -> LineGraph<'a> {
    LineGraph::filtered(dag, |n, ein, eout| gates.transition[n][dag.in_position(ein)][dag.out_position(eout)] != 0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{gating_2d, DirectionCombo};
    use crate::paths::is_multitree;

    #[test]
    fn masked_two_by_two_has_one_path() {
        let full = gating_2d(&GridGates::constant(2, 2, 1.0)).unwrap().gating;
        let masked = gating_2d(&dmode_critical(2, 2, DModeMask::RightToDown)).unwrap().gating;
        assert_eq!(full[(0, 3)], 2.0);
        assert_eq!(masked[(0, 3)], 1.0);
    }

    #[test]
    fn multitree_after_masking() {
        for mask in [DModeMask::RightToDown, DModeMask::DownToRight] {
            let g = dmode_critical(3, 3, mask);
            let (dag, gates) = g.to_dag_gates(DirectionCombo::DownRight);
            assert!(is_multitree(&support_line_graph(&dag, &gates)));
        }
        let (dag, gates) = GridGates::constant(3, 3, 1.0).to_dag_gates(DirectionCombo::DownRight);
        assert!(!is_multitree(&support_line_graph(&dag, &gates)));
    }
}
