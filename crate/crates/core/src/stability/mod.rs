//! P-mode and D-mode stabilization, decay analysis and state-tracking transitions.

mod decay;
mod dmode;
mod init;
mod pmode;
mod st_transition;

pub use decay::{anti_diagonal_mass, asymptote, decay_profile, leading_direction, t_full, write_decay_csv, DecayRow};
pub use dmode::{dmode_apply, dmode_critical, support_line_graph, DModeMask};
pub use init::{directional_head_init, linspace, sigmoid, HeadDirection, ORIENTATION_RANGE};
pub use pmode::{
    critical_transition_2d, critical_transition_2d_general, normalize_column, pmode_normalize, pmode_normalize_grid,
    set_critical_grid, PMode,
};
pub use st_transition::{orthogonality_error, st_transition_build, Orthogonal, SigmaMap, StTransition, ORTHOGONALITY_TOL};
