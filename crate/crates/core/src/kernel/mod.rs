//! The pLSTM computation on general DAGs.

mod backward;
mod forward;
mod gating;
mod hierarchical;
mod params;

pub use backward::{backward_recurrent, StmGrads};
pub use forward::{forward_bidirectional, forward_normalized, forward_recurrent, NORMALIZER_EPS};
pub use gating::{apply_gating, apply_gating_st, gating_matrix_paths, gating_matrix_recurrent, GatingMatrix};
pub use hierarchical::gating_matrix_hierarchical;
pub use params::{CellStateField, Gates, Qkv, StmParams};
