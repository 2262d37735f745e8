//! Logarithmic-depth evaluation on regular 1D and 2D grids.

mod chunkwise;
mod gates;
mod multidir;
mod scan1d;
mod scan2d;

pub use chunkwise::{chunkwise_1d, chunkwise_2d};
pub use gates::{cover_dag, DirectionCombo, GridGates, SeqGates};
pub use multidir::{cover_gating, multidirectional_2d, multidirectional_gating};
pub use scan1d::{gating_1d, levels_for, scan_1d, ScanOutput, SeqBlock, SeqLevelTensors};
pub use scan2d::{gating_2d, scan_2d, GridBlock, GridLevelTensors, Kind, Part, Quad, Rule, RULES};
