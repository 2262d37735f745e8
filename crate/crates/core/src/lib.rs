//! Linear source-transition-mark (pLSTM) networks on directed acyclic graphs.

pub mod arrow;
pub mod dag;
pub mod decompose;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod linalg;
pub mod paths;
pub mod stability;
pub mod tensor_io;
pub mod verify;
pub mod vision;

pub use dag::{build_line_graph, Dag, EdgeId, LineGraph, NodeId};
pub use decompose::{decompose, Decomposition, Strategy};
pub use error::{Error, Result};
pub use linalg::{Gate, Mat};
