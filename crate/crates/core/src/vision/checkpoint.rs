use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor_io::{read_tensor, write_tensor, Tensor};

use super::config::ModelConfig;
use super::model::Model;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointManifest {
    pub format: String,
    pub config: ModelConfig,
    pub tensors: Vec<TensorEntry>,
}

/// One `PTNSR1` file per tensor plus a JSON manifest with names, shapes and
/// the model configuration.
pub fn save_checkpoint(model: &Model, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut tensors = Vec::new();
    for (name, m) in model.params.tensors() {
        let file = format!("{name}.ptnsr");
        write_tensor(&dir.join(&file), &Tensor::from(m))?;
        tensors.push(TensorEntry { name, shape: vec![m.rows(), m.cols()], file });
    }
    let manifest = CheckpointManifest { format: "PTNSR1".into(), config: model.config.clone(), tensors };
    fs::write(dir.join(MANIFEST), serde_json::to_string_pretty(&manifest)? + "\n")?;
    Ok(())
}

pub fn load_checkpoint(dir: &Path) -> Result<Model> {
    let manifest: CheckpointManifest = serde_json::from_str(&fs::read_to_string(dir.join(MANIFEST))?)?;
    let mut model = Model::new(manifest.config.clone(), 0)?;
    let names: Vec<String> = model.params.tensors().into_iter().map(|(n, _)| n).collect();
    if names.len() != manifest.tensors.len() {
        return Err(Error::Shape(format!("checkpoint has {} tensors, model has {}", manifest.tensors.len(), names.len())));
    }
    for ((name, slot), entry) in names.iter().zip(model.params.tensors_mut()).zip(&manifest.tensors) {
        if *name != entry.name {
            return Err(Error::Shape(format!("expected tensor {name}, found {}", entry.name)));
        }
        let m = read_tensor(&dir.join(&entry.file))?.to_mat()?;
        if (m.rows(), m.cols()) != (slot.rows(), slot.cols()) {
            return Err(Error::Shape(format!("tensor {name} has shape {}x{}", m.rows(), m.cols())));
        }
        *slot = m;
    }
    Ok(model)
}
