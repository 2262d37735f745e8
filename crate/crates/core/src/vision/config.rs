use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stabilization mode requested for the stack of blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    P,
    D,
    Alternating,
}

/// Mode of a single block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockMode {
    P,
    D,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pooling {
    CornerPatches,
}

/// Gate pre-activation channels computed per head and direction cover.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    SourceRight,
    SourceDown,
    MarkRight,
    MarkDown,
    /// P-mode magnitude `γ`.
    Transition,
    /// P-mode split `α` between the straight and turning transitions.
    Orientation,
    /// D-mode transitions; horizontal-in to vertical-out is masked.
    TransitionRR,
    TransitionDR,
    TransitionDD,
}

const P_CHANNELS: [Channel; 6] = [
    Channel::SourceRight,
    Channel::SourceDown,
    Channel::MarkRight,
    Channel::MarkDown,
    Channel::Transition,
    Channel::Orientation,
];

const D_CHANNELS: [Channel; 7] = [
    Channel::SourceRight,
    Channel::SourceDown,
    Channel::MarkRight,
    Channel::MarkDown,
    Channel::TransitionRR,
    Channel::TransitionDR,
    Channel::TransitionDD,
];

impl BlockMode {
    pub fn channels(self) -> &'static [Channel] {
        match self {
            BlockMode::P => &P_CHANNELS,
            BlockMode::D => &D_CHANNELS,
        }
    }
}

impl Channel {
    pub fn is_transition(self) -> bool {
        matches!(self, Channel::Transition | Channel::TransitionRR | Channel::TransitionDR | Channel::TransitionDD)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    pub embed_dim: usize,
    pub num_heads: usize,
    pub key_dim: usize,
    pub value_dim: usize,
    pub mode: Mode,
    pub source_bias: f64,
    pub mark_bias: f64,
    pub direct_bias: f64,
    pub transition_bias: f64,
    pub transition_scale: f64,
    pub orientation_bias_range: [f64; 2],
    pub rmsnorm_eps: f64,
    pub pooling: Pooling,
    /// One set of gate projections for all four direction covers.
    pub share_direction_weights: bool,
}

impl LayerConfig {
    pub fn new(embed_dim: usize, num_heads: usize, key_dim: usize, value_dim: usize) -> Self {
        LayerConfig {
            embed_dim,
            num_heads,
            key_dim,
            value_dim,
            mode: Mode::Alternating,
            source_bias: -4.0,
            mark_bias: -4.0,
            direct_bias: -6.0,
            transition_bias: 1.0,
            transition_scale: 5.0,
            orientation_bias_range: [-2.0, 2.0],
            rmsnorm_eps: 1e-5,
            pooling: Pooling::CornerPatches,
            share_direction_weights: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.num_heads == 0 || self.key_dim == 0 || self.value_dim == 0 {
            return Err(Error::Shape("layer dimensions must be positive".into()));
        }
        if !self.embed_dim.is_multiple_of(self.num_heads) {
            return Err(Error::Shape(format!(
                "embed_dim {} is not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if !(self.rmsnorm_eps > 0.0) {
            return Err(Error::Range("rmsnorm_eps must be positive".into()));
        }
        Ok(())
    }

    /// Mode of block `index`; alternation starts with P.
    pub fn block_mode(&self, index: usize) -> BlockMode {
        match self.mode {
            Mode::P => BlockMode::P,
            Mode::D => BlockMode::D,
            Mode::Alternating if index.is_multiple_of(2) => BlockMode::P,
            Mode::Alternating => BlockMode::D,
        }
    }

    pub fn direction_sets(&self) -> usize {
        if self.share_direction_weights {
            1
        } else {
            4
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub image_height: usize,
    pub image_width: usize,
    pub channels: usize,
    pub patch_size: usize,
    pub depth: usize,
    pub positional_embedding: bool,
    pub layer: LayerConfig,
}

impl ModelConfig {
    /// Two alternating blocks on 16×16 grayscale images with 4×4 patches.
    pub fn toy() -> Self {
        ModelConfig {
            image_height: 16,
            image_width: 16,
            channels: 1,
            patch_size: 4,
            depth: 2,
            positional_embedding: false,
            layer: LayerConfig::new(16, 2, 4, 4),
        }
    }

    pub fn grid(&self) -> (usize, usize) {
        (self.image_width / self.patch_size, self.image_height / self.patch_size)
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * self.channels
    }

    pub fn validate(&self) -> Result<()> {
        self.layer.validate()?;
        let p = self.patch_size;
        if p == 0 || !self.image_height.is_multiple_of(p) || !self.image_width.is_multiple_of(p) {
            return Err(Error::Shape(format!(
                "image {}x{} is not divisible into {p}x{p} patches",
                self.image_width, self.image_height
            )));
        }
        let (w, h) = self.grid();
        if w < 2 || h < 2 {
            return Err(Error::Shape("corner pooling needs at least a 2x2 token grid".into()));
        }
        if self.channels == 0 {
            return Err(Error::Shape("images need at least one channel".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alternation_starts_with_p() {
        let c = LayerConfig::new(8, 2, 2, 2);
        assert_eq!(c.block_mode(0), BlockMode::P);
        assert_eq!(c.block_mode(1), BlockMode::D);
        assert_eq!(c.block_mode(2), BlockMode::P);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(LayerConfig::new(10, 3, 2, 2).validate().is_err());
        let mut m = ModelConfig::toy();
        m.patch_size = 3;
        assert!(m.validate().is_err());
        m.patch_size = 8;
        assert!(m.validate().is_ok());
        m.patch_size = 16;
        assert!(m.validate().is_err());
    }
}
