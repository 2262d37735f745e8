use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arrow::{load_dataset, ArrowDataset, Canvas};
use crate::error::{Error, Result};

use super::config::ModelConfig;
use super::model::{accuracy, batch_loss, model_backward, Model, Sample};
use super::patch::Image;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub steps: usize,
    pub seed: u64,
    pub learning_rate: f64,
    /// Use only the first `limit` images of the dataset.
    pub limit: Option<usize>,
}

impl TrainConfig {
    pub fn toy(steps: usize, seed: u64) -> Self {
        TrainConfig { model: ModelConfig::toy(), steps, seed, learning_rate: 1e-2, limit: Some(512) }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// `(step, loss)` before each update, then the loss after the last one.
    pub losses: Vec<(usize, f64)>,
    pub final_accuracy: f64,
    pub model: Model,
}

/// Box-averages a grayscale canvas down to `size` pixels per side.
pub fn downsample(canvas: &Canvas, size: usize) -> Result<Image> {
    if size == 0 || !canvas.size.is_multiple_of(size) {
        return Err(Error::Dataset(format!("cannot reduce {}px images to {size}px", canvas.size)));
    }
    let f = canvas.size / size;
    let mut pixels = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            let mut sum = 0.0;
            for dy in 0..f {
                for dx in 0..f {
                    sum += canvas.get(x * f + dx, y * f + dy) as f64;
                }
            }
            pixels.push(1.0 - sum / (f * f) as f64 / 255.0);
        }
    }
    Ok(Image { height: size, width: size, channels: 1, data: pixels })
}

/// Samples sized for `model`, taking at most `limit` images in index order.
pub fn samples_from(ds: &ArrowDataset, model: &ModelConfig, limit: Option<usize>) -> Result<Vec<Sample>> {
    if model.channels != 1 || model.image_height != model.image_width {
        return Err(Error::Dataset("arrow images are square and single-channel".into()));
    }
    let n = limit.unwrap_or(ds.images.len()).min(ds.images.len());
    ds.images[..n]
        .iter()
        .zip(&ds.labels)
        .map(|(img, &label)| Ok(Sample { image: downsample(img, model.image_height)?, label }))
        .collect()
}

/// Full-batch gradient descent with a constant step.
pub fn train(config: &TrainConfig, samples: &[Sample]) -> Result<TrainReport> {
    if samples.is_empty() {
        return Err(Error::Dataset("no training samples".into()));
    }
    let mut model = Model::new(config.model.clone(), config.seed)?;
    let mut losses = Vec::with_capacity(config.steps + 1);
    for step in 0..config.steps {
        let (loss, grads) = model_backward(&model, samples)?;
        losses.push((step, loss));
        model.params.add_scaled(&grads, -config.learning_rate);
    }
    losses.push((config.steps, batch_loss(&model, samples)?));
    let final_accuracy = accuracy(&model, samples)?;
    Ok(TrainReport { losses, final_accuracy, model })
}

pub fn train_toy(dataset: &Path, config: &TrainConfig) -> Result<TrainReport> {
    let ds = load_dataset(dataset)?;
    train(config, &samples_from(&ds, &config.model, config.limit)?)
}

pub fn write_loss_csv(losses: &[(usize, f64)], mut out: impl Write) -> Result<()> {
    writeln!(out, "step,loss")?;
    for (s, l) in losses {
        writeln!(out, "{s},{l}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn downsample_averages_blocks() {
        let mut c = Canvas::blank(4);
        c.plot(0, 0);
        c.plot(1, 1);
        let img = downsample(&c, 2).unwrap();
        assert_eq!(img.data, vec![0.5, 0.0, 0.0, 0.0]);
        assert!(downsample(&c, 3).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut buf = Vec::new();
        write_loss_csv(&[(0, 0.5), (1, 0.25)], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "step,loss\n0,0.5\n1,0.25\n");
    }
}
