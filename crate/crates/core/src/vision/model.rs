use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::stability::sigmoid;

use super::config::ModelConfig;
use super::layer::{layer_backward, layer_forward, uniform, LayerCache, LayerParams};
use super::patch::{corner_indices, patchify, pool_corners, Image};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub embed: Mat,
    pub embed_bias: Mat,
    pub position: Option<Mat>,
    pub layers: Vec<LayerParams>,
    pub head: Mat,
    pub head_bias: Mat,
}

impl ModelParams {
    pub fn zeros_like(&self) -> Self {
        let z = |m: &Mat| Mat::zeros(m.rows(), m.cols());
        ModelParams {
            embed: z(&self.embed),
            embed_bias: z(&self.embed_bias),
            position: self.position.as_ref().map(z),
            layers: self.layers.iter().map(LayerParams::zeros_like).collect(),
            head: z(&self.head),
            head_bias: z(&self.head_bias),
        }
    }

    /// Named tensors in a fixed order.
    pub fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut t = vec![("embed".to_string(), &self.embed), ("embed_bias".into(), &self.embed_bias)];
        if let Some(p) = &self.position {
            t.push(("position".into(), p));
        }
        for (i, l) in self.layers.iter().enumerate() {
            t.extend(l.tensors().into_iter().map(|(n, m)| (format!("layer{i}.{n}"), m)));
        }
        t.push(("head".into(), &self.head));
        t.push(("head_bias".into(), &self.head_bias));
        t
    }

    /// Same order as [`ModelParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut t = vec![&mut self.embed, &mut self.embed_bias];
        if let Some(p) = &mut self.position {
            t.push(p);
        }
        for l in &mut self.layers {
            t.extend(l.tensors_mut());
        }
        t.push(&mut self.head);
        t.push(&mut self.head_bias);
        t
    }

    pub fn scalar_count(&self) -> usize {
        self.tensors().iter().map(|(_, m)| m.as_slice().len()).sum()
    }

    /// `self += c · other`.
    pub fn add_scaled(&mut self, other: &ModelParams, c: f64) {
        for (a, (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a.as_mut_slice().iter_mut().zip(b.as_slice()).for_each(|(x, y)| *x += c * y);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    pub config: ModelConfig,
    pub params: ModelParams,
}

#[derive(Debug, Clone)]
pub struct Sample {
    pub image: Image,
    pub label: bool,
}

/// Binary cross-entropy on a logit, `softplus(z) − y·z`, evaluated stably.
pub fn bce(logit: f64, label: bool) -> f64 {
    let y = if label { 1.0 } else { 0.0 };
    logit.max(0.0) + (-logit.abs()).exp().ln_1p() - y * logit
}

struct Trace {
    patches: Mat,
    layers: Vec<LayerCache>,
    pooled: Vec<f64>,
    logit: f64,
}

impl Model {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = config.layer.embed_dim;
        let pd = config.patch_dim();
        let (gw, gh) = config.grid();
        let embed = uniform(pd, d, pd, &mut rng);
        // Blank patches must not embed to zero, or corner queries vanish.
        let embed_bias = uniform(1, d, 1, &mut rng);
        let layers =
            (0..config.depth).map(|i| LayerParams::init(&config.layer, config.layer.block_mode(i), &mut rng)).collect();
        let position = config.positional_embedding.then(|| Mat::zeros(gw * gh, d));
        let head = uniform(d, 1, d, &mut rng);
        let params = ModelParams { embed, embed_bias, position, layers, head, head_bias: Mat::zeros(1, 1) };
        Ok(Model { config, params })
    }

    fn check_image(&self, img: &Image) -> Result<()> {
        let c = &self.config;
        if (img.height, img.width, img.channels) != (c.image_height, c.image_width, c.channels) {
            return Err(Error::Shape(format!(
                "image is {}x{}x{}, model expects {}x{}x{}",
                img.height, img.width, img.channels, c.image_height, c.image_width, c.channels
            )));
        }
        Ok(())
    }

    fn trace(&self, img: &Image) -> Result<Trace> {
        self.check_image(img)?;
        let (gw, gh) = self.config.grid();
        let p = &self.params;
        let patches = patchify(img, self.config.patch_size)?;
        let mut x = patches.matmul(&p.embed);
        for i in 0..x.rows() {
            for j in 0..x.cols() {
                x[(i, j)] += p.embed_bias[(0, j)] + p.position.as_ref().map_or(0.0, |pos| pos[(i, j)]);
            }
        }
        let mut layers = Vec::with_capacity(p.layers.len());
        for (i, lp) in p.layers.iter().enumerate() {
            let cache = layer_forward(&self.config.layer, self.config.layer.block_mode(i), lp, &x, gw, gh)?;
            x = cache.output.clone();
            layers.push(cache);
        }
        let pooled = pool_corners(&x, gw, gh)?;
        let logit = pooled.iter().enumerate().map(|(j, z)| z * p.head[(j, 0)]).sum::<f64>() + p.head_bias[(0, 0)];
        Ok(Trace { patches, layers, pooled, logit })
    }

    pub fn logit(&self, img: &Image) -> Result<f64> {
        Ok(self.trace(img)?.logit)
    }

    /// Gradients of `scale · bce` for one sample.
    fn sample_backward(&self, s: &Sample, scale: f64) -> Result<(f64, ModelParams)> {
        let t = self.trace(&s.image)?;
        let loss = bce(t.logit, s.label);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss);
        }
        let p = &self.params;
        let mut g = p.zeros_like();
        let dlogit = scale * (sigmoid(t.logit) - if s.label { 1.0 } else { 0.0 });
        g.head_bias[(0, 0)] = dlogit;
        for (j, z) in t.pooled.iter().enumerate() {
            g.head[(j, 0)] = z * dlogit;
        }
        let (gw, gh) = self.config.grid();
        let d = self.config.layer.embed_dim;
        let mut dx = Mat::zeros(gw * gh, d);
        for n in corner_indices(gw, gh) {
            for j in 0..d {
                dx[(n, j)] += p.head[(j, 0)] * dlogit / 4.0;
            }
        }
        for (i, cache) in t.layers.iter().enumerate().rev() {
            let (dprev, gl) = layer_backward(&self.config.layer, &p.layers[i], cache, &dx)?;
            g.layers[i] = gl;
            dx = dprev;
        }
        g.embed = t.patches.transpose().matmul(&dx);
        for i in 0..dx.rows() {
            for j in 0..d {
                g.embed_bias[(0, j)] += dx[(i, j)];
            }
        }
        if let Some(pos) = &mut g.position {
            *pos = dx;
        }
        Ok((loss, g))
    }
}

/// Mean binary cross-entropy over `batch`.
pub fn batch_loss(model: &Model, batch: &[Sample]) -> Result<f64> {
    let losses = batch.par_iter().map(|s| Ok(bce(model.logit(&s.image)?, s.label))).collect::<Result<Vec<f64>>>()?;
    let loss = losses.iter().sum::<f64>() / batch.len() as f64;
    if !loss.is_finite() {
        return Err(Error::NonFiniteLoss);
    }
    Ok(loss)
}

/// Mean loss and its exact gradient. Samples are processed in parallel and
/// their gradients summed in batch order.
pub fn model_backward(model: &Model, batch: &[Sample]) -> Result<(f64, ModelParams)> {
    if batch.is_empty() {
        return Err(Error::Dataset("empty batch".into()));
    }
    let scale = 1.0 / batch.len() as f64;
    let parts = batch.par_iter().map(|s| model.sample_backward(s, scale)).collect::<Result<Vec<_>>>()?;
    let mut grads = model.params.zeros_like();
    let mut loss = 0.0;
    for (l, g) in &parts {
        loss += l;
        grads.add_scaled(g, 1.0);
    }
    Ok((loss * scale, grads))
}

/// Fraction of samples whose sign of the logit matches the label.
pub fn accuracy(model: &Model, batch: &[Sample]) -> Result<f64> {
    let hits = batch
        .par_iter()
        .map(|s| Ok(((model.logit(&s.image)? > 0.0) == s.label) as usize))
        .collect::<Result<Vec<usize>>>()?;
    Ok(hits.iter().sum::<usize>() as f64 / batch.len().max(1) as f64)
}
