use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{multidirectional_2d, DirectionCombo, GridGates};
use crate::kernel::{backward_recurrent, Qkv, StmParams};
use crate::linalg::Mat;
use crate::stability::{linspace, sigmoid};

use super::config::{BlockMode, Channel, LayerConfig};
use super::norm::{apply_gain, rms_backward, rms_forward, RmsOut};

/// Weights of one pLSTM block. Gate projections map a normalized token to
/// `num_heads × channels` pre-activations, one set per direction cover
/// (or one shared set).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerParams {
    pub norm_gain: Mat,
    pub query: Mat,
    pub key: Mat,
    pub value: Mat,
    pub gate_weight: Vec<Mat>,
    pub gate_bias: Vec<Mat>,
    pub direct_weight: Mat,
    pub direct_bias: Mat,
    pub head_gain: Mat,
    pub out: Mat,
}

pub(crate) fn uniform(rows: usize, cols: usize, fan_in: usize, rng: &mut impl Rng) -> Mat {
    let bound = (3.0 / fan_in as f64).sqrt();
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-bound..=bound))
}

impl LayerParams {
    /// Random Q/K/V/output projections, zero gate weights and the configured
    /// gate biases. Orientation biases are spread linearly across heads.
    pub fn init(cfg: &LayerConfig, mode: BlockMode, rng: &mut impl Rng) -> Self {
        let (d, h, k, v) = (cfg.embed_dim, cfg.num_heads, cfg.key_dim, cfg.value_dim);
        let chans = mode.channels();
        let orientation = linspace(cfg.orientation_bias_range[0], cfg.orientation_bias_range[1], h);
        let bias = Mat::from_fn(1, h * chans.len(), |_, j| match chans[j % chans.len()] {
            Channel::SourceRight | Channel::SourceDown => cfg.source_bias,
            Channel::MarkRight | Channel::MarkDown => cfg.mark_bias,
            Channel::Orientation => orientation[j / chans.len()],
            _ => cfg.transition_bias,
        });
        let sets = cfg.direction_sets();
        LayerParams {
            norm_gain: Mat::from_fn(1, d, |_, _| 1.0),
            query: uniform(d, h * k, d, rng),
            key: uniform(d, h * k, d, rng),
            value: uniform(d, h * v, d, rng),
            gate_weight: vec![Mat::zeros(d, h * chans.len()); sets],
            gate_bias: vec![bias; sets],
            direct_weight: Mat::zeros(d, h),
            direct_bias: Mat::from_fn(1, h, |_, _| cfg.direct_bias),
            head_gain: Mat::from_fn(1, h * v, |_, _| 1.0),
            out: uniform(h * v, d, h * v, rng),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let z = |m: &Mat| Mat::zeros(m.rows(), m.cols());
        LayerParams {
            norm_gain: z(&self.norm_gain),
            query: z(&self.query),
            key: z(&self.key),
            value: z(&self.value),
            gate_weight: self.gate_weight.iter().map(z).collect(),
            gate_bias: self.gate_bias.iter().map(z).collect(),
            direct_weight: z(&self.direct_weight),
            direct_bias: z(&self.direct_bias),
            head_gain: z(&self.head_gain),
            out: z(&self.out),
        }
    }

    pub fn tensors(&self) -> Vec<(String, &Mat)> {
        let mut t = vec![
            ("norm_gain".to_string(), &self.norm_gain),
            ("query".into(), &self.query),
            ("key".into(), &self.key),
            ("value".into(), &self.value),
        ];
        for (i, (w, b)) in self.gate_weight.iter().zip(&self.gate_bias).enumerate() {
            t.push((format!("gate_weight{i}"), w));
            t.push((format!("gate_bias{i}"), b));
        }
        t.extend([
            ("direct_weight".to_string(), &self.direct_weight),
            ("direct_bias".into(), &self.direct_bias),
            ("head_gain".into(), &self.head_gain),
            ("out".into(), &self.out),
        ]);
        t
    }

    /// Same order as [`LayerParams::tensors`].
    pub fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut t = vec![&mut self.norm_gain, &mut self.query, &mut self.key, &mut self.value];
        for (w, b) in self.gate_weight.iter_mut().zip(self.gate_bias.iter_mut()) {
            t.push(w);
            t.push(b);
        }
        t.extend([&mut self.direct_weight, &mut self.direct_bias, &mut self.head_gain, &mut self.out]);
        t
    }
}

fn activate(c: Channel, a: f64) -> f64 {
    if c.is_transition() {
        a.tanh()
    } else {
        sigmoid(a)
    }
}

/// Derivative expressed through the activation value.
fn activation_slope(c: Channel, y: f64) -> f64 {
    if c.is_transition() {
        1.0 - y * y
    } else {
        y * (1.0 - y)
    }
}

fn pre_scale(cfg: &LayerConfig, c: Channel) -> f64 {
    if c.is_transition() {
        cfg.transition_scale
    } else {
        1.0
    }
}

fn columns(m: &Mat, start: usize, len: usize) -> Mat {
    Mat::from_fn(m.rows(), len, |i, j| m[(i, start + j)])
}

fn add_columns(m: &mut Mat, start: usize, block: &Mat) {
    for i in 0..block.rows() {
        for j in 0..block.cols() {
            m[(i, start + j)] += block[(i, j)];
        }
    }
}

fn column_sums(m: &Mat) -> Mat {
    let mut s = Mat::zeros(1, m.cols());
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            s[(0, j)] += m[(i, j)];
        }
    }
    s
}

/// Everything the backward pass needs from a forward evaluation.
#[derive(Debug, Clone)]
pub struct LayerCache {
    pub mode: BlockMode,
    pub width: usize,
    pub height: usize,
    pub input: Mat,
    input_norm: RmsOut,
    pub normed: Mat,
    /// Per-head query, key and value.
    pub qkv: Vec<Qkv>,
    /// Activated gate channels, one matrix per direction set.
    pub activations: Vec<Mat>,
    pub direct: Mat,
    /// Induced grid gates, `[head][cover]`.
    pub covers: Vec<Vec<(DirectionCombo, GridGates)>>,
    /// Concatenated head outputs before the multi-head norm.
    pub mixed: Mat,
    head_norm: RmsOut,
    pub output: Mat,
}

impl LayerCache {
    /// Head outputs after the multi-head norm and before the gain.
    pub fn head_normalized(&self) -> &Mat {
        &self.head_norm.normalized
    }
}

/// Grid gates of one head and cover from the activated channels.
fn cover_gates(
    mode: BlockMode,
    act: &Mat,
    direct: &Mat,
    head: usize,
    combo: DirectionCombo,
    width: usize,
    height: usize,
) -> GridGates {
    let chans = mode.channels();
    let base = head * chans.len();
    let mut g = GridGates::constant(width, height, 0.0);
    for n in 0..width * height {
        for (ci, &c) in chans.iter().enumerate() {
            let y = act[(n, base + ci)];
            match c {
                Channel::SourceRight => g.source_right[n] = y,
                Channel::SourceDown => g.source_down[n] = y,
                Channel::MarkRight => g.mark_right[n] = y,
                Channel::MarkDown => g.mark_down[n] = y,
                Channel::TransitionRR => g.t_rr[n] = y,
                Channel::TransitionDR => g.t_dr[n] = y,
                Channel::TransitionDD => g.t_dd[n] = y,
                Channel::Transition | Channel::Orientation => {}
            }
        }
        if mode == BlockMode::P {
            let gamma = act[(n, base + 4)];
            let alpha = act[(n, base + 5)];
            g.t_rr[n] = gamma * alpha;
            g.t_dr[n] = gamma * alpha;
            g.t_rd[n] = gamma * (1.0 - alpha);
            g.t_dd[n] = gamma * (1.0 - alpha);
        }
        if combo == DirectionCombo::DownRight {
            g.direct[n] = direct[(n, head)];
        }
    }
    g
}

pub fn layer_forward(
    cfg: &LayerConfig,
    mode: BlockMode,
    params: &LayerParams,
    tokens: &Mat,
    width: usize,
    height: usize,
) -> Result<LayerCache> {
    let (d, heads, kd, vd) = (cfg.embed_dim, cfg.num_heads, cfg.key_dim, cfg.value_dim);
    if tokens.rows() != width * height || tokens.cols() != d {
        return Err(Error::Shape(format!(
            "tokens are {}x{}, expected {}x{d}",
            tokens.rows(),
            tokens.cols(),
            width * height
        )));
    }
    let chans = mode.channels();
    if params.gate_bias.len() != cfg.direction_sets() || params.gate_bias[0].cols() != heads * chans.len() {
        return Err(Error::Shape("gate projections do not match the block mode".into()));
    }
    let input_norm = rms_forward(tokens, d, cfg.rmsnorm_eps);
    let normed = apply_gain(&input_norm.normalized, &params.norm_gain);
    let (q, k, v) = (normed.matmul(&params.query), normed.matmul(&params.key), normed.matmul(&params.value));
    let qkv: Vec<Qkv> = (0..heads)
        .map(|h| Qkv { query: columns(&q, h * kd, kd), key: columns(&k, h * kd, kd), value: columns(&v, h * vd, vd) })
        .collect();

    let activations: Vec<Mat> = params
        .gate_weight
        .iter()
        .zip(&params.gate_bias)
        .map(|(w, b)| {
            let pre = normed.matmul(w);
            Mat::from_fn(pre.rows(), pre.cols(), |n, j| {
                let c = chans[j % chans.len()];
                activate(c, pre_scale(cfg, c) * pre[(n, j)] + b[(0, j)])
            })
        })
        .collect();
    let dpre = normed.matmul(&params.direct_weight);
    let direct = Mat::from_fn(dpre.rows(), heads, |n, h| sigmoid(dpre[(n, h)] + params.direct_bias[(0, h)]));

    let set_of = |ci: usize| if cfg.share_direction_weights { 0 } else { ci };
    let covers: Vec<Vec<(DirectionCombo, GridGates)>> = (0..heads)
        .map(|h| {
            DirectionCombo::ALL
                .iter()
                .enumerate()
                .map(|(ci, &combo)| (combo, cover_gates(mode, &activations[set_of(ci)], &direct, h, combo, width, height)))
                .collect()
        })
        .collect();

    let mut mixed = Mat::zeros(width * height, heads * vd);
    for h in 0..heads {
        let out = multidirectional_2d(&covers[h], &qkv[h])?;
        add_columns(&mut mixed, h * vd, &out);
    }
    let head_norm = rms_forward(&mixed, vd, cfg.rmsnorm_eps);
    let mut output = apply_gain(&head_norm.normalized, &params.head_gain).matmul(&params.out);
    output.add_assign(tokens);
    Ok(LayerCache {
        mode,
        width,
        height,
        input: tokens.clone(),
        input_norm,
        normed,
        qkv,
        activations,
        direct,
        covers,
        mixed,
        head_norm,
        output,
    })
}

/// Cotangent of the block input and gradients of all block weights for the
/// output cotangent `d_output`.
pub fn layer_backward(
    cfg: &LayerConfig,
    params: &LayerParams,
    cache: &LayerCache,
    d_output: &Mat,
) -> Result<(Mat, LayerParams)> {
    let (heads, kd, vd) = (cfg.num_heads, cfg.key_dim, cfg.value_dim);
    let (w, h) = (cache.width, cache.height);
    let n = w * h;
    let chans = cache.mode.channels();
    let nc = chans.len();
    let mut g = params.zeros_like();
    let mut dx = d_output.clone();

    let y = apply_gain(&cache.head_norm.normalized, &params.head_gain);
    g.out = y.transpose().matmul(d_output);
    let dy = d_output.matmul(&params.out.transpose());
    g.head_gain = column_sums(&Mat::from_fn(n, heads * vd, |i, j| cache.head_norm.normalized[(i, j)] * dy[(i, j)]));
    let dmixed = rms_backward(&apply_gain(&dy, &params.head_gain), &cache.head_norm, vd);

    let mut dq = Mat::zeros(n, heads * kd);
    let mut dk = Mat::zeros(n, heads * kd);
    let mut dv = Mat::zeros(n, heads * vd);
    let mut dact: Vec<Mat> = cache.activations.iter().map(|a| Mat::zeros(a.rows(), a.cols())).collect();
    let mut ddirect = Mat::zeros(n, heads);
    for hd in 0..heads {
        let dh = columns(&dmixed, hd * vd, vd);
        for (ci, (combo, gates)) in cache.covers[hd].iter().enumerate() {
            let set = if cfg.share_direction_weights { 0 } else { ci };
            let (dag, dag_gates) = gates.to_dag_gates(*combo);
            let stm = StmParams { gates: dag_gates, qkv: cache.qkv[hd].clone() };
            let grads = backward_recurrent(&dag, &stm, &dh)?;
            add_columns(&mut dq, hd * kd, &grads.params.qkv.query);
            add_columns(&mut dk, hd * kd, &grads.params.qkv.key);
            add_columns(&mut dv, hd * vd, &grads.params.qkv.value);
            let gg = GridGates::from_dag_slots(w, h, *combo, &grads.params.gates);
            let act = &cache.activations[set];
            let da = &mut dact[set];
            let base = hd * nc;
            for node in 0..n {
                for (ci2, &c) in chans.iter().enumerate() {
                    let col = base + ci2;
                    da[(node, col)] += match c {
                        Channel::SourceRight => gg.source_right[node],
                        Channel::SourceDown => gg.source_down[node],
                        Channel::MarkRight => gg.mark_right[node],
                        Channel::MarkDown => gg.mark_down[node],
                        Channel::TransitionRR => gg.t_rr[node],
                        Channel::TransitionDR => gg.t_dr[node],
                        Channel::TransitionDD => gg.t_dd[node],
                        Channel::Transition => {
                            let alpha = act[(node, base + 5)];
                            (gg.t_rr[node] + gg.t_dr[node]) * alpha + (gg.t_rd[node] + gg.t_dd[node]) * (1.0 - alpha)
                        }
                        Channel::Orientation => {
                            let gamma = act[(node, base + 4)];
                            gamma * (gg.t_rr[node] + gg.t_dr[node] - gg.t_rd[node] - gg.t_dd[node])
                        }
                    };
                }
                if *combo == DirectionCombo::DownRight {
                    ddirect[(node, hd)] += gg.direct[node];
                }
            }
        }
    }

    let mut du = Mat::zeros(n, cfg.embed_dim);
    let ut = cache.normed.transpose();
    for (s, da) in dact.iter().enumerate() {
        let act = &cache.activations[s];
        let dpre_b = Mat::from_fn(n, da.cols(), |i, j| da[(i, j)] * activation_slope(chans[j % nc], act[(i, j)]));
        let dpre_w = Mat::from_fn(n, da.cols(), |i, j| dpre_b[(i, j)] * pre_scale(cfg, chans[j % nc]));
        g.gate_bias[s] = column_sums(&dpre_b);
        g.gate_weight[s] = ut.matmul(&dpre_w);
        du.add_assign(&dpre_w.matmul(&params.gate_weight[s].transpose()));
    }
    let dd = Mat::from_fn(n, heads, |i, j| {
        let s = cache.direct[(i, j)];
        ddirect[(i, j)] * s * (1.0 - s)
    });
    g.direct_bias = column_sums(&dd);
    g.direct_weight = ut.matmul(&dd);
    du.add_assign(&dd.matmul(&params.direct_weight.transpose()));
    for (dp, wp, gp) in [(&dq, &params.query, &mut g.query), (&dk, &params.key, &mut g.key), (&dv, &params.value, &mut g.value)] {
        *gp = ut.matmul(dp);
        du.add_assign(&dp.matmul(&wp.transpose()));
    }

    g.norm_gain = column_sums(&Mat::from_fn(n, cfg.embed_dim, |i, j| cache.input_norm.normalized[(i, j)] * du[(i, j)]));
    dx.add_assign(&rms_backward(&apply_gain(&du, &params.norm_gain), &cache.input_norm, cfg.embed_dim));
    Ok((dx, g))
}
