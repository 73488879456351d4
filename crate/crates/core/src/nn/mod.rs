//! VGG-style patch networks trained from scratch in double precision.
//!
//! Two heads share one backbone layout: a classification head emitting the
//! probability that a patch holds a storm center, and a localization head
//! regressing the in-patch `(row, col)` of that center.

mod layers;
mod loss;
mod optim;
mod persist;
mod train;

pub use loss::{bce_loss, mae_loss};
pub use optim::{AdamW, OptimConfig};
pub use persist::{load_network, read_network, save_network, write_network};
pub use train::{batch_loss_and_grad, fit, gradient_check, train_step, FitConfig, FitReport};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{NormStats, PatchSample};
use crate::exec::Exec;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("invalid architecture: {0}")]
    InvalidArch(String),
    #[error("input has {got} values, network expects {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("length mismatch: {0} predictions vs {1} targets")]
    LengthMismatch(usize, usize),
    #[error("{0}")]
    WrongHead(String),
    #[error("loss became NaN at step {step}: {detail}")]
    NanLoss { step: u64, detail: String },
    #[error("empty batch")]
    EmptyBatch,
    #[error("model file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Head {
    Classification,
    Localization,
}

impl Head {
    pub fn outputs(self) -> usize {
        match self {
            Head::Classification => 1,
            Head::Localization => 2,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Head::Classification => "classification",
            Head::Localization => "localization",
        }
    }
}

/// Network layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub n_conv_blocks: usize,
    pub convs_per_block: usize,
    pub base_filters: usize,
    pub filter_growth: usize,
    pub max_filters: usize,
    pub linear_widths: Vec<usize>,
    pub head: Head,
    pub in_channels: usize,
    pub input_size: usize,
}

impl ArchConfig {
    /// Six blocks of three convolutions, 32 → 1024 filters, linear blocks
    /// of 1024, 512, 512 and 256 units.
    pub fn paper(head: Head) -> Self {
        Self {
            n_conv_blocks: 6,
            convs_per_block: 3,
            base_filters: 32,
            filter_growth: 2,
            max_filters: 1024,
            linear_widths: vec![1024, 512, 512, 256],
            head,
            in_channels: 2,
            input_size: 40,
        }
    }

    /// Small layout that trains in minutes on a CPU.
    pub fn desk(head: Head) -> Self {
        Self {
            n_conv_blocks: 3,
            convs_per_block: 2,
            base_filters: 8,
            filter_growth: 2,
            max_filters: 1024,
            linear_widths: vec![64, 32],
            head,
            in_channels: 2,
            input_size: 40,
        }
    }

    pub fn input_len(&self) -> usize {
        self.in_channels * self.input_size * self.input_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum LayerKind {
    Conv { cin: usize, cout: usize, w: usize, b: usize },
    Relu,
    Pool,
    Linear { nin: usize, nout: usize, w: usize, b: usize },
}

/// One layer with its input shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LayerPlan {
    pub kind: LayerKind,
    pub c: usize,
    pub h: usize,
    pub w: usize,
}

impl LayerPlan {
    fn in_len(&self) -> usize {
        self.c * self.h * self.w
    }

    fn out_shape(&self) -> (usize, usize, usize) {
        match self.kind {
            LayerKind::Conv { cout, .. } => (cout, self.h, self.w),
            LayerKind::Relu => (self.c, self.h, self.w),
            LayerKind::Pool => (self.c, layers::pooled(self.h), layers::pooled(self.w)),
            LayerKind::Linear { nout, .. } => (nout, 1, 1),
        }
    }
}

fn plan(cfg: &ArchConfig) -> Result<(Vec<LayerPlan>, usize), NnError> {
    let bad = |m: String| Err(NnError::InvalidArch(m));
    if cfg.n_conv_blocks == 0 || cfg.convs_per_block == 0 || cfg.base_filters == 0 || cfg.filter_growth == 0 {
        return bad("block, conv, filter and growth counts must be at least 1".into());
    }
    if cfg.in_channels == 0 || cfg.input_size == 0 || cfg.max_filters == 0 {
        return bad("input shape and filter cap must be positive".into());
    }
    if cfg.linear_widths.contains(&0) {
        return bad("linear widths must be positive".into());
    }
    let mut out = Vec::new();
    let mut off = 0usize;
    let (mut c, mut h, mut w) = (cfg.in_channels, cfg.input_size, cfg.input_size);
    let mut f = cfg.base_filters.min(cfg.max_filters);
    for block in 0..cfg.n_conv_blocks {
        for _ in 0..cfg.convs_per_block {
            let kind = LayerKind::Conv { cin: c, cout: f, w: off, b: off + f * c * 9 };
            off += f * c * 9 + f;
            out.push(LayerPlan { kind, c, h, w });
            c = f;
            out.push(LayerPlan { kind: LayerKind::Relu, c, h, w });
        }
        if h < 2 && w < 2 {
            return bad(format!("block {} would pool a {h}x{w} map", block + 1));
        }
        out.push(LayerPlan { kind: LayerKind::Pool, c, h, w });
        h = layers::pooled(h);
        w = layers::pooled(w);
        f = (f * cfg.filter_growth).min(cfg.max_filters);
    }
    let mut n = c * h * w;
    let widths = cfg.linear_widths.iter().copied().chain(std::iter::once(cfg.head.outputs()));
    let last = cfg.linear_widths.len();
    for (k, width) in widths.enumerate() {
        let kind = LayerKind::Linear { nin: n, nout: width, w: off, b: off + width * n };
        off += width * n + width;
        out.push(LayerPlan { kind, c: n, h: 1, w: 1 });
        n = width;
        if k < last {
            out.push(LayerPlan { kind: LayerKind::Relu, c: n, h: 1, w: 1 });
        }
    }
    Ok((out, off))
}

/// Trainable network: layout, flat parameter vector in declaration order,
/// and the input standardization it was trained with.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub cfg: ArchConfig,
    pub params: Vec<f64>,
    pub norm: NormStats,
    pub seed: u64,
    pub(crate) plan: Vec<LayerPlan>,
}

/// Activations kept for the backward pass.
pub(crate) struct Cache {
    acts: Vec<Vec<f64>>,
    argmax: Vec<Vec<usize>>,
}

impl Network {
    /// Builds a network with seeded initial weights: He-normal (fan-in) for
    /// classification, N(0, 0.03) for localization, zero biases.
    pub fn build(cfg: ArchConfig, seed: u64) -> Result<Self, NnError> {
        let (plan, n) = plan(&cfg)?;
        let mut params = vec![0.0; n];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for l in &plan {
            let (w, len, fan_in) = match l.kind {
                LayerKind::Conv { cin, cout, w, .. } => (w, cout * cin * 9, cin * 9),
                LayerKind::Linear { nin, nout, w, .. } => (w, nout * nin, nin),
                _ => continue,
            };
            let std = match cfg.head {
                Head::Classification => (2.0 / fan_in as f64).sqrt(),
                Head::Localization => 0.03,
            };
            let dist = Normal::new(0.0, std).expect("finite std");
            for p in &mut params[w..w + len] {
                *p = dist.sample(&mut rng);
            }
        }
        Ok(Self { cfg, params, norm: NormStats::default(), seed, plan })
    }

    pub(crate) fn from_parts(cfg: ArchConfig, params: Vec<f64>, norm: NormStats, seed: u64) -> Result<Self, NnError> {
        let (plan, n) = plan(&cfg)?;
        if params.len() != n {
            return Err(NnError::Format(format!("expected {n} parameters, found {}", params.len())));
        }
        Ok(Self { cfg, params, norm, seed, plan })
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn head(&self) -> Head {
        self.cfg.head
    }

    pub(crate) fn forward_cached(&self, x: &[f64]) -> Result<Cache, NnError> {
        if x.len() != self.cfg.input_len() {
            return Err(NnError::ShapeMismatch { expected: self.cfg.input_len(), got: x.len() });
        }
        let mut acts = Vec::with_capacity(self.plan.len() + 1);
        let mut argmax = Vec::new();
        acts.push(x.to_vec());
        for l in &self.plan {
            let input = acts.last().expect("input present");
            let (oc, oh, ow) = l.out_shape();
            let mut out = vec![0.0; oc * oh * ow];
            match l.kind {
                LayerKind::Conv { cin, cout, w, b } => layers::conv3x3_forward(
                    input,
                    cin,
                    l.h,
                    l.w,
                    &self.params[w..w + cout * cin * 9],
                    &self.params[b..b + cout],
                    cout,
                    &mut out,
                ),
                LayerKind::Relu => {
                    for (o, &v) in out.iter_mut().zip(input) {
                        *o = v.max(0.0);
                    }
                }
                LayerKind::Pool => {
                    let mut am = vec![0usize; out.len()];
                    layers::maxpool_forward(input, l.c, l.h, l.w, &mut out, &mut am);
                    argmax.push(am);
                }
                LayerKind::Linear { nin, nout, w, b } => layers::linear_forward(
                    input,
                    &self.params[w..w + nin * nout],
                    &self.params[b..b + nout],
                    nout,
                    &mut out,
                ),
            }
            acts.push(out);
        }
        Ok(Cache { acts, argmax })
    }

    /// Raw head output: the logit for classification, `(row, col)` for
    /// localization.
    pub fn forward_raw(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        Ok(self.forward_cached(x)?.acts.pop().expect("output present"))
    }

    /// Head output after the head activation (sigmoid for classification).
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, NnError> {
        let mut y = self.forward_raw(x)?;
        if self.cfg.head == Head::Classification {
            y[0] = sigmoid(y[0]);
        }
        Ok(y)
    }

    /// Adds the parameter gradient for one sample into `grad`, given the
    /// gradient of the loss with respect to the raw head output.
    pub(crate) fn backward(&self, cache: &Cache, dout: &[f64], grad: &mut [f64]) {
        let mut g = dout.to_vec();
        let mut pool_k = cache.argmax.len();
        for (k, l) in self.plan.iter().enumerate().rev() {
            let input = &cache.acts[k];
            let mut din = vec![0.0; l.in_len()];
            match l.kind {
                LayerKind::Conv { cin, cout, w, b } => {
                    let (gw, gb) = grad.split_at_mut(b);
                    layers::conv3x3_backward(
                        input,
                        cin,
                        l.h,
                        l.w,
                        &self.params[w..w + cout * cin * 9],
                        cout,
                        &g,
                        &mut gw[w..w + cout * cin * 9],
                        &mut gb[..cout],
                        &mut din,
                    );
                }
                LayerKind::Relu => {
                    for ((d, &gv), &x) in din.iter_mut().zip(&g).zip(input) {
                        *d = if x > 0.0 { gv } else { 0.0 };
                    }
                }
                LayerKind::Pool => {
                    pool_k -= 1;
                    layers::maxpool_backward(&g, &cache.argmax[pool_k], &mut din);
                }
                LayerKind::Linear { nin, nout, w, b } => {
                    let (gw, gb) = grad.split_at_mut(b);
                    layers::linear_backward(
                        input,
                        &self.params[w..w + nin * nout],
                        &g,
                        &mut gw[w..w + nin * nout],
                        &mut gb[..nout],
                        &mut din,
                    );
                }
            }
            g = din;
        }
    }

    fn check_head(&self, want: Head) -> Result<(), NnError> {
        if self.cfg.head != want {
            return Err(NnError::WrongHead(format!(
                "network has a {} head, {} requested",
                self.cfg.head.as_str(),
                want.as_str()
            )));
        }
        Ok(())
    }

    fn standardized(&self, p: &PatchSample) -> Result<Vec<f64>, NnError> {
        if p.pixels.len() != self.cfg.input_len() {
            return Err(NnError::ShapeMismatch { expected: self.cfg.input_len(), got: p.pixels.len() });
        }
        Ok(self.norm.apply(&p.pixels))
    }

    /// Storm probability per patch.
    pub fn predict_scores(&self, patches: &[PatchSample], exec: Exec) -> Result<Vec<f64>, NnError> {
        self.check_head(Head::Classification)?;
        exec.map(patches, |p| Ok(self.forward(&self.standardized(p)?)?[0])).into_iter().collect()
    }

    /// Unclamped in-patch `(row, col)` per patch.
    pub fn predict_coords(&self, patches: &[PatchSample], exec: Exec) -> Result<Vec<(f64, f64)>, NnError> {
        self.check_head(Head::Localization)?;
        exec.map(patches, |p| {
            let y = self.forward(&self.standardized(p)?)?;
            Ok((y[0], y[1]))
        })
        .into_iter()
        .collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}
