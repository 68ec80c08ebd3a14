//! Parameter blocks. Every tensor is a 2-D `f64` matrix; biases and
//! layer-norm parameters are `1 × n` rows.

use super::ToyConfig;
use ndarray::Array2;
use rand::Rng;
use rand_distr::{Distribution, Normal};

pub type Mat = Array2<f64>;

fn normal(rng: &mut impl Rng, rows: usize, cols: usize, std: f64) -> Mat {
    let dist = Normal::new(0.0, std).expect("finite std");
    Mat::from_shape_fn((rows, cols), |_| dist.sample(rng))
}

fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Mat {
    normal(rng, rows, cols, (1.0 / rows as f64).sqrt())
}

/// Anything that owns an ordered list of parameter tensors.
pub trait Parameters {
    fn tensors(&self) -> Vec<&Mat>;
    fn tensors_mut(&mut self) -> Vec<&mut Mat>;

    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    fn squared_norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.iter()).map(|v| v * v).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerBlock {
    pub wq: Mat,
    pub bq: Mat,
    pub wk: Mat,
    pub bk: Mat,
    pub wv: Mat,
    pub bv: Mat,
    pub wo: Mat,
    pub bo: Mat,
    pub ln1_g: Mat,
    pub ln1_b: Mat,
    pub w1: Mat,
    pub b1: Mat,
    pub w2: Mat,
    pub b2: Mat,
    pub ln2_g: Mat,
    pub ln2_b: Mat,
}

impl LayerBlock {
    pub const TENSOR_NAMES: [&'static str; 16] = [
        "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln1_g", "ln1_b", "w1", "b1", "w2", "b2", "ln2_g", "ln2_b",
    ];

    pub fn random(cfg: &ToyConfig, rng: &mut impl Rng) -> Self {
        let (w, f) = (cfg.width, cfg.ffn);
        Self {
            wq: glorot(rng, w, w),
            bq: Mat::zeros((1, w)),
            wk: glorot(rng, w, w),
            bk: Mat::zeros((1, w)),
            wv: glorot(rng, w, w),
            bv: Mat::zeros((1, w)),
            wo: glorot(rng, w, w),
            bo: Mat::zeros((1, w)),
            ln1_g: Mat::ones((1, w)),
            ln1_b: Mat::zeros((1, w)),
            w1: glorot(rng, w, f),
            b1: Mat::zeros((1, f)),
            w2: glorot(rng, f, w),
            b2: Mat::zeros((1, w)),
            ln2_g: Mat::ones((1, w)),
            ln2_b: Mat::zeros((1, w)),
        }
    }

    /// Replaces every tensor of the block with `N(0, std)` noise.
    pub fn fill_with_noise(&mut self, std: f64, rng: &mut impl Rng) {
        for t in self.tensors_mut() {
            let (r, c) = t.dim();
            *t = normal(rng, r, c, std);
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for t in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }
}

impl Parameters for LayerBlock {
    fn tensors(&self) -> Vec<&Mat> {
        vec![
            &self.wq, &self.bq, &self.wk, &self.bk, &self.wv, &self.bv, &self.wo, &self.bo, &self.ln1_g, &self.ln1_b,
            &self.w1, &self.b1, &self.w2, &self.b2, &self.ln2_g, &self.ln2_b,
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        vec![
            &mut self.wq,
            &mut self.bq,
            &mut self.wk,
            &mut self.bk,
            &mut self.wv,
            &mut self.bv,
            &mut self.wo,
            &mut self.bo,
            &mut self.ln1_g,
            &mut self.ln1_b,
            &mut self.w1,
            &mut self.b1,
            &mut self.w2,
            &mut self.b2,
            &mut self.ln2_g,
            &mut self.ln2_b,
        ]
    }
}

/// Token and learned position embeddings plus the stack of encoder layers
/// still present in the model, tagged with their original ids.
#[derive(Debug, Clone, PartialEq)]
pub struct Encoder {
    pub token: Mat,
    pub position: Mat,
    pub layers: Vec<LayerBlock>,
    /// Original id of each entry of `layers`, ascending.
    pub layer_ids: Vec<usize>,
}

impl Encoder {
    pub fn random(cfg: &ToyConfig, rng: &mut impl Rng) -> Self {
        let token = normal(rng, cfg.vocab, cfg.width, 1.0);
        let position = normal(rng, cfg.max_len, cfg.width, 1.0);
        let layers = (0..cfg.depth).map(|_| LayerBlock::random(cfg, rng)).collect();
        Self { token, position, layers, layer_ids: (0..cfg.depth).collect() }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            token: Mat::zeros(self.token.dim()),
            position: Mat::zeros(self.position.dim()),
            layers: self.layers.iter().map(LayerBlock::zeros_like).collect(),
            layer_ids: self.layer_ids.clone(),
        }
    }

    pub fn block(&self, id: usize) -> Option<&LayerBlock> {
        self.layer_ids.iter().position(|&l| l == id).map(|i| &self.layers[i])
    }

    pub fn block_mut(&mut self, id: usize) -> Option<&mut LayerBlock> {
        self.layer_ids.iter().position(|&l| l == id).map(move |i| &mut self.layers[i])
    }

    /// Drops every layer whose id is not in `kept`. Returns the ids in
    /// `kept` that were not present.
    pub fn retain_layers(&mut self, kept: &[usize]) -> Vec<usize> {
        let missing: Vec<usize> = kept.iter().copied().filter(|id| !self.layer_ids.contains(id)).collect();
        let mut i = 0;
        while i < self.layers.len() {
            if kept.contains(&self.layer_ids[i]) {
                i += 1;
            } else {
                self.layers.remove(i);
                self.layer_ids.remove(i);
            }
        }
        missing
    }
}

impl Parameters for Encoder {
    fn tensors(&self) -> Vec<&Mat> {
        let mut v = vec![&self.token, &self.position];
        for l in &self.layers {
            v.extend(l.tensors());
        }
        v
    }

    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut v = vec![&mut self.token, &mut self.position];
        for l in &mut self.layers {
            v.extend(l.tensors_mut());
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub w: Mat,
    pub b: Mat,
}

impl ClassifierHead {
    pub fn random(width: usize, classes: usize, rng: &mut impl Rng) -> Self {
        Self { w: glorot(rng, width, classes), b: Mat::zeros((1, classes)) }
    }

    pub fn zeros_like(&self) -> Self {
        Self { w: Mat::zeros(self.w.dim()), b: Mat::zeros(self.b.dim()) }
    }
}

impl Parameters for ClassifierHead {
    fn tensors(&self) -> Vec<&Mat> {
        vec![&self.w, &self.b]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        vec![&mut self.w, &mut self.b]
    }
}

/// Masked-token prediction head; its projection is tied to the token
/// embedding, so it only owns an output bias.
#[derive(Debug, Clone, PartialEq)]
pub struct LmHead {
    pub bias: Mat,
}

impl Parameters for LmHead {
    fn tensors(&self) -> Vec<&Mat> {
        vec![&self.bias]
    }
    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        vec![&mut self.bias]
    }
}
