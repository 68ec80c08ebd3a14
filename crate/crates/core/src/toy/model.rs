//! Forward and backward passes of the toy encoder.
//!
//! Each encoder layer is post-norm: `x1 = LN(x + Drop(MHA(x)))`, then
//! `x2 = LN(x1 + Drop(W2·gelu(W1·x1)))`. Sequences are processed one at a
//! time; a batch is a list of equal-length token sequences. Classification
//! mean-pools the last hidden states; masked-token prediction projects each
//! hidden state onto the (tied) token embedding.

use super::optim::AdamW;
use super::params::{ClassifierHead, Encoder, LayerBlock, LmHead, Mat, Parameters};
use super::{ToyConfig, ToyError};
use ndarray::{s, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LN_EPS: f64 = 1e-5;
const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

fn softmax_rows(m: &mut Mat) {
    for mut row in m.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
}

fn row_sums(m: &Mat) -> Mat {
    m.sum_axis(Axis(0)).insert_axis(Axis(0))
}

/// Inverted dropout driven by a caller-owned generator.
pub struct Dropout<'a> {
    pub rate: f64,
    pub rng: &'a mut ChaCha8Rng,
}

impl Dropout<'_> {
    fn apply(&mut self, x: Mat) -> (Mat, Option<Mat>) {
        if self.rate <= 0.0 {
            return (x, None);
        }
        let keep = 1.0 - self.rate;
        let mask = Mat::from_shape_fn(x.dim(), |_| if self.rng.gen::<f64>() < keep { 1.0 / keep } else { 0.0 });
        (x * &mask, Some(mask))
    }
}

fn apply_dropout(dropout: &mut Option<Dropout<'_>>, x: Mat) -> (Mat, Option<Mat>) {
    match dropout {
        Some(d) => d.apply(x),
        None => (x, None),
    }
}

struct LnCache {
    xhat: Mat,
    inv_std: Vec<f64>,
}

fn layer_norm(x: &Mat, g: &Mat, b: &Mat) -> (Mat, LnCache) {
    let (rows, w) = x.dim();
    let mut xhat = Mat::zeros((rows, w));
    let mut inv_std = vec![0.0; rows];
    for r in 0..rows {
        let row = x.row(r);
        let mu = row.sum() / w as f64;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / w as f64;
        let is = 1.0 / (var + LN_EPS).sqrt();
        inv_std[r] = is;
        for c in 0..w {
            xhat[[r, c]] = (row[c] - mu) * is;
        }
    }
    let y = &xhat * g + b;
    (y, LnCache { xhat, inv_std })
}

fn layer_norm_backward(dy: &Mat, g: &Mat, cache: &LnCache, dg: &mut Mat, db: &mut Mat) -> Mat {
    *dg += &row_sums(&(dy * &cache.xhat));
    *db += &row_sums(dy);
    let dxhat = dy * g;
    let (rows, w) = dy.dim();
    let mut dx = Mat::zeros((rows, w));
    for r in 0..rows {
        let dr = dxhat.row(r);
        let xr = cache.xhat.row(r);
        let m1 = dr.sum() / w as f64;
        let m2 = dr.iter().zip(xr.iter()).map(|(a, b)| a * b).sum::<f64>() / w as f64;
        for c in 0..w {
            dx[[r, c]] = cache.inv_std[r] * (dr[c] - m1 - xr[c] * m2);
        }
    }
    dx
}

struct LayerCache {
    x: Mat,
    q: Mat,
    k: Mat,
    v: Mat,
    attn: Vec<Mat>,
    ctx: Mat,
    mask1: Option<Mat>,
    ln1: LnCache,
    x1: Mat,
    pre: Mat,
    act: Mat,
    mask2: Option<Mat>,
    ln2: LnCache,
}

fn layer_forward(p: &LayerBlock, x: Mat, cfg: &ToyConfig, dropout: &mut Option<Dropout<'_>>) -> (Mat, LayerCache) {
    let (t, w) = x.dim();
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();
    let q = x.dot(&p.wq) + &p.bq;
    let k = x.dot(&p.wk) + &p.bk;
    let v = x.dot(&p.wv) + &p.bv;
    let mut ctx = Mat::zeros((t, w));
    let mut attn = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let cols = s![.., h * dh..(h + 1) * dh];
        let mut scores = q.slice(cols).dot(&k.slice(cols).t()) * scale;
        softmax_rows(&mut scores);
        ctx.slice_mut(cols).assign(&scores.dot(&v.slice(cols)));
        attn.push(scores);
    }
    let (z, mask1) = apply_dropout(dropout, ctx.dot(&p.wo) + &p.bo);
    let (x1, ln1) = layer_norm(&(&x + &z), &p.ln1_g, &p.ln1_b);
    let pre = x1.dot(&p.w1) + &p.b1;
    let act = pre.mapv(gelu);
    let (f, mask2) = apply_dropout(dropout, act.dot(&p.w2) + &p.b2);
    let (x2, ln2) = layer_norm(&(&x1 + &f), &p.ln2_g, &p.ln2_b);
    (x2, LayerCache { x, q, k, v, attn, ctx, mask1, ln1, x1, pre, act, mask2, ln2 })
}

fn layer_backward(p: &LayerBlock, c: &LayerCache, dx2: &Mat, g: &mut LayerBlock, cfg: &ToyConfig) -> Mat {
    let dh = cfg.head_dim();
    let scale = 1.0 / (dh as f64).sqrt();

    let dr2 = layer_norm_backward(dx2, &p.ln2_g, &c.ln2, &mut g.ln2_g, &mut g.ln2_b);
    let df = match &c.mask2 {
        Some(m) => &dr2 * m,
        None => dr2.clone(),
    };
    g.w2 += &c.act.t().dot(&df);
    g.b2 += &row_sums(&df);
    let dpre = df.dot(&p.w2.t()) * c.pre.mapv(gelu_grad);
    g.w1 += &c.x1.t().dot(&dpre);
    g.b1 += &row_sums(&dpre);
    let dx1 = dr2 + dpre.dot(&p.w1.t());

    let dr1 = layer_norm_backward(&dx1, &p.ln1_g, &c.ln1, &mut g.ln1_g, &mut g.ln1_b);
    let dz = match &c.mask1 {
        Some(m) => &dr1 * m,
        None => dr1.clone(),
    };
    g.wo += &c.ctx.t().dot(&dz);
    g.bo += &row_sums(&dz);
    let dctx = dz.dot(&p.wo.t());

    let mut dq = Mat::zeros(c.q.dim());
    let mut dk = Mat::zeros(c.k.dim());
    let mut dv = Mat::zeros(c.v.dim());
    for (h, a) in c.attn.iter().enumerate() {
        let cols = s![.., h * dh..(h + 1) * dh];
        let dout = dctx.slice(cols);
        dv.slice_mut(cols).assign(&a.t().dot(&dout));
        let da = dout.dot(&c.v.slice(cols).t());
        // softmax backward, row by row
        let dot = (&da * a).sum_axis(Axis(1)).insert_axis(Axis(1));
        let ds = (a * &(da - &dot)) * scale;
        dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
        dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
    }
    g.wq += &c.x.t().dot(&dq);
    g.bq += &row_sums(&dq);
    g.wk += &c.x.t().dot(&dk);
    g.bk += &row_sums(&dk);
    g.wv += &c.x.t().dot(&dv);
    g.bv += &row_sums(&dv);
    dr1 + dq.dot(&p.wq.t()) + dk.dot(&p.wk.t()) + dv.dot(&p.wv.t())
}

/// Activations of one sequence kept for the backward pass.
pub struct SeqTrace {
    tokens: Vec<u32>,
    layers: Vec<LayerCache>,
    /// Final hidden states, `len × width`.
    pub out: Mat,
}

pub fn encode(enc: &Encoder, cfg: &ToyConfig, tokens: &[u32], mut dropout: Option<Dropout<'_>>) -> SeqTrace {
    let t = tokens.len();
    let mut x = Mat::zeros((t, cfg.width));
    for (i, &tok) in tokens.iter().enumerate() {
        x.row_mut(i).assign(&(&enc.token.row(tok as usize) + &enc.position.row(i)));
    }
    let mut layers = Vec::with_capacity(enc.layers.len());
    for block in &enc.layers {
        let (next, cache) = layer_forward(block, x, cfg, &mut dropout);
        layers.push(cache);
        x = next;
    }
    SeqTrace { tokens: tokens.to_vec(), layers, out: x }
}

/// Accumulates parameter gradients of one sequence given `d_out`, the
/// gradient with respect to its final hidden states.
pub fn encode_backward(enc: &Encoder, cfg: &ToyConfig, trace: &SeqTrace, d_out: Mat, grads: &mut Encoder) {
    let mut d = d_out;
    for (i, cache) in trace.layers.iter().enumerate().rev() {
        d = layer_backward(&enc.layers[i], cache, &d, &mut grads.layers[i], cfg);
    }
    for (i, &tok) in trace.tokens.iter().enumerate() {
        let row = d.row(i);
        let mut tr = grads.token.row_mut(tok as usize);
        tr += &row;
        let mut pr = grads.position.row_mut(i);
        pr += &row;
    }
}

fn log_softmax_row(logits: ndarray::ArrayView1<f64>) -> Vec<f64> {
    let max = logits.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

/// Validates a batch and returns its common sequence length.
pub fn check_batch(cfg: &ToyConfig, batch: &[Vec<u32>]) -> Result<usize, ToyError> {
    let first = batch.first().ok_or_else(|| ToyError::Input("empty batch".into()))?;
    let len = first.len();
    if len == 0 {
        return Err(ToyError::Input("empty sequence".into()));
    }
    if len > cfg.max_len {
        return Err(ToyError::Input(format!("sequence length {len} exceeds maximum {}", cfg.max_len)));
    }
    for seq in batch {
        if seq.len() != len {
            return Err(ToyError::Input(format!("ragged batch: lengths {len} and {}", seq.len())));
        }
        if let Some(&tok) = seq.iter().find(|&&t| t as usize >= cfg.vocab) {
            return Err(ToyError::Input(format!("token {tok} outside vocabulary of {}", cfg.vocab)));
        }
    }
    Ok(len)
}

/// Sequence classifier: encoder, mean pooling, linear head.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyTransformer {
    pub config: ToyConfig,
    pub encoder: Encoder,
    pub head: ClassifierHead,
}

/// Gradients laid out like [`ToyTransformer`]'s parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelGrads {
    pub encoder: Encoder,
    pub head: ClassifierHead,
}

impl Parameters for ModelGrads {
    fn tensors(&self) -> Vec<&Mat> {
        let mut v = self.encoder.tensors();
        v.extend(self.head.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }
}

impl Parameters for ToyTransformer {
    fn tensors(&self) -> Vec<&Mat> {
        let mut v = self.encoder.tensors();
        v.extend(self.head.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.head.tensors_mut());
        v
    }
}

impl ToyTransformer {
    pub fn random(config: ToyConfig, seed: u64) -> Result<Self, ToyError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::random(&config, &mut rng);
        let head = ClassifierHead::random(config.width, config.classes, &mut rng);
        Ok(Self { config, encoder, head })
    }

    pub fn active_layers(&self) -> &[usize] {
        &self.encoder.layer_ids
    }

    /// Keeps only the listed layers; every other parameter is left untouched.
    pub fn prune_to(&mut self, kept: &[usize]) -> Result<(), ToyError> {
        let missing = self.encoder.retain_layers(kept);
        if !missing.is_empty() {
            return Err(ToyError::Input(format!("layers {missing:?} are not present in the model")));
        }
        Ok(())
    }

    fn pool(out: &Mat) -> Mat {
        out.mean_axis(Axis(0)).expect("non-empty sequence").insert_axis(Axis(0))
    }

    /// Class logits, `batch × classes`, without dropout.
    pub fn forward(&self, batch: &[Vec<u32>]) -> Result<Mat, ToyError> {
        check_batch(&self.config, batch)?;
        let mut logits = Mat::zeros((batch.len(), self.config.classes));
        for (i, seq) in batch.iter().enumerate() {
            let trace = encode(&self.encoder, &self.config, seq, None);
            let row = Self::pool(&trace.out).dot(&self.head.w) + &self.head.b;
            logits.row_mut(i).assign(&row.row(0));
        }
        Ok(logits)
    }

    pub fn probabilities(&self, batch: &[Vec<u32>]) -> Result<Mat, ToyError> {
        let mut p = self.forward(batch)?;
        softmax_rows(&mut p);
        Ok(p)
    }

    /// Mean cross-entropy of the batch, no dropout.
    pub fn loss(&self, batch: &[Vec<u32>], labels: &[usize]) -> Result<f64, ToyError> {
        self.check_labels(batch, labels)?;
        let logits = self.forward(batch)?;
        let total: f64 = logits.rows().into_iter().zip(labels).map(|(row, &y)| -log_softmax_row(row)[y]).sum();
        Ok(total / batch.len() as f64)
    }

    fn check_labels(&self, batch: &[Vec<u32>], labels: &[usize]) -> Result<(), ToyError> {
        if labels.len() != batch.len() {
            return Err(ToyError::Input(format!("{} labels for {} sequences", labels.len(), batch.len())));
        }
        if let Some(&y) = labels.iter().find(|&&y| y >= self.config.classes) {
            return Err(ToyError::Input(format!("label {y} outside {} classes", self.config.classes)));
        }
        Ok(())
    }

    /// Mean cross-entropy and its gradient. With `rng`, dropout is active
    /// and masks are drawn from it.
    pub fn loss_and_grads(
        &self,
        batch: &[Vec<u32>],
        labels: &[usize],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, ModelGrads), ToyError> {
        check_batch(&self.config, batch)?;
        self.check_labels(batch, labels)?;
        let b = batch.len() as f64;
        let mut grads = ModelGrads { encoder: self.encoder.zeros_like(), head: self.head.zeros_like() };
        let mut total = 0.0;
        for (seq, &y) in batch.iter().zip(labels) {
            let dropout = rng.as_deref_mut().map(|rng| Dropout { rate: self.config.dropout, rng });
            let trace = encode(&self.encoder, &self.config, seq, dropout);
            let pooled = Self::pool(&trace.out);
            let logits = pooled.dot(&self.head.w) + &self.head.b;
            let logp = log_softmax_row(logits.row(0));
            total -= logp[y];
            let mut dlogits = Mat::from_shape_fn((1, logp.len()), |(_, c)| logp[c].exp());
            dlogits[[0, y]] -= 1.0;
            dlogits /= b;
            grads.head.w += &pooled.t().dot(&dlogits);
            grads.head.b += &dlogits;
            let dpool = dlogits.dot(&self.head.w.t()) / seq.len() as f64;
            let d_out = Mat::from_shape_fn(trace.out.dim(), |(_, c)| dpool[[0, c]]);
            encode_backward(&self.encoder, &self.config, &trace, d_out, &mut grads.encoder);
        }
        Ok((total / b, grads))
    }

    /// One optimizer step on the batch; returns the loss before the step.
    pub fn backward_and_step(
        &mut self,
        batch: &[Vec<u32>],
        labels: &[usize],
        opt: &mut AdamW,
        rng: &mut ChaCha8Rng,
    ) -> Result<f64, ToyError> {
        let (loss, grads) = self.loss_and_grads(batch, labels, Some(rng))?;
        let grad_norm = grads.squared_norm().sqrt();
        if !loss.is_finite() || !grad_norm.is_finite() {
            return Err(ToyError::NonFinite { loss, grad_norm, layer_norms: self.layer_norms() });
        }
        opt.step(self.tensors_mut(), grads.tensors());
        Ok(loss)
    }

    /// Parameter norm of each remaining layer, by original id.
    pub fn layer_norms(&self) -> Vec<(usize, f64)> {
        self.encoder.layer_ids.iter().zip(&self.encoder.layers).map(|(&id, l)| (id, l.squared_norm().sqrt())).collect()
    }
}

/// Encoder with the tied masked-token head, used for pretraining.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedLm {
    pub config: ToyConfig,
    pub encoder: Encoder,
    pub lm: LmHead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmGrads {
    pub encoder: Encoder,
    pub lm: LmHead,
}

impl Parameters for MaskedLm {
    fn tensors(&self) -> Vec<&Mat> {
        let mut v = self.encoder.tensors();
        v.extend(self.lm.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.lm.tensors_mut());
        v
    }
}

impl Parameters for LmGrads {
    fn tensors(&self) -> Vec<&Mat> {
        let mut v = self.encoder.tensors();
        v.extend(self.lm.tensors());
        v
    }
    fn tensors_mut(&mut self) -> Vec<&mut Mat> {
        let mut v = self.encoder.tensors_mut();
        v.extend(self.lm.tensors_mut());
        v
    }
}

impl MaskedLm {
    pub fn random(config: ToyConfig, seed: u64) -> Result<Self, ToyError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let encoder = Encoder::random(&config, &mut rng);
        Ok(Self { config, encoder, lm: LmHead { bias: Mat::zeros((1, config.vocab)) } })
    }

    /// Mean cross-entropy over the positions with a target, and gradients.
    /// `targets[i][t]` is the original token at a masked position.
    pub fn loss_and_grads(
        &self,
        inputs: &[Vec<u32>],
        targets: &[Vec<Option<u32>>],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(f64, LmGrads), ToyError> {
        check_batch(&self.config, inputs)?;
        let count = targets.iter().flatten().filter(|t| t.is_some()).count();
        if count == 0 {
            return Err(ToyError::Input("no masked positions in batch".into()));
        }
        let mut grads = LmGrads { encoder: self.encoder.zeros_like(), lm: LmHead { bias: Mat::zeros(self.lm.bias.dim()) } };
        let mut total = 0.0;
        for (seq, tgt) in inputs.iter().zip(targets) {
            let dropout = rng.as_deref_mut().map(|rng| Dropout { rate: self.config.dropout, rng });
            let trace = encode(&self.encoder, &self.config, seq, dropout);
            let logits = trace.out.dot(&self.encoder.token.t()) + &self.lm.bias;
            let mut dlogits = Mat::zeros(logits.dim());
            for (t, target) in tgt.iter().enumerate() {
                if let Some(y) = *target {
                    let logp = log_softmax_row(logits.row(t));
                    total -= logp[y as usize];
                    for (c, lp) in logp.iter().enumerate() {
                        dlogits[[t, c]] = lp.exp() / count as f64;
                    }
                    dlogits[[t, y as usize]] -= 1.0 / count as f64;
                }
            }
            grads.lm.bias += &row_sums(&dlogits);
            grads.encoder.token += &dlogits.t().dot(&trace.out);
            let d_out = dlogits.dot(&self.encoder.token);
            encode_backward(&self.encoder, &self.config, &trace, d_out, &mut grads.encoder);
        }
        Ok((total / count as f64, grads))
    }
}
