//! Forward and backward passes of the pre-norm causal decoder.
//!
//! ```text
//! x = e + pos
//! for each block:
//!     x = x + Attn(LN1(x))
//!     x = x + W2 · gelu(W1 · LN2(x) + b1) + b2
//! h = LNf(x);  logits = h · Eᵀ      (E tied to the token embedding)
//! ```
//!
//! Everything is generic over the float type so the same code runs in the
//! 32-bit execution mode and the 64-bit verification mode. The backward pass
//! always returns the gradient with respect to the input embedding rows; it
//! additionally accumulates weight gradients only when a gradient buffer is
//! supplied (pretraining). Prompt tuning never passes one.

use ndarray::{s, Array1, Array2, ArrayView1, Axis, NdFloat};

use super::config::ModelConfig;
use super::params::{LayerParams, Params};
use crate::error::{Error, Result};

const LN_EPS: f64 = 1e-5;

pub(crate) struct NormCache<T> {
    xhat: Array2<T>,
    inv_std: Array1<T>,
}

pub(crate) struct LayerCache<T> {
    ln1: NormCache<T>,
    a1: Array2<T>,
    q: Array2<T>,
    k: Array2<T>,
    v: Array2<T>,
    probs: Vec<Array2<T>>,
    concat: Array2<T>,
    ln2: NormCache<T>,
    a2: Array2<T>,
    pre: Array2<T>,
    act: Array2<T>,
}

/// Activations kept from the forward pass for the backward pass.
pub struct ForwardCache<T> {
    layers: Vec<LayerCache<T>>,
    final_norm: NormCache<T>,
    /// Output of the final layer norm, one row per position.
    pub hidden: Array2<T>,
}

fn c<T: NdFloat>(v: f64) -> T {
    T::from(v).unwrap()
}

fn layer_norm<T: NdFloat>(
    x: &Array2<T>,
    gain: &Array1<T>,
    bias: &Array1<T>,
) -> (Array2<T>, NormCache<T>) {
    let d = T::from(x.ncols()).unwrap();
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (mut row, inv) in xhat.rows_mut().into_iter().zip(inv_std.iter_mut()) {
        let mean = row.sum() / d;
        row.mapv_inplace(|v| v - mean);
        let var = row.iter().fold(T::zero(), |acc, &v| acc + v * v) / d;
        let s = T::one() / (var + c(LN_EPS)).sqrt();
        row.mapv_inplace(|v| v * s);
        *inv = s;
    }
    let y = &xhat * gain + bias;
    (y, NormCache { xhat, inv_std })
}

fn layer_norm_backward<T: NdFloat>(
    dy: &Array2<T>,
    cache: &NormCache<T>,
    gain: &Array1<T>,
    grads: Option<(&mut Array1<T>, &mut Array1<T>)>,
) -> Array2<T> {
    if let Some((dg, db)) = grads {
        *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
        *db += &dy.sum_axis(Axis(0));
    }
    let d = T::from(dy.ncols()).unwrap();
    let mut dx = dy * gain;
    for ((mut row, xhat), &s) in dx
        .rows_mut()
        .into_iter()
        .zip(cache.xhat.rows())
        .zip(cache.inv_std.iter())
    {
        let mean_d = row.sum() / d;
        let mean_dx = row.dot(&xhat) / d;
        row.zip_mut_with(&xhat, |g, &xh| *g = s * (*g - mean_d - xh * mean_dx));
    }
    dx
}

fn gelu<T: NdFloat>(x: T) -> T {
    let k: T = c((2.0 / std::f64::consts::PI).sqrt());
    let half: T = c(0.5);
    half * x * (T::one() + (k * (x + c::<T>(0.044715) * x * x * x)).tanh())
}

fn gelu_grad<T: NdFloat>(x: T) -> T {
    let k: T = c((2.0 / std::f64::consts::PI).sqrt());
    let half: T = c(0.5);
    let a: T = c(0.044715);
    let t = (k * (x + a * x * x * x)).tanh();
    half * (T::one() + t) + half * x * (T::one() - t * t) * k * (T::one() + c::<T>(3.0) * a * x * x)
}

fn all_finite<T: NdFloat>(a: &Array2<T>) -> bool {
    a.iter().all(|v| v.is_finite())
}

/// Log-softmax of one logits row.
pub fn log_softmax<T: NdFloat>(row: ArrayView1<T>) -> Array1<T> {
    let max = row.fold(T::neg_infinity(), |m, &v| if v > m { v } else { m });
    let sum = row.fold(T::zero(), |acc, &v| acc + (v - max).exp());
    let log_z = max + sum.ln();
    row.mapv(|v| v - log_z)
}

/// A borrowed view of a model in a particular float precision.
pub struct Engine<'a, T> {
    pub cfg: &'a ModelConfig,
    pub params: &'a Params<T>,
}

impl<T> Clone for Engine<'_, T> {
    fn clone(&self) -> Self {
        *self
    }
}
impl<T> Copy for Engine<'_, T> {}

impl<'a, T: NdFloat> Engine<'a, T> {
    pub fn new(cfg: &'a ModelConfig, params: &'a Params<T>) -> Self {
        Engine { cfg, params }
    }

    fn check_len(&self, len: usize) -> Result<()> {
        if len > self.cfg.max_seq_len {
            return Err(Error::Capacity(format!(
                "sequence of length {len} exceeds max_seq_len {}",
                self.cfg.max_seq_len
            )));
        }
        Ok(())
    }

    /// Runs the decoder over input embedding rows (before positional
    /// addition) and returns the cache whose `hidden` field holds the final
    /// normalized states.
    pub fn forward(&self, inputs: &Array2<T>) -> Result<ForwardCache<T>> {
        let len = inputs.nrows();
        self.check_len(len)?;
        if inputs.ncols() != self.cfg.embed_dim {
            return Err(Error::Capacity(format!(
                "input rows have width {} but the model expects {}",
                inputs.ncols(),
                self.cfg.embed_dim
            )));
        }
        let mut x = inputs + &self.params.position_embedding.slice(s![..len, ..]);
        let mut layers = Vec::with_capacity(self.params.layers.len());
        for layer in &self.params.layers {
            let (next, cache) = self.block_forward(layer, x);
            x = next;
            layers.push(cache);
        }
        let (hidden, final_norm) = layer_norm(&x, &self.params.final_gain, &self.params.final_bias);
        if !all_finite(&hidden) {
            return Err(Error::Numerical("non-finite activation in forward pass".into()));
        }
        Ok(ForwardCache {
            layers,
            final_norm,
            hidden,
        })
    }

    fn block_forward(&self, p: &LayerParams<T>, x: Array2<T>) -> (Array2<T>, LayerCache<T>) {
        let len = x.nrows();
        let heads = self.cfg.num_heads;
        let dh = self.cfg.head_dim();
        let scale: T = c(1.0 / (dh as f64).sqrt());

        let (a1, ln1) = layer_norm(&x, &p.ln1_gain, &p.ln1_bias);
        let q = a1.dot(&p.query);
        let k = a1.dot(&p.key);
        let v = a1.dot(&p.value);
        let mut concat = Array2::zeros((len, self.cfg.embed_dim));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let qh = q.slice(cols);
            let kh = k.slice(cols);
            let vh = v.slice(cols);
            let mut scores = qh.dot(&kh.t());
            for (i, mut row) in scores.rows_mut().into_iter().enumerate() {
                let visible = row.slice(s![..=i]);
                let max = visible.fold(T::neg_infinity(), |m, &v| if v > m { v } else { m });
                let mut sum = T::zero();
                for (j, v) in row.iter_mut().enumerate() {
                    if j <= i {
                        *v = ((*v - max) * scale).exp();
                        sum += *v;
                    } else {
                        *v = T::zero();
                    }
                }
                row.mapv_inplace(|v| v / sum);
            }
            concat.slice_mut(cols).assign(&scores.dot(&vh));
            probs.push(scores);
        }
        let mid = &x + &concat.dot(&p.output);

        let (a2, ln2) = layer_norm(&mid, &p.ln2_gain, &p.ln2_bias);
        let pre = a2.dot(&p.ff_in) + &p.ff_in_bias;
        let act = pre.mapv(gelu);
        let out = &mid + &(act.dot(&p.ff_out) + &p.ff_out_bias);
        (
            out,
            LayerCache {
                ln1,
                a1,
                q,
                k,
                v,
                probs,
                concat,
                ln2,
                a2,
                pre,
                act,
            },
        )
    }

    /// Propagates `d_hidden` (gradient w.r.t. the final normalized states)
    /// back to the input embedding rows. When `grads` is given, parameter
    /// gradients of every block, the final norm and the position embedding
    /// are accumulated into it; the token embedding is left to the caller
    /// since it depends on the lookup and the tied output projection.
    pub fn backward(
        &self,
        d_hidden: &Array2<T>,
        cache: &ForwardCache<T>,
        mut grads: Option<&mut Params<T>>,
    ) -> Result<Array2<T>> {
        let n_layers = self.params.layers.len();
        let mut dx = layer_norm_backward(
            d_hidden,
            &cache.final_norm,
            &self.params.final_gain,
            grads
                .as_deref_mut()
                .map(|g| (&mut g.final_gain, &mut g.final_bias)),
        );
        if !all_finite(&dx) {
            return Err(Error::NonFiniteGradient { layer: n_layers });
        }
        for idx in (0..n_layers).rev() {
            let g = grads.as_deref_mut().map(|g| &mut g.layers[idx]);
            dx = self.block_backward(&self.params.layers[idx], &cache.layers[idx], dx, g);
            if !all_finite(&dx) {
                return Err(Error::NonFiniteGradient { layer: idx });
            }
        }
        if let Some(g) = grads {
            let len = dx.nrows();
            let mut rows = g.position_embedding.slice_mut(s![..len, ..]);
            rows += &dx;
        }
        Ok(dx)
    }

    fn block_backward(
        &self,
        p: &LayerParams<T>,
        cache: &LayerCache<T>,
        d_out: Array2<T>,
        mut grads: Option<&mut LayerParams<T>>,
    ) -> Array2<T> {
        let heads = self.cfg.num_heads;
        let dh = self.cfg.head_dim();
        let scale: T = c(1.0 / (dh as f64).sqrt());

        // Feed-forward branch.
        if let Some(g) = grads.as_deref_mut() {
            g.ff_out += &cache.act.t().dot(&d_out);
            g.ff_out_bias += &d_out.sum_axis(Axis(0));
        }
        let mut d_pre = d_out.dot(&p.ff_out.t());
        d_pre.zip_mut_with(&cache.pre, |g, &u| *g = *g * gelu_grad(u));
        if let Some(g) = grads.as_deref_mut() {
            g.ff_in += &cache.a2.t().dot(&d_pre);
            g.ff_in_bias += &d_pre.sum_axis(Axis(0));
        }
        let d_a2 = d_pre.dot(&p.ff_in.t());
        let d_mid = d_out
            + layer_norm_backward(
                &d_a2,
                &cache.ln2,
                &p.ln2_gain,
                grads
                    .as_deref_mut()
                    .map(|g| (&mut g.ln2_gain, &mut g.ln2_bias)),
            );

        // Attention branch.
        if let Some(g) = grads.as_deref_mut() {
            g.output += &cache.concat.t().dot(&d_mid);
        }
        let d_concat = d_mid.dot(&p.output.t());
        let len = d_mid.nrows();
        let mut d_q = Array2::zeros((len, self.cfg.embed_dim));
        let mut d_k = Array2::zeros((len, self.cfg.embed_dim));
        let mut d_v = Array2::zeros((len, self.cfg.embed_dim));
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let probs = &cache.probs[h];
            let d_oh = d_concat.slice(cols);
            let mut d_scores = d_oh.dot(&cache.v.slice(cols).t());
            d_v.slice_mut(cols).assign(&probs.t().dot(&d_oh));
            for (mut row, prow) in d_scores.rows_mut().into_iter().zip(probs.rows()) {
                let dot = row.dot(&prow);
                row.zip_mut_with(&prow, |g, &pv| *g = pv * (*g - dot) * scale);
            }
            d_q.slice_mut(cols).assign(&d_scores.dot(&cache.k.slice(cols)));
            d_k.slice_mut(cols).assign(&d_scores.t().dot(&cache.q.slice(cols)));
        }
        if let Some(g) = grads.as_deref_mut() {
            g.query += &cache.a1.t().dot(&d_q);
            g.key += &cache.a1.t().dot(&d_k);
            g.value += &cache.a1.t().dot(&d_v);
        }
        let d_a1 = d_q.dot(&p.query.t()) + d_k.dot(&p.key.t()) + d_v.dot(&p.value.t());
        d_mid
            + layer_norm_backward(
                &d_a1,
                &cache.ln1,
                &p.ln1_gain,
                grads.map(|g| (&mut g.ln1_gain, &mut g.ln1_bias)),
            )
    }

    /// Next-token logits for every position (`seq_len × vocab_size`).
    pub fn logits(&self, inputs: &Array2<T>) -> Result<Array2<T>> {
        let cache = self.forward(inputs)?;
        Ok(cache.hidden.dot(&self.params.token_embedding.t()))
    }

    /// Full-vocabulary log-probabilities at the final position.
    pub fn final_log_probs(&self, inputs: &Array2<T>) -> Result<(Array1<T>, ForwardCache<T>)> {
        if inputs.nrows() == 0 {
            return Err(Error::Data("cannot score an empty sequence".into()));
        }
        let cache = self.forward(inputs)?;
        let last = cache.hidden.row(cache.hidden.nrows() - 1);
        let logits = self.params.token_embedding.dot(&last);
        Ok((log_softmax(logits.view()), cache))
    }

    pub fn check_ids(&self, ids: &[usize]) -> Result<()> {
        for &id in ids {
            if id >= self.cfg.vocab_size {
                return Err(Error::Vocabulary {
                    id,
                    vocab_size: self.cfg.vocab_size,
                });
            }
        }
        Ok(())
    }

    pub fn label_log_probs(&self, inputs: &Array2<T>, verbalizers: [usize; 3]) -> Result<[T; 3]> {
        self.check_ids(&verbalizers)?;
        let (lp, _) = self.final_log_probs(inputs)?;
        Ok(verbalizers.map(|id| lp[id]))
    }

    /// Cross-entropy of the target verbalizer at the final position and its
    /// gradient with respect to every input embedding row.
    pub fn label_loss_and_input_grad(
        &self,
        inputs: &Array2<T>,
        loss: &LossSpec,
    ) -> Result<(T, Array2<T>)> {
        self.check_ids(&loss.verbalizer_ids)?;
        let target = *loss
            .verbalizer_ids
            .get(loss.target)
            .ok_or_else(|| Error::Label(format!("target class {} out of range", loss.target)))?;
        let (lp, cache) = self.final_log_probs(inputs)?;
        let scale: T = c(loss.scale);
        let value = -lp[target] * scale;
        if !value.is_finite() {
            return Err(Error::Numerical("non-finite loss".into()));
        }
        // d(-log softmax[target]) / d logits = softmax - onehot.
        let mut d_logits = lp.mapv(|v| v.exp() * scale);
        d_logits[target] -= scale;
        let len = inputs.nrows();
        let mut d_hidden = Array2::zeros((len, self.cfg.embed_dim));
        d_hidden
            .row_mut(len - 1)
            .assign(&d_logits.dot(&self.params.token_embedding));
        let grad = self.backward(&d_hidden, &cache, None)?;
        Ok((value, grad))
    }
}

/// Cross-entropy objective on the verbalizer of class `target`, multiplied by
/// `scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossSpec {
    pub verbalizer_ids: [usize; 3],
    pub target: usize,
    pub scale: f64,
}

impl LossSpec {
    pub fn new(verbalizer_ids: [usize; 3], target: usize) -> Self {
        LossSpec {
            verbalizer_ids,
            target,
            scale: 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gelu_derivative_matches_difference_quotient() {
        for &x in &[-3.0f64, -1.0, -0.2, 0.0, 0.3, 1.5, 4.0] {
            let h = 1e-6;
            let fd = (gelu(x + h) - gelu(x - h)) / (2.0 * h);
            assert!((fd - gelu_grad(x)).abs() < 1e-8, "x={x}");
        }
    }

    #[test]
    fn log_softmax_normalizes() {
        let row = Array1::from(vec![1.0f64, -2.0, 30.0, 0.5]);
        let lp = log_softmax(row.view());
        let total: f64 = lp.iter().map(|v| v.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
