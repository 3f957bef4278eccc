//! Transformer building blocks with hand-written backward passes.
//!
//! Each layer's `forward` returns its output and a cache; `backward` takes the
//! upstream gradient and the cache, accumulates parameter gradients and
//! returns the gradient with respect to the layer input.

use ndarray::{s, Array1, Array2, Axis};
use rand::Rng;

use super::params::{Grads, ParamStore};

pub(crate) const LN_EPS: f64 = 1e-12;

#[derive(Clone, Debug)]
pub(crate) struct Linear {
    pub w: usize,
    pub b: usize,
}

impl Linear {
    pub fn new<R: Rng>(p: &mut ParamStore, name: &str, din: usize, dout: usize, std: f64, rng: &mut R) -> Self {
        let w = p.normal(format!("{name}.weight"), (din, dout), std, rng);
        let b = p.filled(format!("{name}.bias"), (1, dout), 0.0);
        Self { w, b }
    }

    pub fn forward(&self, p: &ParamStore, x: &Array2<f64>) -> Array2<f64> {
        x.dot(p.get(self.w)) + p.get(self.b)
    }

    pub fn backward(&self, p: &ParamStore, g: &mut Grads, x: &Array2<f64>, dy: &Array2<f64>) -> Array2<f64> {
        *g.acc(self.w) += &x.t().dot(dy);
        *g.acc(self.b) += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        dy.dot(&p.get(self.w).t())
    }
}

#[derive(Clone, Debug)]
pub(crate) struct LayerNorm {
    pub gain: usize,
    pub bias: usize,
}

pub(crate) struct LnCache {
    xhat: Array2<f64>,
    inv_std: Array1<f64>,
}

impl LayerNorm {
    pub fn new(p: &mut ParamStore, name: &str, d: usize) -> Self {
        let gain = p.filled(format!("{name}.gain"), (1, d), 1.0);
        let bias = p.filled(format!("{name}.bias"), (1, d), 0.0);
        Self { gain, bias }
    }

    pub fn forward(&self, p: &ParamStore, x: &Array2<f64>) -> (Array2<f64>, LnCache) {
        let (xhat, inv_std) = normalize(x);
        let y = &xhat * p.get(self.gain) + p.get(self.bias);
        (y, LnCache { xhat, inv_std })
    }

    pub fn backward(&self, p: &ParamStore, g: &mut Grads, c: &LnCache, dy: &Array2<f64>) -> Array2<f64> {
        *g.acc(self.gain) += &(dy * &c.xhat).sum_axis(Axis(0)).insert_axis(Axis(0));
        *g.acc(self.bias) += &dy.sum_axis(Axis(0)).insert_axis(Axis(0));
        let dxhat = dy * p.get(self.gain);
        let d = dy.ncols() as f64;
        let mut dx = Array2::zeros(dy.raw_dim());
        for (i, mut row) in dx.axis_iter_mut(Axis(0)).enumerate() {
            let dh = dxhat.row(i);
            let xh = c.xhat.row(i);
            let m1 = dh.sum() / d;
            let m2 = dh.dot(&xh) / d;
            row.assign(&((&dh - m1 - &xh * m2) * c.inv_std[i]));
        }
        dx
    }
}

/// Per-row standardization.
pub(crate) fn normalize(x: &Array2<f64>) -> (Array2<f64>, Array1<f64>) {
    let d = x.ncols() as f64;
    let mut xhat = x.clone();
    let mut inv_std = Array1::zeros(x.nrows());
    for (i, mut row) in xhat.axis_iter_mut(Axis(0)).enumerate() {
        let mean = row.sum() / d;
        row -= mean;
        let var = row.dot(&row) / d;
        let is = 1.0 / (var + LN_EPS).sqrt();
        row *= is;
        inv_std[i] = is;
    }
    (xhat, inv_std)
}

/// Row-wise softmax over unmasked columns; masked columns get probability 0.
pub(crate) fn softmax_rows(s: &mut Array2<f64>, key_mask: Option<&[bool]>) {
    for mut row in s.axis_iter_mut(Axis(0)) {
        let mut max = f64::NEG_INFINITY;
        for (j, v) in row.iter().enumerate() {
            if key_mask.is_none_or(|m| m[j]) {
                max = max.max(*v);
            }
        }
        let mut sum = 0.0;
        for (j, v) in row.iter_mut().enumerate() {
            if key_mask.is_none_or(|m| m[j]) {
                *v = (*v - max).exp();
                sum += *v;
            } else {
                *v = 0.0;
            }
        }
        if sum > 0.0 {
            row /= sum;
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct Attention {
    pub q: Linear,
    pub k: Linear,
    pub v: Linear,
    pub o: Linear,
    pub heads: usize,
}

pub(crate) struct AttnCache {
    xq: Array2<f64>,
    xkv: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    pub probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    mask: Option<Vec<bool>>,
}

impl Attention {
    pub fn new<R: Rng>(p: &mut ParamStore, name: &str, d: usize, heads: usize, std: f64, rng: &mut R) -> Self {
        Self {
            q: Linear::new(p, &format!("{name}.query"), d, d, std, rng),
            k: Linear::new(p, &format!("{name}.key"), d, d, std, rng),
            v: Linear::new(p, &format!("{name}.value"), d, d, std, rng),
            o: Linear::new(p, &format!("{name}.output"), d, d, std, rng),
            heads,
        }
    }

    /// Queries from `xq` attend over keys/values from `xkv`. Keys with
    /// `key_mask[j] == false` receive no attention.
    pub fn forward(
        &self,
        p: &ParamStore,
        xq: &Array2<f64>,
        xkv: &Array2<f64>,
        key_mask: Option<&[bool]>,
    ) -> (Array2<f64>, AttnCache) {
        let q = self.q.forward(p, xq);
        let k = self.k.forward(p, xkv);
        let v = self.v.forward(p, xkv);
        let d = q.ncols();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut ctx = Array2::zeros((q.nrows(), d));
        let mut probs = Vec::with_capacity(self.heads);
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut sc = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut sc, key_mask);
            ctx.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
            probs.push(sc);
        }
        let out = self.o.forward(p, &ctx);
        let cache = AttnCache {
            xq: xq.clone(),
            xkv: xkv.clone(),
            q,
            k,
            v,
            probs,
            ctx,
            mask: key_mask.map(<[bool]>::to_vec),
        };
        (out, cache)
    }

    /// Returns gradients for the query input and the key/value input.
    pub fn backward(&self, p: &ParamStore, g: &mut Grads, c: &AttnCache, dy: &Array2<f64>) -> (Array2<f64>, Array2<f64>) {
        let dctx = self.o.backward(p, g, &c.ctx, dy);
        let d = c.q.ncols();
        let dh = d / self.heads;
        let scale = 1.0 / (dh as f64).sqrt();
        let mut dq = Array2::zeros(c.q.raw_dim());
        let mut dk = Array2::zeros(c.k.raw_dim());
        let mut dv = Array2::zeros(c.v.raw_dim());
        for h in 0..self.heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let pr = &c.probs[h];
            let dctx_h = dctx.slice(cols);
            dv.slice_mut(cols).assign(&pr.t().dot(&dctx_h));
            let dp = dctx_h.dot(&c.v.slice(cols).t());
            let mut ds = pr * &dp;
            let row_dot = ds.sum_axis(Axis(1));
            ds = &ds - &(pr * &row_dot.insert_axis(Axis(1)));
            if let Some(m) = &c.mask {
                for (j, keep) in m.iter().enumerate() {
                    if !keep {
                        ds.column_mut(j).fill(0.0);
                    }
                }
            }
            ds *= scale;
            dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
        }
        let dxq = self.q.backward(p, g, &c.xq, &dq);
        let dxkv = self.k.backward(p, g, &c.xkv, &dk) + self.v.backward(p, g, &c.xkv, &dv);
        (dxq, dxkv)
    }
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2 / pi)

pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + 0.044715 * x * x * x)).tanh())
}

pub(crate) fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_C * (x + 0.044715 * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * 0.044715 * x * x)
}

#[derive(Clone, Debug)]
pub(crate) struct FeedForward {
    pub up: Linear,
    pub down: Linear,
}

pub(crate) struct FfnCache {
    x: Array2<f64>,
    pre: Array2<f64>,
    act: Array2<f64>,
}

impl FeedForward {
    pub fn new<R: Rng>(p: &mut ParamStore, name: &str, d: usize, hidden: usize, std: f64, rng: &mut R) -> Self {
        Self {
            up: Linear::new(p, &format!("{name}.up"), d, hidden, std, rng),
            down: Linear::new(p, &format!("{name}.down"), hidden, d, std, rng),
        }
    }

    pub fn forward(&self, p: &ParamStore, x: &Array2<f64>) -> (Array2<f64>, FfnCache) {
        let pre = self.up.forward(p, x);
        let act = pre.mapv(gelu);
        let y = self.down.forward(p, &act);
        (y, FfnCache { x: x.clone(), pre, act })
    }

    pub fn backward(&self, p: &ParamStore, g: &mut Grads, c: &FfnCache, dy: &Array2<f64>) -> Array2<f64> {
        let dact = self.down.backward(p, g, &c.act, dy);
        let dpre = dact * c.pre.mapv(gelu_grad);
        self.up.backward(p, g, &c.x, &dpre)
    }
}

/// Pre-norm transformer layer: `x + attn(ln(x))`, then `x + ffn(ln(x))`.
#[derive(Clone, Debug)]
pub(crate) struct EncoderLayer {
    pub ln_attn: LayerNorm,
    pub attn: Attention,
    pub ln_ffn: LayerNorm,
    pub ffn: FeedForward,
}

pub(crate) struct EncoderCache {
    ln1: LnCache,
    pub attn: AttnCache,
    ln2: LnCache,
    ffn: FfnCache,
}

impl EncoderLayer {
    pub fn new<R: Rng>(
        p: &mut ParamStore,
        name: &str,
        d: usize,
        heads: usize,
        hidden: usize,
        std: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            ln_attn: LayerNorm::new(p, &format!("{name}.attn_norm"), d),
            attn: Attention::new(p, &format!("{name}.attn"), d, heads, std, rng),
            ln_ffn: LayerNorm::new(p, &format!("{name}.ffn_norm"), d),
            ffn: FeedForward::new(p, &format!("{name}.ffn"), d, hidden, std, rng),
        }
    }

    pub fn forward(&self, p: &ParamStore, x: &Array2<f64>, mask: Option<&[bool]>) -> (Array2<f64>, EncoderCache) {
        let (a, ln1) = self.ln_attn.forward(p, x);
        let (att, attn) = self.attn.forward(p, &a, &a, mask);
        let x1 = x + &att;
        let (b, ln2) = self.ln_ffn.forward(p, &x1);
        let (f, ffn) = self.ffn.forward(p, &b);
        (x1 + f, EncoderCache { ln1, attn, ln2, ffn })
    }

    pub fn backward(&self, p: &ParamStore, g: &mut Grads, c: &EncoderCache, dy: &Array2<f64>) -> Array2<f64> {
        let db = self.ffn.backward(p, g, &c.ffn, dy);
        let dx1 = dy + &self.ln_ffn.backward(p, g, &c.ln2, &db);
        let (dq, dkv) = self.attn.backward(p, g, &c.attn, &dx1);
        let da = dq + dkv;
        dx1 + self.ln_attn.backward(p, g, &c.ln1, &da)
    }
}

/// One cross-modality block: both branches cross-attend to each other in
/// parallel, then each runs its own self-attention + FFN layer.
#[derive(Clone, Debug)]
pub(crate) struct CrossBlock {
    pub ln_vis: LayerNorm,
    pub ln_txt: LayerNorm,
    pub vis_cross: Attention,
    pub txt_cross: Attention,
    pub vis_layer: EncoderLayer,
    pub txt_layer: EncoderLayer,
}

pub(crate) struct CrossCache {
    ln_vis: LnCache,
    ln_txt: LnCache,
    pub vis_cross: AttnCache,
    pub txt_cross: AttnCache,
    pub vis_layer: EncoderCache,
    pub txt_layer: EncoderCache,
}

impl CrossBlock {
    pub fn new<R: Rng>(
        p: &mut ParamStore,
        name: &str,
        d: usize,
        heads: usize,
        hidden: usize,
        std: f64,
        rng: &mut R,
    ) -> Self {
        Self {
            ln_vis: LayerNorm::new(p, &format!("{name}.visual_cross_norm"), d),
            ln_txt: LayerNorm::new(p, &format!("{name}.text_cross_norm"), d),
            vis_cross: Attention::new(p, &format!("{name}.visual_cross"), d, heads, std, rng),
            txt_cross: Attention::new(p, &format!("{name}.text_cross"), d, heads, std, rng),
            vis_layer: EncoderLayer::new(p, &format!("{name}.visual_self"), d, heads, hidden, std, rng),
            txt_layer: EncoderLayer::new(p, &format!("{name}.text_self"), d, heads, hidden, std, rng),
        }
    }

    pub fn forward(
        &self,
        p: &ParamStore,
        h: &Array2<f64>,
        z: &Array2<f64>,
        txt_mask: Option<&[bool]>,
    ) -> (Array2<f64>, Array2<f64>, CrossCache) {
        let (hn, ln_vis) = self.ln_vis.forward(p, h);
        let (zn, ln_txt) = self.ln_txt.forward(p, z);
        let (hc, vis_cross) = self.vis_cross.forward(p, &hn, &zn, txt_mask);
        let (zc, txt_cross) = self.txt_cross.forward(p, &zn, &hn, None);
        let h1 = h + &hc;
        let z1 = z + &zc;
        let (h2, vis_layer) = self.vis_layer.forward(p, &h1, None);
        let (z2, txt_layer) = self.txt_layer.forward(p, &z1, txt_mask);
        let cache = CrossCache {
            ln_vis,
            ln_txt,
            vis_cross,
            txt_cross,
            vis_layer,
            txt_layer,
        };
        (h2, z2, cache)
    }

    pub fn backward(
        &self,
        p: &ParamStore,
        g: &mut Grads,
        c: &CrossCache,
        dh2: &Array2<f64>,
        dz2: &Array2<f64>,
    ) -> (Array2<f64>, Array2<f64>) {
        let dh1 = self.vis_layer.backward(p, g, &c.vis_layer, dh2);
        let dz1 = self.txt_layer.backward(p, g, &c.txt_layer, dz2);
        let (dhn_q, dzn_kv) = self.vis_cross.backward(p, g, &c.vis_cross, &dh1);
        let (dzn_q, dhn_kv) = self.txt_cross.backward(p, g, &c.txt_cross, &dz1);
        let dh = &dh1 + &self.ln_vis.backward(p, g, &c.ln_vis, &(dhn_q + dhn_kv));
        let dz = &dz1 + &self.ln_txt.backward(p, g, &c.ln_txt, &(dzn_q + dzn_kv));
        (dh, dz)
    }
}
