//! Pre-norm transformer encoder over a flat `f64` parameter vector, with a
//! hand-written backward pass.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{EncoderConfig, EncoderError};
use crate::hashing::derive_seed;
use crate::mli::InjectionDirection;

const LN_EPS: f64 = 1e-5;

/// Parameter tensors of one layer, in storage order.
pub const LAYER_TENSORS: [&str; 16] = [
    "ln1_g", "ln1_b", "wq", "bq", "wk", "bk", "wv", "bv", "wo", "bo", "ln2_g", "ln2_b", "w1",
    "b1", "w2", "b2",
];

const LN1_G: usize = 0;
const LN1_B: usize = 1;
const WQ: usize = 2;
const BQ: usize = 3;
const WK: usize = 4;
const BK: usize = 5;
const WV: usize = 6;
const BV: usize = 7;
const WO: usize = 8;
const BO: usize = 9;
const LN2_G: usize = 10;
const LN2_B: usize = 11;
const W1: usize = 12;
const B1: usize = 13;
const W2: usize = 14;
const B2: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TensorKind {
    Embedding,
    Weight,
    Bias,
    NormGain,
    NormBias,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Segment {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
    pub offset: usize,
    pub kind: TensorKind,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.offset..self.offset + self.len()
    }
}

/// Storage order: `tok_emb`, `pos_emb`, then per layer [`LAYER_TENSORS`],
/// then the final norm `ln_g`, `ln_b`. Matrices are row-major and applied as
/// `x · W`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub segments: Vec<Segment>,
    pub total: usize,
    layers: usize,
}

impl Layout {
    pub fn new(cfg: &EncoderConfig, vocab: usize) -> Self {
        let (d, f) = (cfg.d, cfg.ffn);
        let mut segments = Vec::new();
        let mut offset = 0;
        let mut push = |name: String, rows: usize, cols: usize, kind: TensorKind| {
            segments.push(Segment { name, rows, cols, offset, kind });
            offset += rows * cols;
        };
        push("tok_emb".into(), vocab, d, TensorKind::Embedding);
        push("pos_emb".into(), cfg.max_len, d, TensorKind::Embedding);
        for l in 0..cfg.layers {
            for (i, name) in LAYER_TENSORS.iter().enumerate() {
                let (rows, cols, kind) = match i {
                    LN1_G | LN2_G => (1, d, TensorKind::NormGain),
                    LN1_B | LN2_B => (1, d, TensorKind::NormBias),
                    WQ | WK | WV | WO => (d, d, TensorKind::Weight),
                    BQ | BK | BV | BO | B2 => (1, d, TensorKind::Bias),
                    W1 => (d, f, TensorKind::Weight),
                    B1 => (1, f, TensorKind::Bias),
                    W2 => (f, d, TensorKind::Weight),
                    _ => unreachable!(),
                };
                push(format!("layer{l}.{name}"), rows, cols, kind);
            }
        }
        push("ln_g".into(), 1, d, TensorKind::NormGain);
        push("ln_b".into(), 1, d, TensorKind::NormBias);
        Layout { segments, total: offset, layers: cfg.layers }
    }

    fn tok(&self) -> &Segment {
        &self.segments[0]
    }

    fn pos(&self) -> &Segment {
        &self.segments[1]
    }

    fn layer(&self, l: usize, t: usize) -> &Segment {
        &self.segments[2 + l * LAYER_TENSORS.len() + t]
    }

    fn final_g(&self) -> &Segment {
        &self.segments[2 + self.layers * LAYER_TENSORS.len()]
    }

    fn final_b(&self) -> &Segment {
        &self.segments[3 + self.layers * LAYER_TENSORS.len()]
    }

    /// Whether decoupled weight decay applies to each parameter.
    pub fn decay_mask(&self) -> Vec<bool> {
        let mut mask = vec![false; self.total];
        for seg in &self.segments {
            if matches!(seg.kind, TensorKind::Weight | TensorKind::Embedding) {
                mask[seg.range()].iter_mut().for_each(|m| *m = true);
            }
        }
        mask
    }
}

fn mat<'a>(p: &'a [f64], seg: &Segment) -> ArrayView2<'a, f64> {
    ArrayView2::from_shape((seg.rows, seg.cols), &p[seg.range()]).expect("segment shape")
}

fn vecv<'a>(p: &'a [f64], seg: &Segment) -> ArrayView1<'a, f64> {
    ArrayView1::from_shape(seg.len(), &p[seg.range()]).expect("segment shape")
}

fn add_mat(g: &mut [f64], seg: &Segment, m: &Array2<f64>) {
    debug_assert_eq!(m.len(), seg.len());
    for (dst, src) in g[seg.range()].iter_mut().zip(m.iter()) {
        *dst += src;
    }
}

fn add_vec(g: &mut [f64], seg: &Segment, v: &Array1<f64>) {
    for (dst, src) in g[seg.range()].iter_mut().zip(v.iter()) {
        *dst += src;
    }
}

/// Fan-in scaled uniform init; norms start as identity.
pub fn init_params(cfg: &EncoderConfig, layout: &Layout) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, "encoder-init"));
    let mut p = vec![0.0; layout.total];
    for seg in &layout.segments {
        let bound = match seg.kind {
            TensorKind::Embedding if seg.name == "pos_emb" => 0.1,
            TensorKind::Embedding => 1.0,
            TensorKind::Weight => 1.0 / (seg.rows as f64).sqrt(),
            TensorKind::NormGain => {
                p[seg.range()].iter_mut().for_each(|x| *x = 1.0);
                continue;
            }
            TensorKind::Bias | TensorKind::NormBias => continue,
        };
        for x in &mut p[seg.range()] {
            *x = rng.random_range(-bound..bound);
        }
    }
    p
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let t = (GELU_K * (x + GELU_C * x * x * x)).tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_K * (1.0 + 3.0 * GELU_C * x * x)
}

struct NormCache {
    xhat: Array2<f64>,
    rstd: Array1<f64>,
}

fn layer_norm(x: &Array2<f64>, g: ArrayView1<f64>, b: ArrayView1<f64>) -> (Array2<f64>, NormCache) {
    let (n, d) = x.dim();
    let mut xhat = Array2::zeros((n, d));
    let mut rstd = Array1::zeros(n);
    for i in 0..n {
        let row = x.row(i);
        let mu = row.sum() / d as f64;
        let var = row.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / d as f64;
        let r = 1.0 / (var + LN_EPS).sqrt();
        rstd[i] = r;
        Zip::from(xhat.row_mut(i)).and(row).for_each(|h, &v| *h = (v - mu) * r);
    }
    let y = &xhat * &g + b;
    (y, NormCache { xhat, rstd })
}

/// Returns dx; accumulates dg, db.
fn layer_norm_backward(
    dy: &Array2<f64>,
    cache: &NormCache,
    g: ArrayView1<f64>,
    dg: &mut Array1<f64>,
    db: &mut Array1<f64>,
) -> Array2<f64> {
    let (n, d) = dy.dim();
    *dg += &(dy * &cache.xhat).sum_axis(Axis(0));
    *db += &dy.sum_axis(Axis(0));
    let dxhat = dy * &g;
    let mut dx = Array2::zeros((n, d));
    for i in 0..n {
        let dh = dxhat.row(i);
        let xh = cache.xhat.row(i);
        let m1 = dh.sum() / d as f64;
        let m2 = dh.dot(&xh) / d as f64;
        let r = cache.rstd[i];
        Zip::from(dx.row_mut(i))
            .and(dh)
            .and(xh)
            .for_each(|o, &a, &h| *o = r * (a - m1 - h * m2));
    }
    dx
}

fn softmax_rows(m: &mut Array2<f64>) {
    for mut row in m.rows_mut() {
        let mx = row.fold(f64::NEG_INFINITY, |a, &b| a.max(b));
        row.mapv_inplace(|v| (v - mx).exp());
        let z = row.sum();
        row /= z;
    }
}

struct LayerCache {
    ln1: NormCache,
    a: Array2<f64>,
    q: Array2<f64>,
    k: Array2<f64>,
    v: Array2<f64>,
    probs: Vec<Array2<f64>>,
    ctx: Array2<f64>,
    ln2: NormCache,
    c: Array2<f64>,
    h_pre: Array2<f64>,
    h_act: Array2<f64>,
}

/// Per-layer token states. `layers[0]` is embeddings plus positions and
/// `layers[l]` is the residual stream after block `l` (after the injection
/// hook when one fires there). `output` is the final-norm projection that
/// sentence embeddings pool over.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenStates {
    pub layers: Vec<Array2<f64>>,
    pub output: Array2<f64>,
}

impl HiddenStates {
    pub fn tokens(&self) -> usize {
        self.output.nrows()
    }

    /// Mean over token rows of the output states.
    pub fn pooled(&self) -> Vec<f64> {
        self.output
            .mean_axis(Axis(0))
            .expect("at least one token")
            .to_vec()
    }
}

/// States on both sides of the injection hook.
#[derive(Debug, Clone, PartialEq)]
pub struct HookTrace {
    pub layer: usize,
    pub pre: Array2<f64>,
    pub post: Array2<f64>,
}

pub(crate) struct Trace {
    ids: Vec<u32>,
    layers: Vec<LayerCache>,
    final_norm: NormCache,
    pub hidden: HiddenStates,
    pub hook: Option<HookTrace>,
}

pub(crate) fn check_injection(
    cfg: &EncoderConfig,
    inj: Option<&InjectionDirection>,
) -> Result<(), EncoderError> {
    if let Some(inj) = inj {
        if inj.layer < 1 || inj.layer > cfg.layers {
            return Err(EncoderError::LayerOutOfRange { layer: inj.layer, max: cfg.layers });
        }
        if inj.u.len() != cfg.d {
            return Err(EncoderError::DimensionMismatch { expected: cfg.d, got: inj.u.len() });
        }
    }
    Ok(())
}

pub(crate) fn forward(
    cfg: &EncoderConfig,
    layout: &Layout,
    p: &[f64],
    ids: &[u32],
    inj: Option<&InjectionDirection>,
    keep_hook: bool,
) -> Trace {
    let (n, d, heads) = (ids.len(), cfg.d, cfg.heads);
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();
    let tok = mat(p, layout.tok());
    let pos = mat(p, layout.pos());
    let mut x = Array2::zeros((n, d));
    for (i, &id) in ids.iter().enumerate() {
        let mut row = x.row_mut(i);
        row.assign(&tok.row(id as usize));
        row += &pos.row(i);
    }
    let mut hidden = vec![x.clone()];
    let mut caches = Vec::with_capacity(cfg.layers);
    let mut hook = None;
    for l in 0..cfg.layers {
        let seg = |t| layout.layer(l, t);
        let (a, ln1) = layer_norm(&x, vecv(p, seg(LN1_G)), vecv(p, seg(LN1_B)));
        let q = a.dot(&mat(p, seg(WQ))) + vecv(p, seg(BQ));
        let k = a.dot(&mat(p, seg(WK))) + vecv(p, seg(BK));
        let v = a.dot(&mat(p, seg(WV))) + vecv(p, seg(BV));
        let mut ctx = Array2::zeros((n, d));
        let mut probs = Vec::with_capacity(heads);
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let mut sc = q.slice(cols).dot(&k.slice(cols).t()) * scale;
            softmax_rows(&mut sc);
            ctx.slice_mut(cols).assign(&sc.dot(&v.slice(cols)));
            probs.push(sc);
        }
        let o = ctx.dot(&mat(p, seg(WO))) + vecv(p, seg(BO));
        x += &o;
        let (c, ln2) = layer_norm(&x, vecv(p, seg(LN2_G)), vecv(p, seg(LN2_B)));
        let h_pre = c.dot(&mat(p, seg(W1))) + vecv(p, seg(B1));
        let h_act = h_pre.mapv(gelu);
        let f = h_act.dot(&mat(p, seg(W2))) + vecv(p, seg(B2));
        x += &f;
        if let Some(inj) = inj.filter(|inj| inj.layer == l + 1) {
            let pre = keep_hook.then(|| x.clone());
            // λ = 0 leaves the stream untouched bit for bit.
            if inj.lambda != 0.0 {
                let shift = Array1::from_iter(inj.u.iter().map(|u| inj.lambda * u));
                x += &shift;
            }
            if let Some(pre) = pre {
                hook = Some(HookTrace { layer: l + 1, pre, post: x.clone() });
            }
        }
        hidden.push(x.clone());
        caches.push(LayerCache { ln1, a, q, k, v, probs, ctx, ln2, c, h_pre, h_act });
    }
    let (out, final_norm) = layer_norm(&x, vecv(p, layout.final_g()), vecv(p, layout.final_b()));
    Trace {
        ids: ids.to_vec(),
        layers: caches,
        final_norm,
        hidden: HiddenStates { layers: hidden, output: out },
        hook,
    }
}

/// Accumulates into `grad` the gradient of a scalar whose derivative with
/// respect to the pooled embedding is `d_emb`.
pub(crate) fn backward(
    cfg: &EncoderConfig,
    layout: &Layout,
    p: &[f64],
    trace: &Trace,
    d_emb: &[f64],
    grad: &mut [f64],
) {
    let n = trace.ids.len();
    let (d, heads) = (cfg.d, cfg.heads);
    let dh = d / heads;
    let scale = 1.0 / (dh as f64).sqrt();

    let de = ArrayView1::from(d_emb);
    let mut dout = Array2::zeros((n, d));
    for mut row in dout.rows_mut() {
        row.assign(&(&de / n as f64));
    }
    let mut dg = Array1::zeros(d);
    let mut db = Array1::zeros(d);
    let mut dx = layer_norm_backward(
        &dout,
        &trace.final_norm,
        vecv(p, layout.final_g()),
        &mut dg,
        &mut db,
    );
    add_vec(grad, layout.final_g(), &dg);
    add_vec(grad, layout.final_b(), &db);

    for l in (0..cfg.layers).rev() {
        let seg = |t| layout.layer(l, t);
        let c = &trace.layers[l];

        // feed-forward block
        let w2 = mat(p, seg(W2));
        add_mat(grad, seg(W2), &c.h_act.t().dot(&dx));
        add_vec(grad, seg(B2), &dx.sum_axis(Axis(0)));
        let mut dh_pre = dx.dot(&w2.t());
        Zip::from(&mut dh_pre).and(&c.h_pre).for_each(|g, &h| *g *= gelu_grad(h));
        let w1 = mat(p, seg(W1));
        add_mat(grad, seg(W1), &c.c.t().dot(&dh_pre));
        add_vec(grad, seg(B1), &dh_pre.sum_axis(Axis(0)));
        let dc = dh_pre.dot(&w1.t());
        let mut dg = Array1::zeros(d);
        let mut db = Array1::zeros(d);
        dx += &layer_norm_backward(&dc, &c.ln2, vecv(p, seg(LN2_G)), &mut dg, &mut db);
        add_vec(grad, seg(LN2_G), &dg);
        add_vec(grad, seg(LN2_B), &db);

        // attention block
        let wo = mat(p, seg(WO));
        add_mat(grad, seg(WO), &c.ctx.t().dot(&dx));
        add_vec(grad, seg(BO), &dx.sum_axis(Axis(0)));
        let dctx = dx.dot(&wo.t());
        let mut dq = Array2::zeros((n, d));
        let mut dk = Array2::zeros((n, d));
        let mut dv = Array2::zeros((n, d));
        for h in 0..heads {
            let cols = s![.., h * dh..(h + 1) * dh];
            let pr = &c.probs[h];
            let d_ctx_h = dctx.slice(cols);
            let dp = d_ctx_h.dot(&c.v.slice(cols).t());
            dv.slice_mut(cols).assign(&pr.t().dot(&d_ctx_h));
            let row_dot = (&dp * pr).sum_axis(Axis(1));
            let mut ds = dp;
            for (i, mut row) in ds.rows_mut().into_iter().enumerate() {
                row -= row_dot[i];
            }
            ds = ds * pr * scale;
            dq.slice_mut(cols).assign(&ds.dot(&c.k.slice(cols)));
            dk.slice_mut(cols).assign(&ds.t().dot(&c.q.slice(cols)));
        }
        let mut da = Array2::zeros((n, d));
        for (w, b, g) in [(WQ, BQ, &dq), (WK, BK, &dk), (WV, BV, &dv)] {
            add_mat(grad, seg(w), &c.a.t().dot(g));
            add_vec(grad, seg(b), &g.sum_axis(Axis(0)));
            da += &g.dot(&mat(p, seg(w)).t());
        }
        let mut dg = Array1::zeros(d);
        let mut db = Array1::zeros(d);
        dx += &layer_norm_backward(&da, &c.ln1, vecv(p, seg(LN1_G)), &mut dg, &mut db);
        add_vec(grad, seg(LN1_G), &dg);
        add_vec(grad, seg(LN1_B), &db);
    }

    let tok = layout.tok();
    let pos = layout.pos();
    for (i, &id) in trace.ids.iter().enumerate() {
        let row = dx.row(i);
        let t0 = tok.offset + id as usize * d;
        let p0 = pos.offset + i * d;
        for k in 0..d {
            grad[t0 + k] += row[k];
            grad[p0 + k] += row[k];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_totals() {
        let cfg = EncoderConfig { d: 8, layers: 2, heads: 2, ffn: 16, max_len: 5, seed: 0 };
        let lay = Layout::new(&cfg, 10);
        let per_layer = 4 * 8 + 4 * 64 + 8 * 16 + 16 + 16 * 8 + 8 + 4 * 8;
        assert_eq!(lay.total, 10 * 8 + 5 * 8 + 2 * per_layer + 16);
        assert_eq!(lay.segments.last().unwrap().range().end, lay.total);
    }

    #[test]
    fn gelu_derivative() {
        for &x in &[-3.0, -0.5, 0.0, 0.7, 2.5] {
            let fd = (gelu(x + 1e-6) - gelu(x - 1e-6)) / 2e-6;
            assert!((fd - gelu_grad(x)).abs() < 1e-8);
        }
    }
}
