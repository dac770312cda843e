use std::ops::Range;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::kernels::{
    dot, gelu, gelu_grad, layer_norm, layer_norm_backward, linear, linear_backward, matmul_acc,
    matmul_at_acc, matmul_bt_acc, softmax_in_place, LayerNormCache,
};
use super::params::{LayerOffsets, ParamLayout};
use super::{ModelConfig, Real};
use crate::corpus::{TokenId, TrainingExample, PAD};
use crate::seed::{self, Rng};
use crate::{Error, Result};

const INIT_STD: f64 = 0.02;

/// Decoder-only transformer with its parameters.
#[derive(Debug, Clone)]
pub struct Model<F: Real = f64> {
    config: ModelConfig,
    layout: ParamLayout,
    params: Vec<F>,
}

/// Summed negative log-likelihood and the number of scored tokens.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LossSummary {
    pub nll_sum: f64,
    pub tokens: usize,
}

impl LossSummary {
    pub fn mean(&self) -> f64 {
        self.nll_sum / self.tokens as f64
    }

    pub fn perplexity(&self) -> f64 {
        self.mean().exp()
    }

    fn add(&mut self, other: LossSummary) {
        self.nll_sum += other.nll_sum;
        self.tokens += other.tokens;
    }
}

/// Gradient vector laid out exactly like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<F>(pub Vec<F>);

impl<F: Real> Gradients<F> {
    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g.f64() * g.f64()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|g| g.is_finite())
    }
}

struct LayerCache<F> {
    ln1: LayerNormCache<F>,
    a: Vec<F>,
    q: Vec<F>,
    k: Vec<F>,
    v: Vec<F>,
    /// `[head][i][j]`, only `j <= i` populated
    probs: Vec<F>,
    o: Vec<F>,
    mask_attn: Option<Vec<F>>,
    ln2: LayerNormCache<F>,
    c: Vec<F>,
    f: Vec<F>,
    g: Vec<F>,
    mask_ffn: Option<Vec<F>>,
}

struct ForwardCache<F> {
    layers: Vec<LayerCache<F>>,
    lnf: LayerNormCache<F>,
    hf: Vec<F>,
}

/// Per-layer keys and values for incremental decoding.
#[derive(Debug, Clone)]
pub struct KvCache<F> {
    keys: Vec<Vec<F>>,
    values: Vec<Vec<F>>,
    len: usize,
}

impl<F> KvCache<F> {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

fn pair_mut<F>(buf: &mut [F], first: Range<usize>, second: Range<usize>) -> (&mut [F], &mut [F]) {
    debug_assert!(first.end <= second.start);
    let (lo, hi) = buf.split_at_mut(second.start);
    (&mut lo[first], &mut hi[..second.end - second.start])
}

fn dropout_mask<F: Real>(len: usize, p: f64, rng: &mut Rng) -> Vec<F> {
    let keep = F::of(1.0 / (1.0 - p));
    (0..len)
        .map(|_| if rng.gen_bool(p) { F::zero() } else { keep })
        .collect()
}

impl<F: Real> Model<F> {
    /// Random initialization: normal(0, 0.02) weights, output projections of
    /// each residual branch scaled by `1/sqrt(2·n_layers)`, unit gains, zero
    /// biases.
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        let mut params = vec![F::zero(); layout.total()];
        let mut rng = seed::component_rng(seed, "init", 0);
        let base = Normal::new(0.0, INIT_STD).expect("valid std");
        let resid_scale = 1.0 / (2.0 * config.n_layers as f64).sqrt();
        for t in layout.tensors() {
            let short = t.name.rsplit('.').next().unwrap_or(&t.name);
            let slot = &mut params[t.range()];
            match short {
                "gain" => slot.fill(F::one()),
                "bias" | "bq" | "bk" | "bv" | "bo" | "b1" | "b2" => {}
                "wo" | "w2" => {
                    for p in slot.iter_mut() {
                        *p = F::of(base.sample(&mut rng) * resid_scale);
                    }
                }
                _ => {
                    for p in slot.iter_mut() {
                        *p = F::of(base.sample(&mut rng));
                    }
                }
            }
        }
        Ok(Model {
            config,
            layout,
            params,
        })
    }

    pub fn from_params(config: ModelConfig, params: Vec<F>) -> Result<Self> {
        config.validate()?;
        let layout = ParamLayout::new(&config);
        if params.len() != layout.total() {
            return Err(Error::Config(format!(
                "expected {} parameters, got {}",
                layout.total(),
                params.len()
            )));
        }
        Ok(Model {
            config,
            layout,
            params,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn params(&self) -> &[F] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [F] {
        &mut self.params
    }

    pub fn num_params(&self) -> usize {
        self.params.len()
    }

    pub fn cast<G: Real>(&self) -> Model<G> {
        Model {
            config: self.config.clone(),
            layout: self.layout.clone(),
            params: self.params.iter().map(|p| G::of(p.f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Row of the token-embedding table.
    pub fn embedding_row(&self, id: TokenId) -> Result<&[F]> {
        let d = self.config.d_model;
        let id = id as usize;
        if id >= self.config.vocab_size {
            return Err(Error::IdOutOfRange(id as TokenId, self.config.vocab_size));
        }
        let start = self.layout.tok_emb + id * d;
        Ok(&self.params[start..start + d])
    }

    fn slice(&self, offset: usize, len: usize) -> &[F] {
        &self.params[offset..offset + len]
    }

    fn check_ids(&self, ids: &[TokenId]) -> Result<()> {
        if ids.len() > self.config.max_len {
            return Err(Error::SequenceTooLong {
                len: ids.len(),
                max: self.config.max_len,
            });
        }
        if let Some(&bad) = ids.iter().find(|&&i| i as usize >= self.config.vocab_size) {
            return Err(Error::IdOutOfRange(bad, self.config.vocab_size));
        }
        Ok(())
    }

    /// Unnormalized next-token scores, `[len × vocab]` row-major. Row `i`
    /// depends on `ids[..=i]` only.
    pub fn forward(&self, ids: &[TokenId]) -> Result<Vec<F>> {
        self.check_ids(ids)?;
        Ok(self.forward_cached(ids, None).0)
    }

    fn embed_tokens(&self, ids: &[TokenId], start_pos: usize) -> Vec<F> {
        let d = self.config.d_model;
        let mut x = vec![F::zero(); ids.len() * d];
        for (i, &id) in ids.iter().enumerate() {
            let e = self.slice(self.layout.tok_emb + id as usize * d, d);
            let p = self.slice(self.layout.pos_emb + (start_pos + i) * d, d);
            for c in 0..d {
                x[i * d + c] = e[c] + p[c];
            }
        }
        x
    }

    fn forward_cached(
        &self,
        ids: &[TokenId],
        mut dropout_rng: Option<&mut Rng>,
    ) -> (Vec<F>, ForwardCache<F>) {
        let cfg = &self.config;
        let (t, d, f, h) = (ids.len(), cfg.d_model, cfg.d_ffn, cfg.n_heads);
        let dh = cfg.head_dim();
        let scale = F::of(1.0 / (dh as f64).sqrt());
        let p_drop = cfg.dropout;

        let mut x = self.embed_tokens(ids, 0);
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for lo in &self.layout.layers {
            let (a, ln1) = layer_norm(&x, self.slice(lo.ln1_g, d), self.slice(lo.ln1_b, d), t, d);
            let q = linear(&a, self.slice(lo.wq, d * d), self.slice(lo.bq, d), t, d, d);
            let k = linear(&a, self.slice(lo.wk, d * d), self.slice(lo.bk, d), t, d, d);
            let v = linear(&a, self.slice(lo.wv, d * d), self.slice(lo.bv, d), t, d, d);

            let mut probs = vec![F::zero(); h * t * t];
            let mut o = vec![F::zero(); t * d];
            for head in 0..h {
                let cols = head * dh..(head + 1) * dh;
                for i in 0..t {
                    let row = &mut probs[(head * t + i) * t..(head * t + i) * t + i + 1];
                    let qi = &q[i * d + cols.start..i * d + cols.end];
                    for (j, s) in row.iter_mut().enumerate() {
                        *s = dot(qi, &k[j * d + cols.start..j * d + cols.end]) * scale;
                    }
                    softmax_in_place(row);
                    let oi = &mut o[i * d + cols.start..i * d + cols.end];
                    for (j, &pij) in row.iter().enumerate() {
                        for (oc, &vc) in oi.iter_mut().zip(&v[j * d + cols.start..j * d + cols.end]) {
                            *oc += pij * vc;
                        }
                    }
                }
            }

            let attn = linear(&o, self.slice(lo.wo, d * d), self.slice(lo.bo, d), t, d, d);
            let mask_attn = match (&mut dropout_rng, p_drop > 0.0) {
                (Some(rng), true) => Some(dropout_mask::<F>(t * d, p_drop, rng)),
                _ => None,
            };
            match &mask_attn {
                Some(m) => x.iter_mut().zip(&attn).zip(m).for_each(|((xi, &ai), &mi)| *xi += ai * mi),
                None => x.iter_mut().zip(&attn).for_each(|(xi, &ai)| *xi += ai),
            }

            let (c, ln2) = layer_norm(&x, self.slice(lo.ln2_g, d), self.slice(lo.ln2_b, d), t, d);
            let pre = linear(&c, self.slice(lo.w1, d * f), self.slice(lo.b1, f), t, d, f);
            let g: Vec<F> = pre.iter().map(|&z| gelu(z)).collect();
            let y = linear(&g, self.slice(lo.w2, f * d), self.slice(lo.b2, d), t, f, d);
            let mask_ffn = match (&mut dropout_rng, p_drop > 0.0) {
                (Some(rng), true) => Some(dropout_mask::<F>(t * d, p_drop, rng)),
                _ => None,
            };
            match &mask_ffn {
                Some(m) => x.iter_mut().zip(&y).zip(m).for_each(|((xi, &yi), &mi)| *xi += yi * mi),
                None => x.iter_mut().zip(&y).for_each(|(xi, &yi)| *xi += yi),
            }

            layers.push(LayerCache {
                ln1,
                a,
                q,
                k,
                v,
                probs,
                o,
                mask_attn,
                ln2,
                c,
                f: pre,
                g,
                mask_ffn,
            });
        }

        let (hf, lnf) = layer_norm(
            &x,
            self.slice(self.layout.lnf_g, d),
            self.slice(self.layout.lnf_b, d),
            t,
            d,
        );
        let vocab = cfg.vocab_size;
        let mut logits = vec![F::zero(); t * vocab];
        matmul_bt_acc(&hf, self.slice(self.layout.tok_emb, vocab * d), &mut logits, t, d, vocab);
        (logits, ForwardCache { layers, lnf, hf })
    }

    /// Per-position loss terms: position `i` predicts `ids[i + 1]` when
    /// `i >= first_scored` and the target is not PAD. Fills `dlogits` with
    /// `softmax - onehot` on scored rows when given.
    fn score(
        &self,
        ids: &[TokenId],
        logits: &[F],
        first_scored: usize,
        mut dlogits: Option<&mut [F]>,
    ) -> LossSummary {
        let vocab = self.config.vocab_size;
        let mut summary = LossSummary::default();
        for i in first_scored..ids.len().saturating_sub(1) {
            let target = ids[i + 1];
            if target == PAD {
                continue;
            }
            let row = &logits[i * vocab..(i + 1) * vocab];
            let mut probs = row.to_vec();
            let lse = softmax_in_place(&mut probs);
            summary.nll_sum += (lse - row[target as usize]).f64();
            summary.tokens += 1;
            if let Some(dl) = dlogits.as_deref_mut() {
                probs[target as usize] -= F::one();
                dl[i * vocab..(i + 1) * vocab].copy_from_slice(&probs);
            }
        }
        summary
    }

    fn first_scored(example: &TrainingExample, target_only: bool) -> usize {
        if target_only {
            example.sep_index
        } else {
            0
        }
    }

    /// Summed NLL over a dataset.
    pub fn loss_summary(&self, examples: &[TrainingExample], target_only: bool) -> Result<LossSummary> {
        for ex in examples {
            self.check_ids(&ex.input_ids)?;
        }
        let parts: Vec<LossSummary> = examples
            .par_iter()
            .map(|ex| {
                let (logits, _) = self.forward_cached(&ex.input_ids, None);
                self.score(&ex.input_ids, &logits, Self::first_scored(ex, target_only), None)
            })
            .collect();
        let mut total = LossSummary::default();
        for p in parts {
            total.add(p);
        }
        Ok(total)
    }

    /// Mean next-token cross-entropy over all non-PAD positions of the batch.
    pub fn nll_loss(&self, batch: &[TrainingExample]) -> Result<f64> {
        let s = self.loss_summary(batch, false)?;
        if s.tokens == 0 {
            return Err(Error::Input("batch has no scored tokens".into()));
        }
        Ok(s.mean())
    }

    /// `exp(mean NLL)` over every non-PAD position.
    pub fn perplexity(&self, dataset: &[TrainingExample]) -> Result<f64> {
        let s = self.loss_summary(dataset, false)?;
        if s.tokens == 0 {
            return Err(Error::Input("dataset has no scored tokens".into()));
        }
        Ok(s.perplexity())
    }

    /// Mean loss and its exact gradient. With `dropout_seed` set and a
    /// positive dropout rate, example `i` draws its masks from
    /// `dropout_seed + i`.
    pub fn loss_and_grad(
        &self,
        batch: &[TrainingExample],
        target_only: bool,
        dropout_seed: Option<u64>,
    ) -> Result<(LossSummary, Gradients<F>)> {
        if batch.is_empty() {
            return Err(Error::Input("empty batch".into()));
        }
        for ex in batch {
            self.check_ids(&ex.input_ids)?;
        }
        // per-example buffers summed in batch order keep results independent
        // of the worker count
        let parts: Vec<(LossSummary, Vec<F>)> = batch
            .par_iter()
            .enumerate()
            .map(|(i, ex)| {
                let mut rng = dropout_seed.map(|s| seed::rng(s.wrapping_add(i as u64)));
                self.example_grad(ex, target_only, rng.as_mut())
            })
            .collect();
        let mut total = LossSummary::default();
        let mut grad = vec![F::zero(); self.params.len()];
        for (s, g) in parts {
            total.add(s);
            for (a, b) in grad.iter_mut().zip(&g) {
                *a += *b;
            }
        }
        if total.tokens == 0 {
            return Err(Error::Input("batch has no scored tokens".into()));
        }
        let inv = F::of(1.0 / total.tokens as f64);
        grad.iter_mut().for_each(|g| *g *= inv);
        Ok((total, Gradients(grad)))
    }

    /// Gradient of the summed NLL of one example.
    fn example_grad(
        &self,
        ex: &TrainingExample,
        target_only: bool,
        dropout_rng: Option<&mut Rng>,
    ) -> (LossSummary, Vec<F>) {
        let ids = &ex.input_ids;
        let (logits, cache) = self.forward_cached(ids, dropout_rng);
        let mut dlogits = vec![F::zero(); logits.len()];
        let summary = self.score(ids, &logits, Self::first_scored(ex, target_only), Some(&mut dlogits));
        let mut grads = vec![F::zero(); self.params.len()];
        self.backward(ids, &cache, &dlogits, &mut grads);
        (summary, grads)
    }

    fn backward(&self, ids: &[TokenId], cache: &ForwardCache<F>, dlogits: &[F], grads: &mut [F]) {
        let cfg = &self.config;
        let (t, d, f, h) = (ids.len(), cfg.d_model, cfg.d_ffn, cfg.n_heads);
        let vocab = cfg.vocab_size;
        let dh = cfg.head_dim();
        let scale = F::of(1.0 / (dh as f64).sqrt());
        let lay = &self.layout;

        // logits = hf · Eᵀ
        let emb = self.slice(lay.tok_emb, vocab * d);
        let mut dhf = vec![F::zero(); t * d];
        matmul_acc(dlogits, emb, &mut dhf, t, vocab, d);
        matmul_at_acc(dlogits, &cache.hf, &mut grads[lay.tok_emb..lay.tok_emb + vocab * d], t, vocab, d);

        let mut dx = {
            let (dg, db) = pair_mut(grads, lay.lnf_g..lay.lnf_g + d, lay.lnf_b..lay.lnf_b + d);
            layer_norm_backward(&dhf, &cache.lnf, self.slice(lay.lnf_g, d), dg, db, t, d)
        };

        for (lo, lc) in lay.layers.iter().zip(&cache.layers).rev() {
            let lo: &LayerOffsets = lo;
            // feed-forward branch
            let dy: Vec<F> = match &lc.mask_ffn {
                Some(m) => dx.iter().zip(m).map(|(&a, &b)| a * b).collect(),
                None => dx.clone(),
            };
            let dg = {
                let (dw, db) = pair_mut(grads, lo.w2..lo.w2 + f * d, lo.b2..lo.b2 + d);
                linear_backward(&lc.g, self.slice(lo.w2, f * d), &dy, dw, db, t, f, d)
            };
            let dpre: Vec<F> = dg.iter().zip(&lc.f).map(|(&g, &z)| g * gelu_grad(z)).collect();
            let dc = {
                let (dw, db) = pair_mut(grads, lo.w1..lo.w1 + d * f, lo.b1..lo.b1 + f);
                linear_backward(&lc.c, self.slice(lo.w1, d * f), &dpre, dw, db, t, d, f)
            };
            let dln2 = {
                let (dg, db) = pair_mut(grads, lo.ln2_g..lo.ln2_g + d, lo.ln2_b..lo.ln2_b + d);
                layer_norm_backward(&dc, &lc.ln2, self.slice(lo.ln2_g, d), dg, db, t, d)
            };
            dx.iter_mut().zip(&dln2).for_each(|(a, &b)| *a += b);

            // attention branch
            let dattn: Vec<F> = match &lc.mask_attn {
                Some(m) => dx.iter().zip(m).map(|(&a, &b)| a * b).collect(),
                None => dx.clone(),
            };
            let d_o = {
                let (dw, db) = pair_mut(grads, lo.wo..lo.wo + d * d, lo.bo..lo.bo + d);
                linear_backward(&lc.o, self.slice(lo.wo, d * d), &dattn, dw, db, t, d, d)
            };
            let mut dq = vec![F::zero(); t * d];
            let mut dk = vec![F::zero(); t * d];
            let mut dv = vec![F::zero(); t * d];
            let mut dp = vec![F::zero(); t];
            for head in 0..h {
                let c0 = head * dh;
                for i in 0..t {
                    let p = &lc.probs[(head * t + i) * t..(head * t + i) * t + i + 1];
                    let doi = &d_o[i * d + c0..i * d + c0 + dh];
                    for j in 0..=i {
                        dp[j] = dot(doi, &lc.v[j * d + c0..j * d + c0 + dh]);
                        let dvj = &mut dv[j * d + c0..j * d + c0 + dh];
                        for (a, &b) in dvj.iter_mut().zip(doi) {
                            *a += p[j] * b;
                        }
                    }
                    let pdp = dot(p, &dp[..=i]);
                    for j in 0..=i {
                        let ds = p[j] * (dp[j] - pdp) * scale;
                        if ds == F::zero() {
                            continue;
                        }
                        for c in 0..dh {
                            dq[i * d + c0 + c] += ds * lc.k[j * d + c0 + c];
                            dk[j * d + c0 + c] += ds * lc.q[i * d + c0 + c];
                        }
                    }
                }
            }
            let mut da = {
                let (dw, db) = pair_mut(grads, lo.wq..lo.wq + d * d, lo.bq..lo.bq + d);
                linear_backward(&lc.a, self.slice(lo.wq, d * d), &dq, dw, db, t, d, d)
            };
            for (w, b, dproj) in [(lo.wk, lo.bk, &dk), (lo.wv, lo.bv, &dv)] {
                let (dw, db) = pair_mut(grads, w..w + d * d, b..b + d);
                let part = linear_backward(&lc.a, self.slice(w, d * d), dproj, dw, db, t, d, d);
                da.iter_mut().zip(&part).for_each(|(a, &b)| *a += b);
            }
            let dln1 = {
                let (dg, db) = pair_mut(grads, lo.ln1_g..lo.ln1_g + d, lo.ln1_b..lo.ln1_b + d);
                layer_norm_backward(&da, &lc.ln1, self.slice(lo.ln1_g, d), dg, db, t, d)
            };
            dx.iter_mut().zip(&dln1).for_each(|(a, &b)| *a += b);
        }

        for (i, &id) in ids.iter().enumerate() {
            let e = lay.tok_emb + id as usize * d;
            let p = lay.pos_emb + i * d;
            for c in 0..d {
                grads[e + c] += dx[i * d + c];
                grads[p + c] += dx[i * d + c];
            }
        }
    }

    pub fn new_cache(&self) -> KvCache<F> {
        KvCache {
            keys: vec![Vec::new(); self.config.n_layers],
            values: vec![Vec::new(); self.config.n_layers],
            len: 0,
        }
    }

    /// Appends one token to the cache and returns the logits predicting the
    /// token after it. Produces the same numbers as the matching row of
    /// [`Model::forward`].
    pub fn step(&self, cache: &mut KvCache<F>, token: TokenId) -> Result<Vec<F>> {
        let cfg = &self.config;
        let pos = cache.len;
        if pos >= cfg.max_len {
            return Err(Error::SequenceTooLong {
                len: pos + 1,
                max: cfg.max_len,
            });
        }
        if token as usize >= cfg.vocab_size {
            return Err(Error::IdOutOfRange(token, cfg.vocab_size));
        }
        let (d, f, h) = (cfg.d_model, cfg.d_ffn, cfg.n_heads);
        let dh = cfg.head_dim();
        let scale = F::of(1.0 / (dh as f64).sqrt());
        let n = pos + 1;

        let mut x = self.embed_tokens(&[token], pos);
        for (l, lo) in self.layout.layers.iter().enumerate() {
            let (a, _) = layer_norm(&x, self.slice(lo.ln1_g, d), self.slice(lo.ln1_b, d), 1, d);
            let q = linear(&a, self.slice(lo.wq, d * d), self.slice(lo.bq, d), 1, d, d);
            let k = linear(&a, self.slice(lo.wk, d * d), self.slice(lo.bk, d), 1, d, d);
            let v = linear(&a, self.slice(lo.wv, d * d), self.slice(lo.bv, d), 1, d, d);
            cache.keys[l].extend_from_slice(&k);
            cache.values[l].extend_from_slice(&v);
            let (keys, values) = (&cache.keys[l], &cache.values[l]);

            let mut o = vec![F::zero(); d];
            let mut row = vec![F::zero(); n];
            for head in 0..h {
                let cols = head * dh..(head + 1) * dh;
                for (j, s) in row.iter_mut().enumerate() {
                    *s = dot(&q[cols.clone()], &keys[j * d + cols.start..j * d + cols.end]) * scale;
                }
                softmax_in_place(&mut row);
                let oh = &mut o[cols.clone()];
                for (j, &pj) in row.iter().enumerate() {
                    for (oc, &vc) in oh.iter_mut().zip(&values[j * d + cols.start..j * d + cols.end]) {
                        *oc += pj * vc;
                    }
                }
            }
            let attn = linear(&o, self.slice(lo.wo, d * d), self.slice(lo.bo, d), 1, d, d);
            x.iter_mut().zip(&attn).for_each(|(xi, &ai)| *xi += ai);

            let (c, _) = layer_norm(&x, self.slice(lo.ln2_g, d), self.slice(lo.ln2_b, d), 1, d);
            let pre = linear(&c, self.slice(lo.w1, d * f), self.slice(lo.b1, f), 1, d, f);
            let g: Vec<F> = pre.iter().map(|&z| gelu(z)).collect();
            let y = linear(&g, self.slice(lo.w2, f * d), self.slice(lo.b2, d), 1, f, d);
            x.iter_mut().zip(&y).for_each(|(xi, &yi)| *xi += yi);
        }
        cache.len += 1;

        let (hf, _) = layer_norm(
            &x,
            self.slice(self.layout.lnf_g, d),
            self.slice(self.layout.lnf_b, d),
            1,
            d,
        );
        let vocab = cfg.vocab_size;
        let mut logits = vec![F::zero(); vocab];
        matmul_bt_acc(&hf, self.slice(self.layout.tok_emb, vocab * d), &mut logits, 1, d, vocab);
        Ok(logits)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{BOS, EOS, SEP};

    fn tiny_config() -> ModelConfig {
        ModelConfig {
            vocab_size: 13,
            d_model: 8,
            n_heads: 2,
            n_layers: 2,
            d_ffn: 12,
            max_len: 16,
            dropout: 0.0,
        }
    }

    fn example(ids: &[TokenId], sep_index: usize) -> TrainingExample {
        TrainingExample {
            input_ids: ids.to_vec(),
            sep_index,
            source_len: sep_index - 1,
            target_len: ids.len() - sep_index - 2,
            truncated: false,
        }
    }

    fn batch() -> Vec<TrainingExample> {
        vec![
            example(&[BOS, 5, 6, SEP, 7, 5, 6, 8, EOS], 3),
            example(&[BOS, 9, SEP, 10, 9, 11, EOS], 2),
            example(&[BOS, 12, 5, SEP, 12, 7, 5, EOS, PAD, PAD], 3),
        ]
    }

    fn perturbed(seed: u64, scale: f64) -> Model<f64> {
        let mut m = Model::<f64>::new(tiny_config(), seed).unwrap();
        let mut rng = crate::seed::rng(seed + 100);
        let noise = Normal::new(0.0, scale).unwrap();
        for p in m.params_mut() {
            *p += noise.sample(&mut rng);
        }
        m
    }

    #[test]
    fn zero_model_is_uniform() {
        let cfg = tiny_config();
        let n = ParamLayout::new(&cfg).total();
        let m = Model::from_params(cfg.clone(), vec![0.0f64; n]).unwrap();
        let b = batch();
        let loss = m.nll_loss(&b).unwrap();
        assert!((loss - (cfg.vocab_size as f64).ln()).abs() < 1e-12);
        assert!((m.perplexity(&b).unwrap() - cfg.vocab_size as f64).abs() < 1e-9);
        assert!((m.perplexity(&b[..1]).unwrap() - m.nll_loss(&b[..1]).unwrap().exp()).abs() < 1e-9);
    }

    #[test]
    fn init_loss_is_near_log_vocab() {
        let m = Model::<f64>::new(ModelConfig::new(200), 1).unwrap();
        let b: Vec<TrainingExample> = (0..4)
            .map(|k| {
                let ids: Vec<TokenId> = (0..20).map(|i| 5 + ((i * 7 + k * 13) % 190) as TokenId).collect();
                let mut full = vec![BOS];
                full.extend(&ids[..5]);
                full.push(SEP);
                full.extend(&ids[5..]);
                full.push(EOS);
                example(&full, 6)
            })
            .collect();
        let loss = m.nll_loss(&b).unwrap();
        let ln_v = 200f64.ln();
        assert!((loss - ln_v).abs() < 0.15 * ln_v, "loss {loss}");
    }

    #[test]
    fn logits_rows_normalize_and_are_causal() {
        let m = perturbed(3, 0.3);
        let ids = [BOS, 5, 6, SEP, 7, 8, 9];
        let base = m.forward(&ids).unwrap();
        let v = m.config().vocab_size;
        for i in 0..ids.len() {
            let mut row = base[i * v..(i + 1) * v].to_vec();
            softmax_in_place(&mut row);
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        for j in 1..ids.len() {
            let mut alt = ids;
            alt[j] = 12;
            let out = m.forward(&alt).unwrap();
            assert_eq!(&out[..j * v], &base[..j * v]);
        }
    }

    #[test]
    fn incremental_matches_full_forward() {
        let m = perturbed(4, 0.3);
        let ids = [BOS, 5, 6, SEP, 7, 8, 9, 10];
        let full = m.forward(&ids).unwrap();
        let v = m.config().vocab_size;
        let mut cache = m.new_cache();
        for (i, &id) in ids.iter().enumerate() {
            let row = m.step(&mut cache, id).unwrap();
            for (a, b) in row.iter().zip(&full[i * v..(i + 1) * v]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
        assert_eq!(cache.len(), ids.len());
    }

    fn relative_error(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-6)
    }

    #[test]
    fn gradient_matches_central_differences_everywhere_small() {
        // every coordinate of a very small model
        let cfg = ModelConfig { vocab_size: 7, d_model: 4, n_heads: 2, n_layers: 1, d_ffn: 6, max_len: 8, dropout: 0.0 };
        let mut m = Model::<f64>::new(cfg, 9).unwrap();
        let mut rng = crate::seed::rng(1);
        let noise = Normal::new(0.0, 0.5).unwrap();
        for p in m.params_mut() {
            *p += noise.sample(&mut rng);
        }
        let b = vec![example(&[BOS, 5, SEP, 6, 5, EOS], 2), example(&[BOS, 6, 6, SEP, 5, EOS], 3)];
        for target_only in [false, true] {
            let (_, g) = m.loss_and_grad(&b, target_only, None).unwrap();
            let h = 1e-5;
            for i in 0..m.num_params() {
                let orig = m.params()[i];
                m.params_mut()[i] = orig + h;
                let up = m.loss_summary(&b, target_only).unwrap().mean();
                m.params_mut()[i] = orig - h;
                let down = m.loss_summary(&b, target_only).unwrap().mean();
                m.params_mut()[i] = orig;
                let fd = (up - down) / (2.0 * h);
                let err = relative_error(g.0[i], fd);
                assert!(err < 1e-4, "coord {i} ({:?}): analytic {} fd {fd}", m.layout().locate(i).map(|t| &t.name), g.0[i]);
            }
        }
    }

    #[test]
    fn unused_positions_get_zero_gradient() {
        let m = perturbed(5, 0.2);
        let b = batch();
        let (_, g) = m.loss_and_grad(&b, false, None).unwrap();
        let d = m.config().d_model;
        let longest = b.iter().map(|e| e.len()).max().unwrap();
        let pos = m.layout().tensor("pos_emb").unwrap();
        for i in pos.offset + longest * d..pos.offset + pos.len() {
            assert_eq!(g.0[i], 0.0);
        }
    }

    #[test]
    fn pad_targets_are_masked() {
        let m = perturbed(6, 0.2);
        let padded = example(&[BOS, 5, SEP, 6, EOS, PAD, PAD], 2);
        let plain = example(&[BOS, 5, SEP, 6, EOS], 2);
        let a = m.loss_summary(&[padded], false).unwrap();
        let b = m.loss_summary(&[plain], false).unwrap();
        assert_eq!(a.tokens, b.tokens);
        assert!((a.nll_sum - b.nll_sum).abs() < 1e-12);
    }

    #[test]
    fn errors_on_long_or_invalid_sequences() {
        let m = Model::<f64>::new(tiny_config(), 0).unwrap();
        assert!(matches!(m.forward(&[5; 17]), Err(Error::SequenceTooLong { .. })));
        assert!(matches!(m.forward(&[99]), Err(Error::IdOutOfRange(99, _))));
        assert!(m.loss_and_grad(&[], false, None).is_err());
    }

    #[test]
    fn dropout_masks_are_seeded() {
        let mut cfg = tiny_config();
        cfg.dropout = 0.3;
        let m = Model::<f64>::new(cfg, 2).unwrap();
        let b = batch();
        let (l1, g1) = m.loss_and_grad(&b, false, Some(11)).unwrap();
        let (l2, g2) = m.loss_and_grad(&b, false, Some(11)).unwrap();
        let (_, g3) = m.loss_and_grad(&b, false, Some(12)).unwrap();
        assert_eq!(l1, l2);
        assert_eq!(g1, g2);
        assert_ne!(g1, g3);
    }

    #[test]
    fn single_precision_tracks_double() {
        let m = perturbed(8, 0.2);
        let m32: Model<f32> = m.cast();
        let b = batch();
        let l64 = m.nll_loss(&b).unwrap();
        let l32 = m32.nll_loss(&b).unwrap();
        assert!((l64 - l32).abs() < 1e-4);
    }
}
