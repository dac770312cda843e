//! Flat parameter storage.
//!
//! All parameters live in one contiguous vector. Tensors appear in this
//! order, each row-major, weights shaped `[in × out]` so that `y = x W + b`:
//!
//! 1. `tok_emb` `[vocab × d]` (also the output projection)
//! 2. `pos_emb` `[max_len × d]`
//! 3. per layer `l`: `ln1.gain [d]`, `ln1.bias [d]`, `wq [d×d]`, `bq [d]`,
//!    `wk [d×d]`, `bk [d]`, `wv [d×d]`, `bv [d]`, `wo [d×d]`, `bo [d]`,
//!    `ln2.gain [d]`, `ln2.bias [d]`, `w1 [d×f]`, `b1 [f]`, `w2 [f×d]`, `b2 [d]`
//! 4. `lnf.gain [d]`, `lnf.bias [d]`
//!
//! The checkpoint format writes this vector verbatim.

use std::ops::Range;

use super::ModelConfig;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TensorSpec {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
}

impl TensorSpec {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn range(&self) -> Range<usize> {
        self.offset..self.offset + self.len()
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct LayerOffsets {
    pub ln1_g: usize,
    pub ln1_b: usize,
    pub wq: usize,
    pub bq: usize,
    pub wk: usize,
    pub bk: usize,
    pub wv: usize,
    pub bv: usize,
    pub wo: usize,
    pub bo: usize,
    pub ln2_g: usize,
    pub ln2_b: usize,
    pub w1: usize,
    pub b1: usize,
    pub w2: usize,
    pub b2: usize,
}

#[derive(Debug, Clone)]
pub struct ParamLayout {
    tensors: Vec<TensorSpec>,
    pub(crate) tok_emb: usize,
    pub(crate) pos_emb: usize,
    pub(crate) layers: Vec<LayerOffsets>,
    pub(crate) lnf_g: usize,
    pub(crate) lnf_b: usize,
    total: usize,
}

impl ParamLayout {
    pub fn new(cfg: &ModelConfig) -> Self {
        let d = cfg.d_model;
        let f = cfg.d_ffn;
        let mut tensors = Vec::new();
        let mut total = 0;
        let mut add = |name: String, shape: Vec<usize>| -> usize {
            let offset = total;
            total += shape.iter().product::<usize>();
            tensors.push(TensorSpec { name, shape, offset });
            offset
        };
        let tok_emb = add("tok_emb".into(), vec![cfg.vocab_size, d]);
        let pos_emb = add("pos_emb".into(), vec![cfg.max_len, d]);
        let mut layers = Vec::with_capacity(cfg.n_layers);
        for l in 0..cfg.n_layers {
            let mut t = |n: &str, shape: Vec<usize>| add(format!("layer{l}.{n}"), shape);
            layers.push(LayerOffsets {
                ln1_g: t("ln1.gain", vec![d]),
                ln1_b: t("ln1.bias", vec![d]),
                wq: t("wq", vec![d, d]),
                bq: t("bq", vec![d]),
                wk: t("wk", vec![d, d]),
                bk: t("bk", vec![d]),
                wv: t("wv", vec![d, d]),
                bv: t("bv", vec![d]),
                wo: t("wo", vec![d, d]),
                bo: t("bo", vec![d]),
                ln2_g: t("ln2.gain", vec![d]),
                ln2_b: t("ln2.bias", vec![d]),
                w1: t("w1", vec![d, f]),
                b1: t("b1", vec![f]),
                w2: t("w2", vec![f, d]),
                b2: t("b2", vec![d]),
            });
        }
        let lnf_g = add("lnf.gain".into(), vec![d]);
        let lnf_b = add("lnf.bias".into(), vec![d]);
        ParamLayout {
            tensors,
            tok_emb,
            pos_emb,
            layers,
            lnf_g,
            lnf_b,
            total,
        }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn tensors(&self) -> &[TensorSpec] {
        &self.tensors
    }

    pub fn tensor(&self, name: &str) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Name of the tensor containing flat index `i`.
    pub fn locate(&self, i: usize) -> Option<&TensorSpec> {
        self.tensors.iter().find(|t| t.range().contains(&i))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensors_tile_the_vector() {
        let cfg = ModelConfig { vocab_size: 11, d_model: 8, n_heads: 2, n_layers: 2, d_ffn: 12, max_len: 9, dropout: 0.0 };
        let layout = ParamLayout::new(&cfg);
        let mut next = 0;
        for t in layout.tensors() {
            assert_eq!(t.offset, next);
            next += t.len();
        }
        assert_eq!(next, layout.total());
        let per_layer = 4 * 8 * 8 + 4 * 8 + 4 * 8 + 8 * 12 + 12 + 12 * 8 + 8;
        assert_eq!(layout.total(), 11 * 8 + 9 * 8 + 2 * per_layer + 16);
        assert_eq!(layout.locate(0).unwrap().name, "tok_emb");
        assert_eq!(layout.locate(layout.total() - 1).unwrap().name, "lnf.bias");
    }
}
