//! Random forest of Gini decision trees over sparse non-negative features.
//!
//! Tree `t` draws a bootstrap sample and all of its per-node feature
//! subsets from a generator seeded with `seed + t`. At each node `mtry`
//! candidate columns are drawn without replacement from the columns that are
//! non-zero in at least one of the node's samples (columns that are zero
//! throughout the node cannot split it). Splits are `x <= threshold` with
//! thresholds at midpoints between consecutive distinct values. Prediction
//! is a majority vote; a tied vote predicts 0.

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{SparseMatrix, SparseRow};
use crate::seed::{self, Rng};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RfConfig {
    pub n_trees: usize,
    pub max_depth: Option<usize>,
    /// Candidate columns per node; `None` means `floor(sqrt(columns))`.
    pub mtry: Option<usize>,
    pub min_samples_split: usize,
    pub seed: u64,
}

impl Default for RfConfig {
    fn default() -> Self {
        RfConfig {
            n_trees: 100,
            max_depth: None,
            mtry: None,
            min_samples_split: 2,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(u8),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    fn predict(&self, row: &[(usize, f64)]) -> u8 {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf(c) => return c,
                Node::Split { feature, threshold, left, right } => {
                    let v = row
                        .binary_search_by_key(&feature, |e| e.0)
                        .map_or(0.0, |k| row[k].1);
                    i = if v <= threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, left).max(go(nodes, right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Feature tested at the root, if the root splits.
    pub fn root_feature(&self) -> Option<usize> {
        match self.nodes[0] {
            Node::Split { feature, .. } => Some(feature),
            Node::Leaf(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<Tree>,
}

impl Forest {
    pub fn predict(&self, row: &SparseRow) -> u8 {
        let votes = self.trees.iter().filter(|t| t.predict(row) == 1).count();
        u8::from(2 * votes > self.trees.len())
    }
}

fn gini(c0: f64, c1: f64) -> f64 {
    let n = c0 + c1;
    if n == 0.0 {
        0.0
    } else {
        1.0 - (c0 / n).powi(2) - (c1 / n).powi(2)
    }
}

struct Builder<'a> {
    x: &'a SparseMatrix,
    /// Column-major copy: for each column, `(row, value)` pairs.
    columns: &'a [Vec<(usize, f64)>],
    labels: &'a [u8],
    mtry: usize,
    cfg: &'a RfConfig,
    nodes: Vec<Node>,
    /// Bootstrap multiplicity of each row within the current node.
    weight: Vec<f64>,
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

impl Builder<'_> {
    fn class_counts(&self, samples: &[usize]) -> (f64, f64) {
        let ones = samples.iter().filter(|&&s| self.labels[s] == 1).count() as f64;
        (samples.len() as f64 - ones, ones)
    }

    fn best_split_on(&self, feature: usize, c0: f64, c1: f64) -> Option<Split> {
        // non-zero entries inside the node, weighted by multiplicity
        let mut vals: Vec<(f64, u8, f64)> = self.columns[feature]
            .iter()
            .filter(|&&(r, _)| self.weight[r] > 0.0)
            .map(|&(r, v)| (v, self.labels[r], self.weight[r]))
            .collect();
        if vals.is_empty() {
            return None;
        }
        vals.sort_by(|a, b| a.0.total_cmp(&b.0));
        let n = c0 + c1;
        let (mut nz0, mut nz1) = (0.0, 0.0);
        for &(_, l, w) in &vals {
            if l == 1 {
                nz1 += w;
            } else {
                nz0 += w;
            }
        }
        // left side starts with the implicit zeros
        let mut l0 = c0 - nz0;
        let mut l1 = c1 - nz1;
        let parent = gini(c0, c1);
        let mut best: Option<Split> = None;
        let mut consider = |l0: f64, l1: f64, threshold: f64| {
            let nl = l0 + l1;
            let nr = n - nl;
            if nl <= 0.0 || nr <= 0.0 {
                return;
            }
            let gain = parent - (nl / n) * gini(l0, l1) - (nr / n) * gini(c0 - l0, c1 - l1);
            if gain > 1e-12 && best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(Split { feature, threshold, gain });
            }
        };
        let mut prev = 0.0;
        let mut i = 0;
        while i < vals.len() {
            let v = vals[i].0;
            consider(l0, l1, (prev + v) / 2.0);
            while i < vals.len() && vals[i].0 == v {
                if vals[i].1 == 1 {
                    l1 += vals[i].2;
                } else {
                    l0 += vals[i].2;
                }
                i += 1;
            }
            prev = v;
        }
        best
    }

    fn build(&mut self, samples: Vec<usize>, depth: usize, rng: &mut Rng) -> usize {
        let id = self.nodes.len();
        let (c0, c1) = self.class_counts(&samples);
        let majority = u8::from(c1 > c0);
        self.nodes.push(Node::Leaf(majority));
        if c0 == 0.0
            || c1 == 0.0
            || samples.len() < self.cfg.min_samples_split
            || self.cfg.max_depth.is_some_and(|d| depth >= d)
        {
            return id;
        }

        for &s in &samples {
            self.weight[s] += 1.0;
        }
        let mut active: Vec<usize> = Vec::new();
        let mut distinct = samples.clone();
        distinct.sort_unstable();
        distinct.dedup();
        for &s in &distinct {
            active.extend(self.x.rows[s].iter().map(|e| e.0));
        }
        active.sort_unstable();
        active.dedup();
        let k = self.mtry.min(active.len());
        // partial Fisher-Yates: the first k entries become the sample
        for i in 0..k {
            let j = rng.gen_range(i..active.len());
            active.swap(i, j);
        }
        let mut best: Option<Split> = None;
        for &f in &active[..k] {
            if let Some(s) = self.best_split_on(f, c0, c1) {
                if best.as_ref().map_or(true, |b| s.gain > b.gain) {
                    best = Some(s);
                }
            }
        }
        for &s in &samples {
            self.weight[s] -= 1.0;
        }
        let Some(split) = best else {
            return id;
        };

        let value = |r: usize| {
            let row = &self.x.rows[r];
            row.binary_search_by_key(&split.feature, |e| e.0)
                .map_or(0.0, |k| row[k].1)
        };
        let (left, right): (Vec<usize>, Vec<usize>) =
            samples.into_iter().partition(|&r| value(r) <= split.threshold);
        let l = self.build(left, depth + 1, rng);
        let r = self.build(right, depth + 1, rng);
        self.nodes[id] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left: l,
            right: r,
        };
        id
    }
}

pub fn rf_train(x: &SparseMatrix, labels: &[u8], cfg: &RfConfig) -> Result<Forest> {
    if x.n_rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            got: labels.len(),
        });
    }
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    if cfg.n_trees == 0 {
        return Err(Error::Config("n_trees must be at least 1".into()));
    }
    let mtry = cfg
        .mtry
        .unwrap_or_else(|| (x.n_cols as f64).sqrt().floor() as usize)
        .max(1);
    let mut columns = vec![Vec::new(); x.n_cols];
    for (r, row) in x.rows.iter().enumerate() {
        for &(j, v) in row {
            columns[j].push((r, v));
        }
    }
    let n = x.n_rows();
    let trees = (0..cfg.n_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = seed::rng(cfg.seed.wrapping_add(t as u64));
            let samples: Vec<usize> = (0..n).map(|_| rng.gen_range(0..n)).collect();
            let mut b = Builder {
                x,
                columns: &columns,
                labels,
                mtry,
                cfg,
                nodes: Vec::new(),
                weight: vec![0.0; n],
            };
            b.build(samples, 0, &mut rng);
            Tree { nodes: b.nodes }
        })
        .collect();
    Ok(Forest { trees })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense(rows: &[&[f64]]) -> SparseMatrix {
        SparseMatrix {
            rows: rows
                .iter()
                .map(|r| r.iter().enumerate().filter(|e| *e.1 != 0.0).map(|(j, &v)| (j, v)).collect())
                .collect(),
            n_cols: rows[0].len(),
        }
    }

    #[test]
    fn single_stump_picks_the_separating_feature() {
        let x = dense(&[&[0.0], &[0.1], &[0.2], &[0.9], &[0.8], &[1.0]]);
        let y = [0, 0, 0, 1, 1, 1];
        // the bootstrap of this seed contains both classes
        let cfg = RfConfig { n_trees: 1, max_depth: Some(1), seed: 3, ..RfConfig::default() };
        let f = rf_train(&x, &y, &cfg).unwrap();
        assert_eq!(f.trees[0].root_feature(), Some(0));
        assert_eq!(f.trees[0].depth(), 1);
        for (row, &l) in x.rows.iter().zip(&y) {
            assert_eq!(f.predict(row), l);
        }
    }

    #[test]
    fn constant_features_give_majority() {
        let x = dense(&[&[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0], &[1.0, 0.0]]);
        let y = [1, 1, 1, 0, 1];
        let f = rf_train(&x, &y, &RfConfig { n_trees: 15, ..RfConfig::default() }).unwrap();
        for row in &x.rows {
            assert_eq!(f.predict(row), 1);
        }
    }

    #[test]
    fn deterministic_under_seed_and_overfits_random_labels() {
        let mut rng = seed::rng(11);
        let rows: Vec<Vec<f64>> = (0..80).map(|_| (0..12).map(|_| if rng.gen_bool(0.3) { rng.gen() } else { 0.0 }).collect()).collect();
        let refs: Vec<&[f64]> = rows.iter().map(Vec::as_slice).collect();
        let x = dense(&refs);
        let y: Vec<u8> = (0..80).map(|_| u8::from(rng.gen_bool(0.5))).collect();
        let (train, test) = (SparseMatrix { rows: x.rows[..60].to_vec(), n_cols: 12 }, SparseMatrix { rows: x.rows[60..].to_vec(), n_cols: 12 });
        let cfg = RfConfig { n_trees: 25, seed: 5, ..RfConfig::default() };
        let a = rf_train(&train, &y[..60], &cfg).unwrap();
        let b = rf_train(&train, &y[..60], &cfg).unwrap();
        assert_eq!(a, b);
        let acc = |m: &SparseMatrix, ys: &[u8]| m.rows.iter().zip(ys).filter(|(r, &l)| a.predict(r) == l).count() as f64 / ys.len() as f64;
        assert!(acc(&train, &y[..60]) >= acc(&test, &y[60..]));
    }

    #[test]
    fn single_class_is_fatal() {
        let x = dense(&[&[1.0], &[2.0]]);
        assert!(matches!(rf_train(&x, &[0, 0], &RfConfig::default()), Err(Error::SingleClass)));
    }
}
