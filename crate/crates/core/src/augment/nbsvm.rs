//! Naive-Bayes-weighted linear SVM.
//!
//! With binarized rows `x`, `p = α + Σ_{y=1} x`, `q = α + Σ_{y=0} x` and
//! `r = ln((p / ‖p‖₁) / (q / ‖q‖₁))`, a linear max-margin model is trained on
//! `r ∘ x` by minimizing `λ/2 ‖w‖² + mean(max(0, 1 − y(w·x̃ + b)))` with
//! `λ = 1/(C·N)` and labels mapped to ±1. Full-batch subgradient steps of
//! size `η / √t` make training deterministic. The final weights are
//! `w' = (1 − β) w̄ + β w` where `w̄ = ‖w‖₁ / |w|`.

use serde::{Deserialize, Serialize};

use super::SparseMatrix;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NbSvmConfig {
    pub alpha: f64,
    pub beta: f64,
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: f64,
}

impl Default for NbSvmConfig {
    fn default() -> Self {
        NbSvmConfig {
            alpha: 1.0,
            beta: 0.25,
            c: 1.0,
            epochs: 200,
            learning_rate: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NbSvm {
    pub r: Vec<f64>,
    /// Interpolated weights, applied to `r ∘ x`.
    pub w: Vec<f64>,
    pub bias: f64,
}

impl NbSvm {
    pub fn decision(&self, row: &[(usize, f64)]) -> f64 {
        row.iter().map(|&(j, x)| self.w[j] * self.r[j] * x).sum::<f64>() + self.bias
    }

    pub fn predict(&self, row: &[(usize, f64)]) -> u8 {
        u8::from(self.decision(row) > 0.0)
    }
}

fn check_classes(labels: &[u8]) -> Result<()> {
    let pos = labels.iter().filter(|&&l| l == 1).count();
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

/// Log-count ratio `r` over the columns of a binarized matrix.
pub fn log_count_ratio(x: &SparseMatrix, labels: &[u8], alpha: f64) -> Vec<f64> {
    let mut p = vec![alpha; x.n_cols];
    let mut q = vec![alpha; x.n_cols];
    for (row, &y) in x.rows.iter().zip(labels) {
        let acc = if y == 1 { &mut p } else { &mut q };
        for &(j, v) in row {
            acc[j] += v;
        }
    }
    let sp: f64 = p.iter().sum();
    let sq: f64 = q.iter().sum();
    p.iter().zip(&q).map(|(a, b)| ((a / sp) / (b / sq)).ln()).collect()
}

pub fn nbsvm_train(x: &SparseMatrix, labels: &[u8], cfg: &NbSvmConfig) -> Result<NbSvm> {
    if x.n_rows() != labels.len() {
        return Err(Error::DimensionMismatch {
            expected: x.n_rows(),
            got: labels.len(),
        });
    }
    check_classes(labels)?;
    if !(cfg.alpha > 0.0 && cfg.c > 0.0 && (0.0..=1.0).contains(&cfg.beta)) {
        return Err(Error::Config("nbsvm needs alpha > 0, c > 0, beta in [0, 1]".into()));
    }
    let r = log_count_ratio(x, labels, cfg.alpha);
    let xt: Vec<Vec<(usize, f64)>> = x
        .rows
        .iter()
        .map(|row| row.iter().map(|&(j, v)| (j, r[j] * v)).collect())
        .collect();
    let ys: Vec<f64> = labels.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let n = x.n_rows() as f64;
    let lambda = 1.0 / (cfg.c * n);

    let mut w = vec![0.0; x.n_cols];
    let mut b = 0.0;
    let mut gw = vec![0.0; x.n_cols];
    for t in 1..=cfg.epochs {
        for (g, &wj) in gw.iter_mut().zip(&w) {
            *g = lambda * wj;
        }
        let mut gb = 0.0;
        for (row, &y) in xt.iter().zip(&ys) {
            let score: f64 = row.iter().map(|&(j, v)| w[j] * v).sum::<f64>() + b;
            if y * score < 1.0 {
                for &(j, v) in row {
                    gw[j] -= y * v / n;
                }
                gb -= y / n;
            }
        }
        let eta = cfg.learning_rate / (t as f64).sqrt();
        for (wj, g) in w.iter_mut().zip(&gw) {
            *wj -= eta * g;
        }
        b -= eta * gb;
    }
    let mean_mag = if w.is_empty() {
        0.0
    } else {
        w.iter().map(|v| v.abs()).sum::<f64>() / w.len() as f64
    };
    let w = w
        .iter()
        .map(|&wj| (1.0 - cfg.beta) * mean_mag + cfg.beta * wj)
        .collect();
    Ok(NbSvm { r, w, bias: b })
}
