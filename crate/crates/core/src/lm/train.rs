use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{Checkpoint, Model, ModelConfig, Real, TrainConfig};
use crate::corpus::TrainingExample;
use crate::seed;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Tracks the best validation score; stops after `patience` consecutive
/// non-improving observations.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: Option<usize>,
    bad: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            bad: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, value: f64) -> StopDecision {
        if value < self.best {
            self.best = value;
            self.best_epoch = Some(epoch);
            self.bad = 0;
            StopDecision::Improved
        } else {
            self.bad += 1;
            if self.bad >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best(&self) -> Option<(usize, f64)> {
        self.best_epoch.map(|e| (e, self.best))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub valid_perplexity: f64,
    pub improved: bool,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation perplexity.
    pub checkpoint: Checkpoint,
    pub epochs: Vec<EpochLog>,
    pub stopped_early: bool,
}

struct Adam<F> {
    m: Vec<F>,
    v: Vec<F>,
    t: i32,
}

impl<F: Real> Adam<F> {
    fn new(n: usize) -> Self {
        Adam {
            m: vec![F::zero(); n],
            v: vec![F::zero(); n],
            t: 0,
        }
    }

    fn update(&mut self, params: &mut [F], grads: &[F], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let (b1, b2) = (cfg.beta1, cfg.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let (fb1, fb2) = (F::of(b1), F::of(b2));
        let (ob1, ob2) = (F::of(1.0 - b1), F::of(1.0 - b2));
        let step = F::of(lr / c1);
        let inv_c2 = F::of(1.0 / c2);
        let eps = F::of(cfg.adam_eps);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = fb1 * *m + ob1 * g;
            *v = fb2 * *v + ob2 * g * g;
            *p -= step * *m / ((*v * inv_c2).sqrt() + eps);
        }
    }
}

/// Trains from a fresh initialization; see [`train_with_hooks`].
pub fn train<F: Real>(
    train_set: &[TrainingExample],
    valid_set: &[TrainingExample],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    vocab_hash: [u8; 32],
) -> Result<TrainOutcome> {
    train_with_hooks::<F>(train_set, valid_set, model_cfg, train_cfg, vocab_hash, |_| {})
}

/// Epoch loop with Adam, linear warmup, optional gradient clipping and early
/// stopping on validation perplexity. `after_step` runs after every optimizer
/// update.
pub fn train_with_hooks<F: Real>(
    train_set: &[TrainingExample],
    valid_set: &[TrainingExample],
    model_cfg: &ModelConfig,
    train_cfg: &TrainConfig,
    vocab_hash: [u8; 32],
    mut after_step: impl FnMut(&mut Model<F>),
) -> Result<TrainOutcome> {
    train_cfg.validate()?;
    model_cfg.validate()?;
    if train_set.is_empty() || valid_set.is_empty() {
        return Err(Error::Input("training and validation sets must be non-empty".into()));
    }
    let longest = train_set.iter().chain(valid_set).map(|e| e.len()).max().unwrap_or(0);
    if longest > model_cfg.max_len {
        return Err(Error::Config(format!(
            "max_len {} is shorter than the longest example ({longest})",
            model_cfg.max_len
        )));
    }

    let mut model = Model::<F>::new(model_cfg.clone(), train_cfg.seed)?;
    let mut adam = Adam::new(model.num_params());
    let steps_per_epoch = train_set.len().div_ceil(train_cfg.batch_size);
    let total_steps = steps_per_epoch * train_cfg.max_epochs;
    let warmup = (train_cfg.warmup_frac * total_steps as f64).ceil() as usize;

    let mut stopper = EarlyStopping::new(train_cfg.patience);
    let mut best_params = model.params().to_vec();
    let mut epochs = Vec::new();
    let mut stopped_early = false;
    let mut step = 0usize;
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=train_cfg.max_epochs {
        order.sort_unstable();
        order.shuffle(&mut seed::component_rng(train_cfg.seed, "shuffle", epoch as u64));
        let mut nll = 0.0;
        let mut tokens = 0usize;
        for chunk in order.chunks(train_cfg.batch_size) {
            let batch: Vec<TrainingExample> = chunk.iter().map(|&i| train_set[i].clone()).collect();
            let dropout_seed = (model_cfg.dropout > 0.0)
                .then(|| seed::derive(train_cfg.seed, "dropout", step as u64));
            let (summary, mut grads) =
                model.loss_and_grad(&batch, train_cfg.target_only_loss, dropout_seed)?;
            if !summary.nll_sum.is_finite() || !grads.is_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step,
                    detail: format!("non-finite loss or gradient (loss sum {})", summary.nll_sum),
                });
            }
            if let Some(clip) = train_cfg.grad_clip {
                let norm = grads.norm();
                if norm > clip {
                    let s = F::of(clip / norm);
                    grads.0.iter_mut().for_each(|g| *g *= s);
                }
            }
            let lr = if warmup > 0 && step < warmup {
                train_cfg.learning_rate * (step + 1) as f64 / warmup as f64
            } else {
                train_cfg.learning_rate
            };
            adam.update(model.params_mut(), &grads.0, lr, train_cfg);
            after_step(&mut model);
            if !model.all_finite() {
                return Err(Error::Divergence {
                    epoch,
                    step,
                    detail: "non-finite parameter after update".into(),
                });
            }
            nll += summary.nll_sum;
            tokens += summary.tokens;
            step += 1;
        }

        let valid_perplexity = model.perplexity(valid_set)?;
        if !valid_perplexity.is_finite() {
            return Err(Error::Divergence {
                epoch,
                step,
                detail: "non-finite validation perplexity".into(),
            });
        }
        let decision = stopper.observe(epoch, valid_perplexity);
        let improved = decision == StopDecision::Improved;
        if improved {
            best_params.copy_from_slice(model.params());
        }
        let train_loss = nll / tokens.max(1) as f64;
        log::info!(
            "epoch {epoch}: train loss {train_loss:.4}, valid perplexity {valid_perplexity:.4}{}",
            if improved { " *" } else { "" }
        );
        epochs.push(EpochLog {
            epoch,
            train_loss,
            valid_perplexity,
            improved,
        });
        if decision == StopDecision::Stop {
            stopped_early = epoch < train_cfg.max_epochs;
            break;
        }
    }

    let (best_epoch, best_ppl) = stopper.best().expect("at least one epoch ran");
    let best = Model::<F>::from_params(model_cfg.clone(), best_params)?;
    Ok(TrainOutcome {
        checkpoint: Checkpoint {
            model: best.cast(),
            vocab_hash,
            epoch: best_epoch,
            valid_perplexity: best_ppl,
        },
        epochs,
        stopped_early,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{encode, tokenize, Vocabulary};

    #[test]
    fn scripted_sequence_stops_after_patience() {
        let mut es = EarlyStopping::new(2);
        let script = [10.0, 8.0, 9.0, 9.5, 7.0];
        let decisions: Vec<StopDecision> = script
            .iter()
            .enumerate()
            .map(|(i, &v)| es.observe(i + 1, v))
            .collect();
        assert_eq!(
            &decisions[..4],
            [StopDecision::Improved, StopDecision::Improved, StopDecision::Continue, StopDecision::Stop]
        );
        let mut es = EarlyStopping::new(2);
        for (i, &v) in script.iter().enumerate() {
            if es.observe(i + 1, v) == StopDecision::Stop {
                break;
            }
        }
        assert_eq!(es.best(), Some((2, 8.0)));
    }

    #[test]
    fn equal_value_is_not_improvement() {
        let mut es = EarlyStopping::new(1);
        assert_eq!(es.observe(1, 5.0), StopDecision::Improved);
        assert_eq!(es.observe(2, 5.0), StopDecision::Stop);
    }

    fn toy_data() -> (Vocabulary, Vec<TrainingExample>) {
        let sents = ["the cat sat on the mat", "a dog ran in the park", "birds fly over the sea", "we cook rice at home"];
        let toks: Vec<Vec<String>> = sents.iter().map(|s| tokenize(s)).collect();
        let vocab = Vocabulary::build(toks.iter(), 1).unwrap();
        let ex = toks
            .iter()
            .map(|t| encode(&t[1..3], t, &vocab, 32).unwrap())
            .collect();
        (vocab, ex)
    }

    fn small_cfg(vocab: usize) -> ModelConfig {
        ModelConfig { vocab_size: vocab, d_model: 16, n_heads: 2, n_layers: 1, d_ffn: 32, max_len: 32, dropout: 0.0 }
    }

    #[test]
    fn frozen_parameters_stop_after_second_epoch() {
        let (vocab, ex) = toy_data();
        let cfg = small_cfg(vocab.len());
        let tc = TrainConfig { patience: 1, max_epochs: 10, batch_size: 2, ..TrainConfig::default() };
        let frozen = Model::<f64>::new(cfg.clone(), tc.seed).unwrap().params().to_vec();
        let out = train_with_hooks::<f64>(&ex, &ex, &cfg, &tc, vocab.hash(), |m| {
            m.params_mut().copy_from_slice(&frozen)
        })
        .unwrap();
        assert_eq!(out.epochs.len(), 2);
        assert!(out.stopped_early);
        assert_eq!(out.checkpoint.epoch, 1);
    }

    #[test]
    fn best_checkpoint_is_min_perplexity_and_deterministic() {
        let (vocab, ex) = toy_data();
        let cfg = small_cfg(vocab.len());
        let tc = TrainConfig { max_epochs: 6, batch_size: 2, learning_rate: 3e-3, patience: 6, ..TrainConfig::default() };
        let a = train::<f64>(&ex, &ex[..2], &cfg, &tc, vocab.hash()).unwrap();
        let b = train::<f64>(&ex, &ex[..2], &cfg, &tc, vocab.hash()).unwrap();
        let min = a.epochs.iter().map(|e| e.valid_perplexity).fold(f64::INFINITY, f64::min);
        assert_eq!(a.checkpoint.valid_perplexity, min);
        assert_eq!(a.checkpoint.model.params(), b.checkpoint.model.params());
        let reval = a.checkpoint.model.perplexity(&ex[..2]).unwrap();
        assert!((reval - min).abs() < 1e-9);
        // loss goes down on this easy corpus
        assert!(a.epochs.last().unwrap().train_loss < a.epochs[0].train_loss);
    }

    #[test]
    fn gradient_norm_stays_finite() {
        let (vocab, ex) = toy_data();
        let cfg = small_cfg(vocab.len());
        let tc = TrainConfig { max_epochs: 50, batch_size: 2, learning_rate: 1e-2, patience: 50, ..TrainConfig::default() };
        let out = train::<f64>(&ex, &ex, &cfg, &tc, vocab.hash()).unwrap();
        assert_eq!(out.epochs.len(), 50);
        let (_, g) = out.checkpoint.model.loss_and_grad(&ex, false, None).unwrap();
        assert!(g.norm().is_finite());
    }

    #[test]
    fn single_precision_training_runs() {
        let (vocab, ex) = toy_data();
        let cfg = small_cfg(vocab.len());
        let tc = TrainConfig { max_epochs: 3, batch_size: 2, learning_rate: 3e-3, patience: 3, ..TrainConfig::default() };
        let out = train::<f32>(&ex, &ex, &cfg, &tc, vocab.hash()).unwrap();
        assert!(out.checkpoint.valid_perplexity.is_finite());
    }

    #[test]
    fn rejects_examples_longer_than_max_len() {
        let (vocab, ex) = toy_data();
        let mut cfg = small_cfg(vocab.len());
        cfg.max_len = 4;
        assert!(train::<f64>(&ex, &ex, &cfg, &TrainConfig::default(), vocab.hash()).is_err());
    }
}
