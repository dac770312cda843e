use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::{Model, Real};
use crate::corpus::{TokenId, BOS, EOS, PAD, SEP};
use crate::seed::Rng;
use crate::{Error, Result};

/// Ids that generation never emits.
pub const MASKED_IN_GENERATION: [TokenId; 3] = [PAD, BOS, SEP];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SampleConfig {
    pub k: usize,
    pub temperature: f64,
    pub max_new: usize,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig {
            k: 10,
            temperature: 1.0,
            max_new: 64,
        }
    }
}

/// The renormalized top-`k` distribution for one logits row: the `k`
/// highest-scoring allowed ids (ties to the lower id) with softmax
/// probabilities of `logit / temperature` over just those ids.
pub fn next_token_distribution<F: Real>(
    logits: &[F],
    k: usize,
    temperature: f64,
) -> Result<Vec<(TokenId, f64)>> {
    if k == 0 || k > logits.len() {
        return Err(Error::Config(format!(
            "top-k needs 1 <= k <= vocab size ({}), got {k}",
            logits.len()
        )));
    }
    if !(temperature > 0.0) || !temperature.is_finite() {
        return Err(Error::Config(format!("temperature must be positive, got {temperature}")));
    }
    let mut ranked: Vec<(TokenId, f64)> = logits
        .iter()
        .enumerate()
        .filter(|(i, _)| !MASKED_IN_GENERATION.contains(&(*i as TokenId)))
        .map(|(i, &l)| (i as TokenId, l.f64() / temperature))
        .collect();
    ranked.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    ranked.truncate(k);
    let max = ranked.first().map_or(0.0, |r| r.1);
    let mut total = 0.0;
    for r in ranked.iter_mut() {
        r.1 = (r.1 - max).exp();
        total += r.1;
    }
    for r in ranked.iter_mut() {
        r.1 /= total;
    }
    Ok(ranked)
}

fn draw(dist: &[(TokenId, f64)], rng: &mut Rng) -> TokenId {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(id, p) in dist {
        acc += p;
        if u < acc {
            return id;
        }
    }
    dist.last().expect("distribution is non-empty").0
}

/// Continues `prompt` (which must end in SEP) with top-k sampling until EOS,
/// `max_new` tokens, or the model's maximum length. The returned ids exclude
/// the prompt and the terminating EOS.
pub fn sample_top_k<F: Real>(
    model: &Model<F>,
    prompt: &[TokenId],
    cfg: &SampleConfig,
    rng: &mut Rng,
) -> Result<Vec<TokenId>> {
    if prompt.last() != Some(&SEP) {
        return Err(Error::Input("generation prompt must end with SEP".into()));
    }
    let vocab = model.config().vocab_size;
    if cfg.k == 0 || cfg.k > vocab {
        return Err(Error::Config(format!("k must lie in [1, {vocab}], got {}", cfg.k)));
    }
    let max_len = model.config().max_len;
    if prompt.len() >= max_len {
        return Err(Error::SequenceTooLong {
            len: prompt.len() + 1,
            max: max_len,
        });
    }
    let mut cache = model.new_cache();
    let mut logits = Vec::new();
    for &id in prompt {
        logits = model.step(&mut cache, id)?;
    }
    let mut out = Vec::new();
    while out.len() < cfg.max_new {
        let dist = next_token_distribution(&logits, cfg.k, cfg.temperature)?;
        let next = draw(&dist, rng);
        if next == EOS {
            break;
        }
        out.push(next);
        if cache.len() >= max_len {
            break;
        }
        logits = model.step(&mut cache, next)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lm::ModelConfig;
    use crate::seed;

    fn model() -> Model<f64> {
        let cfg = ModelConfig {
            vocab_size: 12,
            d_model: 8,
            n_heads: 2,
            n_layers: 1,
            d_ffn: 8,
            max_len: 24,
            dropout: 0.0,
        };
        let mut m = Model::<f64>::new(cfg, 3).unwrap();
        // sharpen the distribution a little so the test is not trivially uniform
        for p in m.params_mut() {
            *p *= 20.0;
        }
        m
    }

    #[test]
    fn distribution_support_and_mass() {
        let logits = [5.0, 4.0, 3.0, 1.0, 2.0, 0.5, 2.0];
        let dist = next_token_distribution(&logits, 3, 1.0).unwrap();
        let ids: Vec<TokenId> = dist.iter().map(|d| d.0).collect();
        // PAD, BOS, SEP are excluded; tie between ids 4 and 6 goes to 4
        assert_eq!(ids, [1, 4, 6]);
        assert!((dist.iter().map(|d| d.1).sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(next_token_distribution(&logits, 0, 1.0).is_err());
        assert!(next_token_distribution(&logits, 8, 1.0).is_err());
        assert!(next_token_distribution(&logits, 2, 0.0).is_err());
    }

    #[test]
    fn greedy_is_deterministic() {
        let m = model();
        let cfg = SampleConfig { k: 1, ..SampleConfig::default() };
        let prompt = [BOS, 5, 6, SEP];
        let a = sample_top_k(&m, &prompt, &cfg, &mut seed::rng(1)).unwrap();
        let b = sample_top_k(&m, &prompt, &cfg, &mut seed::rng(2)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn samples_stay_inside_top_k_and_never_emit_masked_ids() {
        let m = model();
        let prompt = [BOS, 7, SEP];
        for k in [1, 2, 4] {
            let cfg = SampleConfig { k, max_new: 10, temperature: 1.0 };
            for s in 0..20 {
                let out = sample_top_k(&m, &prompt, &cfg, &mut seed::rng(s)).unwrap();
                let mut ids = prompt.to_vec();
                for &tok in &out {
                    assert!(!MASKED_IN_GENERATION.contains(&tok));
                    let logits = m.forward(&ids).unwrap();
                    let v = m.config().vocab_size;
                    let last = &logits[(ids.len() - 1) * v..];
                    let dist = next_token_distribution(last, k, 1.0).unwrap();
                    assert!(dist.iter().any(|d| d.0 == tok));
                    ids.push(tok);
                }
                assert!(out.len() <= 10);
            }
        }
    }

    #[test]
    fn full_k_frequencies_match_softmax() {
        let m = model();
        let prompt = [BOS, 8, SEP];
        let v = m.config().vocab_size;
        let logits = m.forward(&prompt).unwrap();
        let last = &logits[2 * v..];
        let probs = next_token_distribution(last, v, 1.0).unwrap();
        let cfg = SampleConfig { k: v, max_new: 1, temperature: 1.0 };
        let mut counts = vec![0usize; v];
        let mut rng = seed::rng(77);
        let trials = 10_000;
        for _ in 0..trials {
            let out = sample_top_k(&m, &prompt, &cfg, &mut rng).unwrap();
            let tok = out.first().copied().unwrap_or(EOS);
            counts[tok as usize] += 1;
        }
        for (id, p) in probs {
            let freq = counts[id as usize] as f64 / trials as f64;
            assert!((freq - p).abs() < 0.02, "id {id}: freq {freq} vs p {p}");
        }
        for id in MASKED_IN_GENERATION {
            assert_eq!(counts[id as usize], 0);
        }
    }

    #[test]
    fn prompt_must_end_with_sep() {
        let m = model();
        assert!(sample_top_k(&m, &[BOS, 5], &SampleConfig::default(), &mut seed::rng(0)).is_err());
        let cfg = SampleConfig { k: 99, ..SampleConfig::default() };
        assert!(sample_top_k(&m, &[BOS, SEP], &cfg, &mut seed::rng(0)).is_err());
    }
}
