//! Decoder-only transformer trained to reconstruct `T` from `BOS S SEP`.
//!
//! Pre-norm residual blocks, learned positional embeddings, and an output
//! projection tied to the token embeddings. Gradients are derived by hand and
//! checked against central finite differences in the test suite. All math is
//! generic over [`Real`] so the model runs in `f64` (default) or `f32`.

pub mod backend;
mod checkpoint;
mod config;
mod kernels;
mod model;
mod params;
mod real;
mod sample;
mod train;

pub use checkpoint::{Checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use config::{ModelConfig, Precision, TrainConfig};
pub use model::{Gradients, KvCache, LossSummary, Model};
pub use params::{ParamLayout, TensorSpec};
pub use real::Real;
pub use sample::{next_token_distribution, sample_top_k, SampleConfig, MASKED_IN_GENERATION};
pub use train::{train, train_with_hooks, EarlyStopping, EpochLog, StopDecision, TrainOutcome};
