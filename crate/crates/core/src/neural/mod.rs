//! A small image + table transformer for chart question answering.
//!
//! A patch branch encodes the chart raster, a token branch encodes the
//! question and the flattened table, and a stack of cross-modality blocks
//! lets each branch attend to the other. An operation head reads the text
//! `[CLS]` state and a cell head scores every table token. All gradients are
//! analytic and checked against central differences in [`grad_check`].

mod checkpoint;
mod gradcheck;
mod layers;
mod loss;
mod model;
mod params;
mod predict;
mod train;
mod vocab;

pub use checkpoint::{load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, relative_error, GradCheckReport, TensorCheck};
pub use loss::{loss, loss_delta, loss_with_grad, LossBreakdown};
pub use model::{patchify_raster, CellTokens, ForwardCache, ModelInput, ModelOutput, VisionTapas};
pub use params::{Grads, ParamStore};
pub use predict::{predict_answer, Prediction};
pub use train::{evaluate, train, train_with, write_loss_curve, LossPoint, Split, TrainConfig, TrainExample, TrainReport};
pub use vocab::Vocab;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qa::{AggregationOp, QaError};

pub const NUM_OPS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    pub image_size: usize,
    pub patch_size: usize,
    pub embed_dim: usize,
    pub num_heads: usize,
    pub ffn_dim: usize,
    pub vit_layers: usize,
    pub tapas_layers: usize,
    pub cross_blocks: usize,
    pub vocab_size: usize,
    pub max_rows: usize,
    pub max_cols: usize,
    pub max_seq_len: usize,
    pub num_ops: usize,
    pub seed: u64,
    pub init_std: f64,
    /// Embeddings feed the heads directly: no encoder layers, no final norm.
    #[serde(default)]
    pub linear_only: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            image_size: 64,
            patch_size: 16,
            embed_dim: 64,
            num_heads: 4,
            ffn_dim: 128,
            vit_layers: 2,
            tapas_layers: 2,
            cross_blocks: 4,
            vocab_size: 0,
            max_rows: 16,
            max_cols: 8,
            max_seq_len: crate::qa::MAX_SEQ_LEN,
            num_ops: NUM_OPS,
            seed: 0,
            init_std: 0.02,
            linear_only: false,
        }
    }
}

impl ModelConfig {
    pub fn linear_only() -> Self {
        Self {
            vit_layers: 0,
            tapas_layers: 0,
            cross_blocks: 0,
            linear_only: true,
            ..Self::default()
        }
    }

    pub fn num_patches(&self) -> usize {
        let side = self.image_size / self.patch_size;
        side * side
    }

    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let fail = |msg: String| Err(NeuralError::Config(msg));
        if self.patch_size == 0 || self.image_size == 0 || self.image_size % self.patch_size != 0 {
            return fail(format!(
                "image size {} is not a positive multiple of patch size {}",
                self.image_size, self.patch_size
            ));
        }
        if self.num_heads == 0 || self.embed_dim == 0 || self.embed_dim % self.num_heads != 0 {
            return fail(format!("embed dim {} not divisible by {} heads", self.embed_dim, self.num_heads));
        }
        if self.linear_only {
            if self.vit_layers + self.tapas_layers + self.cross_blocks != 0 {
                return fail("linear-only config cannot have encoder layers".into());
            }
        } else if self.cross_blocks == 0 {
            return fail("need at least one cross-modality block".into());
        }
        if self.num_ops != NUM_OPS {
            return fail(format!("num_ops must be {NUM_OPS}"));
        }
        if self.vocab_size < 4 || self.max_rows == 0 || self.max_cols == 0 || self.max_seq_len == 0 || self.ffn_dim == 0 {
            return fail("vocab, table and sequence limits must be positive".into());
        }
        if !(self.init_std.is_finite() && self.init_std > 0.0) {
            return fail(format!("init std {} must be positive", self.init_std));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum NeuralError {
    #[error("invalid model config: {0}")]
    Config(String),
    #[error("shape mismatch: expected {expected}, found {found}")]
    Shape { expected: String, found: String },
    #[error("{kind} id {id} out of range (limit {limit})")]
    IdOutOfRange { kind: &'static str, id: usize, limit: usize },
    #[error("non-finite gradient in {tensor}")]
    NonFiniteGradient { tensor: String },
    #[error("loss diverged at step {step}: {value}")]
    DivergedLoss { step: usize, value: f64 },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("executing {op} on cells {cells:?}: {source}")]
    Execution {
        op: AggregationOp,
        cells: Vec<(usize, usize)>,
        source: QaError,
    },
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rules() {
        let ok = ModelConfig { vocab_size: 10, ..ModelConfig::default() };
        ok.validate().unwrap();
        assert_eq!(ok.num_patches(), 16);
        assert_eq!(ok.cross_blocks, 4);
        let bad = ModelConfig { patch_size: 15, ..ok.clone() };
        assert!(bad.validate().is_err());
        let bad = ModelConfig { num_heads: 3, ..ok.clone() };
        assert!(bad.validate().is_err());
        let bad = ModelConfig { cross_blocks: 0, ..ok.clone() };
        assert!(bad.validate().is_err());
        let lin = ModelConfig { vocab_size: 10, ..ModelConfig::linear_only() };
        lin.validate().unwrap();
    }
}
