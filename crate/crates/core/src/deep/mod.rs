//! Recurrent classifiers over band-power sequences.
//!
//! An LSTM (or a forward/backward pair) reads a standardized segment and
//! its last hidden state feeds a two-class dense head. Gradients come from
//! hand-written backpropagation through time and can be checked against
//! central finite differences with [`grad_check`].

mod grid;
mod lstm;
mod network;
mod train;

pub use grid::{
    deep_bundle_stem, load_deep_model, save_deep_model, train_deep_grid, DeepModel,
    SequenceStandardizer, DEEP_BUNDLE_FORMAT_VERSION,
};
pub use lstm::{bilstm_forward, lstm_backward, lstm_forward, LstmCache, LstmParams};
pub use network::{softmax_cross_entropy, HeadParams, ModelKind, Network, NUM_CLASSES};
pub use train::{
    grad_check, loss_curve_csv, network_accuracy, train, Adam, EpochStats, GradScope, TrainConfig,
    TrainOutcome, GRAD_CHECK_STEP,
};

#[derive(Debug, thiserror::Error)]
pub enum DeepError {
    #[error("sequence contains non-finite values")]
    NonFiniteInput,
    #[error("sequence has no steps")]
    EmptySequence,
    #[error("expected {expected} inputs per step, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("labels contain a single class")]
    DegenerateLabels,
    #[error("no training sequences")]
    EmptyInput,
    #[error("{sequences} sequences but {labels} labels")]
    LabelCountMismatch { sequences: usize, labels: usize },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("model bundle: {0}")]
    Bundle(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
