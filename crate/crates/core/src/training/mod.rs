//! PIT-MSE training: sample loading, the permutation-invariant loss and the
//! Adam loop with per-epoch learning-rate decay, logging and checkpoints.

mod data;
mod pit;
mod train;

pub use data::{load_sample, load_samples, prepare_features, Sample};
pub use pit::{permutations, permute_slots, pit_mse, pit_mse_value};
pub use train::{
    evaluate_loss, EpochSummary, LossRecord, Split, TrainConfig, Trainer, BEST_CHECKPOINT, LAST_CHECKPOINT, LOSS_CSV,
    TRAIN_STATE,
};
