//! The FUN-SSL network: stacked FUN blocks (or the FN-block baseline), the
//! causal output head, analytic complexity counters and checkpoints.

mod blocks;
mod checkpoint;
mod complexity;
mod config;
mod head;
mod model;
mod params;

pub use blocks::{downsample, fn_block, fun_block, upsample, BlockSkips};
pub use checkpoint::{read_container, write_container, Checkpoint, CHECKPOINT_MAGIC};
pub use complexity::{complexity_table, count_flops, count_params, ComplexityRow};
pub use config::{BlockKind, ModelConfig};
pub use head::output_head;
pub use model::{model_forward, scale_extents, Model};
pub use params::{declare_params, Bound, ParamDecl, ParamInit, ParamStore};
