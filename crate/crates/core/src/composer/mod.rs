//! Painting stage: regional latent modulation, compositing and blending
//! driven by a per-timestep prompt batch.

mod attention;
mod grid;
mod modulation;
mod sampler;

pub use attention::{cross_attention, softmax_rows, AttentionWeights, Matrix, PromptEmbedding};
pub use grid::{resize_box, LatentGrid, LatentShape, RegionMask};
pub use modulation::{
    blend, composite_regions, enhance, suppress, ModulationParams, DEFAULT_LAMBDA_NEG, DEFAULT_LAMBDA_POS,
    DEFAULT_OMEGA, DEFAULT_STEPS,
};
pub use sampler::{initial_noise, run_sampling, sample_step, SamplingState};

/// Latent shape used when none is configured.
pub const DEFAULT_SHAPE: LatentShape = LatentShape::new(64, 64, 4);
