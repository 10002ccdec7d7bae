use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::DenoiserBackend;
use crate::composer::{cross_attention, AttentionWeights, LatentGrid, LatentShape, Matrix, PromptEmbedding};
use crate::error::BackendError;
use crate::hash::fnv1a64;

/// Share of the incoming latent kept by one mock step.
pub const MOCK_DECAY: f64 = 0.9;

const EMBED_DIM: usize = 8;
const POSITION_FEATURES: usize = 4;
const WEIGHT_SEED: u64 = 0x005e_ed0f_a77e_2710;

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Deterministic stand-in for a diffusion model.
///
/// Each step returns `0.9·z + 0.1·P`, where `P` is a per-prompt pattern:
/// every cell attends, through the reference cross-attention kernel, from a
/// positional query to a token embedding seeded by the FNV-1a hash of the
/// prompt. Repeated steps contract toward `P`, so the final latent depends on
/// every prompt in the batch.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockDenoiser;

impl MockDenoiser {
    fn weights(channels: usize) -> AttentionWeights {
        let mut rng = ChaCha8Rng::seed_from_u64(WEIGHT_SEED ^ channels as u64);
        let mut matrix =
            |rows: usize| Matrix::new(rows, channels, uniform(&mut rng, rows * channels)).expect("sized");
        let wq = matrix(POSITION_FEATURES);
        let wk = matrix(EMBED_DIM);
        let wv = matrix(EMBED_DIM);
        AttentionWeights::new(wq, wk, wv).expect("compatible projections")
    }

    /// Token embedding of a prompt: one row per word (at least one).
    pub fn embed(prompt: &str) -> PromptEmbedding {
        let tokens = prompt.split_whitespace().count().max(1);
        let mut rng = ChaCha8Rng::seed_from_u64(fnv1a64(prompt.as_bytes()));
        let values = Matrix::new(tokens, EMBED_DIM, uniform(&mut rng, tokens * EMBED_DIM)).expect("sized");
        PromptEmbedding::new(values).expect("finite embedding")
    }

    /// The grid a prompt pulls latents toward.
    pub fn pattern(prompt: &str, shape: LatentShape) -> LatentGrid {
        let coord = |i: usize, n: usize| {
            if n > 1 {
                2.0 * i as f64 / (n - 1) as f64 - 1.0
            } else {
                0.0
            }
        };
        let mut queries = Vec::with_capacity(shape.cells() * POSITION_FEATURES);
        for r in 0..shape.height {
            for c in 0..shape.width {
                let (y, x) = (coord(r, shape.height), coord(c, shape.width));
                queries.extend_from_slice(&[1.0, y, x, x * y]);
            }
        }
        let queries = Matrix::new(shape.cells(), POSITION_FEATURES, queries).expect("sized");
        let out = cross_attention(&queries, &Self::embed(prompt), &Self::weights(shape.channels))
            .expect("mock shapes are consistent");
        LatentGrid::new(shape, out.data().to_vec()).expect("attention output is finite")
    }
}

impl DenoiserBackend for MockDenoiser {
    fn name(&self) -> &str {
        "mock"
    }

    fn deterministic(&self) -> bool {
        true
    }

    fn denoise(
        &self,
        z: &LatentGrid,
        prompt: &str,
        _step: usize,
        _total: usize,
    ) -> Result<LatentGrid, BackendError> {
        let pattern = Self::pattern(prompt, z.shape());
        let values = z
            .values()
            .iter()
            .zip(pattern.values())
            .map(|(&v, &p)| MOCK_DECAY * v + (1.0 - MOCK_DECAY) * p)
            .collect();
        Ok(LatentGrid::new(z.shape(), values).expect("mixing finite grids stays finite"))
    }
}
