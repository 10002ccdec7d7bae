use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::grid::{resize_box, LatentGrid, LatentShape};
use super::modulation::{blend, composite_regions, enhance, suppress, ModulationParams};
use crate::backends::DenoiserBackend;
use crate::error::ComposeError;
use crate::planner::CompositionPlan;

/// Latent and remaining step count between two sampling steps.
#[derive(Debug, Clone, PartialEq)]
pub struct SamplingState {
    pub t: usize,
    pub z: LatentGrid,
}

/// Unit-normal grid from a ChaCha8 stream (Box-Muller, both outputs used).
pub fn initial_noise(shape: LatentShape, seed: u64) -> Result<LatentGrid, ComposeError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = shape.len();
    let mut values = Vec::with_capacity(n + 1);
    while values.len() < n {
        // 1 - u keeps the log argument in (0, 1]
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen::<f64>();
        let r = libm::sqrt(-2.0 * libm::log(u1));
        let theta = 2.0 * std::f64::consts::PI * u2;
        values.push(r * libm::cos(theta));
        values.push(r * libm::sin(theta));
    }
    values.truncate(n);
    LatentGrid::new(shape, values)
}

/// One timestep: denoise the whole prompt batch against the shared latent,
/// modulate each regional latent, composite over the background latent and
/// blend with the whole-prompt latent.
pub fn sample_step(
    state: &SamplingState,
    plan: &CompositionPlan,
    params: &ModulationParams,
    denoiser: &dyn DenoiserBackend,
) -> Result<SamplingState, ComposeError> {
    if state.t == 0 {
        return Err(ComposeError::InvalidParams("sampling already finished".into()));
    }
    let shape = state.z.shape();
    let batch = plan.prompt_batch();
    let outputs: Vec<LatentGrid> = batch
        .par_iter()
        .map(|prompt| denoiser.denoise(&state.z, prompt, state.t, params.steps))
        .collect::<Result<_, _>>()?;
    for out in &outputs {
        out.require_shape(shape)?;
    }

    let (whole, rest) = outputs.split_first().expect("batch holds the whole prompt");
    let (background, regional) = rest.split_last().expect("batch holds the background");
    let regions = plan
        .foreground
        .iter()
        .zip(regional)
        .map(|(placed, latent)| {
            let mask = resize_box(&placed.bbox, shape.height, shape.width);
            let z = enhance(latent, &mask, params.lambda_pos)?;
            let z = suppress(&z, &mask, params.lambda_neg)?;
            Ok((z, mask))
        })
        .collect::<Result<Vec<_>, ComposeError>>()?;
    let composite = composite_regions(&regions, Some(background))?;
    Ok(SamplingState { t: state.t - 1, z: blend(&composite, whole, params.omega)? })
}

/// Runs `params.steps` sampling steps from seeded noise and returns the final
/// latent.
pub fn run_sampling(
    plan: &CompositionPlan,
    params: &ModulationParams,
    shape: LatentShape,
    denoiser: &dyn DenoiserBackend,
) -> Result<LatentGrid, ComposeError> {
    let (params, _) = params.validated()?;
    let mut state = SamplingState { t: params.steps, z: initial_noise(shape, params.seed)? };
    while state.t > 0 {
        log::debug!("sampling step {} of {}", params.steps - state.t + 1, params.steps);
        state = sample_step(&state, plan, &params, denoiser)?;
    }
    Ok(state.z)
}
