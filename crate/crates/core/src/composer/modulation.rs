use serde::{Deserialize, Serialize};

use super::grid::{mismatch, LatentGrid, RegionMask};
use crate::error::ComposeError;

pub const DEFAULT_LAMBDA_POS: f64 = 0.5;
pub const DEFAULT_LAMBDA_NEG: f64 = 0.5;
pub const DEFAULT_OMEGA: f64 = 0.7;
pub const DEFAULT_STEPS: usize = 8;

/// Painting hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModulationParams {
    /// Pull toward the channel max inside each region.
    pub lambda_pos: f64,
    /// Pull toward the channel min outside each region.
    pub lambda_neg: f64,
    /// Weight of the composited latent against the whole-prompt latent.
    pub omega: f64,
    pub steps: usize,
    pub seed: u64,
}

impl Default for ModulationParams {
    fn default() -> Self {
        ModulationParams {
            lambda_pos: DEFAULT_LAMBDA_POS,
            lambda_neg: DEFAULT_LAMBDA_NEG,
            omega: DEFAULT_OMEGA,
            steps: DEFAULT_STEPS,
            seed: 0,
        }
    }
}

impl ModulationParams {
    /// Checks the parameters, clamping modulation strengths above 1.
    ///
    /// Returns the usable parameters and one warning per clamped value.
    /// Negative or non-finite strengths, ω outside `[0, 1]` and zero steps are
    /// errors.
    pub fn validated(self) -> Result<(ModulationParams, Vec<String>), ComposeError> {
        let mut out = self;
        let mut warnings = Vec::new();
        for (name, value) in [("lambda_pos", &mut out.lambda_pos), ("lambda_neg", &mut out.lambda_neg)] {
            if !value.is_finite() || *value < 0.0 {
                return Err(ComposeError::InvalidParams(format!("{name} must be >= 0, got {value}")));
            }
            if *value > 1.0 {
                let msg = format!("{name} {value} clamped to 1");
                log::warn!("{msg}");
                warnings.push(msg);
                *value = 1.0;
            }
        }
        if !(0.0..=1.0).contains(&out.omega) {
            return Err(ComposeError::InvalidParams(format!("omega must lie in [0, 1], got {}", out.omega)));
        }
        if out.steps == 0 {
            return Err(ComposeError::InvalidParams("steps must be at least 1".into()));
        }
        Ok((out, warnings))
    }
}

fn check_lambda(lambda: f64) -> Result<(), ComposeError> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(ComposeError::InvalidParams(format!(
            "modulation strength must lie in [0, 1], got {lambda}"
        )));
    }
    Ok(())
}

/// Moves each cell toward `target` by `lambda`, for cells where
/// `mask == select`. `lambda == 1` lands exactly on the target; `clamp` keeps
/// rounding from stepping past it.
fn pull(
    z: &LatentGrid,
    mask: &RegionMask,
    lambda: f64,
    select: bool,
    target: &[f64],
    clamp: fn(f64, f64) -> f64,
) -> Result<LatentGrid, ComposeError> {
    check_lambda(lambda)?;
    mask.require_fits(z.shape())?;
    let mut out = z.clone();
    for (cell, &bit) in out.cells_mut().zip(mask.bits()) {
        if bit != select {
            continue;
        }
        for (v, &t) in cell.iter_mut().zip(target) {
            *v = if lambda >= 1.0 { t } else { clamp(*v + lambda * (t - *v), t) };
        }
    }
    Ok(out)
}

/// Inside the mask: `z + λ·(max_c − z)` with the per-channel max of `z`.
pub fn enhance(z: &LatentGrid, mask: &RegionMask, lambda_pos: f64) -> Result<LatentGrid, ComposeError> {
    pull(z, mask, lambda_pos, true, &z.channel_max(), f64::min)
}

/// Outside the mask: `z − λ·(z − min_c)` with the per-channel min of `z`.
pub fn suppress(z: &LatentGrid, mask: &RegionMask, lambda_neg: f64) -> Result<LatentGrid, ComposeError> {
    pull(z, mask, lambda_neg, false, &z.channel_min(), f64::max)
}

/// Writes each regional latent into its mask over the background, in list
/// order, so later (smaller) regions overwrite earlier ones. Without a
/// background the canvas starts at zero.
pub fn composite_regions(
    latents: &[(LatentGrid, RegionMask)],
    background: Option<&LatentGrid>,
) -> Result<LatentGrid, ComposeError> {
    let mut out = match (background, latents.first()) {
        (Some(bg), _) => bg.clone(),
        (None, Some((first, _))) => LatentGrid::zeros(first.shape())?,
        (None, None) => return Err(ComposeError::EmptyPlan),
    };
    let shape = out.shape();
    let channels = shape.channels;
    for (latent, mask) in latents {
        latent.require_shape(shape)?;
        mask.require_fits(shape)?;
        for ((dst, src), &bit) in out.cells_mut().zip(latent.cells()).zip(mask.bits()) {
            if bit {
                dst[..channels].copy_from_slice(src);
            }
        }
    }
    Ok(out)
}

/// `ω·z_cat + (1 − ω)·z_c`, kept inside the range of the two inputs.
pub fn blend(z_cat: &LatentGrid, z_c: &LatentGrid, omega: f64) -> Result<LatentGrid, ComposeError> {
    if !(0.0..=1.0).contains(&omega) {
        return Err(ComposeError::InvalidParams(format!("omega must lie in [0, 1], got {omega}")));
    }
    if z_cat.shape() != z_c.shape() {
        return Err(mismatch(z_cat.shape(), z_c.shape()));
    }
    let values = z_cat
        .values()
        .iter()
        .zip(z_c.values())
        .map(|(&a, &b)| (omega * a + (1.0 - omega) * b).clamp(a.min(b), a.max(b)))
        .collect();
    LatentGrid::new(z_cat.shape(), values)
}
