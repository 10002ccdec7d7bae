//! Request for the detail-enhancement pass that follows painting.

use serde::{Deserialize, Serialize};

use crate::error::BackendError;
use crate::planner::{entity_phrase, CompositionPlan};

/// Placeholder strength; no reference value exists for the retouch pass.
pub const DEFAULT_RETOUCH_STRENGTH: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetouchRequest {
    pub image_ref: String,
    pub detail_prompt: String,
    pub strength: f64,
}

/// Lists every entity of the plan with its attributes ("a red apple, a cat"),
/// following the plan's prompt order: foreground prompts first, then the
/// background. A plan without foreground prompts sends the background text.
pub fn build_retouch_request(
    plan: &CompositionPlan,
    image_ref: &str,
) -> Result<RetouchRequest, BackendError> {
    let image_ref = image_ref.trim();
    if image_ref.is_empty() {
        return Err(BackendError::MissingImage);
    }
    let detail_prompt = if plan.foreground.is_empty() {
        plan.background.text.clone()
    } else {
        plan.foreground
            .iter()
            .flat_map(|p| p.prompt.entity_ids.iter())
            .chain(plan.background.entity_ids.iter())
            .filter_map(|id| plan.entities.iter().find(|e| e.id == *id))
            .map(|e| entity_phrase(&e.head, &e.noun, &e.attributes))
            .collect::<Vec<_>>()
            .join(", ")
    };
    Ok(RetouchRequest { image_ref: image_ref.to_string(), detail_prompt, strength: DEFAULT_RETOUCH_STRENGTH })
}
