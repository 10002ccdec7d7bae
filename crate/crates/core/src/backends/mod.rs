//! Backend contracts and implementations.
//!
//! Planning is split into three request/response tasks (recaption,
//! merge/divide, layout) so that a language model, canned fixtures or the
//! built-in rules can answer each one. Painting needs a denoiser that maps
//! `(z_t, prompt, step)` to `z_{t-1}`; retouching is a single remote call.

mod http;
mod mock;
mod remote;
pub mod retouch;
mod scripted;
mod template;

use serde::{Deserialize, Serialize};

use crate::analysis::{AttributeSet, ConflictPair, Entity, SpatialRelation};
use crate::composer::LatentGrid;
use crate::error::{BackendError, PlanError};
use crate::planner::{BoundingBox, LayoutRelation, SimplePrompt, SubPrompt};

pub use http::{endpoint_url, HttpClient, DEFAULT_TIMEOUT};
pub use mock::{MockDenoiser, MOCK_DECAY};
pub use remote::{chat_messages, LatentPayload, RemoteDenoiser, RemotePlanner, RetouchClient};
pub use retouch::{build_retouch_request, RetouchRequest, DEFAULT_RETOUCH_STRENGTH};
pub use scripted::{request_key, RecordingPlanner, ScriptedPlanner};
pub use template::TemplatePlanner;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecaptionRequest {
    pub prompt: String,
    pub entities: Vec<Entity>,
    pub attributes: Vec<AttributeSet>,
    pub spatial: Vec<SpatialRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecaptionReply {
    pub subprompts: Vec<SubPrompt>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeDivideRequest {
    pub subprompts: Vec<SubPrompt>,
    pub entities: Vec<Entity>,
    pub attributes: Vec<AttributeSet>,
    pub spatial: Vec<SpatialRelation>,
    pub conflicts: Vec<ConflictPair>,
    pub max_concepts: usize,
    pub truncate_attributes: bool,
    /// Entities that may end up as the background prompt; kept unmerged.
    pub background_candidates: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MergeDivideReply {
    pub prompts: Vec<SimplePrompt>,
    #[serde(default)]
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayoutItem {
    pub text: String,
    pub concept_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutRequest {
    pub prompts: Vec<LayoutItem>,
    pub relations: Vec<LayoutRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayoutReply {
    pub boxes: Vec<BoundingBox>,
}

/// Body of a planner call on the wire: `{"task": ..., "payload": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "task", content = "payload", rename_all = "snake_case")]
pub enum PlannerRequest {
    Recaption(RecaptionRequest),
    MergeDivide(MergeDivideRequest),
    Layout(LayoutRequest),
}

impl PlannerRequest {
    pub fn task(&self) -> &'static str {
        match self {
            PlannerRequest::Recaption(_) => "recaption",
            PlannerRequest::MergeDivide(_) => "merge_divide",
            PlannerRequest::Layout(_) => "layout",
        }
    }
}

/// Answers the three planning tasks. Replies are checked by the planner
/// afterwards; an implementation never needs to repair its own output.
pub trait PlannerBackend: Send + Sync {
    fn name(&self) -> &str;
    fn recaption(&self, req: &RecaptionRequest) -> Result<RecaptionReply, PlanError>;
    fn merge_divide(&self, req: &MergeDivideRequest) -> Result<MergeDivideReply, PlanError>;
    fn layout(&self, req: &LayoutRequest) -> Result<LayoutReply, PlanError>;
}

/// One denoising step. The output must have the input's shape.
pub trait DenoiserBackend: Sync {
    fn name(&self) -> &str;

    /// Same inputs always give bit-identical outputs.
    fn deterministic(&self) -> bool {
        false
    }

    fn denoise(
        &self,
        z: &LatentGrid,
        prompt: &str,
        step: usize,
        total_steps: usize,
    ) -> Result<LatentGrid, BackendError>;
}

/// Dispatches a wire request to a backend and serializes the reply.
pub fn answer(backend: &dyn PlannerBackend, req: &PlannerRequest) -> Result<serde_json::Value, PlanError> {
    let value = match req {
        PlannerRequest::Recaption(r) => serde_json::to_value(backend.recaption(r)?),
        PlannerRequest::MergeDivide(r) => serde_json::to_value(backend.merge_divide(r)?),
        PlannerRequest::Layout(r) => serde_json::to_value(backend.layout(r)?),
    };
    Ok(value.expect("planner replies serialize"))
}
