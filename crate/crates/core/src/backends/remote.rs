use serde::{Deserialize, Serialize};
use serde_json::json;

use super::http::{endpoint_url, HttpClient};
use super::retouch::RetouchRequest;
use super::{
    DenoiserBackend, LayoutReply, LayoutRequest, MergeDivideReply, MergeDivideRequest, PlannerBackend,
    PlannerRequest, RecaptionReply, RecaptionRequest,
};
use crate::composer::{LatentGrid, LatentShape};
use crate::error::{BackendError, PlanError};

/// Latent on the wire: row-major, channels-last doubles.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentPayload {
    pub h: usize,
    pub w: usize,
    pub c: usize,
    pub data: Vec<f64>,
}

impl From<&LatentGrid> for LatentPayload {
    fn from(z: &LatentGrid) -> Self {
        let s = z.shape();
        LatentPayload { h: s.height, w: s.width, c: s.channels, data: z.values().to_vec() }
    }
}

impl LatentPayload {
    pub fn into_grid(self) -> Result<LatentGrid, String> {
        LatentGrid::new(LatentShape::new(self.h, self.w, self.c), self.data).map_err(|e| e.to_string())
    }
}

const PLANNER_SYSTEM: &str = "You plan image compositions. Answer with one JSON object and nothing else.";

fn task_instructions(task: &str) -> &'static str {
    match task {
        "recaption" => {
            "Write one sub-prompt per entity. Each text must contain the entity's head noun \
             and all of its attributes. Reply {\"subprompts\": [{\"text\", \"entity_ids\"}]}."
        }
        "merge_divide" => {
            "Group the sub-prompts into simple prompts of at most max_concepts concepts \
             (entities plus attributes). Never put conflicting or spatially related entities \
             together. Join merged texts with \"and\". Reply {\"prompts\": [{\"text\", \
             \"entity_ids\", \"role\": \"foreground\", \"concept_count\"}], \"warnings\": []}."
        }
        _ => {
            "Give each prompt a box [x, y, width, height] in image fractions so that every \
             relation holds. Reply {\"boxes\": [[x, y, w, h], ...]} in prompt order."
        }
    }
}

/// Chat-completion messages for a planner task, for services that front a
/// general chat model rather than implementing the tasks directly.
pub fn chat_messages(req: &PlannerRequest) -> serde_json::Value {
    let payload = serde_json::to_string_pretty(req).expect("planner requests serialize");
    json!([
        {"role": "system", "content": PLANNER_SYSTEM},
        {"role": "user", "content": format!("{}\n\n{}", task_instructions(req.task()), payload)},
    ])
}

/// Planner reached over HTTP: `POST <base>/plan` with `{task, payload}`.
#[derive(Debug, Clone)]
pub struct RemotePlanner {
    client: HttpClient,
    url: String,
}

impl RemotePlanner {
    pub fn new(client: HttpClient, base_url: &str) -> RemotePlanner {
        RemotePlanner { client, url: endpoint_url(base_url, "plan") }
    }

    fn call<T: for<'de> Deserialize<'de>>(&self, req: PlannerRequest) -> Result<T, PlanError> {
        Ok(self.client.post_json(&self.url, &req)?)
    }
}

impl PlannerBackend for RemotePlanner {
    fn name(&self) -> &str {
        "remote"
    }

    fn recaption(&self, req: &RecaptionRequest) -> Result<RecaptionReply, PlanError> {
        self.call(PlannerRequest::Recaption(req.clone()))
    }

    fn merge_divide(&self, req: &MergeDivideRequest) -> Result<MergeDivideReply, PlanError> {
        self.call(PlannerRequest::MergeDivide(req.clone()))
    }

    fn layout(&self, req: &LayoutRequest) -> Result<LayoutReply, PlanError> {
        self.call(PlannerRequest::Layout(req.clone()))
    }
}

#[derive(Serialize)]
struct DenoiseBody<'a> {
    latent: LatentPayload,
    prompt: &'a str,
    step: usize,
    total_steps: usize,
}

#[derive(Serialize)]
struct DecodeBody {
    latent: LatentPayload,
}

#[derive(Deserialize)]
struct ImageReply {
    image_ref: String,
}

/// Diffusion service: `POST /denoise` for steps and `POST /decode` to turn the
/// final latent into an image reference.
#[derive(Debug, Clone)]
pub struct RemoteDenoiser {
    client: HttpClient,
    base: String,
}

impl RemoteDenoiser {
    pub fn new(client: HttpClient, base_url: &str) -> RemoteDenoiser {
        RemoteDenoiser { client, base: base_url.to_string() }
    }

    pub fn decode(&self, z: &LatentGrid) -> Result<String, BackendError> {
        let reply: ImageReply =
            self.client.post_json(&endpoint_url(&self.base, "decode"), &DecodeBody { latent: z.into() })?;
        non_empty_ref(reply.image_ref)
    }
}

fn non_empty_ref(image_ref: String) -> Result<String, BackendError> {
    if image_ref.trim().is_empty() {
        return Err(BackendError::InvalidReply { reason: "empty image_ref".into(), body: image_ref });
    }
    Ok(image_ref)
}

impl DenoiserBackend for RemoteDenoiser {
    fn name(&self) -> &str {
        "remote"
    }

    fn denoise(
        &self,
        z: &LatentGrid,
        prompt: &str,
        step: usize,
        total_steps: usize,
    ) -> Result<LatentGrid, BackendError> {
        let body = DenoiseBody { latent: z.into(), prompt, step, total_steps };
        let reply: LatentPayload = self.client.post_json(&endpoint_url(&self.base, "denoise"), &body)?;
        let raw = || serde_json::to_string(&reply).unwrap_or_default();
        if (reply.h, reply.w, reply.c) != (z.shape().height, z.shape().width, z.shape().channels) {
            return Err(BackendError::InvalidReply {
                reason: format!("latent {}x{}x{} for input {}", reply.h, reply.w, reply.c, z.shape()),
                body: raw(),
            });
        }
        let body = raw();
        reply.into_grid().map_err(|reason| BackendError::InvalidReply { reason, body })
    }
}

/// Detail-enhancement service: `POST /retouch`.
#[derive(Debug, Clone)]
pub struct RetouchClient {
    client: HttpClient,
    url: String,
}

impl RetouchClient {
    pub fn new(client: HttpClient, base_url: &str) -> RetouchClient {
        RetouchClient { client, url: endpoint_url(base_url, "retouch") }
    }

    pub fn retouch(&self, req: &RetouchRequest) -> Result<String, BackendError> {
        let reply: ImageReply = self.client.post_json(&self.url, req)?;
        non_empty_ref(reply.image_ref)
    }
}
