use std::fs;
use std::io::ErrorKind;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{
    LayoutReply, LayoutRequest, MergeDivideReply, MergeDivideRequest, PlannerBackend, PlannerRequest,
    RecaptionReply, RecaptionRequest,
};
use crate::error::{BackendError, PlanError};
use crate::hash::fnv1a64;

/// Fixture key of a request: FNV-1a of its compact wire JSON, 16 hex digits.
pub fn request_key(req: &PlannerRequest) -> String {
    let body = serde_json::to_string(req).expect("planner requests serialize");
    format!("{:016x}", fnv1a64(body.as_bytes()))
}

fn io_error(path: &Path, e: impl ToString) -> BackendError {
    BackendError::FixtureIo { path: path.display().to_string(), message: e.to_string() }
}

/// Replays canned replies from `<dir>/<key>.json`.
pub struct ScriptedPlanner {
    dir: PathBuf,
    fallback: Option<Box<dyn PlannerBackend>>,
}

impl ScriptedPlanner {
    pub fn new(dir: impl Into<PathBuf>) -> ScriptedPlanner {
        ScriptedPlanner { dir: dir.into(), fallback: None }
    }

    /// Answers requests without a fixture from `fallback` instead of failing.
    /// Combined with recording, this re-derives the later tasks after a reply
    /// was edited by hand.
    pub fn with_fallback(mut self, fallback: Box<dyn PlannerBackend>) -> ScriptedPlanner {
        self.fallback = Some(fallback);
        self
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Canned reply for `req`, or `None` when no fixture exists.
    fn fetch<T: DeserializeOwned>(&self, req: &PlannerRequest) -> Result<Option<T>, PlanError> {
        let key = request_key(req);
        let path = self.dir.join(format!("{key}.json"));
        let body = match fs::read_to_string(&path) {
            Ok(body) => body,
            Err(e) if e.kind() == ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_error(&path, e).into()),
        };
        log::debug!("scripted {} reply from {}", req.task(), path.display());
        serde_json::from_str(&body)
            .map(Some)
            .map_err(|e| BackendError::MalformedReply { reason: e.to_string(), body }.into())
    }

    fn missing(&self, req: &PlannerRequest) -> PlanError {
        BackendError::MissingFixture { key: request_key(req), dir: self.dir.display().to_string() }.into()
    }

    fn reply<T: DeserializeOwned>(
        &self,
        req: PlannerRequest,
        fallback: impl FnOnce(&dyn PlannerBackend) -> Result<T, PlanError>,
    ) -> Result<T, PlanError> {
        match (self.fetch(&req)?, &self.fallback) {
            (Some(reply), _) => Ok(reply),
            (None, Some(backend)) => fallback(backend.as_ref()),
            (None, None) => Err(self.missing(&req)),
        }
    }
}

impl PlannerBackend for ScriptedPlanner {
    fn name(&self) -> &str {
        "scripted"
    }

    fn recaption(&self, req: &RecaptionRequest) -> Result<RecaptionReply, PlanError> {
        self.reply(PlannerRequest::Recaption(req.clone()), |b| b.recaption(req))
    }

    fn merge_divide(&self, req: &MergeDivideRequest) -> Result<MergeDivideReply, PlanError> {
        self.reply(PlannerRequest::MergeDivide(req.clone()), |b| b.merge_divide(req))
    }

    fn layout(&self, req: &LayoutRequest) -> Result<LayoutReply, PlanError> {
        self.reply(PlannerRequest::Layout(req.clone()), |b| b.layout(req))
    }
}

/// Forwards to another planner and stores every exchange as a fixture that
/// [`ScriptedPlanner`] can replay: `<key>.json` holds the reply and
/// `<key>.request.json` the request, for reading and hand-editing.
pub struct RecordingPlanner<'a> {
    inner: &'a dyn PlannerBackend,
    dir: PathBuf,
}

impl<'a> RecordingPlanner<'a> {
    pub fn new(inner: &'a dyn PlannerBackend, dir: impl Into<PathBuf>) -> RecordingPlanner<'a> {
        RecordingPlanner { inner, dir: dir.into() }
    }

    fn record<T: Serialize>(&self, req: PlannerRequest, reply: T) -> Result<T, PlanError> {
        fs::create_dir_all(&self.dir).map_err(|e| io_error(&self.dir, e))?;
        let key = request_key(&req);
        let write = |name: String, value: String| {
            let path = self.dir.join(name);
            fs::write(&path, value + "\n").map_err(|e| io_error(&path, e))
        };
        write(
            format!("{key}.request.json"),
            serde_json::to_string_pretty(&req).expect("requests serialize"),
        )?;
        write(format!("{key}.json"), serde_json::to_string_pretty(&reply).expect("replies serialize"))?;
        Ok(reply)
    }
}

impl PlannerBackend for RecordingPlanner<'_> {
    fn name(&self) -> &str {
        "recording"
    }

    fn recaption(&self, req: &RecaptionRequest) -> Result<RecaptionReply, PlanError> {
        let reply = self.inner.recaption(req)?;
        self.record(PlannerRequest::Recaption(req.clone()), reply)
    }

    fn merge_divide(&self, req: &MergeDivideRequest) -> Result<MergeDivideReply, PlanError> {
        let reply = self.inner.merge_divide(req)?;
        self.record(PlannerRequest::MergeDivide(req.clone()), reply)
    }

    fn layout(&self, req: &LayoutRequest) -> Result<LayoutReply, PlanError> {
        let reply = self.inner.layout(req)?;
        self.record(PlannerRequest::Layout(req.clone()), reply)
    }
}
