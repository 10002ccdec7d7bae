use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("failed to read lexicon {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("lexicon line {line}: {message}")]
    Parse { line: usize, message: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("lexicon is missing required section: {0}")]
    LexiconMissing(String),
    #[error("entity {id} span {start}..{end} does not match the prompt")]
    EntityMismatch { id: usize, start: usize, end: usize },
    #[error("inconsistent analysis inputs: {0}")]
    InconsistentInputs(String),
}

/// Failures reported by (or about) an external or scripted backend.
///
/// Variants that come from a reply carry the raw body so callers can log what
/// the backend actually sent.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum BackendError {
    #[error("request to {endpoint} timed out")]
    Timeout { endpoint: String },
    #[error("{endpoint} answered with status {status}: {body}")]
    BadStatus { endpoint: String, status: u16, body: String },
    #[error("malformed reply ({reason}): {body}")]
    MalformedReply { reason: String, body: String },
    #[error("transport error talking to {endpoint}: {message}")]
    Transport { endpoint: String, message: String },
    #[error("backend reply violates the contract ({reason}): {body}")]
    InvalidReply { reason: String, body: String },
    #[error("no scripted reply for request {key} in {dir}")]
    MissingFixture { key: String, dir: String },
    #[error("fixture file {path}: {message}")]
    FixtureIo { path: String, message: String },
    #[error("backend not configured: {0}")]
    Unconfigured(String),
    #[error("retouch request needs an image reference")]
    MissingImage,
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error("backend failure: {0}")]
    BackendFailure(#[from] BackendError),
    #[error("layout infeasible: {0}")]
    LayoutInfeasible(String),
    #[error("entity '{head}' has {attributes} attributes and truncation is disabled")]
    UnsatisfiableBudget { head: String, attributes: usize },
    #[error("invalid plan: {0}")]
    InvalidPlan(String),
}

#[derive(Debug, Error)]
pub enum ComposeError {
    #[error("shape mismatch: expected {expected}, found {found}")]
    ShapeMismatch { expected: String, found: String },
    #[error("nothing to composite: no regional latents and no background")]
    EmptyPlan,
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("invalid latent: {0}")]
    InvalidLatent(String),
    #[error("backend failure: {0}")]
    BackendFailure(#[from] BackendError),
}
