//! Complex scene generation in three stages.
//!
//! * **Composition**: a rule-based prompt analyzer counts concepts, finds
//!   spatial relations and conflicting entities, and a planner turns a complex
//!   prompt into simple prompts with an area-ordered bounding-box layout
//!   ([`analysis`], [`planner`]).
//! * **Painting**: a per-timestep sampler runs the whole prompt batch against a
//!   shared latent, modulates each regional latent inside/outside its box,
//!   composites the regions over the background and blends with the
//!   whole-prompt latent ([`composer`]).
//! * **Retouching**: the extracted entities and attributes are shipped to an
//!   external detail-enhancement service ([`backends::retouch`]).
//!
//! Every model-facing step sits behind a backend trait so the whole pipeline
//! runs offline against deterministic template/scripted planners and a mock
//! denoiser.

pub mod analysis;
pub mod backends;
pub mod cli;
pub mod composer;
pub mod config;
pub mod error;
pub mod hash;
pub mod lexicon;
pub mod planner;
pub mod svg;

pub use analysis::{analyze, Analysis, ComplexityReport, ScenePrompt, Verdict};
pub use composer::{run_sampling, LatentGrid, LatentShape, ModulationParams, RegionMask};
pub use error::{AnalysisError, BackendError, ComposeError, LexiconError, PlanError};
pub use lexicon::Lexicon;
pub use planner::{build_plan, BoundingBox, CompositionPlan, PlannerConfig};
