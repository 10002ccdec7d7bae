//! Composition stage: recaption, merge/divide, background filtering, layout
//! assignment and area ordering.

mod background;
mod layout;
mod merge;
mod recaption;
mod validate;

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, Analysis, ComplexityReport, ComplexityThresholds, ScenePrompt, Verdict};
use crate::backends::{LayoutItem, LayoutRequest, MergeDivideRequest, PlannerBackend, RecaptionRequest};
use crate::error::PlanError;
use crate::lexicon::Lexicon;

pub use background::{filter_background, PLAIN_BACKGROUND};
pub use layout::{relation_holds, solve_layout, LayoutRelation, ADJACENCY_EPSILON, DEFAULT_BOX};
pub use merge::merge_or_divide;
pub use recaption::{article_for, entity_phrase, recaption_with_template, template_caption};
pub use validate::{validate_layout, validate_merge_divide, validate_recaption};

/// Output of recaptioning: text for (usually) one entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubPrompt {
    pub text: String,
    pub entity_ids: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptRole {
    Foreground,
    Background,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimplePrompt {
    pub text: String,
    pub entity_ids: Vec<usize>,
    pub role: PromptRole,
    pub concept_count: usize,
}

const BOX_TOLERANCE: f64 = 1e-9;

fn round4(v: f64) -> f64 {
    (v * 10_000.0).round() / 10_000.0
}

/// Normalized `(x, y, width, height)` box, all in image fractions.
///
/// Serializes as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 4]", into = "[f64; 4]")]
pub struct BoundingBox {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(x: f64, y: f64, w: f64, h: f64) -> Result<BoundingBox, PlanError> {
        let valid = [x, y, w, h].iter().all(|v| v.is_finite())
            && x >= -BOX_TOLERANCE
            && y >= -BOX_TOLERANCE
            && w > 0.0
            && h > 0.0
            && x + w <= 1.0 + BOX_TOLERANCE
            && y + h <= 1.0 + BOX_TOLERANCE;
        if !valid {
            return Err(PlanError::InvalidPlan(format!(
                "box ({x}, {y}, {w}, {h}) is outside the unit square or empty"
            )));
        }
        Ok(BoundingBox { x, y, w, h })
    }

    /// Builds a box from edges, snapping each edge to four decimals.
    pub fn from_edges(x0: f64, y0: f64, x1: f64, y1: f64) -> Result<BoundingBox, PlanError> {
        let (x0, y0, x1, y1) = (round4(x0), round4(y0), round4(x1), round4(y1));
        BoundingBox::new(x0, y0, round4(x1 - x0), round4(y1 - y0))
    }

    pub fn full() -> BoundingBox {
        BoundingBox { x: 0.0, y: 0.0, w: 1.0, h: 1.0 }
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn right(&self) -> f64 {
        self.x + self.w
    }

    pub fn bottom(&self) -> f64 {
        self.y + self.h
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x + self.w / 2.0, self.y + self.h / 2.0)
    }

    pub fn rounded(&self) -> BoundingBox {
        BoundingBox { x: round4(self.x), y: round4(self.y), w: round4(self.w), h: round4(self.h) }
    }
}

impl TryFrom<[f64; 4]> for BoundingBox {
    type Error = PlanError;

    fn try_from(v: [f64; 4]) -> Result<Self, Self::Error> {
        BoundingBox::new(v[0], v[1], v[2], v[3])
    }
}

impl From<BoundingBox> for [f64; 4] {
    fn from(b: BoundingBox) -> [f64; 4] {
        let r = b.rounded();
        [r.x, r.y, r.w, r.h]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedPrompt {
    pub prompt: SimplePrompt,
    pub bbox: BoundingBox,
}

/// Entity record carried by a plan so that later stages (retouching) can
/// rebuild detail phrases without re-running the analyzer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanEntity {
    pub id: usize,
    pub head: String,
    pub noun: String,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositionPlan {
    pub complex_prompt: ScenePrompt,
    pub report: ComplexityReport,
    pub entities: Vec<PlanEntity>,
    pub foreground: Vec<PlacedPrompt>,
    pub background: SimplePrompt,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannerConfig {
    pub thresholds: ComplexityThresholds,
    /// Drop attributes beyond the per-prompt budget instead of failing.
    pub truncate_attributes: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig { thresholds: ComplexityThresholds::default(), truncate_attributes: true }
    }
}

#[derive(Serialize, Deserialize)]
struct BackgroundDoc {
    text: String,
    entity_ids: Vec<usize>,
    concept_count: usize,
}

#[derive(Serialize, Deserialize)]
struct ForegroundDoc {
    text: String,
    entity_ids: Vec<usize>,
    concept_count: usize,
    #[serde(rename = "box")]
    bbox: BoundingBox,
}

#[derive(Serialize, Deserialize)]
struct PlanDocument {
    complex_prompt: ScenePrompt,
    report: ComplexityReport,
    entities: Vec<PlanEntity>,
    background: BackgroundDoc,
    foreground: Vec<ForegroundDoc>,
    warnings: Vec<String>,
}

impl CompositionPlan {
    pub fn to_json(&self) -> String {
        let doc = PlanDocument {
            complex_prompt: self.complex_prompt.clone(),
            report: self.report.clone(),
            entities: self.entities.clone(),
            background: BackgroundDoc {
                text: self.background.text.clone(),
                entity_ids: self.background.entity_ids.clone(),
                concept_count: self.background.concept_count,
            },
            foreground: self
                .foreground
                .iter()
                .map(|p| ForegroundDoc {
                    text: p.prompt.text.clone(),
                    entity_ids: p.prompt.entity_ids.clone(),
                    concept_count: p.prompt.concept_count,
                    bbox: p.bbox,
                })
                .collect(),
            warnings: self.warnings.clone(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("plan serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<CompositionPlan, PlanError> {
        let doc: PlanDocument =
            serde_json::from_str(text).map_err(|e| PlanError::InvalidPlan(format!("plan JSON: {e}")))?;
        let plan = CompositionPlan {
            complex_prompt: doc.complex_prompt,
            report: doc.report,
            entities: doc.entities,
            foreground: doc
                .foreground
                .into_iter()
                .map(|f| PlacedPrompt {
                    prompt: SimplePrompt {
                        text: f.text,
                        entity_ids: f.entity_ids,
                        role: PromptRole::Foreground,
                        concept_count: f.concept_count,
                    },
                    bbox: f.bbox.rounded(),
                })
                .collect(),
            background: SimplePrompt {
                text: doc.background.text,
                entity_ids: doc.background.entity_ids,
                role: PromptRole::Background,
                concept_count: doc.background.concept_count,
            },
            warnings: doc.warnings,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// Structural checks: area ordering and entity conservation.
    pub fn validate(&self) -> Result<(), PlanError> {
        let areas: Vec<f64> = self.foreground.iter().map(|p| p.bbox.area()).collect();
        if areas.windows(2).any(|w| w[0] < w[1]) {
            return Err(PlanError::InvalidPlan("foreground is not ordered by descending area".into()));
        }
        let mut seen = BTreeSet::new();
        let all_ids = self
            .foreground
            .iter()
            .flat_map(|p| p.prompt.entity_ids.iter())
            .chain(self.background.entity_ids.iter());
        for &id in all_ids {
            if !seen.insert(id) {
                return Err(PlanError::InvalidPlan(format!("entity {id} appears in more than one prompt")));
            }
        }
        let expected: BTreeSet<usize> = self.entities.iter().map(|e| e.id).collect();
        if seen != expected {
            return Err(PlanError::InvalidPlan("prompts do not cover the extracted entities exactly".into()));
        }
        if self.foreground.iter().any(|p| p.prompt.text.trim().is_empty())
            || self.background.text.trim().is_empty()
        {
            return Err(PlanError::InvalidPlan("empty prompt text".into()));
        }
        Ok(())
    }

    /// Prompt batch for one sampling step: complex prompt, foreground prompts
    /// in plan order, background prompt.
    pub fn prompt_batch(&self) -> Vec<&str> {
        std::iter::once(self.complex_prompt.as_str())
            .chain(self.foreground.iter().map(|p| p.prompt.text.as_str()))
            .chain(std::iter::once(self.background.text.as_str()))
            .collect()
    }
}

/// Stable sort by box area, largest first.
pub fn sort_by_area(items: Vec<(SimplePrompt, BoundingBox)>) -> Vec<PlacedPrompt> {
    let mut placed: Vec<PlacedPrompt> =
        items.into_iter().map(|(prompt, bbox)| PlacedPrompt { prompt, bbox }).collect();
    placed.sort_by(|a, b| b.bbox.area().total_cmp(&a.bbox.area()));
    placed
}

fn plan_entities(analysis: &Analysis) -> Vec<PlanEntity> {
    analysis
        .entities
        .iter()
        .map(|e| PlanEntity {
            id: e.id,
            head: e.head.clone(),
            noun: e.noun.clone(),
            attributes: analysis.attributes_of(e.id).to_vec(),
        })
        .collect()
}

fn degenerate_plan(analysis: Analysis) -> Result<CompositionPlan, PlanError> {
    let [x, y, w, h] = DEFAULT_BOX;
    let prompt = SimplePrompt {
        text: analysis.prompt.as_str().to_string(),
        entity_ids: analysis.entities.iter().map(|e| e.id).collect(),
        role: PromptRole::Foreground,
        concept_count: analysis.report.concept_count,
    };
    Ok(CompositionPlan {
        entities: plan_entities(&analysis),
        foreground: vec![PlacedPrompt { prompt, bbox: BoundingBox::new(x, y, w, h)? }],
        background: background::synthesized(),
        complex_prompt: analysis.prompt,
        report: analysis.report,
        warnings: Vec::new(),
    })
}

/// Entities that must keep a box of their own: anything in a spatial
/// relation or a conflict.
fn pinned_entities(analysis: &Analysis) -> BTreeSet<usize> {
    analysis
        .spatial
        .iter()
        .flat_map(|r| [r.subject, r.object])
        .chain(analysis.conflicts.iter().flat_map(|c| [c.a, c.b]))
        .collect()
}

/// Runs the whole composition stage for one prompt.
pub fn build_plan(
    text: &str,
    planner: &dyn PlannerBackend,
    lexicon: &Lexicon,
    config: &PlannerConfig,
) -> Result<CompositionPlan, PlanError> {
    let analysis = analyze(text, lexicon, &config.thresholds)?;
    if analysis.report.verdict == Verdict::Simple {
        return degenerate_plan(analysis);
    }
    plan_complex(analysis, planner, lexicon, config)
}

fn plan_complex(
    analysis: Analysis,
    planner: &dyn PlannerBackend,
    lexicon: &Lexicon,
    config: &PlannerConfig,
) -> Result<CompositionPlan, PlanError> {
    let recaption_req = RecaptionRequest {
        prompt: analysis.prompt.as_str().to_string(),
        entities: analysis.entities.clone(),
        attributes: analysis.attributes.clone(),
        spatial: analysis.spatial.clone(),
    };
    let recaptioned = planner.recaption(&recaption_req)?;
    validate_recaption(&recaption_req, &recaptioned)?;

    let pinned = pinned_entities(&analysis);
    let background_candidates: Vec<usize> = analysis
        .entities
        .iter()
        .filter(|e| !pinned.contains(&e.id) && lexicon.background_priority(&e.head).is_some())
        .map(|e| e.id)
        .collect();
    let md_req = MergeDivideRequest {
        subprompts: recaptioned.subprompts,
        entities: analysis.entities.clone(),
        attributes: analysis.attributes.clone(),
        spatial: analysis.spatial.clone(),
        conflicts: analysis.conflicts.clone(),
        max_concepts: config.thresholds.max_simple_concepts,
        truncate_attributes: config.truncate_attributes,
        background_candidates,
    };
    let merged = planner.merge_divide(&md_req)?;
    validate_merge_divide(&md_req, &merged)?;
    let mut warnings = merged.warnings;
    if merged.prompts.len() > analysis.entities.len() {
        warnings.push(format!(
            "division produced {} simple prompts for {} entities",
            merged.prompts.len(),
            analysis.entities.len()
        ));
    }

    let (foreground, background) = filter_background(merged.prompts, &analysis.entities, lexicon, &pinned);

    let prompt_of = |entity: usize| {
        foreground.iter().position(|p| p.entity_ids.contains(&entity)).ok_or_else(|| {
            PlanError::InvalidPlan(format!("related entity {entity} has no foreground prompt"))
        })
    };
    let mut relations = Vec::new();
    for r in &analysis.spatial {
        let rel =
            LayoutRelation { subject: prompt_of(r.subject)?, object: prompt_of(r.object)?, kind: r.kind };
        if !relations.contains(&rel) {
            relations.push(rel);
        }
    }

    let placed = if foreground.is_empty() {
        Vec::new()
    } else {
        let layout_req = LayoutRequest {
            prompts: foreground
                .iter()
                .map(|p| LayoutItem { text: p.text.clone(), concept_count: p.concept_count })
                .collect(),
            relations,
        };
        let reply = planner.layout(&layout_req)?;
        validate_layout(&layout_req, &reply)?;
        let boxes = reply.boxes.iter().map(BoundingBox::rounded);
        sort_by_area(foreground.into_iter().zip(boxes).collect())
    };

    let plan = CompositionPlan {
        entities: plan_entities(&analysis),
        foreground: placed,
        background,
        complex_prompt: analysis.prompt,
        report: analysis.report,
        warnings,
    };
    plan.validate()?;
    Ok(plan)
}
