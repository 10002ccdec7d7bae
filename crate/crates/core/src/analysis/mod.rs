//! Prompt analysis: entity and attribute extraction, spatial relations,
//! conflicts and the simple/complex verdict.

mod complexity;
mod conflict;
mod parser;

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::AnalysisError;
use crate::lexicon::Lexicon;

pub use complexity::{classify_complexity, ComplexityThresholds, DEFAULT_MAX_SIMPLE_CONCEPTS};
pub use conflict::detect_conflicts;
pub use parser::{
    detect_spatial_relations, extract_attributes, extract_entities, is_numeral, tokenize, Token, TokenKind,
};

/// A user prompt, trimmed and guaranteed non-empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct ScenePrompt(String);

impl ScenePrompt {
    pub fn new(text: &str) -> Result<ScenePrompt, AnalysisError> {
        let trimmed = text.trim();
        if trimmed.is_empty() {
            return Err(AnalysisError::EmptyPrompt);
        }
        Ok(ScenePrompt(trimmed.to_string()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl TryFrom<String> for ScenePrompt {
    type Error = AnalysisError;

    fn try_from(value: String) -> Result<Self, Self::Error> {
        ScenePrompt::new(&value)
    }
}

impl From<ScenePrompt> for String {
    fn from(p: ScenePrompt) -> String {
        p.0
    }
}

impl fmt::Display for ScenePrompt {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// A noun phrase found in the prompt.
///
/// `span` is a byte range into the trimmed prompt text; slicing the prompt with
/// it yields `surface`. `head` is the lexicon form of the head noun (singular),
/// `noun` is the head noun as written (possibly plural).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: usize,
    pub surface: String,
    pub head: String,
    pub noun: String,
    pub span: Range<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttributeSet {
    pub entity_id: usize,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpatialKind {
    LeftOf,
    RightOf,
    Above,
    Below,
    On,
    Under,
    Inside,
    Beside,
}

impl SpatialKind {
    pub const ALL: [SpatialKind; 8] = [
        SpatialKind::LeftOf,
        SpatialKind::RightOf,
        SpatialKind::Above,
        SpatialKind::Below,
        SpatialKind::On,
        SpatialKind::Under,
        SpatialKind::Inside,
        SpatialKind::Beside,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpatialKind::LeftOf => "left-of",
            SpatialKind::RightOf => "right-of",
            SpatialKind::Above => "above",
            SpatialKind::Below => "below",
            SpatialKind::On => "on",
            SpatialKind::Under => "under",
            SpatialKind::Inside => "inside",
            SpatialKind::Beside => "beside",
        }
    }
}

impl FromStr for SpatialKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SpatialKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown spatial kind '{s}'"))
    }
}

impl fmt::Display for SpatialKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `subject <kind> object`, e.g. `on(cup, table)`. `phrase` is the matched
/// lexicon phrase.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpatialRelation {
    pub subject: usize,
    pub object: usize,
    pub kind: SpatialKind,
    pub phrase: String,
}

/// Unordered pair of conflicting entities, stored with `a < b`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConflictPair {
    pub a: usize,
    pub b: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Simple,
    Complex,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub entity_count: usize,
    pub concept_count: usize,
    pub spatial: Vec<SpatialRelation>,
    pub conflicts: Vec<ConflictPair>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

impl ComplexityReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Everything the analyzer learned about one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Analysis {
    pub prompt: ScenePrompt,
    pub entities: Vec<Entity>,
    pub attributes: Vec<AttributeSet>,
    pub spatial: Vec<SpatialRelation>,
    pub conflicts: Vec<ConflictPair>,
    pub report: ComplexityReport,
}

impl Analysis {
    pub fn entity(&self, id: usize) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn attributes_of(&self, id: usize) -> &[String] {
        self.attributes.iter().find(|a| a.entity_id == id).map(|a| a.attributes.as_slice()).unwrap_or(&[])
    }
}

/// Runs the full analysis chain on raw prompt text.
pub fn analyze(
    text: &str,
    lexicon: &Lexicon,
    thresholds: &ComplexityThresholds,
) -> Result<Analysis, AnalysisError> {
    let prompt = ScenePrompt::new(text)?;
    let entities = extract_entities(&prompt, lexicon)?;
    let attributes = extract_attributes(&prompt, &entities, lexicon)?;
    let spatial = detect_spatial_relations(&prompt, &entities, lexicon);
    let conflicts = detect_conflicts(&entities, &attributes, lexicon);
    let report = classify_complexity(&entities, &attributes, &spatial, &conflicts, thresholds)?;
    Ok(Analysis { prompt, entities, attributes, spatial, conflicts, report })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(text: &str) -> Analysis {
        analyze(text, &Lexicon::builtin(), &ComplexityThresholds::default()).unwrap()
    }

    #[test]
    fn prompt_is_trimmed_and_non_empty() {
        assert_eq!(ScenePrompt::new("  a cat \n").unwrap().as_str(), "a cat");
        assert_eq!(ScenePrompt::new("   "), Err(AnalysisError::EmptyPrompt));
        assert_eq!(ScenePrompt::new(""), Err(AnalysisError::EmptyPrompt));
    }

    #[test]
    fn spatial_kind_round_trips_through_text() {
        for k in SpatialKind::ALL {
            assert_eq!(k.as_str().parse::<SpatialKind>().unwrap(), k);
        }
    }

    #[test]
    fn simple_and_complex_prompts() {
        assert_eq!(run("a cat").report.verdict, Verdict::Simple);
        let bird = run("a bird above a pond");
        assert_eq!(bird.report.verdict, Verdict::Complex);
        assert_eq!(bird.report.spatial.len(), 1);
        let conflict = run("a desert and a rainforest");
        assert_eq!(conflict.report.verdict, Verdict::Complex);
        assert_eq!(conflict.report.conflicts.len(), 1);
    }

    #[test]
    fn report_json_has_stable_field_order() {
        let json = run("a red apple").report.to_json();
        let order = ["entity_count", "concept_count", "spatial", "conflicts", "verdict", "reasons"];
        let positions: Vec<usize> = order.iter().map(|k| json.find(k).unwrap()).collect();
        assert!(positions.windows(2).all(|w| w[0] < w[1]), "{json}");
    }

    #[test]
    fn analysis_is_deterministic() {
        let text = "two fluffy cats beside a red sofa in a sunny living room";
        let a = serde_json::to_vec(&run(text)).unwrap();
        let b = serde_json::to_vec(&run(text)).unwrap();
        assert_eq!(a, b);
    }
}
