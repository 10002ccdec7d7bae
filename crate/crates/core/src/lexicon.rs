//! Line-oriented scene lexicon.
//!
//! ```text
//! [nouns]
//! cat
//! hot air balloon
//! [adjectives]
//! red
//! [spatial]
//! on top of: on
//! [conflicts]
//! climate: desert, arid | rainforest, jungle
//! [background]
//! sky: 9
//! ```
//!
//! Blank lines and `#` comments are ignored. Entries are lowercased and
//! internal whitespace is collapsed.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::str::FromStr;

use crate::analysis::SpatialKind;
use crate::error::{AnalysisError, LexiconError};

const DEFAULT_LEXICON: &str = include_str!("../data/default.lex");

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpatialPhrase {
    pub words: Vec<String>,
    pub kind: SpatialKind,
}

/// A class of mutually exclusive scene properties, e.g. summer vs winter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConflictClass {
    pub name: String,
    pub side_a: Vec<String>,
    pub side_b: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Lexicon {
    nouns: BTreeSet<String>,
    adjectives: BTreeSet<String>,
    spatial: Vec<SpatialPhrase>,
    conflicts: Vec<ConflictClass>,
    background: BTreeMap<String, i32>,
    max_noun_words: usize,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Section {
    Nouns,
    Adjectives,
    Spatial,
    Conflicts,
    Background,
}

fn normalize(entry: &str) -> String {
    entry.split_whitespace().map(str::to_lowercase).collect::<Vec<_>>().join(" ")
}

impl Lexicon {
    /// The lexicon shipped with the crate.
    pub fn builtin() -> Lexicon {
        Lexicon::parse(DEFAULT_LEXICON).expect("builtin lexicon parses")
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Lexicon, LexiconError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| LexiconError::Io { path: path.display().to_string(), source })?;
        Lexicon::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Lexicon, LexiconError> {
        let mut lex = Lexicon::default();
        let mut section = None;
        let mut conflict_index: BTreeMap<String, usize> = BTreeMap::new();

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| LexiconError::Parse { line: line_no, message };
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                section = Some(match name.trim() {
                    "nouns" => Section::Nouns,
                    "adjectives" => Section::Adjectives,
                    "spatial" => Section::Spatial,
                    "conflicts" => Section::Conflicts,
                    "background" => Section::Background,
                    other => return Err(err(format!("unknown section [{other}]"))),
                });
                continue;
            }
            match section {
                None => return Err(err("entry before any section header".into())),
                Some(Section::Nouns) => {
                    let noun = normalize(line);
                    lex.max_noun_words = lex.max_noun_words.max(noun.split(' ').count());
                    lex.nouns.insert(noun);
                }
                Some(Section::Adjectives) => {
                    lex.adjectives.insert(normalize(line));
                }
                Some(Section::Spatial) => {
                    let (phrase, kind) = line
                        .rsplit_once(':')
                        .ok_or_else(|| err("spatial entry must be `phrase: kind`".into()))?;
                    let kind = SpatialKind::from_str(kind.trim()).map_err(err)?;
                    let words: Vec<String> = normalize(phrase).split(' ').map(str::to_string).collect();
                    if words.iter().all(|w| w.is_empty()) {
                        return Err(err("empty spatial phrase".into()));
                    }
                    lex.spatial.push(SpatialPhrase { words, kind });
                }
                Some(Section::Conflicts) => {
                    let (name, sides) = line
                        .split_once(':')
                        .ok_or_else(|| err("conflict entry must be `class: a | b`".into()))?;
                    let (a, b) = sides
                        .split_once('|')
                        .ok_or_else(|| err("conflict entry needs two sides separated by `|`".into()))?;
                    let members = |side: &str| -> Vec<String> {
                        side.split(',').map(normalize).filter(|m| !m.is_empty()).collect()
                    };
                    let (side_a, side_b) = (members(a), members(b));
                    if side_a.is_empty() || side_b.is_empty() {
                        return Err(err("conflict side without members".into()));
                    }
                    let name = normalize(name);
                    match conflict_index.get(&name) {
                        Some(&i) => {
                            lex.conflicts[i].side_a.extend(side_a);
                            lex.conflicts[i].side_b.extend(side_b);
                        }
                        None => {
                            conflict_index.insert(name.clone(), lex.conflicts.len());
                            lex.conflicts.push(ConflictClass { name, side_a, side_b });
                        }
                    }
                }
                Some(Section::Background) => {
                    let (noun, priority) = match line.rsplit_once(':') {
                        Some((noun, p)) => {
                            let p = p
                                .trim()
                                .parse::<i32>()
                                .map_err(|e| err(format!("bad background priority: {e}")))?;
                            (noun, p)
                        }
                        None => (line, 0),
                    };
                    lex.background.insert(normalize(noun), priority);
                }
            }
        }
        // Longest phrases first so "in front of" wins over "in".
        lex.spatial.sort_by_key(|s| std::cmp::Reverse(s.words.len()));
        Ok(lex)
    }

    /// Checks that the sections the parser cannot work without are present.
    pub fn require_loaded(&self) -> Result<(), AnalysisError> {
        if self.nouns.is_empty() {
            return Err(AnalysisError::LexiconMissing("nouns".into()));
        }
        Ok(())
    }

    pub fn is_noun(&self, word: &str) -> bool {
        self.nouns.contains(word)
    }

    pub fn is_adjective(&self, word: &str) -> bool {
        self.adjectives.contains(word)
    }

    pub fn max_noun_words(&self) -> usize {
        self.max_noun_words.max(1)
    }

    pub fn spatial_phrases(&self) -> &[SpatialPhrase] {
        &self.spatial
    }

    pub fn conflict_classes(&self) -> &[ConflictClass] {
        &self.conflicts
    }

    pub fn background_priority(&self, noun: &str) -> Option<i32> {
        self.background.get(noun).copied()
    }

    pub fn nouns(&self) -> impl Iterator<Item = &str> {
        self.nouns.iter().map(String::as_str)
    }

    pub fn adjectives(&self) -> impl Iterator<Item = &str> {
        self.adjectives.iter().map(String::as_str)
    }
}
