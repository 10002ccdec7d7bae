//! Deterministic noun-phrase grammar over a closed lexicon:
//!
//! ```text
//! NP := determiner? (numeral | adjective | intensifier)* noun
//! ```
//!
//! Noun phrases are coordinated by "and", commas, or anything else the grammar
//! does not recognise; unknown words simply end a phrase. A word listed as both
//! noun and adjective is an adjective when the next word starts a noun, and a
//! noun otherwise.

use super::{AttributeSet, Entity, ScenePrompt, SpatialRelation};
use crate::error::AnalysisError;
use crate::lexicon::Lexicon;

const DETERMINERS: &[&str] = &[
    "a", "an", "the", "one", "some", "this", "that", "these", "those", "my", "your", "his", "her", "its",
    "our", "their", "each", "every", "another",
];

const NUMERALS: &[&str] = &[
    "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten", "eleven", "twelve", "several",
    "many", "few", "dozen",
];

const INTENSIFIERS: &[&str] = &["very", "really", "extremely", "quite", "slightly", "fairly"];

const IRREGULAR_PLURALS: &[(&str, &str)] = &[
    ("people", "person"),
    ("children", "child"),
    ("men", "man"),
    ("women", "woman"),
    ("mice", "mouse"),
    ("geese", "goose"),
    ("teeth", "tooth"),
    ("feet", "foot"),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Word,
    Separator,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    /// Lowercased text.
    pub text: String,
    pub start: usize,
    pub end: usize,
    pub kind: TokenKind,
}

pub fn is_numeral(word: &str) -> bool {
    NUMERALS.contains(&word) || (!word.is_empty() && word.chars().all(|c| c.is_ascii_digit()))
}

fn is_determiner(word: &str) -> bool {
    DETERMINERS.contains(&word)
}

fn is_intensifier(word: &str) -> bool {
    INTENSIFIERS.contains(&word)
}

/// Splits text into lowercase word tokens (with internal `'`/`-` kept) and
/// punctuation separators. Offsets are byte offsets into `text`.
pub fn tokenize(text: &str) -> Vec<Token> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_end = |k: usize| chars.get(k).map(|&(b, _)| b).unwrap_or(text.len());
    let mut tokens = Vec::new();
    let mut k = 0;
    while k < chars.len() {
        let (start, c) = chars[k];
        if c.is_alphanumeric() {
            let mut e = k + 1;
            while e < chars.len() {
                let ch = chars[e].1;
                let joiner = matches!(ch, '\'' | '-' | '\u{2019}')
                    && chars.get(e + 1).is_some_and(|&(_, n)| n.is_alphanumeric());
                if ch.is_alphanumeric() || joiner {
                    e += 1;
                } else {
                    break;
                }
            }
            let end = byte_end(e);
            tokens.push(Token { text: text[start..end].to_lowercase(), start, end, kind: TokenKind::Word });
            k = e;
        } else {
            if matches!(c, ',' | ';' | '.' | '!' | '?' | ':') {
                tokens.push(Token {
                    text: c.to_string(),
                    start,
                    end: byte_end(k + 1),
                    kind: TokenKind::Separator,
                });
            }
            k += 1;
        }
    }
    tokens
}

fn singular_forms(word: &str) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(&(_, s)) = IRREGULAR_PLURALS.iter().find(|(p, _)| *p == word) {
        out.push(s.to_string());
    }
    if let Some(stem) = word.strip_suffix("ies") {
        out.push(format!("{stem}y"));
    }
    if let Some(stem) = word.strip_suffix("ves") {
        out.push(format!("{stem}f"));
        out.push(format!("{stem}fe"));
    }
    if let Some(stem) = word.strip_suffix("es") {
        out.push(stem.to_string());
    }
    if !word.ends_with("ss") {
        if let Some(stem) = word.strip_suffix('s') {
            out.push(stem.to_string());
        }
    }
    out
}

/// Longest lexicon noun starting at token `j`: `(token count, lexicon form)`.
fn noun_at(tokens: &[Token], j: usize, lex: &Lexicon) -> Option<(usize, String)> {
    for len in (1..=lex.max_noun_words()).rev() {
        let Some(window) = tokens.get(j..j + len) else {
            continue;
        };
        if window.iter().any(|t| t.kind != TokenKind::Word) {
            continue;
        }
        let words: Vec<&str> = window.iter().map(|t| t.text.as_str()).collect();
        let joined = words.join(" ");
        if lex.is_noun(&joined) {
            return Some((len, joined));
        }
        let prefix = &words[..len - 1];
        for singular in singular_forms(words[len - 1]) {
            let mut cand: Vec<&str> = prefix.to_vec();
            cand.push(&singular);
            let cand = cand.join(" ");
            if lex.is_noun(&cand) {
                return Some((len, cand));
            }
        }
    }
    None
}

struct NounPhrase {
    first: usize,
    head_start: usize,
    head_len: usize,
    lemma: String,
}

fn noun_phrase_at(tokens: &[Token], i: usize, lex: &Lexicon) -> Option<NounPhrase> {
    let mut j = i;
    if tokens.get(j).is_some_and(|t| t.kind == TokenKind::Word && is_determiner(&t.text)) {
        j += 1;
    }
    loop {
        let tok = tokens.get(j)?;
        if tok.kind != TokenKind::Word {
            return None;
        }
        if let Some((len, lemma)) = noun_at(tokens, j, lex) {
            let modifier = len == 1 && lex.is_adjective(&tok.text) && noun_at(tokens, j + 1, lex).is_some();
            if !modifier {
                return Some(NounPhrase { first: i, head_start: j, head_len: len, lemma });
            }
            j += 1;
        } else if lex.is_adjective(&tok.text) || is_numeral(&tok.text) || is_intensifier(&tok.text) {
            j += 1;
        } else {
            return None;
        }
    }
}

/// Extracts entities left to right. Spans never overlap.
pub fn extract_entities(prompt: &ScenePrompt, lexicon: &Lexicon) -> Result<Vec<Entity>, AnalysisError> {
    lexicon.require_loaded()?;
    let text = prompt.as_str();
    let tokens = tokenize(text);
    let mut entities = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        match noun_phrase_at(&tokens, i, lexicon) {
            Some(np) => {
                let head_end = np.head_start + np.head_len;
                let start = tokens[np.first].start;
                let end = tokens[head_end - 1].end;
                let noun = tokens[np.head_start].start..end;
                entities.push(Entity {
                    id: entities.len(),
                    surface: text[start..end].to_string(),
                    head: np.lemma,
                    noun: text[noun].to_lowercase(),
                    span: start..end,
                });
                i = head_end;
            }
            None => i += 1,
        }
    }
    Ok(entities)
}

fn check_span(text: &str, e: &Entity) -> Result<(), AnalysisError> {
    let ok = e.span.start <= e.span.end && text.get(e.span.clone()).is_some_and(|s| s == e.surface);
    if ok {
        Ok(())
    } else {
        Err(AnalysisError::EntityMismatch { id: e.id, start: e.span.start, end: e.span.end })
    }
}

/// Collects the adjectives and numerals inside each entity's noun phrase.
pub fn extract_attributes(
    prompt: &ScenePrompt,
    entities: &[Entity],
    lexicon: &Lexicon,
) -> Result<Vec<AttributeSet>, AnalysisError> {
    let text = prompt.as_str();
    entities
        .iter()
        .map(|e| {
            check_span(text, e)?;
            let tokens = tokenize(&e.surface);
            let head_words = e.noun.split_whitespace().count();
            let modifiers = &tokens[..tokens.len().saturating_sub(head_words)];
            let mut attributes: Vec<String> = Vec::new();
            for t in modifiers {
                let keep = t.kind == TokenKind::Word
                    && (lexicon.is_adjective(&t.text) || is_numeral(&t.text))
                    && !(is_determiner(&t.text) && !lexicon.is_adjective(&t.text));
                if keep && !attributes.contains(&t.text) {
                    attributes.push(t.text.clone());
                }
            }
            Ok(AttributeSet { entity_id: e.id, attributes })
        })
        .collect()
}

/// One relation per spatial phrase that sits between two entities: the
/// nearest entity before the phrase is the subject, the nearest after it the
/// object.
pub fn detect_spatial_relations(
    prompt: &ScenePrompt,
    entities: &[Entity],
    lexicon: &Lexicon,
) -> Vec<SpatialRelation> {
    let tokens = tokenize(prompt.as_str());
    let covered = |t: &Token| entities.iter().any(|e| t.start >= e.span.start && t.end <= e.span.end);
    let mut relations = Vec::new();
    let mut k = 0;
    while k < tokens.len() {
        let matched = lexicon.spatial_phrases().iter().find(|p| {
            tokens.get(k..k + p.words.len()).is_some_and(|w| {
                w.iter()
                    .zip(&p.words)
                    .all(|(t, word)| t.kind == TokenKind::Word && &t.text == word && !covered(t))
            })
        });
        let Some(phrase) = matched else {
            k += 1;
            continue;
        };
        let phrase_start = tokens[k].start;
        let phrase_end = tokens[k + phrase.words.len() - 1].end;
        let subject = entities.iter().rev().find(|e| e.span.end <= phrase_start);
        let object = entities.iter().find(|e| e.span.start >= phrase_end);
        if let (Some(s), Some(o)) = (subject, object) {
            if s.id != o.id {
                relations.push(SpatialRelation {
                    subject: s.id,
                    object: o.id,
                    kind: phrase.kind,
                    phrase: phrase.words.join(" "),
                });
            }
        }
        k += phrase.words.len();
    }
    relations
}
