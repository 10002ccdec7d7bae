use std::collections::BTreeSet;

use super::{PromptRole, SimplePrompt};
use crate::analysis::Entity;
use crate::lexicon::Lexicon;

/// Used when no prompt qualifies as background.
pub const PLAIN_BACKGROUND: &str = "a plain background";

pub(crate) fn synthesized() -> SimplePrompt {
    SimplePrompt {
        text: PLAIN_BACKGROUND.to_string(),
        entity_ids: Vec::new(),
        role: PromptRole::Background,
        concept_count: 0,
    }
}

/// Splits off the background prompt.
///
/// A candidate is a single-entity prompt whose head noun is in the background
/// lexicon and whose entity is not `pinned` (pinned entities take part in a
/// spatial relation or a conflict and need their own box). The highest
/// priority candidate wins, earlier prompts win ties, and every other prompt
/// stays in the foreground.
pub fn filter_background(
    prompts: Vec<SimplePrompt>,
    entities: &[Entity],
    lexicon: &Lexicon,
    pinned: &BTreeSet<usize>,
) -> (Vec<SimplePrompt>, SimplePrompt) {
    let priority = |p: &SimplePrompt| -> Option<i32> {
        let [id] = p.entity_ids.as_slice() else {
            return None;
        };
        if pinned.contains(id) {
            return None;
        }
        let head = &entities.iter().find(|e| e.id == *id)?.head;
        lexicon.background_priority(head)
    };
    let mut best: Option<(usize, i32)> = None;
    for (i, p) in prompts.iter().enumerate() {
        if let Some(pr) = priority(p) {
            if best.is_none_or(|(_, b)| pr > b) {
                best = Some((i, pr));
            }
        }
    }
    let mut foreground: Vec<SimplePrompt> =
        prompts.into_iter().map(|p| SimplePrompt { role: PromptRole::Foreground, ..p }).collect();
    let background = match best {
        Some((i, _)) => SimplePrompt { role: PromptRole::Background, ..foreground.remove(i) },
        None => synthesized(),
    };
    (foreground, background)
}
