use std::collections::BTreeMap;

use super::{template_caption, PromptRole, SimplePrompt};
use crate::analysis::{ConflictPair, Entity, SpatialRelation};
use crate::backends::{MergeDivideReply, MergeDivideRequest};
use crate::error::PlanError;

struct Unit {
    text: String,
    ids: Vec<usize>,
    concepts: usize,
    background: bool,
}

fn conflicting(conflicts: &[ConflictPair], xs: &[usize], ys: &[usize]) -> bool {
    conflicts
        .iter()
        .any(|c| (xs.contains(&c.a) && ys.contains(&c.b)) || (xs.contains(&c.b) && ys.contains(&c.a)))
}

fn related(spatial: &[SpatialRelation], xs: &[usize], ys: &[usize]) -> bool {
    spatial.iter().any(|r| {
        (xs.contains(&r.subject) && ys.contains(&r.object))
            || (xs.contains(&r.object) && ys.contains(&r.subject))
    })
}

fn internally_split(ids: &[usize], conflicts: &[ConflictPair], spatial: &[SpatialRelation]) -> bool {
    ids.iter().enumerate().any(|(i, &x)| {
        ids[i + 1..].iter().any(|&y| conflicting(conflicts, &[x], &[y]) || related(spatial, &[x], &[y]))
    })
}

/// Applies the decomposition rules to recaptioned sub-prompts.
///
/// Division first: a sub-prompt that covers several entities and is over
/// budget, or holds a conflicting or spatially related pair, is split into one
/// prompt per entity; a single entity with more attributes than the budget
/// allows keeps the first `max_concepts - 1` of them (or fails when truncation
/// is off). Merging second: walking left to right, a prompt is appended to
/// the running one with "and" while the concept total stays within budget and
/// no conflict or spatial relation links the two. Background candidates are
/// never merged so they can still be filtered out afterwards.
pub fn merge_or_divide(req: &MergeDivideRequest) -> Result<MergeDivideReply, PlanError> {
    let entities: BTreeMap<usize, &Entity> = req.entities.iter().map(|e| (e.id, e)).collect();
    let attrs: BTreeMap<usize, &[String]> =
        req.attributes.iter().map(|a| (a.entity_id, a.attributes.as_slice())).collect();
    let attrs_of = |id: usize| attrs.get(&id).copied().unwrap_or(&[]);
    let entity = |id: usize| {
        entities
            .get(&id)
            .copied()
            .ok_or_else(|| PlanError::InvalidPlan(format!("sub-prompt references unknown entity {id}")))
    };
    let concepts_of = |ids: &[usize]| ids.iter().map(|&id| 1 + attrs_of(id).len()).sum::<usize>();
    let attribute_budget = req.max_concepts.saturating_sub(1);

    let mut warnings = Vec::new();
    let mut units: Vec<Unit> = Vec::new();
    let mut push_entity = |id: usize,
                           units: &mut Vec<Unit>,
                           original: Option<&str>|
     -> Result<(), PlanError> {
        let e = entity(id)?;
        let all = attrs_of(id);
        let (text, kept) = if all.len() > attribute_budget {
            if !req.truncate_attributes {
                return Err(PlanError::UnsatisfiableBudget { head: e.head.clone(), attributes: all.len() });
            }
            let kept = &all[..attribute_budget];
            warnings.push(format!(
                "'{}' keeps {} of {} attributes; dropped [{}] are left to retouching",
                e.head,
                kept.len(),
                all.len(),
                all[attribute_budget..].join(", ")
            ));
            (template_caption(e, kept, &req.spatial, &req.entities), kept.len())
        } else {
            let text = match original {
                Some(t) => t.to_string(),
                None => template_caption(e, all, &req.spatial, &req.entities),
            };
            (text, all.len())
        };
        units.push(Unit {
            text,
            ids: vec![id],
            concepts: 1 + kept,
            background: req.background_candidates.contains(&id),
        });
        Ok(())
    };

    let mut subprompts = req.subprompts.clone();
    subprompts.sort_by_key(|s| s.entity_ids.iter().min().copied());
    for sub in &subprompts {
        match sub.entity_ids.as_slice() {
            [] => return Err(PlanError::InvalidPlan(format!("sub-prompt '{}' covers no entity", sub.text))),
            [id] => push_entity(*id, &mut units, Some(&sub.text))?,
            ids => {
                let split = concepts_of(ids) > req.max_concepts
                    || internally_split(ids, &req.conflicts, &req.spatial);
                if split {
                    for &id in ids {
                        push_entity(id, &mut units, None)?;
                    }
                } else {
                    units.push(Unit {
                        text: sub.text.clone(),
                        ids: ids.to_vec(),
                        concepts: concepts_of(ids),
                        background: false,
                    });
                }
            }
        }
    }

    let mut merged: Vec<Unit> = Vec::new();
    for unit in units {
        if let Some(last) = merged.last_mut() {
            let fits = !last.background
                && !unit.background
                && last.concepts + unit.concepts <= req.max_concepts
                && !conflicting(&req.conflicts, &last.ids, &unit.ids)
                && !related(&req.spatial, &last.ids, &unit.ids);
            if fits {
                last.text = format!("{} and {}", last.text, unit.text);
                last.ids.extend(unit.ids);
                last.concepts += unit.concepts;
                continue;
            }
        }
        merged.push(unit);
    }

    Ok(MergeDivideReply {
        prompts: merged
            .into_iter()
            .map(|u| SimplePrompt {
                text: u.text,
                entity_ids: u.ids,
                role: PromptRole::Foreground,
                concept_count: u.concepts,
            })
            .collect(),
        warnings,
    })
}
