//! Contract checks applied to every planner reply, whichever backend produced
//! it. A reply that fails is a backend failure, never silently repaired.

use std::collections::BTreeSet;

use serde::Serialize;

use super::relation_holds;
use crate::backends::{
    LayoutReply, LayoutRequest, MergeDivideReply, MergeDivideRequest, RecaptionReply, RecaptionRequest,
};
use crate::error::{BackendError, PlanError};

fn invalid(reason: impl Into<String>, reply: &impl Serialize) -> PlanError {
    PlanError::BackendFailure(BackendError::InvalidReply {
        reason: reason.into(),
        body: serde_json::to_string(reply).unwrap_or_default(),
    })
}

fn exact_cover<'a>(
    groups: impl Iterator<Item = &'a Vec<usize>>,
    expected: &BTreeSet<usize>,
) -> Result<(), String> {
    let mut seen = BTreeSet::new();
    for ids in groups {
        if ids.is_empty() {
            return Err("prompt without entities".into());
        }
        for &id in ids {
            if !expected.contains(&id) {
                return Err(format!("unknown entity {id}"));
            }
            if !seen.insert(id) {
                return Err(format!("entity {id} appears twice"));
            }
        }
    }
    if &seen != expected {
        return Err("not every entity is covered".into());
    }
    Ok(())
}

pub fn validate_recaption(req: &RecaptionRequest, reply: &RecaptionReply) -> Result<(), PlanError> {
    let expected: BTreeSet<usize> = req.entities.iter().map(|e| e.id).collect();
    if reply.subprompts.iter().any(|s| s.text.trim().is_empty()) {
        return Err(invalid("empty sub-prompt text", reply));
    }
    exact_cover(reply.subprompts.iter().map(|s| &s.entity_ids), &expected).map_err(|r| invalid(r, reply))
}

pub fn validate_merge_divide(req: &MergeDivideRequest, reply: &MergeDivideReply) -> Result<(), PlanError> {
    let expected: BTreeSet<usize> = req.entities.iter().map(|e| e.id).collect();
    exact_cover(reply.prompts.iter().map(|p| &p.entity_ids), &expected).map_err(|r| invalid(r, reply))?;
    let attrs =
        |id: usize| req.attributes.iter().find(|a| a.entity_id == id).map_or(0, |a| a.attributes.len());
    for p in &reply.prompts {
        if p.text.trim().is_empty() {
            return Err(invalid("empty simple prompt text", reply));
        }
        let ceiling: usize = p.entity_ids.iter().map(|&id| 1 + attrs(id)).sum();
        if p.concept_count > req.max_concepts
            || p.concept_count < p.entity_ids.len()
            || p.concept_count > ceiling
        {
            return Err(invalid(format!("'{}' reports {} concepts", p.text, p.concept_count), reply));
        }
        let inside = |id: usize| p.entity_ids.contains(&id);
        if req.conflicts.iter().any(|c| inside(c.a) && inside(c.b)) {
            return Err(invalid(format!("'{}' holds a conflicting pair", p.text), reply));
        }
        if req.spatial.iter().any(|r| inside(r.subject) && inside(r.object)) {
            return Err(invalid(format!("'{}' holds a spatial pair", p.text), reply));
        }
    }
    Ok(())
}

pub fn validate_layout(req: &LayoutRequest, reply: &LayoutReply) -> Result<(), PlanError> {
    if reply.boxes.len() != req.prompts.len() {
        return Err(invalid(format!("{} boxes for {} prompts", reply.boxes.len(), req.prompts.len()), reply));
    }
    for r in &req.relations {
        let (Some(s), Some(o)) = (reply.boxes.get(r.subject), reply.boxes.get(r.object)) else {
            return Err(invalid("relation index out of range", reply));
        };
        if !relation_holds(r.kind, &s.rounded(), &o.rounded()) {
            return Err(invalid(
                format!("boxes violate {} between prompts {} and {}", r.kind, r.subject, r.object),
                reply,
            ));
        }
    }
    Ok(())
}
