use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{AttributeSet, ComplexityReport, ConflictPair, Entity, SpatialRelation, Verdict};
use crate::error::AnalysisError;

/// Prompts with more concepts than this are complex.
pub const DEFAULT_MAX_SIMPLE_CONCEPTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComplexityThresholds {
    pub max_simple_concepts: usize,
}

impl Default for ComplexityThresholds {
    fn default() -> Self {
        ComplexityThresholds { max_simple_concepts: DEFAULT_MAX_SIMPLE_CONCEPTS }
    }
}

/// Simple iff concepts (entities plus attributes) fit the budget and there is
/// neither a spatial relation nor a conflicting pair.
pub fn classify_complexity(
    entities: &[Entity],
    attributes: &[AttributeSet],
    spatial: &[SpatialRelation],
    conflicts: &[ConflictPair],
    thresholds: &ComplexityThresholds,
) -> Result<ComplexityReport, AnalysisError> {
    let ids: BTreeSet<usize> = entities.iter().map(|e| e.id).collect();
    if ids.len() != entities.len() {
        return Err(AnalysisError::InconsistentInputs("duplicate entity id".into()));
    }
    let known = |id: usize, what: &str| {
        if ids.contains(&id) {
            Ok(())
        } else {
            Err(AnalysisError::InconsistentInputs(format!("{what} references unknown entity {id}")))
        }
    };
    let mut seen = BTreeSet::new();
    for set in attributes {
        known(set.entity_id, "attribute set")?;
        if !seen.insert(set.entity_id) {
            return Err(AnalysisError::InconsistentInputs(format!(
                "entity {} has two attribute sets",
                set.entity_id
            )));
        }
    }
    for rel in spatial {
        known(rel.subject, "spatial relation")?;
        known(rel.object, "spatial relation")?;
        if rel.subject == rel.object {
            return Err(AnalysisError::InconsistentInputs(
                "spatial relation links an entity to itself".into(),
            ));
        }
    }
    for pair in conflicts {
        known(pair.a, "conflict")?;
        known(pair.b, "conflict")?;
        if pair.a >= pair.b {
            return Err(AnalysisError::InconsistentInputs("conflict pair must satisfy a < b".into()));
        }
    }

    let entity_count = entities.len();
    let concept_count = entity_count + attributes.iter().map(|a| a.attributes.len()).sum::<usize>();

    let mut reasons = Vec::new();
    if !conflicts.is_empty() {
        reasons
            .push(format!("conflicting-entities: {} conflicting pair(s) must be separated", conflicts.len()));
    }
    if !spatial.is_empty() {
        reasons.push(format!("spatial-relationships: {} spatial relation(s) must be split", spatial.len()));
    }
    if concept_count > thresholds.max_simple_concepts {
        reasons.push(format!(
            "concept-count: {concept_count} concepts exceed the limit of {}",
            thresholds.max_simple_concepts
        ));
    }
    let verdict = if reasons.is_empty() { Verdict::Simple } else { Verdict::Complex };

    Ok(ComplexityReport {
        entity_count,
        concept_count,
        spatial: spatial.to_vec(),
        conflicts: conflicts.to_vec(),
        verdict,
        reasons,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::SpatialKind;
    use proptest::prelude::*;

    fn entity(id: usize) -> Entity {
        Entity {
            id,
            surface: format!("thing{id}"),
            head: format!("thing{id}"),
            noun: format!("thing{id}"),
            span: 0..0,
        }
    }

    fn attrs(id: usize, n: usize) -> AttributeSet {
        AttributeSet { entity_id: id, attributes: (0..n).map(|k| format!("adj{k}")).collect() }
    }

    fn relation(s: usize, o: usize) -> SpatialRelation {
        SpatialRelation { subject: s, object: o, kind: SpatialKind::On, phrase: "on".into() }
    }

    fn classify(
        es: &[Entity],
        at: &[AttributeSet],
        sp: &[SpatialRelation],
        cf: &[ConflictPair],
    ) -> ComplexityReport {
        classify_complexity(es, at, sp, cf, &ComplexityThresholds::default()).unwrap()
    }

    #[test]
    fn four_concepts_is_simple() {
        let es = [entity(0), entity(1)];
        let r = classify(&es, &[attrs(0, 1), attrs(1, 1)], &[], &[]);
        assert_eq!(r.concept_count, 4);
        assert_eq!(r.verdict, Verdict::Simple);
        assert!(r.reasons.is_empty());
    }

    #[test]
    fn five_concepts_is_complex() {
        let es = [entity(0), entity(1)];
        let r = classify(&es, &[attrs(0, 2), attrs(1, 1)], &[], &[]);
        assert_eq!(r.concept_count, 5);
        assert_eq!(r.verdict, Verdict::Complex);
        assert_eq!(r.reasons.len(), 1);
        assert!(r.reasons[0].starts_with("concept-count"));
    }

    #[test]
    fn one_spatial_relation_is_complex() {
        let es = [entity(0), entity(1)];
        let r = classify(&es, &[attrs(0, 0), attrs(1, 0)], &[relation(0, 1)], &[]);
        assert_eq!(r.concept_count, 2);
        assert_eq!(r.verdict, Verdict::Complex);
        assert!(r.reasons[0].starts_with("spatial"));
    }

    #[test]
    fn threshold_is_overridable() {
        let es = [entity(0), entity(1)];
        let tight = ComplexityThresholds { max_simple_concepts: 2 };
        let r = classify_complexity(&es, &[attrs(0, 1)], &[], &[], &tight).unwrap();
        assert_eq!(r.verdict, Verdict::Complex);
    }

    #[test]
    fn unknown_entity_is_inconsistent() {
        let es = [entity(0)];
        let err = classify_complexity(&es, &[attrs(3, 1)], &[], &[], &Default::default());
        assert!(matches!(err, Err(AnalysisError::InconsistentInputs(_))));
        let err = classify_complexity(&es, &[], &[relation(0, 5)], &[], &Default::default());
        assert!(matches!(err, Err(AnalysisError::InconsistentInputs(_))));
    }

    fn scenario() -> impl Strategy<Value = (usize, Vec<usize>, usize, usize)> {
        (1usize..6)
            .prop_flat_map(|n| (Just(n), proptest::collection::vec(0usize..4, n), 0usize..3, 0usize..2))
    }

    fn build(n: usize, attr_counts: &[usize], n_rel: usize, n_conf: usize) -> ComplexityReport {
        let es: Vec<Entity> = (0..n).map(entity).collect();
        let at: Vec<AttributeSet> = attr_counts.iter().enumerate().map(|(i, &k)| attrs(i, k)).collect();
        let rel: Vec<SpatialRelation> =
            if n > 1 { (0..n_rel).map(|k| relation(k % n, (k + 1) % n)).collect() } else { vec![] };
        let conf: Vec<ConflictPair> = if n > 1 {
            (0..n_conf).map(|_| ConflictPair { a: 0, b: 1, reason: "x".into() }).collect()
        } else {
            vec![]
        };
        classify(&es, &at, &rel, &conf)
    }

    proptest! {
        #[test]
        fn report_invariants((n, counts, n_rel, n_conf) in scenario()) {
            let r = build(n, &counts, n_rel, n_conf);
            prop_assert_eq!(r.concept_count, n + counts.iter().sum::<usize>());
            let complex = r.concept_count > 4 || !r.spatial.is_empty() || !r.conflicts.is_empty();
            prop_assert_eq!(r.verdict == Verdict::Complex, complex);
            prop_assert_eq!(!r.reasons.is_empty(), complex);
        }

        #[test]
        fn complex_stays_complex_when_things_are_added(
            (n, counts, n_rel, n_conf) in scenario(),
            extra_attr in 0usize..3,
            extra_rel in 0usize..2,
            extra_conf in 0usize..2,
        ) {
            let before = build(n, &counts, n_rel, n_conf);
            prop_assume!(before.verdict == Verdict::Complex);
            let mut more = counts.clone();
            more[0] += extra_attr;
            more.push(0);
            let after = build(n + 1, &more, n_rel + extra_rel, n_conf + extra_conf);
            prop_assert_eq!(after.verdict, Verdict::Complex);
        }
    }
}
