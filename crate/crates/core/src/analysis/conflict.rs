use super::{AttributeSet, ConflictPair, Entity};
use crate::lexicon::{ConflictClass, Lexicon};

fn matches_side<'a>(terms: &[&str], side: &'a [String]) -> Option<&'a str> {
    side.iter().find(|member| terms.contains(&member.as_str())).map(String::as_str)
}

/// Emits one pair per entity pair whose terms (head plus attributes) hit
/// opposite sides of a conflict class. The first class in lexicon order names
/// the pair, so the result does not depend on entity order.
pub fn detect_conflicts(
    entities: &[Entity],
    attributes: &[AttributeSet],
    lexicon: &Lexicon,
) -> Vec<ConflictPair> {
    let terms: Vec<(usize, Vec<&str>)> = entities
        .iter()
        .map(|e| {
            let mut t = vec![e.head.as_str()];
            if let Some(set) = attributes.iter().find(|a| a.entity_id == e.id) {
                t.extend(set.attributes.iter().map(String::as_str));
            }
            (e.id, t)
        })
        .collect();

    let mut pairs = Vec::new();
    for (i, (id_x, tx)) in terms.iter().enumerate() {
        for (id_y, ty) in &terms[i + 1..] {
            let (a, b, ta, tb) = if id_x < id_y { (*id_x, *id_y, tx, ty) } else { (*id_y, *id_x, ty, tx) };
            if a == b {
                continue;
            }
            if let Some(reason) = lexicon.conflict_classes().iter().find_map(|class| opposing(class, ta, tb))
            {
                pairs.push(ConflictPair { a, b, reason });
            }
        }
    }
    pairs.sort_by_key(|p| (p.a, p.b));
    pairs
}

fn opposing(class: &ConflictClass, ta: &[&str], tb: &[&str]) -> Option<String> {
    let forward = matches_side(ta, &class.side_a).zip(matches_side(tb, &class.side_b));
    let backward = matches_side(ta, &class.side_b).zip(matches_side(tb, &class.side_a));
    forward.or(backward).map(|(x, y)| format!("{}: {x} vs {y}", class.name))
}
