use super::SubPrompt;
use crate::analysis::{is_numeral, AttributeSet, Entity, SpatialRelation};

/// English indefinite article for the word that follows it.
pub fn article_for(next: &str) -> &'static str {
    let w = next.to_lowercase();
    const AN_EXCEPTIONS: &[&str] = &["hour", "honest", "honor", "heir"];
    const A_EXCEPTIONS: &[&str] = &["uni", "use", "usu", "eu", "one", "once"];
    if AN_EXCEPTIONS.iter().any(|p| w.starts_with(p)) {
        return "an";
    }
    if A_EXCEPTIONS.iter().any(|p| w.starts_with(p)) {
        return "a";
    }
    match w.chars().next() {
        Some('a' | 'e' | 'i' | 'o' | 'u') => "an",
        _ => "a",
    }
}

/// "a red apple", "two fluffy cats": article (or count) + attributes + noun.
pub fn entity_phrase(head: &str, noun: &str, attributes: &[String]) -> String {
    let (counts, others): (Vec<&String>, Vec<&String>) = attributes.iter().partition(|a| is_numeral(a));
    let mut words: Vec<&str> = counts.iter().chain(others.iter()).map(|s| s.as_str()).collect();
    if counts.is_empty() {
        words.push(head);
        let body = words.join(" ");
        format!("{} {body}", article_for(&body))
    } else {
        words.push(noun);
        words.join(" ")
    }
}

/// Template caption for one entity: its phrase plus the spatial phrases in
/// which it is the subject ("a cup on the table").
pub fn template_caption(
    entity: &Entity,
    attributes: &[String],
    spatial: &[SpatialRelation],
    entities: &[Entity],
) -> String {
    let mut text = entity_phrase(&entity.head, &entity.noun, attributes);
    for rel in spatial.iter().filter(|r| r.subject == entity.id) {
        if let Some(object) = entities.iter().find(|e| e.id == rel.object) {
            text.push_str(&format!(" {} the {}", rel.phrase, object.head));
        }
    }
    text
}

/// One sub-prompt per entity, in entity order.
pub fn recaption_with_template(
    entities: &[Entity],
    attributes: &[AttributeSet],
    spatial: &[SpatialRelation],
) -> Vec<SubPrompt> {
    entities
        .iter()
        .map(|e| {
            let attrs = attributes
                .iter()
                .find(|a| a.entity_id == e.id)
                .map(|a| a.attributes.as_slice())
                .unwrap_or(&[]);
            SubPrompt { text: template_caption(e, attrs, spatial, entities), entity_ids: vec![e.id] }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{analyze, ComplexityThresholds};
    use crate::lexicon::Lexicon;

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn phrase_examples() {
        assert_eq!(entity_phrase("apple", "apple", &strings(&["red"])), "a red apple");
        assert_eq!(entity_phrase("cat", "cat", &[]), "a cat");
        assert_eq!(entity_phrase("apple", "apple", &[]), "an apple");
        assert_eq!(entity_phrase("cat", "cats", &strings(&["fluffy", "two"])), "two fluffy cats");
        assert_eq!(entity_phrase("unicorn", "unicorn", &[]), "a unicorn");
        assert_eq!(entity_phrase("barn", "barn", &strings(&["old"])), "an old barn");
    }

    #[test]
    fn captions_carry_their_spatial_context() {
        let a = analyze("a red cup on a wooden table", &Lexicon::builtin(), &ComplexityThresholds::default())
            .unwrap();
        let subs = recaption_with_template(&a.entities, &a.attributes, &a.spatial);
        let texts: Vec<&str> = subs.iter().map(|s| s.text.as_str()).collect();
        assert_eq!(texts, ["a red cup on the table", "a wooden table"]);
        assert_eq!(subs[0].entity_ids, vec![0]);
        assert_eq!(subs[1].entity_ids, vec![1]);
    }
}
