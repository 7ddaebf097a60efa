use larf_core::model::{strip_annotations, AnnotationKind};
use larf_core::offline::{offline_annotate, SENTENCE_OPENERS};
use proptest::prelude::*;
use regex::Regex;

fn vocabulary() -> Vec<&'static str> {
    vec![
        "The", "In", "It", "I", "Djoser", "Saqqara", "Step", "Pyramid", "Egypt", "built", "stone", "tomb", "of",
        "is", "a", "and", "2650", "BC", "13", "old", "Imhotep", "walls",
    ]
}

fn text() -> impl Strategy<Value = String> {
    let sep = prop_oneof![6 => Just(" "), 1 => Just(". "), 1 => Just(", "), 1 => Just(".\n\n")];
    prop::collection::vec((prop::sample::select(vocabulary()), sep), 1..30).prop_map(|parts| {
        parts.into_iter().map(|(w, s)| format!("{w}{s}")).collect()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn offline_rules_hold(text in text()) {
        let shape = Regex::new(r"^(?:[0-9]+|[A-Z][A-Za-z]*(?: [A-Z][A-Za-z]*)*)$").unwrap();
        let digits = Regex::new(r"[0-9]+").unwrap();
        let capitalized = Regex::new(r"\b[A-Z][A-Za-z]*\b").unwrap();

        let doc = offline_annotate(&text);
        prop_assert_eq!(strip_annotations(&doc), text.as_str());

        let byte_to_char = |b: usize| text[..b].chars().count();
        let emphasis: Vec<_> = doc.spans().iter().filter(|s| s.kind == AnnotationKind::Emphasis).collect();
        for span in &emphasis {
            prop_assert!(shape.is_match(doc.slice(span.range())), "{:?}", doc.slice(span.range()));
        }
        for m in digits.find_iter(&text) {
            let (s, e) = (byte_to_char(m.start()), byte_to_char(m.end()));
            prop_assert!(emphasis.iter().any(|sp| sp.start == s && sp.end == e));
        }
        for m in capitalized.find_iter(&text) {
            let (s, e) = (byte_to_char(m.start()), byte_to_char(m.end()));
            let covered = emphasis.iter().any(|sp| sp.start <= s && e <= sp.end);
            let word = m.as_str();
            if word == "I" {
                prop_assert!(!covered);
            } else if !SENTENCE_OPENERS.contains(&word) {
                prop_assert!(covered, "{word} at {s} not emphasized");
            }
        }

        let highlights = doc.spans().iter().filter(|s| s.kind == AnnotationKind::Highlight).count();
        let paragraphs = doc.paragraphs().iter().filter(|p| !doc.slice((*p).clone()).trim().is_empty()).count();
        prop_assert_eq!(highlights, paragraphs);
    }
}

#[test]
fn deterministic() {
    let text = "The Step Pyramid was built for Djoser around 2650 BC.\n\nImhotep designed it.";
    assert_eq!(offline_annotate(text), offline_annotate(text));
}
