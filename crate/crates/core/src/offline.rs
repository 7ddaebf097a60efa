//! Rule-based annotator that needs no model.
//!
//! Emphasis goes on runs of ASCII digits and on runs of capitalized words
//! joined by single spaces. A capitalized word at the start of a sentence
//! only counts if it is not a common sentence opener ("The", "In", ...).
//! Highlight goes on the first sentence of each paragraph. The text is never
//! touched, so the output is content-preserving by construction.

use crate::model::{AnnotatedDocument, AnnotationKind, AnnotationSpan};

/// Capitalized words that usually open a sentence rather than name
/// something. "I" is never emphasized.
pub const SENTENCE_OPENERS: &[&str] = &[
    "A", "After", "All", "Also", "Although", "An", "And", "As", "At", "Because", "Before", "But", "By", "During",
    "Each", "Every", "For", "From", "He", "Her", "Here", "His", "How", "However", "I", "If", "In", "It", "Its",
    "Many", "Most", "My", "No", "Not", "Of", "On", "Once", "Or", "Our", "She", "Since", "So", "Some", "That", "The",
    "Their", "Then", "There", "These", "They", "This", "Those", "Thus", "To", "Today", "We", "What", "When",
    "Where", "Which", "While", "Who", "Why", "With", "Yet", "You", "Your",
];

const OPENING_PUNCT: &[char] = &['"', '\'', '\u{201c}', '\u{2018}', '(', '['];

fn is_sentence_end(chars: &[char], i: usize, end: usize) -> bool {
    matches!(chars[i], '.' | '!' | '?') && (i + 1 == end || chars[i + 1].is_whitespace())
}

/// True if the word starting at `start` opens a sentence within `[from, start)`.
fn opens_sentence(chars: &[char], from: usize, start: usize) -> bool {
    let mut i = start;
    while i > from {
        let c = chars[i - 1];
        if c.is_whitespace() || OPENING_PUNCT.contains(&c) {
            i -= 1;
            continue;
        }
        return matches!(c, '.' | '!' | '?' | ':');
    }
    true
}

fn emphasis_spans(chars: &[char], from: usize, to: usize, out: &mut Vec<AnnotationSpan>) {
    let mut i = from;
    // (start, end) of the capitalized run being built
    let mut run: Option<(usize, usize)> = None;
    while i < to {
        let c = chars[i];
        if c.is_ascii_digit() {
            let start = i;
            while i < to && chars[i].is_ascii_digit() {
                i += 1;
            }
            out.push(AnnotationSpan::new(AnnotationKind::Emphasis, start, i));
            if let Some((s, e)) = run.take() {
                out.push(AnnotationSpan::new(AnnotationKind::Emphasis, s, e));
            }
            continue;
        }
        if !c.is_alphabetic() {
            i += 1;
            continue;
        }
        let start = i;
        while i < to && chars[i].is_alphabetic() {
            i += 1;
        }
        let word: String = chars[start..i].iter().collect();
        let capitalized = c.is_uppercase()
            && word != "I"
            && !(opens_sentence(chars, from, start) && SENTENCE_OPENERS.contains(&word.as_str()));
        run = match (run, capitalized) {
            (Some((s, e)), true) if start == e + 1 && chars[e] == ' ' => Some((s, i)),
            (prev, true) => {
                if let Some((s, e)) = prev {
                    out.push(AnnotationSpan::new(AnnotationKind::Emphasis, s, e));
                }
                Some((start, i))
            }
            (prev, false) => {
                if let Some((s, e)) = prev {
                    out.push(AnnotationSpan::new(AnnotationKind::Emphasis, s, e));
                }
                None
            }
        };
    }
    if let Some((s, e)) = run {
        out.push(AnnotationSpan::new(AnnotationKind::Emphasis, s, e));
    }
}

fn first_sentence(chars: &[char], from: usize, to: usize) -> Option<(usize, usize)> {
    let start = (from..to).find(|&i| !chars[i].is_whitespace())?;
    let end = (start..to)
        .find(|&i| is_sentence_end(chars, i, to))
        .map(|i| i + 1)
        .unwrap_or_else(|| {
            let mut end = to;
            while end > start && chars[end - 1].is_whitespace() {
                end -= 1;
            }
            end
        });
    Some((start, end))
}

pub fn offline_annotate(text: &str) -> AnnotatedDocument {
    let plain = AnnotatedDocument::plain(text);
    let chars: Vec<char> = text.chars().collect();
    let mut spans = Vec::new();
    for para in plain.paragraphs() {
        if let Some((start, end)) = first_sentence(&chars, para.start, para.end) {
            spans.push(AnnotationSpan::new(AnnotationKind::Highlight, start, end));
        }
        emphasis_spans(&chars, para.start, para.end, &mut spans);
    }
    let (doc, dropped) = AnnotatedDocument::reconcile(text, plain.paragraph_breaks(), &spans);
    debug_assert!(dropped.is_empty(), "offline rules produced crossing spans: {dropped:?}");
    doc
}
