//! Annotated text: plain source text plus typed, offset-delimited spans.
//!
//! Offsets are Unicode code-point indices into [`AnnotatedDocument::text`].
//! A document is a value: once constructed it satisfies every invariant and
//! never changes.
//!
//! Paragraphs are modeled as break offsets. A break marks the first character
//! of a paragraph's content; it must sit on a non-whitespace character that is
//! preceded by whitespace. That whitespace run is the *separator* and belongs
//! to no paragraph, so spans never cover it.

use std::fmt;
use std::ops::{Deref, Range};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

/// The three presentation marks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnnotationKind {
    /// Bold weight, `<strong>`.
    #[serde(rename = "strong")]
    Emphasis,
    /// Background highlight, `<mark>`.
    #[serde(rename = "mark")]
    Highlight,
    /// Underline, `<u>`.
    #[serde(rename = "u")]
    Underline,
}

impl AnnotationKind {
    pub const ALL: [AnnotationKind; 3] = [Self::Emphasis, Self::Highlight, Self::Underline];

    /// The HTML tag name this kind serializes to.
    pub fn tag(self) -> &'static str {
        match self {
            Self::Emphasis => "strong",
            Self::Highlight => "mark",
            Self::Underline => "u",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for AnnotationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for AnnotationKind {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "strong" => Ok(Self::Emphasis),
            "mark" => Ok(Self::Highlight),
            "u" => Ok(Self::Underline),
            _ => Err(ModelError::UnknownKind(s.to_string())),
        }
    }
}

/// A half-open `[start, end)` range of code points carrying one mark.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotationSpan {
    pub kind: AnnotationKind,
    pub start: usize,
    pub end: usize,
}

impl AnnotationSpan {
    pub fn new(kind: AnnotationKind, start: usize, end: usize) -> Self {
        Self { kind, start, end }
    }

    pub fn len(&self) -> usize {
        self.end.saturating_sub(self.start)
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    /// True if `other` lies within `self` (equal ranges included).
    pub fn contains(&self, other: &AnnotationSpan) -> bool {
        self.start <= other.start && other.end <= self.end
    }

    /// True if the two ranges share at least one code point.
    pub fn overlaps(&self, other: &AnnotationSpan) -> bool {
        self.start < other.end && other.start < self.end
    }

    /// Overlap where neither range contains the other.
    pub fn crosses(&self, other: &AnnotationSpan) -> bool {
        self.overlaps(other) && !self.contains(other) && !other.contains(self)
    }

    /// Canonical storage order: start ascending, end descending, then kind.
    fn order_key(&self) -> (usize, std::cmp::Reverse<usize>, AnnotationKind) {
        (self.start, std::cmp::Reverse(self.end), self.kind)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("{first:?} overlaps {second:?}")]
    Overlap {
        first: AnnotationSpan,
        second: AnnotationSpan,
    },
    #[error("{span:?} is empty or extends past the text (length {len})")]
    Range { span: AnnotationSpan, len: usize },
    #[error("{span:?} crosses a paragraph boundary")]
    CrossesParagraph { span: AnnotationSpan },
    #[error("invalid paragraph break at {offset}: {reason}")]
    ParagraphBreak { offset: usize, reason: &'static str },
    #[error("unknown annotation kind {0:?}")]
    UnknownKind(String),
}

/// Output of [`normalize`]: NFC, whitespace runs collapsed to one space,
/// trimmed.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalText(String);

impl CanonicalText {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }

    /// The space-separated words.
    pub fn words(&self) -> Vec<&str> {
        if self.0.is_empty() {
            Vec::new()
        } else {
            self.0.split(' ').collect()
        }
    }
}

impl Deref for CanonicalText {
    type Target = str;

    fn deref(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for CanonicalText {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn normalize(text: &str) -> CanonicalText {
    let composed: String = text.nfc().collect();
    let mut out = String::with_capacity(composed.len());
    for word in composed.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    CanonicalText(out)
}

/// Byte offset of every code point in `text`, plus `text.len()` at the end.
pub(crate) fn char_boundaries(text: &str) -> Vec<usize> {
    let mut offsets: Vec<usize> = text.char_indices().map(|(i, _)| i).collect();
    offsets.push(text.len());
    offsets
}

/// Paragraph breaks implied by blank lines: every interior whitespace run
/// containing at least two newlines starts a new paragraph after it.
pub fn paragraph_breaks_of(text: &str) -> Vec<usize> {
    let chars: Vec<char> = text.chars().collect();
    let mut breaks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if !chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let run_start = i;
        let mut newlines = 0;
        while i < chars.len() && chars[i].is_whitespace() {
            if chars[i] == '\n' {
                newlines += 1;
            }
            i += 1;
        }
        if run_start > 0 && i < chars.len() && newlines >= 2 {
            breaks.push(i);
        }
    }
    breaks
}

/// Content ranges of the paragraphs delimited by `breaks`. Assumes the
/// breaks are valid for `chars`.
fn content_ranges(chars: &[char], breaks: &[usize]) -> Vec<Range<usize>> {
    let mut ranges = Vec::with_capacity(breaks.len() + 1);
    let mut start = 0;
    for &brk in breaks {
        let mut end = brk;
        while end > start && chars[end - 1].is_whitespace() {
            end -= 1;
        }
        ranges.push(start..end);
        start = brk;
    }
    ranges.push(start..chars.len());
    ranges
}

fn check_breaks(chars: &[char], breaks: &[usize]) -> Result<(), ModelError> {
    let mut prev = None;
    for &offset in breaks {
        let err = |reason| Err(ModelError::ParagraphBreak { offset, reason });
        if offset > chars.len() {
            return err("outside the text");
        }
        if prev.is_some_and(|p| p >= offset) {
            return err("breaks must be strictly increasing");
        }
        if offset == 0 || offset == chars.len() {
            return err("a break must fall strictly inside the text");
        }
        if chars[offset].is_whitespace() {
            return err("a break must start at paragraph content, not whitespace");
        }
        if !chars[offset - 1].is_whitespace() {
            return err("a break must follow a whitespace separator");
        }
        if !chars[..offset].iter().any(|c| !c.is_whitespace()) {
            return err("the first paragraph would be empty");
        }
        prev = Some(offset);
    }
    Ok(())
}

/// Validates spans against a text and its paragraph breaks in O(n log n).
pub fn validate(text: &str, spans: &[AnnotationSpan], breaks: &[usize]) -> Result<(), ModelError> {
    let chars: Vec<char> = text.chars().collect();
    check_breaks(&chars, breaks)?;
    let paragraphs = content_ranges(&chars, breaks);

    let mut sorted: Vec<AnnotationSpan> = spans.to_vec();
    sorted.sort_by_key(AnnotationSpan::order_key);

    for span in &sorted {
        if span.start >= span.end || span.end > chars.len() {
            return Err(ModelError::Range {
                span: *span,
                len: chars.len(),
            });
        }
        let para = paragraphs.partition_point(|r| r.end <= span.start);
        match paragraphs.get(para) {
            Some(r) if r.start <= span.start && span.end <= r.end => {}
            _ => return Err(ModelError::CrossesParagraph { span: *span }),
        }
    }

    let mut stack: Vec<AnnotationSpan> = Vec::new();
    let mut open = [0usize; 3];
    for span in &sorted {
        while let Some(top) = stack.last() {
            if top.end <= span.start {
                open[top.kind.index()] -= 1;
                stack.pop();
            } else {
                break;
            }
        }
        if let Some(top) = stack.last() {
            if span.end > top.end {
                return Err(ModelError::Overlap {
                    first: *top,
                    second: *span,
                });
            }
        }
        if open[span.kind.index()] > 0 {
            let first = *stack.iter().rev().find(|s| s.kind == span.kind).unwrap();
            return Err(ModelError::Overlap {
                first,
                second: *span,
            });
        }
        open[span.kind.index()] += 1;
        stack.push(*span);
    }
    Ok(())
}

/// Merges same-kind spans that touch end-to-start, unless the merged span
/// would cross a span of another kind. Repeats until nothing merges, since
/// one merge can unblock another.
pub fn merge_adjacent(spans: &[AnnotationSpan]) -> Vec<AnnotationSpan> {
    let mut current = merge_pass(spans);
    loop {
        let next = merge_pass(&current);
        if next.len() == current.len() {
            return next;
        }
        current = next;
    }
}

fn merge_pass(spans: &[AnnotationSpan]) -> Vec<AnnotationSpan> {
    let mut out: Vec<AnnotationSpan> = Vec::with_capacity(spans.len());
    for kind in AnnotationKind::ALL {
        let mut same: Vec<AnnotationSpan> = spans.iter().copied().filter(|s| s.kind == kind).collect();
        same.sort_by_key(|s| (s.start, s.end));
        let others: Vec<AnnotationSpan> = spans.iter().copied().filter(|s| s.kind != kind).collect();
        let mut merged: Vec<AnnotationSpan> = Vec::with_capacity(same.len());
        for span in same {
            if let Some(last) = merged.last_mut() {
                if last.end == span.start {
                    let candidate = AnnotationSpan::new(kind, last.start, span.end);
                    if !others.iter().any(|o| o.crosses(&candidate)) {
                        *last = candidate;
                        continue;
                    }
                }
            }
            merged.push(span);
        }
        out.extend(merged);
    }
    out.sort_by_key(AnnotationSpan::order_key);
    out
}

/// Plain text with non-overlapping typed spans and paragraph breaks.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(try_from = "RawDocument")]
pub struct AnnotatedDocument {
    text: String,
    spans: Vec<AnnotationSpan>,
    paragraph_breaks: Vec<usize>,
}

#[derive(Deserialize)]
struct RawDocument {
    text: String,
    #[serde(default)]
    spans: Vec<AnnotationSpan>,
    #[serde(default)]
    paragraph_breaks: Option<Vec<usize>>,
}

impl TryFrom<RawDocument> for AnnotatedDocument {
    type Error = ModelError;

    fn try_from(raw: RawDocument) -> Result<Self, Self::Error> {
        let breaks = raw
            .paragraph_breaks
            .unwrap_or_else(|| paragraph_breaks_of(&raw.text));
        AnnotatedDocument::new(raw.text, raw.spans, breaks)
    }
}

impl AnnotatedDocument {
    /// Strict constructor: rejects any invariant violation. Touching
    /// same-kind spans are merged, so equal markup means equal documents.
    pub fn new(
        text: impl Into<String>,
        spans: Vec<AnnotationSpan>,
        paragraph_breaks: Vec<usize>,
    ) -> Result<Self, ModelError> {
        let text = text.into();
        validate(&text, &spans, &paragraph_breaks)?;
        Ok(Self {
            text,
            spans: merge_adjacent(&spans),
            paragraph_breaks,
        })
    }

    /// A document with no spans; paragraphs come from blank lines.
    pub fn plain(text: impl Into<String>) -> Self {
        let text = text.into();
        let paragraph_breaks = paragraph_breaks_of(&text);
        Self {
            text,
            spans: Vec::new(),
            paragraph_breaks,
        }
    }

    /// Lenient constructor for spans from untrusted or heuristic sources.
    ///
    /// Break candidates are snapped forward to the next paragraph content and
    /// deduplicated. Spans are clipped to the text, split at paragraph
    /// boundaries, same-kind overlaps are unioned, touching same-kind spans
    /// are merged, and any span that would cross an earlier one is dropped.
    /// Returns the document and the dropped spans.
    pub fn reconcile(
        text: impl Into<String>,
        break_candidates: &[usize],
        candidates: &[AnnotationSpan],
    ) -> (Self, Vec<AnnotationSpan>) {
        let text = text.into();
        let chars: Vec<char> = text.chars().collect();
        let breaks = snap_breaks(&chars, break_candidates);
        let paragraphs = content_ranges(&chars, &breaks);

        let mut pieces = Vec::new();
        for span in candidates {
            let end = span.end.min(chars.len());
            for r in &paragraphs {
                let start = span.start.max(r.start);
                let stop = end.min(r.end);
                if start < stop {
                    pieces.push(AnnotationSpan::new(span.kind, start, stop));
                }
            }
        }

        let mut unioned = Vec::with_capacity(pieces.len());
        for kind in AnnotationKind::ALL {
            let mut same: Vec<AnnotationSpan> = pieces.iter().copied().filter(|s| s.kind == kind).collect();
            same.sort_by_key(|s| (s.start, s.end));
            let mut acc: Vec<AnnotationSpan> = Vec::new();
            for s in same {
                match acc.last_mut() {
                    Some(last) if s.start < last.end => last.end = last.end.max(s.end),
                    _ => acc.push(s),
                }
            }
            unioned.extend(acc);
        }

        let mut sorted = merge_adjacent(&unioned);
        sorted.sort_by_key(AnnotationSpan::order_key);
        let mut kept = Vec::with_capacity(sorted.len());
        let mut dropped = Vec::new();
        let mut stack: Vec<AnnotationSpan> = Vec::new();
        for span in sorted {
            while stack.last().is_some_and(|top| top.end <= span.start) {
                stack.pop();
            }
            if stack.last().is_some_and(|top| span.end > top.end) {
                dropped.push(span);
                continue;
            }
            stack.push(span);
            kept.push(span);
        }

        // a dropped span may have blocked a merge above
        let doc = Self {
            text,
            spans: merge_adjacent(&kept),
            paragraph_breaks: breaks,
        };
        debug_assert!(validate(&doc.text, &doc.spans, &doc.paragraph_breaks).is_ok());
        (doc, dropped)
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn spans(&self) -> &[AnnotationSpan] {
        &self.spans
    }

    pub fn paragraph_breaks(&self) -> &[usize] {
        &self.paragraph_breaks
    }

    /// Length of the text in code points.
    pub fn char_len(&self) -> usize {
        self.text.chars().count()
    }

    pub fn is_empty(&self) -> bool {
        self.text.is_empty()
    }

    /// Content range of each paragraph, separators excluded.
    pub fn paragraphs(&self) -> Vec<Range<usize>> {
        let chars: Vec<char> = self.text.chars().collect();
        content_ranges(&chars, &self.paragraph_breaks)
    }

    /// The text covered by a code-point range.
    pub fn slice(&self, range: Range<usize>) -> &str {
        let bounds = char_boundaries(&self.text);
        &self.text[bounds[range.start]..bounds[range.end]]
    }

    /// The same text and paragraphs with a different span set.
    pub fn with_spans(&self, spans: Vec<AnnotationSpan>) -> Result<Self, ModelError> {
        Self::new(self.text.clone(), spans, self.paragraph_breaks.clone())
    }

    pub fn into_text(self) -> String {
        self.text
    }
}

fn snap_breaks(chars: &[char], candidates: &[usize]) -> Vec<usize> {
    let first_content = match chars.iter().position(|c| !c.is_whitespace()) {
        Some(i) => i,
        None => return Vec::new(),
    };
    let mut sorted: Vec<usize> = candidates.to_vec();
    sorted.sort_unstable();
    let mut breaks: Vec<usize> = Vec::new();
    for candidate in sorted {
        let mut at = candidate.min(chars.len());
        while at < chars.len() && chars[at].is_whitespace() {
            at += 1;
        }
        if at <= first_content || at >= chars.len() || !chars[at - 1].is_whitespace() {
            continue;
        }
        if breaks.last() != Some(&at) {
            breaks.push(at);
        }
    }
    breaks
}

/// The text with all annotations removed. Annotations carry no text, so
/// this is the document text verbatim.
pub fn strip_annotations(doc: &AnnotatedDocument) -> &str {
    doc.text()
}

/// Builds a document from text and spans; paragraphs come from blank lines.
pub fn apply_annotations(text: &str, spans: &[AnnotationSpan]) -> Result<AnnotatedDocument, ModelError> {
    AnnotatedDocument::new(text, spans.to_vec(), paragraph_breaks_of(text))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    use AnnotationKind::*;

    fn span(kind: AnnotationKind, start: usize, end: usize) -> AnnotationSpan {
        AnnotationSpan::new(kind, start, end)
    }

    #[test]
    fn normalize_collapses_whitespace() {
        assert_eq!(normalize("a  b\n c").as_str(), "a b c");
        assert_eq!(normalize("").as_str(), "");
        assert_eq!(normalize(" \t\n ").as_str(), "");
        assert_eq!(normalize("  x  ").as_str(), "x");
    }

    #[test]
    fn normalize_composes() {
        assert_eq!(normalize("Rose\u{301}").as_str(), "Ros\u{e9}");
    }

    #[test]
    fn apply_minimal() {
        let doc = apply_annotations("abc", &[span(Emphasis, 0, 1)]).unwrap();
        assert_eq!(doc.spans(), &[span(Emphasis, 0, 1)]);
    }

    #[test]
    fn apply_rejects_same_kind_overlap() {
        let err = apply_annotations("abc", &[span(Emphasis, 0, 2), span(Emphasis, 1, 3)]).unwrap_err();
        assert!(matches!(err, ModelError::Overlap { .. }));
    }

    #[test]
    fn apply_accepts_proper_nesting() {
        let doc = apply_annotations("abc", &[span(Emphasis, 1, 2), span(Highlight, 0, 3)]).unwrap();
        assert_eq!(doc.spans(), &[span(Highlight, 0, 3), span(Emphasis, 1, 2)]);
    }

    #[test]
    fn apply_rejects_partial_overlap_across_kinds() {
        let err = apply_annotations("abcd", &[span(Emphasis, 0, 2), span(Highlight, 1, 3)]).unwrap_err();
        assert!(matches!(err, ModelError::Overlap { .. }));
    }

    #[test]
    fn apply_rejects_same_kind_nesting() {
        let err = apply_annotations("abcd", &[span(Emphasis, 0, 4), span(Emphasis, 1, 2)]).unwrap_err();
        assert!(matches!(err, ModelError::Overlap { .. }));
    }

    #[test]
    fn apply_rejects_out_of_range_and_empty() {
        assert!(matches!(
            apply_annotations("abc", &[span(Underline, 2, 4)]),
            Err(ModelError::Range { .. })
        ));
        assert!(matches!(
            apply_annotations("abc", &[span(Underline, 1, 1)]),
            Err(ModelError::Range { .. })
        ));
    }

    #[test]
    fn offsets_are_code_points() {
        let doc = apply_annotations("Rosé and Lisa", &[span(Emphasis, 0, 4)]).unwrap();
        assert_eq!(doc.slice(0..4), "Rosé");
        assert_eq!(doc.char_len(), 13);
    }

    #[test]
    fn blank_lines_make_paragraphs() {
        let text = "one\n\ntwo\n \nthree\nstill three";
        let breaks = paragraph_breaks_of(text);
        assert_eq!(breaks, vec![5, 11]);
        let doc = AnnotatedDocument::plain(text);
        assert_eq!(doc.paragraphs(), vec![0..3, 5..8, 11..28]);
        assert!(paragraph_breaks_of("\n\nlead and trail\n\n").is_empty());
    }

    #[test]
    fn spans_may_not_cross_paragraphs() {
        let err = apply_annotations("a b\n\nc d", &[span(Highlight, 0, 6)]).unwrap_err();
        assert!(matches!(err, ModelError::CrossesParagraph { .. }));
        // nor cover the separator
        let err = apply_annotations("a b\n\nc d", &[span(Highlight, 0, 4)]).unwrap_err();
        assert!(matches!(err, ModelError::CrossesParagraph { .. }));
    }

    #[test]
    fn rejects_bad_breaks() {
        assert!(AnnotatedDocument::new("ab cd", vec![], vec![3]).is_ok());
        for bad in [vec![0], vec![2], vec![4, 3], vec![1], vec![9]] {
            assert!(
                matches!(
                    AnnotatedDocument::new("ab cd", vec![], bad.clone()),
                    Err(ModelError::ParagraphBreak { .. })
                ),
                "{bad:?}"
            );
        }
    }

    #[test]
    fn json_shape() {
        let doc = apply_annotations("hi there", &[span(Highlight, 0, 2)]).unwrap();
        let json = serde_json::to_value(&doc).unwrap();
        assert_eq!(
            json,
            serde_json::json!({
                "text": "hi there",
                "spans": [{"kind": "mark", "start": 0, "end": 2}],
                "paragraph_breaks": []
            })
        );
        let back: AnnotatedDocument = serde_json::from_value(json).unwrap();
        assert_eq!(back, doc);
        let bad = serde_json::json!({"text": "ab", "spans": [{"kind": "u", "start": 0, "end": 5}]});
        assert!(serde_json::from_value::<AnnotatedDocument>(bad).is_err());
    }

    #[test]
    fn merge_adjacent_respects_nesting() {
        let merged = merge_adjacent(&[span(Emphasis, 0, 1), span(Emphasis, 1, 2)]);
        assert_eq!(merged, vec![span(Emphasis, 0, 2)]);
        // merging would cross the highlight
        let spans = [span(Emphasis, 0, 1), span(Emphasis, 1, 2), span(Highlight, 1, 3)];
        assert_eq!(merge_adjacent(&spans).len(), 3);
    }

    #[test]
    fn merge_adjacent_cascades() {
        // the underline merge unblocks the highlight, which unblocks emphasis
        let spans = [
            span(Underline, 0, 3),
            span(Highlight, 1, 3),
            span(Emphasis, 2, 3),
            span(Underline, 3, 4),
            span(Highlight, 3, 4),
            span(Emphasis, 3, 4),
        ];
        assert_eq!(
            merge_adjacent(&spans),
            vec![span(Underline, 0, 4), span(Highlight, 1, 4), span(Emphasis, 2, 4)]
        );
    }

    #[test]
    fn reconcile_clips_and_resolves() {
        let text = "alpha beta\n\ngamma delta";
        let (doc, dropped) = AnnotatedDocument::reconcile(
            text,
            &[10],
            &[
                span(Highlight, 0, 23),
                span(Emphasis, 0, 3),
                span(Emphasis, 2, 5),
                span(Underline, 3, 8),
            ],
        );
        assert_eq!(doc.paragraph_breaks(), &[12]);
        assert_eq!(
            doc.spans(),
            &[
                span(Highlight, 0, 10),
                span(Emphasis, 0, 5),
                span(Highlight, 12, 23)
            ]
        );
        assert_eq!(dropped, vec![span(Underline, 3, 8)]);
    }

    fn arb_text() -> impl Strategy<Value = String> {
        prop::collection::vec(
            prop_oneof![
                4 => "[a-zA-Z]{1,8}",
                1 => Just(" ".to_string()),
                1 => Just("\n\n".to_string()),
                1 => "[éøß漢字]{1,3}",
                1 => "[0-9]{1,4}",
            ],
            0..30,
        )
        .prop_map(|parts| parts.join(" "))
    }

    fn arb_candidates() -> impl Strategy<Value = Vec<AnnotationSpan>> {
        prop::collection::vec(
            (0usize..3, 0usize..200, 1usize..40).prop_map(|(k, s, l)| span(AnnotationKind::ALL[k], s, s + l)),
            0..12,
        )
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,60}") {
            let once = normalize(&s);
            prop_assert_eq!(normalize(&once), once);
        }

        #[test]
        fn normalize_never_grows_composed_text(s in "[ \t\na-zé漢\u{301}]{0,60}") {
            let composed: String = s.nfc().collect();
            prop_assert!(normalize(&composed).chars().count() <= composed.chars().count());
        }

        #[test]
        fn reconcile_output_is_valid(text in arb_text(), cands in arb_candidates(), brk in prop::collection::vec(0usize..200, 0..4)) {
            let (doc, _) = AnnotatedDocument::reconcile(text.clone(), &brk, &cands);
            prop_assert!(validate(doc.text(), doc.spans(), doc.paragraph_breaks()).is_ok());
            prop_assert_eq!(strip_annotations(&doc), text.as_str());
            let rebuilt = AnnotatedDocument::new(text, doc.spans().to_vec(), doc.paragraph_breaks().to_vec()).unwrap();
            prop_assert_eq!(rebuilt, doc);
        }

        #[test]
        fn validator_agrees_with_pairwise_check(cands in prop::collection::vec(
            (0usize..3, 0usize..20, 1usize..8).prop_map(|(k, s, l)| span(AnnotationKind::ALL[k], s, s + l)), 0..6)) {
            let text = "x".repeat(30);
            let pairwise_ok = cands.iter().enumerate().all(|(i, a)| {
                cands.iter().skip(i + 1).all(|b| {
                    !a.crosses(b) && !(a.kind == b.kind && a.overlaps(b))
                })
            });
            prop_assert_eq!(validate(&text, &cands, &[]).is_ok(), pairwise_ok);
        }
    }
}
