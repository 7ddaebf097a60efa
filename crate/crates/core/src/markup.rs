//! Tag-augmented text in and out of [`AnnotatedDocument`], plus the
//! content-preservation check.
//!
//! The parser is total. It understands the three-tag whitelist (`<strong>`,
//! `<mark>`, `<u>`, with `<b>` read as `<strong>`), paragraph structure
//! (`<p>`, `</p>`, `<br>`) and the five XML character entities. Every other
//! tag is removed while its inner text is kept, and is reported in
//! [`ParsedMarkup::dropped_tags`].

use serde::{Deserialize, Serialize};
use similar::{capture_diff_slices, Algorithm, DiffOp};

use crate::model::{normalize, AnnotatedDocument, AnnotationKind, AnnotationSpan, CanonicalText};

/// A tag removed by the parser. `position` is the code-point offset in the
/// parsed text where the tag stood.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedTag {
    pub name: String,
    pub position: usize,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub closing: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedMarkup {
    pub document: AnnotatedDocument,
    pub dropped_tags: Vec<DroppedTag>,
    pub warnings: Vec<String>,
}

/// One aligned region where the produced text departs from the original.
///
/// Fragments are space-joined words of the normalized strings; `position`
/// is the index of the first differing word in the normalized original.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextDiff {
    pub original: String,
    pub produced: String,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub passed: bool,
    pub original_normalized: CanonicalText,
    pub stripped_normalized: CanonicalText,
    pub diffs: Vec<TextDiff>,
}

impl VerificationReport {
    /// Rebuilds the produced word sequence by applying the diffs to the
    /// normalized original.
    pub fn reconstruct_produced(&self) -> String {
        let words = self.original_normalized.words();
        let mut out: Vec<&str> = Vec::with_capacity(words.len());
        let mut cursor = 0;
        for diff in &self.diffs {
            out.extend_from_slice(&words[cursor..diff.position]);
            out.extend(split_words(&diff.produced));
            cursor = diff.position + split_words(&diff.original).count();
        }
        out.extend_from_slice(&words[cursor.min(words.len())..]);
        out.join(" ")
    }

    /// The first diff, if any.
    pub fn first_diff(&self) -> Option<&TextDiff> {
        self.diffs.first()
    }
}

fn split_words(s: &str) -> impl Iterator<Item = &str> {
    s.split(' ').filter(|w| !w.is_empty())
}

/// Word-level diff between two normalized strings: one entry per gap in
/// their longest common subsequence.
pub fn word_diff(original: &CanonicalText, produced: &CanonicalText) -> Vec<TextDiff> {
    let old = original.words();
    let new = produced.words();
    let ops = capture_diff_slices(Algorithm::Myers, &old, &new);

    let mut diffs: Vec<TextDiff> = Vec::new();
    // (old range, new range) of the gap being accumulated
    let mut gap: Option<(usize, usize, usize, usize)> = None;
    let mut flush = |gap: &mut Option<(usize, usize, usize, usize)>| {
        if let Some((os, oe, ns, ne)) = gap.take() {
            diffs.push(TextDiff {
                original: old[os..oe].join(" "),
                produced: new[ns..ne].join(" "),
                position: os,
            });
        }
    };
    for op in ops {
        match op {
            DiffOp::Equal { .. } => flush(&mut gap),
            other => {
                let (_, old_range, new_range) = other.as_tag_tuple();
                gap = Some(match gap {
                    Some((os, _, ns, _)) => (os, old_range.end, ns, new_range.end),
                    None => (old_range.start, old_range.end, new_range.start, new_range.end),
                });
            }
        }
    }
    flush(&mut gap);
    diffs
}

/// Compares two texts under [`normalize`].
pub fn verify_text(original: &str, produced: &str) -> VerificationReport {
    let original_normalized = normalize(original);
    let stripped_normalized = normalize(produced);
    let diffs = if original_normalized == stripped_normalized {
        Vec::new()
    } else {
        word_diff(&original_normalized, &stripped_normalized)
    };
    VerificationReport {
        passed: diffs.is_empty(),
        original_normalized,
        stripped_normalized,
        diffs,
    }
}

/// Checks that parsing recovered the original content.
pub fn verify_preservation(original: &str, parsed: &ParsedMarkup) -> VerificationReport {
    verify_text(original, parsed.document.text())
}

const ENTITIES: [(&str, char); 5] = [
    ("amp;", '&'),
    ("lt;", '<'),
    ("gt;", '>'),
    ("quot;", '"'),
    ("apos;", '\''),
];

#[derive(Debug)]
enum Token<'a> {
    Element {
        name: String,
        closing: bool,
        has_attrs: bool,
    },
    /// Comments, doctypes, processing instructions.
    Other(&'a str),
}

/// Tries to read a tag starting at `s[0] == '<'`. Returns the token and its
/// byte length, or `None` when the `<` is literal text.
fn read_tag(s: &str) -> Option<(Token<'_>, usize)> {
    let rest = &s[1..];
    if let Some(body) = rest.strip_prefix("!--") {
        let end = body.find("-->")?;
        return Some((Token::Other("!--"), 1 + 3 + end + 3));
    }
    let first = rest.chars().next()?;
    if first == '!' || first == '?' {
        let end = rest.find('>')?;
        let name_end = rest[1..]
            .find(|c: char| !c.is_ascii_alphanumeric())
            .map_or(rest.len(), |i| i + 1);
        return Some((Token::Other(&rest[..name_end.min(end)]), 1 + end + 1));
    }

    let (closing, body) = match rest.strip_prefix('/') {
        Some(b) => (true, b),
        None => (false, rest),
    };
    if !body.starts_with(|c: char| c.is_ascii_alphabetic()) {
        return None;
    }
    let name_len = body
        .find(|c: char| !(c.is_ascii_alphanumeric() || c == '-' || c == ':'))
        .unwrap_or(body.len());
    let name = body[..name_len].to_ascii_lowercase();
    // "<it's" or "<x<y" is text, not a tag
    if !body[name_len..].starts_with(|c: char| c.is_whitespace() || c == '/' || c == '>') {
        return None;
    }

    // attributes run to the first '>' outside quoted values
    let mut quote: Option<char> = None;
    let mut has_attrs = false;
    let mut after_eq = false;
    for (i, c) in body[name_len..].char_indices() {
        match quote {
            Some(q) if c == q => quote = None,
            Some(_) => {}
            None => match c {
                '>' => {
                    let consumed = 1 + usize::from(closing) + name_len + i + 1;
                    return Some((
                        Token::Element {
                            name,
                            closing,
                            has_attrs,
                        },
                        consumed,
                    ));
                }
                '"' | '\'' if after_eq => {
                    quote = Some(c);
                    after_eq = false;
                }
                '<' => return None,
                c if c.is_whitespace() => {}
                '/' => after_eq = false,
                c => {
                    has_attrs = true;
                    after_eq = c == '=';
                }
            },
        }
    }
    None
}

fn whitelist_kind(name: &str) -> Option<AnnotationKind> {
    match name {
        "strong" | "b" => Some(AnnotationKind::Emphasis),
        "mark" => Some(AnnotationKind::Highlight),
        "u" => Some(AnnotationKind::Underline),
        _ => None,
    }
}

#[derive(Default)]
struct Parser {
    text: String,
    len: usize,
    candidates: Vec<AnnotationSpan>,
    breaks: Vec<usize>,
    /// Pending block separator to insert before the next non-space text.
    pending_block: Option<&'static str>,
    open: Vec<(AnnotationKind, usize)>,
    depth: [usize; 3],
    unknown_open: Vec<String>,
    dropped: Vec<DroppedTag>,
    warnings: Vec<String>,
}

impl Parser {
    fn push_char(&mut self, c: char) {
        if let Some(sep) = self.pending_block.take() {
            let last_is_space = self.text.chars().next_back().is_none_or(char::is_whitespace);
            if !self.text.is_empty() && !last_is_space && !c.is_whitespace() {
                self.text.push_str(sep);
                self.len += sep.chars().count();
            }
            self.breaks.push(self.len);
        }
        self.text.push(c);
        self.len += 1;
    }

    fn block_boundary(&mut self, tag: &str, sep: &'static str) {
        self.close_all(&format!("at <{tag}>"));
        self.pending_block = Some(sep);
    }

    fn close_all(&mut self, context: &str) {
        while let Some((kind, start)) = self.open.pop() {
            self.warnings
                .push(format!("unclosed <{}> opened at {start} auto-closed {context}", kind.tag()));
            self.finish_span(kind, start);
            self.depth[kind as usize] = 0;
        }
    }

    fn finish_span(&mut self, kind: AnnotationKind, start: usize) {
        if start < self.len {
            self.candidates.push(AnnotationSpan::new(kind, start, self.len));
        }
    }

    fn open_kind(&mut self, kind: AnnotationKind) {
        let depth = &mut self.depth[kind as usize];
        *depth += 1;
        if *depth == 1 {
            self.open.push((kind, self.len));
        } else {
            self.warnings
                .push(format!("nested <{}> at {} folded into the outer one", kind.tag(), self.len));
        }
    }

    fn close_kind(&mut self, kind: AnnotationKind, raw_name: &str) {
        match self.depth[kind as usize] {
            0 => self
                .warnings
                .push(format!("stray </{raw_name}> at {} ignored", self.len)),
            1 => {
                self.depth[kind as usize] = 0;
                // close inner spans, close the target, then reopen the inner
                // ones so the result stays properly nested
                let mut reopen = Vec::new();
                while let Some((k, start)) = self.open.pop() {
                    self.finish_span(k, start);
                    if k == kind {
                        break;
                    }
                    reopen.push(k);
                }
                if !reopen.is_empty() {
                    self.warnings
                        .push(format!("misnested </{raw_name}> at {} repaired", self.len));
                }
                for k in reopen.into_iter().rev() {
                    self.open.push((k, self.len));
                }
            }
            _ => self.depth[kind as usize] -= 1,
        }
    }

    fn element(&mut self, name: String, closing: bool, has_attrs: bool) {
        if let Some(kind) = whitelist_kind(&name) {
            if has_attrs {
                self.warnings
                    .push(format!("attributes on <{name}> at {} ignored", self.len));
            }
            if closing {
                self.close_kind(kind, &name);
            } else {
                self.open_kind(kind);
            }
            return;
        }
        match name.as_str() {
            "p" => self.block_boundary(&name, "\n\n"),
            "br" => self.block_boundary(&name, "\n"),
            _ if closing => {
                if let Some(i) = self.unknown_open.iter().rposition(|n| *n == name) {
                    self.unknown_open.remove(i);
                } else {
                    self.dropped.push(DroppedTag {
                        name,
                        position: self.len,
                        closing: true,
                    });
                }
            }
            _ => {
                self.unknown_open.push(name.clone());
                self.dropped.push(DroppedTag {
                    name,
                    position: self.len,
                    closing: false,
                });
            }
        }
    }
}

/// Parses tag-augmented text. Never fails.
pub fn parse_markup(raw: &str) -> ParsedMarkup {
    let mut p = Parser::default();
    let mut i = 0;
    while i < raw.len() {
        let rest = &raw[i..];
        let c = rest.chars().next().unwrap();
        match c {
            '<' => match read_tag(rest) {
                Some((Token::Element { name, closing, has_attrs }, n)) => {
                    p.element(name, closing, has_attrs);
                    i += n;
                }
                Some((Token::Other(name), n)) => {
                    p.dropped.push(DroppedTag {
                        name: name.to_ascii_lowercase(),
                        position: p.len,
                        closing: false,
                    });
                    i += n;
                }
                None => {
                    p.push_char('<');
                    i += 1;
                }
            },
            '&' => {
                let entity = ENTITIES.iter().find(|(name, _)| rest[1..].starts_with(name));
                match entity {
                    Some((name, decoded)) => {
                        p.push_char(*decoded);
                        i += 1 + name.len();
                    }
                    None => {
                        p.push_char('&');
                        i += 1;
                    }
                }
            }
            _ => {
                p.push_char(c);
                i += c.len_utf8();
            }
        }
    }
    p.close_all("at end of input");

    let (document, dropped_spans) = AnnotatedDocument::reconcile(p.text, &p.breaks, &p.candidates);
    for span in dropped_spans {
        p.warnings.push(format!(
            "<{}> over {}..{} crosses another annotation and was dropped",
            span.kind.tag(),
            span.start,
            span.end
        ));
    }
    ParsedMarkup {
        document,
        dropped_tags: p.dropped,
        warnings: p.warnings,
    }
}

fn escape_into(out: &mut String, c: char) {
    match c {
        '&' => out.push_str("&amp;"),
        '<' => out.push_str("&lt;"),
        '>' => out.push_str("&gt;"),
        '"' => out.push_str("&quot;"),
        '\'' => out.push_str("&apos;"),
        c => out.push(c),
    }
}

/// Serializes a document: each paragraph in `<p>…</p>`, separators kept
/// verbatim between paragraphs, spans as properly nested tags.
pub fn emit_markup(doc: &AnnotatedDocument) -> String {
    let chars: Vec<char> = doc.text().chars().collect();
    if chars.is_empty() {
        return String::new();
    }
    let mut out = String::with_capacity(doc.text().len() + 16 * doc.spans().len() + 16);
    let paragraphs = doc.paragraphs();
    // spans are stored in (start, end desc) order, so opening in order and
    // closing from the top of a stack always nests correctly
    let spans = doc.spans();
    let mut next_span = 0;
    let mut stack: Vec<AnnotationSpan> = Vec::new();

    for (i, para) in paragraphs.iter().enumerate() {
        if i > 0 {
            let sep_start = paragraphs[i - 1].end;
            out.extend(&chars[sep_start..para.start]);
        }
        out.push_str("<p>");
        for pos in para.clone() {
            while next_span < spans.len() && spans[next_span].start == pos {
                let span = spans[next_span];
                out.push('<');
                out.push_str(span.kind.tag());
                out.push('>');
                stack.push(span);
                next_span += 1;
            }
            escape_into(&mut out, chars[pos]);
            while stack.last().is_some_and(|s| s.end == pos + 1) {
                let span = stack.pop().unwrap();
                out.push_str("</");
                out.push_str(span.kind.tag());
                out.push('>');
            }
        }
        out.push_str("</p>");
    }
    debug_assert!(stack.is_empty() && next_span == spans.len());
    out
}
