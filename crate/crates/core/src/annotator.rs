//! Model-driven annotation with a verify, repair, fallback loop.
//!
//! The input is split into chunks on paragraph boundaries. Each chunk is sent
//! with the system prompt; the reply is parsed and checked for content
//! preservation. A reply that changed the text gets a corrective follow-up
//! in the same conversation, up to `max_retries` times. A chunk that never
//! verifies is returned unannotated.
//!
//! Verified spans are projected back onto the caller's text, so the
//! returned document's text is always the input, byte for byte.

use std::ops::Range;
use std::sync::Arc;

use futures::future::try_join_all;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;
use tokio::sync::Semaphore;
use tracing::{debug, info};

use crate::llm::{ChatBackend, ChatMessage, ChatRequest, HttpChatClient, LlmConfig, LlmError};
use crate::markup::{parse_markup, verify_preservation, TextDiff, VerificationReport};
use crate::model::{normalize, paragraph_breaks_of, AnnotatedDocument, AnnotationSpan};
use crate::prompt::{corrective_message, PromptSpec};

/// Upper bound on chunk length, in code points.
pub const MAX_CHUNK_CHARS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnnotateError {
    #[error("input text is empty")]
    EmptyInput,
    #[error("transport error: {0}")]
    Transport(String),
    #[error("authentication rejected: {0}")]
    Auth(String),
    #[error("configuration error: {0}")]
    Config(String),
}

impl From<LlmError> for AnnotateError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Transport(m) => Self::Transport(m),
            LlmError::Auth(m) => Self::Auth(m),
            LlmError::Config(m) => Self::Config(m),
        }
    }
}

/// One request/response pair as exchanged with the endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exchange {
    pub request: Value,
    pub response: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationResult {
    pub document: AnnotatedDocument,
    pub report: VerificationReport,
    /// Model calls made, summed over chunks.
    pub attempts: usize,
    /// At least one chunk was returned unannotated.
    pub fallback_used: bool,
    pub raw_replies: Vec<String>,
    #[serde(default)]
    pub exchanges: Vec<Exchange>,
}

/// Partitions `text` into contiguous code-point ranges of at most
/// `max_chars`, cutting at paragraph breaks where possible, then at
/// sentence ends, then at whitespace.
pub fn chunk_ranges(text: &str, max_chars: usize) -> Vec<Range<usize>> {
    assert!(max_chars > 0);
    let chars: Vec<char> = text.chars().collect();
    let len = chars.len();
    if len == 0 {
        return Vec::new();
    }
    let mut cuts: Vec<usize> = paragraph_breaks_of(text);
    cuts.push(len);

    let mut ranges = Vec::new();
    let mut start = 0;
    while start < len {
        let limit = start + max_chars;
        if len <= limit {
            ranges.push(start..len);
            break;
        }
        // the furthest paragraph break within reach
        let end = match cuts.iter().rev().find(|&&c| c > start && c <= limit) {
            Some(&c) => c,
            None => split_point(&chars, start, limit),
        };
        ranges.push(start..end);
        start = end;
    }
    ranges
}

/// A cut inside one oversized paragraph: after the last sentence end in
/// range, else after the last whitespace, else at the limit.
fn split_point(chars: &[char], start: usize, limit: usize) -> usize {
    let mut last_ws = None;
    for cut in (start + 1..=limit).rev() {
        // a cut at `cut` starts the next chunk with chars[cut]
        if chars[cut - 1].is_whitespace() && !chars[cut].is_whitespace() {
            let mut k = cut - 1;
            while k > start && chars[k].is_whitespace() {
                k -= 1;
            }
            if matches!(chars[k], '.' | '!' | '?') {
                return cut;
            }
            last_ws.get_or_insert(cut);
        }
    }
    last_ws.unwrap_or(limit)
}

struct Word {
    start: usize,
    end: usize,
}

fn words_of(chars: &[char]) -> Vec<Word> {
    let mut words = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        while i < chars.len() && !chars[i].is_whitespace() {
            i += 1;
        }
        words.push(Word { start, end: i });
    }
    words
}

/// Moves spans from `produced` onto `original`, where the two texts are
/// equal under [`normalize`]. Words are aligned one to one; span edges that
/// fall in whitespace snap inward to the nearest word, and edges inside a
/// word that is spelled differently (another normalization form) snap
/// outward to the word edges.
pub fn project_spans(produced: &AnnotatedDocument, original: &str) -> Vec<AnnotationSpan> {
    if produced.text() == original {
        return produced.spans().to_vec();
    }
    let p_chars: Vec<char> = produced.text().chars().collect();
    let o_chars: Vec<char> = original.chars().collect();
    let p_words = words_of(&p_chars);
    let o_words = words_of(&o_chars);
    if p_words.len() != o_words.len() {
        return Vec::new();
    }
    let same = |j: usize| p_chars[p_words[j].start..p_words[j].end] == o_chars[o_words[j].start..o_words[j].end];

    let map_start = |p: usize| -> Option<usize> {
        let j = p_words.partition_point(|w| w.end <= p);
        let w = p_words.get(j)?;
        if p <= w.start {
            Some(o_words[j].start)
        } else if same(j) {
            Some(o_words[j].start + (p - w.start))
        } else {
            Some(o_words[j].start)
        }
    };
    let map_end = |p: usize| -> Option<usize> {
        let j = p_words.partition_point(|w| w.start < p).checked_sub(1)?;
        let w = &p_words[j];
        if p >= w.end {
            Some(o_words[j].end)
        } else if same(j) {
            Some(o_words[j].start + (p - w.start))
        } else {
            Some(o_words[j].end)
        }
    };

    produced
        .spans()
        .iter()
        .filter_map(|s| {
            let start = map_start(s.start)?;
            let end = map_end(s.end)?;
            (start < end).then(|| AnnotationSpan::new(s.kind, start, end))
        })
        .collect()
}

struct ChunkOutcome {
    spans: Vec<AnnotationSpan>,
    report: VerificationReport,
    attempts: usize,
    fallback_used: bool,
    raw_replies: Vec<String>,
    exchanges: Vec<Exchange>,
}

/// Drives a [`ChatBackend`]. Cheap to clone; clones share the in-flight cap.
#[derive(Clone)]
pub struct Annotator {
    backend: Arc<dyn ChatBackend>,
    model: String,
    max_retries: u32,
    chunk_chars: usize,
    limiter: Arc<Semaphore>,
}

impl Annotator {
    pub fn new(backend: Arc<dyn ChatBackend>, model: impl Into<String>, max_retries: u32, max_in_flight: usize) -> Self {
        Self {
            backend,
            model: model.into(),
            max_retries,
            chunk_chars: MAX_CHUNK_CHARS,
            limiter: Arc::new(Semaphore::new(max_in_flight.max(1))),
        }
    }

    /// An annotator talking HTTP to the configured endpoint.
    pub fn from_config(config: &LlmConfig) -> Result<Self, AnnotateError> {
        let client = HttpChatClient::new(config)?;
        Ok(Self::new(
            Arc::new(client),
            config.model_name.clone(),
            config.max_retries,
            config.max_in_flight,
        ))
    }

    pub fn with_chunk_chars(mut self, chunk_chars: usize) -> Self {
        self.chunk_chars = chunk_chars.max(1);
        self
    }

    /// Shares an existing in-flight limiter, e.g. with a scorer.
    pub fn with_limiter(mut self, limiter: Arc<Semaphore>) -> Self {
        self.limiter = limiter;
        self
    }

    pub fn limiter(&self) -> Arc<Semaphore> {
        self.limiter.clone()
    }

    pub fn backend(&self) -> Arc<dyn ChatBackend> {
        self.backend.clone()
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub async fn annotate(&self, text: &str, prompt: &PromptSpec) -> Result<AnnotationResult, AnnotateError> {
        if normalize(text).is_empty() {
            return Err(AnnotateError::EmptyInput);
        }
        let system = prompt.system_prompt();
        let ranges = chunk_ranges(text, self.chunk_chars);
        let doc_chars: Vec<char> = text.chars().collect();
        debug!(chunks = ranges.len(), "annotating");

        let outcomes = try_join_all(ranges.iter().map(|range| {
            let chunk: String = doc_chars[range.clone()].iter().collect();
            let system = system.clone();
            async move { self.annotate_chunk(&system, chunk, prompt).await }
        }))
        .await?;

        let mut spans = Vec::new();
        let mut diffs: Vec<TextDiff> = Vec::new();
        let mut produced_words: Vec<String> = Vec::new();
        let mut word_offset = 0;
        let mut result = AnnotationResult {
            document: AnnotatedDocument::default(),
            report: crate::markup::verify_text("", ""),
            attempts: 0,
            fallback_used: false,
            raw_replies: Vec::new(),
            exchanges: Vec::new(),
        };
        for (range, outcome) in ranges.iter().zip(outcomes) {
            spans.extend(
                outcome
                    .spans
                    .iter()
                    .map(|s| AnnotationSpan::new(s.kind, s.start + range.start, s.end + range.start)),
            );
            diffs.extend(outcome.report.diffs.iter().map(|d| TextDiff {
                position: d.position + word_offset,
                ..d.clone()
            }));
            word_offset += outcome.report.original_normalized.words().len();
            produced_words.extend(outcome.report.stripped_normalized.words().iter().map(|w| w.to_string()));
            result.attempts += outcome.attempts;
            result.fallback_used |= outcome.fallback_used;
            result.raw_replies.extend(outcome.raw_replies);
            result.exchanges.extend(outcome.exchanges);
        }

        let (document, dropped) = AnnotatedDocument::reconcile(text, &paragraph_breaks_of(text), &spans);
        if !dropped.is_empty() {
            debug!(count = dropped.len(), "dropped spans crossing paragraphs or each other");
        }
        result.document = document;
        result.report = VerificationReport {
            passed: diffs.is_empty(),
            original_normalized: normalize(text),
            stripped_normalized: normalize(&produced_words.join(" ")),
            diffs,
        };
        Ok(result)
    }

    async fn annotate_chunk(&self, system: &str, chunk: String, prompt: &PromptSpec) -> Result<ChunkOutcome, AnnotateError> {
        let mut messages = vec![ChatMessage::system(system), ChatMessage::user(chunk.clone())];
        let mut raw_replies = Vec::new();
        let mut exchanges = Vec::new();
        let mut attempts = 0;
        loop {
            let request = ChatRequest {
                model: self.model.clone(),
                messages: messages.clone(),
                temperature: prompt.temperature(),
                max_tokens: prompt.max_output_tokens(),
            };
            let response = {
                let _permit = self.limiter.acquire().await.expect("limiter is never closed");
                self.backend.complete(&request).await?
            };
            attempts += 1;
            exchanges.push(Exchange {
                request: serde_json::to_value(&request).expect("requests serialize"),
                response: response.raw.clone(),
            });
            raw_replies.push(response.content.clone());

            let parsed = parse_markup(&response.content);
            let report = verify_preservation(&chunk, &parsed);
            if report.passed {
                return Ok(ChunkOutcome {
                    spans: project_spans(&parsed.document, &chunk),
                    report,
                    attempts,
                    fallback_used: false,
                    raw_replies,
                    exchanges,
                });
            }
            if attempts > self.max_retries as usize {
                info!(attempts, "reply never preserved the text, using it unannotated");
                return Ok(ChunkOutcome {
                    spans: Vec::new(),
                    report,
                    attempts,
                    fallback_used: true,
                    raw_replies,
                    exchanges,
                });
            }
            let diff = report.first_diff().expect("a failed report has diffs");
            messages.push(ChatMessage::assistant(response.content));
            messages.push(ChatMessage::user(corrective_message(&diff.original, &diff.produced)));
        }
    }
}

/// One-shot annotation against the configured HTTP endpoint.
pub async fn annotate(text: &str, prompt: &PromptSpec, config: &LlmConfig) -> Result<AnnotationResult, AnnotateError> {
    Annotator::from_config(config)?.annotate(text, prompt).await
}

