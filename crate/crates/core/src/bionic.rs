//! Bionic Reading baseline: bold a leading prefix of words.
//!
//! `fixation` (1..=5) sets how much of each word is bolded and `saccade`
//! (10, 20, .. 50) sets how many words apart the bolded words are: every
//! `saccade / 10`-th word of a paragraph, starting with the first.

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::char::is_combining_mark;

use crate::model::{paragraph_breaks_of, AnnotatedDocument, AnnotationKind, AnnotationSpan};

pub const DEFAULT_FIXATION: u8 = 3;
pub const DEFAULT_SACCADE: u8 = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BionicError {
    #[error("fixation must be in 1..=5, got {0}")]
    Fixation(i64),
    #[error("saccade must be one of 10, 20, 30, 40, 50, got {0}")]
    Saccade(i64),
    #[error("word length must be at least 1")]
    EmptyWord,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BionicParams {
    fixation: u8,
    saccade: u8,
}

impl BionicParams {
    pub fn new(fixation: i64, saccade: i64) -> Result<Self, BionicError> {
        if !(1..=5).contains(&fixation) {
            return Err(BionicError::Fixation(fixation));
        }
        if !(10..=50).contains(&saccade) || saccade % 10 != 0 {
            return Err(BionicError::Saccade(saccade));
        }
        Ok(Self {
            fixation: fixation as u8,
            saccade: saccade as u8,
        })
    }

    pub fn fixation(&self) -> u8 {
        self.fixation
    }

    pub fn saccade(&self) -> u8 {
        self.saccade
    }

    /// Distance in words between bolded words.
    pub fn stride(&self) -> usize {
        usize::from(self.saccade / 10)
    }
}

impl Default for BionicParams {
    fn default() -> Self {
        Self {
            fixation: DEFAULT_FIXATION,
            saccade: DEFAULT_SACCADE,
        }
    }
}

impl<'de> Deserialize<'de> for BionicParams {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            fixation: Option<i64>,
            saccade: Option<i64>,
        }
        let raw = Raw::deserialize(deserializer)?;
        BionicParams::new(
            raw.fixation.unwrap_or(DEFAULT_FIXATION.into()),
            raw.saccade.unwrap_or(DEFAULT_SACCADE.into()),
        )
        .map_err(serde::de::Error::custom)
    }
}

/// Number of leading characters to bold in a word of `word_len` characters.
///
/// Words of up to three characters get a single bold letter at fixation 3
/// or below; otherwise the prefix is `ceil(word_len * fixation / 6)`,
/// clamped to `1..=word_len`.
pub fn bold_prefix_len(word_len: usize, fixation: u8) -> Result<usize, BionicError> {
    if word_len == 0 {
        return Err(BionicError::EmptyWord);
    }
    if !(1..=5).contains(&fixation) {
        return Err(BionicError::Fixation(fixation.into()));
    }
    let fixation = usize::from(fixation);
    if word_len <= 3 && fixation <= 3 {
        return Ok(1);
    }
    Ok((word_len * fixation).div_ceil(6).clamp(1, word_len))
}

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric()
}

/// Code-point ranges of words: maximal runs of letters and digits, with
/// combining marks attached to the preceding letter.
pub fn word_ranges(chars: &[char], from: usize, to: usize) -> Vec<(usize, usize)> {
    let mut words = Vec::new();
    let mut i = from;
    while i < to {
        if !is_word_char(chars[i]) {
            i += 1;
            continue;
        }
        let start = i;
        while i < to && (is_word_char(chars[i]) || (i > start && is_combining_mark(chars[i]))) {
            i += 1;
        }
        words.push((start, i));
    }
    words
}

pub fn bionic_format(text: &str, params: &BionicParams) -> AnnotatedDocument {
    let chars: Vec<char> = text.chars().collect();
    let breaks = paragraph_breaks_of(text);
    let mut spans = Vec::new();

    let mut bounds = Vec::with_capacity(breaks.len() + 2);
    bounds.push(0);
    bounds.extend(&breaks);
    bounds.push(chars.len());
    for window in bounds.windows(2) {
        for (index, (start, end)) in word_ranges(&chars, window[0], window[1]).into_iter().enumerate() {
            if index % params.stride() != 0 {
                continue;
            }
            let bold = bold_prefix_len(end - start, params.fixation).expect("words are nonempty");
            spans.push(AnnotationSpan::new(AnnotationKind::Emphasis, start, start + bold));
        }
    }
    AnnotatedDocument::new(text, spans, breaks).expect("word prefixes are disjoint and inside paragraphs")
}
