//! Rubric scoring of free-recall answers against an article, 0 to 10.
//!
//! The rater prompt carries the rubric anchors and a one-shot 6-point
//! example; the reply is expected to open with `Score: N`.

use std::sync::Arc;

use futures::future::join_all;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tokio::sync::Semaphore;

use crate::annotator::Exchange;
use crate::llm::{ChatBackend, ChatMessage, ChatRequest, HttpChatClient, LlmConfig, LlmError};

pub const MAX_SCORE: u8 = 10;

const RUBRIC: &str = "Please play the role of a rater and help me rate some answers. you will be given an article. Please read it, and you will be given some information about this article. I need you to score each item by their completeness and accuracy from 0 to 10.
A 0-point represents the entrance is very poor and basically contains no correct or important information and a 10 means the entrance is almost perfect.
A 5-point answer should have some details correct but misses or get some key information wrong, and the overall understanding of the article is partially correct.
A 7-point entrance should contain some correct details, such as the correct name, time, data, etc., or provide a not-bad summary of the overall article. However, it may be a lack of coherent logic or could miss some important information.
A 9-point entrance should contain most of the correct details, such as the correct name, time, data, etc., and it should also contain a logically coherent and accurate summary of the full text.";

const ARTICLE_INTRO: &str = "Here is the original article";
const DELIMITER: &str = "*****";

const EXAMPLE: &str = "Now you should directly give a score and the reason you give that score, and here is an example of 6-point entrance:
The entrance is: 10.5 m high, with 13 false doors, there were tombs made of mud and clay before stone pyramids, the third Egyptian dynasty was the first to build of stone.

And the answer is:

Score: 6
The entrance provides important details such as the height of the wall (10.5 meters) and the number of false doors (13). It also correctly mentions that tombs were made of mud and clay before the construction of stone pyramids and that the Third Dynasty of Egypt was the first to build with stone. However, it could have provided more information about the Step Pyramid itself, such as its final dimensions or its significance in Egyptian history. And its logic is not very coherent.";

const MAX_REPLY_TOKENS: u32 = 512;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScoreError {
    #[error("article and answer must both be nonempty")]
    EmptyInput,
    #[error("reply contains no \"Score: <n>\"")]
    NoScoreFound,
    #[error("score {0} is outside 0..=10")]
    ScoreOutOfRange(i64),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreResult {
    pub score: u8,
    pub rationale: String,
    pub raw_reply: String,
}

pub fn build_rater_prompt(article: &str, answer: &str) -> Result<String, ScoreError> {
    if article.trim().is_empty() || answer.trim().is_empty() {
        return Err(ScoreError::EmptyInput);
    }
    Ok(format!(
        "{RUBRIC}\n\n{ARTICLE_INTRO}\n{DELIMITER}\n{}\n{DELIMITER}\n\n{EXAMPLE}\n\n\
         Now score the following entrance.\nThe entrance is: {}\n\nAnd the answer is:\n",
        article.trim(),
        answer.trim()
    ))
}

/// Finds the first `Score:` marker (any case) followed by an integer.
pub fn parse_score(reply: &str) -> Result<ScoreResult, ScoreError> {
    const MARKER: &str = "score:";
    let lower = reply.to_ascii_lowercase();
    let mut from = 0;
    while let Some(found) = lower[from..].find(MARKER) {
        let after = from + found + MARKER.len();
        from = after;
        let rest = &reply[after..];
        let trimmed = rest.trim_start_matches(|c: char| c.is_whitespace() || c == '*');
        let negative = trimmed.starts_with('-');
        let digits_at = usize::from(negative);
        let digits_len = trimmed[digits_at..]
            .find(|c: char| !c.is_ascii_digit())
            .unwrap_or(trimmed.len() - digits_at);
        if digits_len == 0 {
            continue;
        }
        let number = &trimmed[..digits_at + digits_len];
        let rationale = trimmed[digits_at + digits_len..].trim().to_string();
        let value: i64 = number.parse().unwrap_or(if negative { i64::MIN } else { i64::MAX });
        if !(0..=i64::from(MAX_SCORE)).contains(&value) {
            return Err(ScoreError::ScoreOutOfRange(value));
        }
        return Ok(ScoreResult {
            score: value as u8,
            rationale,
            raw_reply: reply.to_string(),
        });
    }
    Err(ScoreError::NoScoreFound)
}

/// Scores answers through a [`ChatBackend`] at temperature 0.
#[derive(Clone)]
pub struct Scorer {
    backend: Arc<dyn ChatBackend>,
    model: String,
    limiter: Arc<Semaphore>,
}

/// A scoring attempt with the exchange that produced it, for audit logs.
#[derive(Debug, Clone)]
pub struct ScoreOutcome {
    pub result: Result<ScoreResult, ScoreError>,
    pub exchange: Option<Exchange>,
}

impl Scorer {
    pub fn new(backend: Arc<dyn ChatBackend>, model: impl Into<String>, limiter: Arc<Semaphore>) -> Self {
        Self {
            backend,
            model: model.into(),
            limiter,
        }
    }

    pub fn from_config(config: &LlmConfig) -> Result<Self, ScoreError> {
        let client = HttpChatClient::new(config)?;
        Ok(Self::new(
            Arc::new(client),
            config.model_name.clone(),
            Arc::new(Semaphore::new(config.max_in_flight)),
        ))
    }

    pub async fn score(&self, article: &str, answer: &str) -> Result<ScoreResult, ScoreError> {
        self.score_logged(article, answer).await.result
    }

    pub async fn score_logged(&self, article: &str, answer: &str) -> ScoreOutcome {
        let prompt = match build_rater_prompt(article, answer) {
            Ok(p) => p,
            Err(e) => {
                return ScoreOutcome {
                    result: Err(e),
                    exchange: None,
                }
            }
        };
        let request = ChatRequest {
            model: self.model.clone(),
            messages: vec![ChatMessage::user(prompt)],
            temperature: 0.0,
            max_tokens: MAX_REPLY_TOKENS,
        };
        let response = {
            let _permit = self.limiter.acquire().await.expect("limiter is never closed");
            self.backend.complete(&request).await
        };
        match response {
            Ok(response) => ScoreOutcome {
                result: parse_score(&response.content),
                exchange: Some(Exchange {
                    request: serde_json::to_value(&request).expect("requests serialize"),
                    response: response.raw,
                }),
            },
            Err(e) => ScoreOutcome {
                result: Err(e.into()),
                exchange: None,
            },
        }
    }

    /// Scores every answer; results are in input order.
    pub async fn score_batch(&self, article: &str, answers: &[String]) -> Vec<ScoreOutcome> {
        join_all(answers.iter().map(|a| self.score_logged(article, a))).await
    }
}

/// One-shot scoring against the configured HTTP endpoint.
pub async fn score(article: &str, answer: &str, config: &LlmConfig) -> Result<ScoreResult, ScoreError> {
    Scorer::from_config(config)?.score(article, answer).await
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn prompt_anchors_and_article() {
        let p = build_rater_prompt("The pyramid.", "It is tall.").unwrap();
        assert!(p.contains("a logically coherent and accurate summary of the full text"));
        assert!(p.contains("A 5-point answer should have some details correct"));
        assert!(p.contains("*****\nThe pyramid.\n*****"));
        assert_eq!(p.matches("The pyramid.").count(), 1);
        assert!(p.contains("Score: 6\n"));
        assert!(p.ends_with("The entrance is: It is tall.\n\nAnd the answer is:\n"));
        assert_eq!(p, build_rater_prompt("The pyramid.", "It is tall.").unwrap());
    }

    #[test]
    fn prompt_rejects_empty() {
        assert_eq!(build_rater_prompt("", "x"), Err(ScoreError::EmptyInput));
        assert_eq!(build_rater_prompt("x", " \n"), Err(ScoreError::EmptyInput));
    }

    #[test]
    fn parses_paper_style_reply() {
        let r = parse_score("Score: 6\nThe entrance provides important details").unwrap();
        assert_eq!(r.score, 6);
        assert_eq!(r.rationale, "The entrance provides important details");
    }

    #[test]
    fn marker_case_insensitive() {
        let r = parse_score("score: 10").unwrap();
        assert_eq!((r.score, r.rationale.as_str()), (10, ""));
        assert_eq!(parse_score("**SCORE:** 7 good").unwrap().score, 7);
    }

    #[test]
    fn errors() {
        assert_eq!(parse_score("Score: 15"), Err(ScoreError::ScoreOutOfRange(15)));
        assert_eq!(parse_score("Score: 11"), Err(ScoreError::ScoreOutOfRange(11)));
        assert_eq!(parse_score("Score: -1"), Err(ScoreError::ScoreOutOfRange(-1)));
        assert_eq!(parse_score("I'd give it a 6"), Err(ScoreError::NoScoreFound));
        assert_eq!(parse_score("Score: high"), Err(ScoreError::NoScoreFound));
        assert!(matches!(
            parse_score("Score: 99999999999999999999999"),
            Err(ScoreError::ScoreOutOfRange(_))
        ));
    }

    #[test]
    fn skips_markers_without_numbers() {
        let r = parse_score("Score: see below\nScore: 4 partial").unwrap();
        assert_eq!((r.score, r.rationale.as_str()), (4, "partial"));
    }

    proptest! {
        #[test]
        fn round_trip(n in 0u8..=10, r in "[A-Za-z][A-Za-z0-9 ,.]{0,40}[a-z.]") {
            let parsed = parse_score(&format!("Score: {n}\n{r}")).unwrap();
            prop_assert_eq!(parsed.score, n);
            prop_assert_eq!(parsed.rationale, r);
        }
    }
}
