//! Content-preserving text annotation for readers with dyslexia.
//!
//! A chat model marks up text with three tags (bold, highlight, underline);
//! the reply is parsed against that whitelist and checked to contain exactly
//! the original words before anything is shown. A Bionic Reading formatter
//! is included as a baseline, along with HTML/terminal rendering and a
//! rubric-based answer scorer.

pub mod annotator;
pub mod bionic;
pub mod llm;
pub mod markup;
pub mod model;
pub mod offline;
pub mod prompt;
pub mod render;
pub mod scorer;

pub use annotator::{annotate, AnnotateError, AnnotationResult, Annotator};
pub use bionic::{bionic_format, bold_prefix_len, BionicParams};
pub use markup::{emit_markup, parse_markup, verify_preservation, ParsedMarkup, VerificationReport};
pub use model::{
    apply_annotations, normalize, strip_annotations, AnnotatedDocument, AnnotationKind, AnnotationSpan,
    CanonicalText,
};
pub use offline::offline_annotate;
pub use prompt::{build_custom_prompt, build_default_prompt, Category, PromptSpec};
pub use render::{render_html, render_terminal, RenderStyle};
pub use scorer::{build_rater_prompt, parse_score, ScoreResult, Scorer};
