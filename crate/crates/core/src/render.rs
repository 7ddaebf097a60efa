//! HTML and terminal output.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::markup::emit_markup;
use crate::model::{AnnotatedDocument, AnnotationKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum StyleError {
    #[error("font scale must be positive")]
    FontScale,
    #[error("letter spacing must be >= 0")]
    LetterSpacing,
    #[error("line spacing must be >= 1")]
    LineSpacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Theme {
    #[default]
    Light,
    Dark,
}

/// Named highlight colors; each has a light and a dark variant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HighlightColor {
    #[default]
    Yellow,
    Green,
    Blue,
    Pink,
}

impl HighlightColor {
    fn css(self, theme: Theme) -> &'static str {
        match (self, theme) {
            (Self::Yellow, Theme::Light) => "#fff176",
            (Self::Green, Theme::Light) => "#c5e1a5",
            (Self::Blue, Theme::Light) => "#b3e5fc",
            (Self::Pink, Theme::Light) => "#f8bbd0",
            (Self::Yellow, Theme::Dark) => "#6d5f00",
            (Self::Green, Theme::Dark) => "#2e5d1f",
            (Self::Blue, Theme::Dark) => "#0d4a6b",
            (Self::Pink, Theme::Dark) => "#6b1f3a",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    pub font_scale: f64,
    /// In em.
    pub letter_spacing: f64,
    pub line_spacing: f64,
    pub highlight: HighlightColor,
    pub theme: Theme,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            font_scale: 1.0,
            letter_spacing: 0.0,
            line_spacing: 1.5,
            highlight: HighlightColor::default(),
            theme: Theme::default(),
        }
    }
}

impl RenderStyle {
    pub fn validate(&self) -> Result<(), StyleError> {
        if !(self.font_scale.is_finite() && self.font_scale > 0.0) {
            return Err(StyleError::FontScale);
        }
        if !(self.letter_spacing.is_finite() && self.letter_spacing >= 0.0) {
            return Err(StyleError::LetterSpacing);
        }
        if !(self.line_spacing.is_finite() && self.line_spacing >= 1.0) {
            return Err(StyleError::LineSpacing);
        }
        Ok(())
    }

    fn stylesheet(&self) -> String {
        let (background, foreground) = match self.theme {
            Theme::Light => ("#fbf8ef", "#1d1d1d"),
            Theme::Dark => ("#1b1b1d", "#e8e6e3"),
        };
        let mut css = String::new();
        let _ = write!(
            css,
            "body {{ margin: 0; background: {background}; color: {foreground}; }}\n\
             main.larf-document {{ max-width: 42em; margin: 2em auto; padding: 0 1em; \
             font-family: Verdana, Tahoma, Arial, sans-serif; font-size: {size}px; \
             line-height: {line}; letter-spacing: {letter}em; word-spacing: 0.12em; }}\n\
             main.larf-document p {{ margin: 0 0 1.2em; }}\n\
             main.larf-document strong {{ font-weight: 700; }}\n\
             main.larf-document mark {{ background: {highlight}; color: inherit; padding: 0 0.1em; }}\n\
             main.larf-document u {{ text-decoration: underline; text-decoration-thickness: 0.12em; \
             text-underline-offset: 0.18em; }}\n",
            size = 18.0 * self.font_scale,
            line = self.line_spacing,
            letter = self.letter_spacing,
            highlight = self.highlight.css(self.theme),
        );
        css
    }
}

const BODY_OPEN: &str = "<main class=\"larf-document\">\n";
const BODY_CLOSE: &str = "\n</main>";

/// A standalone HTML page with an embedded stylesheet. The annotated
/// content is exactly [`emit_markup`] of the document.
pub fn render_html(doc: &AnnotatedDocument, style: &RenderStyle) -> Result<String, StyleError> {
    style.validate()?;
    let mut html = String::with_capacity(doc.text().len() * 2 + 1024);
    html.push_str("<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n");
    html.push_str("<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n");
    html.push_str("<title>Annotated text</title>\n<style>\n");
    html.push_str(&style.stylesheet());
    html.push_str("</style>\n</head>\n<body>\n");
    html.push_str(BODY_OPEN);
    html.push_str(&emit_markup(doc));
    html.push_str(BODY_CLOSE);
    html.push_str("\n</body>\n</html>\n");
    Ok(html)
}

/// The annotated content of a page produced by [`render_html`].
pub fn extract_body(html: &str) -> Option<&str> {
    let start = html.find(BODY_OPEN)? + BODY_OPEN.len();
    let end = start + html[start..].rfind(BODY_CLOSE)?;
    Some(&html[start..end])
}

fn sgr(kind: AnnotationKind, on: bool) -> &'static str {
    match (kind, on) {
        (AnnotationKind::Emphasis, true) => "\x1b[1m",
        (AnnotationKind::Emphasis, false) => "\x1b[22m",
        (AnnotationKind::Highlight, true) => "\x1b[7m",
        (AnnotationKind::Highlight, false) => "\x1b[27m",
        (AnnotationKind::Underline, true) => "\x1b[4m",
        (AnnotationKind::Underline, false) => "\x1b[24m",
    }
}

/// Text with SGR escapes: bold, inverse video and underline.
pub fn render_terminal(doc: &AnnotatedDocument) -> String {
    let spans = doc.spans();
    let mut out = String::with_capacity(doc.text().len() + spans.len() * 10);
    let mut next = 0;
    let mut open: Vec<(AnnotationKind, usize)> = Vec::new();
    for (pos, c) in doc.text().chars().enumerate() {
        while next < spans.len() && spans[next].start == pos {
            out.push_str(sgr(spans[next].kind, true));
            open.push((spans[next].kind, spans[next].end));
            next += 1;
        }
        out.push(c);
        while open.last().is_some_and(|&(_, end)| end == pos + 1) {
            let (kind, _) = open.pop().unwrap();
            out.push_str(sgr(kind, false));
        }
    }
    out
}
