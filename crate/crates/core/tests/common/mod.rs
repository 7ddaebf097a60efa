#![allow(dead_code)]

pub const FIG1_SOURCE: &str = include_str!("../fixtures/fig1_source.txt");
pub const FIG1_REPLY: &str = include_str!("../fixtures/fig1_annotated.html");

pub const MEMBERS: [&str; 4] = ["Jisoo", "Jennie", "Rosé", "Lisa"];
pub const FIG1_HIGHLIGHT: &str = "gained global recognition and a strong fan following";

/// Replaces the first word of `text` with a different one.
pub fn corrupt_first_word(text: &str) -> String {
    let trimmed = text.trim_start();
    let end = trimmed.find(char::is_whitespace).unwrap_or(trimmed.len());
    format!("Corrupted{}", &trimmed[end..])
}
