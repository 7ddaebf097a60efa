//! The chapters of `book/`, one module each, so every example in the guide
//! is compiled and run by `cargo test`.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}

#[doc = include_str!("../../../book/src/document-model.md")]
pub mod document_model {}

#[doc = include_str!("../../../book/src/markup.md")]
pub mod markup {}

#[doc = include_str!("../../../book/src/verification.md")]
pub mod verification {}

#[doc = include_str!("../../../book/src/annotation.md")]
pub mod annotation {}

#[doc = include_str!("../../../book/src/bionic.md")]
pub mod bionic {}

#[doc = include_str!("../../../book/src/rendering.md")]
pub mod rendering {}

#[doc = include_str!("../../../book/src/scoring.md")]
pub mod scoring {}

#[doc = include_str!("../../../book/src/service.md")]
pub mod service {}
