//! Retrieval-augmented code completion over a fragment database.
//!
//! The crate splits source files into equal-length token fragments,
//! retrieves fragments lexically (BM25) and semantically (a trainable
//! dual encoder with shared weights), fuses the two scores, and feeds
//! the retrieved fragment's successor to a pluggable generator that
//! completes the query context. Training data for the encoder comes
//! from semantic-preserving transformations (identifier renaming, dead
//! code insertion) paired with randomly truncated queries.
//!
//! The crate is `no_std` + `alloc`; all IO, file formats, and the CLI
//! live in the companion `splice-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod augment;
pub mod corpus;
pub mod dense;
pub mod eval;
pub mod generate;
pub mod hybrid;
pub mod lex;
pub mod progen;
pub mod seeds;
pub mod sparse;
pub mod syntax;
pub mod token;

mod math;

pub use corpus::{Corpus, FileId, Fragment, FragmentId, Language, SourceFile};
pub use token::{Token, TokenKind};

/// Scored retrieval hit shared by the sparse, dense, and hybrid paths.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoredHit {
    pub fragment: FragmentId,
    pub score: f64,
}
