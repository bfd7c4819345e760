//! Core algorithms for turning FAQ documents into a queryable conversational
//! knowledge base.
//!
//! Everything in this crate is pure computation over in-memory values and
//! only needs `alloc`: document segmentation and QA extraction, query
//! normalization, the inverted index, ranking features, the boosted-tree
//! fusion ranker, chit-chat arbitration and active-learning suggestions.
//! File formats, persistence and the HTTP service live in the `kbqa` crate.

#![no_std]

extern crate alloc;

pub mod active;
pub mod bundled;
pub mod chitchat;
pub mod engine;
pub mod extract;
pub mod features;
pub mod hash;
pub mod index;
pub mod kb;
pub mod ranker;
pub mod synth;
pub mod text;

pub use features::{FeatureVector, Taxonomy};
pub use index::InvertedIndex;
pub use kb::{KnowledgeBase, Persona, QaId, QaPair, QueryContext};
pub use ranker::{GbdtModel, RankedAnswer};
pub use text::{Analyzer, TokenStream};
pub use engine::{Answer, AnswerKind, Engine, EngineConfig, KbSnapshot};
