//! Lightweight data augmentation for slot filling and intent classification.
//!
//! A training corpus `D` of BIO-tagged utterances is expanded with an
//! augmented corpus `D'` by one of four methods:
//!
//! * **slot substitution**: swap a span's value for another value seen
//!   under the same slot label ([`augment::slotsub`]);
//! * **LM substitution**: blank a span and refill it word by word from a
//!   masked language model with nucleus sampling, optionally filtered by a
//!   pair classifier ([`augment::lm`]);
//! * **crop** and **rotate** over dependency trees ([`augment::tree`]).
//!
//! [`pipeline::run_augment`] drives a method over a whole corpus.

pub mod augment;
pub mod corpus;
pub mod pipeline;
pub mod seed;
pub mod slot_index;

pub use augment::{AugRecord, Method, OpDetail};
pub use corpus::{Corpus, CorpusError, DepTree, SlotSpan, Utterance};
pub use pipeline::{run_augment, AugConfig, AugmentOutput, Backends, StatsReport};
pub use seed::AugRng;
pub use slot_index::SlotIndex;
