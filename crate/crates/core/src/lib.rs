//! Active-learning screening engine for title/abstract records.
//!
//! The crate is organised around the screening loop: records are parsed
//! ([`corpus`]), turned into a fixed TF-IDF matrix ([`textfeat`]), a relevance
//! classifier is trained on the labels collected so far ([`classify`]) after
//! rebalancing the training set ([`strategy`]), and the next record to show the
//! reviewer is chosen from the model's scores. [`engine`] owns the persistent
//! project state, [`simulate`] replays fully labeled datasets to benchmark a
//! configuration, and [`service`] exposes the loop over a loopback HTTP API.

pub mod classify;
pub mod cli;
pub mod corpus;
pub mod engine;
pub mod rng;
pub mod service;
pub mod simulate;
pub mod strategy;
pub mod textfeat;

pub use corpus::{Dataset, Label, Record, SourceFormat};
pub use engine::{ProjectState, Settings};
