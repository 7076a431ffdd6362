//! Pathlet learning over listening histories.
//!
//! Users' per-window genre allocations are turned into rank trajectories,
//! recurring sub-paths ("pathlets") are mined and scored by a
//! box-constrained sparse-coding problem, and the selected dictionary
//! yields explicit trajectory embeddings. Those embeddings feed
//! appearance/disappearance classifiers that edit a copy-forward
//! prediction of the next window's genre allocation.
//!
//! Pipeline stages (also exposed as CLI subcommands):
//! ingest -> trajectories -> mine -> learn -> embed -> predict -> evaluate.

pub mod artifacts;
pub mod dict_learn;
pub mod embed;
pub mod error;
pub mod evaluate;
pub mod ingest;
pub mod pathlet_graph;
pub mod pipeline;
pub mod predict;
pub mod rng;
pub mod synth;
pub mod trajectory;

pub use error::{Error, Result};
