//! Build a dictionary from a lemma list with a text-generation provider and
//! score any generated dictionary against a gold-standard one.

pub mod alignment;
pub mod config;
pub mod embedding;
pub mod error_analysis;
pub mod generation;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod report;
pub mod retry;
