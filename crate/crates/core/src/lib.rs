//! Recommends UX evaluation metrics for AI systems from a knowledge graph of
//! annotated prior studies, and generates evaluation plans, expected outcomes
//! and risk lists through pluggable language-model stages.

pub mod corpus;
pub mod embed;
pub mod evalharness;
pub mod graph;
pub mod llm;
pub mod recommend;
pub mod service;
pub(crate) mod util;
