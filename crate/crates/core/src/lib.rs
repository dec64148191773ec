//! Legal case ranking that fuses a neural relevance score with two symbolic
//! signals: fuzzy satisfaction of the cited articles' rules, and sentence
//! alignment between query and case. Also builds training pairs for the
//! predicate scorer and charge-prediction prompts for a chat model.

pub mod case_level;
pub mod corpus;
pub mod explain;
pub mod export;
pub mod fol;
pub mod fusion;
pub mod law_level;
pub mod metrics;
pub mod pipeline;
pub mod rng;
pub mod scorers;
pub mod synthetic;
pub mod traindata;
