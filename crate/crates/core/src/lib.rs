//! Synthetic code-switched text generation and evaluation for Hindi-English.

pub mod codec;
pub mod corpus;
pub mod emtgen;
pub mod eval;
pub mod lexgen;
pub mod lm;
pub mod metrics;
pub mod ops;
pub mod pipeline;
pub mod rng;
pub mod tcs;
pub mod toy;
