//! Detection of semantic conflicts caused by dependency version shadowing.

pub mod corpus;
pub mod detector;
pub mod diffexec;
pub mod lang;
pub mod miner;
pub mod pipeline;
pub mod report;
pub mod resolver;
pub mod testgen;
