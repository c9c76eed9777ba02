//! Crash narrative classification and misclassification audit.

pub mod agreement;
pub mod ambiguity;
pub mod config;
pub mod corpus;
pub mod data;
pub mod error;
pub mod erroranalysis;
pub mod fusion;
pub mod models;
pub mod pipeline;
pub mod report;
pub mod review;
pub mod stattests;
pub mod system;
pub mod textpipe;
pub mod workflow;

pub use error::{Error, Result};
