//! Learning to query black-box decision-makers: which features to show,
//! and how to ask, so the expert's decisions earn the most reward.

pub mod acquisition;
pub mod cli;
pub mod config;
pub mod data;
pub mod domain;
pub mod error;
pub mod estimators;
pub mod experts;
pub mod plot;
pub mod runner;

pub use error::{DissError, ExpertError, Result};
