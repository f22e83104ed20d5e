//! Detecting the end of the critical learning period from weight rotation,
//! and switching data recipes when it ends.

pub mod cost;
pub mod data;
pub mod detector;
pub mod engine;
pub mod error;
pub mod harness;
pub mod rotation;
pub mod schedule;
pub mod seed;

pub use error::{Error, Result};
