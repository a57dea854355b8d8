//! Birth-death processes with two-type catastrophes.
//!
//! An α-catastrophe resets the population to 0 and a β-catastrophe resets it
//! to 1. This crate evaluates transition functions and resolvents of such
//! processes in terms of the catastrophe-free process, along with the law of
//! the first effective catastrophe time. Each closed form has an independent
//! linear-system or simulation counterpart.

// `!(x > 0.0)` guards deliberately reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catastrophe;
pub mod cli;
pub mod error;
pub mod first_catastrophe;
pub mod linalg;
pub mod model;
pub mod resolvent;
pub mod simulate;
pub mod transient;

pub use error::{Error, Result};
