//! Content and dimension machinery for limsup sets.
//!
//! Regions live in `[0,1]^d` under the sup-norm. Contents are computed as exact
//! optima over b-adic covers, measures are self-similar cylinder trees with
//! interval-valued mass queries, and the limsup samplers and the Cantor-type
//! builder sit on top of those two layers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cantor;
pub mod content;
pub mod covering;
pub mod error;
pub mod fit;
pub mod formulas;
pub mod geometry;
pub mod ifs;
pub mod kv;
pub mod lab;
pub mod records;

pub use error::{Error, Result};
