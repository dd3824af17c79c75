//! Lattice laboratory for level sets of the Brownian tree.

pub mod codec;
pub mod config;
pub mod error;
pub mod excursion;
pub mod feller;
pub mod geometry;
pub mod lab;
pub mod laws;
pub mod measure;
pub mod report;
pub mod rmq;
pub mod rng;
pub mod run;
pub mod spinal;
pub mod stats;

pub use error::{Error, Result};
