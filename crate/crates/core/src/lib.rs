pub mod cli;
pub mod data;
pub mod error;
pub mod forget;
pub mod graph;
pub mod lcfnet;
pub mod numerics;
pub mod pipeline_a;
pub mod model;
pub mod rng;
pub mod router;
pub mod sweep;
pub mod unlearn;

pub use error::{Error, Result};
