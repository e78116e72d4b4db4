pub mod encoding;
pub mod error;
pub mod eventlog;
pub mod harness;
pub mod model;
pub mod petrinet;
pub mod synth;
pub mod training;

pub use error::{Error, Result};
