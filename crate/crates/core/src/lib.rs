pub mod calibrank;
pub mod corpus;
pub mod encoders;
pub mod error;
pub mod eval;
pub mod graphembed;
pub mod model;
pub mod numerics;

pub use error::{Error, Result};
