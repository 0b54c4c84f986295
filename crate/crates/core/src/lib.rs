pub mod data;
pub mod error;
pub mod fairness;
pub mod model;
pub mod optim;
pub mod pipeline;
pub mod tensor_file;
pub mod tuner;

pub use error::{Error, Result};
