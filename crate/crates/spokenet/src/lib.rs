//! File formats, configuration and command implementations around
//! `spokenet-core`.

pub mod config;
pub mod error;
pub mod export;
pub mod io;
pub mod pipeline;
pub mod tensor;

pub use config::ExperimentConfig;
pub use error::{AppError, AppResult};
