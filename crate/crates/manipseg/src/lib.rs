//! File formats, synthetic scenes and the staged command-line pipeline built
//! on `manipseg-core`.

pub mod config;
pub mod error;
pub mod formats;
pub mod pipeline;
pub mod ply;
pub mod rgbd;
pub mod synth;

pub use config::PipelineConfig;
pub use error::{FormatError, FormatResult};
pub use pipeline::{run_pipeline, run_stage, PipelineError, Stage};
