//! Plumbing behind the `degree-forge` command: input specs, the end-to-end
//! pipeline, seeded sampling checks and SVG output.

pub mod checks;
pub mod error;
pub mod inputs;
pub mod pipeline;
pub mod plot;

pub use error::{CliError, Result};
pub use pipeline::{run_pipeline, run_pipeline_on, PipelineConfig, PipelineResult};
