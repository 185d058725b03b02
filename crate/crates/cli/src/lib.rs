//! Batch front-end for the `fluxlattice` simulator: JSON run configs,
//! experiment runners, CSV/JSON artifacts and SVG heatmaps.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod heatmap;
pub mod output;
pub mod sweep;

pub use config::RunConfig;
pub use error::CliError;
pub use heatmap::render_heatmap;
