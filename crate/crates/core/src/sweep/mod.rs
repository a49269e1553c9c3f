//! Monte-Carlo sweeps: configuration, the seeded engine, result files and
//! per-figure presets.

pub mod config;
pub mod engine;
pub mod output;
pub mod recipes;

pub use config::{hwi_preset, Detector, DopplerConfig, Metric, SnrGrid, Stopping, SweepConfig, TheoryConfig, Waveform};
pub use engine::{run_analysis, run_sweep, unit_rng, Metadata, SnrRow, SweepResult};
pub use output::{emit_results, write_csv, write_json, OutputFormat, CSV_HEADER};
pub use recipes::{figure_recipe, recipe_names, Series};
