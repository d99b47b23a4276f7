//! Run configuration, presets, sweeps and CSV output.

pub mod config;
pub mod csv;
pub mod presets;
pub mod run;
pub mod sweep;

pub use config::{RunConfig, SweepAxis, SweepConfig, SweepValue};
pub use presets::{preset, preset_member, run_preset, PRESET_NAMES};
pub use run::{balancedness_path, first_passage, record_trace, run_experiment, run_observed, RunOutput, Trace, TraceStep};
pub use sweep::{run_sweep, summary_csv, write_sweep, SweepMember};
