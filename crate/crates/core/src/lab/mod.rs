//! Parameter sweeps, regressions, first-order displays and acceptance checks.

pub mod config;
pub mod d0;
pub mod fit;
pub mod sweep;
pub mod validate;

pub use config::{preset, AlphaLaw, ForcingChoice, MethodTag, OutputPaths, SweepConfig, PRESETS};
pub use d0::{assemble_d0, section_factor, D0Profile};
pub use fit::{fit_rate_prefactor, FitModel, RegressionReport};
pub use sweep::{run_sweep, write_outputs, SweepRecord, SweepTable};
pub use validate::{validate_suite, CriterionOutcome, Level, Measurement, ValidationReport};
