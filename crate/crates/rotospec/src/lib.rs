//! Rotation-speed measurement from scattered narrowband returns.
//!
//! The crate covers the full pipeline at desk scale:
//!
//! - [`signal`]: synthesis of the complex-baseband signal scattered by
//!   rotating machines, with seeded wideband and narrowband noise.
//! - [`spectrum`]: rectangular-window DFT magnitudes and thresholded
//!   peak localization.
//! - [`speed`]: coarse fundamental recovery by harmonic grouping and
//!   sub-bin refinement from the leakage amplitude split, plus the
//!   Doppler/rpm conversions.
//! - [`mod@aggregate`]: fusion of per-subcarrier estimates inside a
//!   +/-60 rpm convergence zone around the median, with convergence
//!   reporting.
//! - [`harness`]: scenario runner with parameter sweeps, trials and
//!   builtin experiments.
//! - [`config`] / [`report`]: TOML scenario files and CSV/JSON results.
//!
//! The `rotospec` binary wraps the harness: `rotospec run <scenario>`,
//! `rotospec list-builtins`, `rotospec gen-config <name>`.

pub mod aggregate;
pub mod config;
pub mod error;
pub mod harness;
pub mod report;
pub mod signal;
pub mod spectrum;
pub mod speed;

pub use aggregate::{aggregate, aggregate_all, AggregateReport};
pub use error::{Error, Result};
pub use harness::{
    builtin, builtin_names, run_coarse_window_sweep, run_scenario, run_scenario_with,
    run_snr_sweep, RunOptions, Scenario, TrialResult,
};
pub use signal::{inject_narrowband, synthesize, BasebandWindow, MachineSpec, NoiseSpec, SubcarrierPlan};
pub use spectrum::{dft_spectrum, locate_peaks, PeakSet, Spectrum};
pub use speed::{
    coarse_estimate, doppler_from_rotation, extract_speeds, fine_estimate, rpm_from_doppler,
    HarmonicFamily, SpeedEstimate,
};
