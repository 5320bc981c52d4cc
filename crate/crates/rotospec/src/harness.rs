//! Scenario-driven experiment runner.
//!
//! A scenario bundles machines, a subcarrier plan, noise sources and
//! extraction settings, optionally sweeping one parameter over a list of
//! values. Each trial synthesizes every subcarrier window, runs the
//! spectral pipeline per subcarrier, fuses the estimates and emits one
//! row per machine. Trials and sweep points execute in parallel; rows
//! are emitted ordered by (sweep value, trial, machine) regardless of
//! scheduling, and identical scenario + seed always reproduces the same
//! rows bit for bit (wall-clock timing aside, which can be disabled).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::time::Instant;

use crate::aggregate::aggregate_all;
use crate::error::{Error, Result};
use crate::signal::{inject_narrowband, synthesize, MachineSpec, NoiseSpec, SubcarrierPlan};
use crate::spectrum::dft_spectrum;
use crate::speed::{extract_speeds_with, CoarseConfig, ExtractionConfig, SpeedEstimate};

/// Which subcarriers a noise source touches. Narrowband interference is
/// band-concentrated, so it corrupts only the subcarriers whose RF slots
/// it overlaps; the selection is modeled explicitly.
#[derive(Debug, Clone, PartialEq)]
pub enum SubcarrierTargets {
    All,
    Indices(Vec<usize>),
    /// Every `n`-th subcarrier, starting at index 0.
    Stride(usize),
}

impl SubcarrierTargets {
    pub fn applies_to(&self, subcarrier: usize) -> bool {
        match self {
            SubcarrierTargets::All => true,
            SubcarrierTargets::Indices(list) => list.contains(&subcarrier),
            SubcarrierTargets::Stride(n) => *n > 0 && subcarrier.is_multiple_of(*n),
        }
    }
}

/// One noise source plus its targeting.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseSource {
    pub spec: NoiseSpec,
    pub targets: SubcarrierTargets,
}

/// Parameter a scenario can sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    SnrDb,
    SubcarrierCount,
    WindowDuration,
    Threshold,
    /// Rotation speed of the first machine, in rpm.
    RotationSpeed,
}

impl SweepParameter {
    pub fn name(&self) -> &'static str {
        match self {
            SweepParameter::SnrDb => "snr_db",
            SweepParameter::SubcarrierCount => "subcarrier_count",
            SweepParameter::WindowDuration => "window_duration",
            SweepParameter::Threshold => "threshold",
            SweepParameter::RotationSpeed => "rotation_speed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// A complete experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub machines: Vec<MachineSpec>,
    pub plan: SubcarrierPlan,
    pub noise: Vec<NoiseSource>,
    /// Peak threshold in linear magnitude units of the normalized
    /// spectrum (0 dBm reference = magnitude 1.0).
    pub threshold: f64,
    /// Number of machines the extractor is asked to separate (M).
    pub machine_count: usize,
    pub fine_enabled: bool,
    pub coarse: CoarseConfig,
    pub sweep: Option<Sweep>,
    pub trials: u32,
    pub rng_seed: u64,
}

impl Scenario {
    /// A scenario with one machine, no noise and no sweep.
    pub fn single(name: &str, machine: MachineSpec, plan: SubcarrierPlan, threshold: f64) -> Self {
        Scenario {
            name: name.to_string(),
            machines: vec![machine],
            plan,
            noise: Vec::new(),
            threshold,
            machine_count: 1,
            fine_enabled: true,
            coarse: CoarseConfig::default(),
            sweep: None,
            trials: 1,
            rng_seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::Config {
                path: "scenario.name".into(),
                message: "must not be empty".into(),
            });
        }
        if self.machines.is_empty() {
            return Err(Error::Config {
                path: "scenario.machines".into(),
                message: "at least one machine is required".into(),
            });
        }
        if self.machine_count < 1 || self.machine_count > self.machines.len() {
            return Err(Error::Config {
                path: "scenario.machine_count".into(),
                message: format!(
                    "must lie in 1..={}, got {}",
                    self.machines.len(),
                    self.machine_count
                ),
            });
        }
        let charge = self.machines[0].topological_charge();
        if self.machines.iter().any(|m| m.topological_charge() != charge) {
            return Err(Error::Config {
                path: "scenario.machines".into(),
                message: "all machines must share one topological charge".into(),
            });
        }
        for (i, machine) in self.machines.iter().enumerate() {
            if machine.doppler_hz() > self.plan.sample_rate() / 2.0 {
                return Err(Error::Config {
                    path: format!("scenario.machines[{i}].rotation_speed_rpm"),
                    message: format!(
                        "fundamental {:.3} Hz exceeds the Nyquist frequency {:.3} Hz of the plan",
                        machine.doppler_hz(),
                        self.plan.sample_rate() / 2.0
                    ),
                });
            }
        }
        if self.threshold <= 0.0 || !self.threshold.is_finite() {
            return Err(Error::Config {
                path: "scenario.threshold".into(),
                message: format!("must be finite and > 0, got {}", self.threshold),
            });
        }
        if self.trials < 1 {
            return Err(Error::Config {
                path: "scenario.trials".into(),
                message: "must be >= 1".into(),
            });
        }
        let awgn_sources = self
            .noise
            .iter()
            .filter(|s| matches!(s.spec, NoiseSpec::Awgn { .. }))
            .count();
        if awgn_sources > 1 {
            return Err(Error::Config {
                path: "scenario.noise".into(),
                message: "at most one awgn source is supported".into(),
            });
        }
        for (i, source) in self.noise.iter().enumerate() {
            if matches!(source.spec, NoiseSpec::Awgn { .. })
                && source.targets != SubcarrierTargets::All
            {
                return Err(Error::Config {
                    path: format!("scenario.noise[{i}]"),
                    message: "awgn applies to all subcarriers; targeting is not supported".into(),
                });
            }
        }
        if let Some(sweep) = &self.sweep {
            if sweep.values.is_empty() {
                return Err(Error::Config {
                    path: "scenario.sweep.values".into(),
                    message: "must not be empty".into(),
                });
            }
            if sweep.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config {
                    path: "scenario.sweep.values".into(),
                    message: "values must be finite".into(),
                });
            }
            if sweep.parameter == SweepParameter::SnrDb && awgn_sources == 0 {
                return Err(Error::Config {
                    path: "scenario.sweep.parameter".into(),
                    message: "an snr_db sweep requires an awgn noise source".into(),
                });
            }
        }
        Ok(())
    }

    /// Clone with one swept value substituted, re-validated.
    fn apply(&self, point: Option<(SweepParameter, f64)>) -> Result<Scenario> {
        let mut applied = self.clone();
        applied.sweep = None;
        if let Some((parameter, value)) = point {
            match parameter {
                SweepParameter::SnrDb => {
                    for source in &mut applied.noise {
                        if let NoiseSpec::Awgn { snr_db, .. } = &mut source.spec {
                            *snr_db = value;
                        }
                    }
                }
                SweepParameter::SubcarrierCount => {
                    if value.fract() != 0.0 || value < 1.0 {
                        return Err(Error::Config {
                            path: "scenario.sweep.values".into(),
                            message: format!("subcarrier_count must be a whole number >= 1, got {value}"),
                        });
                    }
                    applied.plan = applied.plan.with_count(value as usize)?;
                }
                SweepParameter::WindowDuration => {
                    applied.plan = applied.plan.with_window_duration(value)?;
                }
                SweepParameter::Threshold => {
                    applied.threshold = value;
                }
                SweepParameter::RotationSpeed => {
                    let old = &applied.machines[0];
                    applied.machines[0] = MachineSpec::from_rpm(value, old.topological_charge())?
                        .with_reflection(old.reflection_coefficient())?
                        .with_geometry(
                            old.radial_offset(),
                            old.axial_offset(),
                            old.tx_rx_separation(),
                        )?;
                }
            }
        }
        applied.validate()?;
        Ok(applied)
    }
}

/// One row of experiment output: the fused estimate of one machine in one
/// trial.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub scenario_name: String,
    pub sweep_param: Option<SweepParameter>,
    pub sweep_value: Option<f64>,
    pub trial_index: u32,
    pub machine_index: usize,
    pub true_rpm: f64,
    pub fused_rpm: f64,
    pub abs_error_rpm: f64,
    pub pct_error: f64,
    pub loc: usize,
    pub loc_ratio: f64,
    pub detection_failed: bool,
    pub wall_time_ms: f64,
}

/// Runner controls that do not belong to the scenario itself.
#[derive(Debug, Clone)]
pub struct RunOptions {
    /// Record per-trial wall time. Disable for byte-identical outputs
    /// across runs (the column is then zero).
    pub record_timing: bool,
    pub trials_override: Option<u32>,
    pub seed_override: Option<u64>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            record_timing: true,
            trials_override: None,
            seed_override: None,
        }
    }
}

/// SplitMix64 finalizer; the documented per-trial seed mixing is
/// `fold(base, parts)` with `acc -> splitmix64(acc ^ splitmix64(part))`.
fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn derive_seed(base: u64, parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(base, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}

fn reseeded(spec: &NoiseSpec, base: u64, parts: &[u64]) -> NoiseSpec {
    let mix = |source_seed: u64| {
        let seed = derive_seed(base, &[source_seed]);
        derive_seed(seed, parts)
    };
    match spec {
        NoiseSpec::Awgn {
            snr_db,
            reference_bandwidth_hz,
            rng_seed,
        } => NoiseSpec::Awgn {
            snr_db: *snr_db,
            reference_bandwidth_hz: *reference_bandwidth_hz,
            rng_seed: mix(*rng_seed),
        },
        NoiseSpec::Narrowband {
            center_hz,
            bandwidth_hz,
            power,
            rng_seed,
        } => NoiseSpec::Narrowband {
            center_hz: *center_hz,
            bandwidth_hz: *bandwidth_hz,
            power: *power,
            rng_seed: mix(*rng_seed),
        },
    }
}

/// Run a scenario with default options.
pub fn run_scenario(scenario: &Scenario) -> Result<Vec<TrialResult>> {
    run_scenario_with(scenario, &RunOptions::default())
}

/// Run a scenario: every sweep value, every trial, one result row per
/// machine, ordered by (sweep value, trial, machine).
pub fn run_scenario_with(scenario: &Scenario, options: &RunOptions) -> Result<Vec<TrialResult>> {
    let mut scenario = scenario.clone();
    if let Some(trials) = options.trials_override {
        scenario.trials = trials;
    }
    if let Some(seed) = options.seed_override {
        scenario.rng_seed = seed;
    }
    scenario.validate()?;

    let points: Vec<Option<(SweepParameter, f64)>> = match &scenario.sweep {
        Some(sweep) => sweep
            .values
            .iter()
            .map(|&v| Some((sweep.parameter, v)))
            .collect(),
        None => vec![None],
    };
    let applied: Vec<Scenario> = points
        .iter()
        .map(|&p| scenario.apply(p))
        .collect::<Result<_>>()?;

    let jobs: Vec<(usize, u32)> = (0..points.len())
        .flat_map(|si| (0..scenario.trials).map(move |t| (si, t)))
        .collect();

    let nested: Vec<Vec<TrialResult>> = jobs
        .par_iter()
        .map(|&(si, trial)| run_trial(&applied[si], points[si], si, trial, options))
        .collect::<Result<_>>()?;
    Ok(nested.into_iter().flatten().collect())
}

fn run_trial(
    scenario: &Scenario,
    point: Option<(SweepParameter, f64)>,
    sweep_index: usize,
    trial: u32,
    options: &RunOptions,
) -> Result<Vec<TrialResult>> {
    let start = Instant::now();
    let charge = scenario.machines[0].topological_charge();
    let extraction = ExtractionConfig {
        machine_count: scenario.machine_count,
        threshold: scenario.threshold,
        topological_charge: charge,
        fine_enabled: scenario.fine_enabled,
        coarse: scenario.coarse.clone(),
    };

    let mut matrix: Vec<Vec<SpeedEstimate>> = Vec::with_capacity(scenario.plan.count());
    for sc in 0..scenario.plan.count() {
        let mix = |source_index: usize, seed_of_source: &NoiseSpec| {
            reseeded(
                seed_of_source,
                scenario.rng_seed,
                &[sweep_index as u64, trial as u64, sc as u64, source_index as u64],
            )
        };
        let awgn = scenario
            .noise
            .iter()
            .enumerate()
            .find(|(_, s)| matches!(s.spec, NoiseSpec::Awgn { .. }))
            .map(|(i, s)| mix(i, &s.spec));
        let mut window = synthesize(&scenario.machines, &scenario.plan, sc, awgn.as_ref())?;
        for (i, source) in scenario.noise.iter().enumerate() {
            if matches!(source.spec, NoiseSpec::Narrowband { .. }) && source.targets.applies_to(sc)
            {
                window = inject_narrowband(&window, &mix(i, &source.spec))?;
            }
        }
        let spectrum = dft_spectrum(&window, scenario.plan.window_duration())?;
        matrix.push(extract_speeds_with(&spectrum, &extraction)?);
    }

    let reports = aggregate_all(&matrix, scenario.machine_count);
    let wall_time_ms = if options.record_timing {
        start.elapsed().as_secs_f64() * 1e3
    } else {
        0.0
    };

    // Machines are indexed by ascending true rpm, matching the
    // ascending-median ordering of the reports.
    let mut truths: Vec<f64> = scenario.machines.iter().map(|m| m.rpm()).collect();
    truths.sort_by(|a, b| a.partial_cmp(b).unwrap());

    Ok(reports
        .into_iter()
        .map(|report| {
            let true_rpm = truths[report.machine_index];
            let detection_failed = report.contributing == 0;
            let fused_rpm = if detection_failed { 0.0 } else { report.fused_rpm };
            let abs_error_rpm = (fused_rpm - true_rpm).abs();
            TrialResult {
                scenario_name: scenario.name.clone(),
                sweep_param: point.map(|(p, _)| p),
                sweep_value: point.map(|(_, v)| v),
                trial_index: trial,
                machine_index: report.machine_index,
                true_rpm,
                fused_rpm,
                abs_error_rpm,
                pct_error: 100.0 * abs_error_rpm / true_rpm,
                loc: report.loc,
                loc_ratio: report.loc_ratio,
                detection_failed,
                wall_time_ms,
            }
        })
        .collect())
}

/// Run a window-duration sweep with the fine stage forced off (or left
/// on, for the comparison case). Durations must lie in [1, 30] seconds.
pub fn run_coarse_window_sweep(scenario: &Scenario, fine_disabled: bool) -> Result<Vec<TrialResult>> {
    let Some(sweep) = &scenario.sweep else {
        return Err(Error::Domain(
            "run_coarse_window_sweep requires a window_duration sweep".into(),
        ));
    };
    if sweep.parameter != SweepParameter::WindowDuration {
        return Err(Error::Domain(format!(
            "run_coarse_window_sweep requires a window_duration sweep, got {}",
            sweep.parameter.name()
        )));
    }
    if sweep.values.iter().any(|&v| !(1.0..=30.0).contains(&v)) {
        return Err(Error::Domain(
            "window_duration sweep values must lie in [1, 30] seconds".into(),
        ));
    }
    let mut scenario = scenario.clone();
    scenario.fine_enabled = !fine_disabled;
    run_scenario(&scenario)
}

/// Run an SNR sweep once per threshold setting, returning the rows grouped
/// by threshold.
pub fn run_snr_sweep(
    scenario: &Scenario,
    thresholds: &[f64],
) -> Result<Vec<(f64, Vec<TrialResult>)>> {
    match &scenario.sweep {
        Some(sweep) if sweep.parameter == SweepParameter::SnrDb => {}
        _ => {
            return Err(Error::Domain(
                "run_snr_sweep requires an snr_db sweep".into(),
            ))
        }
    }
    if thresholds.is_empty() {
        return Err(Error::Domain("at least one threshold is required".into()));
    }
    let mut out = Vec::with_capacity(thresholds.len());
    for &threshold in thresholds {
        let mut sc = scenario.clone();
        sc.threshold = threshold;
        out.push((threshold, run_scenario(&sc)?));
    }
    Ok(out)
}

// ── Builtin scenarios ────────────────────────────────────────────────

/// Linear magnitude for a dBm-style threshold, with 0 dBm = magnitude 1.
pub fn threshold_from_dbm(dbm: f64) -> f64 {
    10f64.powf(dbm / 20.0)
}

pub fn builtin_names() -> Vec<&'static str> {
    BUILTINS.iter().map(|(name, _)| *name).collect()
}

pub fn builtin_description(name: &str) -> Option<&'static str> {
    BUILTINS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, description)| *description)
}

const BUILTINS: &[(&str, &str)] = &[
    (
        "single_machine",
        "one machine at 2303 rpm, 60 subcarriers, noiseless; fused estimates within 1 rpm",
    ),
    (
        "three_machines",
        "three machines with disjoint harmonic families, 10 subcarriers, noiseless",
    ),
    (
        "narrowband_sweep",
        "subcarrier count swept 1..60 with a narrowband cluster corrupting every 5th subcarrier",
    ),
    (
        "window_sweep",
        "coarse-only estimation at window durations 1..30 s (fine stage disabled)",
    ),
    (
        "snr_sweep",
        "background-noise sweep at the high threshold setting, 10 subcarriers",
    ),
    (
        "interference_similar",
        "interfering machine within 10 rpm of the target, single-machine extraction",
    ),
    (
        "interference_different",
        "interfering machine at a different speed, resolved with machine_count = 2",
    ),
];

/// Construct a builtin scenario by name.
pub fn builtin(name: &str) -> Option<Scenario> {
    let machine = |rpm: f64| MachineSpec::from_rpm(rpm, 1).expect("builtin machine");
    let plan = |count: usize| SubcarrierPlan::new(count).expect("builtin plan");
    let awgn = |snr_db: f64, rng_seed: u64| NoiseSource {
        spec: NoiseSpec::Awgn {
            snr_db,
            reference_bandwidth_hz: None,
            rng_seed,
        },
        targets: SubcarrierTargets::All,
    };

    let scenario = match name {
        "single_machine" => Scenario {
            trials: 10,
            rng_seed: 7,
            ..Scenario::single("single_machine", machine(2303.0), plan(60), 0.01)
        },
        "three_machines" => Scenario {
            name: "three_machines".into(),
            machines: vec![machine(1207.0), machine(2722.0), machine(4543.0)],
            plan: plan(10),
            noise: Vec::new(),
            threshold: 0.01,
            machine_count: 3,
            fine_enabled: true,
            coarse: CoarseConfig::default(),
            sweep: None,
            trials: 5,
            rng_seed: 11,
        },
        "narrowband_sweep" => Scenario {
            noise: vec![NoiseSource {
                spec: NoiseSpec::Narrowband {
                    center_hz: 19.2,
                    bandwidth_hz: 0.5,
                    power: 10.0,
                    rng_seed: 40,
                },
                targets: SubcarrierTargets::Stride(5),
            }],
            sweep: Some(Sweep {
                parameter: SweepParameter::SubcarrierCount,
                values: vec![1.0, 5.0, 15.0, 30.0, 60.0],
            }),
            trials: 5,
            rng_seed: 13,
            ..Scenario::single("narrowband_sweep", machine(2303.0), plan(60), 0.01)
        },
        "window_sweep" => Scenario {
            fine_enabled: false,
            sweep: Some(Sweep {
                parameter: SweepParameter::WindowDuration,
                values: vec![1.0, 2.0, 5.0, 10.0, 18.0, 30.0],
            }),
            trials: 3,
            rng_seed: 17,
            ..Scenario::single("window_sweep", machine(2303.0), plan(4), 0.01)
        },
        "snr_sweep" => Scenario {
            noise: vec![awgn(10.0, 50)],
            sweep: Some(Sweep {
                parameter: SweepParameter::SnrDb,
                values: vec![0.0, 5.0, 10.0, 15.0],
            }),
            trials: 100,
            rng_seed: 23,
            ..Scenario::single(
                "snr_sweep",
                machine(2303.0),
                plan(10),
                threshold_from_dbm(-5.0),
            )
        },
        "interference_similar" => Scenario {
            name: "interference_similar".into(),
            machines: vec![machine(1227.0), machine(1237.0)],
            plan: plan(10),
            noise: vec![awgn(10.0, 60)],
            threshold: threshold_from_dbm(-5.0),
            machine_count: 1,
            fine_enabled: true,
            coarse: CoarseConfig::default(),
            sweep: Some(Sweep {
                parameter: SweepParameter::SnrDb,
                values: vec![0.0, 5.0, 10.0, 15.0],
            }),
            trials: 20,
            rng_seed: 29,
        },
        "interference_different" => Scenario {
            name: "interference_different".into(),
            machines: vec![machine(1227.0), machine(2242.0)],
            plan: plan(10),
            noise: vec![awgn(15.0, 70)],
            threshold: threshold_from_dbm(-5.0),
            machine_count: 2,
            fine_enabled: true,
            coarse: CoarseConfig::default(),
            sweep: Some(Sweep {
                parameter: SweepParameter::SnrDb,
                values: vec![5.0, 10.0, 15.0],
            }),
            trials: 20,
            rng_seed: 31,
        },
        _ => return None,
    };
    Some(scenario)
}
