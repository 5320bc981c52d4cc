//! Scenario files.
//!
//! Scenarios are stored as TOML with every unit spelled out in the key
//! name (`rotation_speed_rpm`, `window_duration_s`, ...). Unknown keys
//! are rejected. The schema is versioned; the parser refuses versions it
//! does not know rather than guessing. `parse_scenario` and
//! `serialize_scenario` round-trip exactly: speeds are carried in rpm end
//! to end and converted to rad/s only inside the computation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{NoiseSource, Scenario, SubcarrierTargets, Sweep, SweepParameter};
use crate::signal::{
    MachineSpec, NoiseSpec, SubcarrierPlan, DEFAULT_AXIAL_OFFSET, DEFAULT_CARRIER_FREQUENCY,
    DEFAULT_RADIAL_OFFSET, DEFAULT_REFLECTION, DEFAULT_SAMPLE_RATE, DEFAULT_SUBCARRIER_BANDWIDTH,
    DEFAULT_TOTAL_BAND, DEFAULT_TX_RX_SEPARATION, DEFAULT_WINDOW_DURATION,
};
use crate::speed::CoarseConfig;

/// Current scenario file schema version.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub schema_version: u32,
    pub scenario: ScenarioDoc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioDoc {
    pub name: String,
    pub machines: Vec<MachineDoc>,
    #[serde(default)]
    pub plan: PlanDoc,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub noise: Vec<NoiseDoc>,
    /// Peak threshold in linear magnitude; exactly one of `threshold`
    /// and `threshold_dbm` must be present (0 dBm = magnitude 1.0).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threshold_dbm: Option<f64>,
    /// Machines to separate (M); defaults to the machine list length.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub machine_count: Option<usize>,
    #[serde(default = "default_true")]
    pub fine_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coarse: Option<CoarseDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepDoc>,
    #[serde(default = "default_trials")]
    pub trials: u32,
    #[serde(default)]
    pub rng_seed: u64,
}

fn default_true() -> bool {
    true
}

fn default_trials() -> u32 {
    100
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineDoc {
    pub rotation_speed_rpm: f64,
    #[serde(default = "default_charge")]
    pub topological_charge: i32,
    #[serde(default = "default_reflection")]
    pub reflection_coefficient: f64,
    #[serde(default = "default_radial")]
    pub radial_offset_m: f64,
    #[serde(default = "default_axial")]
    pub axial_offset_m: f64,
    #[serde(default = "default_separation")]
    pub tx_rx_separation_m: f64,
}

fn default_charge() -> i32 {
    1
}
fn default_reflection() -> f64 {
    DEFAULT_REFLECTION
}
fn default_radial() -> f64 {
    DEFAULT_RADIAL_OFFSET
}
fn default_axial() -> f64 {
    DEFAULT_AXIAL_OFFSET
}
fn default_separation() -> f64 {
    DEFAULT_TX_RX_SEPARATION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanDoc {
    pub subcarrier_count: usize,
    pub subcarrier_bandwidth_hz: f64,
    pub total_band_hz: f64,
    pub carrier_frequency_hz: f64,
    pub sample_rate_hz: f64,
    pub window_duration_s: f64,
}

impl Default for PlanDoc {
    fn default() -> Self {
        PlanDoc {
            subcarrier_count: 60,
            subcarrier_bandwidth_hz: DEFAULT_SUBCARRIER_BANDWIDTH,
            total_band_hz: DEFAULT_TOTAL_BAND,
            carrier_frequency_hz: DEFAULT_CARRIER_FREQUENCY,
            sample_rate_hz: DEFAULT_SAMPLE_RATE,
            window_duration_s: DEFAULT_WINDOW_DURATION,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NoiseDoc {
    Awgn {
        snr_db: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        reference_bandwidth_hz: Option<f64>,
        #[serde(default)]
        rng_seed: u64,
    },
    Narrowband {
        center_frequency_hz: f64,
        bandwidth_hz: f64,
        power: f64,
        #[serde(default)]
        rng_seed: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subcarrier_indices: Option<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        subcarrier_stride: Option<usize>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoarseDoc {
    #[serde(default = "default_max_harmonic")]
    pub max_harmonic: usize,
    #[serde(default = "default_min_members")]
    pub min_members: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flat_tolerance_bins: Option<usize>,
}

fn default_max_harmonic() -> usize {
    CoarseConfig::default().max_harmonic
}
fn default_min_members() -> usize {
    CoarseConfig::default().min_members
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDoc {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

/// Parse and validate a scenario document.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config {
        path: String::new(),
        message: e.to_string(),
    })?;
    file.into_scenario()
}

/// Serialize a scenario back into its file form.
///
/// TOML integers are signed 64-bit, so RNG seeds above `i64::MAX` cannot
/// be stored in a scenario file and are rejected here.
pub fn serialize_scenario(scenario: &Scenario) -> Result<String> {
    let seed_ok = |seed: u64| seed <= i64::MAX as u64;
    let mut seeds = vec![("scenario.rng_seed".to_string(), scenario.rng_seed)];
    for (i, source) in scenario.noise.iter().enumerate() {
        let seed = match &source.spec {
            NoiseSpec::Awgn { rng_seed, .. } => *rng_seed,
            NoiseSpec::Narrowband { rng_seed, .. } => *rng_seed,
        };
        seeds.push((format!("scenario.noise[{i}].rng_seed"), seed));
    }
    if let Some((path, seed)) = seeds.into_iter().find(|(_, s)| !seed_ok(*s)) {
        return Err(Error::Config {
            path,
            message: format!("seed {seed} exceeds the file format's integer range (max 2^63-1)"),
        });
    }
    let file = ScenarioFile::from_scenario(scenario);
    toml::to_string_pretty(&file).map_err(|e| Error::Config {
        path: String::new(),
        message: e.to_string(),
    })
}

impl ScenarioFile {
    pub fn into_scenario(self) -> Result<Scenario> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config {
                path: "schema_version".into(),
                message: format!(
                    "version {} is not supported (this build reads version {SCHEMA_VERSION})",
                    self.schema_version
                ),
            });
        }
        let doc = self.scenario;

        let mut machines = Vec::with_capacity(doc.machines.len());
        for (i, m) in doc.machines.iter().enumerate() {
            let spec = MachineSpec::from_rpm(m.rotation_speed_rpm, m.topological_charge)
                .and_then(|s| s.with_reflection(m.reflection_coefficient))
                .and_then(|s| {
                    s.with_geometry(m.radial_offset_m, m.axial_offset_m, m.tx_rx_separation_m)
                })
                .map_err(|e| Error::Config {
                    path: format!("scenario.machines[{i}]"),
                    message: e.to_string(),
                })?;
            machines.push(spec);
        }

        let p = &doc.plan;
        let plan = SubcarrierPlan::new(p.subcarrier_count)
            .and_then(|pl| pl.with_band(p.subcarrier_bandwidth_hz, p.total_band_hz))
            .and_then(|pl| pl.with_carrier_frequency(p.carrier_frequency_hz))
            .and_then(|pl| pl.with_sample_rate(p.sample_rate_hz))
            .and_then(|pl| pl.with_window_duration(p.window_duration_s))
            .map_err(|e| Error::Config {
                path: "scenario.plan".into(),
                message: e.to_string(),
            })?;

        let threshold = match (doc.threshold, doc.threshold_dbm) {
            (Some(linear), None) => linear,
            (None, Some(dbm)) => crate::harness::threshold_from_dbm(dbm),
            (Some(_), Some(_)) => {
                return Err(Error::Config {
                    path: "scenario.threshold".into(),
                    message: "set either threshold or threshold_dbm, not both".into(),
                })
            }
            (None, None) => {
                return Err(Error::Config {
                    path: "scenario.threshold".into(),
                    message: "one of threshold or threshold_dbm is required".into(),
                })
            }
        };

        let mut noise = Vec::with_capacity(doc.noise.len());
        for (i, n) in doc.noise.iter().enumerate() {
            noise.push(noise_from_doc(n, i)?);
        }

        let scenario = Scenario {
            name: doc.name,
            machine_count: doc.machine_count.unwrap_or(machines.len()),
            machines,
            plan,
            noise,
            threshold,
            fine_enabled: doc.fine_enabled,
            coarse: doc
                .coarse
                .map(|c| CoarseConfig {
                    max_harmonic: c.max_harmonic,
                    min_members: c.min_members,
                    flat_tolerance_bins: c.flat_tolerance_bins,
                })
                .unwrap_or_default(),
            sweep: doc.sweep.map(|s| Sweep {
                parameter: s.parameter,
                values: s.values,
            }),
            trials: doc.trials,
            rng_seed: doc.rng_seed,
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_scenario(scenario: &Scenario) -> Self {
        let machines = scenario
            .machines
            .iter()
            .map(|m| MachineDoc {
                rotation_speed_rpm: m.rpm(),
                topological_charge: m.topological_charge(),
                reflection_coefficient: m.reflection_coefficient(),
                radial_offset_m: m.radial_offset(),
                axial_offset_m: m.axial_offset(),
                tx_rx_separation_m: m.tx_rx_separation(),
            })
            .collect();
        let plan = PlanDoc {
            subcarrier_count: scenario.plan.count(),
            subcarrier_bandwidth_hz: scenario.plan.subcarrier_bandwidth(),
            total_band_hz: scenario.plan.total_band(),
            carrier_frequency_hz: scenario.plan.carrier_frequency(),
            sample_rate_hz: scenario.plan.sample_rate(),
            window_duration_s: scenario.plan.window_duration(),
        };
        let noise = scenario.noise.iter().map(noise_to_doc).collect();
        let coarse = if scenario.coarse == CoarseConfig::default() {
            None
        } else {
            Some(CoarseDoc {
                max_harmonic: scenario.coarse.max_harmonic,
                min_members: scenario.coarse.min_members,
                flat_tolerance_bins: scenario.coarse.flat_tolerance_bins,
            })
        };
        ScenarioFile {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioDoc {
                name: scenario.name.clone(),
                machines,
                plan,
                noise,
                threshold: Some(scenario.threshold),
                threshold_dbm: None,
                machine_count: Some(scenario.machine_count),
                fine_enabled: scenario.fine_enabled,
                coarse,
                sweep: scenario.sweep.as_ref().map(|s| SweepDoc {
                    parameter: s.parameter,
                    values: s.values.clone(),
                }),
                trials: scenario.trials,
                rng_seed: scenario.rng_seed,
            },
        }
    }
}

fn noise_from_doc(doc: &NoiseDoc, index: usize) -> Result<NoiseSource> {
    match doc {
        NoiseDoc::Awgn {
            snr_db,
            reference_bandwidth_hz,
            rng_seed,
        } => Ok(NoiseSource {
            spec: NoiseSpec::Awgn {
                snr_db: *snr_db,
                reference_bandwidth_hz: *reference_bandwidth_hz,
                rng_seed: *rng_seed,
            },
            targets: SubcarrierTargets::All,
        }),
        NoiseDoc::Narrowband {
            center_frequency_hz,
            bandwidth_hz,
            power,
            rng_seed,
            subcarrier_indices,
            subcarrier_stride,
        } => {
            let targets = match (subcarrier_indices, subcarrier_stride) {
                (Some(_), Some(_)) => {
                    return Err(Error::Config {
                        path: format!("scenario.noise[{index}]"),
                        message: "set either subcarrier_indices or subcarrier_stride, not both"
                            .into(),
                    })
                }
                (Some(indices), None) => SubcarrierTargets::Indices(indices.clone()),
                (None, Some(stride)) => {
                    if *stride == 0 {
                        return Err(Error::Config {
                            path: format!("scenario.noise[{index}].subcarrier_stride"),
                            message: "must be >= 1".into(),
                        });
                    }
                    SubcarrierTargets::Stride(*stride)
                }
                (None, None) => SubcarrierTargets::All,
            };
            Ok(NoiseSource {
                spec: NoiseSpec::Narrowband {
                    center_hz: *center_frequency_hz,
                    bandwidth_hz: *bandwidth_hz,
                    power: *power,
                    rng_seed: *rng_seed,
                },
                targets,
            })
        }
    }
}

fn noise_to_doc(source: &NoiseSource) -> NoiseDoc {
    match &source.spec {
        NoiseSpec::Awgn {
            snr_db,
            reference_bandwidth_hz,
            rng_seed,
        } => NoiseDoc::Awgn {
            snr_db: *snr_db,
            reference_bandwidth_hz: *reference_bandwidth_hz,
            rng_seed: *rng_seed,
        },
        NoiseSpec::Narrowband {
            center_hz,
            bandwidth_hz,
            power,
            rng_seed,
        } => {
            let (indices, stride) = match &source.targets {
                SubcarrierTargets::All => (None, None),
                SubcarrierTargets::Indices(list) => (Some(list.clone()), None),
                SubcarrierTargets::Stride(n) => (None, Some(*n)),
            };
            NoiseDoc::Narrowband {
                center_frequency_hz: *center_hz,
                bandwidth_hz: *bandwidth_hz,
                power: *power,
                rng_seed: *rng_seed,
                subcarrier_indices: indices,
                subcarrier_stride: stride,
            }
        }
    }
}
