//! Per-subcarrier speed estimation.
//!
//! Coarse stage: group supra-threshold peaks into harmonic families,
//! lowest fundamental first, and read each family's fundamental bin.
//! Fine stage: recover the sub-bin offset of the fundamental from the
//! amplitude split between its two adjacent bins. For a rectangular
//! window the leakage magnitude at a bin a distance `m` bins from the
//! tone is proportional to `|sin(pi*m)|/(pi*|m|)`; because
//! `sin(pi*m) = sin(pi*(1-m))`, the two neighbors of the tone carry
//! magnitudes inversely proportional to their distances, so the
//! amplitude-weighted split `A_f/(A_c + A_f)` is the fractional offset.

use std::collections::BTreeMap;
use std::f64::consts::TAU;

use crate::error::{Error, Result};
use crate::spectrum::{locate_peaks, PeakSet, Spectrum};

/// Rotation speed in rpm from a Doppler shift: `60*delta_f/l`.
pub fn rpm_from_doppler(delta_f_hz: f64, charge: i32) -> Result<f64> {
    if charge < 1 {
        return Err(Error::Domain(format!(
            "topological charge must be >= 1, got {charge}"
        )));
    }
    Ok(60.0 * delta_f_hz / charge as f64)
}

/// Rotational Doppler shift in Hz from an angular speed: `omega*l/(2*pi)`.
/// A zero charge is allowed and produces no shift.
pub fn doppler_from_rotation(omega_rad_s: f64, charge: i32) -> Result<f64> {
    if charge < 0 {
        return Err(Error::Domain(format!(
            "topological charge must be >= 0, got {charge}"
        )));
    }
    Ok(omega_rad_s * charge as f64 / TAU)
}

/// Knobs of the harmonic grouping pass.
#[derive(Debug, Clone, PartialEq)]
pub struct CoarseConfig {
    /// Highest harmonic index searched when collecting family members.
    pub max_harmonic: usize,
    /// Minimum members (fundamental included) for a family to validate.
    pub min_members: usize,
    /// Flat matching tolerance in bins; `None` uses `max(1, ceil(k/2))`,
    /// which covers the worst-case displacement of the k-th harmonic when
    /// the fundamental itself is quantized by up to half a bin.
    pub flat_tolerance_bins: Option<usize>,
}

impl Default for CoarseConfig {
    fn default() -> Self {
        CoarseConfig {
            max_harmonic: 8,
            min_members: 2,
            flat_tolerance_bins: None,
        }
    }
}

impl CoarseConfig {
    fn tolerance(&self, k: usize) -> usize {
        self.flat_tolerance_bins.unwrap_or_else(|| k.div_ceil(2).max(1))
    }
}

/// Peaks attributed to one machine: a fundamental bin and every peak that
/// matched one of its harmonic slots. `isolated` marks a single leftover
/// peak promoted to fill the requested machine count; its coarse reading
/// is low-confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicFamily {
    pub fundamental_bin: usize,
    pub member_bins: Vec<usize>,
    pub member_magnitudes: Vec<f64>,
    pub isolated: bool,
}

/// Stage the estimate reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimateStage {
    CoarseOnly,
    Fine,
}

/// One per-subcarrier, per-machine speed estimate.
///
/// `coarse_hz` is the fundamental bin scaled by the bin width (an integer
/// number of Hz when the window lasts one second); for coarse-only
/// estimates `fine_hz` equals it. `rpm` is `60*fine_hz/l`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeedEstimate {
    pub machine_index: usize,
    pub subcarrier_index: usize,
    pub coarse_bin: usize,
    pub coarse_hz: f64,
    pub fine_hz: f64,
    pub rpm: f64,
    pub stage: EstimateStage,
    pub low_confidence: bool,
}

/// Group peaks into up to `machine_count` harmonic families with the
/// default configuration. See [`coarse_estimate_with`].
pub fn coarse_estimate(peaks: &PeakSet, machine_count: usize) -> Vec<HarmonicFamily> {
    coarse_estimate_with(peaks, machine_count, &CoarseConfig::default())
}

/// Group peaks into harmonic families, lowest candidate fundamental
/// first.
///
/// Starting from the lowest remaining peak, every peak within tolerance
/// of one of its integer multiples joins the family; the family validates
/// with at least `min_members` members, otherwise the candidate is set
/// aside. Validated members are removed and the scan repeats for the
/// next-lowest peak until `machine_count` families exist. If fewer
/// validated families than machines were found, set-aside single peaks
/// are promoted (ascending) as isolated, low-confidence families. Fewer
/// families than requested signals partial detection.
pub fn coarse_estimate_with(
    peaks: &PeakSet,
    machine_count: usize,
    config: &CoarseConfig,
) -> Vec<HarmonicFamily> {
    let mut remaining: BTreeMap<usize, f64> = peaks
        .peaks()
        .iter()
        .map(|p| (p.bin, p.magnitude))
        .collect();
    let mut families: Vec<HarmonicFamily> = Vec::new();
    let mut set_aside: Vec<(usize, f64)> = Vec::new();

    while families.len() < machine_count && !remaining.is_empty() {
        let fundamental = *remaining.keys().next().unwrap();
        let mut members: Vec<(usize, f64)> = Vec::new();
        for k in 1..=config.max_harmonic {
            let center = k * fundamental;
            let tol = config.tolerance(k);
            for (&bin, &mag) in remaining.range(center.saturating_sub(tol)..=center + tol) {
                members.push((bin, mag));
            }
        }
        members.sort_by_key(|(bin, _)| *bin);
        members.dedup_by_key(|(bin, _)| *bin);

        if members.len() >= config.min_members {
            for (bin, _) in &members {
                remaining.remove(bin);
            }
            families.push(HarmonicFamily {
                fundamental_bin: fundamental,
                member_bins: members.iter().map(|(b, _)| *b).collect(),
                member_magnitudes: members.iter().map(|(_, m)| *m).collect(),
                isolated: false,
            });
        } else {
            let mag = remaining.remove(&fundamental).unwrap();
            set_aside.push((fundamental, mag));
        }
    }

    for (bin, mag) in set_aside {
        if families.len() >= machine_count {
            break;
        }
        families.push(HarmonicFamily {
            fundamental_bin: bin,
            member_bins: vec![bin],
            member_magnitudes: vec![mag],
            isolated: true,
        });
    }
    families
}

/// Refine a family's fundamental to sub-bin resolution and convert it to
/// an estimate.
///
/// With `f_c` the fundamental bin, the larger of the two adjacent bins is
/// taken as `f_f` (ties resolve toward `f_c + 1`) and the fractional
/// offset is `A_f/(A_c + A_f)`, applied toward `f_f`. At the spectrum
/// edges (bin 1, whose lower neighbor is the excluded DC bin, or the last
/// bin) only the single existing neighbor is used. A degenerate
/// neighborhood (`A_c + A_f == 0` or no neighbor at all) falls back to
/// the coarse reading.
pub fn fine_estimate(
    spectrum: &Spectrum,
    family: &HarmonicFamily,
    charge: i32,
) -> Result<SpeedEstimate> {
    if charge < 1 {
        return Err(Error::Domain(format!(
            "topological charge must be >= 1, got {charge}"
        )));
    }
    let f_c = family.fundamental_bin;
    if f_c < 1 || f_c > spectrum.max_bin() {
        return Err(Error::Domain(format!(
            "fundamental bin {f_c} outside the spectrum (1..={})",
            spectrum.max_bin()
        )));
    }
    let bin_width = spectrum.bin_width();
    let coarse_hz = f_c as f64 * bin_width;

    let a_c = spectrum.magnitude(f_c);
    let left = (f_c >= 2).then(|| spectrum.magnitude(f_c - 1));
    let right = (f_c < spectrum.max_bin()).then(|| spectrum.magnitude(f_c + 1));
    let picked = match (left, right) {
        (Some(l), Some(r)) => {
            if r >= l {
                Some((r, 1.0))
            } else {
                Some((l, -1.0))
            }
        }
        (Some(l), None) => Some((l, -1.0)),
        (None, Some(r)) => Some((r, 1.0)),
        (None, None) => None,
    };

    let (fine_hz, stage) = match picked {
        Some((a_f, direction)) if a_c + a_f > 0.0 => {
            let delta = a_f / (a_c + a_f);
            ((f_c as f64 + direction * delta) * bin_width, EstimateStage::Fine)
        }
        _ => (coarse_hz, EstimateStage::CoarseOnly),
    };

    Ok(SpeedEstimate {
        machine_index: 0,
        subcarrier_index: spectrum.subcarrier_index(),
        coarse_bin: f_c,
        coarse_hz,
        fine_hz,
        rpm: rpm_from_doppler(fine_hz, charge)?,
        stage,
        low_confidence: family.isolated,
    })
}

/// Full extraction settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtractionConfig {
    pub machine_count: usize,
    pub threshold: f64,
    pub topological_charge: i32,
    pub fine_enabled: bool,
    pub coarse: CoarseConfig,
}

impl ExtractionConfig {
    pub fn new(machine_count: usize, threshold: f64, charge: i32) -> Self {
        ExtractionConfig {
            machine_count,
            threshold,
            topological_charge: charge,
            fine_enabled: true,
            coarse: CoarseConfig::default(),
        }
    }
}

/// Locate peaks, group them into families, refine each fundamental and
/// return up to `machine_count` estimates sorted ascending by rpm;
/// machines are indexed in that order. An empty list means no peaks
/// survived the threshold.
pub fn extract_speeds(
    spectrum: &Spectrum,
    machine_count: usize,
    threshold: f64,
    charge: i32,
) -> Result<Vec<SpeedEstimate>> {
    extract_speeds_with(spectrum, &ExtractionConfig::new(machine_count, threshold, charge))
}

/// [`extract_speeds`] with explicit configuration (harmonic search knobs,
/// fine stage toggle).
pub fn extract_speeds_with(
    spectrum: &Spectrum,
    config: &ExtractionConfig,
) -> Result<Vec<SpeedEstimate>> {
    if config.machine_count < 1 {
        return Err(Error::Domain("machine count must be >= 1".into()));
    }
    let peaks = locate_peaks(spectrum, config.threshold)?;
    let families = coarse_estimate_with(&peaks, config.machine_count, &config.coarse);

    let mut estimates = Vec::with_capacity(families.len());
    for family in &families {
        let mut estimate = if config.fine_enabled {
            fine_estimate(spectrum, family, config.topological_charge)?
        } else {
            let coarse_hz = family.fundamental_bin as f64 * spectrum.bin_width();
            SpeedEstimate {
                machine_index: 0,
                subcarrier_index: spectrum.subcarrier_index(),
                coarse_bin: family.fundamental_bin,
                coarse_hz,
                fine_hz: coarse_hz,
                rpm: rpm_from_doppler(coarse_hz, config.topological_charge)?,
                stage: EstimateStage::CoarseOnly,
                low_confidence: family.isolated,
            }
        };
        estimate.machine_index = 0;
        estimates.push(estimate);
    }

    estimates.sort_by(|a, b| {
        a.rpm
            .partial_cmp(&b.rpm)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.coarse_bin.cmp(&b.coarse_bin))
    });
    for (index, estimate) in estimates.iter_mut().enumerate() {
        estimate.machine_index = index;
    }
    Ok(estimates)
}
