//! Complex-baseband synthesis of the signal scattered by one or more
//! rotating machines.
//!
//! Each machine contributes a unit-modulus phasor whose phase carries two
//! time-dependent terms: a linear term at the rotational Doppler shift
//! `l*omega`, and a geometric path term through the transmitter/receiver
//! separation that oscillates with `cos(omega*t)`. The oscillating path
//! length is the sole source of harmonic content; nothing is injected by
//! hand. Additive noise (wideband Gaussian or a narrowband tone cluster)
//! is layered on top, seeded for reproducibility.

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::{PI, TAU};

use crate::error::{Error, Result};

/// Speed of light in m/s, used for wave-vector magnitudes.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const DEFAULT_REFLECTION: f64 = 1.0;
pub const DEFAULT_RADIAL_OFFSET: f64 = 0.03;
pub const DEFAULT_AXIAL_OFFSET: f64 = 1.0;
pub const DEFAULT_TX_RX_SEPARATION: f64 = 0.02;

pub const DEFAULT_SUBCARRIER_BANDWIDTH: f64 = 1_000.0;
pub const DEFAULT_TOTAL_BAND: f64 = 3.0e6;
pub const DEFAULT_CARRIER_FREQUENCY: f64 = 5.525e9;
pub const DEFAULT_SAMPLE_RATE: f64 = 2_048.0;
pub const DEFAULT_WINDOW_DURATION: f64 = 1.0;

/// Physical and rotational parameters of one rotating machine.
///
/// The rotation speed is stored in rpm (the user-facing unit) and exposed
/// in rad/s for computation, so serializing a machine never loses the
/// value it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct MachineSpec {
    rotation_speed_rpm: f64,
    topological_charge: i32,
    reflection_coefficient: f64,
    radial_offset: f64,
    axial_offset: f64,
    tx_rx_separation: f64,
}

impl MachineSpec {
    /// Build a machine from an angular speed in rad/s with default
    /// reflection and geometry.
    pub fn new(rotation_speed: f64, topological_charge: i32) -> Result<Self> {
        Self::from_rpm(rotation_speed * 30.0 / PI, topological_charge)
    }

    /// Build a machine from a rotation speed in rpm with default
    /// reflection and geometry.
    pub fn from_rpm(rpm: f64, topological_charge: i32) -> Result<Self> {
        if rpm <= 0.0 || !rpm.is_finite() {
            return Err(Error::InvalidMachine {
                field: "rotation_speed",
                message: format!("must be finite and > 0, got {rpm} rpm"),
            });
        }
        if topological_charge < 1 {
            return Err(Error::InvalidMachine {
                field: "topological_charge",
                message: format!("must be an integer >= 1, got {topological_charge}"),
            });
        }
        Ok(MachineSpec {
            rotation_speed_rpm: rpm,
            topological_charge,
            reflection_coefficient: DEFAULT_REFLECTION,
            radial_offset: DEFAULT_RADIAL_OFFSET,
            axial_offset: DEFAULT_AXIAL_OFFSET,
            tx_rx_separation: DEFAULT_TX_RX_SEPARATION,
        })
    }

    /// Replace the reflection coefficient magnitude (dimensionless, >= 0).
    pub fn with_reflection(mut self, gamma: f64) -> Result<Self> {
        if gamma < 0.0 || !gamma.is_finite() {
            return Err(Error::InvalidMachine {
                field: "reflection_coefficient",
                message: format!("must be finite and >= 0, got {gamma}"),
            });
        }
        self.reflection_coefficient = gamma;
        Ok(self)
    }

    /// Replace the geometry: radial offset R, axial offset D_z and
    /// transmitter/receiver separation d_r, all in meters and >= 0.
    pub fn with_geometry(mut self, radial: f64, axial: f64, separation: f64) -> Result<Self> {
        for (field, v) in [
            ("radial_offset", radial),
            ("axial_offset", axial),
            ("tx_rx_separation", separation),
        ] {
            if v < 0.0 || !v.is_finite() {
                return Err(Error::InvalidMachine {
                    field,
                    message: format!("must be finite and >= 0, got {v}"),
                });
            }
        }
        self.radial_offset = radial;
        self.axial_offset = axial;
        self.tx_rx_separation = separation;
        Ok(self)
    }

    /// Angular speed in rad/s.
    pub fn rotation_speed(&self) -> f64 {
        self.rotation_speed_rpm * PI / 30.0
    }

    /// Rotation speed in rpm.
    pub fn rpm(&self) -> f64 {
        self.rotation_speed_rpm
    }

    pub fn topological_charge(&self) -> i32 {
        self.topological_charge
    }

    pub fn reflection_coefficient(&self) -> f64 {
        self.reflection_coefficient
    }

    pub fn radial_offset(&self) -> f64 {
        self.radial_offset
    }

    pub fn axial_offset(&self) -> f64 {
        self.axial_offset
    }

    pub fn tx_rx_separation(&self) -> f64 {
        self.tx_rx_separation
    }

    /// Fundamental rotational Doppler shift `l*omega/(2*pi)` in Hz.
    pub fn doppler_hz(&self) -> f64 {
        self.topological_charge as f64 * self.rotation_speed_rpm / 60.0
    }
}

/// Number, spacing and band placement of the narrowband sensing
/// subcarriers, plus the per-subcarrier baseband sampling parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierPlan {
    count: usize,
    subcarrier_bandwidth: f64,
    total_band: f64,
    carrier_frequency: f64,
    sample_rate: f64,
    window_duration: f64,
}

impl SubcarrierPlan {
    /// A plan with `count` subcarriers and default bandwidth, band,
    /// carrier, sample rate and window duration.
    pub fn new(count: usize) -> Result<Self> {
        SubcarrierPlan {
            count,
            subcarrier_bandwidth: DEFAULT_SUBCARRIER_BANDWIDTH,
            total_band: DEFAULT_TOTAL_BAND,
            carrier_frequency: DEFAULT_CARRIER_FREQUENCY,
            sample_rate: DEFAULT_SAMPLE_RATE,
            window_duration: DEFAULT_WINDOW_DURATION,
        }
        .validated()
    }

    pub fn with_count(mut self, count: usize) -> Result<Self> {
        self.count = count;
        self.validated()
    }

    pub fn with_window_duration(mut self, seconds: f64) -> Result<Self> {
        self.window_duration = seconds;
        self.validated()
    }

    pub fn with_sample_rate(mut self, hz: f64) -> Result<Self> {
        self.sample_rate = hz;
        self.validated()
    }

    pub fn with_band(mut self, subcarrier_bandwidth: f64, total_band: f64) -> Result<Self> {
        self.subcarrier_bandwidth = subcarrier_bandwidth;
        self.total_band = total_band;
        self.validated()
    }

    pub fn with_carrier_frequency(mut self, hz: f64) -> Result<Self> {
        self.carrier_frequency = hz;
        self.validated()
    }

    fn validated(self) -> Result<Self> {
        if self.count < 1 {
            return Err(Error::InvalidPlan {
                field: "count",
                message: "at least one subcarrier is required".into(),
            });
        }
        for (field, v) in [
            ("subcarrier_bandwidth", self.subcarrier_bandwidth),
            ("total_band", self.total_band),
            ("carrier_frequency", self.carrier_frequency),
            ("sample_rate", self.sample_rate),
            ("window_duration", self.window_duration),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::InvalidPlan {
                    field,
                    message: format!("must be finite and > 0, got {v}"),
                });
            }
        }
        if self.count as f64 * self.subcarrier_bandwidth > self.total_band {
            return Err(Error::InvalidPlan {
                field: "count",
                message: format!(
                    "{} subcarriers of {} Hz exceed the {} Hz band",
                    self.count, self.subcarrier_bandwidth, self.total_band
                ),
            });
        }
        let samples = self.sample_rate * self.window_duration;
        if (samples - samples.round()).abs() > 1e-6 || samples.round() < 1.0 {
            return Err(Error::InvalidPlan {
                field: "window_duration",
                message: format!(
                    "sample_rate * window_duration must be a positive whole number of samples, got {samples}"
                ),
            });
        }
        Ok(self)
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn subcarrier_bandwidth(&self) -> f64 {
        self.subcarrier_bandwidth
    }

    pub fn total_band(&self) -> f64 {
        self.total_band
    }

    pub fn carrier_frequency(&self) -> f64 {
        self.carrier_frequency
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn window_duration(&self) -> f64 {
        self.window_duration
    }

    /// Frequency bin width of a window analyzed under this plan, 1/T_d.
    pub fn bin_width(&self) -> f64 {
        1.0 / self.window_duration
    }

    pub fn samples_per_window(&self) -> usize {
        (self.sample_rate * self.window_duration).round() as usize
    }

    /// RF center frequency of subcarrier `n`: the subcarriers are spread
    /// evenly across the total band, centered on the carrier.
    pub fn subcarrier_frequency(&self, n: usize) -> f64 {
        let step = self.total_band / self.count as f64;
        self.carrier_frequency - self.total_band / 2.0 + (n as f64 + 0.5) * step
    }

    /// Wave-vector magnitude `2*pi*f_n/c` of subcarrier `n`.
    pub fn wave_number(&self, n: usize) -> f64 {
        TAU * self.subcarrier_frequency(n) / SPEED_OF_LIGHT
    }
}

/// One sampled complex-baseband window for a single subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct BasebandWindow {
    samples: Vec<Complex64>,
    sample_rate: f64,
    subcarrier_index: usize,
}

impl BasebandWindow {
    pub fn new(samples: Vec<Complex64>, sample_rate: f64, subcarrier_index: usize) -> Self {
        BasebandWindow {
            samples,
            sample_rate,
            subcarrier_index,
        }
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn subcarrier_index(&self) -> usize {
        self.subcarrier_index
    }

    /// Mean power of the window, `mean(|s|^2)`.
    pub fn mean_power(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        self.samples.iter().map(|s| s.norm_sqr()).sum::<f64>() / self.samples.len() as f64
    }
}

/// Additive noise description. All randomness is drawn from a stream
/// seeded by `rng_seed`, so identical specs produce identical noise.
#[derive(Debug, Clone, PartialEq)]
pub enum NoiseSpec {
    /// Circular complex white Gaussian noise at a target SNR relative to
    /// the clean signal power of the window. The SNR is referenced to
    /// `reference_bandwidth_hz` (default: the full complex baseband
    /// bandwidth, i.e. the sample rate). A window with zero signal power
    /// uses unit reference power instead.
    Awgn {
        snr_db: f64,
        reference_bandwidth_hz: Option<f64>,
        rng_seed: u64,
    },
    /// Band-concentrated interference: a cluster of three tones at
    /// random offsets within `bandwidth_hz` of `center_hz`, scaled so the
    /// realized mean power equals `power` exactly.
    Narrowband {
        center_hz: f64,
        bandwidth_hz: f64,
        power: f64,
        rng_seed: u64,
    },
}

/// Per-machine constants hoisted out of the sample loop.
struct MachineTerms {
    gamma: f64,
    omega: f64,
    l_omega: f64,
    /// k * sqrt(R^2 + D_z^2), the static path phase.
    static_phase: f64,
    /// R^2 + D_z^2 + d_r^2, base of the oscillating path length.
    base_sq: f64,
    /// 2 * R * d_r, swing of the oscillating path length.
    swing: f64,
    wave_number: f64,
}

impl MachineTerms {
    fn new(machine: &MachineSpec, wave_number: f64) -> Self {
        let r = machine.radial_offset;
        let dz = machine.axial_offset;
        let dr = machine.tx_rx_separation;
        let omega = machine.rotation_speed();
        MachineTerms {
            gamma: machine.reflection_coefficient,
            omega,
            l_omega: machine.topological_charge as f64 * omega,
            static_phase: wave_number * (r * r + dz * dz).sqrt(),
            base_sq: r * r + dz * dz + dr * dr,
            swing: 2.0 * r * dr,
            wave_number,
        }
    }

    /// Scattered phasor of this machine at time `t`.
    fn sample(&self, t: f64) -> Complex64 {
        // base_sq - swing*cos >= (R - d_r)^2 + D_z^2 >= 0, so the sqrt is safe.
        let path = (self.base_sq - self.swing * (self.omega * t).cos()).sqrt();
        Complex64::from_polar(
            self.gamma,
            self.l_omega * t - self.static_phase - self.wave_number * path,
        )
    }
}

/// Synthesize the scattered baseband window of `machines` on one
/// subcarrier, optionally adding noise.
///
/// Rejects an empty machine list, an out-of-range subcarrier index, and
/// any machine whose fundamental Doppler shift exceeds the Nyquist
/// frequency of the plan (a charge of zero is already unrepresentable:
/// it would produce no rotational shift at all).
pub fn synthesize(
    machines: &[MachineSpec],
    plan: &SubcarrierPlan,
    subcarrier_index: usize,
    noise: Option<&NoiseSpec>,
) -> Result<BasebandWindow> {
    if machines.is_empty() {
        return Err(Error::Synthesis("machine list is empty".into()));
    }
    if subcarrier_index >= plan.count() {
        return Err(Error::Synthesis(format!(
            "subcarrier index {subcarrier_index} out of range for a plan with {} subcarriers",
            plan.count()
        )));
    }
    let fs = plan.sample_rate();
    for (i, machine) in machines.iter().enumerate() {
        if machine.doppler_hz() > fs / 2.0 {
            return Err(Error::Synthesis(format!(
                "machine {i}: fundamental {:.3} Hz exceeds the Nyquist frequency {:.3} Hz",
                machine.doppler_hz(),
                fs / 2.0
            )));
        }
    }

    let k = plan.wave_number(subcarrier_index);
    let terms: Vec<MachineTerms> = machines.iter().map(|m| MachineTerms::new(m, k)).collect();

    let n = plan.samples_per_window();
    let mut samples = vec![Complex64::new(0.0, 0.0); n];
    for (i, s) in samples.iter_mut().enumerate() {
        let t = i as f64 / fs;
        for m in &terms {
            *s += m.sample(t);
        }
    }

    let mut window = BasebandWindow::new(samples, fs, subcarrier_index);
    match noise {
        None => Ok(window),
        Some(NoiseSpec::Awgn {
            snr_db,
            reference_bandwidth_hz,
            rng_seed,
        }) => {
            apply_awgn(&mut window, *snr_db, *reference_bandwidth_hz, *rng_seed)?;
            Ok(window)
        }
        Some(nb @ NoiseSpec::Narrowband { .. }) => inject_narrowband(&window, nb),
    }
}

fn apply_awgn(
    window: &mut BasebandWindow,
    snr_db: f64,
    reference_bandwidth_hz: Option<f64>,
    rng_seed: u64,
) -> Result<()> {
    let fs = window.sample_rate;
    let bandwidth = reference_bandwidth_hz.unwrap_or(fs);
    if bandwidth <= 0.0 || bandwidth.is_nan() || bandwidth > fs {
        return Err(Error::InvalidNoise {
            field: "reference_bandwidth_hz",
            message: format!("must lie in (0, sample_rate], got {bandwidth}"),
        });
    }
    let signal_power = window.mean_power();
    let reference = if signal_power > 0.0 { signal_power } else { 1.0 };
    // Noise power inside the reference bandwidth equals reference/SNR;
    // the per-sample variance scales it to the full baseband.
    let variance = reference / 10f64.powf(snr_db / 10.0) * (fs / bandwidth);
    let sigma = (variance / 2.0).sqrt();
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::InvalidNoise {
        field: "snr_db",
        message: e.to_string(),
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    for s in &mut window.samples {
        *s += Complex64::new(normal.sample(&mut rng), normal.sample(&mut rng));
    }
    Ok(())
}

/// Add a narrowband tone cluster to a window.
///
/// Three tones at seed-determined offsets within `bandwidth_hz` of the
/// center, with seed-determined phases, scaled so the realized mean power
/// of the injected cluster equals `power` exactly. Zero power returns the
/// input unchanged.
pub fn inject_narrowband(window: &BasebandWindow, noise: &NoiseSpec) -> Result<BasebandWindow> {
    let NoiseSpec::Narrowband {
        center_hz,
        bandwidth_hz,
        power,
        rng_seed,
    } = noise
    else {
        return Err(Error::InvalidNoise {
            field: "kind",
            message: "inject_narrowband requires a narrowband spec".into(),
        });
    };
    let fs = window.sample_rate;
    if *bandwidth_hz < 0.0 || bandwidth_hz.is_nan() {
        return Err(Error::InvalidNoise {
            field: "bandwidth_hz",
            message: format!("must be >= 0, got {bandwidth_hz}"),
        });
    }
    if *power < 0.0 || power.is_nan() {
        return Err(Error::InvalidNoise {
            field: "power",
            message: format!("must be >= 0, got {power}"),
        });
    }
    if center_hz.abs() + bandwidth_hz / 2.0 >= fs / 2.0 {
        return Err(Error::InvalidNoise {
            field: "center_hz",
            message: format!(
                "cluster at {center_hz} Hz (+/- {} Hz) falls outside the representable band",
                bandwidth_hz / 2.0
            ),
        });
    }
    if *power == 0.0 {
        return Ok(window.clone());
    }

    let mut rng = ChaCha8Rng::seed_from_u64(*rng_seed);
    let half = bandwidth_hz / 2.0;
    let offsets: [f64; 3] = std::array::from_fn(|_| rng.random_range(-half..=half));
    let phases: [f64; 3] = std::array::from_fn(|_| rng.random_range(0.0..TAU));

    let n = window.samples.len();
    let mut cluster = vec![Complex64::new(0.0, 0.0); n];
    for (i, c) in cluster.iter_mut().enumerate() {
        let t = i as f64 / fs;
        for j in 0..3 {
            *c += Complex64::from_polar(1.0, TAU * (center_hz + offsets[j]) * t + phases[j]);
        }
    }
    let cluster_power = cluster.iter().map(|c| c.norm_sqr()).sum::<f64>() / n as f64;
    if cluster_power < 1e-12 {
        return Err(Error::Domain(
            "narrowband cluster degenerated to zero power; use a different seed".into(),
        ));
    }
    let scale = (power / cluster_power).sqrt();

    let mut out = window.clone();
    for (s, c) in out.samples.iter_mut().zip(&cluster) {
        *s += scale * c;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan() -> SubcarrierPlan {
        SubcarrierPlan::new(4).unwrap()
    }

    /// Straight O(n^2) DFT magnitudes, normalized like the production
    /// spectrum (unit on-bin tone -> T_d). Independent of rustfft.
    fn naive_dft_mags(samples: &[Complex64], fs: f64) -> Vec<f64> {
        let n = samples.len();
        (0..n)
            .map(|b| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (i, s) in samples.iter().enumerate() {
                    let angle = -TAU * b as f64 * i as f64 / n as f64;
                    acc += s * Complex64::from_polar(1.0, angle);
                }
                acc.norm() / fs
            })
            .collect()
    }

    #[test]
    fn rpm_rad_s_round_trip() {
        for rpm in [1.0, 60.0, 2303.0, 6999.9] {
            let m = MachineSpec::from_rpm(rpm, 1).unwrap();
            let back = MachineSpec::new(m.rotation_speed(), 1).unwrap();
            assert!((back.rpm() - rpm).abs() / rpm < 1e-12);
        }
    }

    #[test]
    fn zero_charge_rejected() {
        assert!(MachineSpec::from_rpm(100.0, 0).is_err());
        assert!(MachineSpec::from_rpm(100.0, -1).is_err());
    }

    #[test]
    fn negative_speed_rejected() {
        assert!(MachineSpec::from_rpm(-5.0, 1).is_err());
        assert!(MachineSpec::from_rpm(0.0, 1).is_err());
    }

    #[test]
    fn plan_rejects_band_overflow() {
        let err = SubcarrierPlan::new(4000).unwrap_err();
        assert!(matches!(err, Error::InvalidPlan { field: "count", .. }));
    }

    #[test]
    fn plan_rejects_fractional_window() {
        let err = SubcarrierPlan::new(4)
            .unwrap()
            .with_window_duration(1.0001)
            .unwrap_err();
        assert!(matches!(
            err,
            Error::InvalidPlan {
                field: "window_duration",
                ..
            }
        ));
    }

    #[test]
    fn synthesize_rejects_empty_and_out_of_range() {
        let p = plan();
        assert!(synthesize(&[], &p, 0, None).is_err());
        let m = MachineSpec::from_rpm(600.0, 1).unwrap();
        assert!(synthesize(&[m], &p, 4, None).is_err());
    }

    #[test]
    fn synthesize_rejects_fundamental_above_nyquist() {
        // 1025 Hz fundamental at a 2048 Hz sample rate.
        let m = MachineSpec::from_rpm(61_500.0, 1).unwrap();
        let err = synthesize(&[m], &plan(), 0, None).unwrap_err();
        assert!(matches!(err, Error::Synthesis(_)));
    }

    #[test]
    fn window_length_matches_plan() {
        let m = MachineSpec::from_rpm(600.0, 1).unwrap();
        let w = synthesize(&[m], &plan(), 0, None).unwrap();
        assert_eq!(w.samples().len(), plan().samples_per_window());
    }

    #[test]
    fn zero_separation_gives_pure_tone() {
        // With d_r = 0 the oscillating path term is constant, so an
        // on-bin fundamental leaves every other bin empty.
        let m = MachineSpec::from_rpm(3000.0, 1) // 50 Hz
            .unwrap()
            .with_geometry(0.03, 1.0, 0.0)
            .unwrap();
        let w = synthesize(&[m], &plan(), 0, None).unwrap();
        let mags = naive_dft_mags(w.samples(), w.sample_rate());
        let peak = mags[50];
        assert!((peak - 1.0).abs() < 1e-9, "peak magnitude {peak}");
        for (b, &mag) in mags.iter().enumerate() {
            if b != 50 {
                assert!(mag < 1e-9 * peak, "bin {b} holds {mag}");
            }
        }
    }

    #[test]
    fn off_bin_machine_peaks_at_rounded_bin_with_harmonics() {
        // 100.8 Hz fundamental: the strongest non-DC bin must be 101 and
        // the second and third harmonic regions (near 202 and 302) must
        // carry energy well above the leakage floor.
        let m = MachineSpec::from_rpm(6048.0, 1) // 100.8 Hz
            .unwrap()
            .with_geometry(0.05, 0.5, 0.05)
            .unwrap();
        let w = synthesize(&[m], &plan(), 0, None).unwrap();
        let mags = naive_dft_mags(w.samples(), w.sample_rate());
        let half = &mags[..mags.len() / 2];

        let peak_bin = (1..half.len())
            .max_by(|&a, &b| half[a].partial_cmp(&half[b]).unwrap())
            .unwrap();
        assert_eq!(peak_bin, 101);

        let mut sorted: Vec<f64> = half[1..].to_vec();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = sorted[sorted.len() / 2];
        let near = |c: usize| (c - 1..=c + 1).map(|b| half[b]).fold(0.0, f64::max);
        assert!(near(202) > 20.0 * median, "2nd harmonic buried");
        assert!(near(302) > 5.0 * median, "3rd harmonic buried");
    }

    #[test]
    fn superposition_of_machine_sets() {
        let p = plan();
        let a = MachineSpec::from_rpm(1200.0, 1).unwrap();
        let b = MachineSpec::from_rpm(2900.0, 1)
            .unwrap()
            .with_reflection(0.7)
            .unwrap();
        let both = synthesize(&[a.clone(), b.clone()], &p, 1, None).unwrap();
        let wa = synthesize(&[a], &p, 1, None).unwrap();
        let wb = synthesize(&[b], &p, 1, None).unwrap();
        for i in 0..both.samples().len() {
            let sum = wa.samples()[i] + wb.samples()[i];
            assert!((both.samples()[i] - sum).norm() < 1e-12);
        }
    }

    #[test]
    fn reflection_scaling_is_exact_for_power_of_two() {
        let p = plan();
        let m = MachineSpec::from_rpm(2303.0, 1).unwrap();
        let scaled = m.clone().with_reflection(2.0).unwrap();
        let w1 = synthesize(&[m], &p, 0, None).unwrap();
        let w2 = synthesize(&[scaled], &p, 0, None).unwrap();
        for (a, b) in w1.samples().iter().zip(w2.samples()) {
            assert_eq!(b, &(a * 2.0));
        }
    }

    #[test]
    fn full_rotation_period_shift_leaves_signal_unchanged() {
        let m = MachineSpec::from_rpm(2303.0, 1).unwrap();
        let terms = MachineTerms::new(&m, plan().wave_number(0));
        let period = TAU / m.rotation_speed();
        for i in 0..64 {
            let t = i as f64 * 0.013;
            let a = terms.sample(t);
            let b = terms.sample(t + period);
            assert!(
                (a - b).norm() <= 1e-9 * a.norm().max(1.0),
                "t={t}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn awgn_hits_requested_snr() {
        // >= 1e4 samples, so the realized power concentrates hard.
        let p = SubcarrierPlan::new(4)
            .unwrap()
            .with_sample_rate(16_384.0)
            .unwrap();
        let machines = [MachineSpec::from_rpm(2303.0, 1).unwrap()];
        let clean = synthesize(&machines, &p, 0, None).unwrap();
        for snr_db in [-5.0, 0.0, 10.0] {
            let spec = NoiseSpec::Awgn {
                snr_db,
                reference_bandwidth_hz: None,
                rng_seed: 99,
            };
            let noisy = synthesize(&machines, &p, 0, Some(&spec)).unwrap();
            let noise_power = noisy
                .samples()
                .iter()
                .zip(clean.samples())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / noisy.samples().len() as f64;
            let realized_db = 10.0 * (clean.mean_power() / noise_power).log10();
            assert!(
                (realized_db - snr_db).abs() < 0.5,
                "requested {snr_db} dB, realized {realized_db} dB"
            );
        }
    }

    #[test]
    fn zero_reflection_with_awgn_is_pure_noise() {
        let m = MachineSpec::from_rpm(2303.0, 1)
            .unwrap()
            .with_reflection(0.0)
            .unwrap();
        let spec = NoiseSpec::Awgn {
            snr_db: 0.0,
            reference_bandwidth_hz: None,
            rng_seed: 5,
        };
        let w = synthesize(&[m], &plan(), 0, Some(&spec)).unwrap();
        // Zero signal power falls back to unit reference power.
        assert!((w.mean_power() - 1.0).abs() < 0.1, "{}", w.mean_power());
        let mags = naive_dft_mags(w.samples(), w.sample_rate());
        let bins = &mags[1..mags.len() / 2];
        let mean = bins.iter().sum::<f64>() / bins.len() as f64;
        let var = bins.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / bins.len() as f64;
        let limit = mean + 6.0 * var.sqrt();
        for &m in bins {
            assert!(m < limit, "spectral outlier {m} above {limit}");
        }
    }

    #[test]
    fn synthesize_accepts_narrowband_directly() {
        let m = MachineSpec::from_rpm(2303.0, 1).unwrap();
        let spec = NoiseSpec::Narrowband {
            center_hz: 150.0,
            bandwidth_hz: 5.0,
            power: 2.0,
            rng_seed: 21,
        };
        let composed = synthesize(&[m.clone()], &plan(), 0, Some(&spec)).unwrap();
        let clean = synthesize(&[m], &plan(), 0, None).unwrap();
        let injected = inject_narrowband(&clean, &spec).unwrap();
        assert_eq!(composed, injected);
    }

    #[test]
    fn awgn_reference_bandwidth_scales_noise_power() {
        // Referencing the SNR to a quarter of the baseband quadruples
        // the total injected noise power.
        let p = plan();
        let machines = [MachineSpec::from_rpm(2303.0, 1).unwrap()];
        let clean = synthesize(&machines, &p, 0, None).unwrap();
        let noise_power = |bw: Option<f64>| {
            let spec = NoiseSpec::Awgn {
                snr_db: 10.0,
                reference_bandwidth_hz: bw,
                rng_seed: 77,
            };
            let noisy = synthesize(&machines, &p, 0, Some(&spec)).unwrap();
            noisy
                .samples()
                .iter()
                .zip(clean.samples())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                / noisy.samples().len() as f64
        };
        let full = noise_power(None);
        let quarter = noise_power(Some(p.sample_rate() / 4.0));
        let ratio = quarter / full;
        assert!((ratio - 4.0).abs() < 0.5, "power ratio {ratio}");
    }

    #[test]
    fn narrowband_zero_power_is_identity() {
        let m = MachineSpec::from_rpm(2303.0, 1).unwrap();
        let w = synthesize(&[m], &plan(), 0, None).unwrap();
        let spec = NoiseSpec::Narrowband {
            center_hz: 150.0,
            bandwidth_hz: 5.0,
            power: 0.0,
            rng_seed: 1,
        };
        let out = inject_narrowband(&w, &spec).unwrap();
        assert_eq!(out, w);
    }

    #[test]
    fn narrowband_energy_lands_in_target_bins() {
        let m = MachineSpec::from_rpm(2303.0, 1).unwrap();
        let w = synthesize(&[m], &plan(), 0, None).unwrap();
        let spec = NoiseSpec::Narrowband {
            center_hz: 150.0,
            bandwidth_hz: 5.0,
            power: 10.0 * w.mean_power(),
            rng_seed: 2,
        };
        let out = inject_narrowband(&w, &spec).unwrap();
        let injected: Vec<Complex64> = out
            .samples()
            .iter()
            .zip(w.samples())
            .map(|(a, b)| a - b)
            .collect();
        let mags = naive_dft_mags(&injected, w.sample_rate());
        let total: f64 = mags.iter().map(|m| m * m).sum();
        let inside: f64 = (148..=152).map(|b| mags[b] * mags[b]).sum();
        let wide: f64 = (146..=154).map(|b| mags[b] * mags[b]).sum();
        assert!(inside > 0.5 * total, "core bins hold {inside} of {total}");
        assert!(wide > 0.9 * total, "cluster leaked beyond 146..154");
    }

    #[test]
    fn narrowband_power_is_seed_invariant_but_phases_differ() {
        let m = MachineSpec::from_rpm(2303.0, 1).unwrap();
        let w = synthesize(&[m], &plan(), 0, None).unwrap();
        let build = |seed| NoiseSpec::Narrowband {
            center_hz: 150.0,
            bandwidth_hz: 5.0,
            power: 3.5,
            rng_seed: seed,
        };
        let d1: Vec<Complex64> = inject_narrowband(&w, &build(10))
            .unwrap()
            .samples()
            .iter()
            .zip(w.samples())
            .map(|(a, b)| a - b)
            .collect();
        let d2: Vec<Complex64> = inject_narrowband(&w, &build(11))
            .unwrap()
            .samples()
            .iter()
            .zip(w.samples())
            .map(|(a, b)| a - b)
            .collect();
        let p = |d: &[Complex64]| d.iter().map(|c| c.norm_sqr()).sum::<f64>() / d.len() as f64;
        assert!((p(&d1) - 3.5).abs() < 1e-9);
        assert!((p(&d2) - 3.5).abs() < 1e-9);
        assert!(d1.iter().zip(&d2).any(|(a, b)| (a - b).norm() > 1e-6));
    }
}
