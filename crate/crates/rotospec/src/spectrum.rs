//! Rectangular-window DFT analysis and thresholded peak localization.
//!
//! Magnitudes are normalized so a unit-amplitude complex tone sitting
//! exactly on a bin measures `window_duration`; an off-bin tone spreads
//! according to the leakage law `T_d*|sin(pi*m)|/(pi*|m|)` with
//! `m = (f_s - f_r)*T_d`, which is what the fine estimator inverts.
//! No taper is applied: the sub-bin amplitude model assumes the bare
//! rectangular window.

use num_complex::Complex64;
use rustfft::FftPlanner;
use std::cell::RefCell;

use crate::error::{Error, Result};
use crate::signal::BasebandWindow;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

/// Magnitude spectrum over integer frequency bins for one subcarrier and
/// one sample window. Bins are indexed 0..=floor(n/2); bin 0 (DC) is
/// stored but never searched for peaks.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    magnitudes: Vec<f64>,
    bin_width: f64,
    window_duration: f64,
    subcarrier_index: usize,
}

impl Spectrum {
    /// Build a spectrum from raw magnitudes (index = bin, starting at DC).
    pub fn from_magnitudes(
        magnitudes: Vec<f64>,
        bin_width: f64,
        subcarrier_index: usize,
    ) -> Result<Self> {
        if bin_width <= 0.0 || !bin_width.is_finite() {
            return Err(Error::Domain(format!(
                "bin width must be finite and > 0, got {bin_width}"
            )));
        }
        if magnitudes.len() < 2 {
            return Err(Error::Domain(
                "a spectrum needs at least the DC bin and one signal bin".into(),
            ));
        }
        if magnitudes.iter().any(|m| *m < 0.0 || m.is_nan()) {
            return Err(Error::Domain("magnitudes must be nonnegative".into()));
        }
        Ok(Spectrum {
            magnitudes,
            bin_width,
            window_duration: 1.0 / bin_width,
            subcarrier_index,
        })
    }

    /// Magnitude at `bin`; zero beyond the stored range.
    pub fn magnitude(&self, bin: usize) -> f64 {
        self.magnitudes.get(bin).copied().unwrap_or(0.0)
    }

    /// Highest stored bin index.
    pub fn max_bin(&self) -> usize {
        self.magnitudes.len() - 1
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn window_duration(&self) -> f64 {
        self.window_duration
    }

    pub fn subcarrier_index(&self) -> usize {
        self.subcarrier_index
    }

    /// Center frequency of `bin` in Hz.
    pub fn bin_frequency(&self, bin: usize) -> f64 {
        bin as f64 * self.bin_width
    }
}

/// One supra-threshold local maximum. `flank_magnitude` retains the
/// larger immediate neighbor for the fine stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Peak {
    pub bin: usize,
    pub magnitude: f64,
    pub flank_magnitude: f64,
}

/// Local maxima at or above a threshold, ascending by bin.
#[derive(Debug, Clone, PartialEq)]
pub struct PeakSet {
    peaks: Vec<Peak>,
    threshold: f64,
}

impl PeakSet {
    /// Assemble a peak set from (bin, magnitude) pairs, e.g. for tests or
    /// externally computed spectra. Bins must be strictly increasing and
    /// magnitudes at or above the threshold.
    pub fn from_parts(peaks: Vec<(usize, f64)>, threshold: f64) -> Result<Self> {
        if threshold <= 0.0 || threshold.is_nan() {
            return Err(Error::Domain(format!(
                "threshold must be > 0, got {threshold}"
            )));
        }
        for w in peaks.windows(2) {
            if w[1].0 <= w[0].0 {
                return Err(Error::Domain("peak bins must be strictly increasing".into()));
            }
        }
        if let Some((bin, mag)) = peaks.iter().find(|(_, m)| *m < threshold) {
            return Err(Error::Domain(format!(
                "peak at bin {bin} has magnitude {mag} below threshold {threshold}"
            )));
        }
        Ok(PeakSet {
            peaks: peaks
                .into_iter()
                .map(|(bin, magnitude)| Peak {
                    bin,
                    magnitude,
                    flank_magnitude: 0.0,
                })
                .collect(),
            threshold,
        })
    }

    pub fn peaks(&self) -> &[Peak] {
        &self.peaks
    }

    pub fn bins(&self) -> Vec<usize> {
        self.peaks.iter().map(|p| p.bin).collect()
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_empty(&self) -> bool {
        self.peaks.is_empty()
    }

    pub fn len(&self) -> usize {
        self.peaks.len()
    }
}

/// Rectangular-window DFT of a baseband window.
///
/// Magnitudes are `|X[b]|/sample_rate` for bins 0..=floor(n/2); with that
/// scaling an on-bin unit tone measures exactly `window_duration`.
pub fn dft_spectrum(window: &BasebandWindow, window_duration: f64) -> Result<Spectrum> {
    let n = window.samples().len();
    let expected = window.sample_rate() * window_duration;
    if expected <= 0.0 || expected.is_nan() || (expected - expected.round()).abs() > 1e-6 {
        return Err(Error::Domain(format!(
            "window duration {window_duration} s does not yield a whole number of samples"
        )));
    }
    let expected = expected.round() as usize;
    if n != expected {
        return Err(Error::WindowLength {
            expected,
            actual: n,
        });
    }

    let mut buf: Vec<Complex64> = window.samples().to_vec();
    PLANNER.with(|p| {
        let fft = p.borrow_mut().plan_fft_forward(n);
        fft.process(&mut buf);
    });

    let fs = window.sample_rate();
    let magnitudes: Vec<f64> = buf[..=n / 2].iter().map(|c| c.norm() / fs).collect();
    Ok(Spectrum {
        magnitudes,
        bin_width: 1.0 / window_duration,
        window_duration,
        subcarrier_index: window.subcarrier_index(),
    })
}

/// Bins that are local maxima (strictly greater than both neighbors) with
/// magnitude at or above `threshold`. DC is excluded; bin 1 and the last
/// bin compare against their single neighbor only. An empty result is
/// valid and means everything was suppressed.
pub fn locate_peaks(spectrum: &Spectrum, threshold: f64) -> Result<PeakSet> {
    if threshold <= 0.0 || threshold.is_nan() {
        return Err(Error::Domain(format!(
            "threshold must be > 0, got {threshold}"
        )));
    }
    let last = spectrum.max_bin();
    let mut peaks = Vec::new();
    for bin in 1..=last {
        let mag = spectrum.magnitude(bin);
        if mag < threshold {
            continue;
        }
        // DC never counts as a neighbor.
        let left = if bin >= 2 {
            Some(spectrum.magnitude(bin - 1))
        } else {
            None
        };
        let right = if bin < last {
            Some(spectrum.magnitude(bin + 1))
        } else {
            None
        };
        let is_max = left.is_none_or(|l| mag > l) && right.is_none_or(|r| mag > r);
        if is_max {
            let flank = left.unwrap_or(0.0).max(right.unwrap_or(0.0));
            peaks.push(Peak {
                bin,
                magnitude: mag,
                flank_magnitude: flank,
            });
        }
    }
    Ok(PeakSet { peaks, threshold })
}
