//! Shared oracles for the integration suites. Everything here is
//! independent of the production FFT/estimation path: plain O(n^2) DFTs
//! and dense grid searches.
#![allow(dead_code)]

use num_complex::Complex64;
use rotospec::signal::BasebandWindow;
use std::f64::consts::TAU;

pub fn tone(freq: f64, fs: f64, n: usize) -> Vec<Complex64> {
    (0..n)
        .map(|i| Complex64::from_polar(1.0, TAU * freq * i as f64 / fs))
        .collect()
}

pub fn tone_window(freq: f64, fs: f64, n: usize) -> BasebandWindow {
    BasebandWindow::new(tone(freq, fs, n), fs, 0)
}

/// Full-spectrum magnitudes by direct summation, normalized like the
/// production spectrum (on-bin unit tone -> T_d).
pub fn naive_dft_mags(samples: &[Complex64], fs: f64) -> Vec<f64> {
    let n = samples.len();
    (0..n)
        .map(|b| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, s) in samples.iter().enumerate() {
                acc += s * Complex64::from_polar(1.0, -TAU * (b as f64) * (i as f64) / n as f64);
            }
            acc.norm() / fs
        })
        .collect()
}

/// Correlation magnitude of `samples` against a complex tone at `freq`.
pub fn correlation_mag(samples: &[Complex64], fs: f64, freq: f64) -> f64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, s) in samples.iter().enumerate() {
        acc += s * Complex64::from_polar(1.0, -TAU * freq * i as f64 / fs);
    }
    acc.norm()
}

/// Maximum-likelihood frequency oracle: argmax of the correlation
/// magnitude over a dense grid [lo, hi] with the given step.
pub fn grid_search_peak(samples: &[Complex64], fs: f64, lo: f64, hi: f64, step: f64) -> f64 {
    let mut best_f = lo;
    let mut best_mag = -1.0;
    let count = ((hi - lo) / step).round() as usize;
    for k in 0..=count {
        let f = lo + k as f64 * step;
        let mag = correlation_mag(samples, fs, f);
        if mag > best_mag {
            best_mag = mag;
            best_f = f;
        }
    }
    best_f
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}
