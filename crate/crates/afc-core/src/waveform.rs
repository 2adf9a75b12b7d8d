//! Preparation-waveform synthesis: the target comb spectrum is transformed
//! to the time domain, the principal part of the pulse train is selected
//! and the amplitude is remapped through the modulator response.

use rustfft::{num_complex::Complex64, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::memory::{CombDesign, PeakShape};
use crate::stats::LN2;

/// Target comb amplitude at detuning `nu_hz` from the comb center, in
/// [0, 1]. Teeth are centered on multiples of the periodicity and clipped
/// by the envelope width.
pub fn comb_spectrum_amplitude(comb: &CombDesign, nu_hz: f64) -> f64 {
    if nu_hz.abs() > 0.5 * comb.total_width_hz {
        return 0.0;
    }
    let spacing = comb.periodicity_hz;
    let gamma = comb.peak_fwhm_hz();
    // distance to the nearest tooth center
    let k = (nu_hz / spacing).round();
    let d = nu_hz - k * spacing;
    match comb.peak_shape {
        PeakShape::Square => {
            if d.abs() <= 0.5 * gamma {
                1.0
            } else {
                0.0
            }
        }
        PeakShape::Gaussian => (-4.0 * LN2 * d * d / (gamma * gamma)).exp(),
    }
}

/// Monotone amplitude response of the modulator, tabulated as
/// (input, output) pairs and linearly interpolated. The identity map is the
/// default.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NonlinearityMap {
    points: Vec<(f64, f64)>,
}

impl NonlinearityMap {
    pub fn identity() -> Self {
        NonlinearityMap {
            points: vec![(0.0, 0.0), (1.0, 1.0)],
        }
    }

    pub fn from_points(points: Vec<(f64, f64)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(CoreError::domain(
                "nonlinearity map needs at least two points".into(),
            ));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0 && w[1].1 > w[0].1) {
                return Err(CoreError::domain(
                    "nonlinearity map must be strictly increasing".into(),
                ));
            }
        }
        Ok(NonlinearityMap { points })
    }

    pub fn apply(&self, x: f64) -> f64 {
        Self::interp(self.points.iter().map(|&(a, b)| (a, b)), x)
    }

    /// Inverse map, used to pre-compensate the waveform amplitude.
    pub fn apply_inverse(&self, y: f64) -> f64 {
        Self::interp(self.points.iter().map(|&(a, b)| (b, a)), x_clamp(y))
    }

    fn interp(points: impl Iterator<Item = (f64, f64)>, x: f64) -> f64 {
        let pts: Vec<(f64, f64)> = points.collect();
        if x <= pts[0].0 {
            return pts[0].1;
        }
        for w in pts.windows(2) {
            if x <= w[1].0 {
                let t = (x - w[0].0) / (w[1].0 - w[0].0);
                return w[0].1 + t * (w[1].1 - w[0].1);
            }
        }
        pts.last().unwrap().1
    }
}

fn x_clamp(y: f64) -> f64 {
    y.max(0.0)
}

/// Synthesized preparation waveform, complex baseband samples centered on
/// the middle of the record.
#[derive(Debug, Clone)]
pub struct PreparationWaveform {
    pub dt_s: f64,
    pub samples: Vec<Complex64>,
    /// True when the samples were clipped to the truncation window.
    pub truncated: bool,
    /// Set when the window is too short to resolve the comb periodicity
    /// (shorter than two echo delays).
    pub periodicity_warning: bool,
    /// The frequency-domain target the waveform was synthesized from, kept
    /// for round-trip checks and reporting.
    pub target_spectrum: Vec<f64>,
    pub dnu_hz: f64,
}

impl PreparationWaveform {
    /// Time coordinate of sample `i`, centered so the pulse-train origin
    /// sits in the middle of the record.
    pub fn time_s(&self, i: usize) -> f64 {
        (i as f64 - (self.samples.len() as f64) / 2.0) * self.dt_s
    }
}

/// Builds the time-domain preparation waveform for a comb.
///
/// The untruncated inverse transform reproduces the target spectrum
/// exactly; truncation keeps `truncation_window_s` around the center and
/// the amplitude is remapped through the inverse modulator response.
pub fn comb_preparation_waveform(
    comb: &CombDesign,
    truncation_window_s: f64,
    nonlinearity: &NonlinearityMap,
) -> Result<PreparationWaveform> {
    comb.validate()?;
    if !(10e-6..=1e-3).contains(&truncation_window_s) {
        return Err(CoreError::domain(format!(
            "truncation window must lie in [10 us, 1 ms], got {truncation_window_s}"
        )));
    }
    let tau = comb.afc_delay_s();
    let periodicity_warning = truncation_window_s < 2.0 * tau;

    // choose the grid so the record is 4x the window and the sampling step
    // resolves the envelope-limited pulse width
    let record_s = (4.0 * truncation_window_s).max(8.0 * tau);
    let dnu = 1.0 / record_s;
    let min_n = (record_s * 16.0 * comb.total_width_hz).ceil() as usize;
    let n = min_n.next_power_of_two();
    let dt = record_s / n as f64;

    let mut spectrum = vec![0.0f64; n];
    for (i, s) in spectrum.iter_mut().enumerate() {
        let k = if i < n / 2 { i as f64 } else { i as f64 - n as f64 };
        *s = comb_spectrum_amplitude(comb, k * dnu);
    }
    let mut buf: Vec<Complex64> = spectrum
        .iter()
        .map(|&s| Complex64::new(s, 0.0))
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    for c in buf.iter_mut() {
        *c /= n as f64;
    }
    // rotate so t = 0 sits at the center of the record
    buf.rotate_right(n / 2);

    let center = n / 2;
    let half_window = (0.5 * truncation_window_s / dt).round() as usize;
    let peak_amp = buf.iter().map(|c| c.norm()).fold(0.0, f64::max);
    let mut truncated = false;
    for (i, c) in buf.iter_mut().enumerate() {
        let inside = i >= center.saturating_sub(half_window) && i < center + half_window;
        if !inside {
            if c.norm() > 0.0 {
                truncated = true;
            }
            *c = Complex64::new(0.0, 0.0);
        } else if peak_amp > 0.0 {
            // remap the normalized amplitude, keep the phase
            let a = c.norm() / peak_amp;
            let remapped = nonlinearity.apply_inverse(a) * peak_amp;
            if a > 0.0 {
                *c *= remapped / (a * peak_amp);
            }
        }
    }

    Ok(PreparationWaveform {
        dt_s: dt,
        samples: buf,
        truncated,
        periodicity_warning,
        target_spectrum: spectrum,
        dnu_hz: dnu,
    })
}

/// Relative L2 distance between the spectrum of a waveform and its target.
/// Used to verify round trips and truncation behaviour.
pub fn spectral_error(waveform: &PreparationWaveform) -> f64 {
    let n = waveform.samples.len();
    let mut buf = waveform.samples.clone();
    buf.rotate_left(n / 2);
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let mut num = 0.0;
    let mut den = 0.0;
    for (c, &s) in buf.iter().zip(waveform.target_spectrum.iter()) {
        num += (c.re - s).powi(2) + c.im * c.im;
        den += s * s;
    }
    (num / den).sqrt()
}
