//! Estimators over timestamp streams: coincidence histograms, cross- and
//! auto-correlations normalized by neighboring-trial accidentals, the
//! Cauchy-Schwarz test, temporal multimode analysis and the noise-mixing
//! models used to predict autocorrelations.

use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::stats::{self, LN2};
use crate::stream::TimestampStream;

/// Start-stop delay histogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoincidenceHistogram {
    pub bin_width_ps: i64,
    pub range_ps: (i64, i64),
    pub counts: Vec<u64>,
    pub n_starts: u64,
    /// Set when the start stream was empty.
    pub empty_start_flag: bool,
}

impl CoincidenceHistogram {
    pub fn total_counts(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn bin_center_ps(&self, k: usize) -> i64 {
        self.range_ps.0 + k as i64 * self.bin_width_ps + self.bin_width_ps / 2
    }
}

fn count_in(times: &[i64], lo_ps: i64, hi_ps: i64) -> u64 {
    let a = times.partition_point(|&t| t < lo_ps);
    let b = times.partition_point(|&t| t < hi_ps);
    (b - a) as u64
}

/// Histogram of stop-minus-start delays. Every start is paired with every
/// stop whose delay falls in the range, not only the first one.
pub fn build_histogram(
    starts: &TimestampStream,
    stops: &TimestampStream,
    bin_width_ps: i64,
    range_ps: (i64, i64),
) -> Result<CoincidenceHistogram> {
    if bin_width_ps <= 0 {
        return Err(CoreError::domain("bin width must be positive".into()));
    }
    let span = range_ps.1 - range_ps.0;
    if span <= 0 || span % bin_width_ps != 0 {
        return Err(CoreError::domain(format!(
            "histogram range {range_ps:?} must be a positive whole number of bins"
        )));
    }
    let n_bins = (span / bin_width_ps) as usize;
    let mut counts = vec![0u64; n_bins];
    let stop_times: Vec<i64> = stops.times().collect();
    for start in starts.times() {
        let lo = stop_times.partition_point(|&t| t < start + range_ps.0);
        for &stop in &stop_times[lo..] {
            let delay = stop - start;
            if delay >= range_ps.1 {
                break;
            }
            counts[((delay - range_ps.0) / bin_width_ps) as usize] += 1;
        }
    }
    Ok(CoincidenceHistogram {
        bin_width_ps,
        range_ps,
        counts,
        n_starts: starts.len() as u64,
        empty_start_flag: starts.is_empty(),
    })
}

/// Which trials provide the accidental baseline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NeighborScheme {
    /// `n` neighbors split evenly before and after the start's trial.
    Symmetric(u32),
    /// The `n` trials following the start's trial.
    Following(u32),
}

impl NeighborScheme {
    fn offsets(&self) -> Vec<i64> {
        match *self {
            NeighborScheme::Symmetric(n) => {
                let half = (n / 2) as i64;
                (-half..=half).filter(|&j| j != 0).collect()
            }
            NeighborScheme::Following(n) => (1..=n as i64).collect(),
        }
    }
}

/// Normalized correlation value with its Poissonian uncertainty.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct G2Estimate {
    pub value: f64,
    pub sigma: f64,
    pub window_s: f64,
    pub n_coincidences: u64,
    pub n_accidentals: u64,
    pub n_accidental_trials: u32,
    /// Set when no accidental coincidences were found; `value` is then a
    /// lower bound computed with a single accidental count.
    pub unbounded: bool,
}

fn ratio_estimate(
    c_peak: u64,
    c_acc: u64,
    n_offsets: u32,
    window_ps: i64,
) -> G2Estimate {
    let window_s = window_ps as f64 / 1e12;
    if c_acc == 0 {
        return G2Estimate {
            value: c_peak as f64 * n_offsets as f64,
            sigma: c_peak as f64 * n_offsets as f64,
            window_s,
            n_coincidences: c_peak,
            n_accidentals: 0,
            n_accidental_trials: n_offsets,
            unbounded: true,
        };
    }
    let value = c_peak as f64 * n_offsets as f64 / c_acc as f64;
    let rel = 1.0 / (c_peak.max(1) as f64) + 1.0 / c_acc as f64;
    G2Estimate {
        value,
        sigma: value.max(f64::MIN_POSITIVE) * rel.sqrt(),
        window_s,
        n_coincidences: c_peak,
        n_accidentals: c_acc,
        n_accidental_trials: n_offsets,
        unbounded: false,
    }
}

/// Cross-correlation at a fixed intra-trial delay: same-trial coincidences
/// in a window centered on `peak_delay_ps` over the average of the same
/// window in neighboring trials.
pub fn g2_cross(
    starts: &TimestampStream,
    stops: &TimestampStream,
    peak_delay_ps: i64,
    window_ps: i64,
    scheme: NeighborScheme,
    trial_period_ps: i64,
) -> Result<G2Estimate> {
    if window_ps <= 0 || trial_period_ps <= 0 {
        return Err(CoreError::domain(
            "window and trial period must be positive".into(),
        ));
    }
    let offsets = scheme.offsets();
    if offsets.is_empty() {
        return Err(CoreError::domain("need at least one accidental trial".into()));
    }
    let half = window_ps / 2;
    let stop_times: Vec<i64> = stops.times().collect();
    let mut c_peak = 0u64;
    let mut c_acc = 0u64;
    for t in starts.times() {
        let center = t + peak_delay_ps;
        c_peak += count_in(&stop_times, center - half, center + half);
        for &j in &offsets {
            let c = center + j * trial_period_ps;
            c_acc += count_in(&stop_times, c - half, c + half);
        }
    }
    Ok(ratio_estimate(c_peak, c_acc, offsets.len() as u32, window_ps))
}

/// Autocorrelation from the two outputs of a 50/50 split: same-trial
/// coincidences around zero delay over the cross-trial baseline.
pub fn g2_auto_hbt(
    stream_a: &TimestampStream,
    stream_b: &TimestampStream,
    window_ps: i64,
    scheme: NeighborScheme,
    trial_period_ps: i64,
) -> Result<G2Estimate> {
    g2_cross(stream_a, stream_b, 0, window_ps, scheme, trial_period_ps)
}

/// Autocorrelation of a single continuous stream: pair delays within the
/// window over the flat baseline at large delays, per unit delay.
pub fn g2_auto_cw(
    stream: &TimestampStream,
    window_ps: i64,
    baseline_ps: (i64, i64),
) -> Result<G2Estimate> {
    if window_ps <= 0 || baseline_ps.1 <= baseline_ps.0 {
        return Err(CoreError::domain("bad window or baseline range".into()));
    }
    let half = window_ps / 2;
    if baseline_ps.0 < half {
        return Err(CoreError::domain(
            "baseline must start beyond the coincidence window".into(),
        ));
    }
    let times: Vec<i64> = stream.times().collect();
    let mut c0 = 0u64;
    let mut base = 0u64;
    for (i, &t) in times.iter().enumerate() {
        let rest = &times[i + 1..];
        c0 += count_in(rest, t + 1, t + half + 1);
        base += count_in(rest, t + baseline_ps.0, t + baseline_ps.1);
    }
    let window_s = window_ps as f64 / 1e12;
    if base == 0 {
        return Ok(G2Estimate {
            value: c0 as f64,
            sigma: c0 as f64,
            window_s,
            n_coincidences: c0,
            n_accidentals: 0,
            n_accidental_trials: 0,
            unbounded: true,
        });
    }
    let per_delay_peak = c0 as f64 / half as f64;
    let per_delay_base = base as f64 / (baseline_ps.1 - baseline_ps.0) as f64;
    let value = per_delay_peak / per_delay_base;
    let rel = 1.0 / c0.max(1) as f64 + 1.0 / base as f64;
    Ok(G2Estimate {
        value,
        sigma: value.max(f64::MIN_POSITIVE) * rel.sqrt(),
        window_s,
        n_coincidences: c0,
        n_accidentals: base,
        n_accidental_trials: 0,
        unbounded: false,
    })
}

/// Cauchy-Schwarz verdict.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CSResult {
    pub r: f64,
    pub sigma_r: f64,
    /// One-sided confidence that r exceeds the classical limit of 1.
    pub confidence: f64,
    pub violated: bool,
}

/// Cauchy-Schwarz parameter R = cross^2 / (auto_s * auto_i) with
/// first-order error propagation and a one-sided Gaussian confidence.
pub fn cauchy_schwarz(
    cross: &G2Estimate,
    auto_signal: &G2Estimate,
    auto_idler: &G2Estimate,
) -> Result<CSResult> {
    if auto_signal.value <= 0.0 || auto_idler.value <= 0.0 {
        return Err(CoreError::domain(
            "autocorrelations must be positive for the Cauchy-Schwarz test".into(),
        ));
    }
    let r = cross.value * cross.value / (auto_signal.value * auto_idler.value);
    let rel2 = 4.0 * (cross.sigma / cross.value).powi(2)
        + (auto_signal.sigma / auto_signal.value).powi(2)
        + (auto_idler.sigma / auto_idler.value).powi(2);
    let sigma_r = r * rel2.sqrt();
    let confidence = if sigma_r > 0.0 {
        stats::normal_cdf((r - 1.0) / sigma_r)
    } else if r > 1.0 {
        1.0
    } else if r == 1.0 {
        0.5
    } else {
        0.0
    };
    Ok(CSResult {
        r,
        sigma_r,
        confidence,
        violated: r > 1.0,
    })
}

/// Parameters shared by the trial-based estimators.
#[derive(Debug, Clone, Copy)]
pub struct TrialAnalysis {
    pub trial_period_ps: i64,
    /// Nominal echo arrival relative to the herald.
    pub peak_delay_ps: i64,
    pub window_ps: i64,
    pub scheme: NeighborScheme,
}

/// Correlation matrix between idler and signal temporal sub-modes.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultimodeMatrix {
    pub subwindow_ps: i64,
    /// Intra-trial start of the first idler sub-mode.
    pub idler_origin_ps: i64,
    /// Intra-trial start of the first signal sub-mode.
    pub signal_origin_ps: i64,
    pub entries: Vec<Vec<G2Estimate>>,
}

impl MultimodeMatrix {
    pub fn n_modes(&self) -> usize {
        self.entries.len()
    }

    /// Storage separation probed by entry (i, j).
    pub fn separation_ps(&self, i: usize, j: usize) -> i64 {
        self.signal_origin_ps - self.idler_origin_ps
            + (j as i64 - i as i64) * self.subwindow_ps
    }
}

/// Builds the multimode correlation matrix: entry (i, j) is `g2_cross`
/// evaluated on the streams restricted to idler sub-mode i and signal
/// sub-mode j, with the coincidence window centered on their nominal
/// separation.
#[allow(clippy::too_many_arguments)]
pub fn multimode_matrix(
    idler: &TimestampStream,
    signal: &TimestampStream,
    idler_origin_ps: i64,
    signal_origin_ps: i64,
    subwindow_ps: i64,
    n_modes: usize,
    scheme: NeighborScheme,
    trial_period_ps: i64,
) -> Result<MultimodeMatrix> {
    if subwindow_ps <= 0 || n_modes == 0 {
        return Err(CoreError::domain("bad sub-mode layout".into()));
    }
    let idler_subs: Vec<TimestampStream> = (0..n_modes)
        .map(|i| {
            let from = idler_origin_ps + i as i64 * subwindow_ps;
            idler.restrict_intra_trial(from, from + subwindow_ps, trial_period_ps)
        })
        .collect();
    let signal_subs: Vec<TimestampStream> = (0..n_modes)
        .map(|j| {
            let from = signal_origin_ps + j as i64 * subwindow_ps;
            signal.restrict_intra_trial(from, from + subwindow_ps, trial_period_ps)
        })
        .collect();
    let mut entries = Vec::with_capacity(n_modes);
    for i in 0..n_modes {
        let mut row = Vec::with_capacity(n_modes);
        for (j, signal_sub) in signal_subs.iter().enumerate() {
            let separation =
                signal_origin_ps - idler_origin_ps + (j as i64 - i as i64) * subwindow_ps;
            row.push(g2_cross(
                &idler_subs[i],
                signal_sub,
                separation,
                subwindow_ps,
                scheme,
                trial_period_ps,
            )?);
        }
        entries.push(row);
    }
    Ok(MultimodeMatrix {
        subwindow_ps,
        idler_origin_ps,
        signal_origin_ps,
        entries,
    })
}

/// Number of temporal modes the idler gate can accommodate.
pub fn mode_capacity(idler_gate_s: f64, window_s: f64) -> Result<u64> {
    if !(window_s > 0.0) {
        return Err(CoreError::domain("window must be positive".into()));
    }
    if idler_gate_s < 0.0 {
        return Err(CoreError::domain("gate must be nonnegative".into()));
    }
    Ok((idler_gate_s / window_s).floor() as u64)
}

/// Recomputes the cross-correlation with heralds restricted to each of the
/// given gate lengths (from the start of the idler gate).
pub fn g2_vs_idler_gate(
    idler: &TimestampStream,
    signal: &TimestampStream,
    gates_s: &[f64],
    analysis: &TrialAnalysis,
) -> Result<Vec<(f64, G2Estimate)>> {
    let mut results = Vec::with_capacity(gates_s.len());
    for &gate in gates_s {
        if !(gate > 0.0) {
            return Err(CoreError::domain("gate lengths must be positive".into()));
        }
        let restricted =
            idler.restrict_intra_trial(0, (gate * 1e12).round() as i64, analysis.trial_period_ps);
        let estimate = g2_cross(
            &restricted,
            signal,
            analysis.peak_delay_ps,
            analysis.window_ps,
            analysis.scheme,
            analysis.trial_period_ps,
        )?;
        results.push((gate, estimate));
    }
    Ok(results)
}

/// Signal-to-noise ratio of a histogram peak: counts in the window around
/// the peak over the mean counts per equivalent window outside it. The raw
/// ratio is reported; the peak window is not noise-subtracted.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SnrEstimate {
    pub ratio: f64,
    pub peak_counts: u64,
    pub noise_per_window: f64,
    /// Set when no counts were found outside the peak.
    pub unbounded: bool,
}

pub fn snr_from_histogram(
    hist: &CoincidenceHistogram,
    peak_delay_ps: i64,
    window_ps: i64,
) -> Result<SnrEstimate> {
    if window_ps <= 0 || window_ps % hist.bin_width_ps != 0 {
        return Err(CoreError::domain(
            "window must be a whole number of histogram bins".into(),
        ));
    }
    let half = window_ps / 2;
    let in_peak = |center: i64| -> bool {
        center >= peak_delay_ps - half && center < peak_delay_ps + half
    };
    // guard band of one window on each side of the peak
    let in_guard = |center: i64| -> bool {
        center >= peak_delay_ps - 2 * window_ps && center < peak_delay_ps + 2 * window_ps
    };
    let mut peak = 0u64;
    let mut outside = 0u64;
    let mut outside_bins = 0u64;
    for (k, &c) in hist.counts.iter().enumerate() {
        let center = hist.bin_center_ps(k);
        if in_peak(center) {
            peak += c;
        } else if !in_guard(center) {
            outside += c;
            outside_bins += 1;
        }
    }
    if outside_bins == 0 {
        return Err(CoreError::domain(
            "histogram has no bins outside the peak".into(),
        ));
    }
    let bins_per_window = (window_ps / hist.bin_width_ps) as f64;
    let noise_per_window = outside as f64 / outside_bins as f64 * bins_per_window;
    if outside == 0 {
        return Ok(SnrEstimate {
            ratio: peak as f64,
            peak_counts: peak,
            noise_per_window: 0.0,
            unbounded: true,
        });
    }
    Ok(SnrEstimate {
        ratio: peak as f64 / noise_per_window,
        peak_counts: peak,
        noise_per_window,
        unbounded: false,
    })
}

/// Autocorrelation of a bunched field diluted by unbunched noise, given the
/// signal-to-noise ratio mu_s / mu_n:
/// (g_in mu_s^2 + 2 mu_s mu_n + mu_n^2) / (mu_s + mu_n)^2.
pub fn noisy_storage_autocorrelation(g2_in: f64, snr_unc: f64) -> Result<f64> {
    if g2_in < 1.0 {
        return Err(CoreError::domain(format!(
            "input autocorrelation must be at least 1, got {g2_in}"
        )));
    }
    if snr_unc < 0.0 {
        return Err(CoreError::domain(format!(
            "signal-to-noise ratio must be nonnegative, got {snr_unc}"
        )));
    }
    if snr_unc.is_infinite() {
        return Ok(g2_in);
    }
    let mu_s = snr_unc;
    let mu_n = 1.0;
    Ok((g2_in * mu_s * mu_s + 2.0 * mu_s * mu_n + mu_n * mu_n) / (mu_s + mu_n).powi(2))
}

/// Zero-delay autocorrelation averaged over a finite integration window,
/// with a double-exponential bunching kernel of FWHM `tau_c_s`:
/// mean over the window of 1 + (g0 - 1) exp(-2 ln 2 |t| / tau_c).
pub fn finite_window_g2(g2_zero_delay: f64, window_s: f64, tau_c_s: f64) -> Result<f64> {
    if !(window_s > 0.0) || !(tau_c_s > 0.0) {
        return Err(CoreError::domain(
            "window and correlation time must be positive".into(),
        ));
    }
    if window_s < 1e-9 * tau_c_s {
        return Ok(g2_zero_delay);
    }
    let half = 0.5 * window_s;
    let kernel = |t: f64| (-2.0 * LN2 * t.abs() / tau_c_s).exp();
    let mean = stats::integrate(&kernel, -half, half, 1e-8) / window_s;
    Ok(1.0 + (g2_zero_delay - 1.0) * mean)
}
