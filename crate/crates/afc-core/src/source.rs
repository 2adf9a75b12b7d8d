//! Photon-pair source model: correlation-time arithmetic, the biphoton
//! wavepacket, effective-mode-count statistics and seeded pair sampling.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::stats::{self, LN2};

/// Spectral and rate description of the pair source.
///
/// `pump_power_w` is carried as metadata only; rates and efficiencies are
/// configured directly.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BiphotonSpec {
    pub signal_wavelength_m: f64,
    pub idler_wavelength_m: f64,
    /// Lorentzian FWHM of the biphoton line, Hz.
    pub bandwidth_fwhm_hz: f64,
    /// Effective number of spectral modes reaching the signal detectors.
    pub n_spectral_modes: f64,
    pub cavity_fsr_hz: f64,
    /// Pair creation rate while the pump is live, 1/s.
    pub pair_rate_hz: f64,
    /// Probability of a signal photon at the memory input given an idler
    /// detection.
    pub heralding_efficiency: f64,
    pub pump_power_w: f64,
}

impl BiphotonSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_fwhm_hz > 0.0) {
            return Err(CoreError::config(
                "source.bandwidth_fwhm",
                "must be positive",
            ));
        }
        if !(0.0..=1.0).contains(&self.heralding_efficiency) {
            return Err(CoreError::config(
                "source.heralding_efficiency",
                "must lie in [0, 1]",
            ));
        }
        if !(self.n_spectral_modes >= 1.0) {
            return Err(CoreError::config(
                "source.n_spectral_modes",
                "must be at least 1",
            ));
        }
        if self.pair_rate_hz < 0.0 {
            return Err(CoreError::config("source.pair_rate", "must be nonnegative"));
        }
        Ok(())
    }

    /// FWHM of the signal-idler coincidence peak for this source.
    pub fn correlation_time_s(&self) -> Result<f64> {
        correlation_time_from_bandwidth(self.bandwidth_fwhm_hz)
    }
}

/// FWHM of the double-exponential coincidence envelope of a Lorentzian
/// line: tau_c = ln 2 / (pi * fwhm).
pub fn correlation_time_from_bandwidth(bandwidth_fwhm_hz: f64) -> Result<f64> {
    if !(bandwidth_fwhm_hz > 0.0) {
        return Err(CoreError::domain(format!(
            "bandwidth must be positive, got {bandwidth_fwhm_hz}"
        )));
    }
    Ok(LN2 / (std::f64::consts::PI * bandwidth_fwhm_hz))
}

/// Inverse of [`correlation_time_from_bandwidth`].
pub fn bandwidth_from_correlation_time(tau_c_s: f64) -> Result<f64> {
    if !(tau_c_s > 0.0) {
        return Err(CoreError::domain(format!(
            "correlation time must be positive, got {tau_c_s}"
        )));
    }
    Ok(LN2 / (std::f64::consts::PI * tau_c_s))
}

/// Normalized double-exponential wavepacket density with FWHM `tau_c_s`,
/// p(t) = (ln 2 / tau_c) * exp(-2 ln 2 |t| / tau_c).
pub fn biphoton_temporal_density(t_s: f64, tau_c_s: f64) -> f64 {
    assert!(tau_c_s > 0.0, "tau_c must be positive");
    (LN2 / tau_c_s) * (-2.0 * LN2 * t_s.abs() / tau_c_s).exp()
}

/// CDF of [`biphoton_temporal_density`]; used by sampling tests.
pub fn biphoton_temporal_cdf(t_s: f64, tau_c_s: f64) -> f64 {
    let x = 2.0 * LN2 * t_s.abs() / tau_c_s;
    if t_s < 0.0 {
        0.5 * (-x).exp()
    } else {
        1.0 - 0.5 * (-x).exp()
    }
}

/// Autocorrelation of a field made of `n_modes` equal independent thermal
/// modes, given the single-mode value: 1 + (g2_sm - 1) / N.
pub fn multimode_autocorrelation(g2_single_mode: f64, n_modes: f64) -> Result<f64> {
    if g2_single_mode < 1.0 {
        return Err(CoreError::domain(format!(
            "single-mode g2 must be at least 1, got {g2_single_mode}"
        )));
    }
    if n_modes < 1.0 {
        return Err(CoreError::domain(format!(
            "mode count must be at least 1, got {n_modes}"
        )));
    }
    Ok(1.0 + (g2_single_mode - 1.0) / n_modes)
}

/// Inverse of [`multimode_autocorrelation`].
pub fn single_mode_from_multimode(g2_multimode: f64, n_modes: f64) -> Result<f64> {
    if n_modes < 1.0 {
        return Err(CoreError::domain(format!(
            "mode count must be at least 1, got {n_modes}"
        )));
    }
    if g2_multimode < 1.0 {
        return Err(CoreError::domain(format!(
            "multimode g2 must be at least 1, got {g2_multimode}"
        )));
    }
    Ok(1.0 + (g2_multimode - 1.0) * n_modes)
}

/// One emitted pair: idler creation time and, when the signal survives the
/// heralding losses, the signal arrival time at the memory input.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairEmission {
    pub idler_time_s: f64,
    pub signal_time_s: Option<f64>,
}

/// Samples pair emissions over `duration_s`.
///
/// Pair creation is a homogeneous Poisson process at the configured rate;
/// the signal-idler delay follows the biphoton wavepacket and each signal
/// survives independently with the heralding efficiency. Deterministic for
/// a fixed seed.
pub fn sample_pair_emissions(
    spec: &BiphotonSpec,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<PairEmission>> {
    if !(duration_s > 0.0) {
        return Err(CoreError::domain(format!(
            "duration must be positive, got {duration_s}"
        )));
    }
    spec.validate()?;
    let tau_c = spec.correlation_time_s()?;
    let mut rng = stats::substream(seed, 0);
    let mut pairs = Vec::new();
    if spec.pair_rate_hz == 0.0 {
        return Ok(pairs);
    }
    let mut t = 0.0;
    loop {
        t += stats::sample_exponential(&mut rng) / spec.pair_rate_hz;
        if t >= duration_s {
            break;
        }
        let signal_time = if rng.random::<f64>() < spec.heralding_efficiency {
            Some(t + stats::sample_double_exponential(&mut rng, tau_c))
        } else {
            None
        };
        pairs.push(PairEmission {
            idler_time_s: t,
            signal_time_s: signal_time,
        });
    }
    Ok(pairs)
}

/// Samples a bunched (single-mode thermal) detection stream by thinning a
/// Poisson process driven by the squared modulus of a complex
/// Ornstein-Uhlenbeck amplitude. The resulting intensity autocorrelation is
/// g2(t) = 1 + exp(-2 ln 2 |t| / tau_c).
pub fn sample_thermal_stream(
    mean_rate_hz: f64,
    tau_c_s: f64,
    duration_s: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    if !(mean_rate_hz > 0.0) || !(tau_c_s > 0.0) || !(duration_s > 0.0) {
        return Err(CoreError::domain(
            "rate, correlation time and duration must be positive".into(),
        ));
    }
    // Field correlation time of the OU amplitude; |E|^2 then decorrelates
    // at twice that rate, matching the double-exponential bunching kernel.
    let field_tau = tau_c_s / LN2;
    let dt = field_tau / 8.0;
    let rho = (-dt / field_tau).exp();
    let diffusion = (1.0 - rho * rho).sqrt();
    let mut rng = stats::substream(seed, 1);
    let mut re = stats::sample_standard_normal(&mut rng) * std::f64::consts::FRAC_1_SQRT_2;
    let mut im = stats::sample_standard_normal(&mut rng) * std::f64::consts::FRAC_1_SQRT_2;
    let n_cells = (duration_s / dt).ceil() as u64;
    let mut events = Vec::new();
    for cell in 0..n_cells {
        re = rho * re + diffusion * stats::sample_standard_normal(&mut rng)
            * std::f64::consts::FRAC_1_SQRT_2;
        im = rho * im + diffusion * stats::sample_standard_normal(&mut rng)
            * std::f64::consts::FRAC_1_SQRT_2;
        // E[|E|^2] = 1, so the long-run rate stays at mean_rate_hz
        let intensity = 2.0 * (re * re + im * im);
        let mean = mean_rate_hz * intensity * dt;
        for _ in 0..stats::sample_poisson(&mut rng, mean) {
            events.push((cell as f64 + rng.random::<f64>()) * dt);
        }
    }
    events.retain(|&t| t < duration_s);
    events.sort_by(|a, b| a.partial_cmp(b).unwrap());
    Ok(events)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn correlation_time_matches_quoted_widths() {
        // 2.8 MHz line <-> 78.8 ns coincidence FWHM
        let tau = correlation_time_from_bandwidth(2.8e6).unwrap();
        assert_relative_eq!(tau, 78.8e-9, max_relative = 2e-3);
        // 2.5 MHz <-> 88.3 ns
        let tau = correlation_time_from_bandwidth(2.5e6).unwrap();
        assert_relative_eq!(tau, 88.3e-9, max_relative = 2e-3);
        // very broad spectrum: vanishing coherence time
        assert!(correlation_time_from_bandwidth(1e18).unwrap() < 1e-18);
        assert!(correlation_time_from_bandwidth(0.0).is_err());
        assert!(correlation_time_from_bandwidth(-1.0).is_err());
    }

    #[test]
    fn bandwidth_round_trip_is_identity() {
        for &bw in &[1e3, 2.8e6, 2.5e6, 1e9] {
            let back =
                bandwidth_from_correlation_time(correlation_time_from_bandwidth(bw).unwrap())
                    .unwrap();
            assert_relative_eq!(back, bw, max_relative = 1e-12);
        }
    }

    #[test]
    fn density_shape() {
        let tau = 89e-9;
        // symmetric
        for &t in &[1e-9, 40e-9, 200e-9] {
            assert_eq!(
                biphoton_temporal_density(t, tau),
                biphoton_temporal_density(-t, tau)
            );
        }
        // half maximum at +-tau_c/2
        let ratio = biphoton_temporal_density(tau / 2.0, tau) / biphoton_temporal_density(0.0, tau);
        assert_relative_eq!(ratio, 0.5, max_relative = 1e-12);
        // unit integral, checked by quadrature
        let integral = crate::stats::integrate(
            &|t| biphoton_temporal_density(t, tau),
            -40.0 * tau,
            40.0 * tau,
            1e-10,
        );
        assert_relative_eq!(integral, 1.0, max_relative = 1e-7);
    }

    #[test]
    fn multimode_autocorrelation_examples() {
        // 1.70 single-mode over 3.9 effective modes -> 1.18
        let g = multimode_autocorrelation(1.70, 3.9).unwrap();
        assert_relative_eq!(g, 1.1795, max_relative = 1e-4);
        // identity at one mode
        assert_relative_eq!(multimode_autocorrelation(1.7, 1.0).unwrap(), 1.7);
        // Poissonian limit
        assert!((multimode_autocorrelation(2.0, 1e12).unwrap() - 1.0).abs() < 1e-11);
        assert!(multimode_autocorrelation(2.0, 0.5).is_err());
        // inverse
        let sm = single_mode_from_multimode(1.18, 3.9).unwrap();
        assert_relative_eq!(sm, 1.702, max_relative = 1e-3);
    }

    #[test]
    fn multimode_monotone_in_mode_count() {
        let mut last = f64::INFINITY;
        for n in [1.0, 1.5, 2.0, 3.9, 10.0, 100.0] {
            let g = multimode_autocorrelation(1.7, n).unwrap();
            assert!(g < last);
            last = g;
        }
        // g2 = 1 is a fixed point for every mode count
        for n in [1.0, 2.0, 7.7] {
            assert_eq!(multimode_autocorrelation(1.0, n).unwrap(), 1.0);
        }
    }

    fn test_spec(pair_rate_hz: f64) -> BiphotonSpec {
        BiphotonSpec {
            signal_wavelength_m: 606e-9,
            idler_wavelength_m: 1436e-9,
            bandwidth_fwhm_hz: 2.8e6,
            n_spectral_modes: 3.9,
            cavity_fsr_hz: 423e6,
            pair_rate_hz,
            heralding_efficiency: 0.209,
            pump_power_w: 3.3e-3,
        }
    }

    #[test]
    fn zero_rate_gives_empty_list() {
        let pairs = sample_pair_emissions(&test_spec(0.0), 1.0, 3).unwrap();
        assert!(pairs.is_empty());
    }

    #[test]
    fn sampler_is_deterministic_per_seed() {
        let a = sample_pair_emissions(&test_spec(1e4), 0.05, 11).unwrap();
        let b = sample_pair_emissions(&test_spec(1e4), 0.05, 11).unwrap();
        let c = sample_pair_emissions(&test_spec(1e4), 0.05, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn pair_count_and_survival_fraction() {
        let spec = test_spec(2e4);
        let duration = 10.0;
        let pairs = sample_pair_emissions(&spec, duration, 5).unwrap();
        let expected = spec.pair_rate_hz * duration;
        let n = pairs.len() as f64;
        assert!(
            (n - expected).abs() < 4.0 * expected.sqrt(),
            "pair count {n} vs expectation {expected}"
        );
        let survivors = pairs.iter().filter(|p| p.signal_time_s.is_some()).count() as f64;
        let p = spec.heralding_efficiency;
        let sigma = (n * p * (1.0 - p)).sqrt();
        assert!(
            (survivors - n * p).abs() < 4.0 * sigma,
            "survivors {survivors} vs expectation {}",
            n * p
        );
    }
}
