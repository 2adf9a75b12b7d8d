//! Discrete-event Monte Carlo of storage trials.
//!
//! A run is a sequence of trials on a fixed period. Each trial samples pair
//! emissions during the idler gate, stores and retrieves heralded signals
//! with the configured echo efficiency, adds control-pulse noise and dark
//! counts, and applies the detector models. Pair generation is confined to
//! the idler gate, which also models the pump being switched off during the
//! storage interval.

use rand::Rng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::memory::{MemoryEfficiency, SpinParams};
use crate::source::BiphotonSpec;
use crate::stats;
use crate::stream::{Channel, TimestampStream, TsEvent, FLAG_HERALD_TRIGGER};

/// Noise in the spin-wave mode after both control pulses, relative to the
/// noise after the first pulse alone.
pub const CP2_NOISE_RATIO: f64 = 0.86;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceMode {
    /// Storage trials run blind on a fixed schedule.
    Unconditional,
    /// Each detected herald triggers one storage trial plus a train of
    /// noise-only follow-up trials used as the accidental baseline.
    SemiConditional,
    /// Herald-triggered trials with no follow-ups.
    Conditional,
}

/// Trial timing and discipline.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StorageSequence {
    pub mode: SequenceMode,
    pub trials_per_prep: u64,
    pub preparations: u64,
    pub trial_period_s: f64,
    /// Pre-programmed echo delay tau.
    pub afc_delay_s: f64,
    /// Spin storage interval between the two control pulses.
    pub spin_time_s: f64,
    /// Idler gate length; the gate opens at the start of the trial.
    pub idler_gate_s: f64,
    /// Signal gate length.
    pub signal_gate_s: f64,
    /// How far before the nominal echo arrival the signal gate opens.
    pub signal_gate_lead_s: f64,
    pub coincidence_window_s: f64,
    pub pump_off_s: f64,
    pub follow_up_trials: u64,
    pub duty_cycle: f64,
    /// FWHM of the retrieved wavepacket envelope. The default is tuned so a
    /// 320 ns coincidence window captures 80% of the echo.
    pub echo_tau_c_s: f64,
    /// Split retrieved signals 50/50 onto the two signal detectors.
    pub hbt_split: bool,
}

impl StorageSequence {
    pub fn total_storage_s(&self) -> f64 {
        self.afc_delay_s + self.spin_time_s
    }

    pub fn total_trials(&self) -> u64 {
        self.trials_per_prep * self.preparations
    }

    /// Trials per herald block in conditional disciplines.
    pub fn block_len(&self) -> u64 {
        match self.mode {
            SequenceMode::Unconditional => 1,
            SequenceMode::SemiConditional => 1 + self.follow_up_trials,
            SequenceMode::Conditional => 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |path: &str, m: &str| Err(CoreError::config(path, m));
        if !(self.trial_period_s > 0.0) {
            return err("sequence.trial_period", "must be positive");
        }
        if !(self.afc_delay_s > 0.0) {
            return err("sequence.afc_delay", "must be positive");
        }
        if self.spin_time_s < 0.0 {
            return err("sequence.spin_time", "must be nonnegative");
        }
        if !(self.idler_gate_s > 0.0) || !(self.signal_gate_s > 0.0) {
            return err("sequence.gates", "gate lengths must be positive");
        }
        if self.signal_gate_lead_s < 0.0 || self.signal_gate_lead_s > self.total_storage_s() {
            return err(
                "sequence.signal_gate_lead",
                "must lie between 0 and the total storage time",
            );
        }
        if self.coincidence_window_s > self.signal_gate_s {
            return err(
                "sequence.coincidence_window",
                "must not exceed the signal gate",
            );
        }
        if self.trial_period_s <= self.total_storage_s() + self.signal_gate_s {
            return err(
                "sequence.trial_period",
                "must exceed total storage plus the signal gate",
            );
        }
        if self.total_storage_s() - self.signal_gate_lead_s < self.idler_gate_s {
            return err(
                "sequence.signal_gate_lead",
                "signal gate must open after the idler gate closes",
            );
        }
        if !(self.echo_tau_c_s > 0.0) {
            return err("sequence.echo_tau_c", "must be positive");
        }
        if !(0.0..=1.0).contains(&self.duty_cycle) {
            return err("sequence.duty_cycle", "must lie in [0, 1]");
        }
        if self.mode == SequenceMode::SemiConditional {
            if self.follow_up_trials == 0 {
                return err(
                    "sequence.follow_up_trials",
                    "semi-conditional runs need at least one follow-up trial",
                );
            }
            if self.total_trials() % self.block_len() != 0 {
                return err(
                    "sequence.trials_per_prep",
                    "total trials must be a multiple of the herald block length",
                );
            }
        }
        Ok(())
    }
}

/// Control-pulse noise floors, expressed as photons per storage trial
/// within the reference coincidence window, referred to the memory output.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseModel {
    pub floor_unconditional: f64,
    pub floor_conditional: f64,
    pub floor_after_first_cp: f64,
    pub reference_window_s: f64,
    /// Default dark-count rate applied to detectors without their own.
    pub dark_rate_hz: f64,
}

impl NoiseModel {
    pub fn validate(&self) -> Result<()> {
        for (path, v) in [
            ("noise.floor_unconditional", self.floor_unconditional),
            ("noise.floor_conditional", self.floor_conditional),
            ("noise.floor_after_first_cp", self.floor_after_first_cp),
            ("noise.dark_rate", self.dark_rate_hz),
        ] {
            if v < 0.0 {
                return Err(CoreError::config(path, "must be nonnegative"));
            }
        }
        if !(self.reference_window_s > 0.0) {
            return Err(CoreError::config(
                "noise.reference_window",
                "must be positive",
            ));
        }
        Ok(())
    }
}

/// Expected noise photons per trial and reference window in the two echo
/// temporal modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CpNoiseSchedule {
    /// Two-level echo mode, after the first control pulse.
    pub afc_mode_floor: f64,
    /// Spin-wave echo mode, after both control pulses.
    pub sw_mode_floor: f64,
}

/// Noise expectation per temporal mode for a sequence discipline. In the
/// conditional disciplines the spin-wave mode carries [`CP2_NOISE_RATIO`]
/// of the noise measured after the first control pulse.
pub fn cp_noise_schedule(noise: &NoiseModel, mode: SequenceMode) -> CpNoiseSchedule {
    match mode {
        SequenceMode::Unconditional => CpNoiseSchedule {
            afc_mode_floor: noise.floor_unconditional,
            sw_mode_floor: noise.floor_unconditional,
        },
        SequenceMode::SemiConditional | SequenceMode::Conditional => CpNoiseSchedule {
            afc_mode_floor: noise.floor_after_first_cp,
            sw_mode_floor: CP2_NOISE_RATIO * noise.floor_after_first_cp,
        },
    }
}

/// Single-detector model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorModel {
    pub efficiency: f64,
    /// Dark-count rate; falls back to the noise model default when absent.
    pub dark_rate_hz: Option<f64>,
    /// Explicit dark-count gate windows (intra-trial seconds). Empty means
    /// the sequence-derived gate for the detector's channel.
    #[serde(default)]
    pub gate_windows: Vec<(f64, f64)>,
}

impl DetectorModel {
    pub fn validate(&self, path: &str) -> Result<()> {
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(CoreError::config(
                format!("{path}.efficiency"),
                "must lie in [0, 1]",
            ));
        }
        if let Some(d) = self.dark_rate_hz {
            if d < 0.0 {
                return Err(CoreError::config(
                    format!("{path}.dark_rate"),
                    "must be nonnegative",
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DetectorBank {
    pub idler: DetectorModel,
    pub signal_a: DetectorModel,
    pub signal_b: DetectorModel,
}

/// Chirped transfer pulse.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ControlPulse {
    pub amplitude_fwhm_s: f64,
    pub chirp_span_hz: f64,
    pub peak_power_w: f64,
    pub spacing_s: f64,
}

/// Normalized amplitude and instantaneous frequency offset of a control
/// pulse at time `t_s` from the pulse center: Gaussian amplitude of the
/// configured FWHM, hyperbolic-tangent chirp spanning `chirp_span_hz`.
pub fn control_pulse_waveform(t_s: f64, cp: &ControlPulse) -> (f64, f64) {
    assert!(cp.amplitude_fwhm_s > 0.0);
    let w = cp.amplitude_fwhm_s;
    let amplitude = (-4.0 * stats::LN2 * t_s * t_s / (w * w)).exp();
    let offset = 0.5 * cp.chirp_span_hz * (4.0 * t_s / w).tanh();
    (amplitude, offset)
}

/// Per-category detection counts accumulated by a run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub trials: u64,
    pub herald_blocks: u64,
    pub pairs_generated: u64,
    pub heralds_detected: u64,
    pub idler_dark_counts: u64,
    pub echoes_detected: u64,
    pub noise_detected: u64,
    pub signal_dark_counts: u64,
}

impl RunSummary {
    fn merge(&mut self, other: &RunSummary) {
        self.trials += other.trials;
        self.herald_blocks += other.herald_blocks;
        self.pairs_generated += other.pairs_generated;
        self.heralds_detected += other.heralds_detected;
        self.idler_dark_counts += other.idler_dark_counts;
        self.echoes_detected += other.echoes_detected;
        self.noise_detected += other.noise_detected;
        self.signal_dark_counts += other.signal_dark_counts;
    }
}

#[derive(Debug)]
pub struct RunOutput {
    pub idler: TimestampStream,
    pub signal_a: TimestampStream,
    pub signal_b: TimestampStream,
    pub summary: RunSummary,
}

/// Validated inputs for one run. `echo_transmission` is the passive
/// transmission of the retrieved photon through the filtering stages.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub sequence: StorageSequence,
    pub source: BiphotonSpec,
    pub memory: MemoryEfficiency,
    pub spin: SpinParams,
    pub noise: NoiseModel,
    pub detectors: DetectorBank,
    pub echo_transmission: f64,
}

impl RunPlan {
    pub fn validate(&self) -> Result<()> {
        self.sequence.validate()?;
        self.source.validate()?;
        self.memory.validate()?;
        self.spin.validate()?;
        self.noise.validate()?;
        self.detectors.idler.validate("detectors.idler")?;
        self.detectors.signal_a.validate("detectors.signal_a")?;
        self.detectors.signal_b.validate("detectors.signal_b")?;
        if !(0.0..=1.0).contains(&self.echo_transmission) {
            return Err(CoreError::config(
                "memory.echo_transmission",
                "must lie in [0, 1]",
            ));
        }
        if (self.sequence.spin_time_s - self.spin.spin_time_s).abs() > 1e-12 {
            return Err(CoreError::config(
                "sequence.spin_time",
                "must match spin.spin_time",
            ));
        }
        if (self.memory.eta_c - self.spin.dephasing_efficiency()).abs() > 1e-9 {
            return Err(CoreError::config(
                "memory.eta_c",
                "must equal the dephasing efficiency of the configured spin parameters",
            ));
        }
        Ok(())
    }

    /// Full echo probability for a signal photon at the memory input.
    pub fn echo_probability(&self) -> f64 {
        self.memory.eta_sw * self.echo_transmission
    }
}

const PS: f64 = 1e12;

fn to_ps(t_s: f64) -> i64 {
    (t_s * PS).round() as i64
}

#[derive(Clone, Copy)]
struct Timing {
    period_ps: i64,
    idler_gate_ps: i64,
    sig_start_ps: i64,
    sig_len_ps: i64,
    storage_ps: i64,
}

impl Timing {
    fn of(seq: &StorageSequence) -> Timing {
        let storage_ps = to_ps(seq.total_storage_s());
        let sig_start_ps = storage_ps - to_ps(seq.signal_gate_lead_s);
        Timing {
            period_ps: to_ps(seq.trial_period_s),
            idler_gate_ps: to_ps(seq.idler_gate_s),
            sig_start_ps,
            sig_len_ps: to_ps(seq.signal_gate_s),
            storage_ps,
        }
    }

    fn in_signal_gate(&self, offset_ps: i64) -> bool {
        offset_ps >= self.sig_start_ps && offset_ps < self.sig_start_ps + self.sig_len_ps
    }
}

struct ChunkOut {
    idler: Vec<TsEvent>,
    a: Vec<TsEvent>,
    b: Vec<TsEvent>,
    summary: RunSummary,
}

/// Runs the configured sequence and returns the three detection streams.
/// Identical plan and seed give bit-identical streams; trials are simulated
/// in independent seeded batches, so the result does not depend on the
/// number of threads.
pub fn run_sequence(plan: &RunPlan, seed: u64) -> Result<RunOutput> {
    plan.validate()?;
    let timing = Timing::of(&plan.sequence);
    let schedule = cp_noise_schedule(&plan.noise, plan.sequence.mode);

    let block_len = plan.sequence.block_len();
    let n_units = match plan.sequence.mode {
        SequenceMode::Unconditional => plan.sequence.total_trials(),
        _ => plan.sequence.total_trials() / block_len,
    };
    const CHUNK: u64 = 4096;
    let n_chunks = n_units.div_ceil(CHUNK);

    let chunks: Vec<ChunkOut> = (0..n_chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stats::substream(seed, chunk);
            let lo = chunk * CHUNK;
            let hi = ((chunk + 1) * CHUNK).min(n_units);
            let mut out = ChunkOut {
                idler: Vec::new(),
                a: Vec::new(),
                b: Vec::new(),
                summary: RunSummary::default(),
            };
            for unit in lo..hi {
                match plan.sequence.mode {
                    SequenceMode::Unconditional => {
                        simulate_scheduled_trial(plan, &timing, &schedule, unit, &mut rng, &mut out)
                    }
                    SequenceMode::SemiConditional | SequenceMode::Conditional => {
                        simulate_herald_block(plan, &timing, &schedule, unit, &mut rng, &mut out)
                    }
                }
            }
            out
        })
        .collect();

    let mut output = RunOutput {
        idler: TimestampStream::new(Channel::Idler),
        signal_a: TimestampStream::new(Channel::SignalA),
        signal_b: TimestampStream::new(Channel::SignalB),
        summary: RunSummary::default(),
    };
    for chunk in &chunks {
        output.idler.events.extend_from_slice(&chunk.idler);
        output.signal_a.events.extend_from_slice(&chunk.a);
        output.signal_b.events.extend_from_slice(&chunk.b);
        output.summary.merge(&chunk.summary);
    }
    debug_assert!(output.idler.validate(Some(timing.period_ps)).is_ok());
    debug_assert!(output.signal_a.validate(Some(timing.period_ps)).is_ok());
    debug_assert!(output.signal_b.validate(Some(timing.period_ps)).is_ok());
    Ok(output)
}

/// One unconditional trial: pairs sampled across the idler gate, heralded
/// signals stored and retrieved, noise and darks added.
fn simulate_scheduled_trial(
    plan: &RunPlan,
    timing: &Timing,
    schedule: &CpNoiseSchedule,
    trial: u64,
    rng: &mut ChaCha12Rng,
    out: &mut ChunkOut,
) {
    out.summary.trials += 1;
    let trial_start = trial as i64 * timing.period_ps;
    let mut idler: Vec<TsEvent> = Vec::new();
    let mut sig_a: Vec<TsEvent> = Vec::new();
    let mut sig_b: Vec<TsEvent> = Vec::new();

    let mean_pairs = plan.source.pair_rate_hz * plan.sequence.idler_gate_s;
    let n_pairs = stats::sample_poisson(rng, mean_pairs);
    out.summary.pairs_generated += n_pairs;
    for _ in 0..n_pairs {
        let u_ps = (rng.random::<f64>() * timing.idler_gate_ps as f64) as i64;
        if rng.random::<f64>() < plan.detectors.idler.efficiency {
            out.summary.heralds_detected += 1;
            idler.push(TsEvent {
                time_ps: trial_start + u_ps,
                trial_index: trial,
                flags: 0,
            });
        }
        if rng.random::<f64>() < plan.source.heralding_efficiency
            && rng.random::<f64>() < plan.echo_probability()
        {
            let jitter =
                stats::sample_double_exponential(rng, plan.sequence.echo_tau_c_s) * PS;
            let echo_ps = u_ps + timing.storage_ps + jitter.round() as i64;
            emit_echo(plan, timing, trial, trial_start, echo_ps, rng, &mut sig_a, &mut sig_b, out);
        }
    }

    add_noise_and_darks(
        plan,
        timing,
        schedule.sw_mode_floor,
        trial,
        trial_start,
        true,
        rng,
        &mut idler,
        &mut sig_a,
        &mut sig_b,
        out,
    );

    push_sorted(&mut out.idler, idler);
    push_sorted(&mut out.a, sig_a);
    push_sorted(&mut out.b, sig_b);
}

/// One herald block: a triggered storage trial followed by noise-only
/// follow-up trials. The idler gate is closed for the rest of the block, so
/// the only idler event is the trigger itself.
fn simulate_herald_block(
    plan: &RunPlan,
    timing: &Timing,
    schedule: &CpNoiseSchedule,
    block: u64,
    rng: &mut ChaCha12Rng,
    out: &mut ChunkOut,
) {
    let block_len = plan.sequence.block_len();
    out.summary.herald_blocks += 1;
    for j in 0..block_len {
        let trial = block * block_len + j;
        out.summary.trials += 1;
        let trial_start = trial as i64 * timing.period_ps;
        let mut idler: Vec<TsEvent> = Vec::new();
        let mut sig_a: Vec<TsEvent> = Vec::new();
        let mut sig_b: Vec<TsEvent> = Vec::new();

        if j == 0 {
            out.summary.heralds_detected += 1;
            idler.push(TsEvent {
                time_ps: trial_start,
                trial_index: trial,
                flags: FLAG_HERALD_TRIGGER,
            });
            if rng.random::<f64>() < plan.source.heralding_efficiency
                && rng.random::<f64>() < plan.echo_probability()
            {
                let jitter =
                    stats::sample_double_exponential(rng, plan.sequence.echo_tau_c_s) * PS;
                let echo_ps = timing.storage_ps + jitter.round() as i64;
                emit_echo(
                    plan, timing, trial, trial_start, echo_ps, rng, &mut sig_a, &mut sig_b, out,
                );
            }
        }

        add_noise_and_darks(
            plan,
            timing,
            schedule.sw_mode_floor,
            trial,
            trial_start,
            false,
            rng,
            &mut idler,
            &mut sig_a,
            &mut sig_b,
            out,
        );

        push_sorted(&mut out.idler, idler);
        push_sorted(&mut out.a, sig_a);
        push_sorted(&mut out.b, sig_b);
    }
}

#[allow(clippy::too_many_arguments)]
fn emit_echo(
    plan: &RunPlan,
    timing: &Timing,
    trial: u64,
    trial_start: i64,
    echo_offset_ps: i64,
    rng: &mut ChaCha12Rng,
    sig_a: &mut Vec<TsEvent>,
    sig_b: &mut Vec<TsEvent>,
    out: &mut ChunkOut,
) {
    if !timing.in_signal_gate(echo_offset_ps) {
        return;
    }
    let event = TsEvent {
        time_ps: trial_start + echo_offset_ps,
        trial_index: trial,
        flags: 0,
    };
    if plan.sequence.hbt_split {
        if rng.random::<bool>() {
            if rng.random::<f64>() < plan.detectors.signal_a.efficiency {
                out.summary.echoes_detected += 1;
                sig_a.push(event);
            }
        } else if rng.random::<f64>() < plan.detectors.signal_b.efficiency {
            out.summary.echoes_detected += 1;
            sig_b.push(event);
        }
    } else if rng.random::<f64>() < plan.detectors.signal_a.efficiency {
        out.summary.echoes_detected += 1;
        sig_a.push(event);
    }
}

#[allow(clippy::too_many_arguments)]
fn add_noise_and_darks(
    plan: &RunPlan,
    timing: &Timing,
    sw_floor: f64,
    trial: u64,
    trial_start: i64,
    idler_gate_open: bool,
    rng: &mut ChaCha12Rng,
    idler: &mut Vec<TsEvent>,
    sig_a: &mut Vec<TsEvent>,
    sig_b: &mut Vec<TsEvent>,
    out: &mut ChunkOut,
) {
    // control-pulse noise, uniform across the signal gate
    let noise_per_trial =
        sw_floor * plan.sequence.signal_gate_s / plan.noise.reference_window_s;
    let split = if plan.sequence.hbt_split { 0.5 } else { 1.0 };
    let arms: [(&DetectorModel, &mut Vec<TsEvent>, bool); 2] = [
        (&plan.detectors.signal_a, sig_a, true),
        (&plan.detectors.signal_b, sig_b, plan.sequence.hbt_split),
    ];
    let dark = |det: &DetectorModel| det.dark_rate_hz.unwrap_or(plan.noise.dark_rate_hz);
    for (det, sink, active) in arms {
        if !active {
            continue;
        }
        let mean = noise_per_trial * split * det.efficiency;
        for _ in 0..stats::sample_poisson(rng, mean) {
            out.summary.noise_detected += 1;
            sink.push(TsEvent {
                time_ps: trial_start
                    + timing.sig_start_ps
                    + (rng.random::<f64>() * timing.sig_len_ps as f64) as i64,
                trial_index: trial,
                flags: 0,
            });
        }
        // dark counts in the detector's gate
        let windows = if det.gate_windows.is_empty() {
            vec![(
                timing.sig_start_ps as f64 / PS,
                (timing.sig_start_ps + timing.sig_len_ps) as f64 / PS,
            )]
        } else {
            det.gate_windows.clone()
        };
        for (from_s, to_s) in windows {
            let mean = dark(det) * (to_s - from_s).max(0.0);
            for _ in 0..stats::sample_poisson(rng, mean) {
                out.summary.signal_dark_counts += 1;
                sink.push(TsEvent {
                    time_ps: trial_start
                        + to_ps(from_s)
                        + (rng.random::<f64>() * (to_s - from_s) * PS) as i64,
                    trial_index: trial,
                    flags: 0,
                });
            }
        }
    }
    if idler_gate_open {
        let mean = dark(&plan.detectors.idler) * plan.sequence.idler_gate_s;
        for _ in 0..stats::sample_poisson(rng, mean) {
            out.summary.idler_dark_counts += 1;
            idler.push(TsEvent {
                time_ps: trial_start + (rng.random::<f64>() * timing.idler_gate_ps as f64) as i64,
                trial_index: trial,
                flags: 0,
            });
        }
    }
}

fn push_sorted(target: &mut Vec<TsEvent>, mut events: Vec<TsEvent>) {
    events.sort_by_key(|e| e.time_ps);
    target.extend(events);
}
