//! Baseband chirp pulse, frame waveform, and matched-filter reference.
//!
//! The transmitted pulse is a linear FM chirp sweeping -B/2..+B/2 over the
//! pulse width. It is synthesized as the complex analytic baseband signal
//! exp(j(pi(B/tau)t^2 - pi B t)); the real passband variant only exists in
//! the echo simulator's passband mode.

use num_complex::Complex64;
use thiserror::Error;

use crate::params::FrameParams;

#[derive(Debug, Error)]
pub enum WaveformError {
    #[error("matched reference requires a pulse with nonzero energy")]
    ZeroEnergyPulse,
}

/// Complex baseband chirp evaluated at continuous time `t` (seconds).
///
/// Zero outside [0, tau]; phase pi(B/tau)t^2 - pi B t inside, so the value is
/// exactly 1+0j at both t = 0 and t = tau and the instantaneous frequency
/// sweeps linearly from -B/2 to +B/2.
pub fn chirp_value(bandwidth: f64, pulse_width: f64, t: f64) -> Complex64 {
    if t < 0.0 || t > pulse_width {
        return Complex64::new(0.0, 0.0);
    }
    let phase = std::f64::consts::PI * (bandwidth / pulse_width) * t * t
        - std::f64::consts::PI * bandwidth * t;
    Complex64::from_polar(1.0, phase)
}

/// A sampled pulse at a given rate.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseSamples {
    pub samples: Vec<Complex64>,
    pub sample_rate: f64,
    pub duration: f64,
}

impl PulseSamples {
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// The M-pulse frame waveform: one pulse at the head of each PRI, zeros in
/// the gaps.
#[derive(Debug, Clone)]
pub struct FrameWaveform {
    pub pulse: PulseSamples,
    pub pri_samples: usize,
    pub pulse_count: usize,
}

impl FrameWaveform {
    /// Materializes the full frame, length pulse_count * pri_samples.
    pub fn samples(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.pulse_count * self.pri_samples];
        for m in 0..self.pulse_count {
            let base = m * self.pri_samples;
            out[base..base + self.pulse.samples.len()].copy_from_slice(&self.pulse.samples);
        }
        out
    }
}

/// Samples the baseband chirp at the fast-time rate; length round(tau * Fs).
pub fn chirp_pulse(params: &FrameParams) -> PulseSamples {
    let n = params.pulse_samples();
    let samples = (0..n)
        .map(|k| chirp_value(params.bandwidth, params.pulse_width, k as f64 / params.fast_time_rate))
        .collect();
    PulseSamples {
        samples,
        sample_rate: params.fast_time_rate,
        duration: params.pulse_width,
    }
}

/// Builds the M-pulse frame waveform at PRI spacing.
pub fn frame_waveform(params: &FrameParams) -> FrameWaveform {
    FrameWaveform {
        pulse: chirp_pulse(params),
        pri_samples: params.pri_samples(),
        pulse_count: params.pulses_per_frame as usize,
    }
}

/// Matched-filter reference: time-reversed complex conjugate, normalized to
/// unit energy.
pub fn matched_reference(pulse: &PulseSamples) -> Result<PulseSamples, WaveformError> {
    let energy = pulse.energy();
    if !(energy > 0.0) {
        return Err(WaveformError::ZeroEnergyPulse);
    }
    let scale = 1.0 / energy.sqrt();
    let samples = pulse
        .samples
        .iter()
        .rev()
        .map(|s| s.conj() * scale)
        .collect();
    Ok(PulseSamples {
        samples,
        sample_rate: pulse.sample_rate,
        duration: pulse.duration,
    })
}
