//! System parameter set and derived resolution/ambiguity quantities.
//!
//! The defaults reproduce the reference parameter table of the design this
//! pipeline follows: 300 kHz carrier, 20 kHz chirp bandwidth, 600 us PRI,
//! 12 pulses per frame, 400 kHz fast-time sampling, 256-point slow-time FFT
//! and a 180-bin range window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Full radar parameter set for one frame.
///
/// All operations downstream take a validated `FrameParams`; call
/// [`FrameParams::validate`] at system boundaries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameParams {
    /// Propagation speed c in m/s.
    pub sound_speed: f64,
    /// Carrier frequency fc in Hz.
    pub carrier_freq: f64,
    /// Chirp bandwidth B in Hz.
    pub bandwidth: f64,
    /// Pulse repetition interval T in seconds.
    pub pri: f64,
    /// Pulses per frame M.
    pub pulses_per_frame: u32,
    /// Pulse width tau in seconds.
    pub pulse_width: f64,
    /// Fast-time (intra-PRI) complex sample rate Fs in Hz.
    pub fast_time_rate: f64,
    /// Slow-time FFT length N (Doppler bins).
    pub fft_points: u32,
    /// Range bins kept in the region of interest.
    pub range_bins: u32,
    /// First fast-time bin of the region of interest.
    pub roi_start_bin: u32,
}

impl Default for FrameParams {
    fn default() -> Self {
        FrameParams {
            sound_speed: 340.0,
            carrier_freq: 300_000.0,
            bandwidth: 20_000.0,
            pri: 600e-6,
            pulses_per_frame: 12,
            pulse_width: 200e-6,
            fast_time_rate: 400_000.0,
            fft_points: 256,
            range_bins: 180,
            roi_start_bin: 0,
        }
    }
}

/// Aggregated parameter validation failure listing every violated invariant.
#[derive(Debug, Clone, Error)]
#[error("invalid parameters: {}", violations.join("; "))]
pub struct InvalidParams {
    pub violations: Vec<String>,
}

impl FrameParams {
    /// Wavelength lambda = c / fc.
    pub fn wavelength(&self) -> f64 {
        self.sound_speed / self.carrier_freq
    }

    /// Complex fast-time samples per PRI, floor(T * Fs).
    ///
    /// A tiny epsilon guards against representation error in T * Fs when the
    /// product is an exact integer (600e-6 * 400 kHz = 240).
    pub fn pri_samples(&self) -> usize {
        (self.pri * self.fast_time_rate + 1e-9).floor() as usize
    }

    /// Samples in one pulse, round(tau * Fs).
    pub fn pulse_samples(&self) -> usize {
        (self.pulse_width * self.fast_time_rate).round() as usize
    }

    /// Frame period M * T in seconds (the slow-time frame rate is its inverse).
    pub fn frame_period(&self) -> f64 {
        self.pulses_per_frame as f64 * self.pri
    }

    /// Complex samples in one frame, M * pri_samples.
    pub fn frame_samples(&self) -> usize {
        self.pulses_per_frame as usize * self.pri_samples()
    }

    /// Range extent of one fast-time bin, c / (2 Fs).
    pub fn range_bin_width(&self) -> f64 {
        self.sound_speed / (2.0 * self.fast_time_rate)
    }

    /// Velocity extent of one Doppler FFT bin, lambda / (2 N T).
    pub fn velocity_bin_width(&self) -> f64 {
        self.wavelength() / (2.0 * self.fft_points as f64 * self.pri)
    }

    /// Checks every invariant, listing all violations on failure.
    pub fn validate(&self) -> Result<(), InvalidParams> {
        let mut violations = Vec::new();
        let mut check = |ok: bool, msg: &str| {
            if !ok {
                violations.push(msg.to_string());
            }
        };

        check(self.sound_speed > 0.0, "sound speed must be positive");
        check(self.bandwidth > 0.0, "bandwidth must be positive");
        check(
            self.carrier_freq > self.bandwidth / 2.0,
            "carrier frequency must exceed half the bandwidth",
        );
        check(self.pri > 0.0, "PRI must be positive");
        check(self.pulse_width > 0.0, "pulse width must be positive");
        check(self.pulse_width < self.pri, "pulse width must be < PRI");
        check(
            self.fast_time_rate >= 2.0 * self.bandwidth,
            "fast-time rate below complex Nyquist",
        );
        check(self.pulses_per_frame >= 1, "pulse count must be >= 1");
        check(self.fft_points >= 1, "FFT length must be >= 1");
        check(
            self.pulses_per_frame <= self.fft_points,
            "slow-time FFT is zero-padded, never truncated (M must be <= N)",
        );
        check(self.range_bins >= 1, "range window must be >= 1 bin");
        if self.pri > 0.0 && self.fast_time_rate > 0.0 {
            check(
                (self.range_bins + self.roi_start_bin) as usize <= self.pri_samples(),
                "range window must fit inside one PRI",
            );
        }

        if violations.is_empty() {
            Ok(())
        } else {
            Err(InvalidParams { violations })
        }
    }
}

/// Resolution and ambiguity quantities derived from a parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedResolutions {
    /// Range resolution R_d = c / (2B) in meters.
    pub range_resolution: f64,
    /// Velocity resolution v_d = lambda / (2MT) in m/s.
    pub velocity_resolution: f64,
    /// Unambiguous one-way range c * T / 2 in meters.
    pub unambiguous_range: f64,
    /// Unambiguous velocity lambda / (4T) in m/s (half the Doppler span).
    pub unambiguous_velocity: f64,
    /// Velocity per Doppler FFT bin, lambda / (2NT).
    pub velocity_bin_width: f64,
    /// Range per fast-time bin, c / (2 Fs).
    pub range_bin_width: f64,
}

/// Computes all derived quantities for a validated parameter set.
pub fn derive(params: &FrameParams) -> Result<DerivedResolutions, InvalidParams> {
    params.validate()?;
    let lambda = params.wavelength();
    Ok(DerivedResolutions {
        range_resolution: params.sound_speed / (2.0 * params.bandwidth),
        velocity_resolution: lambda / (2.0 * params.pulses_per_frame as f64 * params.pri),
        unambiguous_range: params.sound_speed * params.pri / 2.0,
        unambiguous_velocity: lambda / (4.0 * params.pri),
        velocity_bin_width: params.velocity_bin_width(),
        range_bin_width: params.range_bin_width(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_table() {
        let d = derive(&FrameParams::default()).unwrap();
        // 0.85 cm and 0.08 m/s within the documented tolerances.
        assert!((d.range_resolution - 0.0085).abs() < 1e-4);
        assert!((d.velocity_resolution - 0.08).abs() < 0.005);
        assert!((d.unambiguous_velocity - 0.49).abs() < 0.02);
    }

    #[test]
    fn trivial_parameter_collapse() {
        // c=2, B=1, fc=1, M=1, T=1 makes both formulas collapse to 1.
        let p = FrameParams {
            sound_speed: 2.0,
            carrier_freq: 1.0,
            bandwidth: 1.0,
            pri: 1.0,
            pulses_per_frame: 1,
            pulse_width: 0.5,
            fast_time_rate: 2.0,
            fft_points: 1,
            range_bins: 1,
            roi_start_bin: 0,
        };
        let d = derive(&p).unwrap();
        assert_eq!(d.range_resolution, 1.0);
        assert_eq!(d.velocity_resolution, 1.0);
    }

    #[test]
    fn scaling_laws() {
        let base = derive(&FrameParams::default()).unwrap();
        let mut p = FrameParams::default();
        p.bandwidth *= 2.0;
        let d = derive(&p).unwrap();
        assert!((d.range_resolution - base.range_resolution / 2.0).abs() < 1e-15);

        let mut p = FrameParams::default();
        p.pulses_per_frame *= 2;
        let d = derive(&p).unwrap();
        assert!((d.velocity_resolution - base.velocity_resolution / 2.0).abs() < 1e-15);
    }

    #[test]
    fn derive_is_pure() {
        let p = FrameParams::default();
        assert_eq!(derive(&p).unwrap(), derive(&p).unwrap());
    }

    #[test]
    fn defaults_validate() {
        assert!(FrameParams::default().validate().is_ok());
    }

    #[test]
    fn pulse_width_at_pri_is_rejected() {
        let mut p = FrameParams::default();
        p.pulse_width = p.pri;
        let err = p.validate().unwrap_err();
        assert!(err.violations.iter().any(|v| v == "pulse width must be < PRI"));
    }

    #[test]
    fn sub_nyquist_rate_is_rejected() {
        let mut p = FrameParams::default();
        p.fast_time_rate = p.bandwidth;
        let err = p.validate().unwrap_err();
        assert!(err
            .violations
            .iter()
            .any(|v| v == "fast-time rate below complex Nyquist"));
    }

    #[test]
    fn all_violations_are_listed() {
        let mut p = FrameParams::default();
        p.pulse_width = p.pri;
        p.fast_time_rate = p.bandwidth;
        let err = p.validate().unwrap_err();
        // Both injected faults are reported (dropping Fs also shrinks the
        // PRI sample budget, which surfaces as a third violation).
        assert!(err.violations.iter().any(|v| v == "pulse width must be < PRI"));
        assert!(err
            .violations
            .iter()
            .any(|v| v == "fast-time rate below complex Nyquist"));
        assert!(err.violations.len() >= 2);
    }

    #[test]
    fn roi_must_fit_inside_pri() {
        let mut p = FrameParams::default();
        // floor(T*Fs) = 240, so 61 + 180 overruns by one bin.
        p.roi_start_bin = 61;
        assert!(p.validate().is_err());
        p.roi_start_bin = 60;
        assert!(p.validate().is_ok());
    }

    #[test]
    fn derived_bin_widths_bound_resolutions() {
        let d = derive(&FrameParams::default()).unwrap();
        assert!(d.velocity_bin_width <= d.velocity_resolution);
        assert!(d.range_bin_width <= d.range_resolution);
        // The Doppler axis spans the full unambiguous interval.
        let n = FrameParams::default().fft_points as f64;
        assert!(d.velocity_bin_width * n >= 2.0 * d.unambiguous_velocity * (1.0 - 1e-12));
    }

    #[test]
    fn default_pri_holds_240_samples() {
        let p = FrameParams::default();
        assert_eq!(p.pri_samples(), 240);
        assert_eq!(p.pulse_samples(), 80);
        assert_eq!(p.frame_samples(), 2880);
    }
}
