//! Range-Doppler feature extraction: optional I&Q demodulation, fast-time
//! matched filtering, slow-time FFT, and cube assembly.
//!
//! Every frame of M pulses becomes one range-Doppler image: matched filtering
//! compresses each pulse to range profiles, then a windowed, zero-padded
//! N-point FFT across the pulses resolves velocity per range bin. The range
//! axis is cropped to the configured region of interest, giving the
//! N x range_bins (default 256 x 180) image.

use std::f64::consts::PI;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::echosim::{FormatError, GestureClass, Recording};
use crate::params::{FrameParams, InvalidParams};
use crate::waveform::{chirp_pulse, matched_reference};
use crate::wire;

/// One frame's range-Doppler magnitude image.
///
/// `mags` is row-major with the Doppler bin as the row: element
/// `d * range_bins + r`. Row N/2 is zero velocity; positive rows are receding
/// (range increasing). Values are linear magnitudes, >= 0.
#[derive(Debug, Clone)]
pub struct RangeDopplerImage {
    pub doppler_bins: usize,
    pub range_bins: usize,
    pub mags: Vec<f64>,
    pub frame_index: usize,
    /// Velocity of each Doppler row in m/s.
    pub velocity_axis: Vec<f64>,
    /// Range of each column in meters.
    pub range_axis: Vec<f64>,
}

impl RangeDopplerImage {
    pub fn at(&self, doppler: usize, range: usize) -> f64 {
        self.mags[doppler * self.range_bins + range]
    }

    pub fn max(&self) -> f64 {
        self.mags.iter().fold(0.0f64, |a, &b| a.max(b))
    }
}

/// The per-gesture range-Doppler-time cube.
#[derive(Debug, Clone)]
pub struct RdCube {
    pub params: FrameParams,
    pub label: GestureClass,
    pub subject: u16,
    pub images: Vec<RangeDopplerImage>,
}

#[derive(Debug, Error)]
pub enum RdError {
    #[error(transparent)]
    Params(#[from] InvalidParams),
    #[error("frame has {got} samples, expected {expected}")]
    BadFrameLength { got: usize, expected: usize },
    #[error("profile block has {got} samples, expected {expected}")]
    BadProfileLength { got: usize, expected: usize },
}

/// Shared state for processing frames of one parameter set: FFT plans, the
/// matched-filter reference spectrum, the slow-time window and the image axes.
pub struct RdProcessor {
    params: FrameParams,
    pri_samples: usize,
    pulses: usize,
    fft_len: usize,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    ref_spectrum: Vec<Complex64>,
    ref_len: usize,
    dop_fft: Arc<dyn Fft<f64>>,
    window: Vec<f64>,
    velocity_axis: Vec<f64>,
    range_axis: Vec<f64>,
}

impl RdProcessor {
    pub fn new(params: &FrameParams) -> Result<RdProcessor, InvalidParams> {
        params.validate()?;
        let pri_samples = params.pri_samples();
        let pulses = params.pulses_per_frame as usize;
        let reference = matched_reference(&chirp_pulse(params)).expect("chirp has energy");
        let ref_len = reference.samples.len();
        let fft_len = (pri_samples + ref_len - 1).next_power_of_two();

        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(fft_len);
        let inv = planner.plan_fft_inverse(fft_len);
        let mut ref_padded = vec![Complex64::new(0.0, 0.0); fft_len];
        ref_padded[..ref_len].copy_from_slice(&reference.samples);
        fwd.process(&mut ref_padded);

        let n = params.fft_points as usize;
        let dop_fft = planner.plan_fft_forward(n);
        // Periodic Hann over the M pulses; suppresses Doppler sidelobes that
        // would otherwise spawn phantom detections downstream.
        let window: Vec<f64> = (0..pulses)
            .map(|m| 0.5 * (1.0 - (2.0 * PI * m as f64 / pulses as f64).cos()))
            .collect();

        let vbw = params.velocity_bin_width();
        let velocity_axis = (0..n).map(|d| (d as f64 - n as f64 / 2.0) * vbw).collect();
        let rbw = params.range_bin_width();
        let range_axis = (0..params.range_bins as usize)
            .map(|c| (params.roi_start_bin as usize + c) as f64 * rbw)
            .collect();

        Ok(RdProcessor {
            params: params.clone(),
            pri_samples,
            pulses,
            fft_len,
            fwd,
            inv,
            ref_spectrum: ref_padded,
            ref_len,
            dop_fft,
            window,
            velocity_axis,
            range_axis,
        })
    }

    pub fn params(&self) -> &FrameParams {
        &self.params
    }

    /// Per-pulse matched filtering of one frame (pulse-major samples).
    ///
    /// Output bin k of each profile corresponds to round-trip delay k/Fs.
    /// Runs in the frequency domain; the direct correlation is the test
    /// oracle it must match.
    pub fn matched_filter(&self, frame: &[Complex64]) -> Result<Vec<Complex64>, RdError> {
        let expected = self.pulses * self.pri_samples;
        if frame.len() != expected {
            return Err(RdError::BadFrameLength {
                got: frame.len(),
                expected,
            });
        }
        let mut profiles = vec![Complex64::new(0.0, 0.0); expected];
        let mut buf = vec![Complex64::new(0.0, 0.0); self.fft_len];
        let scale = 1.0 / self.fft_len as f64;
        for p in 0..self.pulses {
            let rx = &frame[p * self.pri_samples..(p + 1) * self.pri_samples];
            buf.fill(Complex64::new(0.0, 0.0));
            buf[..self.pri_samples].copy_from_slice(rx);
            self.fwd.process(&mut buf);
            for (b, h) in buf.iter_mut().zip(&self.ref_spectrum) {
                *b *= h;
            }
            self.inv.process(&mut buf);
            let out = &mut profiles[p * self.pri_samples..(p + 1) * self.pri_samples];
            for (k, o) in out.iter_mut().enumerate() {
                *o = buf[self.ref_len - 1 + k] * scale;
            }
        }
        Ok(profiles)
    }

    /// Slow-time windowed FFT per ROI range bin, FFT-shifted so row N/2 is
    /// zero velocity, cropped to the region of interest.
    pub fn doppler_fft(&self, profiles: &[Complex64], frame_index: usize) -> Result<RangeDopplerImage, RdError> {
        let expected = self.pulses * self.pri_samples;
        if profiles.len() != expected {
            return Err(RdError::BadProfileLength {
                got: profiles.len(),
                expected,
            });
        }
        let n = self.params.fft_points as usize;
        let range_bins = self.params.range_bins as usize;
        let roi = self.params.roi_start_bin as usize;
        let mut mags = vec![0.0f64; n * range_bins];
        let mut buf = vec![Complex64::new(0.0, 0.0); n];
        for col in 0..range_bins {
            let bin = roi + col;
            buf.fill(Complex64::new(0.0, 0.0));
            for m in 0..self.pulses {
                // Conjugation orients the axis so receding targets land on
                // positive rows after the shift.
                buf[m] = profiles[m * self.pri_samples + bin].conj() * self.window[m];
            }
            self.dop_fft.process(&mut buf);
            for d in 0..n {
                let src = (d + n / 2) % n;
                mags[d * range_bins + col] = buf[src].norm();
            }
        }
        Ok(RangeDopplerImage {
            doppler_bins: n,
            range_bins,
            mags,
            frame_index,
            velocity_axis: self.velocity_axis.clone(),
            range_axis: self.range_axis.clone(),
        })
    }

    pub fn process_frame(&self, frame: &[Complex64], frame_index: usize) -> Result<RangeDopplerImage, RdError> {
        let profiles = self.matched_filter(frame)?;
        self.doppler_fft(&profiles, frame_index)
    }
}

/// Processes a whole recording into its range-Doppler-time cube.
pub fn process_recording(rec: &Recording) -> Result<RdCube, RdError> {
    let proc = RdProcessor::new(&rec.params)?;
    let images = rec
        .frames
        .par_iter()
        .enumerate()
        .map(|(i, frame)| proc.process_frame(frame, i))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RdCube {
        params: rec.params.clone(),
        label: rec.label,
        subject: rec.subject,
        images,
    })
}

// ---------------------------------------------------------------------------
// I&Q demodulation (passband mode support)
// ---------------------------------------------------------------------------

#[derive(Debug, Error)]
pub enum DemodError {
    #[error("passband rate {rate} Hz is below 2(fc + B/2) = {min} Hz")]
    RateTooLow { rate: f64, min: f64 },
    #[error("passband rate {rate} Hz is not an integer multiple of the fast-time rate {fs} Hz")]
    RateNotMultiple { rate: f64, fs: f64 },
}

/// Zeroth-order modified Bessel function of the first kind (series form).
fn bessel_i0(x: f64) -> f64 {
    let mut sum = 1.0;
    let mut term = 1.0;
    let half = x / 2.0;
    for k in 1..64 {
        term *= (half / k as f64) * (half / k as f64);
        sum += term;
        if term < sum * 1e-16 {
            break;
        }
    }
    sum
}

/// Linear-phase Kaiser-window FIR lowpass with >= `atten_db` stopband
/// rejection at `stop_hz`; passband edge `pass_hz`. Odd tap count so the
/// group delay is an integer.
fn kaiser_lowpass(rate: f64, pass_hz: f64, stop_hz: f64, atten_db: f64) -> Vec<f64> {
    let df = (stop_hz - pass_hz) / rate;
    let beta = if atten_db > 50.0 {
        0.1102 * (atten_db - 8.7)
    } else if atten_db >= 21.0 {
        0.5842 * (atten_db - 21.0).powf(0.4) + 0.07886 * (atten_db - 21.0)
    } else {
        0.0
    };
    let mut taps = ((atten_db - 7.95) / (2.285 * 2.0 * PI * df)).ceil() as usize + 1;
    if taps % 2 == 0 {
        taps += 1;
    }
    let cutoff = (pass_hz + stop_hz) / 2.0 / rate; // normalized, 0..0.5
    let mid = (taps - 1) as f64 / 2.0;
    let denom = bessel_i0(beta);
    (0..taps)
        .map(|t| {
            let x = t as f64 - mid;
            let sinc = if x == 0.0 {
                2.0 * cutoff
            } else {
                (2.0 * PI * cutoff * x).sin() / (PI * x)
            };
            let w = bessel_i0(beta * (1.0 - (x / mid) * (x / mid)).max(0.0).sqrt()) / denom;
            sinc * w
        })
        .collect()
}

/// The demodulator's reconstruction lowpass: passband edge 1.2*B/2, >= 60 dB
/// stopband at 2B.
fn reconstruction_lowpass(sample_rate: f64, params: &FrameParams) -> Vec<f64> {
    kaiser_lowpass(
        sample_rate,
        1.2 * params.bandwidth / 2.0,
        2.0 * params.bandwidth,
        60.0,
    )
}

/// I&Q demodulates one real passband frame to complex baseband at Fs.
///
/// Mixes with exp(-j 2 pi fc t), lowpass filters (cutoff 1.2*B/2 passband
/// edge, >= 60 dB at 2B, group delay compensated) and decimates. A pure
/// carrier demodulates to the constant 1/2; no gain compensation is applied.
pub fn iq_demodulate(
    passband: &[f64],
    sample_rate: f64,
    params: &FrameParams,
) -> Result<Vec<Complex64>, DemodError> {
    let min_rate = 2.0 * (params.carrier_freq + params.bandwidth / 2.0);
    if sample_rate < min_rate {
        return Err(DemodError::RateTooLow {
            rate: sample_rate,
            min: min_rate,
        });
    }
    let ratio = sample_rate / params.fast_time_rate;
    let q = ratio.round();
    if (ratio - q).abs() > 1e-9 || q < 1.0 {
        return Err(DemodError::RateNotMultiple {
            rate: sample_rate,
            fs: params.fast_time_rate,
        });
    }
    let q = q as usize;

    let taps = reconstruction_lowpass(sample_rate, params);

    let fc = params.carrier_freq;
    let mixed: Vec<Complex64> = passband
        .iter()
        .enumerate()
        .map(|(k, &x)| {
            let ph = -2.0 * PI * fc * k as f64 / sample_rate;
            Complex64::from_polar(x, ph)
        })
        .collect();

    // floor(T*Fs) samples per pulse; the decimated grid n*q aligns with the
    // fast-time grid because rate is an integer multiple of Fs.
    let pri_pb = (params.pri * sample_rate + 1e-9).floor() as usize;
    let pulses_in = if pri_pb > 0 { passband.len() / pri_pb } else { 0 };
    let out_len = (pulses_in * params.pri_samples()).min(passband.len() / q);
    Ok(filter_decimate(&mixed, &taps, q, out_len))
}

/// Applies a linear-phase FIR (group delay compensated) and keeps every q-th
/// output sample.
fn filter_decimate(x: &[Complex64], taps: &[f64], q: usize, out_len: usize) -> Vec<Complex64> {
    let delay = (taps.len() - 1) / 2;
    let mut out = Vec::with_capacity(out_len);
    for n in 0..out_len {
        let center = n * q + delay;
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, &h) in taps.iter().enumerate() {
            if let Some(idx) = center.checked_sub(t) {
                if idx < x.len() {
                    acc += x[idx] * h;
                }
            }
        }
        out.push(acc);
    }
    out
}

// ---------------------------------------------------------------------------
// Cube file format (HUGC) and PGM export
// ---------------------------------------------------------------------------

pub const CUBE_MAGIC: &[u8; 4] = b"HUGC";
pub const CUBE_VERSION: u16 = 1;

impl RdCube {
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        w.write_all(CUBE_MAGIC)?;
        wire::write_u16(w, CUBE_VERSION)?;
        wire::write_params(w, &self.params)?;
        wire::write_u32(w, self.images.len() as u32)?;
        for img in &self.images {
            for &m in &img.mags {
                wire::write_f32(w, m as f32)?;
            }
        }
        Ok(())
    }

    /// Reads a cube; label/subject are not part of the file format and come
    /// back as defaults (the manifest carries them).
    pub fn read_from<R: Read>(r: &mut R) -> Result<RdCube, FormatError> {
        let magic = wire::read_exact_bytes::<R, 4>(r)?;
        if &magic != CUBE_MAGIC {
            return Err(FormatError::BadMagic {
                offset: 0,
                expected: "HUGC",
            });
        }
        let version = wire::read_u16(r)?;
        if version != CUBE_VERSION {
            return Err(FormatError::BadVersion(version));
        }
        let params = wire::read_params(r)?;
        params.validate()?;
        let count = wire::read_u32(r)? as usize;
        let n = params.fft_points as usize;
        let range_bins = params.range_bins as usize;
        let vbw = params.velocity_bin_width();
        let rbw = params.range_bin_width();
        let velocity_axis: Vec<f64> = (0..n).map(|d| (d as f64 - n as f64 / 2.0) * vbw).collect();
        let range_axis: Vec<f64> = (0..range_bins)
            .map(|c| (params.roi_start_bin as usize + c) as f64 * rbw)
            .collect();
        let mut images = Vec::with_capacity(count);
        for frame_index in 0..count {
            let mut mags = Vec::with_capacity(n * range_bins);
            for _ in 0..n * range_bins {
                mags.push(wire::read_f32(r)? as f64);
            }
            images.push(RangeDopplerImage {
                doppler_bins: n,
                range_bins,
                mags,
                frame_index,
                velocity_axis: velocity_axis.clone(),
                range_axis: range_axis.clone(),
            });
        }
        Ok(RdCube {
            params,
            label: GestureClass::NoFinger,
            subject: 0,
            images,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut w)?;
        Ok(w.flush()?)
    }

    pub fn load(path: &Path) -> Result<RdCube, FormatError> {
        let mut r = io::BufReader::new(fs::File::open(path)?);
        RdCube::read_from(&mut r)
    }
}

/// Exports one image as a 16-bit binary PGM, log-scaled: pixel = 65535 *
/// (dB + 60) / 60 with dB = 20 log10(mag / max), clamped to [-60, 0] dB.
pub fn write_pgm<W: Write>(w: &mut W, image: &RangeDopplerImage) -> io::Result<()> {
    writeln!(w, "P5")?;
    writeln!(w, "{} {}", image.range_bins, image.doppler_bins)?;
    writeln!(w, "65535")?;
    let max = image.max().max(f64::MIN_POSITIVE);
    for &m in &image.mags {
        let db = (20.0 * (m / max).max(1e-30).log10()).clamp(-60.0, 0.0);
        let pix = ((db + 60.0) / 60.0 * 65535.0).round() as u16;
        // PGM 16-bit samples are big-endian.
        w.write_all(&pix.to_be_bytes())?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::echosim::{render_echo, script_gesture, GestureScript, MotionModel, Scatterer};
    use crate::params::derive;

    fn scene_params() -> FrameParams {
        FrameParams {
            roi_start_bin: 60,
            ..FrameParams::default()
        }
    }

    fn static_scatterer_recording(range: f64, velocity: f64, params: &FrameParams) -> Recording {
        let script = GestureScript {
            class: GestureClass::MotionUp,
            duration_frames: 1,
            frames: vec![vec![Scatterer {
                range,
                velocity,
                reflectivity: 1.0,
                id: 0,
            }]],
            subject_seed: 0,
        };
        render_echo(&script, params, None, MotionModel::StopAndHop, 0).unwrap()
    }

    /// Direct time-domain correlation oracle for the matched filter.
    fn direct_correlation(rx: &[Complex64], reference: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); rx.len()];
        for (k, o) in out.iter_mut().enumerate() {
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, h) in reference.iter().enumerate() {
                if k + j < rx.len() {
                    acc += rx[k + j] * h.conj();
                }
            }
            *o = acc;
        }
        out
    }

    #[test]
    fn fft_matched_filter_equals_direct_correlation() {
        let p = FrameParams::default();
        let proc = RdProcessor::new(&p).unwrap();
        let rec = static_scatterer_recording(0.05, 0.0, &p);
        let profiles = proc.matched_filter(&rec.frames[0]).unwrap();
        let pulse = chirp_pulse(&p);
        let scale = 1.0 / pulse.energy().sqrt();
        let reference: Vec<Complex64> = pulse.samples.iter().map(|s| s * scale).collect();
        let pri_n = p.pri_samples();
        let direct = direct_correlation(&rec.frames[0][..pri_n], &reference);
        let peak = direct.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in profiles[..pri_n].iter().zip(&direct) {
            assert!((a - b).norm() <= 1e-9 * peak, "{a} vs {b}");
        }
    }

    #[test]
    fn scatterer_at_5cm_peaks_at_bin_118() {
        let p = FrameParams::default();
        let proc = RdProcessor::new(&p).unwrap();
        let rec = static_scatterer_recording(0.05, 0.0, &p);
        let profiles = proc.matched_filter(&rec.frames[0]).unwrap();
        let pri_n = p.pri_samples();
        for pulse in 0..p.pulses_per_frame as usize {
            let row = &profiles[pulse * pri_n..(pulse + 1) * pri_n];
            let peak = row
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap()
                .0;
            let expected = (2.0 * 0.05 / p.sound_speed * p.fast_time_rate).round() as usize;
            assert_eq!(expected, 118);
            assert!((peak as i64 - 118).abs() <= 1, "pulse {pulse}: bin {peak}");
        }
    }

    #[test]
    fn zero_frame_filters_to_zero() {
        let p = FrameParams::default();
        let proc = RdProcessor::new(&p).unwrap();
        let frame = vec![Complex64::new(0.0, 0.0); p.frame_samples()];
        let profiles = proc.matched_filter(&frame).unwrap();
        assert!(profiles.iter().all(|c| c.norm() < 1e-12));
    }

    #[test]
    fn one_sample_delay_shifts_peak_one_bin() {
        let p = FrameParams::default();
        let proc = RdProcessor::new(&p).unwrap();
        let peak_bin = |r: f64| {
            let rec = static_scatterer_recording(r, 0.0, &p);
            let profiles = proc.matched_filter(&rec.frames[0]).unwrap();
            profiles[..p.pri_samples()]
                .iter()
                .enumerate()
                .max_by(|a, b| a.1.norm().total_cmp(&b.1.norm()))
                .unwrap()
                .0
        };
        let rbw = p.range_bin_width();
        // Start exactly on a bin center so the added bin width lands exactly
        // one sample later.
        let r0 = 100.0 * rbw;
        assert_eq!(peak_bin(r0) + 1, peak_bin(r0 + rbw));
    }

    fn range_profile_peaks(mags: &[f64], min_sep: usize, floor: f64) -> Vec<usize> {
        let mut peaks: Vec<usize> = Vec::new();
        for i in 1..mags.len() - 1 {
            if mags[i] >= mags[i - 1] && mags[i] > mags[i + 1] && mags[i] > floor {
                if let Some(&last) = peaks.last() {
                    if i - last < min_sep {
                        if mags[i] > mags[last] {
                            peaks.pop();
                            peaks.push(i);
                        }
                        continue;
                    }
                }
                peaks.push(i);
            }
        }
        peaks
    }

    fn two_scatterer_profile(sep: f64) -> Vec<f64> {
        let p = FrameParams::default();
        let proc = RdProcessor::new(&p).unwrap();
        let script = GestureScript {
            class: GestureClass::Screw,
            duration_frames: 1,
            frames: vec![vec![
                Scatterer {
                    range: 0.05,
                    velocity: 0.0,
                    reflectivity: 1.0,
                    id: 0,
                },
                Scatterer {
                    range: 0.05 + sep,
                    velocity: 0.0,
                    reflectivity: 1.0,
                    id: 1,
                },
            ]],
            subject_seed: 0,
        };
        let rec = render_echo(&script, &p, None, MotionModel::StopAndHop, 0).unwrap();
        let profiles = proc.matched_filter(&rec.frames[0]).unwrap();
        profiles[..p.pri_samples()].iter().map(|c| c.norm()).collect()
    }

    #[test]
    fn scatterers_1cm_apart_resolve_with_3db_valley() {
        let mags = two_scatterer_profile(0.010);
        let global = mags.iter().fold(0.0f64, |a, &b| a.max(b));
        let peaks = range_profile_peaks(&mags, 10, global * 0.3);
        assert_eq!(peaks.len(), 2, "expected two resolved peaks: {peaks:?}");
        let lower = mags[peaks[0]].min(mags[peaks[1]]);
        let valley = mags[peaks[0]..=peaks[1]].iter().fold(f64::MAX, |a, &b| a.min(b));
        let ratio_db = 20.0 * (lower / valley).log10();
        assert!(ratio_db >= 3.0, "valley only {ratio_db:.2} dB below lower peak");
    }

    #[test]
    fn scatterers_half_cm_apart_do_not_resolve() {
        let mags = two_scatterer_profile(0.005);
        let global = mags.iter().fold(0.0f64, |a, &b| a.max(b));
        let peaks = range_profile_peaks(&mags, 10, global * 0.3);
        if peaks.len() >= 2 {
            let lower = mags[peaks[0]].min(mags[peaks[1]]);
            let valley = mags[peaks[0]..=peaks[1]].iter().fold(f64::MAX, |a, &b| a.min(b));
            let ratio_db = 20.0 * (lower / valley).log10();
            assert!(ratio_db < 3.0, "sub-resolution pair resolved at {ratio_db:.2} dB");
        }
    }

    #[test]
    fn static_scatterer_peaks_at_center_row() {
        let p = scene_params();
        let proc = RdProcessor::new(&p).unwrap();
        let rec = static_scatterer_recording(0.07, 0.0, &p);
        let img = proc.process_frame(&rec.frames[0], 0).unwrap();
        let (mut best, mut best_d) = (0.0, 0);
        for d in 0..img.doppler_bins {
            for c in 0..img.range_bins {
                if img.at(d, c) > best {
                    best = img.at(d, c);
                    best_d = d;
                }
            }
        }
        assert_eq!(best_d, 128);
    }

    fn doppler_peak_row(v: f64) -> usize {
        let p = scene_params();
        let proc = RdProcessor::new(&p).unwrap();
        let rec = static_scatterer_recording(0.07, v, &p);
        let img = proc.process_frame(&rec.frames[0], 0).unwrap();
        let mut best = (0.0, 0);
        for d in 0..img.doppler_bins {
            for c in 0..img.range_bins {
                if img.at(d, c) > best.0 {
                    best = (img.at(d, c), d);
                }
            }
        }
        best.1
    }

    #[test]
    fn doppler_placement_follows_phase_progression_oracle() {
        let p = scene_params();
        let d = derive(&p).unwrap();
        // Oracle: displacement in bins is 2 v N T / lambda.
        let v = 0.08;
        let expected = 2.0 * v * p.fft_points as f64 * p.pri / p.wavelength();
        assert!((expected - 21.685).abs() < 0.01, "oracle value {expected}");
        let row = doppler_peak_row(v) as f64;
        assert!(
            (row - 128.0 - expected).abs() <= 1.0,
            "row {row}, expected 128 + {expected:.2}"
        );
        // And the displacement is within a bin of v / velocity_bin_width.
        assert!((row - 128.0 - v / d.velocity_bin_width).abs() <= 1.0);
    }

    #[test]
    fn fast_scatterer_aliases_to_wrapped_bin() {
        let p = scene_params();
        let v = 0.6;
        // Oracle: cycles per pulse folded into [-0.5, 0.5).
        let f = 2.0 * v * p.pri / p.wavelength();
        let wrapped = (f + 0.5).rem_euclid(1.0) - 0.5;
        assert!(wrapped < 0.0, "0.6 m/s must alias negative");
        let expected = 128.0 + wrapped * p.fft_points as f64;
        let row = doppler_peak_row(v) as f64;
        assert!((row - expected).abs() <= 1.0, "row {row}, expected {expected:.2}");
    }

    #[test]
    fn doppler_fft_preserves_windowed_energy() {
        // Parseval: for each range bin, sum |X|^2 = N * sum |windowed slow-time|^2.
        let p = scene_params();
        let proc = RdProcessor::new(&p).unwrap();
        let rec = render_echo(
            &script_gesture(GestureClass::Screw, 1, 2),
            &p,
            Some(10.0),
            MotionModel::StopAndHop,
            9,
        )
        .unwrap();
        let profiles = proc.matched_filter(&rec.frames[0]).unwrap();
        let img = proc.doppler_fft(&profiles, 0).unwrap();
        let n = p.fft_points as usize;
        let pri_n = p.pri_samples();
        for col in [0usize, 50, 179] {
            let bin = p.roi_start_bin as usize + col;
            let windowed: f64 = (0..p.pulses_per_frame as usize)
                .map(|m| (profiles[m * pri_n + bin] * proc.window[m]).norm_sqr())
                .sum();
            let spectral: f64 = (0..n).map(|d| img.at(d, col) * img.at(d, col)).sum();
            let expected = windowed * n as f64;
            assert!(
                ((spectral - expected) / expected.max(1e-30)).abs() < 1e-6,
                "col {col}: {spectral} vs {expected}"
            );
        }
    }

    #[test]
    fn recording_processes_to_one_image_per_frame() {
        let p = scene_params();
        let script = script_gesture(GestureClass::MotionDown, 1, 1);
        let rec = render_echo(&script, &p, Some(10.0), MotionModel::StopAndHop, 3).unwrap();
        let cube = process_recording(&rec).unwrap();
        assert_eq!(cube.images.len(), script.duration_frames);
        for (i, img) in cube.images.iter().enumerate() {
            assert_eq!(img.frame_index, i);
            assert_eq!(img.doppler_bins, 256);
            assert_eq!(img.range_bins, 180);
            assert!(img.mags.iter().all(|&m| m >= 0.0));
        }
    }

    #[test]
    fn frame_order_does_not_matter() {
        let p = scene_params();
        let rec = render_echo(
            &script_gesture(GestureClass::FingerPress, 1, 4),
            &p,
            Some(10.0),
            MotionModel::StopAndHop,
            5,
        )
        .unwrap();
        let proc = RdProcessor::new(&p).unwrap();
        let forward: Vec<_> = (0..rec.frames.len())
            .map(|i| proc.process_frame(&rec.frames[i], i).unwrap())
            .collect();
        let mut reversed: Vec<_> = (0..rec.frames.len())
            .rev()
            .map(|i| proc.process_frame(&rec.frames[i], i).unwrap())
            .collect();
        reversed.reverse();
        for (a, b) in forward.iter().zip(&reversed) {
            assert_eq!(a.mags, b.mags);
        }
    }

    #[test]
    fn button_off_merges_two_peaks_into_one() {
        let p = scene_params();
        let script = script_gesture(GestureClass::ButtonOff, 0, 0);
        let rec = render_echo(&script, &p, None, MotionModel::StopAndHop, 0).unwrap();
        let proc = RdProcessor::new(&p).unwrap();
        let count_range_peaks = |img: &RangeDopplerImage| {
            // Collapse Doppler, then count separated range peaks.
            let collapsed: Vec<f64> = (0..img.range_bins)
                .map(|c| (0..img.doppler_bins).map(|d| img.at(d, c)).fold(0.0, f64::max))
                .collect();
            let global = collapsed.iter().fold(0.0f64, |a, &b| a.max(b));
            range_profile_peaks(&collapsed, 12, global * 0.25).len()
        };
        let first = proc.process_frame(&rec.frames[0], 0).unwrap();
        let last = proc
            .process_frame(rec.frames.last().unwrap(), rec.frames.len() - 1)
            .unwrap();
        assert_eq!(count_range_peaks(&first), 2, "early frame should show both fingers");
        assert_eq!(count_range_peaks(&last), 1, "late frame should show the merged pair");
    }

    #[test]
    fn cube_roundtrips_through_bytes() {
        let p = scene_params();
        let rec = render_echo(
            &script_gesture(GestureClass::MotionUp, 1, 6),
            &p,
            Some(10.0),
            MotionModel::StopAndHop,
            7,
        )
        .unwrap();
        let cube = process_recording(&rec).unwrap();
        let mut bytes = Vec::new();
        cube.write_to(&mut bytes).unwrap();
        let back = RdCube::read_from(&mut bytes.as_slice()).unwrap();
        assert_eq!(back.params, cube.params);
        assert_eq!(back.images.len(), cube.images.len());
        for (a, b) in cube.images.iter().zip(&back.images) {
            for (x, y) in a.mags.iter().zip(&b.mags) {
                assert_eq!(*y, *x as f32 as f64);
            }
        }
    }

    #[test]
    fn carrier_demodulates_to_half() {
        let p = FrameParams::default();
        let rate = 4.0 * p.carrier_freq;
        let n = (p.pri * rate) as usize * p.pulses_per_frame as usize;
        let passband: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * p.carrier_freq * k as f64 / rate).cos())
            .collect();
        let baseband = iq_demodulate(&passband, rate, &p).unwrap();
        // Ignore the filter transient at both edges.
        let guard = 60;
        for v in &baseband[guard..baseband.len() - guard] {
            assert!((v.re - 0.5).abs() < 0.005, "I ripple: {}", v.re);
            assert!(v.im.abs() < 0.005, "Q leakage: {}", v.im);
        }
    }

    #[test]
    fn out_of_band_tone_is_rejected() {
        let p = FrameParams::default();
        let rate = 4.0 * p.carrier_freq;
        let n = (p.pri * rate) as usize * p.pulses_per_frame as usize;
        let tone = p.carrier_freq + 3.0 * p.bandwidth;
        let passband: Vec<f64> = (0..n)
            .map(|k| (2.0 * PI * tone * k as f64 / rate).cos())
            .collect();
        let baseband = iq_demodulate(&passband, rate, &p).unwrap();
        let guard = 60;
        let peak = baseband[guard..baseband.len() - guard]
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        // Carrier reference is 0.5; demand >= 40 dB rejection.
        assert!(
            20.0 * (peak / 0.5).log10() <= -40.0,
            "tone leaked at {peak}"
        );
    }

    #[test]
    fn rate_below_carrier_nyquist_is_rejected() {
        let p = FrameParams::default();
        assert!(matches!(
            iq_demodulate(&[0.0; 16], 2.0 * p.carrier_freq - 1.0, &p),
            Err(DemodError::RateTooLow { .. })
        ));
    }

    #[test]
    fn passband_rendering_matches_direct_baseband() {
        let p = scene_params();
        let script = GestureScript {
            class: GestureClass::MotionUp,
            duration_frames: 2,
            frames: (0..2)
                .map(|f| {
                    vec![Scatterer {
                        range: 0.06 + 0.1 * f as f64 * p.frame_period(),
                        velocity: 0.1,
                        reflectivity: 1.0,
                        id: 0,
                    }]
                })
                .collect(),
            subject_seed: 0,
        };
        let passband =
            crate::echosim::render_echo_passband(&script, &p, MotionModel::StopAndHop, 4).unwrap();
        // Oracle: the analytic baseband sampled at the passband rate, pushed
        // through the same reconstruction lowpass and decimation. The
        // residual then isolates true demodulation error (mixing, image
        // rejection, alignment) rather than the filter's deliberate band
        // limiting of the rectangular chirp's spectral splatter.
        let oversample = (passband.sample_rate / p.fast_time_rate).round() as usize;
        let p_hi = FrameParams {
            fast_time_rate: passband.sample_rate,
            ..p.clone()
        };
        let analytic = render_echo(&script, &p_hi, None, MotionModel::StopAndHop, 0).unwrap();
        let taps = reconstruction_lowpass(passband.sample_rate, &p);
        for (frame_pb, frame_hi) in passband.frames.iter().zip(&analytic.frames) {
            let demod = iq_demodulate(frame_pb, passband.sample_rate, &p).unwrap();
            let reference = filter_decimate(frame_hi, &taps, oversample, demod.len());
            let mut err = 0.0;
            let mut sig = 0.0;
            for (d, b) in demod.iter().zip(&reference) {
                // Demodulation of the real passband halves the amplitude.
                err += (2.0 * d - b).norm_sqr();
                sig += b.norm_sqr();
            }
            let residual_db = 10.0 * (err / sig.max(1e-30)).log10();
            assert!(residual_db <= -40.0, "residual {residual_db:.1} dB");
        }
    }

    #[test]
    fn pgm_export_has_correct_header_and_size() {
        let p = scene_params();
        let rec = static_scatterer_recording(0.07, 0.0, &p);
        let img = RdProcessor::new(&p)
            .unwrap()
            .process_frame(&rec.frames[0], 0)
            .unwrap();
        let mut bytes = Vec::new();
        write_pgm(&mut bytes, &img).unwrap();
        let header = b"P5\n180 256\n65535\n";
        assert_eq!(&bytes[..header.len()], header);
        assert_eq!(bytes.len(), header.len() + 2 * 180 * 256);
    }
}
