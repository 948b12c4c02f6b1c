//! Synthetic received-echo recordings for scripted finger gestures.
//!
//! Stands in for the hardware front-end and human subjects: scripted
//! multi-scatterer trajectories are rendered to complex baseband frames with
//! controllable noise, and whole datasets are synthesized with per-subject
//! kinematic variation.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::params::FrameParams;
use crate::waveform::chirp_value;
use crate::wire;

/// The seven gesture classes, index order fixed by the recording label byte.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GestureClass {
    #[serde(rename = "no-finger")]
    NoFinger,
    #[serde(rename = "finger-press")]
    FingerPress,
    #[serde(rename = "button-on")]
    ButtonOn,
    #[serde(rename = "button-off")]
    ButtonOff,
    #[serde(rename = "motion-up")]
    MotionUp,
    #[serde(rename = "motion-down")]
    MotionDown,
    #[serde(rename = "screw")]
    Screw,
}

impl GestureClass {
    pub const ALL: [GestureClass; 7] = [
        GestureClass::NoFinger,
        GestureClass::FingerPress,
        GestureClass::ButtonOn,
        GestureClass::ButtonOff,
        GestureClass::MotionUp,
        GestureClass::MotionDown,
        GestureClass::Screw,
    ];

    pub fn name(self) -> &'static str {
        match self {
            GestureClass::NoFinger => "no-finger",
            GestureClass::FingerPress => "finger-press",
            GestureClass::ButtonOn => "button-on",
            GestureClass::ButtonOff => "button-off",
            GestureClass::MotionUp => "motion-up",
            GestureClass::MotionDown => "motion-down",
            GestureClass::Screw => "screw",
        }
    }

    pub fn from_name(name: &str) -> Option<GestureClass> {
        GestureClass::ALL.into_iter().find(|c| c.name() == name)
    }

    pub fn index(self) -> u8 {
        GestureClass::ALL.iter().position(|&c| c == self).unwrap() as u8
    }

    pub fn from_index(index: u8) -> Option<GestureClass> {
        GestureClass::ALL.get(index as usize).copied()
    }
}

impl fmt::Display for GestureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A point reflector at one frame: range, radial velocity (positive =
/// receding), linear reflectivity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scatterer {
    pub range: f64,
    pub velocity: f64,
    pub reflectivity: f64,
    pub id: u32,
}

/// A scripted gesture: per-frame scatterer lists plus the seeds that produced
/// them.
#[derive(Debug, Clone, PartialEq)]
pub struct GestureScript {
    pub class: GestureClass,
    pub duration_frames: usize,
    pub frames: Vec<Vec<Scatterer>>,
    pub subject_seed: u64,
}

/// Whether scatterer envelopes move between the pulses of one frame.
///
/// Under `StopAndHop` all M pulses of a frame see the frame-start envelope
/// delay while the carrier phase still advances pulse to pulse (that is where
/// Doppler lives); under `TrueMotion` the envelope delay also advances by
/// v*T per pulse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MotionModel {
    #[serde(rename = "stop-and-hop")]
    StopAndHop,
    #[serde(rename = "true-motion")]
    TrueMotion,
}

impl Default for MotionModel {
    fn default() -> Self {
        MotionModel::StopAndHop
    }
}

/// A rendered recording: complex baseband frames, pulse-major within a frame.
#[derive(Debug, Clone)]
pub struct Recording {
    pub params: FrameParams,
    pub frames: Vec<Vec<Complex64>>,
    pub label: GestureClass,
    pub subject: u16,
    /// The script that produced this recording; not persisted in the file
    /// format.
    pub truth: Option<GestureScript>,
}

#[derive(Debug, Error)]
pub enum EchoError {
    #[error("unknown gesture class {0:?}")]
    UnknownClass(String),
    #[error("scatterer {id} echo delay exceeds the PRI in frame {frame}")]
    DelayExceedsPri { id: u32, frame: usize },
    #[error("snr must be finite, got {0}")]
    NonFiniteSnr(f64),
}

// ---------------------------------------------------------------------------
// Kinematic templates
// ---------------------------------------------------------------------------

/// Template constants for the scripted gesture kinematics.
///
/// The gesture set only names the motions, so the trajectories here are the
/// minimal kinematics that keep the seven classes separable by scatterer
/// count, range and velocity: press goes down then up, button-on splits two
/// touching fingers, button-off converges and merges them, the motion pair
/// sweeps the range window, screw counter-oscillates two fingers.
#[derive(Debug, Clone)]
pub struct Kinematics {
    pub press_start: f64,
    pub press_speed: f64,
    pub thumb_range: f64,
    pub contact_gap: f64,
    pub button_start: f64,
    pub button_speed: f64,
    pub motion_high: f64,
    pub motion_low: f64,
    pub motion_speed: f64,
    pub screw_bases: (f64, f64),
    pub screw_amplitude: f64,
    pub screw_rate_hz: f64,
    /// Base duration in frames per class, index = class index.
    pub base_duration: [usize; 7],
    /// Subject-level spreads: velocity scale, range offset (m), duration scale.
    pub subject_velocity_spread: f64,
    pub subject_range_spread: f64,
    pub subject_duration_spread: f64,
    /// Per-sample duration spread drawn from the script seed.
    pub sample_duration_spread: f64,
    /// Per-frame emission jitter (standard deviations).
    pub jitter_range: f64,
    pub jitter_velocity: f64,
    pub jitter_reflectivity: f64,
}

impl Default for Kinematics {
    fn default() -> Self {
        Kinematics {
            press_start: 0.082,
            press_speed: 0.17,
            thumb_range: 0.060,
            contact_gap: 0.0015,
            button_start: 0.090,
            button_speed: 0.20,
            motion_high: 0.092,
            motion_low: 0.050,
            motion_speed: 0.21,
            screw_bases: (0.058, 0.082),
            screw_amplitude: 0.005,
            screw_rate_hz: 4.0,
            base_duration: [60, 60, 55, 55, 50, 50, 70],
            subject_velocity_spread: 0.20,
            subject_range_spread: 0.010,
            subject_duration_spread: 0.25,
            sample_duration_spread: 0.10,
            jitter_range: 0.0003,
            jitter_velocity: 0.002,
            jitter_reflectivity: 0.05,
        }
    }
}

impl Kinematics {
    /// Noise-free-friendly preset with stronger class separation: faster
    /// sweeps, reduced subject variance, negligible jitter.
    pub fn exaggerated() -> Self {
        Kinematics {
            press_speed: 0.26,
            button_speed: 0.28,
            motion_speed: 0.34,
            screw_amplitude: 0.006,
            screw_rate_hz: 5.0,
            base_duration: [70, 70, 65, 65, 60, 60, 80],
            subject_velocity_spread: 0.05,
            subject_range_spread: 0.002,
            subject_duration_spread: 0.10,
            sample_duration_spread: 0.05,
            jitter_range: 1e-5,
            jitter_velocity: 1e-4,
            jitter_reflectivity: 0.005,
            ..Kinematics::default()
        }
    }
}

/// Named kinematics presets selectable from a dataset config.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum KinematicsPreset {
    #[serde(rename = "default")]
    Default,
    #[serde(rename = "exaggerated")]
    Exaggerated,
}

impl KinematicsPreset {
    pub fn kinematics(self) -> Kinematics {
        match self {
            KinematicsPreset::Default => Kinematics::default(),
            KinematicsPreset::Exaggerated => Kinematics::exaggerated(),
        }
    }
}

impl Default for KinematicsPreset {
    fn default() -> Self {
        KinematicsPreset::Default
    }
}

/// splitmix64 finalizer; used to derive independent sub-seeds.
fn mix_seed(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-subject perturbation drawn from the subject seed. Seed 0 is the
/// neutral "default subject" (identity perturbation).
struct SubjectTraits {
    velocity_scale: f64,
    range_offset: f64,
    duration_scale: f64,
}

fn subject_traits(subject_seed: u64, kin: &Kinematics) -> SubjectTraits {
    if subject_seed == 0 {
        return SubjectTraits {
            velocity_scale: 1.0,
            range_offset: 0.0,
            duration_scale: 1.0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(subject_seed, 0x00c0_ffee));
    SubjectTraits {
        velocity_scale: 1.0 + rng.random_range(-1.0..1.0) * kin.subject_velocity_spread,
        range_offset: rng.random_range(-1.0..1.0) * kin.subject_range_spread,
        duration_scale: 1.0 + rng.random_range(-1.0..1.0) * kin.subject_duration_spread,
    }
}

// Velocity profile helpers: phases append frames to a per-frame velocity
// vector, ramping linearly between target speeds.

fn hold(v: &mut Vec<f64>, frames: usize, value: f64) {
    v.extend(std::iter::repeat(value).take(frames));
}

fn ramp(v: &mut Vec<f64>, frames: usize, from: f64, to: f64) {
    for k in 0..frames {
        let t = (k + 1) as f64 / frames as f64;
        v.push(from + (to - from) * t);
    }
}

fn fit(v: &mut Vec<f64>, d: usize) {
    v.truncate(d);
    let last = 0.0;
    while v.len() < d {
        v.push(last);
    }
}

/// Trapezoidal sweep: idle, ramp up, hold, ramp down, idle tail.
fn trapezoid(d: usize, idle_frac: f64, move_frac: f64, peak: f64) -> Vec<f64> {
    let seg = |frac: f64| ((d as f64 * frac).round() as usize).max(1);
    let mut v = Vec::with_capacity(d);
    hold(&mut v, seg(idle_frac), 0.0);
    let move_frames = seg(move_frac);
    let r = (move_frames / 4).max(1);
    ramp(&mut v, r, 0.0, peak);
    hold(&mut v, move_frames.saturating_sub(2 * r), peak);
    ramp(&mut v, r, peak, 0.0);
    fit(&mut v, d);
    v
}

fn press_profile(d: usize, peak: f64) -> Vec<f64> {
    let seg = |frac: f64| ((d as f64 * frac).round() as usize).max(1);
    let mut v = Vec::with_capacity(d);
    hold(&mut v, seg(0.12), 0.0);
    let half = seg(0.31);
    let r = (half / 4).max(1);
    ramp(&mut v, r, 0.0, -peak);
    hold(&mut v, half.saturating_sub(2 * r), -peak);
    ramp(&mut v, r, -peak, 0.0);
    hold(&mut v, seg(0.10), 0.0);
    ramp(&mut v, r, 0.0, peak);
    hold(&mut v, half.saturating_sub(2 * r), peak);
    ramp(&mut v, r, peak, 0.0);
    fit(&mut v, d);
    v
}

fn integrate(start: f64, velocities: &[f64], dt: f64) -> Vec<f64> {
    let mut r = start;
    velocities
        .iter()
        .map(|&v| {
            let here = r;
            r += v * dt;
            here
        })
        .collect()
}

/// Builds the deterministic gesture script for one (class, subject, sample).
pub fn script_gesture(
    class: GestureClass,
    subject_seed: u64,
    rng_seed: u64,
) -> GestureScript {
    script_gesture_with(class, subject_seed, rng_seed, &Kinematics::default())
}

/// [`script_gesture`] with an explicit kinematics preset. The frame period is
/// taken from the default parameter set; trajectories are expressed in
/// physical units so other parameter sets reuse the same scripts.
pub fn script_gesture_with(
    class: GestureClass,
    subject_seed: u64,
    rng_seed: u64,
    kin: &Kinematics,
) -> GestureScript {
    let dt = FrameParams::default().frame_period();
    let traits = subject_traits(subject_seed, kin);
    let mut script_rng = ChaCha8Rng::seed_from_u64(mix_seed(rng_seed, 0x5c21_97));

    let base = kin.base_duration[class.index() as usize] as f64;
    let sample_scale = 1.0 + script_rng.random_range(-1.0..1.0) * kin.sample_duration_spread;
    let d = ((base * traits.duration_scale * sample_scale).round() as usize).clamp(30, 120);
    let vs = traits.velocity_scale;
    let ro = traits.range_offset;

    // (start range, per-frame velocity, reflectivity) per scatterer.
    let scatterers: Vec<(f64, Vec<f64>, f64)> = match class {
        GestureClass::NoFinger => Vec::new(),
        GestureClass::FingerPress => vec![(
            kin.press_start + ro,
            press_profile(d, kin.press_speed * vs),
            1.0,
        )],
        GestureClass::ButtonOn => vec![
            (kin.thumb_range + ro, vec![0.0; d], 0.9),
            (
                kin.thumb_range + kin.contact_gap + ro,
                trapezoid(d, 0.15, 0.45, kin.button_speed * vs),
                0.7,
            ),
        ],
        GestureClass::ButtonOff => vec![
            (kin.thumb_range + ro, vec![0.0; d], 0.9),
            (
                kin.button_start + ro,
                trapezoid(d, 0.15, 0.45, -kin.button_speed * vs),
                0.7,
            ),
        ],
        GestureClass::MotionUp => vec![(
            kin.motion_high + ro,
            trapezoid(d, 0.10, 0.70, -kin.motion_speed * vs),
            0.9,
        )],
        GestureClass::MotionDown => vec![(
            kin.motion_low + ro,
            trapezoid(d, 0.10, 0.70, kin.motion_speed * vs),
            0.9,
        )],
        GestureClass::Screw => {
            let peak = 2.0 * PI * kin.screw_rate_hz * kin.screw_amplitude * vs;
            let mk = |sign: f64| -> Vec<f64> {
                (0..d)
                    .map(|f| sign * peak * (2.0 * PI * kin.screw_rate_hz * f as f64 * dt).cos())
                    .collect()
            };
            vec![
                (kin.screw_bases.0 + ro, mk(1.0), 0.8),
                (kin.screw_bases.1 + ro, mk(-1.0), 0.8),
            ]
        }
    };

    // Integrate trajectories, then add per-frame emission jitter.
    let tracks: Vec<(Vec<f64>, Vec<f64>, f64)> = scatterers
        .into_iter()
        .map(|(start, vel, refl)| {
            let ranges = integrate(start, &vel, dt);
            (ranges, vel, refl)
        })
        .collect();

    let mut frames = Vec::with_capacity(d);
    for f in 0..d {
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(rng_seed, 0xf0f0 + f as u64));
        let mut list = Vec::with_capacity(tracks.len());
        for (id, (ranges, vels, refl)) in tracks.iter().enumerate() {
            let jr: f64 = rng.sample::<f64, _>(StandardNormal) * kin.jitter_range;
            let jv: f64 = rng.sample::<f64, _>(StandardNormal) * kin.jitter_velocity;
            let ja: f64 = rng.sample::<f64, _>(StandardNormal) * kin.jitter_reflectivity;
            list.push(Scatterer {
                range: ranges[f] + jr,
                velocity: vels[f] + jv,
                reflectivity: (refl * (1.0 + ja)).max(0.05),
                id: id as u32,
            });
        }
        frames.push(list);
    }

    GestureScript {
        class,
        duration_frames: d,
        frames,
        subject_seed,
    }
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn add_scatterer_echo(
    buf: &mut [Complex64],
    s: &Scatterer,
    params: &FrameParams,
    motion: MotionModel,
    frame: usize,
) -> Result<(), EchoError> {
    let c = params.sound_speed;
    let fs = params.fast_time_rate;
    let tau = params.pulse_width;
    let b = params.bandwidth;
    let frame_len = buf.len();
    let delay0 = 2.0 * s.range / c;

    for p in 0..params.pulses_per_frame as usize {
        let r_p = s.range + s.velocity * params.pri * p as f64;
        let delay_env = match motion {
            MotionModel::StopAndHop => delay0,
            MotionModel::TrueMotion => 2.0 * r_p / c,
        };
        if delay_env < 0.0 || delay_env >= params.pri {
            return Err(EchoError::DelayExceedsPri { id: s.id, frame });
        }
        // Carrier phase rotation tracks the per-pulse range even under
        // stop-and-hop; the envelope is what the mode freezes.
        let rot = Complex64::from_polar(
            s.reflectivity,
            -2.0 * PI * params.carrier_freq * (2.0 * r_p / c),
        );
        let t_start = p as f64 * params.pri + delay_env;
        let k0 = (t_start * fs).ceil().max(0.0) as usize;
        let k1 = (((t_start + tau) * fs).floor() as usize).min(frame_len.saturating_sub(1));
        for k in k0..=k1.min(frame_len - 1) {
            let t = k as f64 / fs - t_start;
            let v = chirp_value(b, tau, t);
            if v.re != 0.0 || v.im != 0.0 {
                buf[k] += rot * v;
            }
        }
    }
    Ok(())
}

/// Renders a script to a complex baseband recording.
///
/// Each scatterer contributes the analytic chirp delayed by the round trip
/// and phase-rotated by the carrier; `snr_db = None` disables noise, else
/// complex white Gaussian noise is added at the stated per-sample SNR
/// relative to a unit-reflectivity scatterer.
pub fn render_echo(
    script: &GestureScript,
    params: &FrameParams,
    snr_db: Option<f64>,
    motion: MotionModel,
    rng_seed: u64,
) -> Result<Recording, EchoError> {
    if let Some(snr) = snr_db {
        if !snr.is_finite() {
            return Err(EchoError::NonFiniteSnr(snr));
        }
    }
    let frame_len = params.frame_samples();
    let noise_sigma = snr_db.map(|snr| (10f64.powf(-snr / 10.0) / 2.0).sqrt());

    let frames = script
        .frames
        .iter()
        .enumerate()
        .map(|(f, scatterers)| {
            let mut buf = vec![Complex64::new(0.0, 0.0); frame_len];
            for s in scatterers {
                add_scatterer_echo(&mut buf, s, params, motion, f)?;
            }
            if let Some(sigma) = noise_sigma {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(rng_seed, 0xa0a0 + f as u64));
                for v in buf.iter_mut() {
                    let re: f64 = rng.sample(StandardNormal);
                    let im: f64 = rng.sample(StandardNormal);
                    *v += Complex64::new(re * sigma, im * sigma);
                }
            }
            Ok(buf)
        })
        .collect::<Result<Vec<_>, EchoError>>()?;

    Ok(Recording {
        params: params.clone(),
        frames,
        label: script.class,
        subject: 0,
        truth: Some(script.clone()),
    })
}

/// A real passband rendering, used only to exercise the I&Q demodulator.
#[derive(Debug, Clone)]
pub struct PassbandRecording {
    pub params: FrameParams,
    pub sample_rate: f64,
    pub frames: Vec<Vec<f64>>,
}

/// Renders the real carrier signal at `oversample * fc` (default call sites
/// use 4). Noise-free; pair with [`render_echo`] for the dual-mode residual
/// check.
pub fn render_echo_passband(
    script: &GestureScript,
    params: &FrameParams,
    motion: MotionModel,
    oversample: u32,
) -> Result<PassbandRecording, EchoError> {
    let rate = params.carrier_freq * oversample as f64;
    let pri_pb = (params.pri * rate + 1e-9).floor() as usize;
    let frame_len = params.pulses_per_frame as usize * pri_pb;
    let c = params.sound_speed;
    let tau = params.pulse_width;
    let b = params.bandwidth;
    let fc = params.carrier_freq;

    let mut frames = Vec::with_capacity(script.frames.len());
    for (f, scatterers) in script.frames.iter().enumerate() {
        let mut buf = vec![0.0f64; frame_len];
        for s in scatterers {
            let delay0 = 2.0 * s.range / c;
            for p in 0..params.pulses_per_frame as usize {
                let r_p = s.range + s.velocity * params.pri * p as f64;
                let delay_env = match motion {
                    MotionModel::StopAndHop => delay0,
                    MotionModel::TrueMotion => 2.0 * r_p / c,
                };
                if delay_env < 0.0 || delay_env >= params.pri {
                    return Err(EchoError::DelayExceedsPri { id: s.id, frame: f });
                }
                let t_start = p as f64 * params.pri + delay_env;
                let k0 = (t_start * rate).ceil().max(0.0) as usize;
                let k1 = (((t_start + tau) * rate).floor() as usize).min(frame_len - 1);
                let delay_phase = -2.0 * PI * fc * (2.0 * r_p / c);
                for k in k0..=k1 {
                    let t_abs = k as f64 / rate;
                    let env = chirp_value(b, tau, t_abs - t_start);
                    if env.re != 0.0 || env.im != 0.0 {
                        let ph = env.arg() + 2.0 * PI * fc * t_abs + delay_phase;
                        buf[k] += s.reflectivity * ph.cos();
                    }
                }
            }
        }
        frames.push(buf);
    }

    Ok(PassbandRecording {
        params: params.clone(),
        sample_rate: rate,
        frames,
    })
}

// ---------------------------------------------------------------------------
// Recording file format (HUGR)
// ---------------------------------------------------------------------------

pub const RECORDING_MAGIC: &[u8; 4] = b"HUGR";
pub const RECORDING_VERSION: u16 = 1;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("bad magic at byte offset {offset}: expected {expected:?}")]
    BadMagic { offset: usize, expected: &'static str },
    #[error("unsupported format version {0}")]
    BadVersion(u16),
    #[error("invalid parameter block: {0}")]
    Params(#[from] crate::params::InvalidParams),
    #[error("bad label byte {0}")]
    BadLabel(u8),
}

/// Recording header: everything before the frame payload.
#[derive(Debug, Clone)]
pub struct RecordingHeader {
    pub params: FrameParams,
    pub frame_count: u32,
    pub label: GestureClass,
    pub subject: u16,
}

pub fn write_recording_header<W: Write>(w: &mut W, h: &RecordingHeader) -> io::Result<()> {
    w.write_all(RECORDING_MAGIC)?;
    wire::write_u16(w, RECORDING_VERSION)?;
    wire::write_params(w, &h.params)?;
    wire::write_u32(w, h.frame_count)?;
    w.write_all(&[h.label.index()])?;
    wire::write_u16(w, h.subject)
}

pub fn read_recording_header<R: Read>(r: &mut R) -> Result<RecordingHeader, FormatError> {
    let magic = wire::read_exact_bytes::<R, 4>(r)?;
    if &magic != RECORDING_MAGIC {
        return Err(FormatError::BadMagic {
            offset: 0,
            expected: "HUGR",
        });
    }
    let version = wire::read_u16(r)?;
    if version != RECORDING_VERSION {
        return Err(FormatError::BadVersion(version));
    }
    let params = wire::read_params(r)?;
    params.validate()?;
    let frame_count = wire::read_u32(r)?;
    let label_byte = wire::read_u8(r)?;
    let label = GestureClass::from_index(label_byte).ok_or(FormatError::BadLabel(label_byte))?;
    let subject = wire::read_u16(r)?;
    Ok(RecordingHeader {
        params,
        frame_count,
        label,
        subject,
    })
}

/// Writes one frame as interleaved (re, im) f32 pairs, pulse-major.
pub fn write_frame<W: Write>(w: &mut W, frame: &[Complex64]) -> io::Result<()> {
    for v in frame {
        wire::write_f32(w, v.re as f32)?;
        wire::write_f32(w, v.im as f32)?;
    }
    Ok(())
}

pub fn read_frame<R: Read>(r: &mut R, params: &FrameParams) -> io::Result<Vec<Complex64>> {
    let n = params.frame_samples();
    let mut frame = Vec::with_capacity(n);
    for _ in 0..n {
        let re = wire::read_f32(r)?;
        let im = wire::read_f32(r)?;
        frame.push(Complex64::new(re as f64, im as f64));
    }
    Ok(frame)
}

impl Recording {
    pub fn write_to<W: Write>(&self, w: &mut W) -> io::Result<()> {
        write_recording_header(
            w,
            &RecordingHeader {
                params: self.params.clone(),
                frame_count: self.frames.len() as u32,
                label: self.label,
                subject: self.subject,
            },
        )?;
        for frame in &self.frames {
            write_frame(w, frame)?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Recording, FormatError> {
        let header = read_recording_header(r)?;
        let mut frames = Vec::with_capacity(header.frame_count as usize);
        for _ in 0..header.frame_count {
            frames.push(read_frame(r, &header.params)?);
        }
        Ok(Recording {
            params: header.params,
            frames,
            label: header.label,
            subject: header.subject,
            truth: None,
        })
    }

    pub fn save(&self, path: &Path) -> Result<(), FormatError> {
        let mut w = BufWriter::new(fs::File::create(path)?);
        self.write_to(&mut w)?;
        Ok(w.flush()?)
    }

    pub fn load(path: &Path) -> Result<Recording, FormatError> {
        let mut r = io::BufReader::new(fs::File::open(path)?);
        Recording::read_from(&mut r)
    }
}

// ---------------------------------------------------------------------------
// Dataset synthesis
// ---------------------------------------------------------------------------

/// Dataset synthesis configuration; the JSON config files use this schema.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub params: FrameParams,
    pub subjects: u16,
    pub samples_per_class: u32,
    /// Optional per-class overrides of `samples_per_class` (per subject).
    pub class_counts: Option<BTreeMap<String, u32>>,
    /// Per-sample SNR in dB; `null` renders noise-free.
    pub snr_db: Option<f64>,
    pub seed: u64,
    pub kinematics: KinematicsPreset,
    pub motion: MotionModel,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            // roi_start_bin 60 centers the simulated gesture zone
            // (3.2-10.2 cm) in the 180-bin range window.
            params: FrameParams {
                roi_start_bin: 60,
                ..FrameParams::default()
            },
            subjects: 9,
            samples_per_class: 50,
            class_counts: None,
            snr_db: Some(10.0),
            seed: 7,
            kinematics: KinematicsPreset::Default,
            motion: MotionModel::StopAndHop,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub label: String,
    pub subject: u16,
    pub subject_seed: u64,
    pub script_seed: u64,
    pub noise_seed: u64,
    pub snr_db: Option<f64>,
}

/// The dataset manifest: parameters plus one entry per recording file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub params: FrameParams,
    pub snr_db: Option<f64>,
    pub kinematics: KinematicsPreset,
    pub motion: MotionModel,
    pub seed: u64,
    pub entries: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn from_json(s: &str) -> Result<Manifest, serde_json::Error> {
        serde_json::from_str(s)
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("output directory {0} is not empty (use --force to overwrite)")]
    NonEmptyOutput(PathBuf),
    #[error("duplicate output path {0}")]
    DuplicatePath(String),
    #[error("unknown class name {0} in class_counts")]
    UnknownClass(String),
    #[error(transparent)]
    Echo(#[from] EchoError),
    #[error("format: {0}")]
    Format(#[from] FormatError),
}

/// Enumerates every recording the config asks for, with derived seeds; does
/// not touch the filesystem.
pub fn plan_dataset(config: &DatasetConfig) -> Result<Manifest, DatasetError> {
    if let Some(counts) = &config.class_counts {
        for name in counts.keys() {
            if GestureClass::from_name(name).is_none() {
                return Err(DatasetError::UnknownClass(name.clone()));
            }
        }
    }
    let mut entries = Vec::new();
    for subject in 1..=config.subjects {
        let subject_seed = mix_seed(config.seed, 0x53_0000 + subject as u64);
        for class in GestureClass::ALL {
            let count = config
                .class_counts
                .as_ref()
                .and_then(|m| m.get(class.name()).copied())
                .unwrap_or(config.samples_per_class);
            for idx in 0..count {
                let tag = ((subject as u64) << 40) | ((class.index() as u64) << 32) | idx as u64;
                entries.push(ManifestEntry {
                    path: format!("rec/s{subject:02}_{}_{idx:03}.hugr", class.name()),
                    label: class.name().to_string(),
                    subject,
                    subject_seed,
                    script_seed: mix_seed(config.seed, tag.wrapping_mul(2).wrapping_add(1)),
                    noise_seed: mix_seed(config.seed, tag.wrapping_mul(2).wrapping_add(2)),
                    snr_db: config.snr_db,
                });
            }
        }
    }
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    for pair in entries.windows(2) {
        if pair[0].path == pair[1].path {
            return Err(DatasetError::DuplicatePath(pair[0].path.clone()));
        }
    }
    Ok(Manifest {
        format_version: 1,
        params: config.params.clone(),
        snr_db: config.snr_db,
        kinematics: config.kinematics,
        motion: config.motion,
        seed: config.seed,
        entries,
    })
}

/// Renders the recording for one manifest entry.
pub fn render_entry(manifest: &Manifest, entry: &ManifestEntry) -> Result<Recording, EchoError> {
    let class = GestureClass::from_name(&entry.label)
        .ok_or_else(|| EchoError::UnknownClass(entry.label.clone()))?;
    let kin = manifest.kinematics.kinematics();
    let script = script_gesture_with(class, entry.subject_seed, entry.script_seed, &kin);
    let mut rec = render_echo(
        &script,
        &manifest.params,
        entry.snr_db,
        manifest.motion,
        entry.noise_seed,
    )?;
    rec.subject = entry.subject;
    Ok(rec)
}

/// Synthesizes the whole dataset to `out_dir`: recording files under `rec/`
/// plus `manifest.json`. Refuses a nonempty output directory unless `force`.
pub fn synth_dataset(
    config: &DatasetConfig,
    out_dir: &Path,
    force: bool,
) -> Result<Manifest, DatasetError> {
    let manifest = plan_dataset(config)?;
    if out_dir.exists() && fs::read_dir(out_dir)?.next().is_some() && !force {
        return Err(DatasetError::NonEmptyOutput(out_dir.to_path_buf()));
    }
    fs::create_dir_all(out_dir.join("rec"))?;

    manifest
        .entries
        .par_iter()
        .try_for_each(|entry| -> Result<(), DatasetError> {
            let rec = render_entry(&manifest, entry)?;
            rec.save(&out_dir.join(&entry.path))?;
            Ok(())
        })?;

    fs::write(out_dir.join("manifest.json"), manifest.to_json())?;
    Ok(manifest)
}
