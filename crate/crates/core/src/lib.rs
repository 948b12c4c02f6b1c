//! Ultrasonic pulse-Doppler micro hand-gesture recognition pipeline.
//!
//! The crate covers the whole software chain end to end:
//!
//! * [`params`] — the radar parameter set and the derived resolution math.
//! * [`waveform`] — baseband chirp pulse and matched-filter reference.
//! * [`echosim`] — synthetic echo recordings for scripted finger gestures.
//! * [`rdproc`] — matched filtering, slow-time FFT, 256x180 range-Doppler images.
//! * [`tracker`] — peak detection and the per-scatterer track state machine.
//! * [`symbolizer`] — feature-vector-to-symbol dictionary.
//! * [`hmm`] — per-gesture discrete HMMs (Baum-Welch, forward, MAP classify).
//! * [`pipeline`] — dataset synthesis, leave-one-subject-out training and
//!   evaluation, and the frame-stream classifier used by the CLI.

pub mod echosim;
pub mod hmm;
pub mod params;
pub mod pipeline;
pub mod rdproc;
pub mod symbolizer;
pub mod tracker;
pub mod waveform;
mod wire;

pub use params::{derive, FrameParams};
