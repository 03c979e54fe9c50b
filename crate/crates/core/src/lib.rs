//! Streaming analysis engine for 1D Doppler ultrasound and blood-pressure
//! monitor images.
//!
//! Audio is handled at a fixed internal rate of 4000 Hz and analysed in
//! overlapping 3.75 s windows emitted once per second. Each window is
//! quality-gated, the good ones get a heart-rate estimate, and up to ten good
//! windows feed a gestational-age aggregate. BP monitor photos are transcribed
//! with a two-step locate-then-decode pipeline.

pub mod bp;
pub mod config;
pub mod dsp;
pub mod fhr;
pub mod ga;
pub mod io;
pub mod pipeline;
pub mod quality;
pub mod synth;

pub use bp::{transcribe_bp, BpError, BpReading, GrayImage, LcdDetector, LcdRegion};
pub use config::PipelineConfig;
pub use dsp::{RingBuffer, SampleStream, Segment, HOP_LEN, RATE_HZ, WINDOW_LEN};
pub use fhr::{estimate_fhr, FhrError, FhrEstimate};
pub use ga::{estimate_ga, GaError, GaEstimate, WindowScorer};
pub use pipeline::{Session, SessionSummary, TickReport};
pub use quality::{classify, QualityClass, QualityClassifier, QualityLabel};

/// Schema identifier shared by session logs and the live feed.
pub const SCHEMA: &str = "pulsepipe/1";
