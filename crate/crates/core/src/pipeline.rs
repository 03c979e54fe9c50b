//! The real-time loop: samples go into a ring buffer and every completed
//! one-second hop produces a [`TickReport`] for the newest full window.
//!
//! Stream time is sample-count time. A tick's analytics depend only on the
//! samples of its window and on the Good windows before it, so any chunking
//! of the same stream yields the same reports apart from the timing fields.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, PipelineConfig};
use crate::dsp::{PopError, RingBuffer, Segment, WindowSource, HOP_LEN, RATE_HZ, WINDOW_LEN};
use crate::fhr::{estimate_fhr, FhrEstimate};
use crate::ga::{GaCollector, GaEstimate, GaError, WindowScorer};
use crate::quality::{classify, PerClass, QualityClass, QualityClassifier, QualityError, QualityLabel};

/// Reason recorded when FHR is withheld from a non-Good tick.
pub const NOT_GOOD: &str = "not_good";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PipelineError {
    #[error("session is stopped")]
    SessionStopped,
    #[error("session has not been started")]
    NotStarted,
    #[error("sample {index} of the chunk is not a finite amplitude in [-1, 1]")]
    BadSample { index: usize },
    #[error(transparent)]
    Model(#[from] QualityError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Idle,
    Warming,
    Running,
    Stopped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Started,
    Stopped,
    Reposition,
    DataLost,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Started => "started",
            EventKind::Stopped => "stopped",
            EventKind::Reposition => "reposition",
            EventKind::DataLost => "data_lost",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub kind: EventKind,
    /// Stream time in seconds.
    pub t_s: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TickReport {
    pub tick_index: u64,
    pub t_end_s: f64,
    pub quality: QualityLabel,
    pub fhr: Option<FhrEstimate>,
    pub fhr_absent_reason: Option<String>,
    pub ga_running: Option<GaEstimate>,
    pub processing_ms: f64,
    pub deadline_missed: bool,
}

impl TickReport {
    /// Equality on everything except the timing metadata.
    pub fn same_analytics(&self, other: &TickReport) -> bool {
        self.tick_index == other.tick_index
            && self.t_end_s.to_bits() == other.t_end_s.to_bits()
            && self.quality.class == other.quality.class
            && self
                .quality
                .scores
                .iter()
                .zip(&other.quality.scores)
                .all(|(a, b)| a.to_bits() == b.to_bits())
            && self.fhr == other.fhr
            && self.fhr_absent_reason == other.fhr_absent_reason
            && self.ga_running == other.ga_running
    }
}

/// End-of-session roll-up.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionSummary {
    pub ticks: u64,
    pub quality_counts: PerClass<u64>,
    pub fhr_count: u64,
    pub fhr_mean: Option<f64>,
    /// Sample standard deviation; needs two estimates.
    pub fhr_sd: Option<f64>,
    pub ga: Option<GaEstimate>,
    pub ga_absent_reason: Option<String>,
    pub deadline_misses: u64,
    pub events: Vec<SessionEvent>,
}

/// Mean and sample SD (`n - 1`).
pub fn mean_sd(values: &[f64]) -> (Option<f64>, Option<f64>) {
    let n = values.len();
    if n == 0 {
        return (None, None);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let sd = (n >= 2).then(|| {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
    });
    (Some(mean), sd)
}

/// Summary over a finished set of ticks.
pub fn summarize(ticks: &[TickReport], events: Vec<SessionEvent>) -> SessionSummary {
    let mut counts = [0u64; 5];
    let mut fhr = Vec::new();
    let mut misses = 0;
    for t in ticks {
        counts[t.quality.class.index()] += 1;
        if let Some(f) = &t.fhr {
            fhr.push(f.bpm);
        }
        misses += u64::from(t.deadline_missed);
    }
    let ga = ticks.iter().rev().find_map(|t| t.ga_running.clone());
    let (fhr_mean, fhr_sd) = mean_sd(&fhr);
    SessionSummary {
        ticks: ticks.len() as u64,
        quality_counts: PerClass::from_array(counts),
        fhr_count: fhr.len() as u64,
        fhr_mean,
        fhr_sd,
        ga_absent_reason: ga.is_none().then(|| GaError::NoGoodWindows.reason().to_string()),
        ga,
        deadline_misses: misses,
        events,
    }
}

/// Per-window analysis shared by the synchronous and concurrent paths.
struct Engine {
    classifier: Box<dyn QualityClassifier>,
    scorer: Box<dyn WindowScorer>,
    budget_ms: f64,
    phase: Phase,
    next_index: u64,
    samples_seen: u64,
    collector: GaCollector,
    ga_running: Option<GaEstimate>,
    class_counts: [u64; 5],
    fhr_values: Vec<f64>,
    ticks: u64,
    deadline_misses: u64,
    events: Vec<SessionEvent>,
}

impl Engine {
    fn stream_time_s(&self) -> f64 {
        self.samples_seen as f64 / f64::from(RATE_HZ)
    }

    fn push_event(&mut self, kind: EventKind, note: Option<String>) -> SessionEvent {
        let ev = SessionEvent {
            kind,
            t_s: self.stream_time_s(),
            note,
        };
        self.events.push(ev.clone());
        ev
    }

    fn check_active(&self) -> Result<(), PipelineError> {
        match self.phase {
            Phase::Idle => Err(PipelineError::NotStarted),
            Phase::Stopped => Err(PipelineError::SessionStopped),
            Phase::Warming | Phase::Running => Ok(()),
        }
    }

    fn process(&mut self, seg: &Segment) -> Result<TickReport, PipelineError> {
        let started = Instant::now();
        let quality = classify(seg, self.classifier.as_ref())?;
        let (fhr, fhr_absent_reason) = if quality.class == QualityClass::Good {
            match estimate_fhr(seg) {
                Ok(est) => {
                    // a failing scorer just leaves this window out of the GA
                    if let Ok(true) = self.collector.offer(seg, self.scorer.as_ref()) {
                        self.ga_running = self.collector.estimate().ok();
                    }
                    (Some(est), None)
                }
                Err(e) => (None, Some(e.reason().to_string())),
            }
        } else {
            (None, Some(NOT_GOOD.to_string()))
        };
        let processing_ms = started.elapsed().as_secs_f64() * 1e3;
        let report = TickReport {
            tick_index: seg.index(),
            t_end_s: seg.end_time_s(),
            quality,
            fhr,
            fhr_absent_reason,
            ga_running: self.ga_running.clone(),
            processing_ms,
            deadline_missed: processing_ms > self.budget_ms,
        };
        self.ticks += 1;
        self.class_counts[report.quality.class.index()] += 1;
        if let Some(f) = &report.fhr {
            self.fhr_values.push(f.bpm);
        }
        self.deadline_misses += u64::from(report.deadline_missed);
        Ok(report)
    }

    fn drain(&mut self, src: &dyn WindowSource) -> Result<Vec<TickReport>, PipelineError> {
        let mut out = Vec::new();
        loop {
            self.samples_seen = src.write_count();
            match src.pop_segment(self.next_index) {
                Ok(seg) => {
                    self.next_index += 1;
                    out.push(self.process(&seg)?);
                }
                Err(PopError::NotReady { .. }) => break,
                Err(PopError::DataLost { start, oldest }) => {
                    // jump to the newest complete window instead of failing
                    let newest = (self.samples_seen - WINDOW_LEN as u64) / HOP_LEN as u64;
                    self.push_event(
                        EventKind::DataLost,
                        Some(format!(
                            "window {} (sample {start}) overwritten, oldest kept {oldest}; resuming at window {newest}",
                            self.next_index
                        )),
                    );
                    self.next_index = newest;
                }
            }
        }
        if self.phase == Phase::Warming && self.samples_seen >= WINDOW_LEN as u64 {
            self.phase = Phase::Running;
        }
        Ok(out)
    }

    fn summary(&self) -> SessionSummary {
        let (fhr_mean, fhr_sd) = mean_sd(&self.fhr_values);
        let ga = self.collector.estimate();
        SessionSummary {
            ticks: self.ticks,
            quality_counts: PerClass::from_array(self.class_counts),
            fhr_count: self.fhr_values.len() as u64,
            fhr_mean,
            fhr_sd,
            ga_absent_reason: ga.as_ref().err().map(|e| e.reason().to_string()),
            ga: ga.ok(),
            deadline_misses: self.deadline_misses,
            events: self.events.clone(),
        }
    }
}

/// One monitoring session.
pub struct Session {
    ring: RingBuffer,
    engine: Engine,
}

impl Session {
    pub fn new(config: &PipelineConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        Ok(Self::with_models(
            config.ring_capacity,
            config.classifier()?,
            config.scorer()?,
            config.tick_budget_ms,
        ))
    }

    /// # Panics
    /// If `ring_capacity` is smaller than one window.
    pub fn with_models(
        ring_capacity: usize,
        classifier: Box<dyn QualityClassifier>,
        scorer: Box<dyn WindowScorer>,
        budget_ms: f64,
    ) -> Self {
        assert!(ring_capacity >= WINDOW_LEN, "ring must hold a full window");
        Self {
            ring: RingBuffer::new(ring_capacity),
            engine: Engine {
                classifier,
                scorer,
                budget_ms,
                phase: Phase::Idle,
                next_index: 0,
                samples_seen: 0,
                collector: GaCollector::default(),
                ga_running: None,
                class_counts: [0; 5],
                fhr_values: Vec::new(),
                ticks: 0,
                deadline_misses: 0,
                events: Vec::new(),
            },
        }
    }

    pub fn phase(&self) -> Phase {
        self.engine.phase
    }

    pub fn events(&self) -> &[SessionEvent] {
        &self.engine.events
    }

    pub fn ticks_emitted(&self) -> u64 {
        self.engine.ticks
    }

    pub fn good_windows_collected(&self) -> usize {
        self.engine.collector.len()
    }

    pub fn stream_time_s(&self) -> f64 {
        self.engine.stream_time_s()
    }

    /// Idle to Warming. Starting a live session again is a no-op.
    pub fn start(&mut self) -> Result<Option<SessionEvent>, PipelineError> {
        match self.engine.phase {
            Phase::Idle => {
                self.engine.phase = Phase::Warming;
                Ok(Some(self.engine.push_event(EventKind::Started, None)))
            }
            Phase::Stopped => Err(PipelineError::SessionStopped),
            Phase::Warming | Phase::Running => Ok(None),
        }
    }

    /// Appends 4000 Hz samples and returns the ticks they completed.
    pub fn feed(&mut self, chunk: &[f64]) -> Result<Vec<TickReport>, PipelineError> {
        self.engine.check_active()?;
        if let Some(index) = chunk.iter().position(|v| !v.is_finite() || v.abs() > 1.0) {
            return Err(PipelineError::BadSample { index });
        }
        let mut out = Vec::new();
        // hop-sized pieces keep every pending window inside the ring
        for piece in chunk.chunks(HOP_LEN) {
            self.ring.write(piece);
            out.extend(self.engine.drain(&self.ring)?);
        }
        Ok(out)
    }

    /// Processes whatever windows `src` has completed. For use when capture
    /// writes into a separate ring, e.g. [`crate::dsp::spsc`], instead of
    /// going through [`Session::feed`].
    pub fn drain_from(&mut self, src: &dyn WindowSource) -> Result<Vec<TickReport>, PipelineError> {
        self.engine.check_active()?;
        self.engine.drain(src)
    }

    pub fn mark_reposition(&mut self, note: Option<String>) -> Result<SessionEvent, PipelineError> {
        self.engine.check_active()?;
        Ok(self.engine.push_event(EventKind::Reposition, note))
    }

    pub fn stop(&mut self) -> SessionSummary {
        if self.engine.phase != Phase::Stopped {
            self.engine.phase = Phase::Stopped;
            self.engine.push_event(EventKind::Stopped, None);
        }
        self.engine.summary()
    }

    pub fn is_stopped(&self) -> bool {
        self.engine.phase == Phase::Stopped
    }

    pub fn summary(&self) -> SessionSummary {
        self.engine.summary()
    }
}

/// Ticks a session emits after `n` samples in total.
pub fn expected_ticks(n: u64) -> u64 {
    if n < WINDOW_LEN as u64 {
        0
    } else {
        (n - WINDOW_LEN as u64) / HOP_LEN as u64 + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::spsc;
    use crate::synth::synth_doppler;

    fn session() -> Session {
        let mut s = Session::new(&PipelineConfig::default()).unwrap();
        s.start().unwrap();
        s
    }

    fn stream(secs: f64) -> Vec<f64> {
        synth_doppler(140.0, secs, 0.05, 1).unwrap().into_samples()
    }

    #[test]
    fn warm_up_then_one_tick_per_hop() {
        let x = stream(6.0);
        let mut s = session();
        assert_eq!(s.phase(), Phase::Warming);
        let t = s.feed(&x[..15_000]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].tick_index, t[0].t_end_s), (0, 3.75));
        assert_eq!(s.phase(), Phase::Running);
        let t = s.feed(&x[15_000..19_000]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!((t[0].tick_index, t[0].t_end_s), (1, 4.75));
    }

    #[test]
    fn large_chunk_emits_several_ticks() {
        let x = stream(6.0);
        let t = session().feed(&x[..23_000]).unwrap();
        assert_eq!(t.iter().map(|r| r.tick_index).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn good_ticks_carry_fhr_and_ga() {
        let x = stream(10.0);
        let mut s = session();
        let t = s.feed(&x).unwrap();
        assert_eq!(t.len(), 7);
        for r in &t {
            assert_eq!(r.quality.class, QualityClass::Good);
            let f = r.fhr.unwrap();
            assert!((f.bpm - 140.0).abs() < 0.5);
            assert!(r.ga_running.is_some());
        }
        assert_eq!(t[6].ga_running.as_ref().unwrap().n_windows_used, 7);
        assert_eq!(s.good_windows_collected(), 7);
    }

    #[test]
    fn fhr_is_withheld_from_non_good_ticks() {
        let mut s = session();
        let t = s.feed(&vec![0.0; 20_000]).unwrap();
        assert_eq!(t.len(), 2);
        for r in &t {
            assert_eq!(r.quality.class, QualityClass::Silent);
            assert!(r.fhr.is_none());
            assert_eq!(r.fhr_absent_reason.as_deref(), Some(NOT_GOOD));
            assert!(r.ga_running.is_none());
        }
        let sum = s.stop();
        assert_eq!(sum.ga, None);
        assert_eq!(sum.ga_absent_reason.as_deref(), Some("no_good_windows"));
    }

    #[test]
    fn reposition_marks_do_not_touch_analytics() {
        let x = stream(8.0);
        let mut a = session();
        let mut b = session();
        let ta = a.feed(&x).unwrap();
        b.feed(&x[..16_000]).unwrap();
        let before = b.events().len();
        b.mark_reposition(Some("probe moved".into())).unwrap();
        b.mark_reposition(None).unwrap();
        assert_eq!(b.events().len(), before + 2);
        assert_eq!(b.events()[before].t_s, 4.0);
        assert_eq!(b.events()[before].note.as_deref(), Some("probe moved"));
        let mut tb = vec![];
        let mut s2 = session();
        tb.extend(s2.feed(&x[..16_000]).unwrap());
        tb.extend(s2.feed(&x[16_000..]).unwrap());
        assert!(ta.iter().zip(&tb).all(|(p, q)| p.same_analytics(q)));
        b.stop();
        assert_eq!(
            b.mark_reposition(None),
            Err(PipelineError::SessionStopped)
        );
        assert_eq!(b.feed(&[0.0]), Err(PipelineError::SessionStopped));
    }

    #[test]
    fn lifecycle_errors() {
        let mut s = Session::new(&PipelineConfig::default()).unwrap();
        assert_eq!(s.feed(&[0.0]), Err(PipelineError::NotStarted));
        assert_eq!(s.mark_reposition(None), Err(PipelineError::NotStarted));
        assert!(s.start().unwrap().is_some());
        assert!(s.start().unwrap().is_none());
        assert_eq!(s.feed(&[2.0]), Err(PipelineError::BadSample { index: 0 }));
        let sum = s.stop();
        assert_eq!(sum.ticks, 0);
        assert_eq!(s.start(), Err(PipelineError::SessionStopped));
    }

    #[test]
    fn summary_statistics() {
        let x = stream(12.0);
        let mut s = session();
        let ticks = s.feed(&x).unwrap();
        let sum = s.stop();
        assert_eq!(sum.ticks, 9);
        assert_eq!(sum.quality_counts.good, 9);
        assert!((sum.fhr_mean.unwrap() - 140.0).abs() < 0.5);
        assert!(sum.fhr_sd.unwrap() < 0.5);
        assert_eq!(sum.ga.as_ref().unwrap().n_windows_used, 9);
        let kinds: Vec<_> = sum.events.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, vec![EventKind::Started, EventKind::Stopped]);
        let offline = summarize(&ticks, sum.events.clone());
        assert_eq!(offline.fhr_mean, sum.fhr_mean);
        assert_eq!(offline.ga, sum.ga);
    }

    #[test]
    fn mean_sd_uses_sample_denominator() {
        assert_eq!(mean_sd(&[]), (None, None));
        assert_eq!(mean_sd(&[3.0]), (Some(3.0), None));
        let (m, sd) = mean_sd(&[1.0, 2.0, 3.0]);
        assert_eq!((m, sd), (Some(2.0), Some(1.0)));
    }

    #[test]
    fn tick_law() {
        for n in [0u64, 14_999, 15_000, 18_999, 19_000, 23_000, 103_000] {
            let x = vec![0.0; n as usize];
            let t = session().feed(&x).unwrap();
            assert_eq!(t.len() as u64, expected_ticks(n), "n = {n}");
        }
        assert_eq!(expected_ticks(103_000), 23);
    }

    #[test]
    fn lagging_consumer_resynchronizes() {
        let x = stream(20.0);
        let (mut tx, rx) = spsc::channel(16_000);
        let mut s = session();
        tx.write(&x[..15_000]);
        assert_eq!(s.drain_from(&rx).unwrap().len(), 1);
        // fall 12 s behind: windows 1.. are gone
        tx.write(&x[15_000..63_000]);
        let t = s.drain_from(&rx).unwrap();
        let lost = s.events().iter().filter(|e| e.kind == EventKind::DataLost).count();
        assert_eq!(lost, 1);
        assert_eq!(t.first().unwrap().tick_index, (63_000 - 15_000) / 4000);
        assert_eq!(t.len(), 1);
        tx.write(&x[63_000..67_000]);
        assert_eq!(s.drain_from(&rx).unwrap()[0].tick_index, 13);
    }
}
