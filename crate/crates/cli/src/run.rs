use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use clap::Args;
use pulsepipe::dsp::{resample, spsc};
use pulsepipe::io::{load_wav, LogHeader, LogWriter};
use pulsepipe::pipeline::{PipelineError, SessionEvent};
use pulsepipe::synth::{DopplerParams, DopplerSynth};
use pulsepipe::{Session, SessionSummary, TickReport, RATE_HZ};
use pulsepipe_gateway::Gateway;

use crate::{load_config, CliResult, Failure};

#[derive(Args)]
pub struct RunArgs {
    /// 16-bit PCM mono WAV file.
    #[arg(long, conflicts_with = "synth", required_unless_present = "synth")]
    input: Option<PathBuf>,
    /// Synthetic source, e.g. "bpm=140,dur=60,noise=0.05,seed=1".
    #[arg(long)]
    synth: Option<String>,
    /// Session log (JSONL).
    #[arg(long)]
    out: PathBuf,
    /// Serve the live feed on ws://0.0.0.0:PORT/live.
    #[arg(long)]
    serve: Option<u16>,
    /// "max" (unpaced), "real", or a speed-up factor such as 4.
    #[arg(long, default_value = "max")]
    speed: Speed,
    /// Samples per feed (400 = 100 ms).
    #[arg(long, default_value_t = 400, value_parser = clap::value_parser!(u32).range(1..))]
    chunk: u32,
    /// JSON config overriding thresholds and model names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Seconds to keep the gateway up after the input ends.
    #[arg(long, default_value_t = 0.0)]
    linger: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Speed {
    Max,
    Factor(f64),
}

impl FromStr for Speed {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "max" => Ok(Speed::Max),
            "real" => Ok(Speed::Factor(1.0)),
            other => match other.parse::<f64>() {
                Ok(f) if f > 0.0 && f.is_finite() => Ok(Speed::Factor(f)),
                _ => Err(format!("speed must be max, real or a positive factor, not {other:?}")),
            },
        }
    }
}

/// `key=value` list describing a synthetic Doppler recording.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub params: DopplerParams,
    pub duration_s: f64,
}

impl FromStr for SynthSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let mut params = DopplerParams::new(140.0, 0.05, 1);
        let mut duration_s = 60.0;
        for item in s.split(',').map(str::trim).filter(|i| !i.is_empty()) {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| format!("expected key=value, got {item:?}"))?;
            let num = || {
                value
                    .trim()
                    .parse::<f64>()
                    .map_err(|_| format!("{key}: {value:?} is not a number"))
            };
            match key.trim() {
                "bpm" => params.bpm = num()?,
                "dur" => duration_s = num()?,
                "noise" => params.noise_level = num()?,
                "depth" => params.beat_depth = num()?,
                "seed" => {
                    params.seed = value
                        .trim()
                        .parse()
                        .map_err(|_| format!("seed: {value:?} is not an integer"))?
                }
                other => return Err(format!("unknown synth parameter {other:?}")),
            }
        }
        params.validate().map_err(|e| e.to_string())?;
        if !(duration_s > 0.0 && duration_s.is_finite()) {
            return Err(format!("dur must be positive, got {duration_s}"));
        }
        Ok(SynthSpec { params, duration_s })
    }
}

impl SynthSpec {
    fn describe(&self) -> String {
        let p = &self.params;
        format!(
            "synth:bpm={},dur={},noise={},depth={},seed={}",
            p.bpm, self.duration_s, p.noise_level, p.beat_depth, p.seed
        )
    }
}

/// Where samples come from, chunk by chunk.
enum Source {
    Samples { data: Vec<f64>, pos: usize },
    Synth { gen: DopplerSynth, remaining: usize },
}

impl Source {
    fn next_chunk(&mut self, n: usize) -> Option<Vec<f64>> {
        match self {
            Source::Samples { data, pos } => {
                let end = (*pos + n).min(data.len());
                let out = data[*pos..end].to_vec();
                *pos = end;
                (!out.is_empty()).then_some(out)
            }
            Source::Synth { gen, remaining } => {
                let k = n.min(*remaining);
                *remaining -= k;
                (k > 0).then(|| gen.next_chunk(k))
            }
        }
    }

    fn synth_mut(&mut self) -> Option<&mut DopplerSynth> {
        match self {
            Source::Synth { gen, .. } => Some(gen),
            Source::Samples { .. } => None,
        }
    }
}

fn open_source(args: &RunArgs) -> Result<(Source, String), Failure> {
    if let Some(path) = &args.input {
        let stream = load_wav(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        let stream = resample(&stream, RATE_HZ).map_err(Failure::input)?;
        let data = stream.into_samples();
        return Ok((Source::Samples { data, pos: 0 }, path.display().to_string()));
    }
    let spec: SynthSpec = args
        .synth
        .as_deref()
        .unwrap_or_default()
        .parse()
        .map_err(Failure::input)?;
    let remaining = (spec.duration_s * f64::from(RATE_HZ)).round() as usize;
    let gen = DopplerSynth::new(spec.params.clone()).map_err(Failure::input)?;
    Ok((Source::Synth { gen, remaining }, spec.describe()))
}

/// Log and live-feed output for each tick and event.
struct Sinks {
    log: LogWriter<BufWriter<File>>,
    gateway: Option<Gateway>,
    events_sent: usize,
}

impl Sinks {
    fn ticks(&mut self, ticks: &[TickReport]) -> Result<(), Failure> {
        for t in ticks {
            self.log.tick(t).map_err(Failure::input)?;
            if let Some(gw) = &self.gateway {
                gw.broadcast_tick(t);
            }
        }
        Ok(())
    }

    /// Broadcasts session events the gateway has not seen yet. Events caused
    /// by gateway controls are broadcast by the gateway itself.
    fn events(&mut self, events: &[SessionEvent]) {
        if let Some(gw) = &self.gateway {
            for ev in &events[self.events_sent.min(events.len())..] {
                gw.broadcast_event(ev);
            }
        }
        self.events_sent = events.len();
    }

    fn service(&mut self, session: &mut Session, source: &Mutex<Source>) {
        self.events(session.events());
        if let Some(gw) = &self.gateway {
            let mut src = source.lock().unwrap();
            if gw.service(session, src.synth_mut()) > 0 {
                self.events_sent = session.events().len();
            }
        }
    }
}

fn pipeline_failure(e: PipelineError) -> Failure {
    Failure::input(e)
}

pub fn run(args: RunArgs) -> CliResult {
    let config = load_config(args.config.as_deref())?;
    let (source, input_name) = open_source(&args)?;
    let mut session = Session::new(&config).map_err(Failure::input)?;

    let gateway = match args.serve {
        Some(port) => Some(Gateway::bind(("0.0.0.0", port)).map_err(Failure::network)?),
        None => None,
    };
    let file = File::create(&args.out).map_err(|e| Failure::input(format!("{}: {e}", args.out.display())))?;
    let header = LogHeader::new(config.sha256_hex(), input_name);
    let log = LogWriter::new(BufWriter::new(file), &header).map_err(Failure::input)?;
    let mut sinks = Sinks {
        log,
        gateway,
        events_sent: 0,
    };

    session.start().map_err(pipeline_failure)?;
    let source = Arc::new(Mutex::new(source));
    let chunk = args.chunk as usize;
    match args.speed {
        Speed::Max => run_unpaced(&mut session, &source, chunk, &mut sinks)?,
        Speed::Factor(f) => run_paced(&mut session, &source, chunk, f, config.ring_capacity, &mut sinks)?,
    }

    if args.linger > 0.0 && sinks.gateway.is_some() {
        let until = Instant::now() + Duration::from_secs_f64(args.linger);
        while Instant::now() < until && !session.is_stopped() {
            sinks.service(&mut session, &source);
            thread::sleep(Duration::from_millis(20));
        }
    }

    let summary: SessionSummary = session.stop();
    sinks.events(session.events());
    if let Some(gw) = &sinks.gateway {
        gw.flush(Duration::from_secs(1));
    }
    let mut out = sinks.log.finish(&summary).map_err(Failure::input)?;
    out.flush().map_err(Failure::input)?;
    log::info!(
        "{} ticks, {} with FHR, {} deadline misses",
        summary.ticks,
        summary.fhr_count,
        summary.deadline_misses
    );
    Ok(0)
}

/// Feeds synchronously as fast as possible; the result does not depend on
/// timing.
fn run_unpaced(
    session: &mut Session,
    source: &Mutex<Source>,
    chunk: usize,
    sinks: &mut Sinks,
) -> Result<(), Failure> {
    loop {
        sinks.service(session, source);
        if session.is_stopped() {
            return Ok(());
        }
        let Some(samples) = source.lock().unwrap().next_chunk(chunk) else {
            return Ok(());
        };
        let ticks = session.feed(&samples).map_err(pipeline_failure)?;
        sinks.ticks(&ticks)?;
    }
}

/// Capture thread writes into a lock-free ring at `factor` times real time
/// while this thread processes whatever windows are complete.
fn run_paced(
    session: &mut Session,
    source: &Arc<Mutex<Source>>,
    chunk: usize,
    factor: f64,
    ring_capacity: usize,
    sinks: &mut Sinks,
) -> Result<(), Failure> {
    let (mut tx, rx) = spsc::channel(ring_capacity);
    let done = Arc::new(AtomicBool::new(false));
    let cancel = Arc::new(AtomicBool::new(false));
    let capture = {
        let source = source.clone();
        let done = done.clone();
        let cancel = cancel.clone();
        thread::spawn(move || {
            let t0 = Instant::now();
            let mut sent = 0usize;
            while !cancel.load(Ordering::SeqCst) {
                let due = Duration::from_secs_f64(sent as f64 / f64::from(RATE_HZ) / factor);
                if let Some(wait) = due.checked_sub(t0.elapsed()) {
                    thread::sleep(wait);
                }
                let Some(samples) = source.lock().unwrap().next_chunk(chunk) else {
                    break;
                };
                sent += samples.len();
                tx.write(&samples);
            }
            done.store(true, Ordering::SeqCst);
        })
    };
    let result = (|| loop {
        let finished = done.load(Ordering::SeqCst);
        let ticks = session.drain_from(&rx).map_err(pipeline_failure)?;
        sinks.ticks(&ticks)?;
        sinks.service(session, source);
        if session.is_stopped() || (finished && ticks.is_empty()) {
            return Ok(());
        }
        if ticks.is_empty() {
            thread::sleep(Duration::from_millis(5));
        }
    })();
    cancel.store(true, Ordering::SeqCst);
    let _ = capture.join();
    result
}
