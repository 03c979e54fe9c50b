//! Acceptance gate. Runs every release criterion, prints one PASS/FAIL line
//! per criterion and exits non-zero if any failed.
//!
//! Run alone with `cargo test -p pulsepipe-cli --test acceptance`.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use pulsepipe::bp::{render_lcd, OtsuDetector};
use pulsepipe::dsp::{spsc, PopError, RingBuffer, WindowSource};
use pulsepipe::fhr::estimate_fhr;
use pulsepipe::ga::{aggregate, GaError, WindowScorer, MAX_WINDOWS};
use pulsepipe::io::TickRow;
use pulsepipe::quality::{quality_report, HeuristicClassifier, QualityThresholds};
use pulsepipe::synth::{salt_and_pepper, synth_class, synth_doppler, DopplerParams, DopplerSynth, Lcg};
use pulsepipe::{classify, transcribe_bp, PipelineConfig, QualityClass, Segment, Session, TickReport, WINDOW_LEN};

// Pinned limits.
const PARITY_RUNTIME: Duration = Duration::from_secs(10);
const SWEEP_TOLERANCE_BPM: f64 = 1.0;
const SWEEP_RUNTIME: Duration = Duration::from_secs(30);
const PAPER_FHR_MEAN: f64 = 139.68;
const PAPER_FHR_SD: f64 = 13.03;
const RECOVERY_TOLERANCE_BPM: f64 = 1.0;
const CLASS_ACCURACY_MIN: f64 = 0.95;
const BP_TRIPLES: usize = 500;
const BP_NOISE: f64 = 0.05;
const BP_DIGIT_ERROR_MAX: f64 = 0.01;
const BP_MAE_MAX: f64 = 2.0;
const BP_RUNTIME: Duration = Duration::from_secs(60);
const TICK_P99_MAX_MS: f64 = 250.0;
const FHR_COST_MAX_MS: f64 = 50.0;
const RING_SCHEDULES: usize = 1000;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pulsepipe"))
}

fn path_str(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn started_session() -> Session {
    let mut s = Session::new(&PipelineConfig::default()).expect("default config");
    s.start().expect("fresh session");
    s
}

fn determinism_parity() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let t0 = Instant::now();
    let logs = [dir.path().join("a.jsonl"), dir.path().join("b.jsonl")];
    for log in &logs {
        let st = bin()
            .args(["run", "--synth", "bpm=140,dur=60,noise=0.05,seed=1", "--speed", "max", "--out"])
            .arg(log)
            .status()
            .map_err(|e| e.to_string())?;
        ensure(st.success(), || format!("run exited with {st}"))?;
    }
    let out = bin()
        .args(["compare", "--field", "fhr_bpm", "--a", path_str(&logs[0]), "--b", path_str(&logs[1])])
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = t0.elapsed();
    ensure(out.status.success(), || format!("compare exited with {}", out.status))?;
    let r: serde_json::Value = serde_json::from_slice(&out.stdout).map_err(|e| e.to_string())?;
    let (mae, sd) = (r["mae"].as_f64(), r["sd_error"].as_f64());
    ensure(mae == Some(0.0) && sd == Some(0.0), || format!("mae {mae:?} sd_error {sd:?}"))?;
    ensure(elapsed < PARITY_RUNTIME, || format!("took {elapsed:.2?}"))?;
    Ok(format!("n={} mae=0 sd_error=0 in {elapsed:.2?} (limit {PARITY_RUNTIME:?})", r["n"]))
}

fn windows_of(x: &[f64]) -> Vec<Segment> {
    let mut ring = RingBuffer::new(x.len().max(1));
    ring.write(x);
    (0..)
        .map_while(|i| ring.pop_segment(i).ok())
        .collect()
}

fn fhr_sweep() -> Outcome {
    let t0 = Instant::now();
    let mut windows = 0;
    let mut worst = 0.0f64;
    let mut half_rate = 0;
    for (k, bpm) in (65..=235).step_by(5).enumerate() {
        let bpm = f64::from(bpm);
        let x = synth_doppler(bpm, 10.0, 0.05, 100 + k as u64).map_err(|e| e.to_string())?;
        for seg in windows_of(x.samples()) {
            windows += 1;
            let est = estimate_fhr(&seg).map_err(|e| format!("{bpm} BPM window {}: {e}", seg.index()))?;
            let err = (est.bpm - bpm).abs();
            worst = worst.max(err);
            if (est.bpm - bpm / 2.0).abs() < SWEEP_TOLERANCE_BPM {
                half_rate += 1;
            }
            ensure(err <= SWEEP_TOLERANCE_BPM, || {
                format!("{bpm} BPM window {}: estimated {:.3}", seg.index(), est.bpm)
            })?;
        }
    }
    let elapsed = t0.elapsed();
    ensure(half_rate == 0, || format!("{half_rate} half-rate picks"))?;
    ensure(elapsed < SWEEP_RUNTIME, || format!("took {elapsed:.2?}"))?;
    Ok(format!(
        "35 rates, {windows} windows, max error {worst:.4} BPM (limit {SWEEP_TOLERANCE_BPM}), 0 half-rate picks, {elapsed:.2?}"
    ))
}

fn sample_mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt())
}

fn distribution_recovery() -> Outcome {
    let mut rng = Lcg::new(2024);
    let raw: Vec<f64> = (0..100).map(|_| rng.normal()).collect();
    let (m, sd) = sample_mean_sd(&raw);
    // standardized so the generator set has exactly the target moments
    let bpms: Vec<f64> = raw.iter().map(|z| PAPER_FHR_MEAN + PAPER_FHR_SD * (z - m) / sd).collect();
    let mut est = Vec::new();
    for (i, &bpm) in bpms.iter().enumerate() {
        let mut p = DopplerParams::new(bpm, 0.05, 500 + i as u64);
        p.phase_s = Lcg::new(i as u64).unit() * 60.0 / bpm;
        let x = DopplerSynth::new(p).map_err(|e| e.to_string())?.next_chunk(WINDOW_LEN);
        let seg = Segment::new(0, x).map_err(|e| e.to_string())?;
        est.push(estimate_fhr(&seg).map_err(|e| format!("fixture {i} ({bpm:.2} BPM): {e}"))?.bpm);
    }
    let (gm, gsd) = sample_mean_sd(&bpms);
    let (rm, rsd) = sample_mean_sd(&est);
    ensure((rm - PAPER_FHR_MEAN).abs() <= RECOVERY_TOLERANCE_BPM, || format!("mean {rm:.3}"))?;
    ensure((rsd - PAPER_FHR_SD).abs() <= RECOVERY_TOLERANCE_BPM, || format!("sd {rsd:.3}"))?;
    Ok(format!(
        "generator {gm:.2} +/- {gsd:.2}, recovered {rm:.3} +/- {rsd:.3} BPM (tolerance {RECOVERY_TOLERANCE_BPM})"
    ))
}

fn quality_gate() -> Outcome {
    let clf = HeuristicClassifier::new(QualityThresholds::default());
    let mut predicted = Vec::new();
    let mut truth = Vec::new();
    for class in QualityClass::ALL {
        for seed in 0..50 {
            let label = classify(&synth_class(class, seed), &clf).map_err(|e| e.to_string())?;
            predicted.push(label.class);
            truth.push(class);
        }
    }
    let report = quality_report(&predicted, &truth).map_err(|e| e.to_string())?;
    println!("{report}");
    let mut worst = (QualityClass::Good, 1.0);
    for class in QualityClass::ALL {
        let acc = report.class_accuracy(class).unwrap_or(0.0);
        if acc < worst.1 {
            worst = (class, acc);
        }
    }
    ensure(worst.1 >= CLASS_ACCURACY_MIN, || format!("{} accuracy {:.2}", worst.0, worst.1))?;
    Ok(format!(
        "{}/{} correct, lowest class {} at {:.2} (min {CLASS_ACCURACY_MIN})",
        report.correct, report.total, worst.0, worst.1
    ))
}

fn analytics_rows(ticks: &[TickReport]) -> Vec<TickRow> {
    ticks
        .iter()
        .map(|t| TickRow {
            processing_ms: 0.0,
            deadline_missed: false,
            ..TickRow::from(t)
        })
        .collect()
}

fn feed_in(x: &[f64], chunk: usize) -> Result<Vec<TickReport>, String> {
    let mut s = started_session();
    let mut out = Vec::new();
    for c in x.chunks(chunk) {
        out.extend(s.feed(c).map_err(|e| e.to_string())?);
    }
    Ok(out)
}

fn tick_law() -> Outcome {
    let x = synth_doppler(140.0, 26.0, 0.05, 7).map_err(|e| e.to_string())?.into_samples();
    let mut counts = Vec::new();
    for n in [14_999usize, 15_000, 19_000, 23_000, 103_000] {
        let want = if n < WINDOW_LEN { 0 } else { (n - 15_000) / 4000 + 1 };
        let got = feed_in(&x[..n], 4000)?.len();
        ensure(got == want, || format!("N={n}: {got} ticks, expected {want}"))?;
        counts.push(format!("{n}->{got}"));
    }
    let stream = &x[..60_000];
    let reference = analytics_rows(&feed_in(stream, 16_000)?);
    for chunk in [1usize, 400] {
        let rows = analytics_rows(&feed_in(stream, chunk)?);
        ensure(rows == reference, || format!("{chunk}-sample feeds differ from 16000"))?;
    }
    Ok(format!("{}; 1/400/16000-sample feeds identical over {} ticks", counts.join(" "), reference.len()))
}

struct Constant(f64);

impl WindowScorer for Constant {
    fn name(&self) -> &str {
        "constant"
    }
    fn score(&self, _: &Segment) -> Result<f64, GaError> {
        Ok(self.0)
    }
}

fn ga_aggregation() -> Outcome {
    let c = 31.337;
    let x = synth_doppler(140.0, 14.75, 0.05, 12).map_err(|e| e.to_string())?.into_samples();
    let mut s = Session::with_models(32_000, Box::new(HeuristicClassifier::new(QualityThresholds::default())), Box::new(Constant(c)), 250.0);
    s.start().map_err(|e| e.to_string())?;
    let ticks = s.feed(&x).map_err(|e| e.to_string())?;
    let good = ticks.iter().filter(|t| t.quality.class == QualityClass::Good).count();
    ensure(good == 12, || format!("{good} Good windows, expected 12"))?;
    let ga = s.stop().ga.ok_or("no GA estimate")?;
    ensure(ga.n_windows_used == MAX_WINDOWS, || format!("{} windows used", ga.n_windows_used))?;
    ensure(ga.weeks == c, || format!("constant scorer gave {} not {c}", ga.weeks))?;

    let mut rng = Lcg::new(77);
    let scores: Vec<f64> = (0..MAX_WINDOWS).map(|_| 10.0 + 35.0 * rng.unit()).collect();
    let base = aggregate(&scores).map_err(|e| e.to_string())?.weeks;
    let mut perm = scores.clone();
    for trial in 0..200 {
        for i in (1..perm.len()).rev() {
            let j = (rng.next_u32() as usize) % (i + 1);
            perm.swap(i, j);
        }
        let w = aggregate(&perm).map_err(|e| e.to_string())?.weeks;
        ensure(w.to_bits() == base.to_bits(), || format!("permutation {trial} gave {w:?} vs {base:?}"))?;
    }
    Ok(format!("12 Good windows -> {} used; constant {c} -> {}; 200 permutations bit-identical", ga.n_windows_used, ga.weeks))
}

fn digits3(v: u32) -> [u32; 3] {
    [v / 100, v / 10 % 10, v % 10]
}

fn bp_round_trip() -> Outcome {
    let t0 = Instant::now();
    let mut rng = Lcg::new(4242);
    let mut pick = |lo: u32, hi: u32| lo + rng.next_u32() % (hi - lo + 1);
    let mut triples = Vec::with_capacity(BP_TRIPLES);
    while triples.len() < BP_TRIPLES {
        let (s, d, p) = (pick(60, 260), pick(30, 160), pick(30, 220));
        if s > d {
            triples.push((s, d, p));
        }
    }
    let det = OtsuDetector;
    let mut clean_wrong = 0;
    let (mut digit_errors, mut digits) = (0usize, 0usize);
    let (mut sys_err, mut dia_err) = (0.0, 0.0);
    for (i, &(s, d, p)) in triples.iter().enumerate() {
        let img = render_lcd(s.into(), d.into(), p.into(), 320, 240).map_err(|e| e.to_string())?;
        match transcribe_bp(&img, &det) {
            Ok(r) if (r.systolic, r.diastolic, r.pulse) == (s, d, p) && r.valid => {}
            _ => clean_wrong += 1,
        }
        let mut noisy = img;
        salt_and_pepper(&mut noisy, BP_NOISE, 9000 + i as u64);
        let got = transcribe_bp(&noisy, &det).ok();
        let (gs, gd, gp) = got.map_or((0, 0, 0), |r| (r.systolic, r.diastolic, r.pulse));
        for (want, have) in [(s, gs), (d, gd), (p, gp)] {
            digits += 3;
            digit_errors += digits3(want).iter().zip(digits3(have)).filter(|(a, b)| **a != *b).count();
        }
        sys_err += f64::from(s.abs_diff(gs));
        dia_err += f64::from(d.abs_diff(gd));
    }
    let elapsed = t0.elapsed();
    let n = BP_TRIPLES as f64;
    let rate = digit_errors as f64 / digits as f64;
    let (sys_mae, dia_mae) = (sys_err / n, dia_err / n);
    ensure(clean_wrong == 0, || format!("{clean_wrong} clean renders misread"))?;
    ensure(rate < BP_DIGIT_ERROR_MAX, || format!("noisy digit error rate {rate:.4}"))?;
    ensure(sys_mae <= BP_MAE_MAX && dia_mae <= BP_MAE_MAX, || format!("MAE {sys_mae:.3}/{dia_mae:.3}"))?;
    ensure(elapsed < BP_RUNTIME, || format!("took {elapsed:.2?}"))?;
    Ok(format!(
        "{BP_TRIPLES} clean exact; 5% noise: digit errors {digit_errors}/{digits}, MAE {sys_mae:.3}/{dia_mae:.3} mmHg, {elapsed:.2?}"
    ))
}

fn latency_budget() -> Outcome {
    let x = synth_doppler(140.0, 60.0, 0.05, 1).map_err(|e| e.to_string())?.into_samples();
    let ticks = feed_in(&x, 400)?;
    let mut ms: Vec<f64> = ticks.iter().map(|t| t.processing_ms).collect();
    ms.sort_by(f64::total_cmp);
    let p99 = ms[((ms.len() as f64 * 0.99).ceil() as usize).saturating_sub(1)];
    let mut fhr_max = 0.0f64;
    for seg in windows_of(&x) {
        let t0 = Instant::now();
        let _ = estimate_fhr(&seg);
        fhr_max = fhr_max.max(t0.elapsed().as_secs_f64() * 1e3);
    }
    ensure(p99 < TICK_P99_MAX_MS, || format!("p99 tick {p99:.2} ms"))?;
    ensure(fhr_max < FHR_COST_MAX_MS, || format!("FHR cost {fhr_max:.2} ms"))?;
    Ok(format!(
        "{} ticks, p99 {p99:.3} ms (limit {TICK_P99_MAX_MS}), max FHR {fhr_max:.3} ms (limit {FHR_COST_MAX_MS})",
        ticks.len()
    ))
}

fn ring_oracle(history: &[f64], cap: usize, start: u64, len: usize) -> Result<Vec<f64>, PopError> {
    let written = history.len() as u64;
    let end = start + len as u64;
    if end > written {
        return Err(PopError::NotReady { written, needed: end });
    }
    let oldest = written.saturating_sub(cap as u64);
    if start < oldest {
        return Err(PopError::DataLost { start, oldest });
    }
    Ok(history[start as usize..end as usize].to_vec())
}

fn ring_properties() -> Outcome {
    let mut rng = Lcg::new(31337);
    let mut reads = 0;
    for schedule in 0..RING_SCHEDULES {
        let cap = 1 + rng.next_u32() as usize % 512;
        let mut ring = RingBuffer::new(cap);
        let (mut tx, rx) = spsc::channel(cap);
        let mut history: Vec<f64> = Vec::new();
        for _ in 0..1 + rng.next_u32() % 60 {
            if rng.next_u32() % 2 == 0 {
                let n = rng.next_u32() as usize % (2 * cap + 2);
                let chunk: Vec<f64> = (0..n).map(|_| rng.uniform()).collect();
                ring.write(&chunk);
                tx.write(&chunk);
                history.extend(chunk);
            } else {
                let back = rng.next_u32() as u64 % (2 * cap as u64 + 2);
                let start = (history.len() as u64).saturating_sub(back);
                let len = rng.next_u32() as usize % (cap + 2);
                let want = ring_oracle(&history, cap, start, len);
                reads += 1;
                ensure(ring.read_range(start, len) == want, || format!("schedule {schedule}: ring read differs"))?;
                ensure(rx.read_range(start, len) == want, || format!("schedule {schedule}: spsc read differs"))?;
            }
            let keep = history.len().saturating_sub(cap);
            ensure(ring.contents() == history[keep..], || format!("schedule {schedule}: contents differ"))?;
        }
    }
    Ok(format!("{RING_SCHEDULES} schedules, {reads} reads, ring and spsc match the flat list"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("determinism_parity", determinism_parity),
        ("fhr_accuracy_sweep", fhr_sweep),
        ("distribution_recovery", distribution_recovery),
        ("quality_gate", quality_gate),
        ("tick_law", tick_law),
        ("ga_aggregation", ga_aggregation),
        ("bp_round_trip", bp_round_trip),
        ("latency_budget", latency_budget),
        ("ring_buffer_properties", ring_properties),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let t0 = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        match outcome {
            Ok(detail) => println!("PASS {name}: {detail} [{:.2?}]", t0.elapsed()),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why} [{:.2?}]", t0.elapsed());
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
