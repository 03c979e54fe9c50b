use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use pulsepipe::bp::render_lcd;
use pulsepipe::config::detector_by_name;
use pulsepipe::io::{compare_runs, load_pgm, read_session, save_wav, write_pgm, IoError};
use pulsepipe::synth::{salt_and_pepper, synth_class, synth_doppler_with};
use pulsepipe::{transcribe_bp, PipelineConfig, QualityClass, SampleStream, RATE_HZ};

mod run;

use run::SynthSpec;

/// Exit codes.
const EXIT_INPUT: u8 = 2;
const EXIT_NETWORK: u8 = 3;
const EXIT_INVALID: u8 = 4;
const EXIT_COMPARE: u8 = 5;

#[derive(Debug)]
pub struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl ToString) -> Self {
        Failure {
            code: EXIT_INPUT,
            message: message.to_string(),
        }
    }

    fn network(message: impl ToString) -> Self {
        Failure {
            code: EXIT_NETWORK,
            message: message.to_string(),
        }
    }
}

type CliResult = Result<u8, Failure>;

#[derive(Parser)]
#[command(name = "pulsepipe", version, about = "Doppler FHR/GA screening and BP transcription")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stream audio through the pipeline and write a session log.
    Run(run::RunArgs),
    /// Read systolic/diastolic/pulse off a BP monitor photo (PGM).
    TranscribeBp {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value = pulsepipe::bp::OTSU_DETECTOR_NAME)]
        detector: String,
    },
    /// Compare one numeric field across two session logs.
    Compare {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value = "fhr_bpm")]
        field: String,
    },
    /// Write a synthetic fixture file.
    #[command(subcommand)]
    Synth(SynthCommand),
}

#[derive(Subcommand)]
enum SynthCommand {
    /// Doppler recording as 16-bit WAV, e.g. "bpm=140,dur=60,noise=0.05,seed=1".
    Doppler {
        spec: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// One 3.75 s window of a quality class as 16-bit WAV.
    Class {
        class: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// BP monitor display as PGM. Leave out the pulse for a two-row display.
    Lcd {
        systolic: i64,
        diastolic: i64,
        pulse: Option<i64>,
        #[arg(long, default_value_t = 320)]
        width: usize,
        #[arg(long, default_value_t = 240)]
        height: usize,
        /// Fraction of pixels replaced by salt-and-pepper noise.
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn print_json<T: serde::Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).expect("output serializes"));
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig, Failure> {
    match path {
        Some(p) => PipelineConfig::load(p).map_err(|e| Failure::input(format!("{}: {e}", p.display()))),
        None => Ok(PipelineConfig::default()),
    }
}

fn transcribe(image: &Path, detector: &str) -> CliResult {
    let detector = detector_by_name(detector).map_err(Failure::input)?;
    let img = load_pgm(image).map_err(|e| Failure::input(format!("{}: {e}", image.display())))?;
    match transcribe_bp(&img, detector.as_ref()) {
        Ok(reading) => {
            print_json(&reading);
            Ok(if reading.valid { 0 } else { EXIT_INVALID })
        }
        Err(e) => {
            print_json(&serde_json::json!({ "valid": false, "reason": e.reason() }));
            eprintln!("pulsepipe: {e}");
            Ok(EXIT_INVALID)
        }
    }
}

fn read_log(path: &Path) -> Result<pulsepipe::io::SessionLog, Failure> {
    let f = std::fs::File::open(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    read_session(std::io::BufReader::new(f)).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

fn compare(a: &Path, b: &Path, field: &str) -> CliResult {
    let (la, lb) = (read_log(a)?, read_log(b)?);
    if la.header.config_sha256 != lb.header.config_sha256 {
        log::warn!("logs were produced with different configs");
    }
    match compare_runs(&la, &lb, field) {
        Ok(report) => {
            print_json(&report);
            Ok(0)
        }
        Err(e @ (IoError::NoOverlap | IoError::FieldMissing(_))) => Err(Failure {
            code: EXIT_COMPARE,
            message: e.to_string(),
        }),
        Err(e) => Err(Failure::input(e)),
    }
}

fn write_audio(out: &Path, stream: &SampleStream) -> CliResult {
    save_wav(out, stream).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
    Ok(0)
}

fn synth(cmd: SynthCommand) -> CliResult {
    match cmd {
        SynthCommand::Doppler { spec, out } => {
            let spec: SynthSpec = spec.parse().map_err(Failure::input)?;
            let stream = synth_doppler_with(spec.params, spec.duration_s).map_err(Failure::input)?;
            write_audio(&out, &stream)
        }
        SynthCommand::Class { class, seed, out } => {
            let class: QualityClass = class.parse().map_err(Failure::input)?;
            let seg = synth_class(class, seed);
            let stream = SampleStream::new(RATE_HZ, seg.samples().to_vec()).map_err(Failure::input)?;
            write_audio(&out, &stream)
        }
        SynthCommand::Lcd {
            systolic,
            diastolic,
            pulse,
            width,
            height,
            noise,
            seed,
            out,
        } => {
            let mut img = match pulse {
                Some(p) => render_lcd(systolic, diastolic, p, width, height),
                None => pulsepipe::bp::render_lcd_rows(&[systolic, diastolic], width, height),
            }
            .map_err(Failure::input)?;
            if !(0.0..=1.0).contains(&noise) {
                return Err(Failure::input(format!("noise fraction {noise} outside [0, 1]")));
            }
            if noise > 0.0 {
                salt_and_pepper(&mut img, noise, seed);
            }
            write_pgm(&out, &img).map_err(|e| Failure::input(format!("{}: {e}", out.display())))?;
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run::run(args),
        Command::TranscribeBp { image, detector } => transcribe(&image, &detector),
        Command::Compare { a, b, field } => compare(&a, &b, &field),
        Command::Synth(cmd) => synth(cmd),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("pulsepipe: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
