use std::io::{Read, Seek, Write};
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::IoError;
use crate::dsp::{SampleStream, PCM16_FULL_SCALE};

fn map_hound(e: hound::Error) -> IoError {
    match e {
        // hound reports short reads as `Other`
        hound::Error::IoError(e)
            if matches!(e.kind(), std::io::ErrorKind::UnexpectedEof | std::io::ErrorKind::Other) =>
        {
            IoError::CorruptHeader(format!("unexpected end of file ({e})"))
        }
        hound::Error::IoError(e) => IoError::Io(e),
        hound::Error::FormatError(msg) => IoError::CorruptHeader(msg.into()),
        hound::Error::Unsupported => IoError::UnsupportedFormat("unsupported WAVE encoding".into()),
        other => IoError::CorruptHeader(other.to_string()),
    }
}

/// Reads mono 16-bit PCM at whatever rate the header declares.
pub fn read_wav<R: Read>(reader: R) -> Result<SampleStream, IoError> {
    let r = WavReader::new(reader).map_err(map_hound)?;
    let spec = r.spec();
    if spec.sample_format != SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(IoError::UnsupportedFormat(format!(
            "{:?} {}-bit samples, need 16-bit PCM",
            spec.sample_format, spec.bits_per_sample
        )));
    }
    if spec.channels != 1 {
        return Err(IoError::UnsupportedFormat(format!(
            "{} channels, need mono",
            spec.channels
        )));
    }
    let pcm = r
        .into_samples::<i16>()
        .collect::<Result<Vec<_>, _>>()
        .map_err(map_hound)?;
    Ok(SampleStream::from_pcm16(spec.sample_rate, &pcm)?)
}

pub fn load_wav(path: impl AsRef<Path>) -> Result<SampleStream, IoError> {
    let file = std::fs::File::open(path)?;
    read_wav(std::io::BufReader::new(file))
}

fn to_pcm16(x: f64) -> i16 {
    (x * PCM16_FULL_SCALE).round().clamp(-32768.0, 32767.0) as i16
}

/// Writes `stream` as mono 16-bit PCM. Amplitude 1.0 saturates to 32767.
pub fn write_wav<W: Write + Seek>(writer: W, stream: &SampleStream) -> Result<(), IoError> {
    let spec = WavSpec {
        channels: 1,
        sample_rate: stream.rate_hz(),
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut w = WavWriter::new(writer, spec).map_err(map_hound)?;
    {
        let mut iw = w.get_i16_writer(stream.len() as u32);
        for &x in stream.samples() {
            iw.write_sample(to_pcm16(x));
        }
        iw.flush().map_err(map_hound)?;
    }
    w.finalize().map_err(map_hound)
}

pub fn save_wav(path: impl AsRef<Path>, stream: &SampleStream) -> Result<(), IoError> {
    let file = std::fs::File::create(path)?;
    write_wav(std::io::BufWriter::new(file), stream)
}
