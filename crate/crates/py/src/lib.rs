//! Python module `pulsepipe`: the analysis functions and a streaming
//! `Session`, with plain lists, tuples and dicts on the Python side.

use std::io::BufReader;

use pulsepipe::bp::{render_lcd as render, OtsuDetector};
use pulsepipe::io::{compare_runs, read_session, TickRow};
use pulsepipe::quality::{extract_features, HeuristicClassifier, QualityThresholds};
use pulsepipe::{fhr, ga, io, synth, GrayImage, PipelineConfig, QualityClass, Segment, RATE_HZ};
use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py>(py: Python<'py>, v: &Value) -> PyResult<Bound<'py, PyAny>> {
    Ok(match v {
        Value::Null => py.None().into_bound(py),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any(),
        Value::Number(n) => match (n.as_i64(), n.as_f64()) {
            (Some(i), _) => i.into_pyobject(py)?.into_any(),
            (None, Some(f)) => f.into_pyobject(py)?.into_any(),
            _ => py.None().into_bound(py),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any()
        }
    })
}

fn serde_to_py<'py, T: serde::Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &serde_json::to_value(v).map_err(value_err)?)
}

fn segment(samples: Vec<f64>) -> PyResult<Segment> {
    Segment::new(0, samples).map_err(value_err)
}

/// FHR of one 15000-sample window: `(bpm, rho, lag_samples)`.
#[pyfunction]
fn estimate_fhr(samples: Vec<f64>) -> PyResult<(f64, f64, f64)> {
    let est = fhr::estimate_fhr(&segment(samples)?).map_err(value_err)?;
    Ok((est.bpm, est.rho, est.lag_samples))
}

/// Quality class name and the five class scores (Good, Poor, Interference,
/// Talking, Silent).
#[pyfunction]
fn classify(samples: Vec<f64>) -> PyResult<(String, Vec<f64>)> {
    let clf = HeuristicClassifier::new(QualityThresholds::default());
    let label = pulsepipe::classify(&segment(samples)?, &clf).map_err(value_err)?;
    Ok((label.class.as_str().to_string(), label.scores.to_vec()))
}

#[pyfunction]
fn quality_features<'py>(py: Python<'py>, samples: Vec<f64>) -> PyResult<Bound<'py, PyAny>> {
    serde_to_py(py, &extract_features(&segment(samples)?))
}

/// Gestational age from per-window scores: `(weeks, n_windows_used)`.
#[pyfunction]
fn aggregate_ga(scores: Vec<f64>) -> PyResult<(f64, usize)> {
    let est = ga::aggregate(&scores).map_err(value_err)?;
    Ok((est.weeks, est.n_windows_used))
}

#[pyfunction]
#[pyo3(signature = (bpm, duration_s, noise_level=0.05, seed=1))]
fn synth_doppler(bpm: f64, duration_s: f64, noise_level: f64, seed: u64) -> PyResult<Vec<f64>> {
    Ok(synth::synth_doppler(bpm, duration_s, noise_level, seed)
        .map_err(value_err)?
        .into_samples())
}

/// One window of a quality-class fixture.
#[pyfunction]
#[pyo3(signature = (class_name, seed=1))]
fn synth_class(class_name: &str, seed: u64) -> PyResult<Vec<f64>> {
    let class: QualityClass = class_name.parse().map_err(value_err)?;
    Ok(synth::synth_class(class, seed).samples().to_vec())
}

/// BP monitor display: `(width, height, pixels)` with row-major bytes.
#[pyfunction]
#[pyo3(signature = (systolic, diastolic, pulse, width=320, height=240))]
fn render_lcd(systolic: i64, diastolic: i64, pulse: i64, width: usize, height: usize) -> PyResult<(usize, usize, Vec<u8>)> {
    let img = render(systolic, diastolic, pulse, width, height).map_err(value_err)?;
    Ok((img.width(), img.height(), img.into_pixels()))
}

/// Reads a BP display. Returns the reading as a dict; undecodable images
/// raise `ValueError` carrying the reason code.
#[pyfunction]
fn transcribe_bp<'py>(py: Python<'py>, width: usize, height: usize, pixels: Vec<u8>) -> PyResult<Bound<'py, PyAny>> {
    let img = GrayImage::new(width, height, pixels).map_err(value_err)?;
    match pulsepipe::transcribe_bp(&img, &OtsuDetector) {
        Ok(r) => serde_to_py(py, &r),
        Err(e) => Err(PyValueError::new_err(e.reason())),
    }
}

/// `(rate_hz, samples)` of a 16-bit PCM mono WAV file.
#[pyfunction]
fn load_wav(path: &str) -> PyResult<(u32, Vec<f64>)> {
    let s = io::load_wav(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok((s.rate_hz(), s.into_samples()))
}

fn open_log(path: &str) -> PyResult<io::SessionLog> {
    let f = std::fs::File::open(path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    read_session(BufReader::new(f)).map_err(|e| PyIOError::new_err(e.to_string()))
}

/// Parity between two session logs on one field.
#[pyfunction]
#[pyo3(signature = (a, b, field="fhr_bpm"))]
fn compare_logs<'py>(py: Python<'py>, a: &str, b: &str, field: &str) -> PyResult<Bound<'py, PyAny>> {
    let report = compare_runs(&open_log(a)?, &open_log(b)?, field).map_err(value_err)?;
    serde_to_py(py, &report)
}

/// Streaming session; `feed` returns the ticks a chunk completed as dicts
/// with the session-log row keys.
#[pyclass]
struct Session {
    inner: pulsepipe::Session,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (config_json=None))]
    fn new(config_json: Option<&str>) -> PyResult<Self> {
        let config = match config_json {
            Some(text) => PipelineConfig::from_json(text).map_err(value_err)?,
            None => PipelineConfig::default(),
        };
        let mut inner = pulsepipe::Session::new(&config).map_err(value_err)?;
        inner.start().map_err(value_err)?;
        Ok(Session { inner })
    }

    fn feed<'py>(&mut self, py: Python<'py>, samples: Vec<f64>) -> PyResult<Bound<'py, PyList>> {
        let ticks = self.inner.feed(&samples).map_err(value_err)?;
        let list = PyList::empty(py);
        for t in &ticks {
            list.append(serde_to_py(py, &TickRow::from(t))?)?;
        }
        Ok(list)
    }

    #[pyo3(signature = (note=None))]
    fn mark_reposition(&mut self, note: Option<String>) -> PyResult<f64> {
        Ok(self.inner.mark_reposition(note).map_err(value_err)?.t_s)
    }

    fn stop<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        serde_to_py(py, &self.inner.stop())
    }

    #[getter]
    fn stream_time_s(&self) -> f64 {
        self.inner.stream_time_s()
    }

    #[getter]
    fn ticks(&self) -> u64 {
        self.inner.ticks_emitted()
    }
}

#[pymodule]
#[pyo3(name = "pulsepipe")]
pub fn pulsepipe_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("RATE_HZ", RATE_HZ)?;
    m.add("WINDOW_LEN", pulsepipe::WINDOW_LEN)?;
    m.add("SCHEMA", pulsepipe::SCHEMA)?;
    m.add_function(wrap_pyfunction!(estimate_fhr, m)?)?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(quality_features, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate_ga, m)?)?;
    m.add_function(wrap_pyfunction!(synth_doppler, m)?)?;
    m.add_function(wrap_pyfunction!(synth_class, m)?)?;
    m.add_function(wrap_pyfunction!(render_lcd, m)?)?;
    m.add_function(wrap_pyfunction!(transcribe_bp, m)?)?;
    m.add_function(wrap_pyfunction!(load_wav, m)?)?;
    m.add_function(wrap_pyfunction!(compare_logs, m)?)?;
    m.add_class::<Session>()?;
    Ok(())
}
