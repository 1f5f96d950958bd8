//! Python bindings: scenario construction, single trials, sweeps and the
//! building blocks of the transmit/receive chain.

use jrc_core::codec::{self, CodecSpec};
use jrc_core::config::{Scale, ScenarioConfig};
use jrc_core::eval::{self, trial_seed};
use jrc_core::{frame, qam, Cf64, Error};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: Error) -> PyErr {
    match e {
        Error::Config(_) | Error::Argument(_) => PyValueError::new_err(e.to_string()),
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Estimation(_) => PyRuntimeError::new_err(e.to_string()),
    }
}

/// A validated simulation scenario.
#[pyclass(name = "Scenario", module = "jrc_sim", frozen)]
struct PyScenario {
    config: ScenarioConfig,
    inner: eval::Scenario,
}

#[pymethods]
impl PyScenario {
    /// Build from TOML text (empty for the defaults), optionally forcing a scale.
    #[new]
    #[pyo3(signature = (toml = "", scale = None))]
    fn new(toml: &str, scale: Option<&str>) -> PyResult<Self> {
        let mut config = ScenarioConfig::from_toml(toml).map_err(to_py)?;
        if let Some(s) = scale {
            config.sim.scale = s.parse::<Scale>().map_err(PyValueError::new_err)?;
        }
        let config = config.resolved().map_err(to_py)?;
        let inner = config.scenario().map_err(to_py)?;
        Ok(Self { config, inner })
    }

    /// Fully resolved configuration as TOML.
    fn config_toml(&self) -> String {
        self.config.to_toml()
    }

    #[getter]
    fn n_chirps(&self) -> usize {
        self.inner.frame.n_chirps
    }

    #[getter]
    fn n_symbols(&self) -> usize {
        self.inner.frame.ofdm.n_symbols
    }

    #[getter]
    fn frame_len(&self) -> usize {
        self.inner.frame.frame_len()
    }

    #[getter]
    fn sample_rate_hz(&self) -> f64 {
        self.inner.frame.sample_rate_hz()
    }

    #[getter]
    fn info_bits_per_frame(&self) -> usize {
        self.inner.info_bits_per_frame()
    }

    /// One Monte-Carlo trial; returns a dict of metrics.
    fn run_trial<'py>(&self, py: Python<'py>, snr_db: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let t = py
            .detach(|| eval::run_trial(&self.inner, snr_db, seed))
            .map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("seed", t.seed)?;
        d.set_item("snr_db", t.snr_db)?;
        d.set_item("mse_h", t.mse_h)?;
        d.set_item("ber", t.ber)?;
        d.set_item("perfect_csi_ber", t.perfect_csi_ber)?;
        d.set_item("n_bits", t.n_bits)?;
        d.set_item("bit_errors", t.bit_errors)?;
        d.set_item("perfect_bit_errors", t.perfect_bit_errors)?;
        d.set_item("detection_failure", t.detection_failure)?;
        d.set_item("targets_resolved", t.targets_resolved)?;
        d.set_item("mean_ici_ratio", t.mean_ici_ratio)?;
        let det: Vec<(usize, i64, f64, f64, Cf64)> = t
            .detections
            .iter()
            .map(|e| (e.delay_bin, e.doppler_bin, e.distance_m(), e.doppler_refined_hz, e.gain_hat))
            .collect();
        d.set_item("detections", det)?;
        Ok(d)
    }

    /// Sweep CSV text for an SNR grid.
    #[pyo3(signature = (snr_grid, trials, seed = 1))]
    fn sweep_csv(&self, py: Python<'_>, snr_grid: Vec<f64>, trials: usize, seed: u64) -> PyResult<String> {
        let snapshot = self.config.to_toml();
        let res = py
            .detach(|| eval::run_sweep(&self.inner, &snr_grid, trials, seed, snapshot))
            .map_err(to_py)?;
        Ok(res.to_csv())
    }

    /// Range-Doppler power map (rows = range bins, columns = Doppler bins
    /// from -K/2) and detections `(delay_bin, doppler_bin, range_m, doppler_hz)`.
    #[pyo3(signature = (snr_db, seed = 1))]
    #[allow(clippy::type_complexity)]
    fn radar_map(
        &self,
        py: Python<'_>,
        snr_db: f64,
        seed: u64,
    ) -> PyResult<(Vec<Vec<f64>>, Vec<(usize, i64, f64, f64)>)> {
        let run = py
            .detach(|| eval::simulate_frame(&self.inner, snr_db, trial_seed(seed, 0)))
            .map_err(to_py)?;
        let map = &run.radar.map;
        let rows = (0..map.n_range)
            .map(|r| (0..map.n_doppler).map(|c| map.power(r, c)).collect())
            .collect();
        let det = run
            .radar
            .estimates
            .iter()
            .map(|e| (e.delay_bin, e.doppler_bin, e.distance_m(), e.doppler_refined_hz))
            .collect();
        Ok((rows, det))
    }
}

/// Reference-parameter chirp samples (`[radio]` overrides via TOML).
#[pyfunction]
#[pyo3(signature = (toml = ""))]
fn chirp(toml: &str) -> PyResult<Vec<Cf64>> {
    let s = ScenarioConfig::from_toml(toml).and_then(|c| c.scenario()).map_err(to_py)?;
    Ok(frame::synth_chirp(&s.frame.chirp).map_err(to_py)?.samples)
}

/// Gray-mapped QAM symbols with unit average energy.
#[pyfunction]
fn map_qam(bits: Vec<u8>, order: usize) -> PyResult<Vec<Cf64>> {
    qam::map_qam(&bits, order).map_err(to_py)
}

/// Encode and interleave one block for a codeword of `coded_len` bits.
#[pyfunction]
#[pyo3(signature = (bits, coded_len = 3332))]
fn encode(bits: Vec<u8>, coded_len: usize) -> PyResult<Vec<u32>> {
    let coded = codec::encode(&bits, &CodecSpec::standard(coded_len)).map_err(to_py)?;
    // Vec<u8> would come back as `bytes`
    Ok(coded.into_iter().map(u32::from).collect())
}

/// Soft Viterbi decode of one interleaved block; positive LLR favours 0.
#[pyfunction]
fn decode(llrs: Vec<f64>) -> PyResult<Vec<u32>> {
    let spec = CodecSpec::standard(llrs.len());
    let out = codec::decode(&llrs, &spec).map_err(to_py)?;
    Ok(out.bits.into_iter().map(u32::from).collect())
}

#[pymodule]
fn jrc_sim(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_function(wrap_pyfunction!(chirp, m)?)?;
    m.add_function(wrap_pyfunction!(map_qam, m)?)?;
    m.add_function(wrap_pyfunction!(encode, m)?)?;
    m.add_function(wrap_pyfunction!(decode, m)?)?;
    Ok(())
}
