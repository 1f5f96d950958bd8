//! Scenario configuration: a TOML document with one table per subsystem.
//! Every field is optional; omitted fields take the reference numerology at
//! the selected scale.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::signal::SPEED_OF_LIGHT as C;
use crate::codec::CodecSpec;
use crate::error::{Error, Result};
use crate::eval::{PathLossModel, Scenario};
use crate::frame::{ChirpSpec, FrameSpec, OfdmSpec};
use crate::radar::{RadarParams, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 64 chirps, 8 OFDM symbols.
    #[default]
    Desk,
    /// 2 ms frame: 833 chirps and as many OFDM symbols as fit.
    Full,
}

impl std::str::FromStr for Scale {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "desk" => Ok(Scale::Desk),
            "full" => Ok(Scale::Full),
            _ => Err(format!("unknown scale '{s}' (expected desk or full)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadioConfig {
    pub carrier_hz: f64,
    pub bandwidth_hz: f64,
    pub sample_rate_hz: f64,
    pub chirp_duration_s: f64,
    pub fmcw_power: f64,
    pub n_chirps: Option<usize>,
    pub frame_duration_s: Option<f64>,
}

impl Default for RadioConfig {
    fn default() -> Self {
        Self {
            carrier_hz: 28e9,
            bandwidth_hz: 100e6,
            sample_rate_hz: 122.88e6,
            chirp_duration_s: 2.4e-6,
            fmcw_power: 1.0,
            n_chirps: None,
            frame_duration_s: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OfdmConfig {
    pub n_fft: usize,
    pub subcarrier_spacing_hz: f64,
    pub n_cp: usize,
    pub n_allocated: usize,
    pub n_symbols: Option<usize>,
    pub power: f64,
    pub qam_order: usize,
}

impl Default for OfdmConfig {
    fn default() -> Self {
        Self {
            n_fft: 2048,
            subcarrier_spacing_hz: 60e3,
            n_cp: 144,
            n_allocated: 1666,
            n_symbols: None,
            power: 1.0,
            qam_order: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub ranges_m: Vec<f64>,
    pub velocities_mps: Vec<f64>,
    pub pdp_decay: f64,
    pub physical_path_loss: bool,
    pub path_loss_exponent: f64,
    pub antenna_gain_tx: f64,
    pub antenna_gain_rx: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self {
            ranges_m: vec![15.0, 90.0, 180.0],
            velocities_mps: vec![0.0, 22.0, -33.0],
            pdp_decay: 1.0,
            physical_path_loss: false,
            path_loss_exponent: 2.0,
            antenna_gain_tx: 1.0,
            antenna_gain_rx: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RadarConfig {
    pub threshold_db: f64,
    /// Defaults to the number of configured targets.
    pub max_targets: Option<usize>,
    /// First row of the LS regression; defaults to the CP length.
    pub ls_offset: Option<usize>,
    pub window: Window,
    pub refine_doppler: bool,
}

impl Default for RadarConfig {
    fn default() -> Self {
        Self {
            threshold_db: 12.0,
            max_targets: None,
            ls_offset: None,
            window: Window::Hann,
            refine_doppler: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CodecConfig {
    pub constraint_length: usize,
    pub generators: Vec<u32>,
    pub interleaver_rows: Option<usize>,
    pub interleaver_cols: Option<usize>,
}

impl Default for CodecConfig {
    fn default() -> Self {
        Self {
            constraint_length: 7,
            generators: vec![0o171, 0o133],
            interleaver_rows: None,
            interleaver_cols: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scale: Scale,
    /// Operating point of single-frame commands.
    pub snr_db: f64,
    pub snr_grid: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub output_dir: PathBuf,
    /// Worker threads; defaults to the available cores.
    pub jobs: Option<usize>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            scale: Scale::Desk,
            snr_db: 20.0,
            snr_grid: (0..=10).map(|i| i as f64 * 2.0).collect(),
            trials: 50,
            seed: 1,
            output_dir: PathBuf::from("out"),
            jobs: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub radio: RadioConfig,
    pub ofdm: OfdmConfig,
    pub targets: TargetConfig,
    pub radar: RadarConfig,
    pub codec: CodecConfig,
    pub sim: SimConfig,
}

/// Read a config file; `None` yields the defaults.
pub fn parse_config(path: Option<&Path>) -> Result<ScenarioConfig> {
    match path {
        None => Ok(ScenarioConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
            ScenarioConfig::from_toml(&text)
                .map_err(|e| Error::config(format!("{}: {e}", p.display())))
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(e.message().to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }

    fn chirp(&self) -> ChirpSpec {
        ChirpSpec {
            bandwidth_hz: self.radio.bandwidth_hz,
            duration_s: self.radio.chirp_duration_s,
            sample_rate_hz: self.radio.sample_rate_hz,
            power: self.radio.fmcw_power,
        }
    }

    /// Copy with every scale-dependent default made explicit.
    pub fn resolved(&self) -> Result<ScenarioConfig> {
        let mut c = self.clone();
        let chirp = c.chirp();
        chirp.validate()?;
        let tau_eff = chirp.effective_duration_s();
        let n_chirps = match (c.radio.n_chirps, c.sim.scale) {
            (Some(k), _) => k,
            (None, Scale::Desk) => 64,
            (None, Scale::Full) => {
                let t = c.radio.frame_duration_s.unwrap_or(2e-3);
                (t / tau_eff).floor() as usize
            }
        };
        c.radio.n_chirps = Some(n_chirps);
        let frame_duration = match (c.radio.frame_duration_s, c.sim.scale) {
            (Some(t), _) => t,
            (None, Scale::Desk) => n_chirps as f64 * tau_eff,
            (None, Scale::Full) => 2e-3,
        };
        c.radio.frame_duration_s = Some(frame_duration);
        if c.ofdm.n_symbols.is_none() {
            let symbol = c.ofdm.n_fft + c.ofdm.n_cp;
            let frame_len = (frame_duration * c.radio.sample_rate_hz).round() as usize;
            let fit = frame_len.saturating_sub(chirp.n_samples()) / symbol.max(1);
            c.ofdm.n_symbols = Some(match c.sim.scale {
                Scale::Desk => fit.min(8),
                Scale::Full => fit,
            });
        }
        c.radar.max_targets.get_or_insert(c.targets.ranges_m.len());
        c.radar.ls_offset.get_or_insert(c.ofdm.n_cp);
        if c.codec.interleaver_rows.is_none() || c.codec.interleaver_cols.is_none() {
            let bits = c.ofdm.n_allocated * c.ofdm.qam_order.max(1).trailing_zeros() as usize;
            let std = CodecSpec::standard(bits);
            c.codec.interleaver_rows.get_or_insert(std.interleaver_rows);
            c.codec.interleaver_cols.get_or_insert(std.interleaver_cols);
        }
        Ok(c)
    }

    /// Validated simulation scenario.
    pub fn scenario(&self) -> Result<Scenario> {
        let c = self.resolved()?;
        let fs = c.radio.sample_rate_hz;
        let frame = FrameSpec {
            chirp: c.chirp(),
            ofdm: OfdmSpec {
                n_fft: c.ofdm.n_fft,
                subcarrier_spacing_hz: c.ofdm.subcarrier_spacing_hz,
                n_cp: c.ofdm.n_cp,
                n_allocated: c.ofdm.n_allocated,
                n_symbols: c.ofdm.n_symbols.unwrap_or(0),
                power: c.ofdm.power,
                qam_order: c.ofdm.qam_order,
            },
            n_chirps: c.radio.n_chirps.unwrap_or(0),
            total_duration_s: c.radio.frame_duration_s.unwrap_or(0.0),
        };
        frame.validate()?;
        if !(c.radio.carrier_hz > 0.0) {
            return Err(Error::config("carrier frequency must be positive"));
        }
        let t = &c.targets;
        if t.ranges_m.len() != t.velocities_mps.len() {
            return Err(Error::config(format!(
                "{} target ranges but {} velocities",
                t.ranges_m.len(),
                t.velocities_mps.len()
            )));
        }
        if !(t.pdp_decay >= 0.0) {
            return Err(Error::config("PDP decay must be non-negative"));
        }
        let cp_us = c.ofdm.n_cp as f64 / fs * 1e6;
        let mut bins = Vec::new();
        for (i, &r) in t.ranges_m.iter().enumerate() {
            if !(r >= 0.0 && r.is_finite()) {
                return Err(Error::config(format!("target {} range {r} m is invalid", i + 1)));
            }
            let delay = r / C;
            let l = (delay * fs).round() as usize;
            if l >= c.ofdm.n_cp {
                return Err(Error::config(format!(
                    "target {} delay {:.3} µs ({l} samples) is not shorter than the CP {:.3} µs ({} samples)",
                    i + 1,
                    delay * 1e6,
                    cp_us,
                    c.ofdm.n_cp
                )));
            }
            if bins.contains(&l) {
                return Err(Error::config(format!(
                    "target {} falls in the same delay sample ({l}) as an earlier target",
                    i + 1
                )));
            }
            bins.push(l);
        }
        let ls_offset = c.radar.ls_offset.unwrap_or(c.ofdm.n_cp);
        let max_bin = bins.iter().copied().max().unwrap_or(0);
        if ls_offset < max_bin || ls_offset >= frame.chirp_len() {
            return Err(Error::config(format!(
                "LS offset {ls_offset} must lie in [{max_bin}, {}) to cover every target delay",
                frame.chirp_len()
            )));
        }
        if !(c.radar.threshold_db >= 0.0) {
            return Err(Error::config("detection threshold must be >= 0 dB"));
        }
        let codec = CodecSpec {
            constraint_length: c.codec.constraint_length,
            generators: c.codec.generators.clone(),
            interleaver_rows: c.codec.interleaver_rows.unwrap_or(0),
            interleaver_cols: c.codec.interleaver_cols.unwrap_or(0),
            zero_tail: true,
        };
        let scenario = Scenario {
            frame,
            carrier_hz: c.radio.carrier_hz,
            ranges_m: t.ranges_m.clone(),
            velocities_mps: t.velocities_mps.clone(),
            pdp_decay: t.pdp_decay,
            physical_path_loss: t.physical_path_loss.then_some(PathLossModel {
                exponent: t.path_loss_exponent,
                gain_tx: t.antenna_gain_tx,
                gain_rx: t.antenna_gain_rx,
            }),
            radar: RadarParams {
                threshold_db: c.radar.threshold_db,
                max_targets: c.radar.max_targets.unwrap_or(t.ranges_m.len()),
                ls_offset,
                window: c.radar.window,
                refine_doppler: c.radar.refine_doppler,
            },
            codec,
        };
        scenario.validate()?;
        Ok(scenario)
    }
}
