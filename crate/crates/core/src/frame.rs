//! Transmit frame synthesis: an FMCW chirp train with a CP-OFDM symbol
//! stream superimposed on every chirp except the first.
//!
//! ```text
//!  sample 0        N_chirp                                    K*N_chirp
//!  | chirp 0       | chirp 1       | chirp 2  ...              |
//!  |               | CP|  OFDM 0   | CP|  OFDM 1   | ...       |
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::signal::{Cf64, ComplexFrame, UnitaryDft};

/// One linear up-chirp of `bandwidth_hz` over `duration_s`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChirpSpec {
    pub bandwidth_hz: f64,
    pub duration_s: f64,
    pub sample_rate_hz: f64,
    pub power: f64,
}

impl ChirpSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_hz > 0.0 && self.bandwidth_hz.is_finite()) {
            return Err(Error::config("chirp bandwidth must be positive"));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::config("chirp duration must be positive"));
        }
        if !(self.sample_rate_hz > 0.0 && self.sample_rate_hz.is_finite()) {
            return Err(Error::config("sample rate must be positive"));
        }
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(Error::config("FMCW power must be non-negative"));
        }
        if self.n_samples() < 2 {
            return Err(Error::config(format!(
                "chirp spans {} samples; at least 2 are required",
                self.n_samples()
            )));
        }
        Ok(())
    }

    /// Samples per chirp, `round(duration * Fs)`.
    pub fn n_samples(&self) -> usize {
        (self.duration_s * self.sample_rate_hz).round() as usize
    }

    /// Chirp period after quantization to whole samples.
    pub fn effective_duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.sample_rate_hz
    }

    /// Sweep rate `bandwidth / duration` in Hz/s.
    pub fn sweep_rate(&self) -> f64 {
        self.bandwidth_hz / self.duration_s
    }

    /// Instantaneous phase `pi * beta * t^2 / tau` of the unit chirp.
    pub fn phase_at(&self, t: f64) -> f64 {
        PI * self.sweep_rate() * t * t
    }

    /// Phase of local sample `n` within a chirp interval.
    pub fn phase_at_sample(&self, n: usize) -> f64 {
        self.phase_at(n as f64 / self.sample_rate_hz)
    }
}

/// CP-OFDM numerology and payload layout.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmSpec {
    pub n_fft: usize,
    pub subcarrier_spacing_hz: f64,
    pub n_cp: usize,
    /// Active subcarriers, split around DC (DC itself unused).
    pub n_allocated: usize,
    pub n_symbols: usize,
    pub power: f64,
    pub qam_order: usize,
}

impl OfdmSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n_fft < 2 {
            return Err(Error::config("FFT size must be at least 2"));
        }
        if self.n_allocated == 0 || self.n_allocated >= self.n_fft {
            return Err(Error::config(format!(
                "allocated subcarriers ({}) must be in 1..{} (DC is reserved)",
                self.n_allocated, self.n_fft
            )));
        }
        if self.n_cp >= self.n_fft {
            return Err(Error::config(format!(
                "CP length {} must be shorter than the FFT size {}",
                self.n_cp, self.n_fft
            )));
        }
        if !matches!(self.qam_order, 4 | 16 | 64) {
            return Err(Error::config(format!(
                "QAM order must be 4, 16 or 64, got {}",
                self.qam_order
            )));
        }
        if !(self.power >= 0.0 && self.power.is_finite()) {
            return Err(Error::config("OFDM power must be non-negative"));
        }
        if !(self.subcarrier_spacing_hz > 0.0) {
            return Err(Error::config("subcarrier spacing must be positive"));
        }
        Ok(())
    }

    pub fn symbol_len(&self) -> usize {
        self.n_fft + self.n_cp
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.n_fft as f64 * self.subcarrier_spacing_hz
    }

    pub fn bits_per_qam_symbol(&self) -> usize {
        self.qam_order.trailing_zeros() as usize
    }

    pub fn coded_bits_per_symbol(&self) -> usize {
        self.n_allocated * self.bits_per_qam_symbol()
    }

    /// FFT bin of each allocated subcarrier, in ascending frequency order.
    pub fn allocated_bins(&self) -> Vec<usize> {
        let low = self.n_allocated / 2;
        let high = self.n_allocated - low;
        (0..low)
            .map(|i| self.n_fft - low + i)
            .chain(1..=high)
            .collect()
    }

    /// Time-domain amplitude applied after the unitary inverse DFT so that
    /// unit-energy constellations give a mean sample power of `power`.
    pub fn tx_scale(&self) -> f64 {
        (self.power * self.n_fft as f64 / self.n_allocated as f64).sqrt()
    }
}

/// Complete superimposed frame layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSpec {
    pub chirp: ChirpSpec,
    pub ofdm: OfdmSpec,
    pub n_chirps: usize,
    pub total_duration_s: f64,
}

impl FrameSpec {
    pub fn validate(&self) -> Result<()> {
        self.chirp.validate()?;
        self.ofdm.validate()?;
        let fs = self.chirp.sample_rate_hz;
        let ofdm_fs = self.ofdm.sample_rate_hz();
        if ((fs - ofdm_fs) / fs).abs() > 1e-9 {
            return Err(Error::config(format!(
                "sample rate {:.6} MHz differs from N*subcarrier spacing = {:.6} MHz",
                fs / 1e6,
                ofdm_fs / 1e6
            )));
        }
        if self.n_chirps < 2 {
            return Err(Error::config(format!(
                "frame needs at least 2 chirps (one interference-free), got {}",
                self.n_chirps
            )));
        }
        let fmcw_len = self.fmcw_len();
        if fmcw_len > self.frame_len() {
            return Err(Error::config(format!(
                "{} chirps ({} samples) exceed the frame length {}",
                self.n_chirps,
                fmcw_len,
                self.frame_len()
            )));
        }
        let ofdm_end = self.ofdm_start() + self.ofdm.n_symbols * self.ofdm.symbol_len();
        if ofdm_end > self.frame_len() {
            return Err(Error::config(format!(
                "{} OFDM symbols end at sample {} beyond the frame length {}",
                self.ofdm.n_symbols,
                ofdm_end,
                self.frame_len()
            )));
        }
        Ok(())
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.chirp.sample_rate_hz
    }

    pub fn chirp_len(&self) -> usize {
        self.chirp.n_samples()
    }

    pub fn fmcw_len(&self) -> usize {
        self.n_chirps * self.chirp_len()
    }

    pub fn frame_len(&self) -> usize {
        (self.total_duration_s * self.sample_rate_hz()).round() as usize
    }

    /// The OFDM stream begins right after the interference-free first chirp.
    pub fn ofdm_start(&self) -> usize {
        self.chirp_len()
    }

    pub fn ofdm_symbol_start(&self, m: usize) -> usize {
        self.ofdm_start() + m * self.ofdm.symbol_len()
    }

    /// Largest symbol count that fits between the first chirp and the frame end.
    pub fn max_ofdm_symbols(&self) -> usize {
        self.frame_len().saturating_sub(self.ofdm_start()) / self.ofdm.symbol_len()
    }
}

/// Unit-amplitude samples `exp(j*pi*beta*(n/Fs)^2/tau)` for one chirp.
pub fn synth_chirp(spec: &ChirpSpec) -> Result<ComplexFrame> {
    spec.validate()?;
    let samples = (0..spec.n_samples())
        .map(|n| Cf64::from_polar(1.0, spec.phase_at_sample(n)))
        .collect();
    ComplexFrame::new(samples, spec.sample_rate_hz)
}

/// `n_chirps` back-to-back chirps scaled by `sqrt(P_FMCW)`.
pub fn synth_fmcw(frame: &FrameSpec) -> Result<ComplexFrame> {
    if frame.n_chirps == 0 {
        return Err(Error::config("FMCW train needs at least one chirp"));
    }
    let chirp = synth_chirp(&frame.chirp)?;
    let amp = frame.chirp.power.sqrt();
    let mut samples = Vec::with_capacity(frame.fmcw_len());
    for _ in 0..frame.n_chirps {
        samples.extend(chirp.samples.iter().map(|s| s * amp));
    }
    ComplexFrame::new(samples, frame.chirp.sample_rate_hz)
}

/// Modulate a full `n_fft` frequency grid into one CP-OFDM symbol.
pub fn synth_ofdm_from_grid(grid: &[Cf64], spec: &OfdmSpec) -> Result<ComplexFrame> {
    spec.validate()?;
    if grid.len() != spec.n_fft {
        return Err(Error::arg(format!(
            "grid length {} does not match FFT size {}",
            grid.len(),
            spec.n_fft
        )));
    }
    let mut body = grid.to_vec();
    UnitaryDft::new(spec.n_fft).inverse(&mut body);
    let scale = spec.tx_scale();
    body.iter_mut().for_each(|s| *s *= scale);
    let mut samples = Vec::with_capacity(spec.symbol_len());
    samples.extend_from_slice(&body[spec.n_fft - spec.n_cp..]);
    samples.extend_from_slice(&body);
    ComplexFrame::new(samples, spec.sample_rate_hz())
}

/// One CP-OFDM symbol carrying `data` on the allocated subcarriers.
pub fn synth_ofdm_symbol(data: &[Cf64], spec: &OfdmSpec) -> Result<ComplexFrame> {
    if data.len() != spec.n_allocated {
        return Err(Error::arg(format!(
            "expected {} data symbols, got {}",
            spec.n_allocated,
            data.len()
        )));
    }
    let mut grid = vec![Cf64::default(); spec.n_fft];
    for (bin, &d) in spec.allocated_bins().into_iter().zip(data) {
        grid[bin] = d;
    }
    synth_ofdm_from_grid(&grid, spec)
}

/// Concatenated OFDM symbols (without the FMCW train), each `symbol_len` long.
pub fn synth_ofdm_stream(data: &[Cf64], spec: &OfdmSpec) -> Result<Vec<Cf64>> {
    if data.len() != spec.n_symbols * spec.n_allocated {
        return Err(Error::arg(format!(
            "expected {} data symbols for {} OFDM symbols, got {}",
            spec.n_symbols * spec.n_allocated,
            spec.n_symbols,
            data.len()
        )));
    }
    let mut out = Vec::with_capacity(spec.n_symbols * spec.symbol_len());
    for chunk in data.chunks_exact(spec.n_allocated) {
        out.extend(synth_ofdm_symbol(chunk, spec)?.samples);
    }
    Ok(out)
}

/// FMCW train plus the OFDM stream delayed by one chirp.
pub fn synth_frame(frame: &FrameSpec, data: &[Cf64]) -> Result<ComplexFrame> {
    frame.validate()?;
    let fmcw = synth_fmcw(frame)?;
    let ofdm = synth_ofdm_stream(data, &frame.ofdm)?;
    let mut samples = vec![Cf64::default(); frame.frame_len()];
    samples[..fmcw.len()].copy_from_slice(&fmcw.samples);
    let start = frame.ofdm_start();
    for (dst, src) in samples[start..start + ofdm.len()].iter_mut().zip(&ofdm) {
        *dst += src;
    }
    ComplexFrame::new(samples, frame.sample_rate_hz())
}

/// Reference numerology (28 GHz, 122.88 MHz) at a configurable scale.
pub fn reference_frame(n_chirps: usize, n_symbols: usize) -> FrameSpec {
    let chirp = ChirpSpec {
        bandwidth_hz: 100e6,
        duration_s: 2.4e-6,
        sample_rate_hz: 122.88e6,
        power: 1.0,
    };
    let total_duration_s = (n_chirps * chirp.n_samples()) as f64 / chirp.sample_rate_hz;
    FrameSpec {
        chirp,
        ofdm: OfdmSpec {
            n_fft: 2048,
            subcarrier_spacing_hz: 60e3,
            n_cp: 144,
            n_allocated: 1666,
            n_symbols,
            power: 1.0,
            qam_order: 4,
        },
        n_chirps,
        total_duration_s,
    }
}
