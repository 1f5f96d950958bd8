//! Pilot-free OFDM reception using the radar-derived channel operator.
//!
//! The FMCW contribution `H s_FMCW` is subtracted over the whole frame, then
//! each OFDM symbol is CP-stripped, transformed, and one-tap equalized with
//! the diagonal of `Theta = F B H_m A F^H`, where `H_m` is the block of the
//! operator covering that symbol's samples.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::channel::ChannelOperator;
use crate::error::{Error, Result};
use crate::frame::{FrameSpec, OfdmSpec};
use crate::qam::Constellation;
use crate::signal::{cis, Cf64, ComplexFrame, UnitaryDft};

/// Subcarriers whose channel magnitude falls below this are erased.
pub const ERASURE_THRESHOLD: f64 = 1e-9;

/// Remove `H s_FMCW` from the received frame.
pub fn cancel_fmcw(
    rx: &ComplexFrame,
    h_hat: &ChannelOperator,
    fmcw: &ComplexFrame,
) -> Result<ComplexFrame> {
    if fmcw.len() > rx.len() {
        return Err(Error::arg(format!(
            "FMCW train ({} samples) is longer than the received frame ({})",
            fmcw.len(),
            rx.len()
        )));
    }
    if fmcw.start_sample != rx.start_sample {
        return Err(Error::arg("FMCW train and received frame have different time origins"));
    }
    let mut echo = vec![Cf64::default(); rx.len()];
    h_hat.accumulate(&fmcw.samples, fmcw.start_sample, &mut echo);
    let samples = rx.samples.iter().zip(&echo).map(|(y, e)| y - e).collect();
    ComplexFrame::with_start(samples, rx.sample_rate_hz, rx.start_sample)
}

/// Cyclic-prefix insertion and removal for an `n`-point symbol with `n_cp`
/// prefix samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CpMatrices {
    pub n: usize,
    pub n_cp: usize,
}

impl CpMatrices {
    pub fn new(n: usize, n_cp: usize) -> Result<Self> {
        if n == 0 || n_cp >= n {
            return Err(Error::arg(format!(
                "CP length {n_cp} must be smaller than the symbol length {n}"
            )));
        }
        Ok(Self { n, n_cp })
    }

    /// `(N + N_g) x N`: the top `N_g` rows pick the last `N_g` inputs.
    pub fn addition(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n + self.n_cp, self.n, |r, c| {
            let src = if r < self.n_cp { self.n - self.n_cp + r } else { r - self.n_cp };
            if src == c {
                1.0
            } else {
                0.0
            }
        })
    }

    /// `N x (N + N_g)` = `[0 I_N]`.
    pub fn removal(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.n, self.n + self.n_cp, |r, c| {
            if c == r + self.n_cp {
                1.0
            } else {
                0.0
            }
        })
    }

    pub fn add(&self, body: &[Cf64]) -> Vec<Cf64> {
        let mut out = Vec::with_capacity(self.n + self.n_cp);
        out.extend_from_slice(&body[self.n - self.n_cp..]);
        out.extend_from_slice(body);
        out
    }

    pub fn remove<'a>(&self, symbol: &'a [Cf64]) -> &'a [Cf64] {
        &symbol[self.n_cp..self.n_cp + self.n]
    }
}

pub fn cp_matrices(n: usize, n_cp: usize) -> Result<CpMatrices> {
    CpMatrices::new(n, n_cp)
}

/// Diagonal of the CFR matrix for one OFDM symbol plus its ICI energy.
#[derive(Debug, Clone, PartialEq)]
pub struct CfrMatrix {
    /// `theta_k` for FFT bin `k`.
    pub diag: Vec<Cf64>,
    /// Off-diagonal energy of `Theta` (Frobenius norm squared).
    pub off_diagonal_energy: f64,
    pub symbol_index: usize,
    /// Absolute sample index where the symbol (including CP) starts.
    pub symbol_start: i64,
}

impl CfrMatrix {
    pub fn diagonal_energy(&self) -> f64 {
        self.diag.iter().map(|t| t.norm_sqr()).sum()
    }

    /// Off-diagonal over diagonal energy.
    pub fn ici_ratio(&self) -> f64 {
        let d = self.diagonal_energy();
        if d > 0.0 {
            self.off_diagonal_energy / d
        } else {
            0.0
        }
    }
}

/// `diag(F B H_m A F^H)` in closed form.
///
/// For a tap with delay `l` and coefficient `c_r` on post-CP row `r`, the
/// CP maps the tap onto a circular shift, so `theta_k` gets
/// `exp(-j 2 pi k l / N) * mean_r(c_r)`. Rows whose input would precede the
/// symbol block (`l > N_g`) contribute nothing.
pub fn compute_cfr(
    h_hat: &ChannelOperator,
    symbol_index: usize,
    symbol_start: i64,
    n: usize,
    n_cp: usize,
) -> CfrMatrix {
    let fs = h_hat.sample_rate_hz;
    let row0 = symbol_start + n_cp as i64;
    let mut diag = vec![Cf64::default(); n];
    let mut frobenius = 0.0;
    for tap in &h_hat.taps {
        let first = tap.delay_samples.saturating_sub(n_cp).min(n);
        let rows = n - first;
        if rows == 0 {
            continue;
        }
        // sum_{r=first}^{n-1} exp(j w r), w = 2 pi psi / Fs
        let w = 2.0 * PI * tap.doppler_hz / fs;
        let ramp_sum = if (w * rows as f64).abs() < 1e-12 {
            Cf64::new(rows as f64, 0.0)
        } else {
            cis(w * first as f64) * (Cf64::new(1.0, 0.0) - cis(w * rows as f64))
                / (Cf64::new(1.0, 0.0) - cis(w))
        };
        let mean = h_hat.coefficient(tap, row0) * ramp_sum / n as f64;
        let step = cis(-2.0 * PI * tap.delay_samples as f64 / n as f64);
        let mut rot = Cf64::new(1.0, 0.0);
        for (k, d) in diag.iter_mut().enumerate() {
            if k % 256 == 0 {
                rot = cis(-2.0 * PI * ((k * tap.delay_samples) % n) as f64 / n as f64);
            }
            *d += mean * rot;
            rot *= step;
        }
        frobenius += tap.gain.norm_sqr() * rows as f64;
    }
    let diag_energy: f64 = diag.iter().map(|t| t.norm_sqr()).sum();
    CfrMatrix {
        diag,
        off_diagonal_energy: (frobenius - diag_energy).max(0.0),
        symbol_index,
        symbol_start,
    }
}

/// Equalized data symbols of one OFDM symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct Equalized {
    /// One entry per allocated subcarrier, ascending frequency.
    pub symbols: Vec<Cf64>,
    /// `|theta_k * g_tx|^2`, the post-equalization SNR scale.
    pub channel_power: Vec<f64>,
    pub erased: Vec<bool>,
}

/// CP removal, DFT and one-tap equalization for one numerology.
#[derive(Debug, Clone)]
pub struct OfdmDemodulator {
    spec: OfdmSpec,
    dft: UnitaryDft,
    bins: Vec<usize>,
    cp: CpMatrices,
}

impl OfdmDemodulator {
    pub fn new(spec: &OfdmSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            spec: spec.clone(),
            dft: UnitaryDft::new(spec.n_fft),
            bins: spec.allocated_bins(),
            cp: CpMatrices::new(spec.n_fft, spec.n_cp)?,
        })
    }

    pub fn spec(&self) -> &OfdmSpec {
        &self.spec
    }

    /// `F B y_m`, all `N` bins.
    pub fn spectrum(&self, y_m: &[Cf64]) -> Result<Vec<Cf64>> {
        if y_m.len() != self.spec.symbol_len() {
            return Err(Error::arg(format!(
                "received symbol has {} samples, expected {}",
                y_m.len(),
                self.spec.symbol_len()
            )));
        }
        let mut body = self.cp.remove(y_m).to_vec();
        self.dft.forward(&mut body);
        Ok(body)
    }

    /// `diag(theta theta*)^-1 diag(theta)* F B y_m` on allocated subcarriers,
    /// with the known transmit amplitude folded into `theta`.
    pub fn equalize(&self, y_m: &[Cf64], theta: &[Cf64]) -> Result<Equalized> {
        if theta.len() != self.spec.n_fft {
            return Err(Error::arg(format!(
                "CFR diagonal has {} entries, expected {}",
                theta.len(),
                self.spec.n_fft
            )));
        }
        let spectrum = self.spectrum(y_m)?;
        let g = self.spec.tx_scale();
        let mut out = Equalized {
            symbols: Vec::with_capacity(self.bins.len()),
            channel_power: Vec::with_capacity(self.bins.len()),
            erased: Vec::with_capacity(self.bins.len()),
        };
        for &k in &self.bins {
            let t = theta[k] * g;
            if theta[k].norm() < ERASURE_THRESHOLD || g == 0.0 {
                out.symbols.push(Cf64::default());
                out.channel_power.push(0.0);
                out.erased.push(true);
            } else {
                let p = t.norm_sqr();
                out.symbols.push(spectrum[k] * t.conj() / p);
                out.channel_power.push(p);
                out.erased.push(false);
            }
        }
        Ok(out)
    }
}

/// Max-log LLRs (positive favours bit 0), scaled by `|theta_k|^2 / sigma^2`.
/// Erased subcarriers yield zero LLRs.
pub fn demap(eq: &Equalized, noise_variance: f64, constellation: &Constellation) -> Vec<f64> {
    let sigma2 = noise_variance.max(1e-12);
    let mut llrs = Vec::with_capacity(eq.symbols.len() * constellation.bits_per_symbol());
    for ((&y, &p), &erased) in eq.symbols.iter().zip(&eq.channel_power).zip(&eq.erased) {
        if erased {
            llrs.extend(std::iter::repeat_n(0.0, constellation.bits_per_symbol()));
        } else {
            constellation.llrs_into(y, sigma2 / p, &mut llrs);
        }
    }
    llrs
}

/// Soft output of every OFDM symbol in a frame.
#[derive(Debug, Clone)]
pub struct FrameReception {
    /// LLRs per OFDM symbol.
    pub llrs: Vec<Vec<f64>>,
    pub cfr: Vec<CfrMatrix>,
    pub equalized: Vec<Equalized>,
}

/// Equalize and demap all OFDM symbols of an FMCW-cancelled frame.
pub fn receive_ofdm(
    cancelled: &ComplexFrame,
    h_hat: &ChannelOperator,
    frame: &FrameSpec,
    noise_variance: f64,
    demod: &OfdmDemodulator,
    constellation: &Constellation,
) -> Result<FrameReception> {
    let spec = &frame.ofdm;
    let mut out = FrameReception {
        llrs: Vec::with_capacity(spec.n_symbols),
        cfr: Vec::with_capacity(spec.n_symbols),
        equalized: Vec::with_capacity(spec.n_symbols),
    };
    for m in 0..spec.n_symbols {
        let start = frame.ofdm_symbol_start(m);
        let end = start + spec.symbol_len();
        if end > cancelled.len() {
            return Err(Error::arg(format!(
                "OFDM symbol {m} ends at {end}, past the {}-sample frame",
                cancelled.len()
            )));
        }
        let abs_start = cancelled.start_sample + start as i64;
        let cfr = compute_cfr(h_hat, m, abs_start, spec.n_fft, spec.n_cp);
        let eq = demod.equalize(&cancelled.samples[start..end], &cfr.diag)?;
        out.llrs.push(demap(&eq, noise_variance, constellation));
        out.cfr.push(cfr);
        out.equalized.push(eq);
    }
    Ok(out)
}

/// Per-subcarrier diagnostics: `symbol,bin,theta_abs,erased` plus the
/// symbol's ICI ratio.
pub fn diagnostics_csv(rx: &FrameReception, spec: &OfdmSpec) -> String {
    let bins = spec.allocated_bins();
    let mut s = String::from("symbol,subcarrier,fft_bin,theta_abs,erased,ici_ratio\n");
    for (cfr, eq) in rx.cfr.iter().zip(&rx.equalized) {
        let ici = cfr.ici_ratio();
        for (i, &k) in bins.iter().enumerate() {
            s.push_str(&format!(
                "{},{},{},{:.6e},{},{:.6e}\n",
                cfr.symbol_index,
                i,
                k,
                cfr.diag[k].norm(),
                eq.erased[i] as u8,
                ici
            ));
        }
    }
    s
}
