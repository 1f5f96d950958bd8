//! Linear time-varying multipath channel at complex baseband.
//!
//! Each path `p` delays the frame by an integer number of samples `l_p`,
//! applies the Doppler ramp `exp(j 2 pi psi_p n / Fs)` on the absolute sample
//! index `n`, and scales by its complex gain `h_p`:
//!
//! ```text
//! y[n] = sum_p h_p x[n - l_p] exp(j 2 pi psi_p n / Fs) + w[n]
//! ```

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::signal::{cis, Cf64, ComplexFrame, SPEED_OF_LIGHT};

/// Ground truth for one specular scatterer.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTruth {
    /// Total transmitter-target-receiver path length.
    pub range_m: f64,
    pub velocity_mps: f64,
    pub gain: Cf64,
    pub delay_s: f64,
    pub doppler_hz: f64,
}

impl TargetTruth {
    pub fn new(range_m: f64, velocity_mps: f64, gain: Cf64, carrier_hz: f64) -> Self {
        Self {
            range_m,
            velocity_mps,
            gain,
            delay_s: range_m / SPEED_OF_LIGHT,
            doppler_hz: doppler_shift(carrier_hz, velocity_mps),
        }
    }

    pub fn delay_samples(&self, sample_rate_hz: f64) -> usize {
        (self.delay_s * sample_rate_hz).round() as usize
    }
}

/// `f_c * v / c`; positive for approaching targets.
pub fn doppler_shift(carrier_hz: f64, velocity_mps: f64) -> f64 {
    carrier_hz * velocity_mps / SPEED_OF_LIGHT
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    pub targets: Vec<TargetTruth>,
    pub noise_variance: f64,
    pub carrier_hz: f64,
    /// Seed of the AWGN stream.
    pub seed: u64,
}

impl ChannelRealization {
    /// Checks the realization against a frame sampled at `sample_rate_hz`.
    /// An empty target list is accepted and produces a noise-only channel.
    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if !(self.noise_variance >= 0.0 && self.noise_variance.is_finite()) {
            return Err(Error::config(format!(
                "noise variance must be non-negative, got {}",
                self.noise_variance
            )));
        }
        let mut delays = Vec::with_capacity(self.targets.len());
        for (i, t) in self.targets.iter().enumerate() {
            if !(t.delay_s >= 0.0) {
                return Err(Error::config(format!("target {i} has negative delay")));
            }
            if !(t.gain.norm() > 0.0 && t.gain.norm().is_finite()) {
                return Err(Error::config(format!("target {i} has zero or non-finite gain")));
            }
            let l = t.delay_samples(sample_rate_hz);
            if delays.contains(&l) {
                return Err(Error::config(format!(
                    "target {i} shares delay bin {l} with another target"
                )));
            }
            delays.push(l);
        }
        Ok(())
    }

    pub fn operator(&self, frame_len: usize, sample_rate_hz: f64) -> ChannelOperator {
        ChannelOperator {
            taps: self
                .targets
                .iter()
                .map(|t| ChannelTap {
                    delay_samples: t.delay_samples(sample_rate_hz),
                    doppler_hz: t.doppler_hz,
                    gain: t.gain,
                })
                .collect(),
            frame_len,
            sample_rate_hz,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelTap {
    pub delay_samples: usize,
    pub doppler_hz: f64,
    pub gain: Cf64,
}

/// Sparse time-varying convolution operator.
///
/// The dense equivalent has `H[n, n - l_p] = h_p exp(j 2 pi n psi_p / Fs)`
/// for every tap and zeros elsewhere; `n` is the absolute sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelOperator {
    pub taps: Vec<ChannelTap>,
    pub frame_len: usize,
    pub sample_rate_hz: f64,
}

impl ChannelOperator {
    pub fn zero(frame_len: usize, sample_rate_hz: f64) -> Self {
        Self {
            taps: Vec::new(),
            frame_len,
            sample_rate_hz,
        }
    }

    pub fn max_delay(&self) -> usize {
        self.taps.iter().map(|t| t.delay_samples).max().unwrap_or(0)
    }

    /// Coefficient of tap `tap` on output row `n` (absolute index).
    pub fn coefficient(&self, tap: &ChannelTap, n: i64) -> Cf64 {
        tap.gain * cis(2.0 * PI * tap.doppler_hz * n as f64 / self.sample_rate_hz)
    }

    /// Dense entry `H[row, col]` with absolute row/column indices.
    pub fn entry(&self, row: i64, col: i64) -> Cf64 {
        self.taps
            .iter()
            .filter(|t| row - col == t.delay_samples as i64)
            .map(|t| self.coefficient(t, row))
            .sum()
    }

    /// `H x` over the span of `x`; samples before the frame start are zero.
    pub fn apply(&self, x: &ComplexFrame) -> Vec<Cf64> {
        let mut out = vec![Cf64::default(); x.len()];
        self.accumulate(&x.samples, x.start_sample, &mut out);
        out
    }

    /// `out += H x` where `x[0]` sits at absolute sample `start`.
    pub fn accumulate(&self, x: &[Cf64], start: i64, out: &mut [Cf64]) {
        let w0 = 2.0 * PI / self.sample_rate_hz;
        for tap in &self.taps {
            let l = tap.delay_samples;
            if l >= x.len() {
                continue;
            }
            let step = cis(w0 * tap.doppler_hz);
            let mut rot = tap.gain * cis(w0 * tap.doppler_hz * (start + l as i64) as f64);
            // Re-seed the recursive rotator periodically to bound round-off drift.
            for (i, (o, xi)) in out[l..].iter_mut().zip(x).enumerate() {
                if i % 1024 == 0 {
                    rot = self.coefficient(tap, start + (l + i) as i64);
                }
                *o += rot * xi;
                rot *= step;
            }
        }
    }
}

/// Draw Rayleigh tap gains on an exponential power-delay profile.
///
/// Tap `p` has variance `eta * exp(-gamma p)` with `eta` normalizing the
/// profile to unit total power.
pub fn draw_targets(
    pdp_decay: f64,
    ranges_m: &[f64],
    velocities_mps: &[f64],
    carrier_hz: f64,
    seed: u64,
) -> Result<Vec<TargetTruth>> {
    if ranges_m.len() != velocities_mps.len() {
        return Err(Error::arg(format!(
            "{} ranges but {} velocities",
            ranges_m.len(),
            velocities_mps.len()
        )));
    }
    let profile = pdp_profile(pdp_decay, ranges_m.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(ranges_m
        .iter()
        .zip(velocities_mps)
        .zip(profile)
        .map(|((&r, &v), power)| {
            let g = complex_gaussian(&mut rng) * power.sqrt();
            TargetTruth::new(r, v, g, carrier_hz)
        })
        .collect())
}

/// Expected tap powers `eta * exp(-gamma p)`, summing to one.
pub fn pdp_profile(pdp_decay: f64, n_taps: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..n_taps).map(|p| (-pdp_decay * p as f64).exp()).collect();
    let eta = 1.0 / raw.iter().sum::<f64>();
    raw.into_iter().map(|p| p * eta).collect()
}

/// Unit-variance circular complex Gaussian sample.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> Cf64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Cf64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// Add `CN(0, noise_variance)` samples drawn from `seed`.
pub fn add_awgn(samples: &mut [Cf64], noise_variance: f64, seed: u64) {
    if noise_variance == 0.0 {
        return;
    }
    let sigma = noise_variance.sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in samples {
        *s += complex_gaussian(&mut rng) * sigma;
    }
}

/// Pass `tx` through the multipath channel and add AWGN.
pub fn apply_channel(tx: &ComplexFrame, ch: &ChannelRealization) -> Result<ComplexFrame> {
    ch.validate(tx.sample_rate_hz)?;
    let op = ch.operator(tx.len(), tx.sample_rate_hz);
    if !op.taps.is_empty() && op.max_delay() >= tx.len() {
        return Err(Error::config(format!(
            "path delay of {} samples is not shorter than the {}-sample frame",
            op.max_delay(),
            tx.len()
        )));
    }
    let mut samples = op.apply(tx);
    add_awgn(&mut samples, ch.noise_variance, ch.seed);
    ComplexFrame::with_start(samples, tx.sample_rate_hz, tx.start_sample)
}

/// Large-scale gain `G_tx G_rx lambda^2 / ((4 pi)^2 d^PL)`.
pub fn path_loss(
    distance_m: f64,
    pl_exponent: f64,
    gain_tx: f64,
    gain_rx: f64,
    wavelength_m: f64,
) -> Result<f64> {
    if !(distance_m > 0.0) {
        return Err(Error::arg(format!(
            "path-loss distance must be positive, got {distance_m}"
        )));
    }
    Ok(gain_tx * gain_rx * wavelength_m * wavelength_m
        / ((4.0 * PI).powi(2) * distance_m.powf(pl_exponent)))
}

/// Noise variance giving `snr_db` relative to `reference_power`.
pub fn calibrate_noise(snr_db: f64, reference_power: f64) -> Result<f64> {
    if !(reference_power > 0.0) {
        return Err(Error::arg(format!(
            "SNR reference power must be positive, got {reference_power}"
        )));
    }
    Ok(reference_power / 10f64.powf(snr_db / 10.0))
}
