//! Channel-estimation MSE, BER, detection bookkeeping, and the Monte-Carlo
//! harness.
//!
//! Trial seeds depend only on the base seed and the trial index, so every
//! SNR point of a sweep sees the same channel draws, payloads and unit-noise
//! sequences (common random numbers); only the noise scale changes.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::channel::{
    apply_channel, calibrate_noise, draw_targets, path_loss, ChannelOperator, ChannelRealization,
    TargetTruth,
};
use crate::codec::{decode, encode, CodecSpec};
use crate::comm::{cancel_fmcw, receive_ofdm, OfdmDemodulator};
use crate::error::{Error, Result};
use crate::frame::{synth_fmcw, synth_frame, FrameSpec};
use crate::qam::Constellation;
use crate::radar::{process_frame, reconstruct_channel, RadarOutput, RadarParams, TargetEstimate};
use crate::signal::{Cf64, ComplexFrame, SPEED_OF_LIGHT};

/// Everything a trial needs, already validated.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub frame: FrameSpec,
    pub carrier_hz: f64,
    pub ranges_m: Vec<f64>,
    pub velocities_mps: Vec<f64>,
    pub pdp_decay: f64,
    /// Scale tap gains by the large-scale path loss of each range.
    pub physical_path_loss: Option<PathLossModel>,
    pub radar: RadarParams,
    pub codec: CodecSpec,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathLossModel {
    pub exponent: f64,
    pub gain_tx: f64,
    pub gain_rx: f64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        self.codec.validate()?;
        if self.codec.block_len() != self.frame.ofdm.coded_bits_per_symbol() {
            return Err(Error::config(format!(
                "codec block of {} bits does not match the {} coded bits of one OFDM symbol",
                self.codec.block_len(),
                self.frame.ofdm.coded_bits_per_symbol()
            )));
        }
        if self.ranges_m.len() != self.velocities_mps.len() {
            return Err(Error::config("target ranges and velocities differ in length"));
        }
        Ok(())
    }

    pub fn info_bits_per_frame(&self) -> usize {
        self.codec.info_len() * self.frame.ofdm.n_symbols
    }

    /// Doppler bin expected for a Doppler shift, on the slow-time grid.
    pub fn doppler_bin_of(&self, doppler_hz: f64) -> i64 {
        (doppler_hz * self.frame.n_chirps as f64 * self.frame.chirp.effective_duration_s()).round()
            as i64
    }

    pub fn draw_targets(&self, seed: u64) -> Result<Vec<TargetTruth>> {
        let mut targets = draw_targets(
            self.pdp_decay,
            &self.ranges_m,
            &self.velocities_mps,
            self.carrier_hz,
            seed,
        )?;
        if let Some(pl) = self.physical_path_loss {
            let lambda = SPEED_OF_LIGHT / self.carrier_hz;
            for t in &mut targets {
                t.gain *= path_loss(t.range_m, pl.exponent, pl.gain_tx, pl.gain_rx, lambda)?.sqrt();
            }
        }
        Ok(targets)
    }
}

/// Independent per-purpose seed derived from a trial seed (splitmix64).
pub fn sub_seed(seed: u64, stream: u64) -> u64 {
    let mut z = seed
        .wrapping_add(stream.wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trial `index` in a run with base seed `base`.
pub fn trial_seed(base: u64, index: usize) -> u64 {
    sub_seed(base, 1_000 + index as u64)
}

const STREAM_TARGETS: u64 = 1;
const STREAM_PAYLOAD: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// `E|H_hat - H|^2 / E|H|^2` over the union of both operators' supports.
pub fn mse_channel(h_hat: &ChannelOperator, h_true: &ChannelOperator) -> Result<f64> {
    if h_hat.frame_len != h_true.frame_len {
        return Err(Error::arg(format!(
            "operators span {} and {} samples",
            h_hat.frame_len, h_true.frame_len
        )));
    }
    let mut delays: Vec<usize> = h_hat
        .taps
        .iter()
        .chain(&h_true.taps)
        .map(|t| t.delay_samples)
        .collect();
    delays.sort_unstable();
    delays.dedup();
    let mut err = 0.0;
    let mut reference = 0.0;
    for &l in &delays {
        for n in l..h_true.frame_len {
            let row = n as i64;
            let sum = |op: &ChannelOperator| -> Cf64 {
                op.taps
                    .iter()
                    .filter(|t| t.delay_samples == l)
                    .map(|t| op.coefficient(t, row))
                    .sum()
            };
            let truth = sum(h_true);
            err += (sum(h_hat) - truth).norm_sqr();
            reference += truth.norm_sqr();
        }
    }
    if reference == 0.0 {
        return Err(Error::arg("true channel has no non-zero entries"));
    }
    Ok(err / reference)
}

/// Dense counterpart of [`mse_channel`]: union support of non-zero entries.
pub fn mse_dense(h_hat: &DMatrix<Cf64>, h_true: &DMatrix<Cf64>) -> Result<f64> {
    if h_hat.shape() != h_true.shape() {
        return Err(Error::arg("matrices differ in shape"));
    }
    let mut err = 0.0;
    let mut reference = 0.0;
    for (a, b) in h_hat.iter().zip(h_true.iter()) {
        if a.norm_sqr() > 0.0 || b.norm_sqr() > 0.0 {
            err += (a - b).norm_sqr();
            reference += b.norm_sqr();
        }
    }
    if reference == 0.0 {
        return Err(Error::arg("true channel has no non-zero entries"));
    }
    Ok(err / reference)
}

/// True if every target has an estimate within one delay bin and one
/// (circular) Doppler bin of its ground-truth cell.
pub fn targets_resolved(scenario: &Scenario, truth: &[TargetTruth], estimates: &[TargetEstimate]) -> bool {
    let fs = scenario.frame.sample_rate_hz();
    let k = scenario.frame.n_chirps as i64;
    truth.iter().all(|t| {
        let l = t.delay_samples(fs) as i64;
        let q = scenario.doppler_bin_of(t.doppler_hz);
        estimates.iter().any(|e| {
            let dq = (e.doppler_bin - q).rem_euclid(k);
            (e.delay_bin as i64 - l).abs() <= 1 && (dq <= 1 || dq >= k - 1)
        })
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub seed: u64,
    pub snr_db: f64,
    pub mse_h: f64,
    pub ber: f64,
    pub n_bits: usize,
    pub bit_errors: usize,
    pub perfect_csi_ber: f64,
    pub perfect_bit_errors: usize,
    pub detections: Vec<TargetEstimate>,
    pub truth: Vec<TargetTruth>,
    /// No usable estimate: zero detections or a failed gain solve.
    pub detection_failure: bool,
    pub targets_resolved: bool,
    pub mean_ici_ratio: f64,
}

/// Everything produced while processing one frame, for inspection.
#[derive(Debug, Clone)]
pub struct FrameRun {
    pub tx_bits: Vec<u8>,
    pub rx: ComplexFrame,
    pub truth: Vec<TargetTruth>,
    pub radar: RadarOutput,
    pub h_true: ChannelOperator,
    pub h_hat: ChannelOperator,
    pub noise_variance: f64,
}

fn random_bits(n: usize, seed: u64) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(0..2u8)).collect()
}

/// Transmit, propagate and run the radar chain for one frame.
pub fn simulate_frame(scenario: &Scenario, snr_db: f64, seed: u64) -> Result<FrameRun> {
    let frame = &scenario.frame;
    let constellation = Constellation::new(frame.ofdm.qam_order)?;
    let truth = scenario.draw_targets(sub_seed(seed, STREAM_TARGETS))?;
    let tx_bits = random_bits(scenario.info_bits_per_frame(), sub_seed(seed, STREAM_PAYLOAD));
    let mut coded = Vec::with_capacity(frame.ofdm.n_symbols * scenario.codec.block_len());
    for block in tx_bits.chunks(scenario.codec.info_len().max(1)) {
        coded.extend(encode(block, &scenario.codec)?);
    }
    let data = constellation.map(&coded)?;
    let tx = synth_frame(frame, &data)?;
    let noise_variance = calibrate_noise(snr_db, frame.ofdm.power.max(f64::MIN_POSITIVE))?;
    let channel = ChannelRealization {
        targets: truth.clone(),
        noise_variance,
        carrier_hz: scenario.carrier_hz,
        seed: sub_seed(seed, STREAM_NOISE),
    };
    let rx = apply_channel(&tx, &channel)?;
    let radar = process_frame(&rx, &frame.chirp, frame.n_chirps, &scenario.radar)?;
    let fs = frame.sample_rate_hz();
    let h_true = channel.operator(rx.len(), fs);
    let h_hat = reconstruct_channel(&radar.estimates, rx.len(), fs, scenario.radar.refine_doppler);
    Ok(FrameRun {
        tx_bits,
        rx,
        truth,
        radar,
        h_true,
        h_hat,
        noise_variance,
    })
}

/// Cancel, equalize and decode with `h`; returns (bit errors, mean ICI ratio).
fn decode_with(
    scenario: &Scenario,
    run: &FrameRun,
    h: &ChannelOperator,
    fmcw: &ComplexFrame,
    demod: &OfdmDemodulator,
    constellation: &Constellation,
) -> Result<(usize, f64)> {
    let cancelled = cancel_fmcw(&run.rx, h, fmcw)?;
    let rx = receive_ofdm(
        &cancelled,
        h,
        &scenario.frame,
        run.noise_variance,
        demod,
        constellation,
    )?;
    let mut errors = 0;
    for (llrs, sent) in rx.llrs.iter().zip(run.tx_bits.chunks(scenario.codec.info_len().max(1))) {
        let out = decode(llrs, &scenario.codec)?;
        errors += out.bits.iter().zip(sent).filter(|(a, b)| a != b).count();
    }
    let ici = if rx.cfr.is_empty() {
        0.0
    } else {
        rx.cfr.iter().map(|c| c.ici_ratio()).sum::<f64>() / rx.cfr.len() as f64
    };
    Ok((errors, ici))
}

/// One Monte-Carlo trial of the full estimated-CSI and perfect-CSI chains.
pub fn run_trial(scenario: &Scenario, snr_db: f64, seed: u64) -> Result<TrialResult> {
    let run = simulate_frame(scenario, snr_db, seed)?;
    let frame = &scenario.frame;
    let constellation = Constellation::new(frame.ofdm.qam_order)?;
    let demod = OfdmDemodulator::new(&frame.ofdm)?;
    let fmcw = synth_fmcw(frame)?;
    let n_bits = run.tx_bits.len();
    let ratio = |e: usize| if n_bits == 0 { 0.0 } else { e as f64 / n_bits as f64 };

    let (perfect_errors, ici) = decode_with(scenario, &run, &run.h_true, &fmcw, &demod, &constellation)?;
    let detection_failure = run.radar.estimates.is_empty();
    let (errors, ber) = if detection_failure {
        (n_bits / 2, 0.5)
    } else {
        let (e, _) = decode_with(scenario, &run, &run.h_hat, &fmcw, &demod, &constellation)?;
        (e, ratio(e))
    };
    let mse_h = if run.h_true.taps.is_empty() {
        0.0
    } else {
        mse_channel(&run.h_hat, &run.h_true)?
    };
    Ok(TrialResult {
        seed,
        snr_db,
        mse_h,
        ber,
        n_bits,
        bit_errors: errors,
        perfect_csi_ber: ratio(perfect_errors),
        perfect_bit_errors: perfect_errors,
        targets_resolved: targets_resolved(scenario, &run.truth, &run.radar.estimates),
        detections: run.radar.estimates,
        truth: run.truth,
        detection_failure,
        mean_ici_ratio: ici,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub snr_db: f64,
    pub trials: usize,
    pub mse_mean: f64,
    pub mse_ci95: f64,
    pub ber_est_mean: f64,
    pub ber_perfect_mean: f64,
    pub bits: usize,
    pub detection_failures: usize,
    pub resolved_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    pub trials_per_point: usize,
    pub base_seed: u64,
    /// Resolved configuration that reproduces this sweep.
    pub config_snapshot: String,
}

pub const SWEEP_CSV_HEADER: &str = "snr_db,mse_mean,mse_ci95,ber_est_mean,ber_perfect_mean,trials";

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut s = String::from(SWEEP_CSV_HEADER);
        s.push('\n');
        for p in &self.points {
            s.push_str(&format!(
                "{},{:.9e},{:.9e},{:.9e},{:.9e},{}\n",
                p.snr_db, p.mse_mean, p.mse_ci95, p.ber_est_mean, p.ber_perfect_mean, p.trials
            ));
        }
        s
    }

    pub fn snrs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.snr_db).collect()
    }
}

/// Aggregate trials of one SNR point, in trial order.
pub fn aggregate(snr_db: f64, trials: &[TrialResult]) -> SweepPoint {
    let n = trials.len().max(1) as f64;
    let mse_mean = trials.iter().map(|t| t.mse_h).sum::<f64>() / n;
    let var = if trials.len() > 1 {
        trials.iter().map(|t| (t.mse_h - mse_mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    SweepPoint {
        snr_db,
        trials: trials.len(),
        mse_mean,
        mse_ci95: 1.96 * (var / n).sqrt(),
        ber_est_mean: trials.iter().map(|t| t.ber).sum::<f64>() / n,
        ber_perfect_mean: trials.iter().map(|t| t.perfect_csi_ber).sum::<f64>() / n,
        bits: trials.iter().map(|t| t.n_bits).sum(),
        detection_failures: trials.iter().filter(|t| t.detection_failure).count(),
        resolved_fraction: trials.iter().filter(|t| t.targets_resolved).count() as f64 / n,
    }
}

/// All trials of a sweep, grouped per SNR point. Runs on the current rayon
/// pool; the output does not depend on its size.
pub fn run_trials(
    scenario: &Scenario,
    snr_grid: &[f64],
    trials: usize,
    base_seed: u64,
) -> Result<Vec<Vec<TrialResult>>> {
    scenario.validate()?;
    let jobs: Vec<(usize, usize)> = (0..snr_grid.len())
        .flat_map(|p| (0..trials).map(move |t| (p, t)))
        .collect();
    let results: Vec<TrialResult> = jobs
        .par_iter()
        .map(|&(p, t)| run_trial(scenario, snr_grid[p], trial_seed(base_seed, t)))
        .collect::<Result<_>>()?;
    let mut grouped: Vec<Vec<TrialResult>> = vec![Vec::with_capacity(trials); snr_grid.len()];
    for ((p, _), r) in jobs.into_iter().zip(results) {
        grouped[p].push(r);
    }
    Ok(grouped)
}

pub fn run_sweep(
    scenario: &Scenario,
    snr_grid: &[f64],
    trials: usize,
    base_seed: u64,
    config_snapshot: String,
) -> Result<SweepResult> {
    if snr_grid.is_empty() {
        return Err(Error::config("SNR grid is empty"));
    }
    if trials == 0 {
        return Err(Error::config("at least one trial per SNR point is required"));
    }
    let grouped = run_trials(scenario, snr_grid, trials, base_seed)?;
    Ok(SweepResult {
        points: snr_grid
            .iter()
            .zip(&grouped)
            .map(|(&snr, t)| aggregate(snr, t))
            .collect(),
        trials_per_point: trials,
        base_seed,
        config_snapshot,
    })
}

/// SNR where `ber` first falls through `target`, interpolating BER
/// log-linearly between grid points.
pub fn ber_crossing(snrs: &[f64], bers: &[f64], target: f64) -> Option<f64> {
    let lt = target.ln();
    for i in 1..snrs.len().min(bers.len()) {
        let (b0, b1) = (bers[i - 1], bers[i]);
        if b0 >= target && b1 <= target {
            if b1 <= 0.0 || b0 == b1 {
                return Some(snrs[i]);
            }
            let (l0, l1) = (b0.ln(), b1.ln());
            return Some(snrs[i - 1] + (lt - l0) / (l1 - l0) * (snrs[i] - snrs[i - 1]));
        }
    }
    None
}

/// Dense matrix of an operator restricted to rows/columns `[start, start+len)`.
pub fn dense_block(op: &ChannelOperator, start: i64, len: usize) -> DMatrix<Cf64> {
    DMatrix::from_fn(len, len, |r, c| op.entry(start + r as i64, start + c as i64))
}
