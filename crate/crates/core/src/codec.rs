//! Zero-tailed feed-forward convolutional code with a block interleaver and
//! soft-input Viterbi decoding.
//!
//! Shift-register convention: the current input occupies the most
//! significant of the `constraint_length` register bits, so the impulse
//! response of each output stream reads the generator's taps MSB first.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodecSpec {
    pub constraint_length: usize,
    /// Generator polynomials, written in octal in config files.
    pub generators: Vec<u32>,
    pub interleaver_rows: usize,
    pub interleaver_cols: usize,
    pub zero_tail: bool,
}

impl CodecSpec {
    /// Rate-1/2, K=7, (171, 133) octal, with an interleaver sized for
    /// `coded_len` coded bits.
    pub fn standard(coded_len: usize) -> Self {
        let (rows, cols) = near_square_factors(coded_len);
        Self {
            constraint_length: 7,
            generators: vec![0o171, 0o133],
            interleaver_rows: rows,
            interleaver_cols: cols,
            zero_tail: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=16).contains(&self.constraint_length) {
            return Err(Error::config(format!(
                "constraint length {} outside 2..=16",
                self.constraint_length
            )));
        }
        if self.generators.is_empty() {
            return Err(Error::config("at least one generator polynomial is required"));
        }
        let limit = 1u32 << self.constraint_length;
        if let Some(g) = self.generators.iter().find(|&&g| g == 0 || g >= limit) {
            return Err(Error::config(format!(
                "generator {g:o} does not fit constraint length {}",
                self.constraint_length
            )));
        }
        if !self.zero_tail {
            return Err(Error::config("only zero-tail termination is supported"));
        }
        let size = self.block_len();
        if size % self.generators.len() != 0 || size / self.generators.len() < self.constraint_length {
            return Err(Error::config(format!(
                "interleaver size {size} cannot hold a terminated codeword of rate 1/{}",
                self.generators.len()
            )));
        }
        Ok(())
    }

    pub fn outputs_per_bit(&self) -> usize {
        self.generators.len()
    }

    /// Coded bits per block (interleaver size).
    pub fn block_len(&self) -> usize {
        self.interleaver_rows * self.interleaver_cols
    }

    /// Information bits per block, excluding the zero tail.
    pub fn info_len(&self) -> usize {
        self.block_len() / self.outputs_per_bit() - (self.constraint_length - 1)
    }

    fn n_states(&self) -> usize {
        1 << (self.constraint_length - 1)
    }

    fn branch_outputs(&self, reg: u32) -> impl Iterator<Item = u8> + '_ {
        self.generators.iter().map(move |g| ((reg & g).count_ones() & 1) as u8)
    }
}

/// Divisor pair `rows x cols = n` with `cols` the divisor closest to `sqrt(n)`.
fn near_square_factors(n: usize) -> (usize, usize) {
    if n == 0 {
        return (0, 0);
    }
    let root = (n as f64).sqrt();
    let cols = (1..=n)
        .filter(|d| n % d == 0)
        .min_by(|a, b| (*a as f64 - root).abs().total_cmp(&(*b as f64 - root).abs()))
        .unwrap_or(1);
    (n / cols, cols)
}

/// Convolutional encoding with zero tail, no interleaving.
pub fn conv_encode(bits: &[u8], spec: &CodecSpec) -> Vec<u8> {
    let k = spec.constraint_length;
    let mut state = 0u32;
    let mut out = Vec::with_capacity((bits.len() + k - 1) * spec.outputs_per_bit());
    for &b in bits.iter().chain(std::iter::repeat_n(&0u8, k - 1)) {
        let reg = ((b as u32 & 1) << (k - 1)) | state;
        out.extend(spec.branch_outputs(reg));
        state = reg >> 1;
    }
    out
}

/// Row-in, column-out block interleaving.
pub fn interleave<T: Copy>(input: &[T], rows: usize, cols: usize) -> Vec<T> {
    debug_assert_eq!(input.len(), rows * cols);
    let mut out = Vec::with_capacity(input.len());
    for c in 0..cols {
        for r in 0..rows {
            out.push(input[r * cols + c]);
        }
    }
    out
}

pub fn deinterleave<T: Copy + Default>(input: &[T], rows: usize, cols: usize) -> Vec<T> {
    debug_assert_eq!(input.len(), rows * cols);
    let mut out = vec![T::default(); input.len()];
    for c in 0..cols {
        for r in 0..rows {
            out[r * cols + c] = input[c * rows + r];
        }
    }
    out
}

/// Encode one block: convolutional code with zero tail, then interleave.
pub fn encode(bits: &[u8], spec: &CodecSpec) -> Result<Vec<u8>> {
    spec.validate()?;
    if bits.len() != spec.info_len() {
        return Err(Error::arg(format!(
            "block holds {} information bits, got {}",
            spec.info_len(),
            bits.len()
        )));
    }
    let coded = conv_encode(bits, spec);
    Ok(interleave(&coded, spec.interleaver_rows, spec.interleaver_cols))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecodeOutput {
    pub bits: Vec<u8>,
    /// Correlation metric of the surviving path.
    pub path_metric: f64,
    /// No usable soft information (all-zero LLRs or a non-positive metric).
    pub low_confidence: bool,
}

/// Soft-input Viterbi over non-interleaved LLRs (positive favours 0);
/// the trellis is forced to end in state zero.
pub fn viterbi_decode(llrs: &[f64], spec: &CodecSpec) -> DecodeOutput {
    let n = spec.outputs_per_bit();
    let k = spec.constraint_length;
    let states = spec.n_states();
    let steps = llrs.len() / n;
    let mut metric = vec![f64::NEG_INFINITY; states];
    metric[0] = 0.0;
    let mut next = vec![f64::NEG_INFINITY; states];
    // decisions[t * states + s]: low bit of the winning predecessor
    let mut decisions = vec![0u8; steps * states];
    let branch: Vec<Vec<u8>> = (0..(1u32 << k))
        .map(|reg| spec.branch_outputs(reg).collect())
        .collect();
    for t in 0..steps {
        let l = &llrs[t * n..(t + 1) * n];
        next.iter_mut().for_each(|m| *m = f64::NEG_INFINITY);
        for (s, &m) in metric.iter().enumerate() {
            if m == f64::NEG_INFINITY {
                continue;
            }
            for b in 0..2u32 {
                let reg = (b << (k - 1)) | s as u32;
                let ns = (reg >> 1) as usize;
                let bm: f64 = branch[reg as usize]
                    .iter()
                    .zip(l)
                    .map(|(&c, &v)| if c == 0 { v } else { -v })
                    .sum();
                let cand = m + bm;
                if cand > next[ns] {
                    next[ns] = cand;
                    decisions[t * states + ns] = (s & 1) as u8;
                }
            }
        }
        std::mem::swap(&mut metric, &mut next);
    }
    let mut bits = vec![0u8; steps];
    let mut state = 0usize;
    for t in (0..steps).rev() {
        bits[t] = (state >> (k - 2)) as u8;
        let low = decisions[t * states + state] as usize;
        state = ((state << 1) & (states - 1)) | low;
    }
    bits.truncate(steps.saturating_sub(k - 1));
    let total: f64 = llrs.iter().map(|v| v.abs()).sum();
    let path_metric = metric[0];
    DecodeOutput {
        bits,
        path_metric,
        low_confidence: total == 0.0 || !(path_metric > 0.0),
    }
}

/// Deinterleave and Viterbi-decode one block of LLRs.
pub fn decode(llrs: &[f64], spec: &CodecSpec) -> Result<DecodeOutput> {
    spec.validate()?;
    if llrs.len() != spec.block_len() {
        return Err(Error::arg(format!(
            "expected {} LLRs, got {}",
            spec.block_len(),
            llrs.len()
        )));
    }
    let ordered = deinterleave(llrs, spec.interleaver_rows, spec.interleaver_cols);
    Ok(viterbi_decode(&ordered, spec))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn small_spec() -> CodecSpec {
        // 40 coded bits -> 14 info bits
        CodecSpec::standard(40)
    }

    fn hard_llrs(bits: &[u8]) -> Vec<f64> {
        bits.iter().map(|&b| if b == 0 { 4.0 } else { -4.0 }).collect()
    }

    #[test]
    fn standard_dims_for_qpsk_symbol() {
        let s = CodecSpec::standard(3332);
        assert_eq!((s.interleaver_rows, s.interleaver_cols), (68, 49));
        assert_eq!(s.info_len(), 1660);
    }

    #[test]
    fn all_zero_message_encodes_to_zero() {
        let s = small_spec();
        let c = encode(&vec![0; s.info_len()], &s).unwrap();
        assert!(c.iter().all(|&b| b == 0));
    }

    #[test]
    fn impulse_response_reads_generator_taps() {
        let s = CodecSpec::standard(40);
        let mut msg = vec![0u8; 10];
        msg[0] = 1;
        let coded = conv_encode(&msg, &s);
        for (j, g) in s.generators.iter().enumerate() {
            let stream: Vec<u8> = coded.iter().skip(j).step_by(2).take(7).copied().collect();
            let taps: Vec<u8> = (0..7).rev().map(|i| ((g >> i) & 1) as u8).collect();
            assert_eq!(stream, taps, "generator {g:o}");
        }
    }

    #[test]
    fn interleaver_round_trip() {
        let v: Vec<u32> = (0..12).collect();
        let i = interleave(&v, 3, 4);
        assert_eq!(i, vec![0, 4, 8, 1, 5, 9, 2, 6, 10, 3, 7, 11]);
        assert_eq!(deinterleave(&i, 3, 4), v);
    }

    #[test]
    fn loopback_on_random_blocks() {
        let s = small_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let msg: Vec<u8> = (0..s.info_len()).map(|_| rng.random_range(0..2)).collect();
            let coded = encode(&msg, &s).unwrap();
            let out = decode(&hard_llrs(&coded), &s).unwrap();
            assert_eq!(out.bits, msg);
            assert!(!out.low_confidence);
        }
    }

    #[test]
    fn free_distance_is_ten() {
        let s = CodecSpec::standard(40);
        let min_weight = (1u32..1 << 8)
            .map(|m| {
                let msg: Vec<u8> = (0..8).map(|i| ((m >> i) & 1) as u8).collect();
                conv_encode(&msg, &s).iter().map(|&b| b as u32).sum::<u32>()
            })
            .min()
            .unwrap();
        assert_eq!(min_weight, 10);
    }

    #[test]
    fn corrects_single_flip() {
        let s = small_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let msg: Vec<u8> = (0..s.info_len()).map(|_| rng.random_range(0..2)).collect();
        let coded = encode(&msg, &s).unwrap();
        for pos in 0..coded.len() {
            let mut llr = hard_llrs(&coded);
            llr[pos] = -llr[pos];
            assert_eq!(decode(&llr, &s).unwrap().bits, msg, "flip at {pos}");
        }
    }

    #[test]
    fn zero_llrs_flagged() {
        let s = small_spec();
        let out = decode(&vec![0.0; s.block_len()], &s).unwrap();
        assert_eq!(out.bits.len(), s.info_len());
        assert!(out.low_confidence);
    }

    #[test]
    fn size_mismatch_rejected() {
        let s = small_spec();
        assert!(encode(&[0, 1], &s).is_err());
        assert!(decode(&[0.0; 3], &s).is_err());
        let mut bad = s.clone();
        bad.generators = vec![0o400];
        assert!(bad.validate().is_err());
    }

    /// BPSK-per-dimension QPSK over AWGN at a given Es/N0, returns BER.
    fn qpsk_awgn_ber(coded: bool, es_n0_db: f64, blocks: usize, seed: u64) -> f64 {
        let s = CodecSpec::standard(3332);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n0 = 10f64.powf(-es_n0_db / 10.0);
        // per real dimension: amplitude 1/sqrt(2), noise var n0/2
        let sd = (n0 / 2.0).sqrt();
        let a = std::f64::consts::FRAC_1_SQRT_2;
        let mut errors = 0usize;
        let mut total = 0usize;
        for _ in 0..blocks {
            let msg: Vec<u8> = (0..s.info_len()).map(|_| rng.random_range(0..2)).collect();
            let tx = if coded { encode(&msg, &s).unwrap() } else { msg.clone() };
            let llr: Vec<f64> = tx
                .iter()
                .map(|&b| {
                    let x = a * (1.0 - 2.0 * b as f64);
                    let z: f64 = rng.sample(rand_distr::StandardNormal);
                    2.0 * a * (x + sd * z) / (sd * sd)
                })
                .collect();
            let rx = if coded {
                decode(&llr, &s).unwrap().bits
            } else {
                llr.iter().map(|&v| (v < 0.0) as u8).collect()
            };
            errors += rx.iter().zip(&msg).filter(|(a, b)| a != b).count();
            total += msg.len();
        }
        errors as f64 / total as f64
    }

    #[test]
    fn coding_gain_exceeds_three_db() {
        // Uncoded QPSK needs Es/N0 ~ 7.3 dB for BER 1e-2; the coded link must
        // already be below 1e-2 three dB earlier.
        let uncoded = qpsk_awgn_ber(false, 7.3, 20, 1);
        assert!(uncoded > 0.007 && uncoded < 0.014, "uncoded {uncoded}");
        let coded = qpsk_awgn_ber(true, 4.3, 20, 2);
        assert!(coded < 1e-2, "coded {coded}");
    }
}
