//! Gray-coded square QAM constellations.
//!
//! A symbol carries `2m` bits: the first `m` select the in-phase level and
//! the last `m` the quadrature level. Each axis uses the reflected Gray PAM
//! `v = (1-2c0) * (2^(m-1) - (1-2c1) * (2^(m-2) - ...))`, so bit pair
//! `(b1 b0)` of QPSK maps to `((1-2 b1) + j(1-2 b0)) / sqrt(2)`.

use crate::error::{Error, Result};
use crate::signal::Cf64;

#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    order: usize,
    bits_per_symbol: usize,
    /// Indexed by the symbol's bit label, MSB first.
    points: Vec<Cf64>,
}

impl Constellation {
    pub fn new(order: usize) -> Result<Self> {
        let bits_per_symbol = match order {
            4 => 2,
            16 => 4,
            64 => 6,
            _ => {
                return Err(Error::config(format!(
                    "QAM order must be one of 4, 16, 64, got {order}"
                )))
            }
        };
        let per_axis = bits_per_symbol / 2;
        let levels = 1usize << per_axis;
        let norm = (2.0 * (levels * levels - 1) as f64 / 3.0).sqrt();
        let points = (0..order)
            .map(|label| {
                let bits: Vec<u8> = (0..bits_per_symbol)
                    .map(|i| ((label >> (bits_per_symbol - 1 - i)) & 1) as u8)
                    .collect();
                let re = gray_pam(&bits[..per_axis]);
                let im = gray_pam(&bits[per_axis..]);
                Cf64::new(re, im) / norm
            })
            .collect();
        Ok(Self {
            order,
            bits_per_symbol,
            points,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        self.bits_per_symbol
    }

    pub fn points(&self) -> &[Cf64] {
        &self.points
    }

    pub fn map(&self, bits: &[u8]) -> Result<Vec<Cf64>> {
        if bits.len() % self.bits_per_symbol != 0 {
            return Err(Error::arg(format!(
                "{} bits is not a multiple of {} bits per symbol",
                bits.len(),
                self.bits_per_symbol
            )));
        }
        Ok(bits
            .chunks_exact(self.bits_per_symbol)
            .map(|chunk| {
                let label = chunk.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
                self.points[label]
            })
            .collect())
    }

    /// Max-log LLRs `ln P(b=0)/P(b=1)` for one equalized symbol whose
    /// effective noise variance is `noise_var`. Appends to `out`.
    pub fn llrs_into(&self, y: Cf64, noise_var: f64, out: &mut Vec<f64>) {
        let dist: Vec<f64> = self.points.iter().map(|p| (y - p).norm_sqr()).collect();
        for bit in 0..self.bits_per_symbol {
            let mask = 1usize << (self.bits_per_symbol - 1 - bit);
            let mut d0 = f64::INFINITY;
            let mut d1 = f64::INFINITY;
            for (label, &d) in dist.iter().enumerate() {
                if label & mask == 0 {
                    d0 = d0.min(d);
                } else {
                    d1 = d1.min(d);
                }
            }
            let llr = (d1 - d0) / noise_var;
            out.push(if llr.is_finite() { llr } else { 0.0 });
        }
    }

    /// Nearest-point hard decision, returned as bits.
    pub fn hard_bits_into(&self, y: Cf64, out: &mut Vec<u8>) {
        let label = self
            .points
            .iter()
            .enumerate()
            .min_by(|a, b| (y - a.1).norm_sqr().total_cmp(&(y - b.1).norm_sqr()))
            .map(|(i, _)| i)
            .unwrap_or(0);
        for bit in 0..self.bits_per_symbol {
            out.push(((label >> (self.bits_per_symbol - 1 - bit)) & 1) as u8);
        }
    }
}

fn gray_pam(bits: &[u8]) -> f64 {
    let m = bits.len();
    let mut v = 0.0;
    for (i, &b) in bits.iter().enumerate().rev() {
        let sign = 1.0 - 2.0 * b as f64;
        let half = (1usize << (m - 1 - i)) as f64;
        v = if i == m - 1 { sign } else { sign * (half - v) };
    }
    v
}

/// Map a bit sequence onto Gray-coded unit-energy QAM symbols.
pub fn map_qam(bits: &[u8], order: usize) -> Result<Vec<Cf64>> {
    Constellation::new(order)?.map(bits)
}
