//! Bi-static radar processing of the superimposed frame.
//!
//! Dechirping turns a path delayed by `l` samples into a tone at
//! `-beta l / (tau Fs^2)` cycles per sample. Because the sweep bandwidth
//! differs from the sample rate, the fast-time transform is evaluated on
//! exactly that beat-frequency grid, so range bin `l` is a delay of `l`
//! samples (`c / Fs` metres). Slow time is transformed with an ordinary DFT
//! and shifted so the zero-Doppler column sits at `K / 2`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rustfft::FftPlanner;

use crate::channel::{ChannelOperator, ChannelTap};
use crate::error::{Error, Result};
use crate::frame::ChirpSpec;
use crate::signal::{cis, db10, hann, Cf64, ComplexFrame, SPEED_OF_LIGHT};

/// Taper applied along both axes before the 2D transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    None,
    Hann,
}

impl Window {
    fn taper(self, n: usize) -> Vec<f64> {
        match self {
            Window::None => vec![1.0; n],
            Window::Hann => hann(n),
        }
    }
}

/// Fast-time by slow-time matrix; column `k` is chirp interval `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct CpiMatrix {
    data: Vec<Cf64>,
    pub n_fast: usize,
    pub n_slow: usize,
    pub sample_rate_hz: f64,
    pub chirp_duration_s: f64,
}

impl CpiMatrix {
    pub fn get(&self, fast: usize, slow: usize) -> Cf64 {
        self.data[slow * self.n_fast + fast]
    }

    pub fn column(&self, slow: usize) -> &[Cf64] {
        &self.data[slow * self.n_fast..(slow + 1) * self.n_fast]
    }
}

/// Range-compressed slow-time sequences, one row per range bin.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeProfiles {
    data: Vec<Cf64>,
    pub n_range: usize,
    pub n_slow: usize,
    pub chirp_duration_s: f64,
    pub window: Window,
}

impl RangeProfiles {
    pub fn slow_time(&self, range_bin: usize) -> &[Cf64] {
        &self.data[range_bin * self.n_slow..(range_bin + 1) * self.n_slow]
    }
}

/// Power map indexed by (range bin, shifted Doppler column).
#[derive(Debug, Clone, PartialEq)]
pub struct RangeDopplerMap {
    power: Vec<f64>,
    pub n_range: usize,
    pub n_doppler: usize,
    pub range_bin_m: f64,
    pub doppler_bin_hz: f64,
}

impl RangeDopplerMap {
    pub fn power(&self, range_bin: usize, column: usize) -> f64 {
        self.power[range_bin * self.n_doppler + column]
    }

    pub fn values(&self) -> &[f64] {
        &self.power
    }

    /// Signed Doppler bin shown in `column`.
    pub fn doppler_bin(&self, column: usize) -> i64 {
        column as i64 - (self.n_doppler / 2) as i64
    }

    pub fn column_of(&self, doppler_bin: i64) -> usize {
        (doppler_bin + (self.n_doppler / 2) as i64).rem_euclid(self.n_doppler as i64) as usize
    }

    pub fn median(&self) -> f64 {
        let mut v = self.power.clone();
        let mid = v.len() / 2;
        let (_, m, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
        *m
    }

    pub fn argmax(&self) -> (usize, usize) {
        let i = self
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        (i / self.n_doppler, i % self.n_doppler)
    }

    /// CSV with one row per range bin and one column per Doppler bin, in dB.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("range_bin,range_m");
        for c in 0..self.n_doppler {
            s.push_str(&format!(",doppler_{}", self.doppler_bin(c)));
        }
        s.push('\n');
        for r in 0..self.n_range {
            s.push_str(&format!("{},{:.4}", r, r as f64 * self.range_bin_m));
            for c in 0..self.n_doppler {
                let p = self.power(r, c);
                let db = if p > 0.0 { db10(p) } else { -400.0 };
                s.push_str(&format!(",{db:.3}"));
            }
            s.push('\n');
        }
        s
    }
}

/// A peak in the range-Doppler map.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Detection {
    pub delay_bin: usize,
    pub doppler_bin: i64,
    pub power: f64,
}

/// Estimated scatterer parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimate {
    pub delay_bin: usize,
    pub doppler_bin: i64,
    pub delay_s: f64,
    /// Bin-centre Doppler, `doppler_bin / (K tau_eff)`.
    pub doppler_hz: f64,
    /// Sub-bin Doppler from a slow-time periodogram search around the peak.
    pub doppler_refined_hz: f64,
    pub gain_hat: Cf64,
    pub peak_power_db: f64,
}

impl TargetEstimate {
    pub fn distance_m(&self) -> f64 {
        self.delay_s * SPEED_OF_LIGHT
    }
}

/// Multiply every chirp interval by the conjugate reference chirp.
pub fn dechirp(rx: &ComplexFrame, spec: &ChirpSpec, n_chirps: usize) -> Result<ComplexFrame> {
    let n = spec.n_samples();
    if rx.len() < n_chirps * n || n_chirps == 0 {
        return Err(Error::arg(format!(
            "frame of {} samples is shorter than {} chirps of {} samples",
            rx.len(),
            n_chirps,
            n
        )));
    }
    let reference: Vec<Cf64> = (0..n).map(|i| cis(-spec.phase_at_sample(i))).collect();
    let samples = rx.samples[..n_chirps * n]
        .chunks_exact(n)
        .flat_map(|chunk| chunk.iter().zip(&reference).map(|(y, r)| y * r))
        .collect();
    ComplexFrame::with_start(samples, rx.sample_rate_hz, rx.start_sample)
}

pub fn build_cpi(dechirped: &ComplexFrame, n_chirps: usize, chirp_len: usize) -> Result<CpiMatrix> {
    if dechirped.len() < n_chirps * chirp_len || n_chirps == 0 || chirp_len == 0 {
        return Err(Error::arg(format!(
            "{} samples cannot fill a {chirp_len} x {n_chirps} CPI",
            dechirped.len()
        )));
    }
    Ok(CpiMatrix {
        data: dechirped.samples[..n_chirps * chirp_len].to_vec(),
        n_fast: chirp_len,
        n_slow: n_chirps,
        sample_rate_hz: dechirped.sample_rate_hz,
        chirp_duration_s: chirp_len as f64 / dechirped.sample_rate_hz,
    })
}

/// Fast-time transform matched to the beat frequency of each delay sample.
pub fn range_compress(cpi: &CpiMatrix, spec: &ChirpSpec, window: Window) -> RangeProfiles {
    let n = cpi.n_fast;
    let k = cpi.n_slow;
    let taper = window.taper(n);
    // beat frequency per delay sample, cycles/sample
    let beat = spec.sweep_rate() / (cpi.sample_rate_hz * cpi.sample_rate_hz);
    let mut data = vec![Cf64::default(); n * k];
    let mut kernel = vec![Cf64::default(); n];
    for l in 0..n {
        for (i, kv) in kernel.iter_mut().enumerate() {
            // phase wrapped per product to keep the argument small
            let cycles = (beat * l as f64 * i as f64).fract();
            *kv = cis(2.0 * PI * cycles) * taper[i];
        }
        let row = &mut data[l * k..(l + 1) * k];
        for (slow, out) in row.iter_mut().enumerate() {
            *out = cpi.column(slow).iter().zip(&kernel).map(|(a, b)| a * b).sum();
        }
    }
    RangeProfiles {
        data,
        n_range: n,
        n_slow: k,
        chirp_duration_s: cpi.chirp_duration_s,
        window,
    }
}

/// Slow-time DFT of each range profile, shifted, as power.
pub fn doppler_map(profiles: &RangeProfiles, sample_rate_hz: f64) -> RangeDopplerMap {
    let k = profiles.n_slow;
    let taper = profiles.window.taper(k);
    let fft = FftPlanner::new().plan_fft_forward(k);
    let half = k / 2;
    let mut power = vec![0.0; profiles.n_range * k];
    let mut buf = vec![Cf64::default(); k];
    for r in 0..profiles.n_range {
        for ((b, z), w) in buf.iter_mut().zip(profiles.slow_time(r)).zip(&taper) {
            *b = z * w;
        }
        fft.process(&mut buf);
        for (bin, v) in buf.iter().enumerate() {
            let col = (bin + half) % k;
            power[r * k + col] = v.norm_sqr();
        }
    }
    RangeDopplerMap {
        power,
        n_range: profiles.n_range,
        n_doppler: k,
        range_bin_m: SPEED_OF_LIGHT / sample_rate_hz,
        doppler_bin_hz: 1.0 / (k as f64 * profiles.chirp_duration_s),
    }
}

pub fn range_doppler(cpi: &CpiMatrix, spec: &ChirpSpec, window: Window) -> RangeDopplerMap {
    doppler_map(&range_compress(cpi, spec, window), cpi.sample_rate_hz)
}

/// Local maxima (8-neighbourhood, circular in Doppler) above
/// `median * 10^(threshold_db/10)`, strongest first.
pub fn detect_peaks(map: &RangeDopplerMap, threshold_db: f64, max_targets: usize) -> Vec<Detection> {
    let floor = map.median() * 10f64.powf(threshold_db / 10.0);
    let nd = map.n_doppler;
    let mut found = Vec::new();
    for r in 0..map.n_range {
        for c in 0..nd {
            let v = map.power(r, c);
            if !(v > floor) {
                continue;
            }
            let mut is_peak = true;
            'nb: for dr in -1i64..=1 {
                let rr = r as i64 + dr;
                if rr < 0 || rr >= map.n_range as i64 {
                    continue;
                }
                for dc in -1i64..=1 {
                    if (dr, dc) == (0, 0) || (nd < 3 && dc != 0) {
                        continue;
                    }
                    let cc = (c as i64 + dc).rem_euclid(nd as i64) as usize;
                    if map.power(rr as usize, cc) > v {
                        is_peak = false;
                        break 'nb;
                    }
                }
            }
            if is_peak {
                found.push(Detection {
                    delay_bin: r,
                    doppler_bin: map.doppler_bin(c),
                    power: v,
                });
            }
        }
    }
    found.sort_by(|a, b| b.power.total_cmp(&a.power));
    found.truncate(max_targets);
    found
}

/// Sub-bin Doppler (Hz) maximizing the slow-time periodogram within one bin
/// of `doppler_bin`.
pub fn refine_doppler(profiles: &RangeProfiles, delay_bin: usize, doppler_bin: i64) -> f64 {
    let k = profiles.n_slow as f64;
    let taper = profiles.window.taper(profiles.n_slow);
    let z: Vec<Cf64> = profiles
        .slow_time(delay_bin)
        .iter()
        .zip(&taper)
        .map(|(a, w)| a * w)
        .collect();
    let periodogram = |f: f64| -> f64 {
        let step = cis(-2.0 * PI * f);
        let mut rot = Cf64::new(1.0, 0.0);
        let mut acc = Cf64::default();
        for v in &z {
            acc += v * rot;
            rot *= step;
        }
        acc.norm_sqr()
    };
    // coarse grid over +-1 bin, then golden-section polish
    let centre = doppler_bin as f64 / k;
    let span = 1.0 / k;
    let steps = 32;
    let grid = |i: usize| centre - span + 2.0 * span * i as f64 / steps as f64;
    let best = (0..=steps)
        .max_by(|&a, &b| periodogram(grid(a)).total_cmp(&periodogram(grid(b))))
        .unwrap_or(steps / 2);
    let h = 2.0 * span / steps as f64;
    let (mut lo, mut hi) = (grid(best) - h, grid(best) + h);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let (mut p1, mut p2) = (periodogram(x1), periodogram(x2));
    for _ in 0..40 {
        if p1 > p2 {
            hi = x2;
            x2 = x1;
            p2 = p1;
            x1 = hi - g * (hi - lo);
            p1 = periodogram(x1);
        } else {
            lo = x1;
            x1 = x2;
            p1 = p2;
            x2 = lo + g * (hi - lo);
            p2 = periodogram(x2);
        }
    }
    0.5 * (lo + hi) / profiles.chirp_duration_s
}

/// Least-squares gains of paths at `delay_bins` from the interference-free
/// first chirp.
///
/// The regressor matrix has one column per path: the transmitted chirp
/// (amplitude `sqrt(P_FMCW)`) delayed by that path's bin, sampled on rows
/// `offset..N_chirp`. Doppler within the chirp is not modelled.
pub fn estimate_gains(
    first_chirp: &[Cf64],
    delay_bins: &[usize],
    spec: &ChirpSpec,
    offset: usize,
) -> Result<Vec<Cf64>> {
    let n = spec.n_samples();
    if delay_bins.is_empty() {
        return Err(Error::arg("no detections to estimate gains for"));
    }
    if first_chirp.len() < n {
        return Err(Error::arg(format!(
            "first chirp has {} samples, expected {n}",
            first_chirp.len()
        )));
    }
    let max_delay = *delay_bins.iter().max().unwrap_or(&0);
    if offset < max_delay || offset >= n {
        return Err(Error::arg(format!(
            "LS offset {offset} must cover the largest delay bin {max_delay} and stay below {n}"
        )));
    }
    for (i, a) in delay_bins.iter().enumerate() {
        if delay_bins[..i].contains(a) {
            return Err(Error::Estimation(format!(
                "duplicate delay bin {a} makes the normal equations singular"
            )));
        }
    }
    let amp = spec.power.sqrt();
    let rows = n - offset;
    let b = DMatrix::from_fn(rows, delay_bins.len(), |r, p| {
        let t = offset + r - delay_bins[p];
        cis(spec.phase_at_sample(t)) * amp
    });
    let y = DMatrix::from_fn(rows, 1, |r, _| first_chirp[offset + r]);
    let bh = b.adjoint();
    let gram = &bh * &b;
    let rhs = &bh * y;
    let chol = gram.cholesky().ok_or_else(|| {
        Error::Estimation("normal equations are not positive definite".to_string())
    })?;
    let h = chol.solve(&rhs);
    if h.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
        return Err(Error::Estimation("non-finite gain estimate".to_string()));
    }
    Ok(h.iter().copied().collect())
}

/// Sparse operator from estimated delays, Doppler shifts and gains.
pub fn reconstruct_channel(
    estimates: &[TargetEstimate],
    frame_len: usize,
    sample_rate_hz: f64,
    use_refined_doppler: bool,
) -> ChannelOperator {
    ChannelOperator {
        taps: estimates
            .iter()
            .map(|e| ChannelTap {
                delay_samples: e.delay_bin,
                doppler_hz: if use_refined_doppler {
                    e.doppler_refined_hz
                } else {
                    e.doppler_hz
                },
                gain: e.gain_hat,
            })
            .collect(),
        frame_len,
        sample_rate_hz,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RadarParams {
    pub threshold_db: f64,
    pub max_targets: usize,
    pub ls_offset: usize,
    pub window: Window,
    pub refine_doppler: bool,
}

#[derive(Debug, Clone)]
pub struct RadarOutput {
    pub map: RangeDopplerMap,
    pub detections: Vec<Detection>,
    pub estimates: Vec<TargetEstimate>,
    /// Set when detections existed but the gain solve failed.
    pub estimation_error: Option<String>,
}

/// Full radar chain on one received frame.
pub fn process_frame(
    rx: &ComplexFrame,
    spec: &ChirpSpec,
    n_chirps: usize,
    params: &RadarParams,
) -> Result<RadarOutput> {
    let n = spec.n_samples();
    let dechirped = dechirp(rx, spec, n_chirps)?;
    let cpi = build_cpi(&dechirped, n_chirps, n)?;
    let profiles = range_compress(&cpi, spec, params.window);
    let map = doppler_map(&profiles, rx.sample_rate_hz);
    let mut detections = detect_peaks(&map, params.threshold_db, params.max_targets);
    // the LS window cannot see paths beyond the offset
    detections.retain(|d| d.delay_bin <= params.ls_offset);
    let mut estimates = Vec::new();
    let mut estimation_error = None;
    if !detections.is_empty() {
        let bins: Vec<usize> = detections.iter().map(|d| d.delay_bin).collect();
        match estimate_gains(&rx.samples[..n], &bins, spec, params.ls_offset) {
            Ok(gains) => {
                estimates = detections
                    .iter()
                    .zip(gains)
                    .map(|(d, g)| TargetEstimate {
                        delay_bin: d.delay_bin,
                        doppler_bin: d.doppler_bin,
                        delay_s: d.delay_bin as f64 / rx.sample_rate_hz,
                        doppler_hz: d.doppler_bin as f64 * map.doppler_bin_hz,
                        doppler_refined_hz: if params.refine_doppler {
                            refine_doppler(&profiles, d.delay_bin, d.doppler_bin)
                        } else {
                            d.doppler_bin as f64 * map.doppler_bin_hz
                        },
                        gain_hat: g,
                        peak_power_db: db10(d.power),
                    })
                    .collect()
            }
            Err(e) => estimation_error = Some(e.to_string()),
        }
    }
    Ok(RadarOutput {
        map,
        detections,
        estimates,
        estimation_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frame::{synth_chirp, synth_fmcw, reference_frame};

    fn chirp_spec() -> ChirpSpec {
        reference_frame(2, 0).chirp
    }

    #[test]
    fn dechirp_cancels_own_chirp() {
        let spec = chirp_spec();
        let c = synth_chirp(&spec).unwrap();
        let d = dechirp(&c, &spec, 1).unwrap();
        for s in &d.samples {
            assert!((s - Cf64::new(1.0, 0.0)).norm() < 1e-12);
        }
        let zeros = ComplexFrame::new(vec![Cf64::default(); 295], spec.sample_rate_hz).unwrap();
        assert!(dechirp(&zeros, &spec, 1).unwrap().samples.iter().all(|s| s.norm() == 0.0));
        assert!(dechirp(&c, &spec, 2).is_err());
    }

    #[test]
    fn delayed_chirp_peaks_at_its_delay_bin() {
        let spec = chirp_spec();
        let c = synth_chirp(&spec).unwrap();
        for l in [0usize, 6, 37, 74] {
            let mut s = vec![Cf64::default(); 295];
            s[l..].copy_from_slice(&c.samples[..295 - l]);
            let rx = ComplexFrame::new(s, spec.sample_rate_hz).unwrap();
            let cpi = build_cpi(&dechirp(&rx, &spec, 1).unwrap(), 1, 295).unwrap();
            let map = range_doppler(&cpi, &spec, Window::None);
            assert_eq!(map.argmax(), (l, 0), "delay {l}");
        }
    }

    #[test]
    fn cpi_indexing() {
        let s: Vec<Cf64> = (0..12).map(|i| Cf64::new(i as f64, 0.0)).collect();
        let f = ComplexFrame::new(s, 1.0).unwrap();
        let cpi = build_cpi(&f, 3, 4).unwrap();
        assert_eq!(cpi.get(1, 2), Cf64::new(9.0, 0.0));
        assert_eq!(cpi.column(0), &f.samples[..4]);
        let one = build_cpi(&f, 1, 4).unwrap();
        assert_eq!(one.n_slow, 1);
        assert!(build_cpi(&f, 4, 4).is_err());
    }

    #[test]
    fn zero_input_gives_zero_map() {
        let spec = chirp_spec();
        let f = ComplexFrame::new(vec![Cf64::default(); 295 * 4], spec.sample_rate_hz).unwrap();
        let cpi = build_cpi(&f, 4, 295).unwrap();
        let map = range_doppler(&cpi, &spec, Window::Hann);
        assert!(map.values().iter().all(|&v| v == 0.0));
        assert!(detect_peaks(&map, 12.0, 3).is_empty());
    }

    #[test]
    fn map_calibration() {
        let mut frame = reference_frame(64, 0);
        frame.ofdm.n_symbols = 0;
        let tx = synth_fmcw(&frame).unwrap();
        let cpi = build_cpi(&dechirp(&tx, &frame.chirp, 64).unwrap(), 64, 295).unwrap();
        let map = range_doppler(&cpi, &frame.chirp, Window::None);
        assert!((map.range_bin_m - 2.4397).abs() < 1e-3);
        assert!((map.doppler_bin_hz - 1.0 / (64.0 * 295.0 / 122.88e6)).abs() < 1e-9);
        assert_eq!(map.doppler_bin(32), 0);
        assert_eq!(map.column_of(-1), 31);
        assert_eq!(map.argmax(), (0, 32));
    }

    #[test]
    fn detect_single_cell_and_flat_map() {
        let mut map = RangeDopplerMap {
            power: vec![0.0; 20],
            n_range: 5,
            n_doppler: 4,
            range_bin_m: 1.0,
            doppler_bin_hz: 1.0,
        };
        map.power[2 * 4 + 3] = 4.0;
        let d = detect_peaks(&map, 12.0, 5);
        assert_eq!(d.len(), 1);
        assert_eq!((d[0].delay_bin, d[0].doppler_bin), (2, 1));
        map.power.iter_mut().for_each(|v| *v = 1.0);
        assert!(detect_peaks(&map, 3.0, 5).is_empty());
    }

    #[test]
    fn detections_sorted_and_truncated() {
        let mut map = RangeDopplerMap {
            power: vec![0.01; 100],
            n_range: 10,
            n_doppler: 10,
            range_bin_m: 1.0,
            doppler_bin_hz: 1.0,
        };
        map.power[11] = 5.0;
        map.power[55] = 9.0;
        map.power[88] = 7.0;
        let d = detect_peaks(&map, 3.0, 2);
        assert_eq!(d.len(), 2);
        assert_eq!(d[0].delay_bin, 5);
        assert_eq!(d[1].delay_bin, 8);
    }

    fn delayed_sum(spec: &ChirpSpec, paths: &[(usize, Cf64)]) -> Vec<Cf64> {
        let c = synth_chirp(spec).unwrap();
        let n = c.len();
        let mut y = vec![Cf64::default(); n];
        for &(l, g) in paths {
            for i in l..n {
                y[i] += g * c.samples[i - l];
            }
        }
        y
    }

    #[test]
    fn ls_recovers_noiseless_gains() {
        let spec = chirp_spec();
        let g = Cf64::new(0.4, -0.7);
        let y = delayed_sum(&spec, &[(37, g)]);
        let h = estimate_gains(&y, &[37], &spec, 144).unwrap();
        assert!((h[0] - g).norm() < 1e-8);
    }

    #[test]
    fn ls_two_paths_matches_cramer_solution() {
        let spec = chirp_spec();
        let (g1, g2) = (Cf64::new(0.9, 0.1), Cf64::new(-0.2, 0.35));
        let y = delayed_sum(&spec, &[(6, g1), (74, g2)]);
        let h = estimate_gains(&y, &[6, 74], &spec, 144).unwrap();
        // independent 2x2 normal-equation solve
        let c = synth_chirp(&spec).unwrap().samples;
        let (mut a11, mut a12, mut a22) = (Cf64::default(), Cf64::default(), Cf64::default());
        let (mut r1, mut r2) = (Cf64::default(), Cf64::default());
        for n in 144..295 {
            let b1 = c[n - 6];
            let b2 = c[n - 74];
            a11 += b1.conj() * b1;
            a12 += b1.conj() * b2;
            a22 += b2.conj() * b2;
            r1 += b1.conj() * y[n];
            r2 += b2.conj() * y[n];
        }
        let det = a11 * a22 - a12 * a12.conj();
        let x1 = (a22 * r1 - a12 * r2) / det;
        let x2 = (a11 * r2 - a12.conj() * r1) / det;
        assert!((h[0] - x1).norm() < 1e-8 && (h[0] - g1).norm() < 1e-8);
        assert!((h[1] - x2).norm() < 1e-8 && (h[1] - g2).norm() < 1e-8);
    }

    #[test]
    fn ls_flags_duplicate_delays() {
        let spec = chirp_spec();
        let y = delayed_sum(&spec, &[(10, Cf64::new(1.0, 0.0))]);
        assert!(matches!(
            estimate_gains(&y, &[10, 10], &spec, 144),
            Err(Error::Estimation(_))
        ));
        assert!(estimate_gains(&y, &[200], &spec, 144).is_err());
    }

    #[test]
    fn refine_recovers_off_grid_doppler() {
        let k = 64;
        let tau = 295.0 / 122.88e6;
        let f_true = 2054.8;
        let data: Vec<Cf64> = (0..k)
            .map(|i| cis(2.0 * PI * f_true * tau * i as f64) * 3.0)
            .collect();
        let profiles = RangeProfiles {
            data,
            n_range: 1,
            n_slow: k,
            chirp_duration_s: tau,
            window: Window::None,
        };
        let est = refine_doppler(&profiles, 0, 0);
        assert!((est - f_true).abs() < 1.0, "{est}");
    }

    #[test]
    fn reconstruct_static_unit_path_is_identity() {
        let e = TargetEstimate {
            delay_bin: 0,
            doppler_bin: 0,
            delay_s: 0.0,
            doppler_hz: 0.0,
            doppler_refined_hz: 0.0,
            gain_hat: Cf64::new(1.0, 0.0),
            peak_power_db: 0.0,
        };
        let op = reconstruct_channel(&[e], 16, 1.0, true);
        let x = ComplexFrame::new((0..16).map(|i| Cf64::new(i as f64, 1.0)).collect(), 1.0).unwrap();
        assert_eq!(op.apply(&x), x.samples);
    }
}
