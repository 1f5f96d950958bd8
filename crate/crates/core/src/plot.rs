//! Minimal PNG rendering for quick looks at maps and sweep curves.

use image::{Rgb, RgbImage};

use crate::radar::RangeDopplerMap;

const DYNAMIC_RANGE_DB: f64 = 40.0;

fn heat(t: f64) -> Rgb<u8> {
    // dark blue -> cyan -> yellow -> white
    let t = t.clamp(0.0, 1.0);
    let stops = [
        (0.0, [10.0, 10.0, 60.0]),
        (0.35, [20.0, 150.0, 200.0]),
        (0.7, [240.0, 220.0, 40.0]),
        (1.0, [255.0, 255.0, 255.0]),
    ];
    for w in stops.windows(2) {
        let ((t0, c0), (t1, c1)) = (w[0], w[1]);
        if t <= t1 {
            let a = (t - t0) / (t1 - t0);
            let mix = |i: usize| (c0[i] + a * (c1[i] - c0[i])) as u8;
            return Rgb([mix(0), mix(1), mix(2)]);
        }
    }
    Rgb([255, 255, 255])
}

/// Range along x, Doppler along y (positive up), each cell `cell` pixels.
pub fn render_map(map: &RangeDopplerMap, max_range_bin: usize, cell: u32) -> RgbImage {
    let nr = max_range_bin.min(map.n_range).max(1);
    let nd = map.n_doppler;
    let peak = map.values().iter().cloned().fold(f64::MIN_POSITIVE, f64::max);
    let top = 10.0 * peak.log10();
    let mut img = RgbImage::new(nr as u32 * cell, nd as u32 * cell);
    for r in 0..nr {
        for c in 0..nd {
            let db = 10.0 * map.power(r, c).max(1e-300).log10();
            let px = heat(1.0 - (top - db) / DYNAMIC_RANGE_DB);
            let y0 = (nd - 1 - c) as u32 * cell;
            for dx in 0..cell {
                for dy in 0..cell {
                    img.put_pixel(r as u32 * cell + dx, y0 + dy, px);
                }
            }
        }
    }
    img
}

pub struct Series<'a> {
    pub y: &'a [f64],
    pub color: [u8; 3],
}

/// Line plot of several series over a shared x grid. With `log_y`,
/// non-positive values are skipped.
pub fn render_curves(x: &[f64], series: &[Series], log_y: bool, width: u32, height: u32) -> RgbImage {
    let mut img = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let margin = 20.0;
    let map_y = |v: f64| if log_y { v.log10() } else { v };
    let ys: Vec<f64> = series
        .iter()
        .flat_map(|s| s.y.iter().copied())
        .filter(|v| v.is_finite() && (!log_y || *v > 0.0))
        .map(map_y)
        .collect();
    if x.len() < 2 || ys.is_empty() {
        return img;
    }
    let (x0, x1) = (x[0], x[x.len() - 1]);
    let mut y0 = ys.iter().cloned().fold(f64::INFINITY, f64::min);
    let mut y1 = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if log_y {
        y0 = y0.floor();
        y1 = y1.ceil();
    }
    if y1 - y0 < 1e-12 {
        y1 = y0 + 1.0;
    }
    let (w, h) = (width as f64 - 2.0 * margin, height as f64 - 2.0 * margin);
    let to_px = |xv: f64, yv: f64| {
        (
            margin + (xv - x0) / (x1 - x0) * w,
            margin + (1.0 - (yv - y0) / (y1 - y0)) * h,
        )
    };
    let grey = Rgb([200, 200, 200]);
    if log_y {
        let mut d = y0;
        while d <= y1 {
            let (_, py) = to_px(x0, d);
            for px in margin as u32..(margin + w) as u32 {
                img.put_pixel(px, py.round() as u32, grey);
            }
            d += 1.0;
        }
    }
    for px in margin as u32..=(margin + w) as u32 {
        img.put_pixel(px, (margin + h) as u32, Rgb([0, 0, 0]));
    }
    for py in margin as u32..=(margin + h) as u32 {
        img.put_pixel(margin as u32, py, Rgb([0, 0, 0]));
    }
    for s in series {
        let pts: Vec<(f64, f64)> = x
            .iter()
            .zip(s.y)
            .filter(|(_, v)| v.is_finite() && (!log_y || **v > 0.0))
            .map(|(&xv, &v)| to_px(xv, map_y(v)))
            .collect();
        for seg in pts.windows(2) {
            draw_line(&mut img, seg[0], seg[1], Rgb(s.color));
        }
        for &(px, py) in &pts {
            for d in -2i32..=2 {
                put(&mut img, px as i32 + d, py as i32, Rgb(s.color));
                put(&mut img, px as i32, py as i32 + d, Rgb(s.color));
            }
        }
    }
    img
}

fn put(img: &mut RgbImage, x: i32, y: i32, c: Rgb<u8>) {
    if x >= 0 && y >= 0 && (x as u32) < img.width() && (y as u32) < img.height() {
        img.put_pixel(x as u32, y as u32, c);
    }
}

fn draw_line(img: &mut RgbImage, a: (f64, f64), b: (f64, f64), c: Rgb<u8>) {
    let steps = ((b.0 - a.0).abs().max((b.1 - a.1).abs()).ceil() as usize).max(1);
    for i in 0..=steps {
        let t = i as f64 / steps as f64;
        put(img, (a.0 + t * (b.0 - a.0)).round() as i32, (a.1 + t * (b.1 - a.1)).round() as i32, c);
    }
}

/// PNG bytes of an image.
pub fn encode_png(img: &RgbImage) -> Vec<u8> {
    let mut buf = std::io::Cursor::new(Vec::new());
    img.write_to(&mut buf, image::ImageFormat::Png)
        .expect("in-memory PNG encoding");
    buf.into_inner()
}
