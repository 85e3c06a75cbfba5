//! Procedurally rendered handwritten-style digits, 28×28 grayscale.
//!
//! Each digit is a set of stroke polylines in the unit square. Every sample
//! gets a random affine warp (rotation, slant, scale, offset), control-point
//! jitter and stroke width, scaled by a per-sample "sloppiness" drawn from a
//! skewed distribution so that most samples are neat and a minority are
//! heavily distorted. Pixels are rounded to bytes like the IDX files, so the
//! output goes through the same scaling path as real MNIST.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{ImageSet, ImageShape};
use crate::{rng, Result};

type Stroke = Vec<(f64, f64)>;

fn arc(cx: f64, cy: f64, rx: f64, ry: f64, from_deg: f64, to_deg: f64) -> Stroke {
    let n = 18;
    (0..=n)
        .map(|i| {
            let t = (from_deg + (to_deg - from_deg) * i as f64 / n as f64) * PI / 180.0;
            (cx + rx * t.cos(), cy + ry * t.sin())
        })
        .collect()
}

fn template(digit: u8) -> Vec<Stroke> {
    match digit {
        0 => vec![arc(0.5, 0.5, 0.21, 0.33, 0.0, 360.0)],
        1 => vec![vec![(0.38, 0.26), (0.52, 0.12), (0.52, 0.88)]],
        2 => {
            let mut s = arc(0.5, 0.34, 0.2, 0.2, 180.0, 360.0 + 40.0);
            s.extend([(0.27, 0.87), (0.76, 0.87)]);
            vec![s]
        }
        3 => vec![
            arc(0.47, 0.31, 0.19, 0.18, 200.0, 450.0),
            arc(0.47, 0.68, 0.21, 0.2, -90.0, 150.0),
        ],
        4 => vec![vec![(0.62, 0.88), (0.62, 0.12), (0.24, 0.64), (0.78, 0.64)]],
        5 => {
            let mut s = vec![(0.72, 0.12), (0.36, 0.12), (0.33, 0.46)];
            s.extend(arc(0.5, 0.64, 0.22, 0.22, -125.0, 150.0));
            vec![s]
        }
        6 => vec![
            vec![(0.68, 0.13), (0.46, 0.24), (0.34, 0.46), (0.31, 0.68)],
            arc(0.5, 0.68, 0.19, 0.19, 0.0, 360.0),
        ],
        7 => vec![vec![(0.24, 0.13), (0.76, 0.13), (0.42, 0.88)]],
        8 => vec![
            arc(0.5, 0.3, 0.16, 0.17, 0.0, 360.0),
            arc(0.5, 0.69, 0.2, 0.2, 0.0, 360.0),
        ],
        _ => vec![
            arc(0.5, 0.32, 0.18, 0.19, 0.0, 360.0),
            vec![(0.68, 0.32), (0.62, 0.88)],
        ],
    }
}

fn segment_distance(p: (f64, f64), a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let len2 = dx * dx + dy * dy;
    let t = if len2 > 0.0 {
        (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let (qx, qy) = (a.0 + t * dx - p.0, a.1 + t * dy - p.1);
    (qx * qx + qy * qy).sqrt()
}

fn render<R: Rng>(digit: u8, rng: &mut R) -> Vec<f64> {
    const SIZE: usize = 28;
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    // Most samples neat, a tail of sloppy ones.
    let sloppy = rng.random::<f64>().powi(3);
    let spread = 0.5 + 1.5 * sloppy;

    let angle = unit.sample(rng) * 0.12 * spread;
    let slant = unit.sample(rng) * 0.12 * spread;
    let scale = 0.9 + unit.sample(rng) * 0.05 * spread;
    let aspect = 1.0 + unit.sample(rng) * 0.06 * spread;
    let (ox, oy) = (unit.sample(rng) * 0.03 * spread, unit.sample(rng) * 0.03 * spread);
    let width = 1.1 + rng.random::<f64>() * 0.7 + sloppy * 0.8;
    let jitter = 0.012 + 0.03 * sloppy;

    let (sin, cos) = angle.sin_cos();
    let strokes: Vec<Stroke> = template(digit)
        .into_iter()
        .map(|stroke| {
            stroke
                .into_iter()
                .map(|(x, y)| {
                    let x = x + unit.sample(rng) * jitter;
                    let y = y + unit.sample(rng) * jitter;
                    let (cx, cy) = ((x - 0.5) * scale * aspect, (y - 0.5) * scale);
                    let cx = cx + slant * cy;
                    let rx = cos * cx - sin * cy + 0.5 + ox;
                    let ry = sin * cx + cos * cy + 0.5 + oy;
                    // 20x20 box centred in 28x28, as in MNIST
                    (4.0 + rx * 20.0, 4.0 + ry * 20.0)
                })
                .collect()
        })
        .collect();

    let mut pixels = Vec::with_capacity(SIZE * SIZE);
    for row in 0..SIZE {
        for col in 0..SIZE {
            let p = (col as f64 + 0.5, row as f64 + 0.5);
            let d = strokes
                .iter()
                .flat_map(|s| s.windows(2).map(|w| segment_distance(p, w[0], w[1])))
                .fold(f64::INFINITY, f64::min);
            let ink = 1.0 / (1.0 + ((d - width) / 0.45).exp());
            pixels.push((ink * 255.0).round());
        }
    }
    pixels
}

/// `per_class` images of every digit 0–9, interleaved by class. Pixel values
/// are bytes (0..=255) stored as `f64`.
pub fn digits(per_class: usize, seed: u64) -> Result<ImageSet> {
    let n = per_class * 10;
    let images = crate::par::map_range(n, |i| {
        let digit = (i % 10) as u8;
        let mut rng = rng::stream(rng::derive(seed, "synthetic-digits") ^ i as u64, "sample");
        render(digit, &mut rng)
    });
    ImageSet::new(
        ImageShape::MNIST,
        images.concat(),
        (0..n).map(|i| (i % 10) as u8).collect(),
    )
}
