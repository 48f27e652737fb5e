//! Human-facing preview images. Nothing reads these back.

use omniproj::geom::{EquirectSpec, PixelCoord};
use omniproj::warp::Resample;
use omniproj::{RasterImage, ValidMask};

const ACCENT: [f32; 3] = [1.0, 0.25, 0.0];
const GRID_REGULAR: [f32; 3] = [0.2, 0.6, 1.0];

fn to_rgb(img: &RasterImage) -> Vec<[f32; 3]> {
    (0..img.height())
        .flat_map(|y| (0..img.width()).map(move |x| (x, y)))
        .map(|(x, y)| {
            let p = img.pixel(x, y);
            match p.len() {
                1 | 2 => [p[0]; 3],
                _ => [p[0], p[1], p[2]],
            }
        })
        .collect()
}

fn encode(width: usize, height: usize, pixels: &[[f32; 3]]) -> Vec<u8> {
    let samples = pixels.iter().flatten().copied().collect();
    RasterImage::new(width, height, 3, samples)
        .expect("preview buffer matches its dimensions")
        .encode_png()
}

fn on_boundary(mask: &ValidMask, x: usize, y: usize) -> bool {
    let (w, h) = (mask.width(), mask.height());
    if !mask.get(x, y) {
        return false;
    }
    y == 0
        || y + 1 == h
        || !mask.get((x + w - 1) % w, y)
        || !mask.get((x + 1) % w, y)
        || !mask.get(x, y - 1)
        || !mask.get(x, y + 1)
}

/// Source (squashed to the canvas height) next to the projection, mask outline in the accent colour.
pub fn side_by_side(source: &RasterImage, equi: &RasterImage, mask: &ValidMask) -> Vec<u8> {
    let h = equi.height();
    let left = to_rgb(&source.resized(h, h));
    let right = to_rgb(equi);
    let w = h + equi.width();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        out.extend_from_slice(&left[y * h..(y + 1) * h]);
        for x in 0..equi.width() {
            out.push(if on_boundary(mask, x, y) {
                ACCENT
            } else {
                right[y * equi.width() + x]
            });
        }
    }
    encode(w, h, &out)
}

/// Kernel sample positions over a dark canvas, with the regular grid for comparison.
pub fn grid_overlay(spec: &EquirectSpec, center: PixelCoord, positions: &[PixelCoord]) -> Vec<u8> {
    let (w, h) = (spec.width(), spec.height());
    let mut px = vec![[0.1f32; 3]; w * h];
    let k = (positions.len() as f64).sqrt().round() as i64;
    let half = k / 2;
    let mut plot = |x: f64, y: f64, colour: [f32; 3]| {
        let col = (x.floor() as i64).rem_euclid(w as i64) as usize;
        let row = (y.floor().max(0.0) as usize).min(h - 1);
        px[row * w + col] = colour;
    };
    for dy in -half..=half {
        for dx in -half..=half {
            plot(center.x + dx as f64, center.y + dy as f64, GRID_REGULAR);
        }
    }
    for p in positions {
        plot(p.x, p.y, ACCENT);
    }
    encode(w, h, &px)
}
