//! Deterministic synthetic scenes for exercising the projection pipeline end to end.
//!
//! Everything here is seeded, so two calls with the same arguments produce identical
//! rasters and identical files.

use std::path::{Path, PathBuf};

use omniproj::{LabelMap, RasterImage, Result, IGNORE_ID};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const ROAD: u8 = 0;
pub const BUILDING: u8 = 1;
pub const VEGETATION: u8 = 2;
pub const SKY: u8 = 3;
pub const PEDESTRIAN: u8 = 4;
pub const CAR: u8 = 5;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A street-like layout: sky on top, buildings on both sides, road below, a car and a
/// pedestrian as small boxes. Region boundaries move with `seed`.
pub fn street_labels(width: usize, height: usize, seed: u64) -> LabelMap {
    let mut r = rng(seed);
    let horizon = height * r.random_range(30..45) / 100;
    let road_top = height * r.random_range(55..70) / 100;
    let left = width * r.random_range(15..30) / 100;
    let right = width * r.random_range(70..85) / 100;
    let car = (
        width * r.random_range(35..55) / 100,
        road_top + (height - road_top) / 4,
    );
    let car_size = (width / 5, (height - road_top) / 3);
    let ped = (
        width * r.random_range(60..68) / 100,
        road_top.saturating_sub(height / 10),
    );
    let ped_size = (width / 24 + 1, height / 6);
    let mut ids = Vec::with_capacity(width * height);
    for y in 0..height {
        for x in 0..width {
            let inside = |(x0, y0): (usize, usize), (w, h): (usize, usize)| {
                x >= x0 && x < x0 + w && y >= y0 && y < y0 + h
            };
            let id = if inside(car, car_size) {
                CAR
            } else if inside(ped, ped_size) {
                PEDESTRIAN
            } else if y >= road_top {
                ROAD
            } else if x < left || x >= right {
                if y < horizon / 2 {
                    SKY
                } else {
                    BUILDING
                }
            } else if y < horizon {
                SKY
            } else {
                VEGETATION
            };
            ids.push(id);
        }
    }
    LabelMap::new(width, height, ids).expect("sized to fit")
}

/// Colours each class with a flat tone plus seeded per-pixel texture.
pub fn render_labels(labels: &LabelMap, seed: u64) -> RasterImage {
    const TONES: [[f32; 3]; 6] = [
        [0.35, 0.35, 0.38],
        [0.60, 0.45, 0.35],
        [0.20, 0.55, 0.20],
        [0.55, 0.75, 0.95],
        [0.85, 0.20, 0.25],
        [0.15, 0.25, 0.70],
    ];
    let mut r = rng(seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut samples = Vec::with_capacity(labels.ids().len() * 3);
    for &id in labels.ids() {
        let tone = TONES.get(id as usize).copied().unwrap_or([0.0; 3]);
        let jitter: f32 = r.random_range(-0.08..0.08);
        samples.extend(tone.iter().map(|c| (c + jitter).clamp(0.0, 1.0)));
    }
    RasterImage::new(labels.width(), labels.height(), 3, samples).expect("sized to fit")
}

/// Uniformly random ids in `0..classes` with roughly `ignore_share` of pixels set to ignore.
pub fn random_labels(
    width: usize,
    height: usize,
    classes: u8,
    ignore_share: f64,
    r: &mut impl Rng,
) -> LabelMap {
    let ids = (0..width * height)
        .map(|_| {
            if r.random_bool(ignore_share) {
                IGNORE_ID
            } else {
                r.random_range(0..classes)
            }
        })
        .collect();
    LabelMap::new(width, height, ids).expect("sized to fit")
}

/// Writes `count` pairs `scene_NNNN.png` / `scene_NNNN_labels.png` into `dir` and
/// returns the image paths.
pub fn write_pairs(
    dir: &Path,
    count: usize,
    width: usize,
    height: usize,
    seed: u64,
) -> Result<Vec<PathBuf>> {
    (0..count)
        .map(|k| {
            let s = seed.wrapping_mul(1_000_003).wrapping_add(k as u64);
            let labels = street_labels(width, height, s);
            let image = dir.join(format!("scene_{k:04}.png"));
            render_labels(&labels, s).save_png(&image)?;
            labels.save_png(&dir.join(format!("scene_{k:04}_labels.png")))?;
            Ok(image)
        })
        .collect()
}
