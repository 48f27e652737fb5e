//! Pixel payloads and their 8-bit PNG encoding.

use std::io::Cursor;
use std::path::Path;

use image::{DynamicImage, GrayImage, ImageBuffer, ImageFormat, Luma};

use crate::error::{Error, Result};

/// Label value reserved for "outside the projected region / unlabeled".
pub const IGNORE_ID: u8 = 255;

/// Continuous-valued image with 1–4 interleaved channels, samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    channels: usize,
    samples: Vec<f32>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, channels: usize, samples: Vec<f32>) -> Result<Self> {
        if !(1..=4).contains(&channels) {
            return Err(Error::domain(format!(
                "unsupported channel count {channels}"
            )));
        }
        let expected = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(channels))
            .ok_or_else(|| Error::domain("image dimensions overflow"))?;
        if samples.len() != expected {
            return Err(Error::domain(format!(
                "{} samples for a {width}x{height}x{channels} image",
                samples.len()
            )));
        }
        if let Some(bad) = samples.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::domain(format!("sample {bad} outside [0, 1]")));
        }
        Ok(RasterImage {
            width,
            height,
            channels,
            samples,
        })
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Result<Self> {
        let len = width
            .checked_mul(height)
            .and_then(|p| p.checked_mul(channels))
            .ok_or_else(|| Error::domain("image dimensions overflow"))?;
        Self::new(width, height, channels, vec![value; len])
    }

    /// All-zero image; internal callers guarantee sane dimensions.
    pub(crate) fn zeros(width: usize, height: usize, channels: usize) -> Self {
        RasterImage {
            width,
            height,
            channels,
            samples: vec![0.0; width * height * channels],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub(crate) fn samples_mut(&mut self) -> &mut [f32] {
        &mut self.samples
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = (y * self.width + x) * self.channels;
        &self.samples[i..i + self.channels]
    }

    pub(crate) fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = (y * self.width + x) * self.channels;
        &mut self.samples[i..i + self.channels]
    }

    pub fn from_dynamic(img: DynamicImage) -> Self {
        let (width, height) = (img.width() as usize, img.height() as usize);
        let (channels, bytes) = match img {
            DynamicImage::ImageLuma8(b) => (1, b.into_raw()),
            DynamicImage::ImageLumaA8(b) => (2, b.into_raw()),
            DynamicImage::ImageRgb8(b) => (3, b.into_raw()),
            DynamicImage::ImageRgba8(b) => (4, b.into_raw()),
            other if other.color().has_alpha() => (4, other.to_rgba8().into_raw()),
            other => (3, other.to_rgb8().into_raw()),
        };
        RasterImage {
            width,
            height,
            channels,
            samples: bytes.iter().map(|&b| b as f32 / 255.0).collect(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        self.samples
            .iter()
            .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
            .collect()
    }

    pub fn to_dynamic(&self) -> DynamicImage {
        let (w, h) = (self.width as u32, self.height as u32);
        let bytes = self.to_bytes();
        // buffer sizes match by construction
        match self.channels {
            1 => DynamicImage::ImageLuma8(ImageBuffer::from_raw(w, h, bytes).unwrap()),
            2 => DynamicImage::ImageLumaA8(ImageBuffer::from_raw(w, h, bytes).unwrap()),
            3 => DynamicImage::ImageRgb8(ImageBuffer::from_raw(w, h, bytes).unwrap()),
            _ => DynamicImage::ImageRgba8(ImageBuffer::from_raw(w, h, bytes).unwrap()),
        }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        Ok(Self::from_dynamic(open_image(path)?))
    }

    pub fn encode_png(&self) -> Vec<u8> {
        encode(&self.to_dynamic())
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode_png())
    }
}

/// Per-pixel class identifiers.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelMap {
    width: usize,
    height: usize,
    ids: Vec<u8>,
    ignore_id: u8,
}

impl LabelMap {
    pub fn new(width: usize, height: usize, ids: Vec<u8>) -> Result<Self> {
        if width.checked_mul(height) != Some(ids.len()) {
            return Err(Error::domain(format!(
                "{} ids for a {width}x{height} label map",
                ids.len()
            )));
        }
        Ok(LabelMap {
            width,
            height,
            ids,
            ignore_id: IGNORE_ID,
        })
    }

    pub fn filled(width: usize, height: usize, id: u8) -> Self {
        LabelMap {
            width,
            height,
            ids: vec![id; width * height],
            ignore_id: IGNORE_ID,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn ids(&self) -> &[u8] {
        &self.ids
    }

    pub(crate) fn ids_mut(&mut self) -> &mut [u8] {
        &mut self.ids
    }

    pub fn ignore_id(&self) -> u8 {
        self.ignore_id
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.ids[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, id: u8) {
        self.ids[y * self.width + x] = id;
    }

    /// Sorted distinct ids present, including the ignore id if any pixel carries it.
    pub fn distinct_ids(&self) -> Vec<u8> {
        let mut seen = [false; 256];
        for &id in &self.ids {
            seen[id as usize] = true;
        }
        (0..=255u8).filter(|&i| seen[i as usize]).collect()
    }

    /// Rewrites every id through `table`.
    pub fn remap(&mut self, table: &[u8; 256]) {
        for id in &mut self.ids {
            *id = table[*id as usize];
        }
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        match open_image(path)? {
            DynamicImage::ImageLuma8(buf) => {
                let (w, h) = (buf.width() as usize, buf.height() as usize);
                Self::new(w, h, buf.into_raw())
            }
            other => Err(Error::domain(format!(
                "label map {} must be 8-bit single-channel, found {:?}",
                path.display(),
                other.color()
            ))),
        }
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let buf: GrayImage =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, self.ids.clone()).unwrap();
        encode(&DynamicImage::ImageLuma8(buf))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode_png())
    }
}

/// Per-pixel coverage flags of a projected tangent plane.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl ValidMask {
    pub fn filled(width: usize, height: usize, value: bool) -> Self {
        ValidMask {
            width,
            height,
            bits: vec![value; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        if width.checked_mul(height) != Some(bits.len()) {
            return Err(Error::domain(format!(
                "{} bits for a {width}x{height} mask",
                bits.len()
            )));
        }
        Ok(ValidMask {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn row(&self, y: usize) -> &[bool] {
        &self.bits[y * self.width..(y + 1) * self.width]
    }

    pub fn row_mut(&mut self, y: usize) -> &mut [bool] {
        &mut self.bits[y * self.width..(y + 1) * self.width]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    /// Fraction of set pixels.
    pub fn coverage(&self) -> f64 {
        if self.bits.is_empty() {
            0.0
        } else {
            self.count() as f64 / self.bits.len() as f64
        }
    }

    /// First and last rows containing a set pixel.
    pub fn row_range(&self) -> Option<(usize, usize)> {
        let first = (0..self.height).find(|&y| self.row(y).contains(&true))?;
        let last = (0..self.height)
            .rev()
            .find(|&y| self.row(y).contains(&true))?;
        Some((first, last))
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let gray = open_image(path)?.to_luma8();
        let (w, h) = (gray.width() as usize, gray.height() as usize);
        Self::from_bits(w, h, gray.into_raw().into_iter().map(|b| b != 0).collect())
    }

    pub fn encode_png(&self) -> Vec<u8> {
        let bytes = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        let buf: ImageBuffer<Luma<u8>, Vec<u8>> =
            ImageBuffer::from_raw(self.width as u32, self.height as u32, bytes).unwrap();
        encode(&DynamicImage::ImageLuma8(buf))
    }

    pub fn save_png(&self, path: &Path) -> Result<()> {
        write_file(path, &self.encode_png())
    }
}

fn open_image(path: &Path) -> Result<DynamicImage> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    image::load_from_memory_with_format(&bytes, ImageFormat::Png).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

fn encode(img: &DynamicImage) -> Vec<u8> {
    let mut out = Cursor::new(Vec::new());
    // encoding into memory cannot fail for 8-bit buffers
    img.write_to(&mut out, ImageFormat::Png)
        .expect("PNG encoding of an in-memory 8-bit buffer");
    out.into_inner()
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn image_validation() {
        assert!(RasterImage::new(2, 2, 5, vec![0.0; 20]).is_err());
        assert!(RasterImage::new(2, 2, 1, vec![0.0; 3]).is_err());
        assert!(RasterImage::new(1, 1, 1, vec![1.5]).is_err());
        assert!(RasterImage::new(1, 1, 1, vec![f32::NAN]).is_err());
    }

    #[test]
    fn png_round_trip_is_lossless_for_8bit_values() {
        let dir = tempfile::tempdir().unwrap();
        let samples: Vec<f32> = (0..4 * 3 * 3)
            .map(|i| (i * 7 % 256) as f32 / 255.0)
            .collect();
        let img = RasterImage::new(4, 3, 3, samples).unwrap();
        let path = dir.path().join("a/b/img.png");
        img.save_png(&path).unwrap();
        assert_eq!(RasterImage::load_png(&path).unwrap(), img);

        let labels = LabelMap::new(3, 2, vec![0, 1, 2, 5, 255, 3]).unwrap();
        let lpath = dir.path().join("l.png");
        labels.save_png(&lpath).unwrap();
        assert_eq!(LabelMap::load_png(&lpath).unwrap(), labels);

        // RGB files are not label maps
        assert!(LabelMap::load_png(&path).unwrap_err().is_domain());
    }

    #[test]
    fn mask_helpers() {
        let mut m = ValidMask::filled(4, 3, false);
        assert!(m.is_empty() && m.row_range().is_none());
        m.set(1, 1, true);
        m.set(3, 2, true);
        assert_eq!(m.count(), 2);
        assert_eq!(m.row_range(), Some((1, 2)));
        assert!((m.coverage() - 2.0 / 12.0).abs() < 1e-15);
    }
}
