//! Dense resampling between perspective (tangent-plane) images and equirectangular rasters.
//!
//! The default [`WarpMode::Inverse`] walks every output pixel, projects it onto the
//! tangent plane and pulls a sample from the source, so the covered region has no
//! holes. [`WarpMode::Scatter`] pushes each source grid point forward onto the
//! nearest output pixel and is kept for comparison with the forward procedure.
//!
//! Source images are addressed in centre-indexed coordinates: pixel `(col, row)` of
//! an `n × n` image is the tangent-grid sample `(i, j) = (col − h, h − row)` with
//! `h = (n − 1) / 2`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    inverse_gnomonic, pixel_to_sphere_unchecked, plane_coords, sphere_to_pixel, EquirectSpec,
    GnomonicFrame, PixelCoord, SphereCoord, TangentGridSpec,
};
use crate::par;
use crate::raster::{LabelMap, RasterImage, ValidMask};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interp {
    Nearest,
    #[default]
    Bilinear,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WarpMode {
    #[default]
    Inverse,
    Scatter,
}

impl FromStr for Interp {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nearest" => Ok(Interp::Nearest),
            "bilinear" => Ok(Interp::Bilinear),
            _ => Err(Error::domain(format!("unknown interpolation {s:?}"))),
        }
    }
}

impl FromStr for WarpMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inverse" => Ok(WarpMode::Inverse),
            "scatter" => Ok(WarpMode::Scatter),
            _ => Err(Error::domain(format!("unknown warp mode {s:?}"))),
        }
    }
}

impl fmt::Display for Interp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Interp::Nearest => "nearest",
            Interp::Bilinear => "bilinear",
        })
    }
}

impl fmt::Display for WarpMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            WarpMode::Inverse => "inverse",
            WarpMode::Scatter => "scatter",
        })
    }
}

/// Rounds a requested tangent-image side up to the next odd size.
pub fn odd_side(n: usize) -> usize {
    if n.is_multiple_of(2) {
        n + 1
    } else {
        n
    }
}

/// Free parameters of one perspective → equirectangular projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionJob {
    tangent: SphereCoord,
    spec: EquirectSpec,
    n: usize,
    interp: Interp,
    mode: WarpMode,
}

impl ProjectionJob {
    /// Even `n` is bumped to `n + 1` with a warning.
    pub fn new(
        tangent: SphereCoord,
        spec: EquirectSpec,
        n: usize,
        interp: Interp,
        mode: WarpMode,
    ) -> Result<Self> {
        if n < 3 {
            return Err(Error::domain(format!("tangent image side {n} is below 3")));
        }
        let odd = odd_side(n);
        if odd != n {
            log::warn!("tangent image side {n} is even; using {odd}");
        }
        Ok(ProjectionJob {
            tangent,
            spec,
            n: odd,
            interp,
            mode,
        })
    }

    pub fn tangent(&self) -> SphereCoord {
        self.tangent
    }

    pub fn spec(&self) -> EquirectSpec {
        self.spec
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn interp(&self) -> Interp {
        self.interp
    }

    pub fn mode(&self) -> WarpMode {
        self.mode
    }

    pub fn with_interp(mut self, interp: Interp) -> Self {
        self.interp = interp;
        self
    }

    pub fn grid(&self) -> TangentGridSpec {
        // n is odd and >= 3, steps are positive for any valid spec with width >= 5
        TangentGridSpec::new(self.n, self.tangent, &self.spec).expect("validated projection job")
    }
}

/// Per-output-pixel source positions of a projection, reusable across images that
/// share the same job geometry.
#[derive(Debug, Clone)]
pub struct ProjectionPlan {
    job: ProjectionJob,
    /// Centre-indexed `(col, row)` in the source image, `None` outside the plane.
    lookups: Vec<Option<[f32; 2]>>,
}

impl ProjectionPlan {
    pub fn build(job: &ProjectionJob) -> Result<Self> {
        let (w, h) = (job.spec.width(), job.spec.height());
        w.checked_mul(h)
            .and_then(|p| p.checked_mul(4))
            .ok_or_else(|| Error::domain("equirectangular dimensions overflow"))?;
        TangentGridSpec::new(job.n, job.tangent, &job.spec)?;
        let lookups = match job.mode {
            WarpMode::Inverse => inverse_lookups(job),
            WarpMode::Scatter => scatter_lookups(job),
        };
        Ok(ProjectionPlan { job: *job, lookups })
    }

    pub fn job(&self) -> &ProjectionJob {
        &self.job
    }

    /// Source position pulled by output pixel `(x, y)`.
    pub fn source_of(&self, x: usize, y: usize) -> Option<[f32; 2]> {
        self.lookups[y * self.job.spec.width() + x]
    }

    pub fn mask(&self) -> ValidMask {
        let bits = self.lookups.iter().map(Option::is_some).collect();
        ValidMask::from_bits(self.job.spec.width(), self.job.spec.height(), bits).unwrap()
    }

    fn check_source(&self, width: usize, height: usize) -> Result<()> {
        if width != height {
            return Err(Error::domain(format!(
                "perspective input {width}x{height} is not square; resize it first"
            )));
        }
        if width != self.job.n {
            return Err(Error::domain(format!(
                "perspective input side {width} does not match job side {}",
                self.job.n
            )));
        }
        Ok(())
    }

    pub fn apply_image(&self, img: &RasterImage) -> Result<(RasterImage, ValidMask)> {
        self.check_source(img.width(), img.height())?;
        let (w, h, ch) = (
            self.job.spec.width(),
            self.job.spec.height(),
            img.channels(),
        );
        let mut out = RasterImage::zeros(w, h, ch);
        let interp = self.job.interp;
        par::for_each_row(out.samples_mut(), w * ch, |y, row| {
            for x in 0..w {
                if let Some([c, r]) = self.lookups[y * w + x] {
                    sample_square(img, c, r, interp, &mut row[x * ch..(x + 1) * ch]);
                }
            }
        });
        Ok((out, self.mask()))
    }

    pub fn apply_labels(&self, labels: &LabelMap) -> Result<(LabelMap, ValidMask)> {
        self.check_source(labels.width(), labels.height())?;
        let (w, h) = (self.job.spec.width(), self.job.spec.height());
        let n = labels.width();
        let mut out = LabelMap::filled(w, h, labels.ignore_id());
        par::for_each_row(out.ids_mut(), w, |y, row| {
            for (x, id) in row.iter_mut().enumerate() {
                if let Some([c, r]) = self.lookups[y * w + x] {
                    *id = labels.get(nearest_index(c, n), nearest_index(r, n));
                }
            }
        });
        Ok((out, self.mask()))
    }
}

fn inverse_lookups(job: &ProjectionJob) -> Vec<Option<[f32; 2]>> {
    let spec = job.spec;
    let (w, h) = (spec.width(), spec.height());
    let grid = job.grid();
    let (u_max, t_max) = grid.extent();
    let half = grid.half() as f64;
    let frame = GnomonicFrame::new(job.tangent);
    let theta0 = job.tangent.theta();
    let col_trig: Vec<(f64, f64)> = (0..w)
        .map(|x| {
            let s = pixel_to_sphere_unchecked(PixelCoord::new(x as f64 + 0.5, 0.5), &spec);
            (s.theta() - theta0).sin_cos()
        })
        .collect();

    let mut lookups = vec![None; w * h];
    par::for_each_row(&mut lookups, w, |y, row| {
        let phi = pixel_to_sphere_unchecked(PixelCoord::new(0.5, y as f64 + 0.5), &spec).phi();
        let phi_trig = phi.sin_cos();
        for (slot, &dt) in row.iter_mut().zip(&col_trig) {
            if let Some(p) = frame.project(phi_trig, dt) {
                if p.u.abs() <= u_max && p.t.abs() <= t_max {
                    let c = p.u / grid.step_u() + half;
                    let r = half - p.t / grid.step_t();
                    *slot = Some([c as f32, r as f32]);
                }
            }
        }
    });
    lookups
}

/// Output pixel receiving source grid sample `(col, row)` in scatter mode.
pub fn scatter_target(
    col: usize,
    row: usize,
    grid: &TangentGridSpec,
    spec: &EquirectSpec,
) -> (usize, usize) {
    let (i, j) = grid.indices_of(col, row);
    let p = plane_coords(i, j, grid).expect("index inside grid");
    let px = sphere_to_pixel(inverse_gnomonic(p, grid.tangent()), spec);
    let x = (px.x.floor() as i64).rem_euclid(spec.width() as i64) as usize;
    let y = (px.y.floor().max(0.0) as usize).min(spec.height() - 1);
    (x, y)
}

fn scatter_lookups(job: &ProjectionJob) -> Vec<Option<[f32; 2]>> {
    let spec = job.spec;
    let grid = job.grid();
    let n = job.n;
    let points: Vec<(usize, usize)> = (0..n).flat_map(|r| (0..n).map(move |c| (c, r))).collect();
    let targets = par::map(&points, |&(c, r)| scatter_target(c, r, &grid, &spec));
    let mut lookups = vec![None; spec.width() * spec.height()];
    // later grid points overwrite earlier ones, in a fixed order
    for (&(c, r), &(x, y)) in points.iter().zip(&targets) {
        lookups[y * spec.width() + x] = Some([c as f32, r as f32]);
    }
    lookups
}

fn nearest_index(coord: f32, len: usize) -> usize {
    ((coord + 0.5).floor().max(0.0) as usize).min(len - 1)
}

/// Samples a square source image at centre-indexed `(c, r)`, clamped at the border.
fn sample_square(img: &RasterImage, c: f32, r: f32, interp: Interp, out: &mut [f32]) {
    let (w, h) = (img.width(), img.height());
    match interp {
        Interp::Nearest => out.copy_from_slice(img.pixel(nearest_index(c, w), nearest_index(r, h))),
        Interp::Bilinear => {
            let c = c.clamp(0.0, (w - 1) as f32);
            let r = r.clamp(0.0, (h - 1) as f32);
            let (x0, y0) = (c.floor() as usize, r.floor() as usize);
            let (x1, y1) = ((x0 + 1).min(w - 1), (y0 + 1).min(h - 1));
            bilerp(img, (x0, x1, c - x0 as f32), (y0, y1, r - y0 as f32), out);
        }
    }
}

fn bilerp(
    img: &RasterImage,
    (x0, x1, fx): (usize, usize, f32),
    (y0, y1, fy): (usize, usize, f32),
    out: &mut [f32],
) {
    let (a, b) = (img.pixel(x0, y0), img.pixel(x1, y0));
    let (c, d) = (img.pixel(x0, y1), img.pixel(x1, y1));
    for k in 0..out.len() {
        let top = a[k] * (1.0 - fx) + b[k] * fx;
        let bottom = c[k] * (1.0 - fx) + d[k] * fx;
        out[k] = (top * (1.0 - fy) + bottom * fy).clamp(0.0, 1.0);
    }
}

/// Renders a square perspective image onto the equirectangular canvas of `job`.
pub fn project_image(img: &RasterImage, job: &ProjectionJob) -> Result<(RasterImage, ValidMask)> {
    ProjectionPlan::build(job)?.apply_image(img)
}

/// Renders a square label map; nearest-neighbour sampling is always used.
pub fn project_labels(labels: &LabelMap, job: &ProjectionJob) -> Result<(LabelMap, ValidMask)> {
    ProjectionPlan::build(&job.with_interp(Interp::Nearest))?.apply_labels(labels)
}

/// Continuous equirectangular positions of every sample of an `n × n` tangent image, row-major.
pub fn tangent_sample_positions(
    spec: &EquirectSpec,
    tangent: SphereCoord,
    n: usize,
) -> Result<Vec<PixelCoord>> {
    let grid = TangentGridSpec::new(n, tangent, spec)?;
    let mut out = vec![PixelCoord::new(0.0, 0.0); n * n];
    par::for_each_row(&mut out, n, |row, slots| {
        for (col, slot) in slots.iter_mut().enumerate() {
            let (i, j) = grid.indices_of(col, row);
            let p = plane_coords(i, j, &grid).expect("index inside grid");
            *slot = sphere_to_pixel(inverse_gnomonic(p, tangent), spec);
        }
    });
    Ok(out)
}

fn wrap_col(x: i64, w: usize) -> usize {
    x.rem_euclid(w as i64) as usize
}

fn clamp_row(y: i64, h: usize) -> usize {
    y.clamp(0, h as i64 - 1) as usize
}

/// Samples an equirectangular image at a continuous pixel position, wrapping across the seam.
pub fn sample_equirect(equi: &RasterImage, p: PixelCoord, interp: Interp, out: &mut [f32]) {
    let (w, h) = (equi.width(), equi.height());
    match interp {
        Interp::Nearest => out.copy_from_slice(equi.pixel(
            wrap_col(p.x.floor() as i64, w),
            clamp_row(p.y.floor() as i64, h),
        )),
        Interp::Bilinear => {
            let (fx, fy) = (p.x - 0.5, p.y - 0.5);
            let (x0, y0) = (fx.floor(), fy.floor());
            let (ax, ay) = ((fx - x0) as f32, (fy - y0) as f32);
            let (xi, yi) = (x0 as i64, y0 as i64);
            bilerp(
                equi,
                (wrap_col(xi, w), wrap_col(xi + 1, w), ax),
                (clamp_row(yi, h), clamp_row(yi + 1, h), ay),
                out,
            );
        }
    }
}

fn equirect_spec_of(width: usize, height: usize) -> Result<EquirectSpec> {
    EquirectSpec::new(width, height)
}

/// Extracts the `n × n` tangent-plane view at `tangent` from an equirectangular image.
pub fn extract_tangent_image(
    equi: &RasterImage,
    tangent: SphereCoord,
    n: usize,
    interp: Interp,
) -> Result<RasterImage> {
    let spec = equirect_spec_of(equi.width(), equi.height())?;
    let positions = tangent_sample_positions(&spec, tangent, n)?;
    let ch = equi.channels();
    let mut out = RasterImage::zeros(n, n, ch);
    par::for_each_row(out.samples_mut(), n * ch, |row, samples| {
        for col in 0..n {
            sample_equirect(
                equi,
                positions[row * n + col],
                interp,
                &mut samples[col * ch..(col + 1) * ch],
            );
        }
    });
    Ok(out)
}

/// Label-map counterpart of [`extract_tangent_image`], always nearest-neighbour.
pub fn extract_tangent_labels(equi: &LabelMap, tangent: SphereCoord, n: usize) -> Result<LabelMap> {
    let spec = equirect_spec_of(equi.width(), equi.height())?;
    let positions = tangent_sample_positions(&spec, tangent, n)?;
    let (w, h) = (equi.width(), equi.height());
    let mut out = LabelMap::filled(n, n, equi.ignore_id());
    par::for_each_row(out.ids_mut(), n, |row, ids| {
        for (col, id) in ids.iter_mut().enumerate() {
            let p = positions[row * n + col];
            *id = equi.get(
                wrap_col(p.x.floor() as i64, w),
                clamp_row(p.y.floor() as i64, h),
            );
        }
    });
    Ok(out)
}

/// Rasters that can be resized and cropped. Images resample bilinearly;
/// label maps and masks use nearest neighbour.
pub trait Resample: Sized {
    fn dims(&self) -> (usize, usize);

    fn resized(&self, width: usize, height: usize) -> Self;

    /// Crops `width × height` starting at `(x0, y0)`; columns wrap around the seam.
    fn crop_wrapped(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self;

    fn flipped_vertically(&self) -> Self;
}

/// Source coordinate of destination index `d` when mapping `src_len` samples onto `dst_len`.
fn center_map(d: usize, src_len: usize, dst_len: usize) -> f64 {
    (d as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5
}

fn nearest_src(d: usize, src_len: usize, dst_len: usize) -> usize {
    (((d as f64 + 0.5) * src_len as f64 / dst_len as f64).floor() as usize).min(src_len - 1)
}

impl Resample for RasterImage {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn resized(&self, width: usize, height: usize) -> Self {
        let ch = self.channels();
        let (sw, sh) = (self.width(), self.height());
        let mut out = RasterImage::zeros(width, height, ch);
        let xs: Vec<(usize, usize, f32)> = (0..width)
            .map(|x| {
                let c = center_map(x, sw, width).clamp(0.0, (sw - 1) as f64);
                let x0 = c.floor() as usize;
                (x0, (x0 + 1).min(sw - 1), (c - x0 as f64) as f32)
            })
            .collect();
        par::for_each_row(out.samples_mut(), width * ch, |y, row| {
            let r = center_map(y, sh, height).clamp(0.0, (sh - 1) as f64);
            let y0 = r.floor() as usize;
            let yw = (y0, (y0 + 1).min(sh - 1), (r - y0 as f64) as f32);
            for (x, &xw) in xs.iter().enumerate() {
                bilerp(self, xw, yw, &mut row[x * ch..(x + 1) * ch]);
            }
        });
        out
    }

    fn crop_wrapped(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        let ch = self.channels();
        let mut out = RasterImage::zeros(width, height, ch);
        for y in 0..height {
            for x in 0..width {
                let src = self.pixel((x0 + x) % self.width(), y0 + y);
                out.pixel_mut(x, y).copy_from_slice(src);
            }
        }
        out
    }

    fn flipped_vertically(&self) -> Self {
        let (w, h) = self.dims();
        self.crop_wrapped(0, 0, w, h).rows_reversed()
    }
}

impl RasterImage {
    fn rows_reversed(mut self) -> Self {
        let row_len = self.width() * self.channels();
        let h = self.height();
        let samples = self.samples_mut();
        for y in 0..h / 2 {
            let (top, bottom) = samples.split_at_mut((h - 1 - y) * row_len);
            top[y * row_len..(y + 1) * row_len].swap_with_slice(&mut bottom[..row_len]);
        }
        self
    }
}

impl Resample for LabelMap {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn resized(&self, width: usize, height: usize) -> Self {
        let (sw, sh) = self.dims();
        let mut out = LabelMap::filled(width, height, self.ignore_id());
        for y in 0..height {
            let sy = nearest_src(y, sh, height);
            for x in 0..width {
                out.set(x, y, self.get(nearest_src(x, sw, width), sy));
            }
        }
        out
    }

    fn crop_wrapped(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        let mut out = LabelMap::filled(width, height, self.ignore_id());
        for y in 0..height {
            for x in 0..width {
                out.set(x, y, self.get((x0 + x) % self.width(), y0 + y));
            }
        }
        out
    }

    fn flipped_vertically(&self) -> Self {
        let (w, h) = self.dims();
        let mut out = self.clone();
        for y in 0..h {
            for x in 0..w {
                out.set(x, y, self.get(x, h - 1 - y));
            }
        }
        out
    }
}

impl Resample for ValidMask {
    fn dims(&self) -> (usize, usize) {
        (self.width(), self.height())
    }

    fn resized(&self, width: usize, height: usize) -> Self {
        let (sw, sh) = self.dims();
        let mut out = ValidMask::filled(width, height, false);
        for y in 0..height {
            let sy = nearest_src(y, sh, height);
            for x in 0..width {
                out.set(x, y, self.get(nearest_src(x, sw, width), sy));
            }
        }
        out
    }

    fn crop_wrapped(&self, x0: usize, y0: usize, width: usize, height: usize) -> Self {
        let mut out = ValidMask::filled(width, height, false);
        for y in 0..height {
            for x in 0..width {
                out.set(x, y, self.get((x0 + x) % self.width(), y0 + y));
            }
        }
        out
    }

    fn flipped_vertically(&self) -> Self {
        let (w, h) = self.dims();
        let mut out = self.clone();
        for y in 0..h {
            out.row_mut(y).copy_from_slice(self.row(h - 1 - y));
        }
        debug_assert_eq!(out.width(), w);
        out
    }
}

/// Resizes to `n × n` without preserving aspect.
pub fn resize_square<R: Resample>(raster: &R, n: usize) -> Result<R> {
    if n < 3 {
        return Err(Error::domain(format!("resize target {n} is below 3")));
    }
    Ok(raster.resized(n, n))
}

/// Axis-aligned bounding box of the set pixels of `mask`, computed in a frame
/// rolled so that a region crossing the `x = 0` seam stays contiguous.
///
/// Returns `(x0, y0, width, height)`; `x0 + width` may exceed the raster width.
pub fn wrapped_bounding_box(mask: &ValidMask) -> Option<(usize, usize, usize, usize)> {
    let (top, bottom) = mask.row_range()?;
    let w = mask.width();
    let mut covered = vec![false; w];
    for y in top..=bottom {
        for (c, &b) in covered.iter_mut().zip(mask.row(y)) {
            *c |= b;
        }
    }
    // the longest circular run of empty columns separates the region's two ends
    let mut best: Option<(usize, usize)> = None;
    let start = covered.iter().position(|&c| c)?;
    let mut run_start = None;
    for k in 1..=w {
        let x = (start + k) % w;
        match (covered[x], run_start) {
            (false, None) => run_start = Some(k),
            (true, Some(s)) => {
                let len = k - s;
                if best.is_none_or(|(_, l)| len > l) {
                    best = Some(((start + s) % w, len));
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let (x0, width) = match best {
        Some((gap_start, gap_len)) => ((gap_start + gap_len) % w, w - gap_len),
        None => (0, w),
    };
    Some((x0, top, width, bottom - top + 1))
}

/// Crops the top of the projected region and resizes it to `tile × tile`.
///
/// The crop spans the full (seam-aware) width of the mask's bounding box and starts
/// at its top row; its height is the box width, or the box height if that is smaller.
pub fn crop_to_upper_tile<R: Resample>(raster: &R, mask: &ValidMask, tile: usize) -> Result<R> {
    let (w, h) = raster.dims();
    if mask.dims() != (w, h) {
        return Err(Error::domain(format!(
            "mask {}x{} does not match raster {w}x{h}",
            mask.width(),
            mask.height()
        )));
    }
    if tile == 0 || tile > w.min(h) {
        return Err(Error::domain(format!(
            "tile {tile} does not fit a {w}x{h} raster"
        )));
    }
    let (x0, y0, bw, bh) = wrapped_bounding_box(mask)
        .ok_or_else(|| Error::domain("cannot crop an empty projection mask"))?;
    let crop_h = bw.min(bh);
    let cropped = raster.crop_wrapped(x0, y0, bw, crop_h);
    if (bw, crop_h) == (tile, tile) {
        return Ok(cropped);
    }
    Ok(cropped.resized(tile, tile))
}

/// Horizontal span (pixels) of the set pixels in row `y`, measured seam-aware.
pub fn row_span(mask: &ValidMask, y: usize) -> usize {
    let row = mask.row(y);
    let w = row.len();
    let Some(first) = row.iter().position(|&b| b) else {
        return 0;
    };
    // span = width minus the longest circular gap
    let mut longest = 0;
    let mut run = 0;
    for k in 1..=w {
        if row[(first + k) % w] {
            longest = longest.max(run);
            run = 0;
        } else {
            run += 1;
        }
    }
    w - longest
}
