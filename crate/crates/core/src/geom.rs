//! Sphere, equirectangular and tangent-plane coordinate mathematics.
//!
//! Conventions: azimuth `theta` in `[-π, π)` grows to the right, zenith `phi` in
//! `[-π/2, π/2]` grows toward the north pole. Equirectangular pixel coordinates
//! are continuous with the origin at the top-left corner, so the centre of pixel
//! `(col, row)` sits at `(col + 0.5, row + 0.5)`. Plane ordinate `t` grows north.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::ValidMask;

/// Largest excess of an `asin` argument over 1 that is attributed to rounding.
const ASIN_SLACK: f64 = 1e-12;

/// A point on the unit sphere.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereCoord {
    theta: f64,
    phi: f64,
}

impl SphereCoord {
    /// Builds a normalized coordinate. `theta` is wrapped into `[-π, π)`;
    /// `phi` outside `[-π/2, π/2]` is rejected.
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !theta.is_finite() || !phi.is_finite() {
            return Err(Error::domain(format!(
                "non-finite sphere coordinate ({theta}, {phi})"
            )));
        }
        if !(-FRAC_PI_2..=FRAC_PI_2).contains(&phi) {
            return Err(Error::domain(format!(
                "zenith angle {phi} outside [-pi/2, pi/2]"
            )));
        }
        Ok(SphereCoord {
            theta: normalize_theta(theta),
            phi,
        })
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }

    fn unchecked(theta: f64, phi: f64) -> Self {
        SphereCoord {
            theta: normalize_theta(theta),
            phi,
        }
    }
}

/// Wraps an azimuth into `[-π, π)`. Values already in range are returned untouched.
pub fn normalize_theta(theta: f64) -> f64 {
    if (-PI..PI).contains(&theta) {
        return theta;
    }
    let wrapped = theta - TAU * ((theta + PI) / TAU).floor();
    // rounding in the subtraction can land exactly on +π
    if wrapped >= PI {
        wrapped - TAU
    } else {
        wrapped
    }
}

/// Geometry of an equirectangular raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec", into = "RawSpec")]
pub struct EquirectSpec {
    width: usize,
    height: usize,
    delta_theta: f64,
    delta_phi: f64,
}

#[derive(Serialize, Deserialize)]
struct RawSpec {
    width: usize,
    height: usize,
}

impl TryFrom<RawSpec> for EquirectSpec {
    type Error = Error;
    fn try_from(raw: RawSpec) -> Result<Self> {
        EquirectSpec::new(raw.width, raw.height)
    }
}

impl From<EquirectSpec> for RawSpec {
    fn from(s: EquirectSpec) -> Self {
        RawSpec {
            width: s.width,
            height: s.height,
        }
    }
}

impl EquirectSpec {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width < 2 || height < 1 {
            return Err(Error::domain(format!(
                "equirectangular raster {width}x{height} is too small (need width >= 2, height >= 1)"
            )));
        }
        if width != 2 * height {
            log::warn!(
                "equirectangular raster {width}x{height} is not 2:1; horizontal and vertical sampling intervals differ"
            );
        }
        Ok(EquirectSpec {
            width,
            height,
            delta_theta: TAU / width as f64,
            delta_phi: PI / height as f64,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Horizontal sampling interval, `2π / w`.
    pub fn delta_theta(&self) -> f64 {
        self.delta_theta
    }

    /// Vertical sampling interval, `π / h`.
    pub fn delta_phi(&self) -> f64 {
        self.delta_phi
    }

    pub fn contains(&self, p: PixelCoord) -> bool {
        (0.0..=self.width as f64).contains(&p.x) && (0.0..=self.height as f64).contains(&p.y)
    }
}

/// Continuous pixel position; `(0, 0)` is the top-left corner of the raster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelCoord {
    pub x: f64,
    pub y: f64,
}

impl PixelCoord {
    pub fn new(x: f64, y: f64) -> Self {
        PixelCoord { x, y }
    }
}

/// A point on the tangent plane of the unit sphere; `(0, 0)` is the tangency point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlanePoint {
    pub u: f64,
    pub t: f64,
}

impl PlanePoint {
    pub fn new(u: f64, t: f64) -> Self {
        PlanePoint { u, t }
    }
}

/// Radial plane distance and the corresponding angular distance from the tangent point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularTerms {
    pub rho: f64,
    pub v: f64,
}

impl AngularTerms {
    pub fn of(p: PlanePoint) -> Self {
        let rho = p.u.hypot(p.t);
        AngularTerms { rho, v: rho.atan() }
    }
}

/// An `n × n` grid of tangent-plane sample points spaced by the tangents of the
/// raster's sampling intervals.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TangentGridSpec {
    n: usize,
    tangent: SphereCoord,
    step_u: f64,
    step_t: f64,
}

impl TangentGridSpec {
    pub fn new(n: usize, tangent: SphereCoord, spec: &EquirectSpec) -> Result<Self> {
        if n < 3 || n.is_multiple_of(2) {
            return Err(Error::domain(format!(
                "tangent grid side {n} must be odd and at least 3"
            )));
        }
        let step_u = spec.delta_theta().tan();
        let step_t = spec.delta_phi().tan();
        if !(step_u > 0.0 && step_t > 0.0 && step_u.is_finite() && step_t.is_finite()) {
            return Err(Error::domain(format!(
                "raster {}x{} is too coarse for a tangent grid",
                spec.width(),
                spec.height()
            )));
        }
        Ok(TangentGridSpec {
            n,
            tangent,
            step_u,
            step_t,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Largest index magnitude, `(n - 1) / 2`.
    pub fn half(&self) -> usize {
        (self.n - 1) / 2
    }

    pub fn tangent(&self) -> SphereCoord {
        self.tangent
    }

    pub fn step_u(&self) -> f64 {
        self.step_u
    }

    pub fn step_t(&self) -> f64 {
        self.step_t
    }

    /// Half-extent of the sampled square on the plane, `(u_max, t_max)`.
    pub fn extent(&self) -> (f64, f64) {
        let h = self.half() as f64;
        (h * self.step_u, h * self.step_t)
    }

    /// Signed grid indices `(i, j)` of the image pixel at `(col, row)`; `j` grows upward.
    pub fn indices_of(&self, col: usize, row: usize) -> (i64, i64) {
        let h = self.half() as i64;
        (col as i64 - h, h - row as i64)
    }
}

/// Sphere point to continuous equirectangular pixel position.
pub fn sphere_to_pixel(s: SphereCoord, spec: &EquirectSpec) -> PixelCoord {
    // x = (θ + π)·w / 2π and y = (π − 2φ)·h / 2π, arranged so that multiples of
    // π/4 map to exact pixel positions
    PixelCoord {
        x: (s.theta / TAU + 0.5) * spec.width as f64,
        y: (0.5 - s.phi / PI) * spec.height as f64,
    }
}

/// Continuous equirectangular pixel position to sphere point.
pub fn pixel_to_sphere(p: PixelCoord, spec: &EquirectSpec) -> Result<SphereCoord> {
    if !spec.contains(p) {
        return Err(Error::domain(format!(
            "pixel ({}, {}) outside {}x{} raster",
            p.x, p.y, spec.width, spec.height
        )));
    }
    Ok(pixel_to_sphere_unchecked(p, spec))
}

pub(crate) fn pixel_to_sphere_unchecked(p: PixelCoord, spec: &EquirectSpec) -> SphereCoord {
    let theta = (p.x / spec.width as f64 - 0.5) * TAU;
    let phi = (0.5 - p.y / spec.height as f64) * PI;
    SphereCoord::unchecked(theta, phi.clamp(-FRAC_PI_2, FRAC_PI_2))
}

/// Cartesian tangent-plane position of grid sample `(i, j)`.
pub fn plane_coords(i: i64, j: i64, grid: &TangentGridSpec) -> Result<PlanePoint> {
    let h = grid.half() as i64;
    if i.abs() > h || j.abs() > h {
        return Err(Error::domain(format!(
            "grid index ({i}, {j}) outside [-{h}, {h}]"
        )));
    }
    Ok(PlanePoint {
        u: i as f64 * grid.step_u,
        t: j as f64 * grid.step_t,
    })
}

fn clamped_asin(x: f64) -> f64 {
    debug_assert!(
        x.abs() <= 1.0 + ASIN_SLACK,
        "asin argument {x} exceeds [-1, 1] beyond rounding slack"
    );
    x.clamp(-1.0, 1.0).asin()
}

/// Maps a tangent-plane point back onto the sphere (inverse gnomonic projection).
pub fn inverse_gnomonic(p: PlanePoint, tangent: SphereCoord) -> SphereCoord {
    let AngularTerms { rho, v } = AngularTerms::of(p);
    if rho == 0.0 {
        return tangent;
    }
    let (sin_v, cos_v) = v.sin_cos();
    let (sin_phi, cos_phi) = tangent.phi.sin_cos();
    let phi = clamped_asin(cos_v * sin_phi + p.t * sin_v * cos_phi / rho);
    let dtheta = (p.u * sin_v).atan2(rho * cos_phi * cos_v - p.t * sin_phi * sin_v);
    SphereCoord::unchecked(tangent.theta + dtheta, phi)
}

/// Projects a sphere point onto the tangent plane at `tangent` (gnomonic projection).
///
/// Returns `None` when the point lies on the far hemisphere, where the ray from the
/// sphere centre never meets the plane.
pub fn forward_gnomonic(s: SphereCoord, tangent: SphereCoord) -> Option<PlanePoint> {
    GnomonicFrame::new(tangent).project(s.phi.sin_cos(), (s.theta - tangent.theta).sin_cos())
}

/// Tangent-point trigonometry shared by many forward projections.
#[derive(Debug, Clone, Copy)]
pub(crate) struct GnomonicFrame {
    sin_phi0: f64,
    cos_phi0: f64,
}

impl GnomonicFrame {
    pub(crate) fn new(tangent: SphereCoord) -> Self {
        let (sin_phi0, cos_phi0) = tangent.phi.sin_cos();
        GnomonicFrame { sin_phi0, cos_phi0 }
    }

    /// Forward projection from precomputed `sin/cos φ` and `sin/cos (θ − θ0)`.
    #[inline]
    pub(crate) fn project(
        &self,
        (sin_phi, cos_phi): (f64, f64),
        (sin_dt, cos_dt): (f64, f64),
    ) -> Option<PlanePoint> {
        let cos_c = self.sin_phi0 * sin_phi + self.cos_phi0 * cos_phi * cos_dt;
        if cos_c <= 0.0 {
            return None;
        }
        Some(PlanePoint {
            u: cos_phi * sin_dt / cos_c,
            t: (self.cos_phi0 * sin_phi - self.sin_phi0 * cos_phi * cos_dt) / cos_c,
        })
    }
}

/// Discrete solid angle (steradians) covered by the set pixels of `mask`.
pub fn solid_angle_of_mask(mask: &ValidMask, spec: &EquirectSpec) -> Result<f64> {
    if mask.width() != spec.width || mask.height() != spec.height {
        return Err(Error::domain(format!(
            "mask {}x{} does not match raster {}x{}",
            mask.width(),
            mask.height(),
            spec.width,
            spec.height
        )));
    }
    let cell = spec.delta_theta * spec.delta_phi;
    Ok((0..spec.height)
        .map(|row| {
            let phi = FRAC_PI_2 - (row as f64 + 0.5) * spec.delta_phi;
            mask.row(row).iter().filter(|&&b| b).count() as f64 * cell * phi.cos()
        })
        .sum())
}

/// Sampling positions of a `k × k` kernel that follows the local distortion of the
/// equirectangular raster around `center`.
///
/// Positions are row-major from the northernmost row; `x` is wrapped into `[0, w)`.
pub fn distorted_kernel_grid(
    spec: &EquirectSpec,
    k: usize,
    center: PixelCoord,
) -> Result<Vec<PixelCoord>> {
    let tangent = pixel_to_sphere(center, spec)?;
    let grid = TangentGridSpec::new(k, tangent, spec)?;
    let mut out = Vec::with_capacity(k * k);
    for row in 0..k {
        for col in 0..k {
            let (i, j) = grid.indices_of(col, row);
            if i == 0 && j == 0 {
                out.push(center);
                continue;
            }
            let s = inverse_gnomonic(plane_coords(i, j, &grid)?, tangent);
            out.push(sphere_to_pixel(s, spec));
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sc(theta: f64, phi: f64) -> SphereCoord {
        SphereCoord::new(theta, phi).unwrap()
    }

    #[test]
    fn theta_normalization() {
        assert_eq!(sc(PI, 0.0).theta(), -PI);
        assert_eq!(sc(-PI, 0.0).theta(), -PI);
        assert!((sc(3.0 * PI / 2.0, 0.0).theta() + PI / 2.0).abs() < 1e-15);
        assert!((sc(-5.0 * PI, 0.0).theta() + PI).abs() < 1e-12);
        assert!(SphereCoord::new(0.0, FRAC_PI_2 + 1e-9).is_err());
        assert!(SphereCoord::new(f64::NAN, 0.0).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(EquirectSpec::new(1, 1).is_err());
        assert!(EquirectSpec::new(2, 0).is_err());
        let s = EquirectSpec::new(512, 256).unwrap();
        assert_eq!(s.delta_theta(), TAU / 512.0);
        assert_eq!(s.delta_phi(), PI / 256.0);
    }

    #[test]
    fn sphere_to_pixel_examples() {
        let s512 = EquirectSpec::new(512, 256).unwrap();
        assert_eq!(
            sphere_to_pixel(sc(0.0, 0.0), &s512),
            PixelCoord::new(256.0, 128.0)
        );
        assert_eq!(
            sphere_to_pixel(sc(-PI, FRAC_PI_2), &s512),
            PixelCoord::new(0.0, 0.0)
        );
        let s1024 = EquirectSpec::new(1024, 512).unwrap();
        // (π/2 + π)·1024/2π = 768, (π + π/2)·512/2π = 384
        assert_eq!(
            sphere_to_pixel(sc(FRAC_PI_2, -PI / 4.0), &s1024),
            PixelCoord::new(768.0, 384.0)
        );
    }

    #[test]
    fn pixel_to_sphere_examples_and_bounds() {
        let s512 = EquirectSpec::new(512, 256).unwrap();
        assert_eq!(
            pixel_to_sphere(PixelCoord::new(256.0, 128.0), &s512).unwrap(),
            sc(0.0, 0.0)
        );
        assert_eq!(
            pixel_to_sphere(PixelCoord::new(0.0, 0.0), &s512).unwrap(),
            sc(-PI, FRAC_PI_2)
        );
        let s1024 = EquirectSpec::new(1024, 512).unwrap();
        let s = pixel_to_sphere(PixelCoord::new(768.0, 384.0), &s1024).unwrap();
        assert_eq!((s.theta(), s.phi()), (FRAC_PI_2, -PI / 4.0));
        assert!(pixel_to_sphere(PixelCoord::new(-0.1, 3.0), &s512).is_err());
        assert!(pixel_to_sphere(PixelCoord::new(3.0, 256.5), &s512).is_err());
    }

    #[test]
    fn plane_coords_examples() {
        let spec = EquirectSpec::new(512, 256).unwrap();
        let grid = TangentGridSpec::new(9, sc(0.0, 0.0), &spec).unwrap();
        assert_eq!(
            plane_coords(0, 0, &grid).unwrap(),
            PlanePoint::new(0.0, 0.0)
        );
        let p = plane_coords(1, 0, &grid).unwrap();
        // tan(2π/512) = 0.0122718 + 0.0122718³/3 + … ≈ 0.0122725
        assert!((p.u - (TAU / 512.0).tan()).abs() < 1e-18 && p.t == 0.0);
        assert!((p.u - 0.012_272_5).abs() < 1e-7);
        let p = plane_coords(-2, 3, &grid).unwrap();
        let step = (PI / 256.0).tan();
        assert_eq!(p, PlanePoint::new(-2.0 * step, 3.0 * step));
        assert!(plane_coords(5, 0, &grid).is_err());
        assert!(plane_coords(0, -5, &grid).is_err());
        assert!(TangentGridSpec::new(4, sc(0.0, 0.0), &spec).is_err());
        assert!(TangentGridSpec::new(1, sc(0.0, 0.0), &spec).is_err());
    }

    #[test]
    fn inverse_gnomonic_degenerate_and_equator() {
        let t = sc(0.4, -0.3);
        assert_eq!(inverse_gnomonic(PlanePoint::new(0.0, 0.0), t), t);
        for u in [-2.5, -0.3, 0.01, 1.0, 7.0] {
            let s = inverse_gnomonic(PlanePoint::new(u, 0.0), sc(0.0, 0.0));
            assert_eq!(s.phi(), 0.0);
            assert!((s.theta() - f64::atan(u)).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_gnomonic_examples() {
        let t = sc(0.3, 0.7);
        let p = forward_gnomonic(t, t).unwrap();
        assert!(p.u.abs() < 1e-15 && p.t.abs() < 1e-15);
        assert!(forward_gnomonic(sc(0.3 - PI, -0.7), t).is_none());
        let s = inverse_gnomonic(PlanePoint::new(0.1, 0.2), t);
        let back = forward_gnomonic(s, t).unwrap();
        assert!((back.u - 0.1).abs() < 1e-12 && (back.t - 0.2).abs() < 1e-12);
    }

    #[test]
    fn pole_tangent_is_finite() {
        let pole = sc(0.0, FRAC_PI_2);
        let s = inverse_gnomonic(PlanePoint::new(0.2, -0.1), pole);
        assert!(s.theta().is_finite() && s.phi().is_finite());
        let back = forward_gnomonic(s, pole).unwrap();
        assert!((back.u - 0.2).abs() < 1e-12 && (back.t + 0.1).abs() < 1e-12);
    }

    #[test]
    fn solid_angle_full_empty_half() {
        let spec = EquirectSpec::new(512, 256).unwrap();
        let full = ValidMask::filled(512, 256, true);
        let sa = solid_angle_of_mask(&full, &spec).unwrap();
        assert!((sa - 4.0 * PI).abs() / (4.0 * PI) < 1e-3);
        assert_eq!(
            solid_angle_of_mask(&ValidMask::filled(512, 256, false), &spec).unwrap(),
            0.0
        );
        let mut upper = ValidMask::filled(512, 256, false);
        for row in 0..128 {
            upper.row_mut(row).fill(true);
        }
        // independent brute sum of Δθ·Δφ·cos φ over the upper 128 rows
        let mut brute = 0.0;
        for row in 0..128 {
            for _ in 0..512 {
                let phi = PI / 2.0 - (row as f64 + 0.5) * PI / 256.0;
                brute += (2.0 * PI / 512.0) * (PI / 256.0) * phi.cos();
            }
        }
        let sa = solid_angle_of_mask(&upper, &spec).unwrap();
        assert!((sa - brute).abs() < 1e-9);
        assert!((sa - 2.0 * PI).abs() / (2.0 * PI) < 1e-3);
        assert!(solid_angle_of_mask(&ValidMask::filled(10, 5, true), &spec).is_err());
    }

    #[test]
    fn kernel_grid_equator_is_regular() {
        let spec = EquirectSpec::new(1024, 512).unwrap();
        let center = PixelCoord::new(300.5, 256.0);
        let grid = distorted_kernel_grid(&spec, 3, center).unwrap();
        assert_eq!(grid[4], center);
        for (idx, p) in grid.iter().enumerate() {
            let (r, c) = ((idx / 3) as f64, (idx % 3) as f64);
            assert!((p.x - (center.x + c - 1.0)).abs() < 0.01, "{idx} {p:?}");
            assert!((p.y - (center.y + r - 1.0)).abs() < 0.01, "{idx} {p:?}");
        }
    }

    #[test]
    fn kernel_grid_near_pole_spreads_toward_top() {
        let spec = EquirectSpec::new(1024, 512).unwrap();
        let center = PixelCoord::new(0.5, 3.0);
        let k = 5;
        let grid = distorted_kernel_grid(&spec, k, center).unwrap();
        assert_eq!(grid[k * k / 2], center);
        let w = spec.width() as f64;
        let spread = |row: usize| {
            // horizontal span around the centre column, unwrapped across the seam
            let xs: Vec<f64> = (0..k)
                .map(|c| {
                    let dx = grid[row * k + c].x - center.x;
                    dx - w * (dx / w).round()
                })
                .collect();
            xs[k - 1] - xs[0]
        };
        for row in 1..k {
            assert!(spread(row - 1) > spread(row), "row {row}");
        }
        assert!(
            grid.iter().any(|p| p.x > w / 2.0),
            "expected wrapped positions"
        );
        assert!(distorted_kernel_grid(&spec, 3, PixelCoord::new(-1.0, 3.0)).is_err());
    }

    fn tangent_strategy() -> impl Strategy<Value = SphereCoord> {
        (-PI..PI, -FRAC_PI_2..=FRAC_PI_2).prop_map(|(t, p)| sc(t, p))
    }

    fn dtheta(a: f64, b: f64) -> f64 {
        normalize_theta(a - b)
    }

    proptest! {
        #[test]
        fn pixel_round_trip(theta in -PI..PI, phi in -FRAC_PI_2..=FRAC_PI_2, w in 2usize..4096, h in 1usize..2048) {
            let spec = EquirectSpec::new(w, h).unwrap();
            let s = sc(theta, phi);
            let back = pixel_to_sphere(sphere_to_pixel(s, &spec), &spec).unwrap();
            prop_assert!(dtheta(back.theta(), s.theta()).abs() <= 1e-12);
            prop_assert!((back.phi() - s.phi()).abs() <= 1e-12);
        }

        #[test]
        fn azimuth_shift_equivariance(u in -3.0..3.0f64, t in -3.0..3.0f64, tan in tangent_strategy(), delta in -PI..PI) {
            let p = PlanePoint::new(u, t);
            let a = inverse_gnomonic(p, tan);
            let b = inverse_gnomonic(p, sc(tan.theta() + delta, tan.phi()));
            prop_assert!(dtheta(b.theta(), a.theta() + delta).abs() < 1e-12);
            prop_assert_eq!(a.phi(), b.phi());
        }

        #[test]
        fn mirror_symmetry(u in -3.0..3.0f64, t in -3.0..3.0f64, tan in tangent_strategy()) {
            let a = inverse_gnomonic(PlanePoint::new(u, t), tan);
            let b = inverse_gnomonic(PlanePoint::new(-u, t), tan);
            prop_assert!((dtheta(a.theta(), tan.theta()) + dtheta(b.theta(), tan.theta())).abs() < 1e-12);
            let eq = sc(tan.theta(), 0.0);
            let c = inverse_gnomonic(PlanePoint::new(u, t), eq);
            let d = inverse_gnomonic(PlanePoint::new(u, -t), eq);
            prop_assert!((c.phi() + d.phi()).abs() < 1e-12);
        }

        #[test]
        fn sphere_to_pixel_monotone(t1 in -PI..PI, t2 in -PI..PI, p1 in -FRAC_PI_2..=FRAC_PI_2, p2 in -FRAC_PI_2..=FRAC_PI_2) {
            let spec = EquirectSpec::new(1024, 512).unwrap();
            let (a, b) = (sc(t1, p1), sc(t2, p2));
            let (pa, pb) = (sphere_to_pixel(a, &spec), sphere_to_pixel(b, &spec));
            if a.theta() < b.theta() { prop_assert!(pa.x < pb.x); }
            if a.phi() < b.phi() { prop_assert!(pa.y > pb.y); }
        }
    }
}
