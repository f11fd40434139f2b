//! Disk domain, parallel-beam line coordinates and the data cutoff χ.

use std::f64::consts::PI;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }
    pub fn from_angle(t: f64) -> Self {
        let (s, c) = t.sin_cos();
        Vec2 { x: c, y: s }
    }
    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }
    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }
    pub fn norm2(self) -> f64 {
        self.x * self.x + self.y * self.y
    }
    pub fn unit(self) -> Vec2 {
        self * (1.0 / self.norm())
    }
    /// Rotation by +π/2.
    pub fn perp(self) -> Vec2 {
        Vec2::new(-self.y, self.x)
    }
    pub fn dist(self, o: Vec2) -> f64 {
        (self - o).norm()
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}
impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}
impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, a: f64) -> Vec2 {
        Vec2::new(self.x * a, self.y * a)
    }
}
impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

/// The disk B_r with a boundary collar of width `d` excluded from the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskDomain {
    pub r: f64,
    pub d: f64,
}

impl DiskDomain {
    pub fn new(r: f64, d: f64) -> Result<Self> {
        if !(r > 0.0 && d > 0.0 && d < r / 2.0) {
            return Err(Error::Config(format!("need 0 < D < r/2, got r={r}, D={d}")));
        }
        Ok(DiskDomain { r, d })
    }
    /// Diameter Δ.
    pub fn diameter(&self) -> f64 {
        2.0 * self.r
    }
    /// Radius of the region that may carry scatterers, r − 2D.
    pub fn inner_radius(&self) -> f64 {
        self.r - 2.0 * self.d
    }
    /// Largest |s| on the data grid, r − D.
    pub fn s_max(&self) -> f64 {
        self.r - self.d
    }
    pub fn contains(&self, p: Vec2) -> bool {
        p.norm() <= self.r * (1.0 + 1e-12)
    }
}

/// A line {sθ̂⊥ + tθ̂}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParallelCoord {
    pub s: f64,
    pub theta: f64,
}

impl ParallelCoord {
    pub fn new(s: f64, theta: f64) -> Self {
        ParallelCoord { s, theta: wrap_angle(theta) }
    }
    pub fn dir(&self) -> Vec2 {
        Vec2::from_angle(self.theta)
    }
    pub fn normal(&self) -> Vec2 {
        self.dir().perp()
    }
}

/// Map an angle to [0, 2π).
pub fn wrap_angle(t: f64) -> f64 {
    let w = t.rem_euclid(2.0 * PI);
    if w >= 2.0 * PI { 0.0 } else { w }
}

/// Unsigned distance between two angles on the circle, in [0, π].
pub fn angle_dist(a: f64, b: f64) -> f64 {
    let d = wrap_angle(a - b);
    d.min(2.0 * PI - d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryPair {
    pub x0: Vec2,
    pub xc: Vec2,
    pub e0: Vec2,
    pub d0: f64,
}

pub fn boundary_points(c: ParallelCoord, d: &DiskDomain) -> Result<BoundaryPair> {
    if c.s.abs() >= d.r {
        return Err(Error::Domain(format!("|s| = {} not below r = {}", c.s.abs(), d.r)));
    }
    let h = (d.r * d.r - c.s * c.s).sqrt();
    let t = c.dir();
    let m = c.normal() * c.s;
    Ok(BoundaryPair { x0: m - t * h, xc: m + t * h, e0: t, d0: 2.0 * h })
}

fn smoothstep5(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Data cutoff: 1 on |s| ≤ r−2D, 0 on |s| ≥ r−D, quintic in between.
pub fn chi(s: f64, d: &DiskDomain) -> f64 {
    let a = s.abs();
    let lo = d.r - 2.0 * d.d;
    if a <= lo {
        1.0
    } else if a >= d.r - d.d {
        0.0
    } else {
        1.0 - smoothstep5((a - lo) / d.d)
    }
}

/// First and second partials of the boundary points in (s, θ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryJacobians {
    pub dx0_ds: Vec2,
    pub dx0_dt: Vec2,
    pub dxc_ds: Vec2,
    pub dxc_dt: Vec2,
    pub d2x0_ss: Vec2,
    pub d2x0_st: Vec2,
    pub d2x0_tt: Vec2,
    pub d2xc_ss: Vec2,
    pub d2xc_st: Vec2,
    pub d2xc_tt: Vec2,
}

pub fn boundary_jacobians(c: ParallelCoord, d: &DiskDomain) -> Result<BoundaryJacobians> {
    if c.s.abs() >= d.r - d.d / 2.0 {
        return Err(Error::Domain(format!("|s| = {} too close to the boundary", c.s.abs())));
    }
    let bp = boundary_points(c, d)?;
    let r2 = d.r * d.r;
    let h = (r2 - c.s * c.s).sqrt();
    let t = c.dir();
    let n = c.normal();
    let dx0_ds = n + t * (c.s / h);
    let dxc_ds = n - t * (c.s / h);
    let curv = r2 / (h * h * h);
    Ok(BoundaryJacobians {
        dx0_ds,
        dx0_dt: dx0_ds * (-h),
        dxc_ds,
        dxc_dt: dxc_ds * h,
        d2x0_ss: t * curv,
        d2x0_st: bp.x0 * (1.0 / h),
        d2x0_tt: -bp.x0,
        d2xc_ss: t * (-curv),
        d2xc_st: bp.xc * (-1.0 / h),
        d2xc_tt: -bp.xc,
    })
}

/// Midpoint sampling of 𝒵_D: s_i = −(r−D) + (i+½)Δs, θ_j = jΔθ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinogramLayout {
    pub domain: DiskDomain,
    pub n_s: usize,
    pub n_theta: usize,
}

impl SinogramLayout {
    pub fn new(domain: DiskDomain, n_s: usize, n_theta: usize) -> Self {
        SinogramLayout { domain, n_s, n_theta }
    }
    pub fn ds(&self) -> f64 {
        2.0 * self.domain.s_max() / self.n_s as f64
    }
    pub fn dtheta(&self) -> f64 {
        2.0 * PI / self.n_theta as f64
    }
    pub fn s(&self, i: usize) -> f64 {
        -self.domain.s_max() + (i as f64 + 0.5) * self.ds()
    }
    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }
    pub fn len(&self) -> usize {
        self.n_s * self.n_theta
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
    /// Storage is s-major: index = i·n_θ + j.
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n_theta + j
    }
    pub fn coord(&self, idx: usize) -> ParallelCoord {
        ParallelCoord::new(self.s(idx / self.n_theta), self.theta(idx % self.n_theta))
    }
}
