//! Coefficient fields, the phase function, attenuation and phantoms.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boundary_points, DiskDomain, ParallelCoord, Vec2};
use crate::quad::GaussLegendre;

/// A disk outside of which a field vanishes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Support {
    pub center: Vec2,
    pub radius: f64,
}

impl Support {
    pub fn contains(&self, p: Vec2) -> bool {
        (p - self.center).norm2() < self.radius * self.radius
    }
}

/// A real function on the plane with known compact support.
pub trait Field2: Sync {
    fn value(&self, p: Vec2) -> f64;
    fn support(&self) -> Support;
}

/// Closure-backed field, mostly for tests and oracles.
pub struct FnField<F> {
    pub f: F,
    pub support: Support,
}

impl<F: Fn(Vec2) -> f64 + Sync> Field2 for FnField<F> {
    fn value(&self, p: Vec2) -> f64 {
        if self.support.contains(p) { (self.f)(p) } else { 0.0 }
    }
    fn support(&self) -> Support {
        self.support
    }
}

/// n×n cell-centred lattice over [−r, r]².
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub n: usize,
    pub r: f64,
}

impl Lattice {
    pub fn new(n: usize, r: f64) -> Self {
        Lattice { n, r }
    }
    pub fn h(&self) -> f64 {
        2.0 * self.r / self.n as f64
    }
    pub fn coord(&self, i: usize) -> f64 {
        -self.r + (i as f64 + 0.5) * self.h()
    }
    /// Point of flat index `idx = iy·n + ix`.
    pub fn point(&self, idx: usize) -> Vec2 {
        Vec2::new(self.coord(idx % self.n), self.coord(idx / self.n))
    }
    pub fn len(&self) -> usize {
        self.n * self.n
    }
    pub fn is_empty(&self) -> bool {
        self.n == 0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub lattice: Lattice,
    pub values: Vec<f64>,
    pub support_radius: f64,
}

impl ScalarField {
    pub fn zeros(lattice: Lattice) -> Self {
        ScalarField { lattice, values: vec![0.0; lattice.len()], support_radius: lattice.r }
    }

    pub fn sample<F: Field2 + ?Sized>(f: &F, lattice: Lattice) -> Self {
        let sup = f.support();
        let values = crate::exec::map(lattice.len(), |i| f.value(lattice.point(i)));
        ScalarField {
            lattice,
            values,
            // bilinear interpolation leaks up to one cell past the last nonzero node
            support_radius: (sup.center.norm() + sup.radius + 1.5 * lattice.h())
                .min(lattice.r * std::f64::consts::SQRT_2),
        }
    }

    pub fn from_fn<F: Fn(Vec2) -> f64 + Sync>(lattice: Lattice, f: F) -> Self {
        let values = crate::exec::map(lattice.len(), |i| f(lattice.point(i)));
        ScalarField { lattice, values, support_radius: lattice.r * std::f64::consts::SQRT_2 }
    }

    fn node(&self, ix: isize, iy: isize) -> f64 {
        let n = self.lattice.n as isize;
        if ix < 0 || iy < 0 || ix >= n || iy >= n {
            0.0
        } else {
            self.values[(iy * n + ix) as usize]
        }
    }

    /// Bilinear interpolation, zero beyond the outermost cell centres.
    pub fn interp(&self, p: Vec2) -> f64 {
        let h = self.lattice.h();
        let fx = (p.x + self.lattice.r) / h - 0.5;
        let fy = (p.y + self.lattice.r) / h - 0.5;
        let n = self.lattice.n as f64;
        if fx <= -1.0 || fy <= -1.0 || fx >= n || fy >= n {
            return 0.0;
        }
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let (ix, iy) = (x0 as isize, y0 as isize);
        let a = self.node(ix, iy) * (1.0 - tx) + self.node(ix + 1, iy) * tx;
        let b = self.node(ix, iy + 1) * (1.0 - tx) + self.node(ix + 1, iy + 1) * tx;
        a * (1.0 - ty) + b * ty
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Sup norm over lattice points with |x| ≤ radius.
    pub fn sup_norm_in(&self, radius: f64) -> f64 {
        let mut m: f64 = 0.0;
        for (i, v) in self.values.iter().enumerate() {
            if self.lattice.point(i).norm() <= radius {
                m = m.max(v.abs());
            }
        }
        m
    }

    pub fn map(&self, f: impl Fn(Vec2, f64) -> f64) -> ScalarField {
        let values = self.values.iter().enumerate().map(|(i, v)| f(self.lattice.point(i), *v)).collect();
        ScalarField { lattice: self.lattice, values, support_radius: self.support_radius }
    }

    pub fn zip(&self, o: &ScalarField, f: impl Fn(f64, f64) -> f64) -> ScalarField {
        assert_eq!(self.lattice, o.lattice, "lattice mismatch");
        let values = self.values.iter().zip(&o.values).map(|(a, b)| f(*a, *b)).collect();
        ScalarField { lattice: self.lattice, values, support_radius: self.support_radius.max(o.support_radius) }
    }
}

impl Field2 for ScalarField {
    fn value(&self, p: Vec2) -> f64 {
        self.interp(p)
    }
    fn support(&self) -> Support {
        Support { center: Vec2::default(), radius: self.support_radius }
    }
}

/// ρ(x) = (r² − |x|²)^{−1/2}.
pub fn rho(p: Vec2, r: f64) -> f64 {
    1.0 / (r * r - p.norm2()).sqrt()
}

/// Attenuation coefficient: a constant (closed-form path integrals) or a grid.
#[derive(Debug, Clone, PartialEq)]
pub enum Sigma {
    Constant(f64),
    Field(ScalarField),
}

impl Sigma {
    pub fn zero() -> Self {
        Sigma::Constant(0.0)
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            Sigma::Constant(c) => c.abs(),
            Sigma::Field(f) => f.sup_norm(),
        }
    }

    pub fn value(&self, p: Vec2) -> f64 {
        match self {
            Sigma::Constant(c) => *c,
            Sigma::Field(f) => f.interp(p),
        }
    }

    /// ∫ σ along the segment [a, b] (panels no longer than a grid cell).
    pub fn line_integral(&self, a: Vec2, b: Vec2) -> f64 {
        let len = a.dist(b);
        match self {
            Sigma::Constant(c) => c * len,
            Sigma::Field(f) => segment_integral(f, a, b, 1),
        }
    }

    pub fn attenuation(&self, a: Vec2, b: Vec2) -> f64 {
        match self {
            Sigma::Constant(c) if *c == 0.0 => 1.0,
            _ => (-self.line_integral(a, b)).exp(),
        }
    }
}

/// ∫ f along [a, b]. The segment is cut at every lattice line, where the
/// bilinear interpolant is quadratic in the arc parameter, so 4-point Gauss
/// panels are exact up to rounding; `panels` adds uniform cuts on top.
fn segment_integral(f: &ScalarField, a: Vec2, b: Vec2, panels: usize) -> f64 {
    thread_local! {
        static GL4: GaussLegendre = GaussLegendre::new(4);
    }
    let len = a.dist(b);
    if len == 0.0 {
        return 0.0;
    }
    let lat = f.lattice;
    let h = lat.h();
    let mut cuts: Vec<f64> = (0..=panels.max(1)).map(|p| p as f64 / panels.max(1) as f64).collect();
    for (pa, pb) in [(a.x, b.x), (a.y, b.y)] {
        if pa == pb {
            continue;
        }
        let fa = (pa + lat.r) / h - 0.5;
        let fb = (pb + lat.r) / h - 0.5;
        let (lo, hi) = (fa.min(fb).ceil() as i64, fa.max(fb).floor() as i64);
        for i in lo..=hi {
            let t = (i as f64 - fa) / (fb - fa);
            if t > 0.0 && t < 1.0 {
                cuts.push(t);
            }
        }
    }
    cuts.sort_by(f64::total_cmp);
    let d = b - a;
    GL4.with(|gl| {
        cuts.windows(2)
            .filter(|w| w[1] > w[0])
            .map(|w| gl.integrate(w[0], w[1], |t| f.interp(a + d * t)))
            .sum::<f64>()
            * len
    })
}

fn check_in_disk(p: Vec2, r: f64) -> Result<()> {
    if p.norm() > r * (1.0 + 1e-12) {
        Err(Error::Domain(format!("point ({}, {}) outside the disk of radius {r}", p.x, p.y)))
    } else {
        Ok(())
    }
}

/// E(x, y) with an explicit panel count (4-point Gauss-Legendre per panel).
pub fn attenuation(x: Vec2, y: Vec2, sigma: &ScalarField, n_quad: usize) -> Result<f64> {
    check_in_disk(x, sigma.lattice.r)?;
    check_in_disk(y, sigma.lattice.r)?;
    if n_quad < 2 {
        return Err(Error::Precondition("n_quad must be at least 2".into()));
    }
    Ok((-segment_integral(sigma, x, y, n_quad)).exp())
}

/// Broken-path attenuation E(x0, x, xc) = E(x0, x)·E(x, xc).
pub fn attenuation_path(x0: Vec2, x: Vec2, xc: Vec2, sigma: &Sigma, r: f64) -> Result<f64> {
    for p in [x0, x, xc] {
        check_in_disk(p, r)?;
    }
    Ok(sigma.attenuation(x0, x) * sigma.attenuation(x, xc))
}

/// P[σ](s, θ) over the full chord.
pub fn radon_sigma(c: ParallelCoord, sigma: &Sigma, d: &DiskDomain) -> Result<f64> {
    let bp = boundary_points(c, d)?;
    Ok(sigma.line_integral(bp.x0, bp.xc))
}

/// Scattering kernel φ(v′, v), a function of the turning angle only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PhaseFunction {
    /// φ ≡ 1/(2π).
    #[default]
    Isotropic,
    /// φ = (1 + g cos ∠(v′, v))/(2π): the cosine series truncated after the
    /// first harmonic; |g| < 1 keeps it positive.
    TruncatedCosine { g: f64 },
}

impl PhaseFunction {
    pub fn validate(&self) -> Result<()> {
        match self {
            PhaseFunction::TruncatedCosine { g } if !(g.abs() < 1.0) => {
                Err(Error::Config(format!("truncated-cosine anisotropy must satisfy |g| < 1, got {g}")))
            }
            _ => Ok(()),
        }
    }

    /// φ(v_in, v_out) for unit vectors.
    pub fn eval(&self, v_in: Vec2, v_out: Vec2) -> f64 {
        match self {
            PhaseFunction::Isotropic => 1.0 / (2.0 * PI),
            PhaseFunction::TruncatedCosine { g } => (1.0 + g * v_in.dot(v_out)) / (2.0 * PI),
        }
    }

    pub fn sup_norm(&self) -> f64 {
        match self {
            PhaseFunction::Isotropic => 1.0 / (2.0 * PI),
            PhaseFunction::TruncatedCosine { g } => (1.0 + g.abs()) / (2.0 * PI),
        }
    }

    /// φ(θ̂, θ̂), the forward value entering the amplitude A^ω.
    pub fn forward(&self) -> f64 {
        self.eval(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0))
    }

    pub fn is_isotropic(&self) -> bool {
        matches!(self, PhaseFunction::Isotropic)
    }
}

fn bump(t: f64) -> f64 {
    if t.abs() >= 1.0 { 0.0 } else { (1.0 - 1.0 / (1.0 - t * t)).exp() }
}

fn inf() -> f64 {
    f64::INFINITY
}

fn is_inf(w: &f64) -> bool {
    w.is_infinite()
}

/// Gaussian of width `width`, tapered to zero at `radius` by a C^∞ bump;
/// peak value `amplitude` at the centre.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussBump {
    pub center: [f64; 2],
    pub radius: f64,
    /// Omitted (∞) for a pure bump.
    #[serde(default = "inf", skip_serializing_if = "is_inf")]
    pub width: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Disk {
    pub center: [f64; 2],
    pub radius: f64,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Phantom {
    GaussianBumps { bumps: Vec<GaussBump> },
    Disks { disks: Vec<Disk> },
    /// amplitude·bump((|x−c| − (inner+outer)/2)/((outer−inner)/2)).
    SmoothRing { center: [f64; 2], inner: f64, outer: f64, amplitude: f64 },
}

impl Default for Phantom {
    fn default() -> Self {
        Phantom::GaussianBumps { bumps: vec![] }
    }
}

fn v2(c: [f64; 2]) -> Vec2 {
    Vec2::new(c[0], c[1])
}

impl Phantom {
    /// Component discs (centre, radius) bounding the support.
    fn pieces(&self) -> Vec<(Vec2, f64)> {
        match self {
            Phantom::GaussianBumps { bumps } => bumps.iter().map(|b| (v2(b.center), b.radius)).collect(),
            Phantom::Disks { disks } => disks.iter().map(|d| (v2(d.center), d.radius)).collect(),
            Phantom::SmoothRing { center, outer, .. } => vec![(v2(*center), *outer)],
        }
    }

    pub fn validate(&self, d: &DiskDomain) -> Result<()> {
        let lim = d.inner_radius() * (1.0 + 1e-12);
        for (c, rad) in self.pieces() {
            if !(rad > 0.0) || c.norm() + rad > lim {
                return Err(Error::Config(format!(
                    "phantom piece at ({}, {}) with radius {rad} leaves B_(r-2D) = B_{}",
                    c.x,
                    c.y,
                    d.inner_radius()
                )));
            }
        }
        if let Phantom::GaussianBumps { bumps } = self {
            if bumps.iter().any(|b| !(b.width > 0.0)) {
                return Err(Error::Config("bump width must be positive".into()));
            }
        }
        if let Phantom::SmoothRing { inner, outer, .. } = self {
            if !(0.0 <= *inner && inner < outer) {
                return Err(Error::Config("ring needs 0 <= inner < outer".into()));
            }
        }
        Ok(())
    }

    pub fn scaled(&self, a: f64) -> Phantom {
        let mut p = self.clone();
        match &mut p {
            Phantom::GaussianBumps { bumps } => bumps.iter_mut().for_each(|b| b.amplitude *= a),
            Phantom::Disks { disks } => disks.iter_mut().for_each(|d| d.value *= a),
            Phantom::SmoothRing { amplitude, .. } => *amplitude *= a,
        }
        p
    }

    pub fn is_empty(&self) -> bool {
        self.pieces().is_empty()
    }

    /// Rescale (down only) so that sup |kρ| over a fine sample is at most `k1`.
    pub fn capped_krho(&self, d: &DiskDomain, k1: f64) -> Phantom {
        let lat = Lattice::new(256, d.r);
        let mut m: f64 = 0.0;
        for i in 0..lat.len() {
            let p = lat.point(i);
            if p.norm() < d.r {
                m = m.max((self.value(p) * rho(p, d.r)).abs());
            }
        }
        if m > k1 { self.scaled(k1 / m) } else { self.clone() }
    }
}

impl Field2 for Phantom {
    fn value(&self, p: Vec2) -> f64 {
        match self {
            Phantom::GaussianBumps { bumps } => bumps
                .iter()
                .map(|b| {
                    let d2 = (p - v2(b.center)).norm2();
                    let t2 = d2 / (b.radius * b.radius);
                    if t2 >= 1.0 {
                        0.0
                    } else {
                        b.amplitude * (-d2 / (b.width * b.width) + 1.0 - 1.0 / (1.0 - t2)).exp()
                    }
                })
                .sum(),
            Phantom::Disks { disks } => disks
                .iter()
                .filter(|d| (p - v2(d.center)).norm() <= d.radius)
                .map(|d| d.value)
                .sum(),
            Phantom::SmoothRing { center, inner, outer, amplitude } => {
                let half = 0.5 * (outer - inner);
                let mid = 0.5 * (outer + inner);
                amplitude * bump(((p - v2(*center)).norm() - mid) / half)
            }
        }
    }

    fn support(&self) -> Support {
        let pieces = self.pieces();
        if pieces.is_empty() {
            return Support { center: Vec2::default(), radius: 0.0 };
        }
        let (mut lo, mut hi) = (Vec2::new(f64::MAX, f64::MAX), Vec2::new(f64::MIN, f64::MIN));
        for (c, r) in &pieces {
            lo = Vec2::new(lo.x.min(c.x - r), lo.y.min(c.y - r));
            hi = Vec2::new(hi.x.max(c.x + r), hi.y.max(c.y + r));
        }
        let center = (lo + hi) * 0.5;
        let radius = pieces.iter().map(|(c, r)| (*c - center).norm() + r).fold(0.0, f64::max);
        Support { center, radius }
    }
}

/// Sample a validated phantom on the n×n lattice over [−r, r]².
pub fn make_phantom(spec: &Phantom, d: &DiskDomain, n: usize) -> Result<ScalarField> {
    spec.validate(d)?;
    Ok(ScalarField::sample(spec, Lattice::new(n, d.r)))
}
