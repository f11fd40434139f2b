//! X-ray transform, backprojection and band-limited filtered backprojection.
//!
//! Normalisation: w_b(u) = (1/8π²)∫ e^{iσu}|σ|Φ̂(|σ|/b)dσ, so that
//! P♯[w_b ⋆ P f] = W_b ⋆ f with W_b = F⁻¹[Φ̂(|ξ|/b)], i.e. ∫W_b = Φ̂(0) = 1.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::ops::{Add, Mul};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::fields::{Field2, Lattice, ScalarField};
use crate::geometry::{SinogramLayout, Vec2};
use crate::quad::GaussLegendre;

/// Values that can be interpolated and summed: real or complex samples.
pub trait Lin: Copy + Send + Sync + Default + Add<Output = Self> + Mul<f64, Output = Self> {}
impl Lin for f64 {}
impl Lin for Complex64 {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// 1 on [0,½], cos²(π(t−½)) on [½,1], 0 beyond.
    #[default]
    RaisedCosine,
    /// Indicator of [0,1]; test profile only (W₁ ∉ L¹).
    Ideal,
    /// Identically zero.
    Zero,
}

impl Profile {
    pub fn eval(&self, t: f64) -> f64 {
        let t = t.abs();
        match self {
            Profile::RaisedCosine => {
                if t <= 0.5 {
                    1.0
                } else if t < 1.0 {
                    let c = (PI * (t - 0.5)).cos();
                    c * c
                } else {
                    0.0
                }
            }
            Profile::Ideal => {
                if t <= 1.0 { 1.0 } else { 0.0 }
            }
            Profile::Zero => 0.0,
        }
    }

    /// Subintervals of [0,1] on which the profile is smooth.
    fn pieces(&self) -> &'static [(f64, f64)] {
        match self {
            Profile::RaisedCosine => &[(0.0, 0.5), (0.5, 1.0)],
            Profile::Ideal => &[(0.0, 1.0)],
            Profile::Zero => &[],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub profile: Profile,
    pub b: f64,
    /// Upsampling of the filtered sinogram in s before backprojection.
    pub upsample: usize,
}

impl FilterSpec {
    pub fn new(b: f64) -> Self {
        FilterSpec { profile: Profile::RaisedCosine, b, upsample: 4 }
    }
    pub fn with_profile(mut self, p: Profile) -> Self {
        self.profile = p;
        self
    }
}

thread_local! {
    static GL_CACHE: RefCell<HashMap<usize, Arc<GaussLegendre>>> = RefCell::new(HashMap::new());
}

pub(crate) fn gauss(n: usize) -> Arc<GaussLegendre> {
    GL_CACHE.with(|c| c.borrow_mut().entry(n).or_insert_with(|| Arc::new(GaussLegendre::new(n))).clone())
}

/// ∫₀¹ g(t)Φ̂(t)dt piecewise, with enough nodes for an oscillation rate `freq`.
fn profile_integral(p: Profile, freq: f64, g: impl Fn(f64) -> f64) -> f64 {
    let n = 24 + (freq.abs() / 3.0).ceil() as usize;
    let gl = gauss(n);
    p.pieces().iter().map(|&(a, b)| gl.integrate(a, b, |t| g(t) * p.eval(t))).sum()
}

/// w₁(v) for the given profile.
pub fn filter_w1(v: f64, p: Profile) -> f64 {
    profile_integral(p, v, |t| t * (t * v).cos()) / (4.0 * PI * PI)
}

/// w_b(u) = b²w₁(bu).
pub fn filter_w(u: f64, spec: &FilterSpec) -> f64 {
    spec.b * spec.b * filter_w1(spec.b * u, spec.profile)
}

/// Bessel J₀: power series for z ≤ 8, Bessel's integral for z ≤ 30,
/// Hankel asymptotics beyond.
pub fn bessel_j0(z: f64) -> f64 {
    let z = z.abs();
    if z > 8.0 && z <= 30.0 {
        // (1/π)∫₀^π cos(z sin t)dt; the midpoint rule is spectrally accurate here
        let n = 48 + z as usize;
        let h = PI / n as f64;
        return (0..n).map(|k| (z * ((k as f64 + 0.5) * h).sin()).cos()).sum::<f64>() / n as f64;
    }
    if z <= 8.0 {
        let q = -0.25 * z * z;
        let mut term: f64 = 1.0;
        let mut sum: f64 = 1.0;
        let mut k = 1.0;
        while term.abs() > 1e-17 * sum.abs().max(1e-3) || k < 5.0 {
            term *= q / (k * k);
            sum += term;
            k += 1.0;
            if k > 200.0 {
                break;
            }
        }
        sum
    } else {
        // Hankel expansion: J₀ = √(2/πz)(P cos χ − Q sin χ), with
        // P = t₀ − t₂ + t₄ − …, Q = t₁ − t₃ + …, t_k = t_{k−1}(2k−1)²/(8kz);
        // truncated before the terms start growing.
        let (mut p, mut q) = (1.0, 0.0);
        let mut t = 1.0;
        for k in 1..60 {
            let a = (2 * k - 1) as f64;
            let next = t * a * a / (8.0 * k as f64 * z);
            if next > t || next < 1e-18 {
                break;
            }
            t = next;
            let sign = if ((k + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            if k % 2 == 1 {
                q += sign * t;
            } else {
                p += sign * t;
            }
        }
        let chi = z - 0.25 * PI;
        (2.0 / (PI * z)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}

/// W₁(u) = (1/2π)∫₀¹ Φ̂(t) J₀(tu) t dt.
pub fn mollifier_w1(u: f64, p: Profile) -> f64 {
    profile_integral(p, u, |t| t * bessel_j0(t * u)) / (2.0 * PI)
}

/// W_b(x) = b²W₁(b|x|).
pub fn mollifier_w(x: Vec2, spec: &FilterSpec) -> f64 {
    spec.b * spec.b * mollifier_w1(spec.b * x.norm(), spec.profile)
}

/// ‖W_b‖_{L¹} by radial quadrature out to b|x| = `u_max`.
pub fn mollifier_l1(spec: &FilterSpec, u_max: f64) -> f64 {
    // ∫|W_b| dx = 2π∫|W₁(u)| u du — independent of b by scaling; integrate in x anyway
    let b = spec.b;
    let gl = gauss(16);
    let panels = (u_max / 0.25).ceil() as usize;
    2.0 * PI * gl.composite(0.0, u_max / b, panels, |rr| mollifier_w(Vec2::new(rr, 0.0), spec).abs() * rr)
}

/// ‖w₁‖_{L¹} by direct quadrature out to `u_max`.
pub fn filter_w1_l1(p: Profile, u_max: f64) -> f64 {
    let gl = gauss(16);
    let panels = (u_max / 0.25).ceil() as usize;
    2.0 * gl.composite(0.0, u_max, panels, |u| filter_w1(u, p).abs())
}

/// Radial table of W₁ with 4-point Lagrange interpolation.
pub struct RadialTable {
    du: f64,
    vals: Vec<f64>,
}

impl RadialTable {
    pub fn mollifier(p: Profile, u_max: f64) -> Self {
        let du = 0.01;
        let n = (u_max / du).ceil() as usize + 4;
        let vals = crate::exec::map(n, |i| mollifier_w1(i as f64 * du, p));
        RadialTable { du, vals }
    }

    /// Table of w₁ (even in u, band-limited to |σ| ≤ 1).
    pub fn filter(p: Profile, u_max: f64) -> Self {
        let du = 0.01;
        let n = (u_max / du).ceil() as usize + 4;
        let vals = crate::exec::map(n, |i| filter_w1(i as f64 * du, p));
        RadialTable { du, vals }
    }

    pub fn eval(&self, u: f64) -> f64 {
        let f = u.abs() / self.du;
        let i = f.floor() as usize;
        if i + 2 >= self.vals.len() {
            return 0.0;
        }
        let t = f - i as f64;
        // even extension for the node at −du
        let ym = if i == 0 { self.vals[1] } else { self.vals[i - 1] };
        let (y0, y1, y2) = (self.vals[i], self.vals[i + 1], self.vals[i + 2]);
        lagrange4(ym, y0, y1, y2, t)
    }
}

/// Cubic through samples at −1, 0, 1, 2, evaluated at t ∈ [0, 1].
#[inline]
pub(crate) fn lagrange4<T: Lin>(ym: T, y0: T, y1: T, y2: T, t: f64) -> T {
    let wm = -t * (t - 1.0) * (t - 2.0) / 6.0;
    let w0 = (t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0;
    let w1 = -(t + 1.0) * t * (t - 2.0) / 2.0;
    let w2 = (t + 1.0) * t * (t - 1.0) / 6.0;
    ym * wm + y0 * w0 + y1 * w1 + y2 * w2
}

/// P[f](s, θ) on the layout, by 2-point Gauss panels no longer than `step`.
pub fn radon<F: Field2 + ?Sized>(f: &F, layout: &SinogramLayout, step: f64) -> Vec<f64> {
    let sup = f.support();
    let gl = GaussLegendre::new(2);
    crate::exec::map(layout.len(), |idx| {
        let c = layout.coord(idx);
        let t = c.dir();
        let n = c.normal();
        let off = c.s - sup.center.dot(n);
        if off.abs() >= sup.radius {
            return 0.0;
        }
        let half = (sup.radius * sup.radius - off * off).sqrt();
        let tc = sup.center.dot(t);
        let panels = (2.0 * half / step).ceil() as usize;
        let base = n * c.s;
        gl.composite(tc - half, tc + half, panels, |tt| f.value(base + t * tt))
    })
}

/// Radon transform of a lattice field at half-cell steps.
pub fn radon_field(f: &ScalarField, layout: &SinogramLayout) -> Vec<f64> {
    radon(f, layout, f.lattice.h() / 2.0)
}

#[inline]
fn interp_linear<T: Lin>(col: &[T], s0: f64, ds: f64, s: f64) -> T {
    let f = (s - s0) / ds;
    let n = col.len() as isize;
    if f <= -1.0 || f >= n as f64 {
        return T::default();
    }
    let i = f.floor() as isize;
    let t = f - i as f64;
    let at = |k: isize| if k < 0 || k >= n { T::default() } else { col[k as usize] };
    at(i) * (1.0 - t) + at(i + 1) * t
}

fn columns<T: Lin>(g: &[T], layout: &SinogramLayout) -> Vec<Vec<T>> {
    (0..layout.n_theta)
        .map(|j| (0..layout.n_s).map(|i| g[layout.index(i, j)]).collect())
        .collect()
}

/// P♯[g](x) = ∫ g(x·θ̂⊥, θ)dθ: trapezoid in θ, linear interpolation in s.
pub fn backproject<T: Lin>(g: &[T], layout: &SinogramLayout, out: Lattice) -> Vec<T> {
    assert_eq!(g.len(), layout.len());
    let cols = columns(g, layout);
    let normals: Vec<Vec2> = (0..layout.n_theta).map(|j| Vec2::from_angle(layout.theta(j)).perp()).collect();
    let (s0, ds, dth) = (layout.s(0), layout.ds(), layout.dtheta());
    crate::exec::map(out.len(), |idx| {
        let x = out.point(idx);
        let mut acc = T::default();
        for (col, n) in cols.iter().zip(&normals) {
            acc = acc + interp_linear(col, s0, ds, x.dot(*n));
        }
        acc * dth
    })
}

pub fn backproject_field(g: &[f64], layout: &SinogramLayout, out: Lattice) -> ScalarField {
    let values = backproject(g, layout, out);
    ScalarField { lattice: out, values, support_radius: out.r * std::f64::consts::SQRT_2 }
}

/// P^{−1,b}[g] = P♯[w_b ⋆_s g].
///
/// The s-convolution is a direct sum evaluated on a grid `upsample` times
/// finer than the data, extended to cover |s| ≤ √2·r; backprojection then
/// interpolates that grid with cubic Lagrange weights.
pub fn fbp<T: Lin>(g: &[T], spec: &FilterSpec, layout: &SinogramLayout, out: Lattice) -> Vec<T> {
    let ds = layout.ds();
    filtered_backprojection(g, spec.upsample, layout, out, |u| filter_w(u, spec), ds, layout.dtheta())
}

/// Pointwise variance of `fbp` output for independent sinogram samples with
/// variances `var`: the filter and quadrature weights enter squared. The
/// cubic interpolation in s is treated as exact (cross terms dropped).
pub fn fbp_variance(var: &[f64], spec: &FilterSpec, layout: &SinogramLayout, out: Lattice) -> Vec<f64> {
    let ds = layout.ds();
    let dth = layout.dtheta();
    filtered_backprojection(var, spec.upsample, layout, out, |u| filter_w(u, spec).powi(2), ds * ds, dth * dth)
}

fn filtered_backprojection<T: Lin>(
    g: &[T],
    upsample: usize,
    layout: &SinogramLayout,
    out: Lattice,
    kernel: impl Fn(f64) -> f64 + Sync,
    ds_weight: f64,
    dth_weight: f64,
) -> Vec<T> {
    assert_eq!(g.len(), layout.len());
    let ups = upsample.max(1);
    let ds = layout.ds();
    let fine = ds / ups as f64;
    let s0 = layout.s(0);
    // fine grid u_k = s0 + (k − k0)·fine, covering [−√2 r − 3 fine, √2 r + 3 fine]
    let reach = out.r * std::f64::consts::SQRT_2 + 3.0 * fine;
    let k0 = ((s0 + reach) / fine).ceil() as isize;
    let nf = (((reach - s0) / fine).ceil() as isize + k0 + 1) as usize;
    let n_s = layout.n_s as isize;
    // table of the kernel at every offset u_k − s_i = (k − k0 − ups·i)·fine
    let m_lo = -k0 - ups as isize * (n_s - 1);
    let m_hi = nf as isize - 1 - k0;
    let table: Vec<f64> = crate::exec::map((m_hi - m_lo + 1) as usize, |t| kernel((m_lo + t as isize) as f64 * fine));
    let cols = columns(g, layout);
    let filtered: Vec<Vec<T>> = crate::exec::map(layout.n_theta, |j| {
        let col = &cols[j];
        (0..nf)
            .map(|k| {
                let mut acc = T::default();
                for (i, v) in col.iter().enumerate() {
                    let m = k as isize - k0 - ups as isize * i as isize;
                    acc = acc + *v * table[(m - m_lo) as usize];
                }
                acc * ds_weight
            })
            .collect()
    });
    let normals: Vec<Vec2> = (0..layout.n_theta).map(|j| Vec2::from_angle(layout.theta(j)).perp()).collect();
    let u0 = s0 - k0 as f64 * fine;
    crate::exec::map(out.len(), |idx| {
        let x = out.point(idx);
        let mut acc = T::default();
        for (q, n) in filtered.iter().zip(&normals) {
            let f = (x.dot(*n) - u0) / fine;
            let i = f.floor() as usize;
            let t = f - i as f64;
            acc = acc + lagrange4(q[i - 1], q[i], q[i + 1], q[i + 2], t);
        }
        acc * dth_weight
    })
}

pub fn fbp_field(g: &[f64], spec: &FilterSpec, layout: &SinogramLayout, out: Lattice) -> ScalarField {
    let values = fbp(g, spec, layout, out);
    ScalarField { lattice: out, values, support_radius: out.r * std::f64::consts::SQRT_2 }
}

/// The same operator through its Fourier form (1/4π)·I^{−1,b}∘P♯: the 2D
/// transform of P♯g is taken from the sinogram by the slice identity and the
/// inverse transform evaluated by polar quadrature. Slow; for cross-checks.
pub fn fbp_fourier(g: &[f64], spec: &FilterSpec, layout: &SinogramLayout, out: Lattice) -> Vec<f64> {
    let b = spec.b;
    let n_sig = 48 + (b * layout.domain.r * 2.0) as usize;
    let gl = gauss(n_sig);
    let mut nodes = Vec::new();
    for &(lo, hi) in spec.profile.pieces() {
        for (x, w) in gl.nodes.iter().zip(&gl.weights) {
            let t = 0.5 * (lo + hi) + 0.5 * (hi - lo) * x;
            nodes.push((t * b, 0.5 * (hi - lo) * w * b));
        }
    }
    let cols = columns(g, layout);
    let ds = layout.ds();
    // ĝ_j(σ) for σ ≥ 0; the σ < 0 half is folded in as the conjugate-symmetric term
    let ghat: Vec<Vec<Complex64>> = cols
        .iter()
        .map(|col| {
            nodes
                .iter()
                .map(|&(sig, _)| {
                    col.iter()
                        .enumerate()
                        .map(|(i, v)| Complex64::from_polar(*v * ds, -sig * layout.s(i)))
                        .sum()
                })
                .collect()
        })
        .collect();
    let dth = layout.dtheta();
    let normals: Vec<Vec2> = (0..layout.n_theta).map(|j| Vec2::from_angle(layout.theta(j)).perp()).collect();
    crate::exec::map(out.len(), |idx| {
        let x = out.point(idx);
        let mut acc = 0.0;
        for (gh, n) in ghat.iter().zip(&normals) {
            let u = x.dot(*n);
            for (&(sig, w), v) in nodes.iter().zip(gh) {
                // ∫_ℝ |σ|Φ̂ e^{iσu} ĝ dσ for real g = 2 Re ∫₀^∞
                acc += 2.0 * w * sig * spec.profile.eval(sig / b) * (v * Complex64::from_polar(1.0, sig * u)).re;
            }
        }
        acc * dth / (8.0 * PI * PI)
    })
}

fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    let mut planner = FftPlanner::new();
    let fft = if inverse { planner.plan_fft_inverse(n) } else { planner.plan_fft_forward(n) };
    for row in data.chunks_mut(n) {
        fft.process(row);
    }
    let mut col = vec![Complex64::default(); n];
    for c in 0..n {
        for r in 0..n {
            col[r] = data[r * n + c];
        }
        fft.process(&mut col);
        for r in 0..n {
            data[r * n + c] = col[r];
        }
    }
}

/// f_b = W_b ⋆ f as the lattice sum Σ_y W_b(x−y)f(y)h², evaluated with a
/// zero-padded FFT (the same sum as direct convolution, without wrap-around).
pub fn lowpass_reference(f: &ScalarField, spec: &FilterSpec) -> ScalarField {
    let n = f.lattice.n;
    let h = f.lattice.h();
    let m = 2 * n;
    let u_max = spec.b * h * (n as f64) * std::f64::consts::SQRT_2 + 1.0;
    let table = RadialTable::mollifier(spec.profile, u_max);
    let b2h2 = spec.b * spec.b * h * h;
    let mut ker = vec![Complex64::default(); m * m];
    for dy in -(n as isize - 1)..n as isize {
        for dx in -(n as isize - 1)..n as isize {
            let u = spec.b * h * ((dx * dx + dy * dy) as f64).sqrt();
            let iy = dy.rem_euclid(m as isize) as usize;
            let ix = dx.rem_euclid(m as isize) as usize;
            ker[iy * m + ix] = Complex64::new(b2h2 * table.eval(u), 0.0);
        }
    }
    let mut img = vec![Complex64::default(); m * m];
    for iy in 0..n {
        for ix in 0..n {
            img[iy * m + ix] = Complex64::new(f.values[iy * n + ix], 0.0);
        }
    }
    fft2(&mut ker, m, false);
    fft2(&mut img, m, false);
    for (a, k) in img.iter_mut().zip(&ker) {
        *a *= k;
    }
    fft2(&mut img, m, true);
    let scale = 1.0 / (m * m) as f64;
    let mut values = vec![0.0; n * n];
    for iy in 0..n {
        for ix in 0..n {
            values[iy * n + ix] = img[iy * m + ix].re * scale;
        }
    }
    ScalarField { lattice: f.lattice, values, support_radius: f.lattice.r * std::f64::consts::SQRT_2 }
}
