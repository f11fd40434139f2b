//! Stationary-phase machinery: one-dimensional oscillatory integrals with a
//! globally quadratic phase, the single-scattering phase φ₁ in chord
//! coordinates, the multiple-scattering phase φ₂(s, θ) with its critical
//! curve σ(θ) and reduced phase S₂, and the kernel β^ω.

use std::f64::consts::{FRAC_PI_4, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{PhaseFunction, Sigma};
use crate::geometry::{angle_dist, boundary_jacobians, boundary_points, chi, wrap_angle, DiskDomain, ParallelCoord, Vec2};
use crate::inversion::amplitude_a;
use crate::xray::{gauss, FilterSpec, RadialTable};

// ---------------------------------------------------------------- Fresnel

/// Fresnel integrals (C(x), S(x)) with kernel cos/sin(πt²/2): power series
/// below 1.5, Lentz continued fraction for erfc above.
pub fn fresnel_cs(x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    const FPMIN: f64 = 1e-300;
    let ax = x.abs();
    let (c, s) = if ax < 1e-150 {
        (ax, 0.0)
    } else if ax <= 1.5 {
        let fact = 0.5 * PI * ax * ax;
        let (mut sum, mut sums, mut sumc) = (0.0, 0.0, ax);
        let mut sign = 1.0;
        let mut odd = true;
        let mut term = ax;
        let mut n = 3.0;
        for k in 1..200 {
            term *= fact / k as f64;
            sum += sign * term / n;
            let test = sum.abs() * EPS;
            if odd {
                sign = -sign;
                sums = sum;
                sum = sumc;
            } else {
                sumc = sum;
                sum = sums;
            }
            if term < test {
                break;
            }
            odd = !odd;
            n += 2.0;
        }
        (sumc, sums)
    } else {
        let pix2 = PI * ax * ax;
        let mut b = Complex64::new(1.0, -pix2);
        let mut cc = Complex64::new(1.0 / FPMIN, 0.0);
        let mut d = 1.0 / b;
        let mut h = d;
        let mut n = -1.0;
        for _ in 2..300 {
            n += 2.0;
            let a = -n * (n + 1.0);
            b += 4.0;
            d = 1.0 / (a * d + b);
            cc = b + a / cc;
            let del = cc * d;
            h *= del;
            if (del.re - 1.0).abs() + del.im.abs() < EPS {
                break;
            }
        }
        h *= Complex64::new(ax, -ax);
        let cs = Complex64::new(0.5, 0.5) * (1.0 - Complex64::from_polar(1.0, 0.5 * pix2) * h);
        (cs.re, cs.im)
    };
    if x < 0.0 { (-c, -s) } else { (c, s) }
}

/// F_σ(u) = ∫_{−∞}^u e^{iσt²/2} dt, σ = ±1.
pub fn fresnel_f(u: f64, sign: f64) -> Complex64 {
    let sg = if sign < 0.0 { -1.0 } else { 1.0 };
    let sp = PI.sqrt();
    let (c, s) = fresnel_cs(u / sp);
    let half = Complex64::new(0.5, 0.5 * sg);
    sp * (half + Complex64::new(c, sg * s))
}

// ------------------------------------------------------- 1-D oscillatory integral

/// A one-dimensional real phase with two derivatives.
pub trait Phase1d {
    fn value(&self, x: f64) -> f64;
    fn d1(&self, x: f64) -> f64;
    fn d2(&self, x: f64) -> f64;
}

/// φ(x) = sign·x²/2.
#[derive(Debug, Clone, Copy)]
pub struct QuadraticPhase {
    pub sign: f64,
}

impl Phase1d for QuadraticPhase {
    fn value(&self, x: f64) -> f64 {
        0.5 * self.sign * x * x
    }
    fn d1(&self, x: f64) -> f64 {
        self.sign * x
    }
    fn d2(&self, _x: f64) -> f64 {
        self.sign
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StationaryPhase {
    pub i: Complex64,
    pub i0: Complex64,
    pub remainder: Complex64,
    /// Critical point X.
    pub x_crit: f64,
    /// K = |φ″(X)|.
    pub k: f64,
}

/// Monotone root of a strictly monotone g on [a, b] (sign change assumed):
/// bisection then two Newton steps with derivative `dg`.
fn monotone_root(g: impl Fn(f64) -> f64, dg: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let mut ga = g(a);
    if ga == 0.0 {
        return a;
    }
    if g(b) == 0.0 {
        return b;
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        let gm = g(m);
        if gm == 0.0 {
            return m;
        }
        if (gm > 0.0) == (ga > 0.0) {
            a = m;
            ga = gm;
        } else {
            b = m;
        }
    }
    let mut x = 0.5 * (a + b);
    for _ in 0..2 {
        let d = dg(x);
        if d != 0.0 {
            let nx = x - g(x) / d;
            if nx >= a - (b - a) && nx <= b + (b - a) {
                x = nx;
            }
        }
    }
    x
}

/// I = ∫ e^{iωφ} f over `support`, its leading term
/// I₀ = e^{iσπ/4}√(2π/(ωK)) e^{iωS} f(X), and the remainder I − I₀.
///
/// `bounds` = (Φ_m, Φ_M) must bracket |φ″| on the support.
pub fn stationary_phase_1d<P: Phase1d, F: Fn(f64) -> Complex64>(
    phase: &P,
    bounds: (f64, f64),
    amp: F,
    support: (f64, f64),
    omega: f64,
) -> Result<StationaryPhase> {
    let (lo, hi) = support;
    let (pm, pmax) = bounds;
    if !(lo < hi) || !(omega > 0.0) || !(pm > 0.0 && pm <= pmax) {
        return Err(Error::Domain("need lo < hi, ω > 0 and 0 < Φ_m ≤ Φ_M".into()));
    }
    let probe = 2048;
    let mut sign = 0.0;
    let mut slope_max: f64 = 0.0;
    for k in 0..=probe {
        let x = lo + (hi - lo) * k as f64 / probe as f64;
        let c = phase.d2(x);
        if !(c.abs() >= pm * (1.0 - 1e-12) && c.abs() <= pmax * (1.0 + 1e-12)) {
            return Err(Error::Precondition(format!("|φ″({x})| = {} outside [{pm}, {pmax}]", c.abs())));
        }
        let sg = c.signum();
        if sign == 0.0 {
            sign = sg;
        } else if sg != sign {
            return Err(Error::Precondition("φ″ changes sign on the support".into()));
        }
        slope_max = slope_max.max(phase.d1(x).abs());
    }

    // φ′ is monotone with |φ″| ≥ Φ_m, so the root lies within |φ′(a)|/Φ_m of a
    let (mut a, mut b) = (lo, hi);
    let (ga, gb) = (phase.d1(a), phase.d1(b));
    if ga * gb > 0.0 {
        if ga.abs() < gb.abs() {
            a = lo - ga.abs() / pm * 1.01;
            b = lo;
        } else {
            a = hi;
            b = hi + gb.abs() / pm * 1.01;
        }
    }
    let x_crit = monotone_root(|x| phase.d1(x), |x| phase.d2(x), a, b);
    let k = phase.d2(x_crit).abs();
    let i0 = Complex64::from_polar((2.0 * PI / (omega * k)).sqrt(), sign * FRAC_PI_4 + omega * phase.value(x_crit))
        * amp(x_crit);

    // ≥ 16 nodes per local wavelength, ≥ 64 panels
    let order = 16;
    let wavelength = 2.0 * PI / (omega * slope_max).max(1e-300);
    let panels = (((hi - lo) / wavelength).ceil() as usize).max(64);
    let gl = gauss(order);
    let w = (hi - lo) / panels as f64;
    let i: Complex64 = (0..panels)
        .map(|p| {
            let c = lo + (p as f64 + 0.5) * w;
            let mut acc = Complex64::default();
            for (x, wt) in gl.nodes.iter().zip(&gl.weights) {
                let t = c + 0.5 * w * x;
                acc += amp(t) * Complex64::from_polar(*wt, omega * phase.value(t));
            }
            acc * (0.5 * w)
        })
        .sum();
    Ok(StationaryPhase { i, i0, remainder: i - i0, x_crit, k })
}

// -------------------------------------------------------------------- φ₁

/// φ₁ along the line through y with direction θ, in chord coordinates
/// x = y + uθ̂ + vθ̂⊥.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase1Model {
    pub y: Vec2,
    pub theta: f64,
    pub domain: DiskDomain,
}

impl Phase1Model {
    pub fn new(y: Vec2, theta: f64, domain: DiskDomain) -> Self {
        Phase1Model { y, theta, domain }
    }

    fn frame(&self) -> (Vec2, Vec2) {
        let t = Vec2::from_angle(self.theta);
        (t, t.perp())
    }

    /// The measurement line s = y·θ̂⊥.
    pub fn coord(&self) -> ParallelCoord {
        let (_, n) = self.frame();
        ParallelCoord::new(self.y.dot(n), self.theta)
    }

    pub fn point(&self, u: f64, v: f64) -> Vec2 {
        let (t, n) = self.frame();
        self.y + t * u + n * v
    }

    fn admissible(&self, u: f64, v: f64) -> Result<(Vec2, Vec2, Vec2, Vec2)> {
        let d = &self.domain;
        let c = self.coord();
        if c.s.abs() > d.s_max() {
            return Err(Error::Domain(format!("|y·θ̂⊥| = {} exceeds r − D", c.s.abs())));
        }
        let x = self.point(u, v);
        if x.norm() > d.r - d.d {
            return Err(Error::Domain(format!("|x| = {} outside B_(r−D)", x.norm())));
        }
        let (t, _) = self.frame();
        let bp = boundary_points(c, d)?;
        Ok((x, self.y + t * u, bp.x0, bp.xc))
    }

    /// φ₁ = |x_c − x₀| − |x − x₀| − |x − x_c|.
    pub fn phi1(&self, u: f64, v: f64) -> Result<f64> {
        let (x, _, x0, xc) = self.admissible(u, v)?;
        Ok(x0.dist(xc) - x.dist(x0) - x.dist(xc))
    }

    /// ∂²φ₁/∂v² = −[|Px−x₀|²/|x−x₀|³ + |Px−x_c|²/|x−x_c|³].
    pub fn phi1_second_derivative(&self, u: f64, v: f64) -> Result<f64> {
        let (x, px, x0, xc) = self.admissible(u, v)?;
        let a = x.dist(x0);
        let b = x.dist(xc);
        Ok(-(px.dist(x0).powi(2) / a.powi(3) + px.dist(xc).powi(2) / b.powi(3)))
    }

    /// (Φ_{1,m}, Φ_{1,M}) = (D/(4r²), 2/D).
    pub fn bounds(&self) -> (f64, f64) {
        let d = &self.domain;
        (d.d / (4.0 * d.r * d.r), 2.0 / d.d)
    }
}

// -------------------------------------------------------------------- φ₂

/// Gradient and Hessian of φ₂ in (s, θ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase2Derivs {
    pub ds: f64,
    pub dt: f64,
    pub dss: f64,
    pub dst: f64,
    pub dtt: f64,
}

impl Phase2Derivs {
    pub fn det(&self) -> f64 {
        self.dss * self.dtt - self.dst * self.dst
    }
}

/// The curvature factors f₀, f_c and the reduced factors g₀, g_c at (s, θ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Phase2Factors {
    pub f0: f64,
    pub fc: f64,
    pub g0: f64,
    pub gc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct S2Profile {
    pub sigma: f64,
    pub s2: f64,
    pub ds2: f64,
    pub d2s2: f64,
    /// K₂ = −∂²φ₂/∂s² at (σ(θ), θ).
    pub k2: f64,
    pub det: f64,
}

/// φ₂ = |x₀ − x_c| − |x₀ − x₁| − |x_c − x_m| for two fixed interior points.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Phase2Model {
    pub x1: Vec2,
    pub xm: Vec2,
    pub domain: DiskDomain,
}

impl Phase2Model {
    pub fn new(x1: Vec2, xm: Vec2, domain: DiskDomain) -> Result<Self> {
        let lim = domain.r - 2.0 * domain.d;
        if x1.norm() > lim || xm.norm() > lim {
            return Err(Error::Domain(format!("x₁, x_m must lie in B_(r−2D) (radius {lim})")));
        }
        Ok(Phase2Model { x1, xm, domain })
    }

    pub fn separation(&self) -> f64 {
        self.x1.dist(self.xm)
    }

    fn check(&self, c: ParallelCoord) -> Result<()> {
        if c.s.abs() > self.domain.s_max() * (1.0 + 1e-12) {
            return Err(Error::Domain(format!("|s| = {} outside 𝒵_D", c.s.abs())));
        }
        Ok(())
    }

    pub fn phi2(&self, c: ParallelCoord) -> Result<f64> {
        self.check(c)?;
        let bp = boundary_points(c, &self.domain)?;
        Ok(bp.d0 - bp.x0.dist(self.x1) - bp.xc.dist(self.xm))
    }

    pub fn factors(&self, c: ParallelCoord) -> Result<Phase2Factors> {
        self.check(c)?;
        let r2 = self.domain.r * self.domain.r;
        let bp = boundary_points(c, &self.domain)?;
        let (l0, lc) = (bp.x0.dist(self.x1), bp.xc.dist(self.xm));
        let e0 = (bp.x0 - self.x1) * (1.0 / l0);
        let ec = (bp.xc - self.xm) * (1.0 / lc);
        let (p0, pc) = (e0.dot(bp.x0), ec.dot(bp.xc));
        let f0 = p0 * p0 / (r2 * l0);
        let fc = pc * pc / (r2 * lc);
        Ok(Phase2Factors { f0, fc, g0: p0 - r2 * f0, gc: pc - r2 * fc })
    }

    /// Closed-form gradient and Hessian.
    pub fn derivatives(&self, c: ParallelCoord) -> Result<Phase2Derivs> {
        self.check(c)?;
        let d = &self.domain;
        let r2 = d.r * d.r;
        let h = (r2 - c.s * c.s).sqrt();
        let bp = boundary_points(c, d)?;
        let jac = boundary_jacobians(c, d)?;
        let t = c.dir();
        let (l0, lc) = (bp.x0.dist(self.x1), bp.xc.dist(self.xm));
        let e0 = (bp.x0 - self.x1) * (1.0 / l0);
        let ec = (bp.xc - self.xm) * (1.0 / lc);
        let fa = self.factors(c)?;
        let ds = -2.0 * c.s / h - e0.dot(jac.dx0_ds) - ec.dot(jac.dxc_ds);
        let dt = -e0.dot(jac.dx0_dt) - ec.dot(jac.dxc_dt);
        let dss = -r2 / (h * h * h) * (2.0 + (e0 - ec).dot(t) + h * (fa.f0 + fa.fc));
        let dst = (-e0.dot(bp.x0) + ec.dot(bp.xc) + r2 * (fa.f0 - fa.fc)) / h;
        let dtt = e0.dot(bp.x0) + ec.dot(bp.xc) - r2 * (fa.f0 + fa.fc);
        Ok(Phase2Derivs { ds, dt, dss, dst, dtt })
    }

    /// (Φ_{2,m}, Φ_{2,M}) = (2D/r², 8r/D²).
    pub fn bounds(&self) -> (f64, f64) {
        let d = &self.domain;
        (2.0 * d.d / (d.r * d.r), 8.0 * d.r / (d.d * d.d))
    }

    /// θ_{1m} = arg(x_m − x₁); `None` when the points coincide.
    pub fn theta_1m(&self) -> Option<f64> {
        let v = self.xm - self.x1;
        if v.norm() == 0.0 {
            None
        } else {
            Some(wrap_angle(v.y.atan2(v.x)))
        }
    }

    /// The root σ(θ) of ∂_sφ₂(·, θ), bracketed by x₁·θ̂⊥ and x_m·θ̂⊥.
    pub fn critical_curve_sigma(&self, theta: f64) -> f64 {
        let n = Vec2::from_angle(theta).perp();
        let (a, b) = (self.x1.dot(n), self.xm.dot(n));
        if a == b {
            return a;
        }
        let (lo, hi) = (a.min(b), a.max(b));
        let g = |s: f64| self.derivatives(ParallelCoord::new(s, theta)).map(|d| d.ds).unwrap_or(f64::NAN);
        let dg = |s: f64| self.derivatives(ParallelCoord::new(s, theta)).map(|d| d.dss).unwrap_or(f64::NAN);
        let (glo, ghi) = (g(lo), g(hi));
        if glo * ghi > 0.0 {
            // both ends numerically critical (x₀, x₁, x_m, x_c nearly aligned)
            assert!(glo.abs().min(ghi.abs()) < 1e-12, "σ(θ) bracket violated: ∂_sφ₂ = {glo}, {ghi}");
            return if glo.abs() <= ghi.abs() { lo } else { hi };
        }
        let s = monotone_root(g, dg, lo, hi);
        s.clamp(lo, hi)
    }

    /// S₂, S₂′ = ∂_θφ₂ and S₂″ = −det H/K₂ along the critical curve.
    pub fn s2_profile(&self, theta: f64) -> S2Profile {
        let sigma = self.critical_curve_sigma(theta);
        let c = ParallelCoord::new(sigma, theta);
        let d = self.derivatives(c).expect("σ(θ) lies in 𝒵_D");
        let det = d.det();
        S2Profile {
            sigma,
            s2: self.phi2(c).expect("σ(θ) lies in 𝒵_D"),
            ds2: d.dt,
            d2s2: det / d.dss,
            k2: -d.dss,
            det,
        }
    }

    /// Closed forms ∓|x₁−x_m||x₀−x_c|/(|x₁−x₀|+|x_c−x_m|) for S₂″ at θ_{1m}
    /// and θ_{1m}+π.
    pub fn s2pp_critical(&self) -> Option<(f64, f64)> {
        let t = self.theta_1m()?;
        let sep = self.separation();
        let val = |theta: f64| {
            let s = self.x1.dot(Vec2::from_angle(theta).perp());
            let bp = boundary_points(ParallelCoord::new(s, theta), &self.domain).expect("interior line");
            sep * bp.d0 / (self.x1.dist(bp.x0) + bp.xc.dist(self.xm))
        };
        Some((-val(t), val(t + PI)))
    }
}

// -------------------------------------------------------- angular margins

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub separation: f64,
    pub delta0: f64,
    pub samples: usize,
    /// min |S₂′|/|x₁−x_m| at distance ≥ δ₀/2 from the critical angles.
    pub c1: Option<f64>,
    /// min |S₂″|/|x₁−x_m| within δ₀ of the critical angles.
    pub c2: Option<f64>,
    /// (1/8)√(2D/r).
    pub c2_candidate: f64,
    pub c2_candidate_holds: bool,
}

pub const DEFAULT_DELTA0: f64 = PI / 8.0;

/// Measures the largest constants (C₁, C₂) valid on a uniform θ-sample.
pub fn lemma_s_margins(model: &Phase2Model, delta0: f64, sample_count: usize) -> MarginReport {
    let d = &model.domain;
    let c2_candidate = (2.0 * d.d / d.r).sqrt() / 8.0;
    let sep = model.separation();
    let mut rep = MarginReport {
        separation: sep,
        delta0,
        samples: sample_count,
        c1: None,
        c2: None,
        c2_candidate,
        c2_candidate_holds: true,
    };
    if sample_count == 0 {
        return rep;
    }
    let Some(t1m) = model.theta_1m() else {
        rep.c1 = Some(0.0);
        rep.c2 = Some(0.0);
        rep.c2_candidate_holds = false;
        return rep;
    };
    let profiles = crate::exec::map(sample_count, |k| {
        let theta = 2.0 * PI * (k as f64 + 0.5) / sample_count as f64;
        let dist = angle_dist(theta, t1m).min(angle_dist(theta, t1m + PI));
        (dist, model.s2_profile(theta))
    });
    for (dist, p) in profiles {
        if dist >= delta0 / 2.0 {
            let v = p.ds2.abs() / sep;
            rep.c1 = Some(rep.c1.map_or(v, |c: f64| c.min(v)));
        }
        if dist <= delta0 {
            let v = p.d2s2.abs() / sep;
            rep.c2 = Some(rep.c2.map_or(v, |c: f64| c.min(v)));
        }
    }
    rep.c2_candidate_holds = rep.c2.is_none_or(|c| c >= c2_candidate);
    rep
}

// ------------------------------------------------------------------ β^ω

/// Points of the multiple-scattering chain entering β^ω.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BetaPoints {
    pub y: Vec2,
    pub x1: Vec2,
    pub x2: Vec2,
    pub xm1: Vec2,
    pub xm: Vec2,
}

const BETA_PPW: f64 = 10.0;
const BETA_MAX_EVALS: f64 = 4e8;

/// α^ω with the e^{iω|x₀−x_c|} factor of (A^ω)⁻¹ removed (it is part of φ₂).
fn alpha_reduced(
    c: ParallelCoord,
    p: &BetaPoints,
    omega: f64,
    sigma: &Sigma,
    phi: PhaseFunction,
    d: &DiskDomain,
) -> Result<Complex64> {
    let bp = boundary_points(c, d)?;
    let a = amplitude_a(c, omega, sigma, phi, d)? * Complex64::from_polar(1.0, omega * bp.d0);
    let v01 = (p.x1 - bp.x0).unit();
    let v12 = (p.x2 - p.x1).unit();
    let vm1m = (p.xm - p.xm1).unit();
    let vmc = (bp.xc - p.xm).unit();
    let geo = sigma.attenuation(bp.x0, p.x1) * sigma.attenuation(p.xm, bp.xc) / (p.x1.dist(bp.x0) * p.xm.dist(bp.xc))
        * (bp.x0 * (1.0 / d.r)).dot(v01).abs()
        * (bp.xc * (1.0 / d.r)).dot(vmc).abs()
        * phi.eval(v01, v12)
        * phi.eval(vm1m, vmc);
    Ok(geo / a)
}

/// β^ω(y, x₁, x₂, x_{m−1}, x_m) = ∬ e^{iωφ₂} w_b(y·θ̂⊥ − s) α^ω χ(s) ds dθ.
///
/// The s-integral uses Gauss panels with ≥ 10 nodes per wavelength of the
/// integrand; the θ-integral resolves the reduced phase S₂ and is refined to
/// spacing ∝ (ω|x₁−x_m|)^{−1/2} near the critical angles.
pub fn beta_kernel(
    pts: &BetaPoints,
    omega: f64,
    spec: &FilterSpec,
    sigma: &Sigma,
    phi: PhaseFunction,
    d: &DiskDomain,
) -> Result<Complex64> {
    let inner = d.r - d.d;
    for q in [pts.y, pts.x1, pts.x2, pts.xm1, pts.xm] {
        if q.norm() > inner {
            return Err(Error::Domain(format!("point {q:?} outside B_(r−D)")));
        }
    }
    if spec.profile == crate::xray::Profile::Zero {
        return Ok(Complex64::default());
    }
    let model = Phase2Model { x1: pts.x1, xm: pts.xm, domain: *d };
    let smax = d.s_max();
    let hmin = (d.r * d.r - smax * smax).sqrt();
    let b = spec.b;

    // s: |∂_sφ₂| ≤ 4r/h_min, w_b oscillates at rate b
    let order = 16;
    let s_rate = omega * 4.0 * d.r / hmin + b + 1.0;
    let s_panels = ((2.0 * smax * s_rate / (2.0 * PI) * BETA_PPW / order as f64).ceil() as usize).max(8);

    // θ: |S₂′| ≤ 2|x₁−x_m|, w_b(y·θ̂⊥ − s) moves at rate b|y|
    let sep = model.separation();
    let t_rate = 2.0 * omega * sep + b * pts.y.norm() + 4.0;
    let t_order = 10;
    let base = ((2.0 * PI * t_rate / (2.0 * PI) * BETA_PPW / t_order as f64).ceil() as usize).max(16);
    let mut edges: Vec<f64> = (0..=base).map(|k| 2.0 * PI * k as f64 / base as f64).collect();
    if let Some(t1m) = model.theta_1m() {
        let width = 1.0 / (omega * sep).sqrt();
        for tc in [t1m, wrap_angle(t1m + PI)] {
            for k in -12..=12 {
                edges.push(wrap_angle(tc + 0.5 * width * k as f64));
            }
        }
        edges.sort_by(f64::total_cmp);
        edges.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if *edges.last().unwrap() < 2.0 * PI {
            edges.push(2.0 * PI);
        }
        if edges[0] > 0.0 {
            edges.insert(0, 0.0);
        }
    }
    let t_nodes: Vec<(f64, f64)> = {
        let gl = gauss(t_order);
        let mut v = Vec::new();
        for w in edges.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            if hi - lo <= 0.0 {
                continue;
            }
            for (x, wt) in gl.nodes.iter().zip(&gl.weights) {
                v.push((0.5 * (lo + hi) + 0.5 * (hi - lo) * x, 0.5 * (hi - lo) * wt));
            }
        }
        v
    };
    let evals = (s_panels * order) as f64 * t_nodes.len() as f64;
    if evals > BETA_MAX_EVALS {
        return Err(Error::Resolution(format!("β^ω needs {evals:.2e} integrand evaluations")));
    }
    let s_nodes = gauss(order).composite_points(-smax, smax, s_panels);
    let table = RadialTable::filter(spec.profile, b * 2.0 * d.r + 1.0);

    let parts = crate::exec::map(t_nodes.len(), |k| -> Result<Complex64> {
        let (theta, wt) = t_nodes[k];
        let n = Vec2::from_angle(theta).perp();
        let ys = pts.y.dot(n);
        let mut acc = Complex64::default();
        for &(s, ws) in &s_nodes {
            let x = chi(s, d);
            if x == 0.0 {
                continue;
            }
            let c = ParallelCoord::new(s, theta);
            let ph = model.phi2(c)?;
            let w = b * b * table.eval(b * (ys - s));
            let al = alpha_reduced(c, pts, omega, sigma, phi, d)?;
            acc += Complex64::from_polar(ws * w * x, omega * ph) * al;
        }
        Ok(acc * wt)
    });
    parts.into_iter().sum()
}
