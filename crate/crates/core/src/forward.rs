//! Collision-expansion forward model on the parallel-geometry grid.
//!
//! Single scattering is integrated in elliptic coordinates with foci x0, xc:
//! x = m + a(cosh ξ cos η θ̂ + sinh ξ sin η θ̂⊥), a = d0/2. Then
//! |x−x0| + |x−xc| = 2a cosh ξ and the area element a²(cosh²ξ − cos²η)
//! equals |x−x0||x−xc|, which cancels the kernel singularity; the η-integral
//! H(ξ) is free of ω and the ω-dependence reduces to a one-dimensional chirp
//! ∫ e^{−2iaω cosh ξ} H(ξ) dξ. One pass over (ξ, η) serves every frequency.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{rho, Field2, PhaseFunction, Sigma};
use crate::geometry::{boundary_points, DiskDomain, ParallelCoord, SinogramLayout, Vec2};

/// Everything the forward model needs to know about the medium.
#[derive(Clone, Copy)]
pub struct Medium<'a> {
    pub domain: DiskDomain,
    pub sigma: &'a Sigma,
    pub k: &'a dyn Field2,
    pub phase: PhaseFunction,
}

/// Resolution policy for the single-scattering integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleQuad {
    /// Samples per oscillation of the chirp in ξ; below 4 is refused.
    pub points_per_wavelength: f64,
    /// Spacing of the ω-independent ξ samples of H.
    pub dxi: f64,
    /// Trapezoid nodes per ellipse in η.
    pub n_eta: usize,
    /// Step of the chord quadrature used by the leading term.
    pub chord_step: f64,
}

impl Default for SingleQuad {
    fn default() -> Self {
        SingleQuad { points_per_wavelength: 10.0, dxi: 0.01, n_eta: 512, chord_step: 0.005 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McBudget {
    pub n_paths: usize,
    pub max_order: usize,
    pub seed: u64,
}

impl McBudget {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths < 1 || self.max_order < 2 {
            return Err(Error::Config(format!(
                "MC budget needs n_paths >= 1 and max_order >= 2 (got {}, {})",
                self.n_paths, self.max_order
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SinogramMeta {
    pub label: String,
    pub orders: Vec<usize>,
    pub n_paths: usize,
    pub seed: u64,
    pub quad: Option<SingleQuad>,
    /// Geometric bound on the neglected orders beyond max_order.
    pub tail_bound: Option<f64>,
    pub config_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    pub layout: SinogramLayout,
    pub omega: f64,
    pub data: Vec<Complex64>,
    pub meta: SinogramMeta,
}

impl Sinogram {
    pub fn zeros(layout: SinogramLayout, omega: f64, label: &str) -> Self {
        Sinogram {
            layout,
            omega,
            data: vec![Complex64::default(); layout.len()],
            meta: SinogramMeta { label: label.into(), ..Default::default() },
        }
    }
    pub fn sup_norm(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// T₀ = e^{−iωd0} E(x0,xc) (√(r²−s²)/r)² / d0.
pub fn ballistic(c: ParallelCoord, omega: f64, sigma: &Sigma, d: &DiskDomain) -> Result<Complex64> {
    check_zd(c, d)?;
    let bp = boundary_points(c, d)?;
    let nu = bp.d0 / (2.0 * d.r);
    let e = sigma.attenuation(bp.x0, bp.xc);
    Ok(Complex64::from_polar(e * nu * nu / bp.d0, -omega * bp.d0))
}

fn check_zd(c: ParallelCoord, d: &DiskDomain) -> Result<()> {
    if c.s.abs() > d.s_max() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("|s| = {} exceeds r − D = {}", c.s.abs(), d.s_max())));
    }
    Ok(())
}

/// Quintic Lagrange weights for nodes −2..3 at t ∈ [0,1].
#[inline]
fn lagrange6(y: [f64; 6], t: f64) -> f64 {
    let xs = [-2.0, -1.0, 0.0, 1.0, 2.0, 3.0];
    let mut acc = 0.0;
    for i in 0..6 {
        let mut w = 1.0;
        for j in 0..6 {
            if i != j {
                w *= (t - xs[j]) / (xs[i] - xs[j]);
            }
        }
        acc += w * y[i];
    }
    acc
}

/// T₁ at one coordinate for several frequencies at once.
pub fn single_scattering_multi(
    c: ParallelCoord,
    omegas: &[f64],
    medium: &Medium,
    quad: &SingleQuad,
) -> Result<Vec<Complex64>> {
    if quad.points_per_wavelength < 4.0 {
        return Err(Error::Resolution(format!(
            "{} points per wavelength is below the minimum of 4",
            quad.points_per_wavelength
        )));
    }
    let d = &medium.domain;
    check_zd(c, d)?;
    let bp = boundary_points(c, d)?;
    let a = 0.5 * bp.d0;
    let sup = medium.k.support();
    let zero = vec![Complex64::default(); omegas.len()];
    if sup.radius <= 0.0 {
        return Ok(zero);
    }
    let lam_c = sup.center.dist(bp.x0) + sup.center.dist(bp.xc);
    let lam_lo = (lam_c - 2.0 * sup.radius).max(bp.d0);
    let lam_hi = lam_c + 2.0 * sup.radius;
    let xi_lo = (lam_lo / bp.d0).max(1.0).acosh();
    let xi_hi = (lam_hi / bp.d0).acosh();
    let dxi = quad.dxi;
    let j_lo = ((xi_lo / dxi).floor() as isize - 3).max(0) as usize;
    let j_hi = (xi_hi / dxi).ceil() as usize + 3;

    let t = c.dir();
    let n = c.normal();
    let mid = n * c.s;
    let nu0 = bp.x0 * (1.0 / d.r);
    let nuc = bp.xc * (1.0 / d.r);
    let n_eta = quad.n_eta;
    let deta = 2.0 * PI / n_eta as f64;
    let trig: Vec<(f64, f64)> = (0..n_eta).map(|k| (k as f64 * deta).sin_cos()).collect();
    let const_sigma = match medium.sigma {
        Sigma::Constant(v) => Some(*v),
        _ => None,
    };
    let r2s = sup.radius * sup.radius;

    // H(ξ_j) for j in [j_lo, j_hi]; zero outside by support
    let mut h = vec![0.0; j_hi + 1];
    let mut any = false;
    for (j, hj) in h.iter_mut().enumerate().skip(j_lo) {
        let xi = j as f64 * dxi;
        let (ch, sh) = (xi.cosh(), xi.sinh());
        let mut acc = 0.0;
        for &(se, ce) in &trig {
            let x = mid + t * (a * ch * ce) + n * (a * sh * se);
            if (x - sup.center).norm2() >= r2s {
                continue;
            }
            let kv = medium.k.value(x);
            if kv == 0.0 {
                continue;
            }
            let l0 = a * (ch + ce);
            let lc = a * (ch - ce);
            let v_in = (x - bp.x0) * (1.0 / l0);
            let v_out = (bp.xc - x) * (1.0 / lc);
            let mut g = kv * medium.phase.eval(v_in, v_out) * v_in.dot(nu0).abs() * v_out.dot(nuc).abs();
            if const_sigma.is_none() {
                g *= medium.sigma.attenuation(bp.x0, x) * medium.sigma.attenuation(x, bp.xc);
            }
            acc += g;
        }
        *hj = acc * deta;
        any |= acc != 0.0;
    }
    if !any {
        return Ok(zero);
    }
    let hat = |jj: isize| -> f64 {
        let j = jj.unsigned_abs();
        if j < h.len() { h[j] } else { 0.0 }
    };
    let xi_end = (j_hi as f64) * dxi;
    let sig = const_sigma.unwrap_or(0.0);
    let out = omegas
        .iter()
        .map(|&w| {
            let rate = 2.0 * a * w.abs() * xi_end.sinh();
            let mut step = dxi / 2.0;
            if rate > 0.0 {
                step = step.min(2.0 * PI / (quad.points_per_wavelength * rate));
            }
            let nf = (xi_end / step).ceil() as usize;
            let step = xi_end / nf as f64;
            let mut acc = Complex64::default();
            for q in 0..=nf {
                let xi = q as f64 * step;
                let f = xi / dxi;
                let j = f.floor() as isize;
                let tt = f - j as f64;
                let hv = lagrange6([hat(j - 2), hat(j - 1), hat(j), hat(j + 1), hat(j + 2), hat(j + 3)], tt);
                let lam = 2.0 * a * xi.cosh();
                let wt = if q == 0 || q == nf { 0.5 } else { 1.0 };
                acc += Complex64::from_polar(wt * hv * (-sig * lam).exp(), -w * lam);
            }
            acc * step
        })
        .collect();
    Ok(out)
}

pub fn single_scattering(c: ParallelCoord, omega: f64, medium: &Medium, quad: &SingleQuad) -> Result<Complex64> {
    Ok(single_scattering_multi(c, &[omega], medium, quad)?[0])
}

/// P[ρk](s, θ) restricted to the support disk of k.
pub fn chord_rho_k(c: ParallelCoord, medium: &Medium, step: f64) -> f64 {
    let sup = medium.k.support();
    let t = c.dir();
    let n = c.normal();
    let off = c.s - sup.center.dot(n);
    if sup.radius <= 0.0 || off.abs() >= sup.radius {
        return 0.0;
    }
    let half = (sup.radius * sup.radius - off * off).sqrt();
    let tc = sup.center.dot(t);
    let r = medium.domain.r;
    let lim = (r * r - c.s * c.s).sqrt();
    let (lo, hi) = ((tc - half).max(-lim), (tc + half).min(lim));
    if hi <= lo {
        return 0.0;
    }
    let panels = ((hi - lo) / step).ceil() as usize;
    let gl = crate::xray::gauss(4);
    let base = n * c.s;
    gl.composite(lo, hi, panels, |tt| {
        let x = base + t * tt;
        medium.k.value(x) * rho(x, r)
    })
}

/// The ω-independent factor L with T̃₁ = e^{−iωd0} ω^{−1/2} L.
pub fn leading_profile(c: ParallelCoord, medium: &Medium, step: f64) -> Result<Complex64> {
    let d = &medium.domain;
    check_zd(c, d)?;
    let bp = boundary_points(c, d)?;
    let p = chord_rho_k(c, medium, step);
    if p == 0.0 {
        return Ok(Complex64::default());
    }
    let nu = bp.d0 / (2.0 * d.r);
    let e = medium.sigma.attenuation(bp.x0, bp.xc);
    let amp = (2.0 * PI / bp.d0).sqrt() * e * nu * nu * medium.phase.eval(bp.e0, bp.e0) * p;
    Ok(Complex64::from_polar(amp, -PI / 4.0))
}

/// T̃₁ = e^{−iωd0}(2π/(i d0 ω))^{1/2} E(x0,xc)(√(r²−s²)/r)² φ(e0,e0) P[ρk].
pub fn leading_single(c: ParallelCoord, omega: f64, medium: &Medium, step: f64) -> Result<Complex64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("leading term needs ω > 0, got {omega}")));
    }
    let l = leading_profile(c, medium, step)?;
    let d0 = boundary_points(c, &medium.domain)?.d0;
    Ok(l * Complex64::from_polar(omega.powf(-0.5), -omega * d0))
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream seed for (base seed, pixel, order); independent of scheduling.
pub fn stream_seed(seed: u64, pixel: u64, order: u64) -> u64 {
    splitmix64(splitmix64(seed ^ splitmix64(pixel)) ^ order.wrapping_mul(0xD6E8_FEB8_6659_FD93))
}

/// Monte-Carlo estimate of T_m with standard error, for several frequencies.
///
/// x₁ is uniform on the support disk of k; each further vertex is drawn
/// around the previous one with uniform radius in [0, 2R] and uniform angle,
/// whose density 1/(2π·2R·|Δx|) cancels the 1/|Δx| of the kernel.
pub fn multiple_scattering_multi(
    c: ParallelCoord,
    omegas: &[f64],
    m: usize,
    medium: &Medium,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<(Complex64, f64)>> {
    if m < 2 {
        return Err(Error::Domain(format!("multiple scattering needs order m >= 2, got {m}")));
    }
    let d = &medium.domain;
    check_zd(c, d)?;
    let bp = boundary_points(c, d)?;
    let sup = medium.k.support();
    let nw = omegas.len();
    if sup.radius <= 0.0 || n_paths == 0 {
        return Ok(vec![(Complex64::default(), 0.0); nw]);
    }
    let rr = sup.radius;
    let area = PI * rr * rr;
    let jump = 2.0 * rr;
    let scale = area * (2.0 * PI * jump).powi(m as i32 - 1);
    let nu0 = bp.x0 * (1.0 / d.r);
    let nuc = bp.xc * (1.0 / d.r);
    let const_sigma = match medium.sigma {
        Sigma::Constant(v) => Some(*v),
        _ => None,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = vec![Complex64::default(); nw];
    let mut sum2 = vec![0.0; nw];
    let mut pts = vec![Vec2::default(); m];
    'path: for _ in 0..n_paths {
        let u: f64 = rng.gen();
        let ang: f64 = rng.gen::<f64>() * 2.0 * PI;
        pts[0] = sup.center + Vec2::from_angle(ang) * (rr * u.sqrt());
        for j in 1..m {
            let rad: f64 = rng.gen::<f64>() * jump;
            let ang: f64 = rng.gen::<f64>() * 2.0 * PI;
            pts[j] = pts[j - 1] + Vec2::from_angle(ang) * rad;
        }
        let mut w = scale;
        for p in pts.iter() {
            if !sup.contains(*p) {
                continue 'path;
            }
            let kv = medium.k.value(*p);
            if kv == 0.0 {
                continue 'path;
            }
            w *= kv;
        }
        // vertex chain x0, x1..xm, xc
        let mut len = 0.0;
        let mut prev = bp.x0;
        let mut v_prev = Vec2::default();
        let mut att = 1.0;
        for (j, p) in pts.iter().chain(std::iter::once(&bp.xc)).enumerate() {
            let seg = p.dist(prev);
            if seg == 0.0 {
                continue 'path;
            }
            let v = (*p - prev) * (1.0 / seg);
            len += seg;
            if const_sigma.is_none() {
                att *= medium.sigma.attenuation(prev, *p);
            }
            if j == 0 {
                w *= v.dot(nu0).abs() / seg;
            } else {
                w *= medium.phase.eval(v_prev, v);
                if j == m {
                    w *= v.dot(nuc).abs() / seg;
                }
            }
            v_prev = v;
            prev = *p;
        }
        w *= match const_sigma {
            Some(s) => (-s * len).exp(),
            None => att,
        };
        for (q, &om) in omegas.iter().enumerate() {
            let z = Complex64::from_polar(w, -om * len);
            sum[q] += z;
            sum2[q] += w * w;
        }
    }
    let nf = n_paths as f64;
    Ok(sum
        .into_iter()
        .zip(sum2)
        .map(|(s, s2)| {
            let mean = s / nf;
            let var = if n_paths > 1 { ((s2 / nf) - mean.norm_sqr()).max(0.0) * nf / (nf - 1.0) } else { 0.0 };
            (mean, (var / nf).sqrt())
        })
        .collect())
}

pub fn multiple_scattering(
    c: ParallelCoord,
    omega: f64,
    m: usize,
    medium: &Medium,
    budget: &McBudget,
    pixel: u64,
) -> Result<(Complex64, f64)> {
    let seed = stream_seed(budget.seed, pixel, m as u64);
    Ok(multiple_scattering_multi(c, &[omega], m, medium, budget.n_paths, seed)?[0])
}

/// Per-frequency synthesis result.
#[derive(Debug, Clone)]
pub struct Synthesis {
    /// 𝔇 = T₁ + Σ_{m=2..M} T_m.
    pub data: Sinogram,
    pub ballistic: Sinogram,
    pub single: Sinogram,
    pub leading: Sinogram,
    pub multiple: Sinogram,
    /// Per-pixel standard error of the multiple-scattering sum.
    pub multiple_stderr: Vec<f64>,
    /// sup over pixels of |T_m| for m = 2..M.
    pub order_sup: Vec<f64>,
}

/// Contraction factor ‖k‖_∞‖φ‖_∞·2πΔ of the collision series.
pub fn series_factor(medium: &Medium, k_sup: f64) -> f64 {
    k_sup * medium.phase.sup_norm() * 2.0 * PI * medium.domain.diameter()
}

/// Synthesize all components for every ω in `omegas` in one pass.
pub fn synthesize_data(
    layout: &SinogramLayout,
    omegas: &[f64],
    medium: &Medium,
    budget: Option<&McBudget>,
    quad: &SingleQuad,
) -> Result<Vec<Synthesis>> {
    if let Some(b) = budget {
        b.validate()?;
    }
    let nw = omegas.len();
    struct Px {
        t0: Vec<Complex64>,
        t1: Vec<Complex64>,
        lead: Vec<Complex64>,
        tm: Vec<Vec<(Complex64, f64)>>,
    }
    let pixels: Vec<Result<Px>> = crate::exec::map(layout.len(), |idx| {
        let c = layout.coord(idx);
        let t0 = omegas
            .iter()
            .map(|&w| ballistic(c, w, medium.sigma, &medium.domain))
            .collect::<Result<Vec<_>>>()?;
        let t1 = single_scattering_multi(c, omegas, medium, quad)?;
        let l = leading_profile(c, medium, quad.chord_step)?;
        let d0 = boundary_points(c, &medium.domain)?.d0;
        let lead = omegas
            .iter()
            .map(|&w| if w > 0.0 { l * Complex64::from_polar(w.powf(-0.5), -w * d0) } else { Complex64::default() })
            .collect();
        let mut tm = Vec::new();
        if let Some(b) = budget {
            for m in 2..=b.max_order {
                let seed = stream_seed(b.seed, idx as u64, m as u64);
                tm.push(multiple_scattering_multi(c, omegas, m, medium, b.n_paths, seed)?);
            }
        }
        Ok(Px { t0, t1, lead, tm })
    });
    let pixels: Vec<Px> = pixels.into_iter().collect::<Result<_>>()?;
    let k_sup = medium_k_sup(medium);
    let q = series_factor(medium, k_sup);
    let mut out = Vec::with_capacity(nw);
    for (w_i, &w) in omegas.iter().enumerate() {
        let meta = |label: &str| SinogramMeta {
            label: label.into(),
            orders: match label {
                "ballistic" => vec![0],
                "single" | "leading" => vec![1],
                "multiple" => budget.map(|b| (2..=b.max_order).collect()).unwrap_or_default(),
                _ => std::iter::once(1).chain(budget.map(|b| 2..=b.max_order).into_iter().flatten()).collect(),
            },
            n_paths: budget.map_or(0, |b| b.n_paths),
            seed: budget.map_or(0, |b| b.seed),
            quad: Some(*quad),
            tail_bound: None,
            config_hash: None,
        };
        let mk = |label: &str, f: &dyn Fn(&Px) -> Complex64| Sinogram {
            layout: *layout,
            omega: w,
            data: pixels.iter().map(f).collect(),
            meta: meta(label),
        };
        let ballistic = mk("ballistic", &|p| p.t0[w_i]);
        let single = mk("single", &|p| p.t1[w_i]);
        let leading = mk("leading", &|p| p.lead[w_i]);
        let multiple = mk("multiple", &|p| p.tm.iter().map(|o| o[w_i].0).sum());
        let multiple_stderr = pixels
            .iter()
            .map(|p| p.tm.iter().map(|o| o[w_i].1 * o[w_i].1).sum::<f64>().sqrt())
            .collect();
        let order_sup: Vec<f64> = (0..pixels.first().map_or(0, |p| p.tm.len()))
            .map(|o| pixels.iter().fold(0.0_f64, |m, p| m.max(p.tm[o][w_i].0.norm())))
            .collect();
        let mut data = mk("data", &|p| p.t1[w_i] + p.tm.iter().map(|o| o[w_i].0).sum::<Complex64>());
        // neglected orders: |T_{M+j}| ≲ |T_M| q^j
        data.meta.tail_bound = Some(match order_sup.last() {
            Some(&last) if q < 1.0 => last * q / (1.0 - q),
            Some(_) => f64::INFINITY,
            None => single.sup_norm() * q / (1.0 - q).max(0.0),
        });
        out.push(Synthesis { data, ballistic, single, leading, multiple, multiple_stderr, order_sup });
    }
    Ok(out)
}

fn medium_k_sup(medium: &Medium) -> f64 {
    // sampled sup of |k| on a 128² lattice over the support disk
    let sup = medium.k.support();
    if sup.radius <= 0.0 {
        return 0.0;
    }
    let n = 128;
    let mut m: f64 = 0.0;
    for iy in 0..n {
        for ix in 0..n {
            let p = sup.center
                + Vec2::new(
                    -sup.radius + (ix as f64 + 0.5) * 2.0 * sup.radius / n as f64,
                    -sup.radius + (iy as f64 + 0.5) * 2.0 * sup.radius / n as f64,
                );
            m = m.max(medium.k.value(p).abs());
        }
    }
    m
}
