//! Direct band-limited inversion of the single-scattering leading term and
//! the fixed-point refinement that subtracts modelled remainders.
//!
//! Convention: iterates q approximate kρ (not k). The forward model is fed
//! k = m·q/ρ with m a smooth cutoff that is 1 on B_{r−5D/2} and 0 outside
//! B_{r−2D}, so every synthesized coefficient respects the support hypothesis.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{rho, Lattice, PhaseFunction, ScalarField, Sigma};
use crate::forward::{synthesize_data, McBudget, Medium, Sinogram, SingleQuad};
use crate::geometry::{boundary_points, chi, DiskDomain, ParallelCoord, SinogramLayout, Vec2};
use crate::xray::{fbp, fbp_variance, lowpass_reference, FilterSpec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InversionConfig {
    pub omega: f64,
    pub filter: FilterSpec,
    pub max_iters: usize,
    /// Stop when ‖q_{n+1} − q_n‖_∞ < stop_tol·‖q₀‖_∞.
    pub stop_tol: f64,
    /// Radius of the ball in which iterates must stay.
    pub k0: f64,
    pub forward_budget: McBudget,
    pub quad: SingleQuad,
    pub layout: SinogramLayout,
    pub grid: Lattice,
}

impl InversionConfig {
    /// Defaults: 10 iterations, relative tolerance 1e−4 and K₀ = 0.8/(‖φ‖_∞ L̄).
    pub fn new(omega: f64, b: f64, layout: SinogramLayout, grid: Lattice, sigma: &Sigma, phase: PhaseFunction) -> Self {
        let lbar = estimate_l_norm(sigma, &layout.domain, 64);
        InversionConfig {
            omega,
            filter: FilterSpec::new(b),
            max_iters: 10,
            stop_tol: 1e-4,
            k0: default_k0(phase, lbar),
            forward_budget: McBudget { n_paths: 256, max_order: 4, seed: 0 },
            quad: SingleQuad::default(),
            layout,
            grid,
        }
    }

    pub fn validate(&self, sigma: &Sigma, phase: PhaseFunction) -> Result<()> {
        if !(self.omega > 0.0) {
            return Err(Error::Domain(format!("inversion needs ω > 0, got {}", self.omega)));
        }
        if !(self.filter.b > 0.0) {
            return Err(Error::Config(format!("bandwidth must be positive, got {}", self.filter.b)));
        }
        self.forward_budget.validate()?;
        let cap = 1.0 / (phase.sup_norm() * estimate_l_norm(sigma, &self.layout.domain, 64));
        if !(self.k0 > 0.0 && self.k0 < cap) {
            return Err(Error::Config(format!("K0 = {} must lie in (0, {cap}) for the series to contract", self.k0)));
        }
        Ok(())
    }
}

pub fn default_k0(phase: PhaseFunction, lbar: f64) -> f64 {
    0.8 / (phase.sup_norm() * lbar)
}

/// A^ω(s,θ) = e^{−2iω√(r²−s²)}(2π/i)^{1/2} e^{−P[σ]} (r²−s²)^{3/4}/(√2 r²) φ(θ̂,θ̂).
pub fn amplitude_a(c: ParallelCoord, omega: f64, sigma: &Sigma, phase: PhaseFunction, d: &DiskDomain) -> Result<Complex64> {
    if c.s.abs() > d.s_max() * (1.0 + 1e-12) {
        return Err(Error::Domain(format!("|s| = {} exceeds r − D = {}", c.s.abs(), d.s_max())));
    }
    let bp = boundary_points(c, d)?;
    let r = d.r;
    let h2 = r * r - c.s * c.s;
    let modulus = (2.0 * PI).sqrt() * sigma.attenuation(bp.x0, bp.xc) * h2.powf(0.75) / (2f64.sqrt() * r * r)
        * phase.eval(c.dir(), c.dir());
    Ok(Complex64::from_polar(modulus, -omega * bp.d0 - PI / 4.0))
}

/// Closed-form upper bound on sup |A^ω|^{−1} over the measurement band.
pub fn amplitude_inverse_bound(d: &DiskDomain, sigma_sup: f64, phase: PhaseFunction) -> f64 {
    let r = d.r;
    let phi_min = phase.eval(Vec2::new(1.0, 0.0), Vec2::new(1.0, 0.0));
    r * r / PI.sqrt() * (2.0 * r * sigma_sup).exp() / (r * d.d).powf(0.75) / phi_min
}

/// χ(s)/A^ω(s,θ) on every pixel of the layout.
fn demodulator(layout: &SinogramLayout, omega: f64, sigma: &Sigma, phase: PhaseFunction) -> Result<Vec<Complex64>> {
    let d = layout.domain;
    crate::exec::map(layout.len(), |idx| {
        let c = layout.coord(idx);
        let w = chi(c.s, &d);
        if w == 0.0 {
            return Ok(Complex64::default());
        }
        Ok(w / amplitude_a(c, omega, sigma, phase, &d)?)
    })
    .into_iter()
    .collect()
}

/// T̃₁^{−1,b}[g] = √ω P^{−1,b}[(A^ω)^{−1}χ g].
///
/// For data generated by a real coefficient the result is real up to the
/// remainder terms; the real part is returned.
pub fn apply_inverse(data: &Sinogram, cfg: &InversionConfig, sigma: &Sigma, phase: PhaseFunction) -> Result<ScalarField> {
    let demod = check_and_demodulate(data, cfg, sigma, phase)?;
    let h: Vec<Complex64> = data.data.iter().zip(&demod).map(|(g, a)| g * a).collect();
    let rec = fbp(&h, &cfg.filter, &data.layout, cfg.grid);
    let sw = cfg.omega.sqrt();
    Ok(ScalarField { lattice: cfg.grid, values: rec.iter().map(|v| sw * v.re).collect(), support_radius: cfg.grid.r * 2f64.sqrt() })
}

/// Pointwise standard error of `apply_inverse` for independent per-pixel
/// complex noise with the given standard errors (real part only, so half the
/// complex variance).
pub fn apply_inverse_stderr(
    stderr: &[f64],
    cfg: &InversionConfig,
    sigma: &Sigma,
    phase: PhaseFunction,
) -> Result<ScalarField> {
    let probe = Sinogram::zeros(cfg.layout, cfg.omega, "probe");
    let demod = check_and_demodulate(&probe, cfg, sigma, phase)?;
    let var: Vec<f64> = stderr.iter().zip(&demod).map(|(s, a)| 0.5 * s * s * a.norm_sqr()).collect();
    let v = fbp_variance(&var, &cfg.filter, &cfg.layout, cfg.grid);
    Ok(ScalarField {
        lattice: cfg.grid,
        values: v.iter().map(|x| (cfg.omega * x.max(0.0)).sqrt()).collect(),
        support_radius: cfg.grid.r * 2f64.sqrt(),
    })
}

fn check_and_demodulate(data: &Sinogram, cfg: &InversionConfig, sigma: &Sigma, phase: PhaseFunction) -> Result<Vec<Complex64>> {
    if !(cfg.omega > 0.0) {
        return Err(Error::Domain(format!("inversion needs ω > 0, got {}", cfg.omega)));
    }
    if data.omega != cfg.omega {
        return Err(Error::Config(format!("data frequency {} differs from configured {}", data.omega, cfg.omega)));
    }
    if data.layout != cfg.layout {
        return Err(Error::Config("sinogram layout differs from the configured one".into()));
    }
    demodulator(&data.layout, cfg.omega, sigma, phase)
}

/// Smooth cutoff: 1 on |x| ≤ r−5D/2, 0 for |x| ≥ r−2D.
pub fn support_mask(p: Vec2, d: &DiskDomain) -> f64 {
    let hi = d.inner_radius();
    let lo = hi - 0.5 * d.d;
    let t = ((p.norm() - lo) / (hi - lo)).clamp(0.0, 1.0);
    1.0 - t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
}

/// m·q restricted to B_{r−2D}.
pub fn masked(q: &ScalarField, d: &DiskDomain) -> ScalarField {
    let mut out = q.map(|p, v| v * support_mask(p, d));
    out.support_radius = d.inner_radius();
    out
}

/// Sup norm over the reconstruction region B_{r−2D}.
pub fn sup_inner(q: &ScalarField, d: &DiskDomain) -> f64 {
    q.sup_norm_in(d.inner_radius())
}

/// R^{ω,b}[q] with its single- and multiple-scattering parts.
#[derive(Debug, Clone)]
pub struct Residual {
    pub total: ScalarField,
    /// From T₁ − T̃₁ (plus discretisation of the exact-inversion identity).
    pub r1: ScalarField,
    /// From Σ_{m≥2} T_m.
    pub r2: ScalarField,
    /// Pointwise Monte-Carlo standard error of r2.
    pub r2_stderr: ScalarField,
}

impl Residual {
    fn zero(grid: Lattice) -> Self {
        let z = ScalarField::zeros(grid);
        Residual { total: z.clone(), r1: z.clone(), r2: z.clone(), r2_stderr: z }
    }
}

/// Residuals for several (ω, b) pairs from one synthesis per ω.
pub fn residual_sweep(
    q: &ScalarField,
    omegas: &[f64],
    bs: &[f64],
    cfg: &InversionConfig,
    sigma: &Sigma,
    phase: PhaseFunction,
) -> Result<Vec<Vec<Residual>>> {
    let d = cfg.layout.domain;
    let qn = sup_inner(q, &d);
    if qn > cfg.k0 {
        return Err(Error::Precondition(format!("‖q‖ = {qn} exceeds the contraction radius K0 = {}", cfg.k0)));
    }
    if qn == 0.0 {
        return Ok(omegas.iter().map(|_| bs.iter().map(|_| Residual::zero(cfg.grid)).collect()).collect());
    }
    let mq = masked(q, &d);
    let r = d.r;
    let mut k = mq.map(|p, v| v / rho(p, r));
    k.support_radius = d.inner_radius();
    let medium = Medium { domain: d, sigma, k: &k, phase };
    let syn = synthesize_data(&cfg.layout, omegas, &medium, Some(&cfg.forward_budget), &cfg.quad)?;
    let mut out = Vec::with_capacity(omegas.len());
    for (s, &w) in syn.iter().zip(omegas) {
        let mut row = Vec::with_capacity(bs.len());
        for &b in bs {
            let c = InversionConfig { omega: w, filter: FilterSpec { b, ..cfg.filter }, ..*cfg };
            let target = lowpass_reference(&mq, &c.filter);
            let r1 = apply_inverse(&s.single, &c, sigma, phase)?.zip(&target, |a, t| a - t);
            let r2 = apply_inverse(&s.multiple, &c, sigma, phase)?;
            let r2_stderr = apply_inverse_stderr(&s.multiple_stderr, &c, sigma, phase)?;
            let total = r1.zip(&r2, |a, b| a + b);
            row.push(Residual { total, r1, r2, r2_stderr });
        }
        out.push(row);
    }
    Ok(out)
}

/// R^{ω,b}[q] := T̃₁^{−1,b}𝔇^ω[m q/ρ] − [m q]_b.
pub fn residual_r(q: &ScalarField, cfg: &InversionConfig, sigma: &Sigma, phase: PhaseFunction) -> Result<Residual> {
    Ok(residual_sweep(q, &[cfg.omega], &[cfg.filter.b], cfg, sigma, phase)?.remove(0).remove(0))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    pub n: usize,
    /// ‖q_n − q_{n−1}‖_∞ on B_{r−2D} (0 for n = 0).
    pub step: f64,
    /// ‖q_n − [kρ]_b‖_∞ on B_{r−2D} when the truth is known.
    pub error: Option<f64>,
    /// sup of the Monte-Carlo standard error of the residual used to form q_n.
    pub mc_stderr: f64,
}

#[derive(Debug, Clone)]
pub struct ReconstructionState {
    pub q0: ScalarField,
    pub q: ScalarField,
    pub iterates: Vec<ScalarField>,
    pub history: Vec<IterationRecord>,
    pub converged: bool,
}

impl ReconstructionState {
    /// max ‖q_{n+1}−q_n‖/‖q_n−q_{n−1}‖: each ratio is ‖R[q_n]−R[q_{n−1}]‖/‖q_n−q_{n−1}‖
    /// for a pair of iterates, hence a lower estimate of c₁ from points the
    /// iteration actually visited.
    pub fn observed_contraction(&self) -> f64 {
        self.history
            .windows(2)
            .skip(1)
            .filter(|w| w[0].step > 0.0)
            .map(|w| w[1].step / w[0].step)
            .fold(0.0, f64::max)
    }
}

/// q₀ = T̃₁^{−1,b}𝔇, q_{n+1} = q₀ − R[q_n].
///
/// Every residual evaluation reuses the configured forward seed, so R is one
/// fixed deterministic map and the iteration is a genuine fixed-point scheme.
pub fn iterate(
    data: &Sinogram,
    cfg: &InversionConfig,
    sigma: &Sigma,
    phase: PhaseFunction,
    truth: Option<&ScalarField>,
) -> Result<ReconstructionState> {
    let d = cfg.layout.domain;
    let q0 = apply_inverse(data, cfg, sigma, phase)?;
    let err = |q: &ScalarField| truth.map(|t| sup_inner(&q.zip(t, |a, b| a - b), &d));
    let q0n = sup_inner(&q0, &d);
    if q0n > cfg.k0 {
        return Err(Error::Precondition(format!(
            "direct reconstruction has ‖q0‖ = {q0n} above K0 = {}; data too strong for the contraction ball",
            cfg.k0
        )));
    }
    let mut history = vec![IterationRecord { n: 0, step: 0.0, error: err(&q0), mc_stderr: 0.0 }];
    let mut iterates = vec![q0.clone()];
    let mut q = q0.clone();
    let mut converged = q0n == 0.0;
    let mut n = 0;
    while !converged && n < cfg.max_iters {
        let res = residual_r(&q, cfg, sigma, phase)?;
        let next = q0.zip(&res.total, |a, r| a - r);
        n += 1;
        let step = sup_inner(&next.zip(&q, |a, b| a - b), &d);
        let nn = sup_inner(&next, &d);
        history.push(IterationRecord { n, step, error: err(&next), mc_stderr: sup_inner(&res.r2_stderr, &d) });
        if !nn.is_finite() || nn > cfg.k0 {
            return Err(Error::Divergence(format!("iterate {n} left the K0 ball: ‖q‖ = {nn} > {}", cfg.k0)));
        }
        q = next;
        iterates.push(q.clone());
        converged = step < cfg.stop_tol * q0n;
    }
    Ok(ReconstructionState { q0, q, iterates, history, converged })
}

/// sup_x ∫_X E(x,y)/|x−y| dy over the centre and a Fibonacci spiral of
/// `n_samples` points, in polar coordinates about x (the Jacobian removes the
/// singularity); capped at 2πΔ.
pub fn estimate_l_norm(sigma: &Sigma, d: &DiskDomain, n_samples: usize) -> f64 {
    let r = d.r;
    let n_ang = 256;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut pts = vec![Vec2::default()];
    for i in 0..n_samples {
        let rad = r * ((i as f64 + 0.5) / n_samples as f64).sqrt() * (1.0 - 1e-9);
        pts.push(Vec2::from_angle(i as f64 * golden) * rad);
    }
    let vals = crate::exec::map(pts.len(), |k| {
        let x = pts[k];
        let mut acc = 0.0;
        for a in 0..n_ang {
            let dir = Vec2::from_angle(2.0 * PI * (a as f64 + 0.5) / n_ang as f64);
            // distance to the circle along dir
            let bx = x.dot(dir);
            let tau = -bx + (bx * bx + r * r - x.norm2()).max(0.0).sqrt();
            acc += ray_attenuation_integral(sigma, x, dir, tau);
        }
        acc * 2.0 * PI / n_ang as f64
    });
    let m = vals.into_iter().fold(0.0, f64::max);
    m.min(2.0 * PI * d.diameter())
}

/// ∫₀^τ E(x, x + t·dir) dt.
fn ray_attenuation_integral(sigma: &Sigma, x: Vec2, dir: Vec2, tau: f64) -> f64 {
    match sigma {
        Sigma::Constant(s) if *s > 0.0 => (1.0 - (-s * tau).exp()) / s,
        Sigma::Constant(_) => tau,
        Sigma::Field(_) => {
            // march with midpoint optical depth, trapezoid in t
            let n = ((tau / 0.005).ceil() as usize).max(8);
            let h = tau / n as f64;
            let mut depth = 0.0;
            let mut acc = 0.5;
            for i in 1..=n {
                let mid = x + dir * ((i as f64 - 0.5) * h);
                depth += sigma.value(mid) * h;
                let e = (-depth).exp();
                acc += if i == n { 0.5 * e } else { e };
            }
            acc * h
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ContractionReport {
    pub omegas: Vec<f64>,
    pub bs: Vec<f64>,
    /// c1[i][j]: sup over trial pairs of ‖R[q]−R[q̃]‖/‖q−q̃‖ at (ω_i, b_j).
    pub c1: Vec<Vec<f64>>,
    /// Monte-Carlo standard error bound on each numerator (sup of the pair).
    pub stderr: Vec<Vec<f64>>,
    pub decreasing_in_omega: bool,
    pub increasing_in_b: bool,
}

/// Random smooth field: a sum of Gaussian bumps inside B_{r−5D/2}, scaled to sup `amp`.
pub fn random_smooth_field(grid: Lattice, d: &DiskDomain, amp: f64, rng: &mut impl Rng) -> ScalarField {
    let lim = d.inner_radius() - 0.5 * d.d;
    let n = rng.gen_range(1..=4);
    let bumps: Vec<(Vec2, f64, f64)> = (0..n)
        .map(|_| {
            let w = rng.gen_range(0.1..0.4);
            let c = Vec2::from_angle(rng.gen_range(0.0..2.0 * PI)) * (rng.gen::<f64>() * (lim - 2.0 * w).max(0.0));
            (c, w, rng.gen_range(0.3..1.0))
        })
        .collect();
    let f = ScalarField::from_fn(grid, |p| bumps.iter().map(|(c, w, a)| a * (-(p - *c).norm2() / (w * w)).exp()).sum());
    let m = sup_inner(&f, d);
    let mut f = f.map(|p, v| amp * v / m * support_mask(p, d));
    f.support_radius = d.inner_radius();
    f
}

/// Measured Lipschitz factor c₁ of R over random pairs of sup `amp`, for
/// every (ω, b) combination, with common random numbers inside each pair.
/// Even trials pair two independent fields; odd trials pair q with q/2,
/// which probes the direction the fixed-point iteration actually moves in.
pub fn contraction_sweep(
    omegas: &[f64],
    bs: &[f64],
    cfg: &InversionConfig,
    sigma: &Sigma,
    phase: PhaseFunction,
    amp: f64,
    trial_count: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let d = cfg.layout.domain;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c1 = vec![vec![0.0; bs.len()]; omegas.len()];
    let mut se = vec![vec![0.0; bs.len()]; omegas.len()];
    for t in 0..trial_count {
        let q = random_smooth_field(cfg.grid, &d, amp, &mut rng);
        let qt = if t % 2 == 1 {
            q.map(|_, v| 0.5 * v)
        } else {
            random_smooth_field(cfg.grid, &d, amp, &mut rng)
        };
        let dq = sup_inner(&q.zip(&qt, |a, b| a - b), &d);
        if dq == 0.0 {
            continue;
        }
        let ra = residual_sweep(&q, omegas, bs, cfg, sigma, phase)?;
        let rb = residual_sweep(&qt, omegas, bs, cfg, sigma, phase)?;
        for i in 0..omegas.len() {
            for j in 0..bs.len() {
                let diff = sup_inner(&ra[i][j].total.zip(&rb[i][j].total, |a, b| a - b), &d);
                c1[i][j] = f64::max(c1[i][j], diff / dq);
                let s = sup_inner(&ra[i][j].r2_stderr, &d).max(sup_inner(&rb[i][j].r2_stderr, &d));
                se[i][j] = f64::max(se[i][j], s / dq);
            }
        }
    }
    let decreasing_in_omega = (0..bs.len()).all(|j| c1.windows(2).all(|w| w[1][j] < w[0][j]));
    let increasing_in_b = c1.iter().all(|row| row.windows(2).all(|w| w[1] > w[0]));
    Ok(ContractionReport { omegas: omegas.to_vec(), bs: bs.to_vec(), c1, stderr: se, decreasing_in_omega, increasing_in_b })
}

/// Single (ω, b) contraction factor.
pub fn contraction_report(
    cfg: &InversionConfig,
    sigma: &Sigma,
    phase: PhaseFunction,
    amp: f64,
    trial_count: usize,
    seed: u64,
) -> Result<f64> {
    let rep = contraction_sweep(&[cfg.omega], &[cfg.filter.b], cfg, sigma, phase, amp, trial_count, seed)?;
    Ok(rep.c1[0][0])
}

/// c₁/(1−c₁)·‖kρ − [kρ]_b‖: the a-priori error bound for the fixed point.
pub fn fixed_point_bound(c1: f64, krho: &ScalarField, spec: &FilterSpec, d: &DiskDomain) -> f64 {
    if c1 >= 1.0 {
        return f64::INFINITY;
    }
    let kb = lowpass_reference(krho, spec);
    c1 / (1.0 - c1) * sup_inner(&krho.zip(&kb, |a, b| a - b), d)
}
