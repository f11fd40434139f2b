//! Aggregated checks of the phase-function bounds, the critical-curve
//! closed forms, the one-dimensional stationary-phase rate and the angular
//! margins, as one JSON-serializable report.

use std::f64::consts::PI;

use fdrt_core::oscphase::{
    lemma_s_margins, stationary_phase_1d, MarginReport, Phase1Model, Phase2Model, QuadraticPhase, DEFAULT_DELTA0,
};
use fdrt_core::quad::loglog_slope;
use fdrt_core::{DiskDomain, ParallelCoord, Vec2};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::VerifySpec;

#[derive(Debug, Clone, Serialize)]
pub struct BoundCheck {
    pub name: String,
    pub samples: usize,
    pub lower: f64,
    pub upper: f64,
    pub observed_min: Option<f64>,
    pub observed_max: Option<f64>,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct CriticalValueCheck {
    pub pairs: usize,
    /// max relative gap between closed-form S₂″ and a centred second difference.
    pub max_rel_error: f64,
    pub tolerance: f64,
    /// max |det H| over coincident pairs.
    pub max_det_at_coincidence: f64,
    pub det_tolerance: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RateCheck {
    pub omegas: Vec<f64>,
    pub remainders: Vec<f64>,
    pub slope: f64,
    pub slope_range: [f64; 2],
    /// max |I − √(π/(1−iω/2))| against the closed form.
    pub max_oracle_error: f64,
    pub oracle_tolerance: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct MarginCheck {
    pub margins: Vec<MarginReport>,
    pub violations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub domain: [f64; 2],
    pub seed: u64,
    pub sample_count: usize,
    pub phi1: Option<BoundCheck>,
    pub phi2: Option<BoundCheck>,
    pub critical_values: Option<CriticalValueCheck>,
    pub rate: Option<RateCheck>,
    pub margins: Option<MarginCheck>,
    /// One line per failed check.
    pub failures: Vec<String>,
    pub passed: bool,
}

fn in_disk(rng: &mut ChaCha8Rng, radius: f64) -> Vec2 {
    loop {
        let p = Vec2::new(rng.gen_range(-radius..radius), rng.gen_range(-radius..radius));
        if p.norm() <= radius {
            return p;
        }
    }
}

/// Admissible (y, θ, u, v): the chord and the shifted point both stay in B_{r−D}.
pub fn sample_phase1(rng: &mut ChaCha8Rng, d: DiskDomain) -> (Phase1Model, f64, f64) {
    let lim = d.r - d.d;
    loop {
        let y = in_disk(rng, lim);
        let m = Phase1Model::new(y, rng.gen_range(0.0..2.0 * PI), d);
        if m.coord().s.abs() > lim {
            continue;
        }
        let (u, v) = (rng.gen_range(-2.0 * d.r..2.0 * d.r), rng.gen_range(-2.0 * d.r..2.0 * d.r));
        if m.point(u, v).norm() <= lim {
            return (m, u, v);
        }
    }
}

/// x₁, x_m in B_{r−2D} and a chord with |s| ≤ r − D.
pub fn sample_phase2(rng: &mut ChaCha8Rng, d: DiskDomain) -> (Phase2Model, ParallelCoord) {
    let lim = d.r - 2.0 * d.d;
    let m = Phase2Model::new(in_disk(rng, lim), in_disk(rng, lim), d).expect("points sampled inside B_(r-2D)");
    let c = ParallelCoord::new(rng.gen_range(-d.s_max()..d.s_max()), rng.gen_range(0.0..2.0 * PI));
    (m, c)
}

fn bound_check(name: &str, samples: usize, (lower, upper): (f64, f64), mut draw: impl FnMut() -> f64) -> BoundCheck {
    let mut chk = BoundCheck {
        name: name.into(),
        samples,
        lower,
        upper,
        observed_min: None,
        observed_max: None,
        violations: 0,
    };
    for _ in 0..samples {
        let v = draw();
        chk.observed_min = Some(chk.observed_min.map_or(v, |m: f64| m.min(v)));
        chk.observed_max = Some(chk.observed_max.map_or(v, |m: f64| m.max(v)));
        if !(lower..=upper).contains(&v) {
            chk.violations += 1;
        }
    }
    chk
}

/// ∂²φ₁/∂v² ∈ [−2/D, −D/(4r²)] on random admissible samples.
pub fn check_phi1(d: DiskDomain, samples: usize, rng: &mut ChaCha8Rng) -> BoundCheck {
    let bounds = (-2.0 / d.d, -d.d / (4.0 * d.r * d.r));
    bound_check("phi1_vv", samples, bounds, || {
        let (m, u, v) = sample_phase1(rng, d);
        m.phi1_second_derivative(u, v).unwrap_or(f64::NAN)
    })
}

/// ∂²φ₂/∂s² ∈ [−8r/D², −2D/r²] on random admissible samples.
pub fn check_phi2(d: DiskDomain, samples: usize, rng: &mut ChaCha8Rng) -> BoundCheck {
    let bounds = (-8.0 * d.r / (d.d * d.d), -2.0 * d.d / (d.r * d.r));
    bound_check("phi2_ss", samples, bounds, || {
        let (m, c) = sample_phase2(rng, d);
        m.derivatives(c).map(|h| h.dss).unwrap_or(f64::NAN)
    })
}

/// Closed-form S₂″ at both critical angles against a centred second
/// difference (step 1e−4), and det H at coincident points.
pub fn check_critical_values(d: DiskDomain, pairs: usize, rng: &mut ChaCha8Rng) -> CriticalValueCheck {
    let (tol, det_tol, h) = (1e-6, 1e-8, 1e-4);
    let mut chk = CriticalValueCheck {
        pairs,
        max_rel_error: 0.0,
        tolerance: tol,
        max_det_at_coincidence: 0.0,
        det_tolerance: det_tol,
        violations: 0,
    };
    let mut n = 0;
    while n < pairs {
        let (m, _) = sample_phase2(rng, d);
        // nearly coincident pairs make the second difference ill-conditioned
        if m.separation() < 0.05 * d.r {
            continue;
        }
        let (Some(t), Some((at, atpi))) = (m.theta_1m(), m.s2pp_critical()) else { continue };
        for (theta, closed) in [(t, at), (t + PI, atpi)] {
            let num = (m.s2_profile(theta + h).s2 - 2.0 * m.s2_profile(theta).s2 + m.s2_profile(theta - h).s2) / (h * h);
            let rel = (num - closed).abs() / closed.abs();
            chk.max_rel_error = chk.max_rel_error.max(rel);
            if !(rel <= tol) {
                chk.violations += 1;
            }
        }
        let x = m.x1;
        let same = Phase2Model::new(x, x, d).expect("x1 admissible");
        for k in 0..8 {
            let det = same.s2_profile(k as f64 * PI / 4.0 + 0.1).det.abs();
            chk.max_det_at_coincidence = chk.max_det_at_coincidence.max(det);
            if !(det <= det_tol) {
                chk.violations += 1;
            }
        }
        n += 1;
    }
    chk
}

/// Remainder |I − I₀| for ∫ e^{−x²} e^{iωx²/2} dx against ω, fitted in log-log.
pub fn check_rate(omegas: &[f64]) -> RateCheck {
    let range = [-1.6, -1.35];
    let tol = 1e-8;
    let mut rem = Vec::with_capacity(omegas.len());
    let mut oracle_err: f64 = 0.0;
    let mut violations = 0;
    for &w in omegas {
        match stationary_phase_1d(&QuadraticPhase { sign: 1.0 }, (1.0, 1.0), |x| Complex64::new((-x * x).exp(), 0.0), (-8.0, 8.0), w)
        {
            Ok(sp) => {
                let exact = (Complex64::new(PI, 0.0) / Complex64::new(1.0, -w / 2.0)).sqrt();
                oracle_err = oracle_err.max((sp.i - exact).norm());
                rem.push(sp.remainder.norm());
            }
            Err(_) => {
                violations += 1;
                rem.push(f64::NAN);
            }
        }
    }
    let slope = if omegas.len() >= 2 { loglog_slope(omegas, &rem) } else { f64::NAN };
    if omegas.len() >= 2 && !(range[0]..=range[1]).contains(&slope) {
        violations += 1;
    }
    if !(oracle_err <= tol) {
        violations += 1;
    }
    RateCheck {
        omegas: omegas.to_vec(),
        remainders: rem,
        slope,
        slope_range: range,
        max_oracle_error: oracle_err,
        oracle_tolerance: tol,
        violations,
    }
}

/// Measured (C₁, C₂) for symmetric pairs at the given separations. Both must
/// be strictly positive for distinct points.
pub fn check_margins(d: DiskDomain, separations: &[f64], samples: usize) -> MarginCheck {
    let mut violations = 0;
    let margins = separations
        .iter()
        .map(|&sep| {
            let m = Phase2Model::new(Vec2::new(-0.5 * sep, 0.0), Vec2::new(0.5 * sep, 0.0), d)
                .expect("separation validated against B_(r-2D)");
            let rep = lemma_s_margins(&m, DEFAULT_DELTA0, samples);
            if !(rep.c1.unwrap_or(0.0) > 0.0 && rep.c2.unwrap_or(0.0) > 0.0) {
                violations += 1;
            }
            rep
        })
        .collect();
    MarginCheck { margins, violations }
}

pub fn run(d: DiskDomain, spec: &VerifySpec, seed: u64) -> VerifyReport {
    let n = spec.sample_count;
    let mut rep = VerifyReport {
        domain: [d.r, d.d],
        seed,
        sample_count: n,
        phi1: None,
        phi2: None,
        critical_values: None,
        rate: None,
        margins: None,
        failures: vec![],
        passed: true,
    };
    if n == 0 {
        return rep;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi1 = check_phi1(d, n, &mut rng);
    let phi2 = check_phi2(d, n, &mut rng);
    let cv = check_critical_values(d, spec.pair_count.min(n), &mut rng);
    let rate = check_rate(&spec.rate_omegas);
    let margins = check_margins(d, &spec.margin_separations, 720.min(n.max(16)));
    let mut fail = |what: &str, v: usize| {
        if v > 0 {
            rep.failures.push(format!("{what}: {v} violation(s)"));
        }
    };
    fail("phi1 curvature bounds", phi1.violations);
    fail("phi2 curvature bounds", phi2.violations);
    fail("critical-angle S2'' closed forms", cv.violations);
    fail("stationary-phase rate", rate.violations);
    fail("angular margins", margins.violations);
    rep.passed = rep.failures.is_empty();
    rep.phi1 = Some(phi1);
    rep.phi2 = Some(phi2);
    rep.critical_values = Some(cv);
    rep.rate = Some(rate);
    rep.margins = Some(margins);
    rep
}
