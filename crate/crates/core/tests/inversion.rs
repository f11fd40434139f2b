use std::f64::consts::PI;

use fdrt_core::fields::{rho, Field2, GaussBump, Lattice, Phantom, PhaseFunction, ScalarField, Sigma};
use fdrt_core::forward::{leading_single, McBudget, Medium, Sinogram};
use fdrt_core::geometry::{DiskDomain, ParallelCoord, SinogramLayout, Vec2};
use fdrt_core::inversion::*;
use fdrt_core::xray::lowpass_reference;
use fdrt_core::Error;
use num_complex::Complex64;

fn dom() -> DiskDomain {
    DiskDomain::new(1.0, 0.2).unwrap()
}

fn bump(amp: f64) -> Phantom {
    Phantom::GaussianBumps {
        bumps: vec![GaussBump { center: [0.05, 0.02], radius: 0.5, width: 0.25, amplitude: amp }],
    }
}

fn leading_sinogram(k: &Phantom, layout: SinogramLayout, omega: f64, sigma: &Sigma, phase: PhaseFunction) -> Sinogram {
    let med = Medium { domain: layout.domain, sigma, k, phase };
    let mut s = Sinogram::zeros(layout, omega, "leading");
    for (i, v) in s.data.iter_mut().enumerate() {
        *v = leading_single(layout.coord(i), omega, &med, 0.002).unwrap();
    }
    s
}

fn krho_field(k: &Phantom, grid: Lattice, d: &DiskDomain) -> ScalarField {
    ScalarField::from_fn(grid, |p| if p.norm() < d.r { k.value(p) * rho(p, d.r) } else { 0.0 })
}

#[test]
fn amplitude_examples() {
    let d = dom();
    let iso = PhaseFunction::Isotropic;
    let a = amplitude_a(ParallelCoord::new(0.0, 0.3), 5.0, &Sigma::zero(), iso, &d).unwrap();
    assert!((a.norm() - 1.0 / (2.0 * PI.sqrt())).abs() < 1e-14, "{}", a.norm());
    let sig = Sigma::Constant(0.4);
    for s in [-0.7, -0.2, 0.0, 0.55] {
        let c = ParallelCoord::new(s, 1.1);
        let lo = amplitude_a(c, 10.0, &sig, iso, &d).unwrap().norm();
        let hi = amplitude_a(c, 1000.0, &sig, iso, &d).unwrap().norm();
        // equal up to the rounding of the polar-to-Cartesian conversion
        assert!((lo - hi).abs() <= 4.0 * f64::EPSILON * lo, "{lo} vs {hi}");
    }
    assert!(matches!(amplitude_a(ParallelCoord::new(0.85, 0.0), 1.0, &sig, iso, &d), Err(Error::Domain(_))));
}

#[test]
fn amplitude_inverse_is_bounded() {
    let d = dom();
    for (sig, phase) in [
        (Sigma::Constant(0.0), PhaseFunction::Isotropic),
        (Sigma::Constant(0.7), PhaseFunction::Isotropic),
        (Sigma::Constant(0.3), PhaseFunction::TruncatedCosine { g: 0.4 }),
    ] {
        let bound = amplitude_inverse_bound(&d, sig.sup_norm(), phase);
        let layout = SinogramLayout::new(d, 101, 16);
        let worst = (0..layout.len())
            .map(|i| 1.0 / amplitude_a(layout.coord(i), 50.0, &sig, phase, &d).unwrap().norm())
            .fold(0.0, f64::max);
        let edge = 1.0 / amplitude_a(ParallelCoord::new(d.s_max(), 0.0), 50.0, &sig, phase, &d).unwrap().norm();
        assert!(worst.max(edge) <= bound, "{worst} / {edge} vs {bound}");
    }
}

#[test]
fn apply_inverse_zero_linear_and_checked() {
    let d = dom();
    let layout = SinogramLayout::new(d, 64, 64);
    let grid = Lattice::new(64, 1.0);
    let sig = Sigma::Constant(0.2);
    let iso = PhaseFunction::Isotropic;
    let cfg = InversionConfig::new(128.0, 8.0, layout, grid, &sig, iso);
    let z = apply_inverse(&Sinogram::zeros(layout, 128.0, "z"), &cfg, &sig, iso).unwrap();
    assert!(z.values.iter().all(|v| *v == 0.0));

    let mut g1 = Sinogram::zeros(layout, 128.0, "g1");
    let mut g2 = Sinogram::zeros(layout, 128.0, "g2");
    for i in 0..layout.len() {
        let t = i as f64;
        g1.data[i] = Complex64::new((0.37 * t).sin(), (0.11 * t).cos());
        g2.data[i] = Complex64::new((0.05 * t).cos(), -(0.23 * t).sin());
    }
    let mut comb = Sinogram::zeros(layout, 128.0, "c");
    for i in 0..layout.len() {
        comb.data[i] = g1.data[i] * 2.5 - g2.data[i] * 0.75;
    }
    let a = apply_inverse(&g1, &cfg, &sig, iso).unwrap();
    let b = apply_inverse(&g2, &cfg, &sig, iso).unwrap();
    let c = apply_inverse(&comb, &cfg, &sig, iso).unwrap();
    let scale = c.sup_norm();
    for i in 0..c.values.len() {
        assert!((c.values[i] - (2.5 * a.values[i] - 0.75 * b.values[i])).abs() <= 1e-12 * scale);
    }

    let wrong = Sinogram::zeros(layout, 64.0, "w");
    assert!(matches!(apply_inverse(&wrong, &cfg, &sig, iso), Err(Error::Config(_))));
    let bad = InversionConfig { omega: 0.0, ..cfg };
    assert!(matches!(apply_inverse(&Sinogram::zeros(layout, 0.0, "z"), &bad, &sig, iso), Err(Error::Domain(_))));
}

#[test]
fn exact_inversion_of_leading_model() {
    let d = dom();
    let layout = SinogramLayout::new(d, 256, 256);
    let grid = Lattice::new(128, 1.0);
    let sig = Sigma::Constant(0.3);
    let phase = PhaseFunction::TruncatedCosine { g: 0.3 };
    let k = bump(0.2);
    let omega = 256.0;
    let cfg = InversionConfig::new(omega, 8.0, layout, grid, &sig, phase);
    let rec = apply_inverse(&leading_sinogram(&k, layout, omega, &sig, phase), &cfg, &sig, phase).unwrap();
    let target = lowpass_reference(&krho_field(&k, grid, &d), &cfg.filter);
    let err = sup_inner(&rec.zip(&target, |a, b| a - b), &d);
    let scale = sup_inner(&target, &d);
    assert!(err <= 1e-3 * scale, "err {err} vs ‖[kρ]_b‖ {scale}");
}

#[test]
fn residual_of_zero_is_zero() {
    let d = dom();
    let layout = SinogramLayout::new(d, 32, 32);
    let grid = Lattice::new(32, 1.0);
    let sig = Sigma::Constant(0.2);
    let iso = PhaseFunction::Isotropic;
    let cfg = InversionConfig::new(64.0, 8.0, layout, grid, &sig, iso);
    let r = residual_r(&ScalarField::zeros(grid), &cfg, &sig, iso).unwrap();
    assert!(r.total.values.iter().chain(&r.r1.values).chain(&r.r2.values).all(|v| *v == 0.0));

    let big = ScalarField::from_fn(grid, |p| if p.norm() < 0.3 { 10.0 * cfg.k0 } else { 0.0 });
    assert!(matches!(residual_r(&big, &cfg, &sig, iso), Err(Error::Precondition(_))));
}

#[test]
fn single_scattering_residual_decays() {
    let d = dom();
    let layout = SinogramLayout::new(d, 128, 128);
    let grid = Lattice::new(96, 1.0);
    let sig = Sigma::Constant(0.2);
    let iso = PhaseFunction::Isotropic;
    let mut cfg = InversionConfig::new(64.0, 8.0, layout, grid, &sig, iso);
    cfg.forward_budget = McBudget { n_paths: 4, max_order: 2, seed: 3 };
    let q = krho_field(&bump(0.1), grid, &d);
    let rows = residual_sweep(&q, &[64.0, 256.0], &[8.0], &cfg, &sig, iso).unwrap();
    let r64 = sup_inner(&rows[0][0].r1, &d);
    let r256 = sup_inner(&rows[1][0].r1, &d);
    assert!(r256 <= 0.6 * r64, "R₁: {r64} → {r256}");
}

#[test]
fn l_norm_examples() {
    let d = dom();
    let l0 = estimate_l_norm(&Sigma::zero(), &d, 64);
    assert!(l0 >= PI && l0 <= 4.0 * PI, "{l0}");
    // at the centre of the unit disk with σ = 0 the integral is exactly 2πr
    assert!((l0 - 2.0 * PI).abs() < 1e-9, "{l0}");
    let l10 = estimate_l_norm(&Sigma::Constant(10.0), &d, 64);
    assert!(l10 < l0);
    assert!((l10 - 2.0 * PI * (1.0 - (-10.0f64).exp()) / 10.0).abs() < 1e-9);
    let field = Sigma::Field(ScalarField::from_fn(Lattice::new(64, 1.0), |p| 0.5 + 0.3 * p.x));
    let a = estimate_l_norm(&field, &d, 64);
    let b = estimate_l_norm(&field, &d, 128);
    assert!((a - b).abs() < 0.01 * b, "{a} vs {b}");
    assert!(a < l0);
}

#[test]
fn iterate_zero_data() {
    let d = dom();
    let layout = SinogramLayout::new(d, 32, 32);
    let grid = Lattice::new(32, 1.0);
    let sig = Sigma::Constant(0.2);
    let iso = PhaseFunction::Isotropic;
    let cfg = InversionConfig::new(64.0, 8.0, layout, grid, &sig, iso);
    let truth = ScalarField::zeros(grid);
    let st = iterate(&Sinogram::zeros(layout, 64.0, "z"), &cfg, &sig, iso, Some(&truth)).unwrap();
    assert!(st.converged);
    assert_eq!(st.history.len(), 1);
    assert_eq!(st.history[0].error, Some(0.0));
    assert!(st.q.values.iter().all(|v| *v == 0.0));
}

#[test]
fn iterate_rejects_strong_data() {
    let d = dom();
    let layout = SinogramLayout::new(d, 64, 64);
    let grid = Lattice::new(64, 1.0);
    let sig = Sigma::Constant(0.2);
    let iso = PhaseFunction::Isotropic;
    let cfg = InversionConfig::new(64.0, 8.0, layout, grid, &sig, iso);
    let data = leading_sinogram(&bump(50.0), layout, 64.0, &sig, iso);
    assert!(matches!(iterate(&data, &cfg, &sig, iso, None), Err(Error::Precondition(_))));
}

#[test]
fn config_validation() {
    let d = dom();
    let layout = SinogramLayout::new(d, 32, 32);
    let grid = Lattice::new(32, 1.0);
    let sig = Sigma::Constant(0.2);
    let iso = PhaseFunction::Isotropic;
    let cfg = InversionConfig::new(64.0, 8.0, layout, grid, &sig, iso);
    assert!(cfg.validate(&sig, iso).is_ok());
    let cap = 1.0 / (iso.sup_norm() * estimate_l_norm(&sig, &d, 64));
    assert!((cfg.k0 - 0.8 * cap).abs() < 1e-12 * cap);
    assert!(InversionConfig { k0: 1.01 * cap, ..cfg }.validate(&sig, iso).is_err());
    assert!(InversionConfig { omega: -1.0, ..cfg }.validate(&sig, iso).is_err());
    let _ = Vec2::default();
}
