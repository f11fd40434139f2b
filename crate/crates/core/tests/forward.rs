use std::f64::consts::PI;

use fdrt_core::fields::{Disk, Field2, GaussBump, PhaseFunction, Phantom, Sigma};
use fdrt_core::forward::*;
use fdrt_core::geometry::boundary_points;
use fdrt_core::quad::GaussLegendre;
use fdrt_core::{DiskDomain, ParallelCoord, SinogramLayout, Vec2};
use num_complex::Complex64;

fn dom() -> DiskDomain {
    DiskDomain::new(1.0, 0.2).unwrap()
}

fn bumps() -> Phantom {
    Phantom::GaussianBumps {
        bumps: vec![
            GaussBump { center: [0.1, 0.05], radius: 0.3, width: 0.25, amplitude: 0.2 },
            GaussBump { center: [-0.2, -0.1], radius: 0.2, width: f64::INFINITY, amplitude: 0.1 },
        ],
    }
}

fn medium<'a>(sigma: &'a Sigma, k: &'a dyn Field2) -> Medium<'a> {
    Medium { domain: dom(), sigma, k, phase: PhaseFunction::Isotropic }
}

/// Kernel of the single-scattering integral at x, written out directly.
fn t1_integrand(c: ParallelCoord, omega: f64, m: &Medium, x: Vec2) -> Complex64 {
    let bp = boundary_points(c, &m.domain).unwrap();
    let r = m.domain.r;
    let (l0, lc) = (x.dist(bp.x0), x.dist(bp.xc));
    let vin = (x - bp.x0) * (1.0 / l0);
    let vout = (bp.xc - x) * (1.0 / lc);
    let e = m.sigma.attenuation(bp.x0, x) * m.sigma.attenuation(x, bp.xc);
    let amp = m.phase.eval(vin, vout) * e * vin.dot(bp.x0 * (1.0 / r)).abs() * vout.dot(bp.xc * (1.0 / r)).abs()
        * m.k.value(x)
        / (l0 * lc);
    Complex64::from_polar(amp, -omega * (l0 + lc))
}

/// Cartesian midpoint rule over the support box; spectrally accurate for C^∞ k.
fn t1_cartesian(c: ParallelCoord, omega: f64, m: &Medium, n: usize) -> Complex64 {
    let sup = m.k.support();
    let h = 2.0 * sup.radius / n as f64;
    let mut acc = Complex64::default();
    for iy in 0..n {
        for ix in 0..n {
            let x = sup.center + Vec2::new(-sup.radius + (ix as f64 + 0.5) * h, -sup.radius + (iy as f64 + 0.5) * h);
            if sup.contains(x) {
                acc += t1_integrand(c, omega, m, x);
            }
        }
    }
    acc * (h * h)
}

#[test]
fn ballistic_examples() {
    let d = dom();
    let z = Sigma::zero();
    let t = ballistic(ParallelCoord::new(0.0, 0.3), 5.0, &z, &d).unwrap();
    assert!((t.norm() - 0.5).abs() < 1e-14);
    assert!((t - Complex64::from_polar(0.5, -10.0)).norm() < 1e-13);
    let t = ballistic(ParallelCoord::new(0.6, 1.0), 5.0, &z, &d).unwrap();
    assert!((t.norm() - 0.4).abs() < 1e-14);
    let c = 0.7;
    let t1 = ballistic(ParallelCoord::new(0.6, 1.0), 5.0, &Sigma::Constant(c), &d).unwrap();
    assert!((t1.norm() / t.norm() - (-2.0 * c * 0.8_f64).exp()).abs() < 1e-14);
    assert!(ballistic(ParallelCoord::new(0.85, 0.0), 1.0, &z, &d).is_err());
}

#[test]
fn single_scattering_zero_k_and_refusal() {
    let z = Sigma::zero();
    let k = Phantom::default();
    let m = medium(&z, &k);
    let q = SingleQuad::default();
    assert_eq!(single_scattering(ParallelCoord::new(0.1, 0.2), 50.0, &m, &q).unwrap(), Complex64::default());
    let bad = SingleQuad { points_per_wavelength: 3.0, ..q };
    assert!(matches!(single_scattering(ParallelCoord::new(0.1, 0.2), 50.0, &m, &bad), Err(fdrt_core::Error::Resolution(_))));
}

#[test]
fn single_scattering_tiny_disk_at_zero_frequency() {
    let z = Sigma::zero();
    let eps = 0.01;
    let k0 = 0.5;
    let k = Phantom::Disks { disks: vec![Disk { center: [0.0, 0.0], radius: eps, value: k0 }] };
    let m = medium(&z, &k);
    let fine = SingleQuad { dxi: 2e-4, n_eta: 16384, ..Default::default() };
    for c in [ParallelCoord::new(0.0, 0.0), ParallelCoord::new(0.3, 1.1)] {
        let got = single_scattering(c, 0.0, &m, &fine).unwrap();
        let want = t1_integrand(c, 0.0, &m, Vec2::default()) * (PI * eps * eps);
        assert!((got - want).norm() <= 2e-2 * want.norm(), "{got} vs {want}");
    }
}

#[test]
fn single_scattering_matches_cartesian_oracle() {
    let sig = Sigma::Constant(0.3);
    let k = bumps();
    let m = medium(&sig, &k);
    let q = SingleQuad::default();
    for c in [ParallelCoord::new(0.0, 0.4), ParallelCoord::new(-0.35, 2.5)] {
        for omega in [0.0, 16.0, 128.0] {
            let got = single_scattering(c, omega, &m, &q).unwrap();
            let want = t1_cartesian(c, omega, &m, 700);
            assert!((got - want).norm() <= 1e-3 * want.norm(), "ω={omega}: {got} vs {want}");
        }
    }
}

#[test]
fn single_scattering_reciprocity() {
    let sig = Sigma::Constant(0.2);
    let k = bumps();
    let m = medium(&sig, &k);
    let q = SingleQuad::default();
    for (s, th) in [(0.1, 0.3), (-0.4, 2.0), (0.55, 4.0)] {
        let a = single_scattering(ParallelCoord::new(s, th), 64.0, &m, &q).unwrap();
        let b = single_scattering(ParallelCoord::new(-s, th + PI), 64.0, &m, &q).unwrap();
        assert!((a - b).norm() <= 1e-6 * a.norm().max(1e-12), "{a} vs {b}");
    }
}

#[test]
fn leading_term_examples() {
    let z = Sigma::zero();
    let empty = Phantom::default();
    assert_eq!(leading_single(ParallelCoord::new(0.0, 0.0), 10.0, &medium(&z, &empty), 0.005).unwrap(), Complex64::default());
    let (a, c0) = (0.5, 0.3);
    let k = Phantom::Disks { disks: vec![Disk { center: [0.0, 0.0], radius: a, value: c0 }] };
    let m = medium(&z, &k);
    let chord = chord_rho_k(ParallelCoord::new(0.0, 0.7), &m, 0.005);
    assert!((chord - 2.0 * c0 * (a / 1.0_f64).asin()).abs() < 1e-12);
    let c = ParallelCoord::new(0.2, 0.7);
    let t100 = leading_single(c, 100.0, &m, 0.005).unwrap();
    let t400 = leading_single(c, 400.0, &m, 0.005).unwrap();
    assert!((t100.norm() / t400.norm() - 2.0).abs() < 1e-12);
    assert!(leading_single(c, 0.0, &m, 0.005).is_err());
    // explicit closed form at s = 0, σ = 0, isotropic φ
    let t = leading_single(ParallelCoord::new(0.0, 0.0), 9.0, &m, 0.005).unwrap();
    let want = Complex64::new(2.0 * PI / (2.0 * 9.0), 0.0).sqrt() * Complex64::from_polar(1.0, -PI / 4.0)
        * Complex64::from_polar(1.0, -18.0)
        * (1.0 / (2.0 * PI))
        * (2.0 * c0 * a.asin());
    assert!((t - want).norm() < 1e-12);
}

#[test]
fn single_remainder_decays() {
    let sig = Sigma::Constant(0.1);
    let k = bumps();
    let m = medium(&sig, &k);
    let q = SingleQuad::default();
    let coords = [ParallelCoord::new(0.05, 0.3), ParallelCoord::new(-0.2, 1.7), ParallelCoord::new(0.3, 4.4)];
    let err = |w: f64| {
        coords
            .iter()
            .map(|&c| (single_scattering(c, w, &m, &q).unwrap() - leading_single(c, w, &m, 0.002).unwrap()).norm())
            .fold(0.0, f64::max)
    };
    let (e1, e2) = (err(64.0), err(256.0));
    // O(ω^{-1}) remainder: a factor 4 in ω gives about a factor 4 in error
    assert!(e2 < e1 / 2.5, "{e1} {e2}");
}

#[test]
fn multiple_scattering_zero_and_determinism() {
    let z = Sigma::zero();
    let empty = Phantom::default();
    let c = ParallelCoord::new(0.1, 0.2);
    let (v, se) = multiple_scattering_multi(c, &[10.0], 2, &medium(&z, &empty), 1000, 3).unwrap()[0];
    assert_eq!((v, se), (Complex64::default(), 0.0));
    let k = bumps();
    let m = medium(&z, &k);
    let a = multiple_scattering_multi(c, &[10.0, 20.0], 3, &m, 5000, 42).unwrap();
    let b = multiple_scattering_multi(c, &[10.0, 20.0], 3, &m, 5000, 42).unwrap();
    assert_eq!(a, b);
    assert!(multiple_scattering_multi(c, &[10.0], 1, &m, 10, 1).is_err());
}

/// T₂ by nested Gauss-Legendre: x₁ polar over the support disk, x₂ = x₁ + ρ(cos α, sin α);
/// the Jacobian ρ cancels 1/|x₂ − x₁|.
fn t2_oracle(c: ParallelCoord, omega: f64, m: &Medium, n: [usize; 4]) -> Complex64 {
    let bp = boundary_points(c, &m.domain).unwrap();
    let r = m.domain.r;
    let sup = m.k.support();
    let (nu0, nuc) = (bp.x0 * (1.0 / r), bp.xc * (1.0 / r));
    let g = |k: usize| GaussLegendre::new(k);
    let (g_r, g_a, g_p, g_b) = (g(n[0]), g(n[1]), g(n[2]), g(n[3]));
    let mut acc = Complex64::default();
    let rr = sup.radius;
    g_r.nodes.iter().zip(&g_r.weights).for_each(|(&u, &wu)| {
        let rad = 0.5 * rr * (u + 1.0);
        for (&v, &wv) in g_a.nodes.iter().zip(&g_a.weights) {
            let ang = PI * (v + 1.0);
            let x1 = sup.center + Vec2::from_angle(ang) * rad;
            let k1 = m.k.value(x1);
            if k1 == 0.0 {
                continue;
            }
            let w1 = wu * wv * 0.5 * rr * PI * rad;
            let l1 = x1.dist(bp.x0);
            let v1 = (x1 - bp.x0) * (1.0 / l1);
            for (&p, &wp) in g_p.nodes.iter().zip(&g_p.weights) {
                let rho = rr * (p + 1.0);
                for (&b, &wb) in g_b.nodes.iter().zip(&g_b.weights) {
                    let al = PI * (b + 1.0);
                    let x2 = x1 + Vec2::from_angle(al) * rho;
                    let k2 = m.k.value(x2);
                    if k2 == 0.0 {
                        continue;
                    }
                    let v2 = Vec2::from_angle(al);
                    let l3 = bp.xc.dist(x2);
                    let v3 = (bp.xc - x2) * (1.0 / l3);
                    let e = m.sigma.attenuation(bp.x0, x1) * m.sigma.attenuation(x1, x2) * m.sigma.attenuation(x2, bp.xc);
                    let amp = k1 * k2 * m.phase.eval(v1, v2) * m.phase.eval(v2, v3) * e * v1.dot(nu0).abs() * v3.dot(nuc).abs()
                        / (l1 * l3);
                    acc += Complex64::from_polar(w1 * wp * rr * wb * PI * amp, -omega * (l1 + rho + l3));
                }
            }
        }
    });
    acc
}

#[test]
fn t2_monte_carlo_matches_quadrature_oracle() {
    let sig = Sigma::Constant(0.2);
    let k = Phantom::GaussianBumps {
        bumps: vec![GaussBump { center: [0.05, -0.05], radius: 0.3, width: 0.3, amplitude: 0.3 }],
    };
    let m = medium(&sig, &k);
    let c = ParallelCoord::new(0.1, 0.9);
    let want = t2_oracle(c, 16.0, &m, [24, 32, 32, 48]);
    let (got, se) = multiple_scattering_multi(c, &[16.0], 2, &m, 200_000, 9).unwrap()[0];
    assert!(se > 0.0 && se < 0.05 * want.norm());
    assert!((got - want).norm() <= 3.0 * se * 2f64.sqrt(), "{got} vs {want} (se {se})");
}

#[test]
fn orders_decay_geometrically() {
    let z = Sigma::zero();
    let k = bumps();
    let m = medium(&z, &k);
    let q = series_factor(&m, 0.2 + 0.1);
    assert!(q < 1.0);
    let c = ParallelCoord::new(0.0, 0.5);
    let mags: Vec<f64> = (2..=4)
        .map(|o| multiple_scattering_multi(c, &[0.0], o, &m, 100_000, 5).unwrap()[0].0.norm())
        .collect();
    let t1 = single_scattering(c, 0.0, &m, &SingleQuad::default()).unwrap().norm();
    let mut prev = t1;
    for v in mags {
        assert!(v < prev && v <= q * prev, "{v} vs {prev}");
        prev = v;
    }
}

#[test]
fn synthesis_bookkeeping() {
    let d = dom();
    let lay = SinogramLayout::new(d, 8, 6);
    let z = Sigma::Constant(0.1);
    let budget = McBudget { n_paths: 200, max_order: 3, seed: 7 };
    let empty = Phantom::default();
    let out = synthesize_data(&lay, &[32.0], &medium(&z, &empty), Some(&budget), &SingleQuad::default()).unwrap();
    assert!(out[0].data.data.iter().all(|v| *v == Complex64::default()));
    let k = bumps();
    let out = synthesize_data(&lay, &[32.0, 64.0], &medium(&z, &k), Some(&budget), &SingleQuad::default()).unwrap();
    for s in &out {
        for i in 0..lay.len() {
            assert!((s.data.data[i] - s.single.data[i] - s.multiple.data[i]).norm() < 1e-12);
        }
        assert!(s.data.meta.tail_bound.unwrap().is_finite());
        assert_eq!(s.order_sup.len(), 2);
    }
    let again = synthesize_data(&lay, &[32.0, 64.0], &medium(&z, &k), Some(&budget), &SingleQuad::default()).unwrap();
    assert_eq!(out[1].data, again[1].data);
    assert!(McBudget { n_paths: 0, max_order: 2, seed: 0 }.validate().is_err());
}
