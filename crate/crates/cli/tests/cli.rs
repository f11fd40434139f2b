use std::path::{Path, PathBuf};
use std::process::Command;

use fdrt_cli::commands::{self, krho_field, verdict};
use fdrt_cli::config::{GridSpec, McSpec, SigmaSpec};
use fdrt_cli::{CliError, Context, ExperimentConfig, SinogramFile};
use fdrt_core::fields::{GaussBump, Lattice, Phantom};
use fdrt_core::forward::{leading_single, Medium, Sinogram};
use fdrt_core::Error as CoreError;
use num_complex::Complex64;
use proptest::prelude::*;
use tempfile::TempDir;

fn bump(amp: f64) -> Phantom {
    Phantom::GaussianBumps { bumps: vec![GaussBump { center: [0.05, 0.0], radius: 0.35, width: 0.3, amplitude: amp }] }
}

fn small(out: &Path) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        phantom: Some(bump(0.2)),
        omega_list: vec![16.0, 32.0, 64.0],
        b_list: vec![4.0, 8.0],
        grid: GridSpec { n_s: 32, n_theta: 32, n_x: 32 },
        mc: McSpec { n_paths: 8, max_order: 2 },
        seed: 1,
        output_dir: Some(out.to_path_buf()),
        ..Default::default()
    };
    c.inversion.max_iters = 2;
    c.sweep.contraction_trials = 0;
    c.verify.sample_count = 300;
    c.verify.pair_count = 10;
    c
}

fn write_cfg(dir: &Path, cfg: &ExperimentConfig) -> PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_fdrt"))
}

fn read_csv(p: &Path) -> Vec<Vec<String>> {
    let mut r = csv::Reader::from_path(p).unwrap();
    r.records().map(|rec| rec.unwrap().iter().map(String::from).collect()).collect()
}

// ------------------------------------------------------------ config

#[test]
fn defaults_match_documented_values() {
    let c = ExperimentConfig::default();
    assert_eq!((c.domain.r, c.domain.d), (1.0, 0.2));
    assert_eq!((c.grid.n_s, c.grid.n_theta, c.grid.n_x), (256, 256, 512));
    assert_eq!(c.omega_list, vec![64.0, 128.0, 256.0, 512.0]);
    assert_eq!(c.b_list, vec![4.0, 8.0, 16.0]);
    assert!(c.validate().is_ok());
    // an empty document is the default config
    let parsed: ExperimentConfig = serde_json::from_str("{}").unwrap();
    assert_eq!(parsed, c);
}

#[test]
fn config_rejections() {
    let ok = ExperimentConfig::default();
    let bad = [
        ExperimentConfig { omega_list: vec![128.0, 64.0], ..ok.clone() },
        ExperimentConfig { omega_list: vec![], ..ok.clone() },
        ExperimentConfig { grid: GridSpec { n_s: 100, ..ok.grid.clone() }, ..ok.clone() },
        ExperimentConfig { grid: GridSpec { n_x: 2048, ..ok.grid.clone() }, ..ok.clone() },
        ExperimentConfig { sigma: SigmaSpec::Constant { value: -1.0 }, ..ok.clone() },
        ExperimentConfig {
            phantom: Some(Phantom::GaussianBumps {
                bumps: vec![GaussBump { center: [0.5, 0.0], radius: 0.3, width: 1.0, amplitude: 0.1 }],
            }),
            ..ok.clone()
        },
        ExperimentConfig { b_list: vec![4.0], ..ok.clone() },
    ];
    for c in bad {
        assert!(matches!(c.validate(), Err(CliError::Config(_))), "{c:?}");
    }
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"omega": 3}"#).is_err());
}

#[test]
fn hash_tracks_content_and_seed() {
    let a = Context::from_config(small(Path::new("a"))).unwrap();
    let b = Context::from_config(small(Path::new("b"))).unwrap();
    assert_eq!(a.hash, b.hash);
    assert_eq!(a.hash.len(), 64);
    let c = Context::from_config(ExperimentConfig { seed: 2, ..small(Path::new("a")) }).unwrap();
    assert_ne!(a.hash, c.hash);
}

// ---------------------------------------------------------- file format

proptest! {
    #[test]
    fn sinogram_file_round_trip(
        n_s in 1u32..6, n_t in 1u32..6,
        r in 0.5f64..3.0, frac in 0.01f64..0.24, omega in 0.0f64..1e4,
        bits in proptest::collection::vec(any::<u64>(), 72),
        label in "[a-z]{0,12}",
    ) {
        let n = (n_s * n_t) as usize;
        let data = (0..n).map(|i| Complex64::new(f64::from_bits(bits[2 * i]), f64::from_bits(bits[2 * i + 1]))).collect();
        let f = SinogramFile { n_s, n_theta: n_t, r, d: frac * r, omega, data, trailer: serde_json::json!({ "label": label }) };
        let bytes = f.to_bytes();
        let g = SinogramFile::from_bytes(&bytes, "mem").unwrap();
        prop_assert_eq!(g.to_bytes(), bytes);
        prop_assert_eq!(g.n_s, n_s);
        prop_assert_eq!(g.trailer, f.trailer);
        for (a, b) in f.data.iter().zip(&g.data) {
            prop_assert_eq!((a.re.to_bits(), a.im.to_bits()), (b.re.to_bits(), b.im.to_bits()));
        }
    }
}

#[test]
fn file_layout_is_s_major_little_endian() {
    let f = SinogramFile {
        n_s: 2,
        n_theta: 3,
        r: 1.0,
        d: 0.2,
        omega: 64.0,
        data: (0..6).map(|i| Complex64::new(i as f64, -(i as f64))).collect(),
        trailer: serde_json::json!({}),
    };
    let b = f.to_bytes();
    assert_eq!(&b[..4], b"HRTS");
    assert_eq!(u16::from_le_bytes([b[4], b[5]]), 1);
    assert_eq!(u32::from_le_bytes(b[6..10].try_into().unwrap()), 2);
    assert_eq!(u32::from_le_bytes(b[10..14].try_into().unwrap()), 3);
    assert_eq!(f64::from_le_bytes(b[30..38].try_into().unwrap()), 64.0);
    // sample (i=1, j=0) sits at flat index 3
    let off = 38 + 3 * 16;
    assert_eq!(f64::from_le_bytes(b[off..off + 8].try_into().unwrap()), 3.0);
    let mut bad = b.clone();
    bad[0] = b'X';
    assert!(matches!(SinogramFile::from_bytes(&bad, "x"), Err(CliError::Format { .. })));
    assert!(matches!(SinogramFile::from_bytes(&b[..b.len() - 1], "x"), Err(CliError::Format { .. })));
}

// ---------------------------------------------------------------- synth

#[test]
fn synth_zero_phantom_gives_zero_files() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    let cfg = ExperimentConfig { phantom: Some(Phantom::default()), ..small(&out) };
    let ctx = Context::from_config(cfg).unwrap();
    commands::synth(&ctx).unwrap();
    for w in [16, 32, 64] {
        for label in ["data", "single", "leading", "multiple", "multiple_stderr"] {
            let f = SinogramFile::read(&out.join(format!("{label}_w{w}.hrts"))).unwrap();
            assert!(f.data.iter().all(|z| *z == Complex64::default()), "{label} at {w}");
            assert_eq!(f.trailer["meta"]["config_hash"], ctx.hash.as_str());
        }
    }
    let m: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("synth_manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config_hash"], ctx.hash.as_str());
    assert_eq!(m["files"].as_array().unwrap().len(), 18);
}

#[test]
fn synth_data_is_single_plus_multiple() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("run");
    commands::synth(&Context::from_config(small(&out)).unwrap()).unwrap();
    let rd = |n: &str| SinogramFile::read(&out.join(n)).unwrap();
    let (d, s, m) = (rd("data_w32.hrts"), rd("single_w32.hrts"), rd("multiple_w32.hrts"));
    assert!(s.data.iter().any(|z| z.norm() > 0.0));
    for i in 0..d.data.len() {
        assert!((d.data[i] - s.data[i] - m.data[i]).norm() < 1e-15);
    }
}

// --------------------------------------------------------------- invert

fn leading_file(cfg: &ExperimentConfig, omega: f64, path: &Path) {
    let d = cfg.domain().unwrap();
    let sigma = cfg.sigma_field();
    let k = cfg.phantom.clone().unwrap();
    let med = Medium { domain: d, sigma: &sigma, k: &k, phase: cfg.phase };
    let layout = cfg.layout().unwrap();
    let mut s = Sinogram::zeros(layout, omega, "leading");
    for (i, v) in s.data.iter_mut().enumerate() {
        *v = leading_single(layout.coord(i), omega, &med, 0.002).unwrap();
    }
    SinogramFile::from_sinogram(&s).write(path).unwrap();
}

#[test]
fn invert_leading_only_is_exact() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("inv");
    let cfg = ExperimentConfig {
        phantom: Some(bump(0.2)),
        omega_list: vec![256.0],
        b_list: vec![8.0],
        grid: GridSpec { n_s: 256, n_theta: 256, n_x: 128 },
        output_dir: Some(out.clone()),
        ..Default::default()
    };
    let input = tmp.path().join("leading.hrts");
    leading_file(&cfg, 256.0, &input);
    commands::invert(&Context::from_config(cfg).unwrap(), &input).unwrap();
    let rep: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("invert_report.json")).unwrap()).unwrap();
    let (err, scale) = (rep["error_sup"].as_f64().unwrap(), rep["target_sup"].as_f64().unwrap());
    assert!(err <= 1e-3 * scale, "{err} vs {scale}");
    let grid = SinogramFile::read(&out.join("q0.hrts")).unwrap();
    assert_eq!(grid.n_s, 128);
    assert_eq!(grid.trailer["kind"], "grid");
    assert_eq!(read_csv(&out.join("q0.csv")).len(), 128 * 128);
}

#[test]
fn invert_rejects_corrupt_file_without_output() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("never");
    let cfg = small(&out);
    let input = tmp.path().join("bad.hrts");
    std::fs::write(&input, b"NOPE and some bytes that are not a sinogram at all").unwrap();
    let cfg_path = write_cfg(tmp.path(), &cfg);
    let st = bin().args(["invert", "--config"]).arg(&cfg_path).arg(&input).output().unwrap();
    assert_eq!(st.status.code(), Some(2), "{}", String::from_utf8_lossy(&st.stderr));
    assert!(String::from_utf8_lossy(&st.stderr).contains("magic"));
    assert!(!out.exists());
}

#[test]
fn invert_rejects_frequency_and_bandwidth_mismatch() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("never");
    let cfg = small(&out);
    let input = tmp.path().join("w.hrts");
    SinogramFile::from_sinogram(&Sinogram::zeros(cfg.layout().unwrap(), 100.0, "z")).write(&input).unwrap();
    let r = commands::invert(&Context::from_config(cfg.clone()).unwrap(), &input);
    assert!(matches!(r, Err(CliError::Config(_))));
    let mut bad_b = cfg.clone();
    bad_b.inversion.b = 16.0;
    assert!(matches!(Context::from_config(bad_b), Err(CliError::Config(_))));
    // wrong layout
    let other = fdrt_core::SinogramLayout::new(cfg.domain().unwrap(), 16, 32);
    SinogramFile::from_sinogram(&Sinogram::zeros(other, 32.0, "z")).write(&input).unwrap();
    assert!(matches!(commands::invert(&Context::from_config(cfg).unwrap(), &input), Err(CliError::Config(_))));
    assert!(!out.exists());
}

// -------------------------------------------------------------- iterate

#[test]
fn iterate_zero_data_single_zero_row() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("it");
    let cfg = ExperimentConfig { phantom: Some(Phantom::default()), ..small(&out) };
    let input = tmp.path().join("z.hrts");
    SinogramFile::from_sinogram(&Sinogram::zeros(cfg.layout().unwrap(), 32.0, "z")).write(&input).unwrap();
    commands::iterate_cmd(&Context::from_config(cfg).unwrap(), &input).unwrap();
    let rows = read_csv(&out.join("iterations.csv"));
    assert_eq!(rows, vec![vec!["0".to_string(), "0.0".into(), "0.0".into()]]);
    assert!(out.join("q_0.hrts").exists() && !out.join("q_1.hrts").exists());
}

#[test]
fn iterate_with_no_iterations_emits_q0_only() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("it");
    let mut cfg = small(&out);
    cfg.inversion.max_iters = 0;
    let input = tmp.path().join("lead.hrts");
    leading_file(&cfg, 32.0, &input);
    commands::iterate_cmd(&Context::from_config(cfg).unwrap(), &input).unwrap();
    let rows = read_csv(&out.join("iterations.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], "0");
    assert!(rows[0][2].parse::<f64>().unwrap() > 0.0);
    assert!(out.join("q_0.hrts").exists() && !out.join("q_1.hrts").exists());
}

#[test]
fn iterate_divergence_exit_code() {
    // Negated data from a strong scatterer: the quadratic part of the
    // remainder pushes every iterate further out, so a ball just above ‖q₀‖ is left.
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("it");
    let mut cfg = small(&out);
    cfg.phantom = Some(bump(0.45));
    cfg.omega_list = vec![32.0];
    cfg.mc.n_paths = 64;
    let input = tmp.path().join("neg.hrts");
    let synth_out = tmp.path().join("syn");
    commands::synth(&Context::from_config(ExperimentConfig { output_dir: Some(synth_out.clone()), ..cfg.clone() }).unwrap())
        .unwrap();
    let mut f = SinogramFile::read(&synth_out.join("data_w32.hrts")).unwrap();
    f.data.iter_mut().for_each(|z| *z = -*z);
    f.write(&input).unwrap();

    let ctx = Context::from_config(cfg.clone()).unwrap();
    let sigma = cfg.sigma_field();
    let icfg = cfg.inversion_config(32.0, 8.0, &sigma).unwrap();
    let q0 = fdrt_core::inversion::apply_inverse(&f.to_sinogram("neg").unwrap(), &icfg, &sigma, cfg.phase).unwrap();
    let q0n = fdrt_core::inversion::sup_inner(&q0, &cfg.domain().unwrap());
    drop(ctx);
    cfg.inversion.k0 = Some(q0n * 1.0001);
    let cfg_path = write_cfg(tmp.path(), &cfg);
    let st = bin().args(["iterate", "--config"]).arg(&cfg_path).arg(&input).output().unwrap();
    assert_eq!(st.status.code(), Some(4), "{}", String::from_utf8_lossy(&st.stderr));

    // a ball smaller than ‖q₀‖ is a precondition failure instead
    cfg.inversion.k0 = Some(q0n * 0.5);
    let cfg_path = write_cfg(tmp.path(), &cfg);
    let st = bin().args(["iterate", "--config"]).arg(&cfg_path).arg(&input).output().unwrap();
    assert_eq!(st.status.code(), Some(3), "{}", String::from_utf8_lossy(&st.stderr));
}

#[test]
fn exit_code_mapping() {
    assert_eq!(CliError::Config("x".into()).exit_code(), 2);
    assert_eq!(CliError::Core(CoreError::Domain("x".into())).exit_code(), 2);
    assert_eq!(CliError::Core(CoreError::Precondition("x".into())).exit_code(), 3);
    assert_eq!(CliError::Core(CoreError::Resolution("x".into())).exit_code(), 3);
    assert_eq!(CliError::Core(CoreError::Divergence("x".into())).exit_code(), 4);
}

// ---------------------------------------------------------------- sweep

#[test]
fn sweep_needs_three_frequencies() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sw");
    let cfg = ExperimentConfig { omega_list: vec![16.0, 32.0], ..small(&out) };
    let cfg_path = write_cfg(tmp.path(), &cfg);
    let st = bin().args(["sweep", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(st.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn sweep_tables() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("sw");
    let mut cfg = small(&out);
    cfg.sweep.contraction_trials = 1;
    commands::sweep(&Context::from_config(cfg).unwrap()).unwrap();
    let rows = read_csv(&out.join("sweep.csv"));
    assert_eq!(rows.len(), 6);
    let head = csv::Reader::from_path(out.join("sweep.csv")).unwrap().headers().unwrap().clone();
    assert_eq!(
        head.iter().collect::<Vec<_>>(),
        ["omega", "b", "direct_error", "iterated_error", "c1", "mc_stderr", "iterate_status"]
    );
    for r in &rows {
        assert!(r[2].parse::<f64>().unwrap() > 0.0);
        assert!(r[4].parse::<f64>().unwrap() >= 0.0);
    }
    let fits = read_csv(&out.join("sweep_fits.csv"));
    assert_eq!(fits.len(), 2);
    assert_eq!(fits[0][3], "-0.5");
    assert_eq!(verdict(-0.45), "consistent");
    assert_eq!(verdict(-0.1), "shallower");
    assert_eq!(verdict(-0.9), "steeper");
}

#[test]
fn sweep_leading_model_error_is_flat() {
    // leading-order data alone: no remainder, so only the ω-independent floor is left
    let d = fdrt_core::DiskDomain::new(1.0, 0.2).unwrap();
    let grid = Lattice::new(64, 1.0);
    let k = bump(0.2);
    let layout = fdrt_core::SinogramLayout::new(d, 128, 128);
    let sigma = fdrt_core::fields::Sigma::Constant(0.2);
    let phase = fdrt_core::fields::PhaseFunction::Isotropic;
    let med = Medium { domain: d, sigma: &sigma, k: &k, phase };
    let target = fdrt_core::xray::lowpass_reference(&krho_field(&k, grid, &d), &fdrt_core::xray::FilterSpec::new(8.0));
    let omegas = [64.0, 128.0, 256.0];
    let errs: Vec<f64> = omegas
        .iter()
        .map(|&w| {
            let mut s = Sinogram::zeros(layout, w, "leading");
            for (i, v) in s.data.iter_mut().enumerate() {
                *v = leading_single(layout.coord(i), w, &med, 0.002).unwrap();
            }
            let cfg = fdrt_core::inversion::InversionConfig::new(w, 8.0, layout, grid, &sigma, phase);
            let q = fdrt_core::inversion::apply_inverse(&s, &cfg, &sigma, phase).unwrap();
            fdrt_core::inversion::sup_inner(&q.zip(&target, |a, b| a - b), &d)
        })
        .collect();
    let slope = fdrt_core::quad::loglog_slope(&omegas, &errs);
    assert!(slope.abs() < 0.05, "{slope} {errs:?}");
}

// --------------------------------------------------------------- verify

#[test]
fn verify_default_small_passes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    let ctx = Context::from_config(small(&out)).unwrap();
    assert!(commands::verify_cmd(&ctx).unwrap());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["passed"], true);
    assert_eq!(v["report"]["phi1"]["violations"], 0);
    assert_eq!(v["report"]["phi2"]["samples"], 300);
}

#[test]
fn verify_zero_samples_is_empty_success() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    let mut cfg = small(&out);
    cfg.verify.sample_count = 0;
    let cfg_path = write_cfg(tmp.path(), &cfg);
    let st = bin().args(["verify", "--config"]).arg(&cfg_path).output().unwrap();
    assert_eq!(st.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verify_report.json")).unwrap()).unwrap();
    assert!(v["report"]["phi1"].is_null() && v["report"]["failures"].as_array().unwrap().is_empty());
}

#[test]
fn verify_thin_collar_still_holds() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("v");
    let mut cfg = small(&out);
    cfg.domain.d = 0.01;
    cfg.phantom = None;
    cfg.verify.sample_count = 2000;
    let ctx = Context::from_config(cfg).unwrap();
    assert!(commands::verify_cmd(&ctx).unwrap());
    let thin: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verify_report.json")).unwrap()).unwrap();
    let wide_out = tmp.path().join("w");
    commands::verify_cmd(&Context::from_config(ExperimentConfig { verify: ctx.cfg.verify.clone(), ..small(&wide_out) }).unwrap())
        .unwrap();
    let wide: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(wide_out.join("verify_report.json")).unwrap()).unwrap();
    // the lower curvature bound scales with D, so the guaranteed margin shrinks
    let lo = |v: &serde_json::Value| -v["report"]["phi2"]["upper"].as_f64().unwrap();
    assert!(lo(&thin) < lo(&wide) / 10.0);
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let mut cfg = small(&tmp.path().join("v"));
    cfg.verify.sample_count = 10;
    let cfg_path = write_cfg(tmp.path(), &cfg);
    let out = tmp.path().join("o");
    let st = bin()
        .args(["verify", "--threads", "1", "--seed", "99", "--config"])
        .arg(&cfg_path)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert_eq!(st.status.code(), Some(0), "{}", String::from_utf8_lossy(&st.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(out.join("verify_report.json")).unwrap()).unwrap();
    assert_eq!(v["report"]["seed"], 99);
}

#[test]
fn pure_bump_config_round_trips() {
    let mut cfg = ExperimentConfig { phantom: Some(bump(0.2)), ..Default::default() };
    if let Some(Phantom::GaussianBumps { bumps }) = &mut cfg.phantom {
        bumps[0].width = f64::INFINITY;
    }
    let text = serde_json::to_string(&cfg).unwrap();
    assert!(!text.contains("\"width\""));
    let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
    assert_eq!(back, cfg);
}
