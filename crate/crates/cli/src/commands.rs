//! The five subcommands. Every command validates all inputs before it
//! creates the output directory, so a rejected run leaves nothing behind.

use std::path::{Path, PathBuf};

use fdrt_core::fields::{rho, Field2, Lattice, Phantom, ScalarField};
use fdrt_core::forward::{stream_seed, synthesize_data, Medium, Sinogram, SinogramMeta, SingleQuad};
use fdrt_core::inversion::{apply_inverse, apply_inverse_stderr, contraction_sweep, iterate, sup_inner};
use fdrt_core::quad::{loglog_slope, nnls2};
use fdrt_core::xray::lowpass_reference;
use fdrt_core::{DiskDomain, Error as CoreError};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::{CliError, CliResult};
use crate::sinofile::SinogramFile;
use crate::verify;

/// Resolved configuration plus where its outputs go.
#[derive(Debug, Clone)]
pub struct Context {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub out: PathBuf,
}

impl Context {
    /// Load (or default) the config, apply CLI overrides and validate.
    pub fn new(config: Option<&Path>, out: Option<&Path>, seed: Option<u64>) -> CliResult<Self> {
        let mut cfg = match config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = seed {
            cfg.seed = s;
        }
        if let Some(o) = out {
            cfg.output_dir = Some(o.to_path_buf());
        }
        Self::from_config(cfg)
    }

    pub fn from_config(cfg: ExperimentConfig) -> CliResult<Self> {
        cfg.validate()?;
        let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
        // the output location does not change any result, so it is not hashed
        let hash = ExperimentConfig { output_dir: None, ..cfg.clone() }.hash();
        Ok(Context { cfg, hash, out })
    }

    fn create_out(&self) -> CliResult<()> {
        std::fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn write_text(&self, name: &str, text: &str) -> CliResult<()> {
        let p = self.path(name);
        std::fs::write(&p, text).map_err(|e| CliError::io(&p, e))
    }

    fn write_json(&self, name: &str, v: &impl Serialize) -> CliResult<()> {
        let mut s = serde_json::to_string_pretty(v).expect("report serializes");
        s.push('\n');
        self.write_text(name, &s)
    }

    fn write_csv<R: Serialize>(&self, name: &str, rows: &[R]) -> CliResult<()> {
        let p = self.path(name);
        let mut w = csv::Writer::from_path(&p).map_err(|e| csv_err(&p, e))?;
        for r in rows {
            w.serialize(r).map_err(|e| csv_err(&p, e))?;
        }
        w.flush().map_err(|e| CliError::io(&p, e))
    }

    fn manifest(&self, command: &str, files: &[String], extra: Value) -> CliResult<()> {
        self.write_json(
            &format!("{command}_manifest.json"),
            &json!({
                "command": command,
                "config_hash": self.hash,
                "config": self.cfg,
                "files": files,
                "details": extra,
            }),
        )
    }

    fn phantom(&self) -> CliResult<&Phantom> {
        self.cfg.phantom.as_ref().ok_or_else(|| CliError::Config("this command needs a phantom".into()))
    }
}

fn csv_err(p: &Path, e: csv::Error) -> CliError {
    CliError::io(p, std::io::Error::other(e.to_string()))
}

fn wname(prefix: &str, omega: f64) -> String {
    format!("{prefix}_w{omega}.hrts")
}

/// kρ sampled on the reconstruction lattice.
pub fn krho_field(k: &Phantom, grid: Lattice, d: &DiskDomain) -> ScalarField {
    ScalarField::from_fn(grid, |p| if p.norm() < d.r { k.value(p) * rho(p, d.r) } else { 0.0 })
}

/// Additive complex Gaussian noise with per-component std `level`·sup|g|;
/// the stream depends only on (seed, frequency index).
pub fn add_noise(s: &mut Sinogram, level: f64, seed: u64, omega_index: usize) {
    if level == 0.0 {
        return;
    }
    let scale = level * s.sup_norm();
    let mut rng = ChaCha8Rng::seed_from_u64(stream_seed(seed, omega_index as u64, u64::MAX));
    for v in s.data.iter_mut() {
        let (a, b): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        *v += Complex64::new(a, b) * scale;
    }
}

// ---------------------------------------------------------------- synth

pub fn synth(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let k = ctx.phantom()?;
    let d = cfg.domain()?;
    let layout = cfg.layout()?;
    let sigma = cfg.sigma_field();
    let medium = Medium { domain: d, sigma: &sigma, k, phase: cfg.phase };
    let budget = cfg.budget();
    let quad = SingleQuad::default();
    let syn = synthesize_data(&layout, &cfg.omega_list, &medium, budget.as_ref(), &quad)?;
    ctx.create_out()?;
    let mut files = Vec::new();
    let mut per_omega = Vec::new();
    for (i, mut s) in syn.into_iter().enumerate() {
        let w = s.data.omega;
        add_noise(&mut s.data, cfg.noise_level, cfg.seed, i);
        let mut stderr = Sinogram::zeros(layout, w, "multiple_stderr");
        stderr.data = s.multiple_stderr.iter().map(|v| Complex64::new(*v, 0.0)).collect();
        stderr.meta = SinogramMeta { label: "multiple_stderr".into(), ..s.multiple.meta.clone() };
        for sino in [&mut s.data, &mut s.ballistic, &mut s.single, &mut s.leading, &mut s.multiple, &mut stderr] {
            sino.meta.config_hash = Some(ctx.hash.clone());
            let name = wname(&sino.meta.label, w);
            SinogramFile::from_sinogram(sino).write(&ctx.path(&name))?;
            files.push(name);
        }
        per_omega.push(json!({
            "omega": w,
            "tail_bound": s.data.meta.tail_bound,
            "order_sup": s.order_sup,
            "sup_data": s.data.sup_norm(),
            "sup_multiple_stderr": s.multiple_stderr.iter().fold(0.0f64, |m, v| m.max(*v)),
        }));
    }
    ctx.manifest(
        "synth",
        &files,
        json!({
            "budget": budget,
            "seed": cfg.seed,
            "noise_level": cfg.noise_level,
            "quad": quad,
            "frequencies": per_omega,
        }),
    )
}

// --------------------------------------------------------------- invert

/// Read a sinogram and check it against the configuration.
fn load_checked(ctx: &Context, path: &Path) -> CliResult<Sinogram> {
    let file = SinogramFile::read(path)?;
    let cfg = &ctx.cfg;
    let sino = file.to_sinogram(&path.display().to_string())?;
    if file.r != cfg.domain.r || file.d != cfg.domain.d {
        return Err(CliError::Config(format!(
            "sinogram domain (r={}, D={}) differs from config (r={}, D={})",
            file.r, file.d, cfg.domain.r, cfg.domain.d
        )));
    }
    if sino.layout.n_s != cfg.grid.n_s || sino.layout.n_theta != cfg.grid.n_theta {
        return Err(CliError::Config(format!(
            "sinogram is {}x{} but config expects {}x{}",
            sino.layout.n_s, sino.layout.n_theta, cfg.grid.n_s, cfg.grid.n_theta
        )));
    }
    if !cfg.omega_list.contains(&sino.omega) {
        return Err(CliError::Config(format!("sinogram frequency {} is not in omega_list", sino.omega)));
    }
    Ok(sino)
}

#[derive(Serialize)]
struct GridRow {
    x: f64,
    y: f64,
    value: f64,
}

fn grid_rows(f: &ScalarField) -> Vec<GridRow> {
    (0..f.lattice.len())
        .map(|i| {
            let p = f.lattice.point(i);
            GridRow { x: p.x, y: p.y, value: f.values[i] }
        })
        .collect()
}

fn grid_file(ctx: &Context, f: &ScalarField, omega: f64, b: f64, label: &str) -> CliResult<SinogramFile> {
    let d = ctx.cfg.domain()?;
    Ok(SinogramFile::from_grid(
        f,
        &d,
        omega,
        json!({ "kind": "grid", "label": label, "b": b, "config_hash": ctx.hash }),
    ))
}

/// [kρ]_b on the reconstruction lattice when the phantom is known.
fn target(ctx: &Context, b: f64) -> CliResult<Option<ScalarField>> {
    let Some(k) = &ctx.cfg.phantom else { return Ok(None) };
    let d = ctx.cfg.domain()?;
    let krho = krho_field(k, ctx.cfg.lattice(), &d);
    Ok(Some(lowpass_reference(&krho, &fdrt_core::xray::FilterSpec::new(b))))
}

pub fn invert(ctx: &Context, input: &Path) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let sino = load_checked(ctx, input)?;
    let sigma = cfg.sigma_field();
    let b = cfg.inversion.b;
    let icfg = cfg.inversion_config(sino.omega, b, &sigma)?;
    let q0 = apply_inverse(&sino, &icfg, &sigma, cfg.phase)?;
    let d = cfg.domain()?;
    let truth = target(ctx, b)?;
    let error = truth.as_ref().map(|t| sup_inner(&q0.zip(t, |a, b| a - b), &d));
    let target_sup = truth.as_ref().map(|t| sup_inner(t, &d));

    ctx.create_out()?;
    grid_file(ctx, &q0, sino.omega, b, "q0")?.write(&ctx.path("q0.hrts"))?;
    ctx.write_csv("q0.csv", &grid_rows(&q0))?;
    let report = json!({
        "input": input.display().to_string(),
        "omega": sino.omega,
        "b": b,
        "sup_q0": sup_inner(&q0, &d),
        "error_sup": error,
        "target_sup": target_sup,
        "config_hash": ctx.hash,
    });
    ctx.write_json("invert_report.json", &report)?;
    ctx.manifest("invert", &["q0.hrts".into(), "q0.csv".into(), "invert_report.json".into()], report)
}

// -------------------------------------------------------------- iterate

#[derive(Serialize)]
struct IterRow {
    n: usize,
    step: f64,
    error: Option<f64>,
}

pub fn iterate_cmd(ctx: &Context, input: &Path) -> CliResult<()> {
    let cfg = &ctx.cfg;
    let sino = load_checked(ctx, input)?;
    let sigma = cfg.sigma_field();
    let b = cfg.inversion.b;
    let icfg = cfg.inversion_config(sino.omega, b, &sigma)?;
    let truth = target(ctx, b)?;
    let st = iterate(&sino, &icfg, &sigma, cfg.phase, truth.as_ref())?;

    ctx.create_out()?;
    let mut files = Vec::new();
    for (n, q) in st.iterates.iter().enumerate() {
        let name = format!("q_{n}.hrts");
        grid_file(ctx, q, sino.omega, b, &format!("q{n}"))?.write(&ctx.path(&name))?;
        files.push(name);
    }
    ctx.write_csv("q_final.csv", &grid_rows(&st.q))?;
    let rows: Vec<IterRow> = st.history.iter().map(|h| IterRow { n: h.n, step: h.step, error: h.error }).collect();
    ctx.write_csv("iterations.csv", &rows)?;
    files.extend(["q_final.csv".into(), "iterations.csv".into()]);
    ctx.manifest(
        "iterate",
        &files,
        json!({
            "input": input.display().to_string(),
            "omega": sino.omega,
            "b": b,
            "k0": icfg.k0,
            "converged": st.converged,
            "observed_contraction": st.observed_contraction(),
            "history": st.history,
        }),
    )
}

// ---------------------------------------------------------------- sweep

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub omega: f64,
    pub b: f64,
    pub direct_error: f64,
    pub iterated_error: Option<f64>,
    pub c1: Option<f64>,
    pub mc_stderr: f64,
    pub iterate_status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepFit {
    pub b: f64,
    pub direct_slope: f64,
    pub iterated_slope: Option<f64>,
    pub predicted_slope: f64,
    pub verdict: String,
}

/// Slope of the direct error against the −1/2 prediction, with ±0.1 slack.
pub fn verdict(slope: f64) -> &'static str {
    if !slope.is_finite() {
        "undetermined"
    } else if slope > -0.4 {
        "shallower"
    } else if slope < -0.6 {
        "steeper"
    } else {
        "consistent"
    }
}

pub fn sweep(ctx: &Context) -> CliResult<()> {
    let cfg = &ctx.cfg;
    if cfg.omega_list.len() < 3 {
        return Err(CliError::Config(format!("sweep needs at least 3 frequencies, got {}", cfg.omega_list.len())));
    }
    let k = ctx.phantom()?;
    let d = cfg.domain()?;
    let layout = cfg.layout()?;
    let sigma = cfg.sigma_field();
    let medium = Medium { domain: d, sigma: &sigma, k, phase: cfg.phase };
    let syn = synthesize_data(&layout, &cfg.omega_list, &medium, cfg.budget().as_ref(), &SingleQuad::default())?;
    let krho = krho_field(k, cfg.lattice(), &d);

    let mut rows = Vec::new();
    for (i, mut s) in syn.into_iter().enumerate() {
        add_noise(&mut s.data, cfg.noise_level, cfg.seed, i);
        for &b in &cfg.b_list {
            let icfg = cfg.inversion_config(s.data.omega, b, &sigma)?;
            let t = lowpass_reference(&krho, &icfg.filter);
            let q0 = apply_inverse(&s.data, &icfg, &sigma, cfg.phase)?;
            let se = apply_inverse_stderr(&s.multiple_stderr, &icfg, &sigma, cfg.phase)?;
            let (iterated_error, status) = if cfg.sweep.iterate {
                match iterate(&s.data, &icfg, &sigma, cfg.phase, Some(&t)) {
                    Ok(st) => (
                        st.history.last().and_then(|h| h.error),
                        if st.converged { "converged" } else { "max_iters" }.to_string(),
                    ),
                    Err(CoreError::Precondition(_)) => (None, "precondition".into()),
                    Err(CoreError::Divergence(_)) => (None, "diverged".into()),
                    Err(e) => return Err(e.into()),
                }
            } else {
                (None, "skipped".into())
            };
            rows.push(SweepRow {
                omega: s.data.omega,
                b,
                direct_error: sup_inner(&q0.zip(&t, |a, b| a - b), &d),
                iterated_error,
                c1: None,
                mc_stderr: sup_inner(&se, &d),
                iterate_status: status,
            });
        }
    }

    let mut c1_fit = Value::Null;
    if cfg.sweep.contraction_trials > 0 {
        let base = cfg.inversion_config(cfg.omega_list[0], cfg.b_list[0], &sigma)?;
        let amp = cfg.sweep.contraction_amp * base.k0;
        let rep = contraction_sweep(&cfg.omega_list, &cfg.b_list, &base, &sigma, cfg.phase, amp, cfg.sweep.contraction_trials, cfg.seed)?;
        let nb = cfg.b_list.len();
        for (idx, row) in rows.iter_mut().enumerate() {
            row.c1 = Some(rep.c1[idx / nb][idx % nb]);
        }
        // c₁ ≈ A(b²+b⁵)/ω + B b³ω^{−1/2}log(ω/b), A, B ≥ 0
        let (mut fa, mut fb, mut y) = (vec![], vec![], vec![]);
        for r in &rows {
            fa.push((r.b.powi(2) + r.b.powi(5)) / r.omega);
            fb.push(r.b.powi(3) * r.omega.powf(-0.5) * (r.omega / r.b).ln().max(0.0));
            y.push(r.c1.unwrap());
        }
        let (a, bcoef, resid) = nnls2(&fa, &fb, &y);
        c1_fit = json!({
            "coef_inverse_omega": a,
            "coef_inverse_sqrt_omega_log": bcoef,
            "residual": resid,
            "decreasing_in_omega": rep.decreasing_in_omega,
            "increasing_in_b": rep.increasing_in_b,
            "stderr": rep.stderr,
        });
    }

    let omegas = &cfg.omega_list;
    let fits: Vec<SweepFit> = cfg
        .b_list
        .iter()
        .map(|&b| {
            let sel: Vec<&SweepRow> = rows.iter().filter(|r| r.b == b).collect();
            let direct: Vec<f64> = sel.iter().map(|r| r.direct_error).collect();
            let iterated: Option<Vec<f64>> = sel.iter().map(|r| r.iterated_error).collect();
            let slope = loglog_slope(omegas, &direct);
            SweepFit {
                b,
                direct_slope: slope,
                iterated_slope: iterated.map(|v| loglog_slope(omegas, &v)),
                predicted_slope: -0.5,
                verdict: verdict(slope).into(),
            }
        })
        .collect();

    ctx.create_out()?;
    ctx.write_csv("sweep.csv", &rows)?;
    ctx.write_csv("sweep_fits.csv", &fits)?;
    ctx.manifest("sweep", &["sweep.csv".into(), "sweep_fits.csv".into()], json!({ "c1_fit": c1_fit, "fits": fits }))
}

// --------------------------------------------------------------- verify

/// Returns whether every check passed; the report is written either way.
pub fn verify_cmd(ctx: &Context) -> CliResult<bool> {
    let d = ctx.cfg.domain()?;
    let rep = verify::run(d, &ctx.cfg.verify, ctx.cfg.seed);
    ctx.create_out()?;
    ctx.write_json("verify_report.json", &json!({ "config_hash": ctx.hash, "report": rep }))?;
    ctx.manifest("verify", &["verify_report.json".into()], json!({ "passed": rep.passed, "failures": rep.failures }))?;
    Ok(rep.passed)
}
