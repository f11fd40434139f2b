//! Experiment configuration: one JSON document, every field defaulted.

use std::path::{Path, PathBuf};

use fdrt_core::fields::{GaussBump, Lattice, Phantom, PhaseFunction, ScalarField, Sigma};
use fdrt_core::forward::McBudget;
use fdrt_core::inversion::{estimate_l_norm, InversionConfig};
use fdrt_core::{DiskDomain, SinogramLayout, Vec2};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub r: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

impl Default for DomainSpec {
    fn default() -> Self {
        DomainSpec { r: 1.0, d: 0.2 }
    }
}

/// Attenuation descriptor. `gaussian` is sampled on the reconstruction grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SigmaSpec {
    Constant { value: f64 },
    Gaussian { background: f64, amplitude: f64, center: [f64; 2], width: f64 },
}

impl Default for SigmaSpec {
    fn default() -> Self {
        SigmaSpec::Constant { value: 0.2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub n_s: usize,
    pub n_theta: usize,
    pub n_x: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { n_s: 256, n_theta: 256, n_x: 512 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct McSpec {
    pub n_paths: usize,
    /// Highest scattering order kept; orders 2..=max_order are sampled.
    pub max_order: usize,
}

impl Default for McSpec {
    fn default() -> Self {
        McSpec { n_paths: 256, max_order: 4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InversionSpec {
    /// Bandwidth used by `invert` and `iterate`; must be one of `b_list`.
    pub b: f64,
    pub max_iters: usize,
    pub stop_tol: f64,
    /// Contraction-ball radius; defaults to 0.8/(‖φ‖_∞ L̄).
    pub k0: Option<f64>,
    /// Paths per pixel for the residual's forward solves; defaults to `mc.n_paths`.
    pub residual_paths: Option<usize>,
}

impl Default for InversionSpec {
    fn default() -> Self {
        InversionSpec { b: 8.0, max_iters: 10, stop_tol: 1e-4, k0: None, residual_paths: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub iterate: bool,
    /// Random pairs per (ω, b) for the measured c₁; 0 skips the contraction fit.
    pub contraction_trials: usize,
    /// sup of the random fields used for c₁, as a fraction of K₀.
    pub contraction_amp: f64,
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { iterate: true, contraction_trials: 2, contraction_amp: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySpec {
    /// Random samples per bound check; 0 yields an empty report.
    pub sample_count: usize,
    /// Pairs for the S₂″ closed-form comparison.
    pub pair_count: usize,
    pub rate_omegas: Vec<f64>,
    pub margin_separations: Vec<f64>,
}

impl Default for VerifySpec {
    fn default() -> Self {
        VerifySpec {
            sample_count: 10_000,
            pair_count: 100,
            rate_omegas: vec![64.0, 256.0, 1024.0, 4096.0],
            margin_separations: vec![0.05, 0.1, 0.2, 0.4, 0.8],
        }
    }
}

fn default_phantom() -> Option<Phantom> {
    Some(Phantom::GaussianBumps {
        bumps: vec![GaussBump { center: [0.0, 0.0], radius: 0.45, width: 0.25, amplitude: 0.4 }],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    /// Ground-truth scattering coefficient; `null` when only data is at hand.
    pub phantom: Option<Phantom>,
    pub sigma: SigmaSpec,
    pub phase: PhaseFunction,
    pub omega_list: Vec<f64>,
    pub b_list: Vec<f64>,
    pub grid: GridSpec,
    pub mc: McSpec,
    pub seed: u64,
    /// Std. dev. of additive complex Gaussian noise relative to sup |𝔇|; 0 is off.
    pub noise_level: f64,
    pub output_dir: Option<PathBuf>,
    pub inversion: InversionSpec,
    pub sweep: SweepSpec,
    pub verify: VerifySpec,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            domain: DomainSpec::default(),
            phantom: default_phantom(),
            sigma: SigmaSpec::default(),
            phase: PhaseFunction::Isotropic,
            omega_list: vec![64.0, 128.0, 256.0, 512.0],
            b_list: vec![4.0, 8.0, 16.0],
            grid: GridSpec::default(),
            mc: McSpec::default(),
            seed: 0,
            noise_level: 0.0,
            output_dir: None,
            inversion: InversionSpec::default(),
            sweep: SweepSpec::default(),
            verify: VerifySpec::default(),
        }
    }
}

fn cfg_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let cfg: ExperimentConfig =
            serde_json::from_str(&text).map_err(|e| cfg_err(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> CliResult<()> {
        let d = self.domain()?;
        if let Some(p) = &self.phantom {
            p.validate(&d).map_err(|e| cfg_err(e.to_string()))?;
        }
        self.phase.validate().map_err(|e| cfg_err(e.to_string()))?;
        match self.sigma {
            SigmaSpec::Constant { value } if !(value >= 0.0 && value.is_finite()) => {
                return Err(cfg_err(format!("sigma must be finite and nonnegative, got {value}")))
            }
            SigmaSpec::Gaussian { background, amplitude, width, .. }
                if !(background >= 0.0 && background + amplitude.min(0.0) >= 0.0 && width > 0.0) =>
            {
                return Err(cfg_err("gaussian sigma must stay nonnegative and have positive width"))
            }
            _ => {}
        }
        if self.omega_list.is_empty() || self.omega_list.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
            return Err(cfg_err("omega_list must be a nonempty list of positive frequencies"));
        }
        if self.omega_list.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(cfg_err("omega_list must be sorted strictly ascending"));
        }
        if self.b_list.is_empty() || self.b_list.iter().any(|b| !(*b > 0.0 && b.is_finite())) {
            return Err(cfg_err("b_list must be a nonempty list of positive bandwidths"));
        }
        for (name, n) in [("n_s", self.grid.n_s), ("n_theta", self.grid.n_theta), ("n_x", self.grid.n_x)] {
            if !n.is_power_of_two() || n > 1024 || n < 2 {
                return Err(cfg_err(format!("grid.{name} = {n} must be a power of two in [2, 1024]")));
            }
        }
        if self.mc.n_paths < 1 || self.mc.max_order < 1 {
            return Err(cfg_err("mc budget needs n_paths >= 1 and max_order >= 1"));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return Err(cfg_err("noise_level must be finite and nonnegative"));
        }
        if !self.b_list.contains(&self.inversion.b) {
            return Err(cfg_err(format!("inversion.b = {} is not in b_list", self.inversion.b)));
        }
        if !(self.inversion.stop_tol >= 0.0) {
            return Err(cfg_err("inversion.stop_tol must be nonnegative"));
        }
        if self.inversion.residual_paths == Some(0) {
            return Err(cfg_err("inversion.residual_paths must be positive"));
        }
        if !(self.sweep.contraction_amp > 0.0 && self.sweep.contraction_amp <= 1.0) {
            return Err(cfg_err("sweep.contraction_amp must lie in (0, 1]"));
        }
        if self.verify.rate_omegas.iter().any(|w| !(*w > 0.0)) {
            return Err(cfg_err("verify.rate_omegas must be positive"));
        }
        if self.verify.margin_separations.iter().any(|s| !(*s > 0.0 && *s < 2.0 * (d.r - 2.0 * d.d))) {
            return Err(cfg_err("verify.margin_separations must be positive and fit inside B_(r-2D)"));
        }
        Ok(())
    }

    pub fn domain(&self) -> CliResult<DiskDomain> {
        DiskDomain::new(self.domain.r, self.domain.d).map_err(|e| cfg_err(e.to_string()))
    }

    pub fn layout(&self) -> CliResult<SinogramLayout> {
        Ok(SinogramLayout::new(self.domain()?, self.grid.n_s, self.grid.n_theta))
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.grid.n_x, self.domain.r)
    }

    pub fn sigma_field(&self) -> Sigma {
        match self.sigma {
            SigmaSpec::Constant { value } => Sigma::Constant(value),
            SigmaSpec::Gaussian { background, amplitude, center, width } => {
                let c = Vec2::new(center[0], center[1]);
                Sigma::Field(ScalarField::from_fn(self.lattice(), |p| {
                    background + amplitude * (-(p - c).norm2() / (width * width)).exp()
                }))
            }
        }
    }

    /// MC budget for synthesis. A max_order of 1 means single scattering only.
    pub fn budget(&self) -> Option<McBudget> {
        (self.mc.max_order >= 2).then_some(McBudget { n_paths: self.mc.n_paths, max_order: self.mc.max_order, seed: self.seed })
    }

    pub fn inversion_config(&self, omega: f64, b: f64, sigma: &Sigma) -> CliResult<InversionConfig> {
        let mut cfg = InversionConfig::new(omega, b, self.layout()?, self.lattice(), sigma, self.phase);
        cfg.max_iters = self.inversion.max_iters;
        cfg.stop_tol = self.inversion.stop_tol;
        if let Some(k0) = self.inversion.k0 {
            cfg.k0 = k0;
        }
        cfg.forward_budget = McBudget {
            n_paths: self.inversion.residual_paths.unwrap_or(self.mc.n_paths),
            max_order: self.mc.max_order.max(2),
            seed: self.seed,
        };
        cfg.validate(sigma, self.phase).map_err(|e| cfg_err(e.to_string()))?;
        Ok(cfg)
    }

    /// sup of the admissible contraction radius 1/(‖φ‖_∞ L̄).
    pub fn k0_cap(&self, sigma: &Sigma) -> CliResult<f64> {
        Ok(1.0 / (self.phase.sup_norm() * estimate_l_norm(sigma, &self.domain()?, 64)))
    }

    /// Canonical JSON of the resolved configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical JSON, lowercase hex.
    pub fn hash(&self) -> String {
        Sha256::digest(self.canonical_json().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
