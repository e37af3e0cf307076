//! TOML run configuration: sections, defaults, validation, and the
//! config hash echoed in every artifact header.

use qsdlab::model::{build_logistic, build_theta_logistic, Model};
use qsdlab::sde::{Scheme, SimConfig};
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Configuration-stage error: names the offending key or file.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub model: ModelSection,
    pub grid: GridSection,
    pub sim: SimSection,
    pub scale: ScaleSection,
    pub spectral: SpectralSection,
    pub sweep: SweepSection,
    pub fv: FvSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelSection::default(),
            grid: GridSection::default(),
            sim: SimSection::default(),
            scale: ScaleSection::default(),
            spectral: SpectralSection::default(),
            sweep: SweepSection::default(),
            fv: FvSection::default(),
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    /// `logistic` or `theta_logistic`.
    pub kind: String,
    pub mu: f64,
    pub kappa: f64,
    /// Only read for `theta_logistic`.
    pub theta: f64,
    pub sigma: f64,
    pub gamma: f64,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kind: "logistic".into(),
            mu: 1.0,
            kappa: 1.0,
            theta: 1.0,
            sigma: 1.0,
            gamma: 1.0,
        }
    }
}

impl ModelSection {
    /// Structural validation at parse time; numeric admissibility beyond
    /// this is the model constructor's job.
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.kind.as_str() {
            "logistic" | "theta_logistic" => {}
            other => {
                return Err(ConfigError(format!(
                    "model.kind = {other:?} is not one of \"logistic\", \"theta_logistic\""
                )))
            }
        }
        for (key, v) in [
            ("model.mu", self.mu),
            ("model.kappa", self.kappa),
            ("model.theta", self.theta),
            ("model.sigma", self.sigma),
            ("model.gamma", self.gamma),
        ] {
            if !v.is_finite() {
                return Err(ConfigError(format!("{key} must be finite (got {v})")));
            }
        }
        if self.kind == "theta_logistic" && self.theta <= 0.0 {
            return Err(ConfigError(format!(
                "model.theta must be positive for theta_logistic (got {})",
                self.theta
            )));
        }
        Ok(())
    }

    pub fn build(&self) -> qsdlab::Result<Model> {
        // σ = 0 is a legitimate *configuration* (the demographic-only
        // variant, which the hypothesis audit then flags): construct the
        // full model and strip the environmental term, since the builders
        // themselves insist on σ'(0) ≠ 0.
        let sigma = if self.sigma == 0.0 { 1.0 } else { self.sigma };
        let model = match self.kind.as_str() {
            "theta_logistic" => {
                build_theta_logistic(self.mu, self.kappa, self.theta, sigma, self.gamma)?
            }
            _ => build_logistic(self.mu, self.kappa, sigma, self.gamma)?,
        };
        Ok(if self.sigma == 0.0 {
            model.demographic_only()
        } else {
            model
        })
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub x_lo: f64,
    pub x_junction: f64,
    /// 0 selects automatic truncation from the density tail.
    pub x_max: f64,
    pub n: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            x_lo: 1e-8,
            x_junction: 0.1,
            x_max: 0.0,
            n: 2000,
        }
    }
}

impl GridSection {
    /// Concrete grid; `eps_hint` sets the automatic truncation point
    /// (the fattest tail among the ε values the caller will tabulate).
    pub fn resolve(&self, model: &Model, eps_hint: f64) -> qsdlab::Result<qsdlab::grid::Grid> {
        let x_max = if self.x_max > 0.0 {
            self.x_max
        } else if eps_hint > 0.0 {
            qsdlab::density::auto_x_max_eps(model, eps_hint)?
                .max(qsdlab::density::auto_x_max(model).unwrap_or(0.0))
        } else {
            qsdlab::density::auto_x_max(model)?
        };
        qsdlab::grid::Grid::graded(self.x_lo, self.x_junction, x_max, self.n)
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    pub eps: f64,
    pub x0: f64,
    pub dt: f64,
    pub dt_boundary_factor: f64,
    pub t_max: f64,
    pub n_paths: usize,
    pub seed: u64,
    /// `absorbed-euler` or `drift-implicit`.
    pub scheme: String,
}

impl Default for SimSection {
    fn default() -> Self {
        SimSection {
            eps: 0.1,
            x0: 1.0,
            dt: 1e-3,
            dt_boundary_factor: 1.0 / 16.0,
            t_max: 200.0,
            n_paths: 1000,
            seed: 1,
            scheme: "absorbed-euler".into(),
        }
    }
}

impl SimSection {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match self.scheme.as_str() {
            "absorbed-euler" | "drift-implicit" => Ok(()),
            other => Err(ConfigError(format!(
                "sim.scheme = {other:?} is not one of \"absorbed-euler\", \"drift-implicit\""
            ))),
        }
    }

    pub fn scheme(&self) -> Scheme {
        match self.scheme.as_str() {
            "drift-implicit" => Scheme::DriftImplicit,
            _ => Scheme::AbsorbedEuler,
        }
    }

    pub fn to_sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            dt: self.dt,
            dt_boundary_factor: self.dt_boundary_factor,
            t_max: self.t_max,
            seed,
            n_paths: self.n_paths,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScaleSection {
    pub x_star: f64,
    pub beta: f64,
}

impl Default for ScaleSection {
    fn default() -> Self {
        ScaleSection {
            x_star: 0.25,
            beta: 0.5,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralSection {
    pub n_base: usize,
    pub eps: Vec<f64>,
}

impl Default for SpectralSection {
    fn default() -> Self {
        SpectralSection {
            n_base: 2000,
            eps: vec![0.1],
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSection {
    /// Ladder for spectral sweeps.
    pub eps_ladder: Vec<f64>,
    /// Ladder for Monte Carlo mean-extinction sweeps (censoring limits
    /// how small ε can get at a fixed horizon).
    pub mc_eps_ladder: Vec<f64>,
    /// Points for the pointwise reciprocal-law check.
    pub reciprocal_eps: Vec<f64>,
    pub n_base: usize,
    pub x0: f64,
    pub paths_per_point: usize,
    pub reciprocal_paths: usize,
    pub dt: f64,
    pub t_max: f64,
    pub reciprocal_t_max: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            eps_ladder: vec![0.4, 0.3, 0.2, 0.14, 0.1, 0.07, 0.05],
            mc_eps_ladder: vec![0.4, 0.3, 0.2, 0.14, 0.1],
            reciprocal_eps: vec![0.1, 0.07, 0.05],
            n_base: 2000,
            x0: 1.0,
            paths_per_point: 2000,
            reciprocal_paths: 400,
            dt: 2e-3,
            t_max: 400.0,
            reciprocal_t_max: 2600.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields, default)]
pub struct FvSection {
    pub n_particles: usize,
    pub t_burn: f64,
    pub n_snapshots: usize,
    pub snapshot_gap: f64,
}

impl Default for FvSection {
    fn default() -> Self {
        FvSection {
            n_particles: 2000,
            t_burn: 10.0,
            n_snapshots: 8,
            snapshot_gap: 1.0,
        }
    }
}

impl RunConfig {
    /// Loads the file (or built-in defaults), applies the seed override,
    /// and validates parse-stage constraints.
    pub fn load(path: Option<&Path>, seed_override: Option<u64>) -> Result<RunConfig, ConfigError> {
        let mut cfg: RunConfig = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| ConfigError(format!("cannot read config {}: {e}", p.display())))?;
                toml::from_str(&text)
                    .map_err(|e| ConfigError(format!("config {}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        if let Some(s) = seed_override {
            cfg.sim.seed = s;
        }
        cfg.model.validate()?;
        cfg.sim.validate()?;
        Ok(cfg)
    }

    /// Canonical serialized form; hashing this makes the header capture
    /// every effective setting.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serialization cannot fail")
    }

    pub fn hash(&self) -> u64 {
        fnv1a64(self.canonical().as_bytes())
    }
}

/// FNV-1a, 64-bit.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}
