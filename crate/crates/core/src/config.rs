//! TOML run configuration.
//!
//! Every field has a default, so an empty file is a valid configuration and
//! runs the benchmark experiments with the finite-activity driver.
//!
//! ```toml
//! seed = 2024
//! out = "out"
//!
//! [model]
//! name = "benchmark"
//! generator = [[-1.0, 1.0], [1.0, -1.0]]
//!
//! [driver]
//! kind = "bilateral-gamma"
//!
//! [strong_error]
//! horizons = [5.0, 10.0]
//! levels = [2, 3, 4, 5, 6]
//! samples = 4000
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::builtin_functional;
use crate::error::{Error, Result};
use crate::mlmc::PlanInputs;
use crate::model::{benchmark_model, linear_test_model, zero_model, Functional, Generator, RegimeModel};
use crate::noise::JumpDriver;
use crate::taem::LevelLadder;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub out: PathBuf,
    pub model: ModelConfig,
    pub driver: DriverConfig,
    pub path: PathConfig,
    pub strong_error: StrongErrorConfig,
    pub mlmc: MlmcConfig,
    pub study: StudyConfig,
    pub probe: ProbeConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 2024,
            workers: 0,
            out: PathBuf::from("out"),
            model: ModelConfig::default(),
            driver: DriverConfig::default(),
            path: PathConfig::default(),
            strong_error: StrongErrorConfig::default(),
            mlmc: MlmcConfig::default(),
            study: StudyConfig::default(),
            probe: ProbeConfig::default(),
        }
    }
}

/// `name` is `benchmark`, `linear` or `zero`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub name: String,
    /// Generator matrix; rows must sum to zero.
    pub generator: Option<Vec<Vec<f64>>>,
    /// Step-size scale `h0`.
    pub h0: Option<f64>,
    /// Declared contraction rate used by the planner.
    pub alpha: Option<f64>,
    pub initial_state: Option<Vec<f64>>,
    pub initial_regime: Option<usize>,
    /// Dimension of the `linear` and `zero` models.
    pub dim: usize,
    /// Mean-reversion rate of the `linear` model.
    pub rate: f64,
    /// Diffusion level of the `linear` model.
    pub noise: f64,
    /// Number of regimes of the `zero` model.
    pub regimes: usize,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            name: "benchmark".into(),
            generator: None,
            h0: None,
            alpha: None,
            initial_state: None,
            initial_regime: None,
            dim: 3,
            rate: 1.0,
            noise: 0.5,
            regimes: 1,
        }
    }
}

/// `kind` is `compound-poisson`, `bilateral-gamma` or `none`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DriverConfig {
    pub kind: String,
    pub intensity: f64,
    pub jump_mean: f64,
    pub jump_std: f64,
    pub shape: f64,
    pub rate: f64,
}

impl Default for DriverConfig {
    fn default() -> Self {
        Self {
            kind: "compound-poisson".into(),
            intensity: 10.0,
            jump_mean: 0.0,
            jump_std: 0.4,
            shape: 1.0,
            rate: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathConfig {
    pub horizon: f64,
    pub step: f64,
}

impl Default for PathConfig {
    fn default() -> Self {
        Self {
            horizon: 5.0,
            step: 0.25,
        }
    }
}

/// Levels index `Δ_l = ratio^-l`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrongErrorConfig {
    pub horizons: Vec<f64>,
    pub levels: Vec<u32>,
    pub samples: usize,
    pub ratio: u32,
}

impl Default for StrongErrorConfig {
    fn default() -> Self {
        Self {
            horizons: vec![5.0, 10.0],
            levels: (2..=6).collect(),
            samples: 10_000,
            ratio: 2,
        }
    }
}

/// Missing `k0`/`k2` are fitted by a pilot run; a missing `k1` is
/// `L_φ (|x0| + rms)` with `rms` measured on the pilot's level-0 paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MlmcConfig {
    pub epsilon: f64,
    pub functional: String,
    /// Coarsest step parameter `Δ0`.
    pub base_step: f64,
    pub ratio: u32,
    pub k0: Option<f64>,
    pub k1: Option<f64>,
    pub k2: Option<f64>,
    pub pilot_levels: u32,
    pub pilot_samples: usize,
    pub pilot_horizon: f64,
    pub failure_threshold: f64,
}

impl Default for MlmcConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.1,
            functional: "phi1".into(),
            base_step: 0.25,
            ratio: 2,
            k0: None,
            k1: None,
            k2: None,
            pilot_levels: 4,
            pilot_samples: 400,
            pilot_horizon: 3.0,
            failure_threshold: 0.01,
        }
    }
}

/// Accuracy grid of the variance and cost studies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudyConfig {
    pub epsilons: Vec<f64>,
    /// Estimator repetitions per accuracy in the variance study.
    pub repetitions: Vec<usize>,
    pub functionals: Vec<String>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        let base: f64 = 0.5;
        Self {
            epsilons: (0..5).map(|k| base / 2f64.powi(k)).collect(),
            repetitions: vec![32, 16, 8, 4, 2],
            functionals: vec!["phi1".into(), "phi2".into(), "phi3".into()],
        }
    }
}

/// Uniform cloud in `[-half_width, half_width]^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeConfig {
    pub cloud_size: usize,
    pub pairs: usize,
    pub half_width: f64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            cloud_size: 2000,
            pairs: 2000,
            half_width: 3.0,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::config("config", e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Range checks that need no simulation.
    pub fn validate(&self) -> Result<()> {
        self.build_model()?;
        self.build_driver()?;
        let m = &self.mlmc;
        if !(m.base_step > 0.0 && m.base_step < 1.0) {
            return Err(Error::config("mlmc.base_step", format!("{} is not in (0, 1)", m.base_step)));
        }
        if m.ratio < 2 {
            return Err(Error::config("mlmc.ratio", format!("{} < 2", m.ratio)));
        }
        if !(m.epsilon > 0.0 && m.epsilon.is_finite()) {
            return Err(Error::config("mlmc.epsilon", format!("{} must be > 0", m.epsilon)));
        }
        for (name, v) in [("mlmc.k0", m.k0), ("mlmc.k1", m.k1), ("mlmc.k2", m.k2)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::config(name, format!("{v} must be > 0")));
                }
            }
        }
        if !(0.0..=1.0).contains(&m.failure_threshold) {
            return Err(Error::config("mlmc.failure_threshold", "must be in [0, 1]"));
        }
        if !(m.pilot_horizon > 0.0) {
            return Err(Error::config("mlmc.pilot_horizon", "must be > 0"));
        }
        self.functional(&m.functional)?;

        let p = &self.path;
        if !(p.step > 0.0 && p.step < 1.0) {
            return Err(Error::config("path.step", format!("{} is not in (0, 1)", p.step)));
        }
        if !(p.horizon > 0.0 && p.horizon.is_finite()) {
            return Err(Error::config("path.horizon", "must be > 0"));
        }

        let s = &self.strong_error;
        if s.levels.len() < 2 {
            return Err(Error::config("strong_error.levels", "regression needs at least 2 levels"));
        }
        if s.levels.windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::config("strong_error.levels", "levels must be consecutive"));
        }
        if s.levels[0] == 0 {
            return Err(Error::config("strong_error.levels", "levels start at 1 (Δ = 1 is excluded)"));
        }
        if s.samples < 2 {
            return Err(Error::config("strong_error.samples", "need at least 2 samples"));
        }
        if s.ratio < 2 {
            return Err(Error::config("strong_error.ratio", format!("{} < 2", s.ratio)));
        }
        if s.horizons.is_empty() || s.horizons.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(Error::config("strong_error.horizons", "need positive horizons"));
        }

        let st = &self.study;
        if st.epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::config("study.epsilons", "all values must be > 0"));
        }
        if st.epsilons.len() < 2 {
            return Err(Error::config("study.epsilons", "need at least 2 values"));
        }
        if st.repetitions.len() != st.epsilons.len() {
            return Err(Error::config("study.repetitions", "need one count per epsilon"));
        }
        if st.repetitions.iter().any(|&r| r < 2) {
            return Err(Error::config("study.repetitions", "need at least 2 repetitions"));
        }
        for f in &st.functionals {
            self.functional(f)?;
        }

        let pr = &self.probe;
        if pr.cloud_size == 0 || pr.pairs == 0 || !(pr.half_width > 0.0) {
            return Err(Error::config("probe", "cloud_size, pairs and half_width must be positive"));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<RegimeModel> {
        let c = &self.model;
        let mut model = match c.name.as_str() {
            "benchmark" => benchmark_model(),
            "linear" => linear_test_model(c.dim, c.rate, c.noise)?,
            "zero" => zero_model(c.dim, c.regimes)?,
            other => return Err(Error::config("model.name", format!("unknown model {other:?}"))),
        };
        if let Some(g) = &c.generator {
            let g = Generator::new(g.clone()).map_err(|e| Error::config("model.generator", e.to_string()))?;
            model = model.with_generator(g).map_err(|e| Error::config("model.generator", e.to_string()))?;
        }
        let mut meta = model.meta().clone();
        if let Some(h0) = c.h0 {
            meta.taming_base = h0;
        }
        if let Some(a) = c.alpha {
            meta.contraction_rate = a;
        }
        model = model.with_metadata(meta).map_err(|e| Error::config("model.h0", e.to_string()))?;
        if let Some(x0) = &c.initial_state {
            model = model
                .with_initial_state(x0.clone())
                .map_err(|e| Error::config("model.initial_state", e.to_string()))?;
        }
        if let Some(r) = c.initial_regime {
            model = model
                .with_initial_regime(r)
                .map_err(|e| Error::config("model.initial_regime", e.to_string()))?;
        }
        Ok(model)
    }

    pub fn build_driver(&self) -> Result<JumpDriver> {
        let c = &self.driver;
        let dim = self.model_dim();
        let d = match c.kind.as_str() {
            "compound-poisson" => JumpDriver::compound_poisson(dim, c.intensity, c.jump_mean, c.jump_std),
            "bilateral-gamma" => JumpDriver::bilateral_gamma(dim, c.shape, c.rate),
            "none" => Ok(JumpDriver::none(dim)),
            other => return Err(Error::config("driver.kind", format!("unknown driver {other:?}"))),
        };
        d.map_err(|e| Error::config("driver", e.to_string()))
    }

    fn model_dim(&self) -> usize {
        match self.model.name.as_str() {
            "benchmark" => 3,
            _ => self.model.dim,
        }
    }

    pub fn functional(&self, name: &str) -> Result<Functional> {
        let dim = self.model_dim();
        match name {
            "phi1" | "phi2" | "phi3" => builtin_functional(name, dim),
            "mean" => {
                let n = dim as f64;
                Ok(Functional::new("mean", crate::model::Lipschitz::Global(1.0 / n.sqrt()), move |x| {
                    x.iter().sum::<f64>() / n
                }))
            }
            _ => match name.strip_prefix("const:").map(str::parse::<f64>) {
                Some(Ok(c)) if c.is_finite() => Ok(Functional::constant(c)),
                _ => Err(Error::config("functional", format!("unknown functional {name:?}"))),
            },
        }
    }

    pub fn mlmc_ladder(&self) -> Result<LevelLadder> {
        LevelLadder::new(self.mlmc.base_step, self.mlmc.ratio)
    }

    /// Planner inputs once the constants are known.
    pub fn plan_inputs(&self, alpha: f64, k0: f64, k1: f64, k2: f64, l_phi: f64) -> PlanInputs {
        PlanInputs {
            epsilon: self.mlmc.epsilon,
            alpha,
            k0,
            k1,
            k2,
            ratio: self.mlmc.ratio,
            l_phi,
        }
    }
}
