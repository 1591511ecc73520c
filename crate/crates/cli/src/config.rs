//! Experiment configuration: typed per-scenario parameters, TOML/JSON
//! loading, validation, and the canonical hash recorded in every result
//! bundle.

use std::path::Path;

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

/// Privacy budget parameters.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub epsilon: f64,
    pub delta: f64,
}

impl BudgetConfig {
    /// The reference budget used by the pinned scenarios:
    /// `epsilon = ln 3`, `delta = 0.05`.
    pub fn reference() -> Self {
        Self {
            epsilon: 3.0f64.ln(),
            delta: 0.05,
        }
    }

    pub fn to_core(self) -> Result<dpfilter_core::PrivacyBudget64> {
        dpfilter_core::privacy::PrivacyBudget::new(self.epsilon, self.delta)
            .map_err(|e| anyhow::anyhow!("budget: {e}"))
    }
}

/// Settings shared by every scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CommonConfig {
    /// Base seed for all randomness; required so runs never depend on the
    /// wall clock.
    pub seed: u64,
    pub trials: usize,
    pub horizon: usize,
    pub budget: BudgetConfig,
}

impl CommonConfig {
    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            bail!("trials: must be at least 1");
        }
        if self.horizon == 0 {
            bail!("horizon: must be at least 1");
        }
        Ok(())
    }
}

/// Noise family for the aggregation scenario.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKindConfig {
    Gaussian,
    Laplace,
}

impl NoiseKindConfig {
    pub fn to_core(self) -> dpfilter_core::mechanisms::NoiseKind {
        match self {
            NoiseKindConfig::Gaussian => dpfilter_core::mechanisms::NoiseKind::Gaussian,
            NoiseKindConfig::Laplace => dpfilter_core::mechanisms::NoiseKind::Laplace,
        }
    }
}

/// Aggregation of `participants` moving-average channels of the given
/// length, comparing input and output noise placement.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AggregateConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    pub participants: usize,
    pub filter_length: usize,
    /// Per-participant l2 deviation bound.
    pub bound: f64,
    pub noise: NoiseKindConfig,
}

impl AggregateConfig {
    pub fn pinned() -> Self {
        Self {
            common: CommonConfig {
                seed: 17,
                trials: 200,
                horizon: 1000,
                budget: BudgetConfig {
                    epsilon: 2.0f64.ln(),
                    delta: 0.05,
                },
            },
            participants: 6,
            filter_length: 4,
            bound: 1.0,
            noise: NoiseKindConfig::Gaussian,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.common.validate()?;
        if self.participants == 0 {
            bail!("participants: must be at least 1");
        }
        if self.filter_length == 0 {
            bail!("filter_length: must be at least 1");
        }
        if !(self.bound >= 0.0) {
            bail!("bound: must be nonnegative");
        }
        Ok(())
    }
}

/// The vehicle-speed aggregation scenario comparing the Kalman-based
/// schemes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrafficConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    pub participants: usize,
    /// Protected position deviation in meters.
    pub rho: f64,
    /// Mean initial velocity in km/h.
    pub v0_kmh: f64,
    /// Steps discarded before the steady-state window.
    pub discard: usize,
    /// Wrong initial filter velocity (km/h) for the convergence trace.
    pub wrong_init_kmh: f64,
}

impl TrafficConfig {
    pub fn pinned() -> Self {
        Self {
            common: CommonConfig {
                seed: 7,
                trials: 200,
                horizon: 700,
                budget: BudgetConfig::reference(),
            },
            participants: 200,
            rho: 100.0,
            v0_kmh: 45.0,
            discard: 200,
            wrong_init_kmh: 75.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.common.validate()?;
        if self.participants == 0 {
            bail!("participants: must be at least 1");
        }
        if !(self.rho > 0.0) {
            bail!("rho: must be positive");
        }
        if self.discard >= self.common.horizon {
            bail!("discard: must be below the horizon");
        }
        Ok(())
    }
}

/// The filter whose output is being privatized in the event scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum FilterSpec {
    /// Continuous-time rational function of `s` (ascending coefficients)
    /// discretized with the bilinear map `s(z) = 2 (1 - z^-1)/(1 + z^-1)`.
    Bilinear { num: Vec<f64>, den: Vec<f64> },
    /// Discrete-time rational function in `z^-1` (ascending coefficients).
    Discrete { num: Vec<f64>, den: Vec<f64> },
}

impl FilterSpec {
    /// The pinned low-pass reference `1/(s + 0.05)`.
    pub fn reference() -> Self {
        FilterSpec::Bilinear {
            num: vec![1.0],
            den: vec![0.05, 1.0],
        }
    }

    pub fn to_core(&self) -> Result<dpfilter_core::RationalTf64> {
        let tf = match self {
            FilterSpec::Bilinear { num, den } => {
                dpfilter_core::lti::bilinear_map(num, den)
            }
            FilterSpec::Discrete { num, den } => {
                dpfilter_core::lti::RationalTf::new(num.clone(), den.clone())
            }
        };
        tf.map_err(|e| anyhow::anyhow!("filter: {e}"))
    }
}

/// Event-stream scenario: integer burst input released through the four
/// mechanism variants.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventsConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    pub filter: FilterSpec,
    /// Burst process switch-on probability.
    pub p_on: f64,
    /// Burst process switch-off probability.
    pub p_off: f64,
    /// FIR order of the zero-forcing spectral factor.
    pub factor_order: usize,
    /// FIR order of the estimator post-filter.
    pub fir_order: usize,
}

impl EventsConfig {
    pub fn pinned() -> Self {
        Self {
            common: CommonConfig {
                seed: 71,
                trials: 200,
                horizon: 2000,
                budget: BudgetConfig::reference(),
            },
            filter: FilterSpec::reference(),
            p_on: 0.08,
            p_off: 0.12,
            factor_order: 12,
            fir_order: 60,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.common.validate()?;
        if !(self.p_on > 0.0 && self.p_on < 1.0 && self.p_off > 0.0 && self.p_off < 1.0) {
            bail!("p_on/p_off: must lie strictly in (0, 1)");
        }
        if self.factor_order == 0 {
            bail!("factor_order: must be at least 1");
        }
        Ok(())
    }
}

/// Deviation-gain strategy for estimator synthesis.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
pub enum StrategyConfig {
    /// Geometric grid search on the certified gain bound.
    Bisect { lambda_max: f64, grid: usize },
    /// Fixed H-infinity gain cap.
    Hinf { gamma_max: f64 },
}

/// Estimator synthesis on the vehicle-speed scenario: sweeps the certified
/// deviation-gain bound, verifies every recovered filter, and evaluates the
/// best design by simulation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    pub participants: usize,
    pub rho: f64,
    pub v0_kmh: f64,
    pub discard: usize,
    /// Certified-bound sweep values; when present the sweep selects the
    /// point with the best verified (tight) released error.
    pub sweep: Option<Vec<f64>>,
    /// Strategy used when no sweep is given.
    pub strategy: Option<StrategyConfig>,
}

impl SynthConfig {
    pub fn pinned() -> Self {
        Self {
            common: CommonConfig {
                seed: 31,
                trials: 60,
                horizon: 700,
                budget: BudgetConfig::reference(),
            },
            participants: 200,
            rho: 100.0,
            v0_kmh: 45.0,
            discard: 200,
            sweep: Some(vec![
                0.25, 0.325, 0.4225, 0.549, 0.714, 0.928, 1.207, 1.569, 2.039, 2.651,
                3.446, 4.48, 5.824, 7.572, 9.843,
            ]),
            strategy: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.common.validate()?;
        if self.participants == 0 {
            bail!("participants: must be at least 1");
        }
        if self.discard >= self.common.horizon {
            bail!("discard: must be below the horizon");
        }
        if self.sweep.is_none() && self.strategy.is_none() {
            bail!("sweep/strategy: one of the two must be given");
        }
        if let Some(sweep) = &self.sweep {
            if sweep.is_empty() || sweep.iter().any(|&l| !(l > 0.0)) {
                bail!("sweep: values must be positive");
            }
        }
        Ok(())
    }
}

/// Closed-form norm and calibration checks.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormsConfig {
    #[serde(flatten)]
    pub common: CommonConfig,
    /// Moving-average lengths whose norms are reported.
    pub ma_lengths: Vec<usize>,
    /// Participant count for the vehicle-scenario gain report.
    pub participants: usize,
}

impl NormsConfig {
    pub fn pinned() -> Self {
        Self {
            common: CommonConfig {
                seed: 1,
                trials: 1,
                horizon: 1,
                budget: BudgetConfig::reference(),
            },
            ma_lengths: vec![2, 5, 10, 50],
            participants: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.common.validate()?;
        if self.ma_lengths.is_empty() || self.ma_lengths.iter().any(|&l| l == 0) {
            bail!("ma_lengths: need positive lengths");
        }
        if self.participants == 0 {
            bail!("participants: must be at least 1");
        }
        Ok(())
    }
}

/// Loads a scenario config from TOML or JSON (chosen by file extension).
pub fn load_config<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let is_json = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("json"))
        .unwrap_or(false);
    if is_json {
        serde_json::from_str(&text)
            .with_context(|| format!("parsing JSON config {}", path.display()))
    } else {
        toml::from_str(&text)
            .with_context(|| format!("parsing TOML config {}", path.display()))
    }
}

/// Canonical 64-bit FNV-1a hash of the resolved config's JSON form, recorded
/// in the result bundle so every summary number is traceable to its inputs.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let canon = serde_json::to_string(config)?;
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in canon.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    Ok(format!("{h:016x}"))
}
