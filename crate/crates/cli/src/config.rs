//! Experiment configuration, schema version 1.
//!
//! A config is one JSON document:
//!
//! ```json
//! {
//!   "schema": 1,
//!   "algorithm": "owel",
//!   "seed": 7,
//!   "market": {
//!     "types": [{ "valuation": { "kind": "separable_power", "a": [1.0], "exponent": 0.5 } }],
//!     "costs": [1.0],
//!     "supply": [1.0],
//!     "feasible": { "kind": "box", "lower": [0.0], "upper": [1.0] }
//!   },
//!   "params": { "alpha": 0.05, "iterations": 100, "step": 0.3,
//!               "inner": { "restarts": 3, "iterations": 1000, "validation": 500, "step": 0.25 } }
//! }
//! ```
//!
//! Every field is parsed as optional and checked afterwards, so a missing
//! field is reported by name (`market.supply: required`) rather than as a
//! parse position.

use std::fmt;
use std::path::{Path, PathBuf};

use dynpricer::bun_to_price::{BtpBudget, T1_CONSTANT};
use dynpricer::owel::OwelConfig;
use dynpricer::unit_demand::GumbelPriceDistribution;
use dynpricer::{
    BuyerDistribution, BuyerType, CostVector, FeasibleSet, MarketInstance, Mode, PriceVector, SupplyVector,
    Valuation,
};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: u32 = 1;

/// A config problem, reported as `field: constraint`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub constraint: String,
}

impl ConfigError {
    fn new(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Self {
            field: field.into(),
            constraint: constraint.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.constraint)
    }
}

impl std::error::Error for ConfigError {}

type Checked<T> = std::result::Result<T, ConfigError>;

fn required<T>(v: Option<T>, field: &str) -> Checked<T> {
    v.ok_or_else(|| ConfigError::new(field, "required"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub schema: Option<u32>,
    pub algorithm: Option<String>,
    pub seed: Option<u64>,
    pub market: Option<RawMarket>,
    #[serde(default)]
    pub params: Params,
    /// Ground-truth evaluation; defaults to on for at most three goods.
    pub oracle: Option<bool>,
    /// Output directory; `--out` overrides it.
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMarket {
    pub types: Option<Vec<RawType>>,
    pub costs: Option<Vec<f64>>,
    pub supply: Option<Vec<f64>>,
    pub feasible: Option<FeasibleSet>,
    /// Cap on unit-demand item values; defaults to the largest value.
    pub vmax: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawType {
    pub valuation: Valuation,
    /// Defaults to equal weights across all types.
    pub weight: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawDistribution {
    pub base: Vec<f64>,
    pub eta: f64,
}

/// Hyperparameters. Which ones apply depends on the algorithm.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Params {
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub epsilon: Option<f64>,
    pub xi: Option<f64>,
    /// Multiplier on theory schedules (default 1e-3).
    pub scale: Option<f64>,
    pub t1_constant: Option<f64>,
    /// Outer iterations (owel, owel-ud).
    pub iterations: Option<usize>,
    /// Outer step (owel, owel-ud).
    pub step: Option<f64>,
    pub inner: Option<BtpBudget>,
    pub final_inner: Option<BtpBudget>,
    /// Target bundle (buntoprice).
    pub target: Option<Vec<f64>>,
    /// Query budget (buntoprice).
    pub budget: Option<BtpBudget>,
    /// Fixed price (limited-supply).
    pub price: Option<Vec<f64>>,
    /// Fixed price distribution (limited-supply, unit demand).
    pub distribution: Option<RawDistribution>,
    pub horizon: Option<usize>,
    pub runs: Option<usize>,
    /// Random trials (structural-checks).
    pub trials: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Algorithm {
    BunToPrice,
    Owel,
    OwelUd,
    LimitedSupply,
    StructuralChecks,
}

impl Algorithm {
    pub const NAMES: [&'static str; 5] = ["buntoprice", "owel", "owel-ud", "limited-supply", "structural-checks"];

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "buntoprice" => Self::BunToPrice,
            "owel" => Self::Owel,
            "owel-ud" => Self::OwelUd,
            "limited-supply" => Self::LimitedSupply,
            "structural-checks" => Self::StructuralChecks,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::BunToPrice => "buntoprice",
            Self::Owel => "owel",
            Self::OwelUd => "owel-ud",
            Self::LimitedSupply => "limited-supply",
            Self::StructuralChecks => "structural-checks",
        }
    }
}

/// Fixed pricing policy of a limited-supply run.
#[derive(Debug, Clone, PartialEq)]
pub enum Policy {
    Price(PriceVector),
    Distribution(GumbelPriceDistribution),
}

/// Algorithm-specific settings after validation.
#[derive(Debug, Clone, PartialEq)]
pub enum Settings {
    BunToPrice {
        target: Vec<f64>,
        epsilon: f64,
        delta: f64,
        scale: f64,
        t1_constant: f64,
        budget: Option<BtpBudget>,
    },
    Owel(OwelConfig),
    LimitedSupply {
        policy: Policy,
        horizon: usize,
        runs: usize,
    },
    StructuralChecks {
        trials: usize,
    },
}

/// A validated experiment.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub market: MarketInstance,
    pub settings: Settings,
    pub oracle: bool,
    pub output: PathBuf,
    /// SHA-256 of the canonical config with the effective seed.
    pub hash: String,
}

/// Reads and validates a config file. `seed` overrides the file's seed.
pub fn load(path: &Path, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| anyhow::anyhow!("cannot read config {}: {e}", path.display()))?;
    parse(&text, seed)
}

pub fn parse(text: &str, seed: Option<u64>) -> anyhow::Result<ExperimentConfig> {
    let raw: RawConfig = serde_json::from_str(text).map_err(|e| anyhow::anyhow!("config: {e}"))?;
    Ok(resolve(raw, seed)?)
}

pub fn resolve(mut raw: RawConfig, seed: Option<u64>) -> Checked<ExperimentConfig> {
    match raw.schema {
        Some(SCHEMA_VERSION) => {}
        Some(v) => return Err(ConfigError::new("schema", format!("unsupported version {v} (expected 1)"))),
        None => return Err(ConfigError::new("schema", "required")),
    }
    let name = required(raw.algorithm.clone(), "algorithm")?;
    let algorithm = Algorithm::parse(&name).ok_or_else(|| {
        ConfigError::new("algorithm", format!("must be one of {}", Algorithm::NAMES.join(", ")))
    })?;
    if let Some(s) = seed {
        raw.seed = Some(s);
    }
    let seed = raw.seed.unwrap_or(0);
    raw.seed = Some(seed);
    let market = build_market(required(raw.market.clone(), "market")?)?;
    let settings = settings(algorithm, &raw.params, &market)?;
    let goods = match market.mode() {
        Mode::Divisible => market.dim(),
        Mode::UnitDemand => market.dim() - 1,
    };
    let oracle = raw.oracle.unwrap_or(goods <= 3);
    if algorithm == Algorithm::StructuralChecks && !oracle {
        return Err(ConfigError::new("oracle", "structural-checks needs the ground-truth oracle"));
    }
    let output = raw.output.clone().unwrap_or_else(|| PathBuf::from("out"));

    let mut canonical = raw.clone();
    canonical.output = None;
    let bytes = serde_json::to_vec(&canonical).expect("config serializes");
    let hash = hex::encode(Sha256::digest(&bytes));

    Ok(ExperimentConfig {
        algorithm,
        seed,
        market,
        settings,
        oracle,
        output,
        hash,
    })
}

fn build_market(raw: RawMarket) -> Checked<MarketInstance> {
    let types = required(raw.types, "market.types")?;
    if types.is_empty() {
        return Err(ConfigError::new("market.types", "needs at least one buyer type"));
    }
    let costs = required(raw.costs, "market.costs")?;
    let supply = required(raw.supply, "market.supply")?;
    let feasible = required(raw.feasible, "market.feasible")?;

    let n = types.len() as f64;
    let mut buyers = Vec::with_capacity(types.len());
    for (i, t) in types.into_iter().enumerate() {
        t.valuation
            .validate()
            .map_err(|e| ConfigError::new(format!("market.types[{i}].valuation"), e.to_string()))?;
        buyers.push(BuyerType {
            valuation: t.valuation,
            weight: t.weight.unwrap_or(1.0 / n),
        });
    }
    let all_default = buyers.iter().all(|b| b.weight == 1.0 / n);
    let distribution = if all_default {
        BuyerDistribution::uniform(buyers.into_iter().map(|b| b.valuation).collect())
    } else {
        BuyerDistribution::new(buyers)
    }
    .map_err(|e| ConfigError::new("market.types", e.to_string()))?;

    let costs = CostVector::new(costs).map_err(|e| ConfigError::new("market.costs", e.to_string()))?;
    let supply = SupplyVector::new(supply).map_err(|e| ConfigError::new("market.supply", e.to_string()))?;
    check_feasible(&feasible)?;
    let vmax = raw.vmax.unwrap_or_else(|| {
        distribution
            .types()
            .iter()
            .map(|t| t.valuation.max_item_value())
            .fold(0.0, f64::max)
    });
    let vmax = if vmax > 0.0 { vmax } else { 1.0 };
    MarketInstance::new(distribution, costs, supply, feasible, vmax).map_err(|e| ConfigError::new("market", e.to_string()))
}

fn check_feasible(f: &FeasibleSet) -> Checked<()> {
    let checked = match f {
        FeasibleSet::Box { lower, upper } => FeasibleSet::new_box(lower.clone(), upper.clone()).map(|_| ()),
        FeasibleSet::Simplex { dim } => FeasibleSet::simplex(*dim).map(|_| ()),
        FeasibleSet::BoxedSimplex { lower, upper } => {
            FeasibleSet::new_boxed_simplex(lower.clone(), upper.clone()).map(|_| ())
        }
    };
    checked.map_err(|e| ConfigError::new("market.feasible", e.to_string()))
}

fn positive(v: f64, field: &str) -> Checked<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("must be > 0, got {v}")))
    }
}

fn unit_interval(v: f64, field: &str) -> Checked<f64> {
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("must lie in (0, 1), got {v}")))
    }
}

fn budget(b: Option<BtpBudget>, field: &str) -> Checked<Option<BtpBudget>> {
    if let Some(b) = b {
        b.validate().map_err(|e| ConfigError::new(field, e.to_string()))?;
    }
    Ok(b)
}

fn length(v: &[f64], d: usize, field: &str) -> Checked<()> {
    if v.len() == d {
        Ok(())
    } else {
        Err(ConfigError::new(field, format!("needs {d} entries, got {}", v.len())))
    }
}

fn settings(algorithm: Algorithm, p: &Params, m: &MarketInstance) -> Checked<Settings> {
    let d = m.dim();
    let scale = positive(p.scale.unwrap_or(1e-3), "params.scale")?;
    let t1_constant = positive(p.t1_constant.unwrap_or(T1_CONSTANT), "params.t1_constant")?;
    let delta = unit_interval(p.delta.unwrap_or(0.1), "params.delta")?;
    let need_mode = |mode: Mode, what: &str| -> Checked<()> {
        if m.mode() == mode {
            Ok(())
        } else {
            Err(ConfigError::new("market.types", format!("{} needs {what} buyers", algorithm.name())))
        }
    };
    Ok(match algorithm {
        Algorithm::BunToPrice => {
            need_mode(Mode::Divisible, "divisible-goods")?;
            let target = required(p.target.clone(), "params.target")?;
            length(&target, d, "params.target")?;
            if let Some(j) = target.iter().position(|x| !(*x > 0.0)) {
                return Err(ConfigError::new("params.target", format!("entry {j} must be > 0 to be inducible")));
            }
            if !m.feasible.contains(&target) {
                return Err(ConfigError::new("params.target", "must lie in the feasible set"));
            }
            Settings::BunToPrice {
                target,
                epsilon: positive(p.epsilon.unwrap_or(0.05), "params.epsilon")?,
                delta,
                scale,
                t1_constant,
                budget: budget(p.budget, "params.budget")?,
            }
        }
        Algorithm::Owel | Algorithm::OwelUd => {
            if algorithm == Algorithm::Owel {
                need_mode(Mode::Divisible, "divisible-goods")?;
            } else {
                need_mode(Mode::UnitDemand, "unit-demand")?;
            }
            let mut cfg = OwelConfig::new(positive(required(p.alpha, "params.alpha")?, "params.alpha")?, delta);
            cfg.xi = p.xi.map(|v| positive(v, "params.xi")).transpose()?;
            cfg.epsilon = p.epsilon.map(|v| positive(v, "params.epsilon")).transpose()?;
            cfg.iterations = p.iterations;
            if cfg.iterations == Some(0) {
                return Err(ConfigError::new("params.iterations", "must be >= 1"));
            }
            cfg.step = p.step.map(|v| positive(v, "params.step")).transpose()?;
            cfg.inner = budget(p.inner, "params.inner")?;
            cfg.final_inner = budget(p.final_inner, "params.final_inner")?;
            cfg.scale = scale;
            cfg.t1_constant = t1_constant;
            Settings::Owel(cfg)
        }
        Algorithm::LimitedSupply => {
            let policy = match (&p.price, &p.distribution) {
                (Some(price), None) => {
                    length(price, d, "params.price")?;
                    Policy::Price(PriceVector::new(price.clone()).map_err(|e| ConfigError::new("params.price", e.to_string()))?)
                }
                (None, Some(dist)) => {
                    need_mode(Mode::UnitDemand, "unit-demand")?;
                    length(&dist.base, d, "params.distribution.base")?;
                    Policy::Distribution(
                        GumbelPriceDistribution::new(&dist.base, dist.eta)
                            .map_err(|e| ConfigError::new("params.distribution", e.to_string()))?,
                    )
                }
                (None, None) => return Err(ConfigError::new("params.price", "required")),
                (Some(_), Some(_)) => {
                    return Err(ConfigError::new("params.distribution", "give either price or distribution, not both"))
                }
            };
            let horizon = required(p.horizon, "params.horizon")?;
            if horizon == 0 {
                return Err(ConfigError::new("params.horizon", "must be >= 1"));
            }
            let runs = p.runs.unwrap_or(50);
            if runs == 0 {
                return Err(ConfigError::new("params.runs", "must be >= 1"));
            }
            Settings::LimitedSupply { policy, horizon, runs }
        }
        Algorithm::StructuralChecks => {
            need_mode(Mode::Divisible, "divisible-goods")?;
            Settings::StructuralChecks {
                trials: p.trials.unwrap_or(200),
            }
        }
    })
}
