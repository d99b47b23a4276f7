use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizers::{ParamState, StepRule};
use crate::problems::ProblemSpec;

fn default_record_every() -> u64 {
    100
}

/// One experiment: problem, starting point, step rule, horizon and seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemSpec,
    /// Starting point, one `{x, y}` object per layer.
    pub init: ParamState,
    pub rule: StepRule,
    /// Number of optimizer steps `T`.
    #[serde(rename = "T")]
    pub steps: u64,
    pub seed: u64,
    #[serde(default = "default_record_every")]
    pub record_every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset_name: Option<String>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        self.init.check_against(&self.problem)?;
        self.rule.validate(&self.problem)?;
        if self.record_every == 0 {
            return Err(Error::Config("record_every must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    SnrAlpha,
    Rho,
    Eta,
    M,
    Alpha0,
    Seed,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrAlpha => "snr_alpha",
            SweepAxis::Rho => "rho",
            SweepAxis::Eta => "eta",
            SweepAxis::M => "m",
            SweepAxis::Alpha0 => "alpha0",
            SweepAxis::Seed => "seed",
        }
    }

    fn integral(self) -> bool {
        matches!(self, SweepAxis::M | SweepAxis::Seed)
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "snr_alpha" => SweepAxis::SnrAlpha,
            "rho" => SweepAxis::Rho,
            "eta" => SweepAxis::Eta,
            "m" => SweepAxis::M,
            "alpha0" => SweepAxis::Alpha0,
            "seed" => SweepAxis::Seed,
            other => return Err(Error::Config(format!("unknown sweep axis `{other}`"))),
        })
    }
}

/// A sweep value, kept as written so file names and summaries echo the input.
#[derive(Clone, Debug, PartialEq)]
pub enum SweepValue {
    Real(f64, String),
    Int(u64, String),
}

impl SweepValue {
    pub fn label(&self) -> &str {
        match self {
            SweepValue::Real(_, s) | SweepValue::Int(_, s) => s,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub base: RunConfig,
    pub axis: SweepAxis,
    pub values: Vec<SweepValue>,
}

impl SweepConfig {
    /// Parses `values` (e.g. `"0.5,1,2"`) for `axis`.
    pub fn new(base: RunConfig, axis: SweepAxis, values: &str) -> Result<Self> {
        let values = values
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| {
                if axis.integral() {
                    s.parse::<u64>()
                        .map(|v| SweepValue::Int(v, s.to_string()))
                        .map_err(|_| Error::Config(format!("{} values must be non-negative integers, got `{s}`", axis.name())))
                } else {
                    s.parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .map(|v| SweepValue::Real(v, s.to_string()))
                        .ok_or_else(|| Error::Config(format!("{} values must be finite reals, got `{s}`", axis.name())))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if values.is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        let sweep = Self { base, axis, values };
        for v in &sweep.values {
            sweep.member(v)?;
        }
        Ok(sweep)
    }

    /// The base config with the axis set to `value`, validated.
    pub fn member(&self, value: &SweepValue) -> Result<RunConfig> {
        let mut c = self.base.clone();
        match (self.axis, value) {
            (SweepAxis::SnrAlpha, SweepValue::Real(v, _)) => c.problem.set_snr_alpha(*v),
            (SweepAxis::Rho, SweepValue::Real(v, _)) => c.rule.rho = *v,
            (SweepAxis::Eta, SweepValue::Real(v, _)) => c.rule.eta = *v,
            (SweepAxis::Alpha0, SweepValue::Real(v, _)) => c.rule.alpha0 = *v,
            (SweepAxis::M, SweepValue::Int(v, _)) => c.rule.m = *v as usize,
            (SweepAxis::Seed, SweepValue::Int(v, _)) => c.seed = *v,
            _ => return Err(Error::Config(format!("value kind does not fit axis {}", self.axis.name()))),
        }
        c.validate()?;
        Ok(c)
    }
}
