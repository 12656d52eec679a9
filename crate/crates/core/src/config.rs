//! Flat `key=value` configuration files shared by the CLI commands.
//!
//! Unknown and duplicate keys are rejected. Numeric values use the
//! locale-independent decimal point; `inf` is accepted for upper
//! multipliers. Blank lines and `#` comments are skipped.

use std::collections::BTreeMap;
use std::path::Path;

use crate::backtest::StrikeRule;
use crate::calibrate::{EstimatorKind, WindowConfig};
use crate::error::{Error, Result};
use crate::lattice::IntervalModelParams;
use crate::payoff::PiecewisePayoff;

const KNOWN_KEYS: &[&str] = &[
    "s0",
    "k_d",
    "k_u",
    "sigma",
    "steps",
    "dt",
    "payoff",
    "strike",
    "window",
    "estimator",
    "pooled",
    "jobs",
    "csv",
    "out_lattice",
    "out_episodes",
    "out_histogram",
];

#[derive(Debug, Clone, Default)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key=value, got `{line}`", i + 1))
            })?;
            let key = key.trim();
            let value = value.trim();
            if !KNOWN_KEYS.contains(&key) {
                return Err(Error::Config(format!("line {}: unknown key `{key}`", i + 1)));
            }
            if values.insert(key.to_string(), value.to_string()).is_some() {
                return Err(Error::Config(format!("line {}: duplicate key `{key}`", i + 1)));
            }
        }
        Ok(Config { values })
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> Result<&str> {
        self.get(key)
            .ok_or_else(|| Error::Config(format!("missing key `{key}`")))
    }

    fn parse_f64(&self, key: &str, value: &str) -> Result<f64> {
        if value.eq_ignore_ascii_case("inf") {
            return Ok(f64::INFINITY);
        }
        value
            .parse()
            .map_err(|_| Error::Config(format!("key `{key}`: bad number `{value}`")))
    }

    pub fn get_f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|v| self.parse_f64(key, v))
            .transpose()
    }

    pub fn get_usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("key `{key}`: bad count `{v}`")))
            })
            .transpose()
    }

    pub fn get_bool(&self, key: &str) -> Result<Option<bool>> {
        self.get(key)
            .map(|v| match v {
                "true" => Ok(true),
                "false" => Ok(false),
                _ => Err(Error::Config(format!(
                    "key `{key}`: expected true or false, got `{v}`"
                ))),
            })
            .transpose()
    }

    fn get_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .split(',')
                .map(|tok| self.parse_f64(key, tok.trim()))
                .collect::<Result<Vec<f64>>>()
                .map(Some),
        }
    }

    /// Steps per episode / lattice steps; defaults to 4.
    pub fn steps(&self) -> Result<usize> {
        Ok(self.get_usize("steps")?.unwrap_or(4))
    }

    /// Step length; defaults to `1 / steps`.
    pub fn dt(&self) -> Result<f64> {
        match self.get_f64("dt")? {
            Some(dt) if dt > 0.0 => Ok(dt),
            Some(dt) => Err(Error::Config(format!("dt = {dt} must be > 0"))),
            None => Ok(1.0 / self.steps()? as f64),
        }
    }

    /// Model parameters from explicit `k_d`/`k_u` lists or from `sigma`
    /// (single value or list) via `k = 1 -/+ sigma sqrt(dt)`.
    pub fn model_params(&self) -> Result<IntervalModelParams> {
        let s0 = self
            .get_f64("s0")?
            .ok_or_else(|| Error::Config("missing key `s0`".to_string()))?;
        let dt = self.dt()?;
        match (self.get_list("k_d")?, self.get_list("k_u")?) {
            (Some(k_down), Some(k_up)) => IntervalModelParams::new(k_down, k_up, s0, dt),
            (None, None) => {
                let sigmas = self.get_list("sigma")?.ok_or_else(|| {
                    Error::Config("need either k_d and k_u, or sigma".to_string())
                })?;
                let sigmas = if sigmas.len() == 1 {
                    vec![sigmas[0]; self.steps()?]
                } else {
                    sigmas
                };
                IntervalModelParams::symmetric(&sigmas, s0, dt)
            }
            _ => Err(Error::Config(
                "k_d and k_u must be given together".to_string(),
            )),
        }
    }

    pub fn payoff(&self) -> Result<PiecewisePayoff> {
        PiecewisePayoff::parse(self.require("payoff")?)
    }

    pub fn window_config(&self) -> Result<WindowConfig> {
        let steps = self.steps()?;
        Ok(WindowConfig {
            window_episodes: self.get_usize("window")?.unwrap_or(52),
            steps_per_episode: steps,
            dt: self.dt()?,
            pooled: self.get_bool("pooled")?.unwrap_or(false),
        })
    }

    pub fn strike_rule(&self) -> Result<StrikeRule> {
        match self.require("strike")? {
            "atm" => Ok(StrikeRule::AtTheMoney),
            v => Ok(StrikeRule::Fixed(self.parse_f64("strike", v)?)),
        }
    }

    pub fn estimator(&self) -> Result<EstimatorKind> {
        match self.get("estimator") {
            None | Some("symmetric") => Ok(EstimatorKind::Symmetric),
            Some("asymmetric") => Ok(EstimatorKind::Asymmetric),
            Some(v) => Err(Error::Config(format!(
                "estimator must be symmetric or asymmetric, got `{v}`"
            ))),
        }
    }

    pub fn jobs(&self) -> Result<usize> {
        Ok(self.get_usize("jobs")?.unwrap_or(1).max(1))
    }
}
