use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::SystemConfig;
use crate::subproblems::Baseline;

/// Scenario parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParam {
    PowerDbm,
    NRisElements,
    NBsAntennas,
    NCommUsers,
    BeampatternRatioDb,
    NSenseTargets,
}

impl SweepParam {
    pub const ALL: [SweepParam; 6] = [
        SweepParam::PowerDbm,
        SweepParam::NRisElements,
        SweepParam::NBsAntennas,
        SweepParam::NCommUsers,
        SweepParam::BeampatternRatioDb,
        SweepParam::NSenseTargets,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParam::PowerDbm => "power_dbm",
            SweepParam::NRisElements => "n_ris_elements",
            SweepParam::NBsAntennas => "n_bs_antennas",
            SweepParam::NCommUsers => "n_comm_users",
            SweepParam::BeampatternRatioDb => "beampattern_ratio_db",
            SweepParam::NSenseTargets => "n_sense_targets",
        }
    }

    /// Writes `value` into `config`. Counts must be positive whole numbers.
    pub fn apply(self, config: &mut SystemConfig, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::InvalidConfig(format!("{self} value must be finite, got {value}")));
        }
        let count = || -> Result<usize> {
            if value >= 1.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(Error::InvalidConfig(format!("{self} must be a positive integer, got {value}")))
            }
        };
        match self {
            SweepParam::PowerDbm => config.power_budget_dbm = value,
            SweepParam::NRisElements => config.n_ris_elements = count()?,
            SweepParam::NBsAntennas => config.n_bs_antennas = count()?,
            SweepParam::NCommUsers => config.n_comm_users = count()?,
            SweepParam::BeampatternRatioDb => config.beampattern_ratio_db = vec![value],
            SweepParam::NSenseTargets => config.set_sense_targets(count()?),
        }
        Ok(())
    }
}

impl fmt::Display for SweepParam {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParam {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::Unknown { kind: "sweep parameter", name: s.to_string() })
    }
}

/// Secondary axis: the whole value sweep is repeated for each series value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Series {
    pub param: SweepParam,
    pub values: Vec<f64>,
}

/// Location statistic reported in the `mean_omega` column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    #[default]
    Mean,
    /// Median, with the normal-theory standard error `1.2533 s / sqrt(n)`.
    Median,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Stem of every output file.
    pub name: String,
    /// Fields left out take their `SystemConfig::paper_default` values.
    #[serde(default)]
    pub base: SystemConfig,
    pub param: SweepParam,
    pub values: Vec<f64>,
    #[serde(default)]
    pub series: Option<Series>,
    pub baselines: Vec<Baseline>,
    /// Channel realizations per point; run `i` uses the same seed at every
    /// point so comparisons are paired.
    pub runs: usize,
    #[serde(default = "default_master_seed")]
    pub master_seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    #[serde(default)]
    pub statistic: Statistic,
    /// Reuse the user placement of run 0 for every run.
    #[serde(default)]
    pub freeze_geometry: bool,
    /// Also emit the per-iteration convergence table.
    #[serde(default)]
    pub write_trace: bool,
}

fn default_master_seed() -> u64 {
    SystemConfig::paper_default().master_seed
}

/// One configuration of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    /// Value of the CSV `param` column: the swept parameter, suffixed with
    /// `@name=value` when a series axis is present.
    pub label: String,
    pub value: f64,
    pub config: SystemConfig,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(format!("sweep `{}`: {msg}", self.name)));
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return bad("name must be a nonempty file stem");
        }
        if self.values.is_empty() {
            return bad("value list is empty");
        }
        if self.baselines.is_empty() {
            return bad("baseline list is empty");
        }
        if self.runs == 0 {
            return bad("runs must be >= 1");
        }
        if let Some(s) = &self.series {
            if s.values.is_empty() {
                return bad("series value list is empty");
            }
            if s.param == self.param {
                return bad("series parameter repeats the swept parameter");
            }
        }
        self.points().map(|_| ())
    }

    /// Every (series value, swept value) configuration, series-major.
    pub fn points(&self) -> Result<Vec<SweepPoint>> {
        let series: Vec<Option<f64>> = match &self.series {
            Some(s) => s.values.iter().copied().map(Some).collect(),
            None => vec![None],
        };
        let mut out = Vec::with_capacity(series.len() * self.values.len());
        for s in series {
            let mut base = self.base.clone();
            let mut label = self.param.name().to_string();
            if let (Some(v), Some(axis)) = (s, &self.series) {
                axis.param.apply(&mut base, v)?;
                label = format!("{label}@{}={}", axis.param, v);
            }
            for &value in &self.values {
                let mut config = base.clone();
                self.param.apply(&mut config, value)?;
                config.validate()?;
                out.push(SweepPoint { label: label.clone(), value, config });
            }
        }
        Ok(out)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }
}
