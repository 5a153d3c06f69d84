use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scenario::SystemConfig;
use crate::subproblems::Baseline;

use super::sweep::{Series, Statistic, SweepParam, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Figure {
    /// Convergence traces at the default operating point.
    Fig2,
    /// Power budget.
    Fig3a,
    /// Surface size.
    Fig3b,
    /// BS antennas, one series per user count.
    Fig3c,
    /// Beampattern ratio, one series per target count.
    Fig3d,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// N_B = 4, N_S = 8, two users, two targets, 20 runs.
    Desk,
    /// The published operating point with 200 runs.
    Paper,
}

impl Figure {
    pub const ALL: [Figure; 5] = [Figure::Fig2, Figure::Fig3a, Figure::Fig3b, Figure::Fig3c, Figure::Fig3d];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3a => "fig3a",
            Figure::Fig3b => "fig3b",
            Figure::Fig3c => "fig3c",
            Figure::Fig3d => "fig3d",
        }
    }
}

impl Scale {
    pub fn name(self) -> &'static str {
        match self {
            Scale::Desk => "desk",
            Scale::Paper => "paper",
        }
    }

    pub fn base(self) -> SystemConfig {
        match self {
            Scale::Desk => SystemConfig::desk(),
            Scale::Paper => SystemConfig::paper_default(),
        }
    }

    pub fn runs(self) -> usize {
        match self {
            Scale::Desk => 20,
            Scale::Paper => 200,
        }
    }
}

macro_rules! named_enum {
    ($ty:ty, $kind:literal, $($v:expr),+) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.name())
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                [$($v),+]
                    .into_iter()
                    .find(|x: &$ty| x.name() == s)
                    .ok_or_else(|| Error::Unknown { kind: $kind, name: s.to_string() })
            }
        }
    };
}

named_enum!(Figure, "figure", Figure::Fig2, Figure::Fig3a, Figure::Fig3b, Figure::Fig3c, Figure::Fig3d);
named_enum!(Scale, "scale", Scale::Desk, Scale::Paper);

const CONVERGENCE_BASELINES: [Baseline; 4] =
    [Baseline::RsmaStarOpt, Baseline::RsmaRisConv, Baseline::RsmaStarRand, Baseline::SdmaStarOpt];
const ACCESS_BASELINES: [Baseline; 2] = [Baseline::RsmaStarOpt, Baseline::SdmaStarOpt];

/// Sweep grids per figure. Both scales share the axes; only the user-count
/// series of fig3c shrinks at desk scale so it brackets the desk default.
pub fn figure_protocols(figure: Figure, scale: Scale) -> SweepSpec {
    let base = scale.base();
    let spec = |param, values: &[f64], baselines: &[Baseline]| SweepSpec {
        name: figure.name().to_string(),
        master_seed: base.master_seed,
        base: base.clone(),
        param,
        values: values.to_vec(),
        series: None,
        baselines: baselines.to_vec(),
        runs: scale.runs(),
        out_dir: None,
        statistic: Statistic::Mean,
        freeze_geometry: false,
        write_trace: false,
    };
    match figure {
        Figure::Fig2 => SweepSpec {
            write_trace: true,
            ..spec(SweepParam::PowerDbm, &[base.power_budget_dbm], &CONVERGENCE_BASELINES)
        },
        Figure::Fig3a => spec(SweepParam::PowerDbm, &[10.0, 15.0, 20.0, 25.0, 30.0], &Baseline::ALL),
        Figure::Fig3b => spec(SweepParam::NRisElements, &[4.0, 8.0, 16.0, 32.0], &Baseline::ALL),
        Figure::Fig3c => {
            let users: &[f64] = match scale {
                Scale::Desk => &[2.0, 4.0],
                Scale::Paper => &[4.0, 6.0],
            };
            SweepSpec {
                series: Some(Series { param: SweepParam::NCommUsers, values: users.to_vec() }),
                ..spec(SweepParam::NBsAntennas, &[4.0, 6.0, 8.0, 10.0], &ACCESS_BASELINES)
            }
        }
        Figure::Fig3d => SweepSpec {
            series: Some(Series { param: SweepParam::NSenseTargets, values: vec![2.0, 3.0] }),
            ..spec(SweepParam::BeampatternRatioDb, &[-3.0, -2.0, -1.0, -0.5, -0.3], &ACCESS_BASELINES)
        },
    }
}
