use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Output-space norm used for the discrepancy between two networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum NormKind {
    #[default]
    #[serde(rename = "inf")]
    Linf,
    #[serde(rename = "l2")]
    L2,
}

impl NormKind {
    pub fn of(self, v: &[f64]) -> f64 {
        match self {
            NormKind::Linf => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            NormKind::L2 => v.iter().map(|x| x * x).sum::<f64>().sqrt(),
        }
    }

    /// Dual norm: L1 for Linf, L2 for L2.
    pub fn dual_of(self, v: &[f64]) -> f64 {
        match self {
            NormKind::Linf => v.iter().map(|x| x.abs()).sum(),
            NormKind::L2 => NormKind::L2.of(v),
        }
    }

    /// Largest norm over the box `[lower, upper]`.
    pub fn sup_over_box(self, lower: &[f64], upper: &[f64]) -> f64 {
        let extremes: Vec<f64> = lower
            .iter()
            .zip(upper)
            .map(|(l, u)| l.abs().max(u.abs()))
            .collect();
        self.of(&extremes)
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            NormKind::Linf => "inf",
            NormKind::L2 => "l2",
        })
    }
}

impl FromStr for NormKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "inf" | "linf" => Ok(NormKind::Linf),
            "l2" | "2" => Ok(NormKind::L2),
            other => Err(Error::InvalidArgument(format!("unknown norm `{other}`"))),
        }
    }
}
