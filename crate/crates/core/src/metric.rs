//! Vector dissimilarities used for ranking.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::CompareError;
use crate::pipeline::FeatureVector;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// City-block.
    L1,
    /// Euclidean.
    #[default]
    L2,
    Canberra,
    #[serde(rename = "chi2")]
    ChiSquare,
}

impl Metric {
    pub const ALL: [Metric; 4] = [Metric::L1, Metric::L2, Metric::Canberra, Metric::ChiSquare];

    pub fn name(self) -> &'static str {
        match self {
            Metric::L1 => "l1",
            Metric::L2 => "l2",
            Metric::Canberra => "canberra",
            Metric::ChiSquare => "chi2",
        }
    }

    /// Distance between raw slices of equal length. Sums run in `f64`.
    ///
    /// Canberra and chi-square terms whose denominator is zero contribute 0.
    pub fn eval(self, a: &[f32], b: &[f32]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        let pairs = a.iter().zip(b).map(|(&x, &y)| (x as f64, y as f64));
        match self {
            Metric::L1 => pairs.map(|(x, y)| (x - y).abs()).sum(),
            Metric::L2 => pairs.map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Canberra => pairs
                .map(|(x, y)| {
                    let den = x.abs() + y.abs();
                    if den == 0.0 {
                        0.0
                    } else {
                        (x - y).abs() / den
                    }
                })
                .sum(),
            Metric::ChiSquare => pairs
                .map(|(x, y)| {
                    let den = x + y;
                    if den == 0.0 {
                        0.0
                    } else {
                        (x - y) * (x - y) / den
                    }
                })
                .sum(),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" | "manhattan" | "cityblock" => Ok(Metric::L1),
            "l2" | "euclidean" => Ok(Metric::L2),
            "canberra" => Ok(Metric::Canberra),
            "chi2" | "chisquare" | "chi-square" => Ok(Metric::ChiSquare),
            other => Err(format!("unknown metric `{other}` (l1, l2, canberra, chi2)")),
        }
    }
}

pub(crate) fn check_comparable(a: &FeatureVector, b: &FeatureVector) -> Result<(), CompareError> {
    if a.fingerprint != b.fingerprint {
        return Err(CompareError::Fingerprint {
            expected: a.fingerprint,
            found: b.fingerprint,
        });
    }
    if a.dim() != b.dim() {
        return Err(CompareError::Dim(a.dim(), b.dim()));
    }
    Ok(())
}

/// Distance between two descriptors made under the same configuration.
pub fn distance(a: &FeatureVector, b: &FeatureVector, metric: Metric) -> Result<f64, CompareError> {
    check_comparable(a, b)?;
    Ok(metric.eval(&a.values, &b.values))
}
