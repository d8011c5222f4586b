//! Campaign report schema: JSON for archival, CSV for plotting. Reports are
//! byte-stable functions of the configuration.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scaling::PowerLawFit;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub scale: f64,
    pub value: f64,
    pub stderr: f64,
    /// Successful samples behind this point.
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedPoint {
    pub scale: f64,
    pub value: f64,
}

/// Ratio-stability check used for the logarithmic (critical) laws where a
/// power fit would be meaningless.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioCheck {
    pub law: String,
    /// `(scale, measured / law)` pairs.
    pub ratios: Vec<(f64, f64)>,
    /// Largest relative deviation of a ratio from the mean ratio.
    pub max_rel_dev: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleFailure {
    pub index: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub schema_version: u32,
    pub campaign: String,
    pub config_hash: String,
    pub series: Vec<SeriesPoint>,
    /// Secondary series (e.g. the Monte-Carlo counterpart of an exact curve).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub secondary_series: Vec<SeriesPoint>,
    pub fit: Option<PowerLawFit>,
    pub predicted_exponent: Option<f64>,
    pub predicted: Vec<PredictedPoint>,
    pub ratio_check: Option<RatioCheck>,
    /// Set when the statistic is identically zero (e.g. a deterministic
    /// medium) and no fit is meaningful.
    pub degenerate: bool,
    pub failures: Vec<SampleFailure>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ScalingReport {
    pub fn new(campaign: &str, config_hash: &str) -> Self {
        ScalingReport {
            schema_version: REPORT_SCHEMA_VERSION,
            campaign: campaign.to_string(),
            config_hash: config_hash.to_string(),
            series: Vec::new(),
            secondary_series: Vec::new(),
            fit: None,
            predicted_exponent: None,
            predicted: Vec::new(),
            ratio_check: None,
            degenerate: false,
            failures: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialize(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::ParseError(e.to_string()))
    }

    /// Main panel as CSV: measured series with error bars plus the predicted
    /// law and the fit line sampled at the same scales.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scale,value,stderr,n,predicted,fit\n");
        for p in &self.series {
            let predicted = self
                .predicted
                .iter()
                .find(|q| q.scale == p.scale)
                .map(|q| q.value);
            let fit = self
                .fit
                .map(|f| (f.intercept + f.exponent * p.scale.ln()).exp());
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                p.scale,
                p.value,
                p.stderr,
                p.n,
                predicted.map_or(String::new(), |v| v.to_string()),
                fit.map_or(String::new(), |v| v.to_string()),
            ));
        }
        out
    }

    /// Secondary panel (empty string when absent).
    pub fn secondary_csv(&self) -> Option<String> {
        if self.secondary_series.is_empty() {
            return None;
        }
        let mut out = String::from("scale,value,stderr,n\n");
        for p in &self.secondary_series {
            out.push_str(&format!(
                "{},{},{},{}\n",
                p.scale, p.value, p.stderr, p.n
            ));
        }
        Some(out)
    }
}

/// Ratio-stability statistic: `max_i |ratio_i - mean| / mean`.
pub fn ratio_stability(scales: &[f64], values: &[f64], law: impl Fn(f64) -> f64) -> RatioCheck {
    let ratios: Vec<(f64, f64)> = scales
        .iter()
        .zip(values)
        .map(|(&s, &v)| (s, v / law(s)))
        .collect();
    let mean = ratios.iter().map(|(_, r)| r).sum::<f64>() / ratios.len().max(1) as f64;
    let max_rel_dev = ratios
        .iter()
        .map(|(_, r)| ((r - mean) / mean).abs())
        .fold(0.0, f64::max);
    RatioCheck {
        law: String::new(),
        ratios,
        max_rel_dev,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_roundtrip_is_lossless() {
        let mut r = ScalingReport::new("growth", "deadbeef");
        r.series.push(SeriesPoint {
            scale: 8.0,
            value: 1.5,
            stderr: 0.1,
            n: 32,
        });
        r.predicted.push(PredictedPoint {
            scale: 8.0,
            value: 3.0,
        });
        let text = r.to_json().unwrap();
        let back = ScalingReport::from_json(&text).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn csv_contains_full_precision_values() {
        let mut r = ScalingReport::new("avg-decay", "0");
        let v = 0.123456789012345678;
        r.series.push(SeriesPoint {
            scale: 8.0,
            value: v,
            stderr: 0.0,
            n: 4,
        });
        let csv = r.to_csv();
        let field: f64 = csv.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(field, v);
    }

    #[test]
    fn empty_series_yields_header_only() {
        let r = ScalingReport::new("growth", "0");
        assert_eq!(r.to_csv(), "scale,value,stderr,n,predicted,fit\n");
    }

    #[test]
    fn ratio_stability_flags_spread() {
        let check = ratio_stability(&[8.0, 16.0], &[2.0, 4.0], |_| 1.0);
        assert!((check.max_rel_dev - 1.0 / 3.0).abs() < 1e-12);
    }
}
