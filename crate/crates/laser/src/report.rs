//! Flat JSON report emitted for every estimate.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub method: String,
    pub tau_hat: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_true: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mape: Option<f64>,
    pub seed: u64,
    pub config_digest: String,
    /// Per-epoch total training loss, present for methods that train a model.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub loss_trace: Option<Vec<f64>>,
}

impl EstimateReport {
    pub fn new(method: &str, tau_hat: f64, seed: u64) -> Self {
        EstimateReport {
            method: method.to_string(),
            tau_hat,
            tau_true: None,
            mape: None,
            seed,
            config_digest: String::new(),
            loss_trace: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization cannot fail")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut text = self.to_json();
        text.push('\n');
        std::fs::write(path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(path.display().to_string(), e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::parse(path.display().to_string(), e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_round_trip() {
        let mut r = EstimateReport::new("laser", 3.25, 4);
        r.tau_true = Some(3.0);
        r.mape = Some(0.08333333333333333);
        r.config_digest = "abc123".into();
        r.loss_trace = Some(vec![2.0, 1.5, 1.25]);
        let parsed: EstimateReport = serde_json::from_str(&r.to_json()).unwrap();
        assert_eq!(parsed, r);
    }

    #[test]
    fn optional_fields_omitted() {
        let r = EstimateReport::new("bd-linear", 1.0, 0);
        let json = r.to_json();
        assert!(!json.contains("tau_true"));
        assert!(!json.contains("mape"));
        assert!(!json.contains("loss_trace"));
    }
}
