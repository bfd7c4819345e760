//! Service configuration.

use std::path::{Path, PathBuf};

use kbqa_core::active::ActiveConfig;
use kbqa_core::engine::{EngineConfig, DEFAULT_MAX_TOP};
use kbqa_core::Engine;
use serde::{Deserialize, Serialize};

use crate::io::{self, DataError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields, default)]
pub struct ServiceConfig {
    pub listen_address: String,
    pub data_directory: PathBuf,
    pub no_answer_threshold: f64,
    pub chitchat_margin: f64,
    pub disagreement_margin: f64,
    pub score_band: f64,
    pub dbscan_eps: f64,
    pub dbscan_min_pts: usize,
    /// `None` uses the model built into the binary.
    pub default_model_path: Option<PathBuf>,
    pub max_top: usize,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        let e = EngineConfig::default();
        Self {
            listen_address: "127.0.0.1:8080".into(),
            data_directory: PathBuf::from("kbqa-data"),
            no_answer_threshold: e.no_answer_threshold,
            chitchat_margin: e.chitchat_margin,
            disagreement_margin: e.active.disagreement_margin,
            score_band: e.active.score_band,
            dbscan_eps: e.active.dbscan_eps,
            dbscan_min_pts: e.active.dbscan_min_pts,
            default_model_path: None,
            max_top: DEFAULT_MAX_TOP,
        }
    }
}

impl ServiceConfig {
    pub fn load(path: &Path) -> Result<Self, DataError> {
        let cfg: Self = serde_json::from_str(&io::read_file(path)?).map_err(|source| DataError::Json {
            what: path.display().to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let mut v = Vec::new();
        let unit = |name: &str, x: f64, v: &mut Vec<String>| {
            if !(0.0..=1.0).contains(&x) {
                v.push(format!("{name} {x} is outside [0, 1]"));
            }
        };
        unit("noAnswerThreshold", self.no_answer_threshold, &mut v);
        unit("chitchatMargin", self.chitchat_margin, &mut v);
        unit("disagreementMargin", self.disagreement_margin, &mut v);
        unit("scoreBand", self.score_band, &mut v);
        if !(self.dbscan_eps > 0.0 && self.dbscan_eps <= 2.0) {
            v.push(format!("dbscanEps {} is outside (0, 2]", self.dbscan_eps));
        }
        if self.dbscan_min_pts == 0 {
            v.push("dbscanMinPts must be at least 1".into());
        }
        if !(1..=100).contains(&self.max_top) {
            v.push(format!("maxTop {} is outside [1, 100]", self.max_top));
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(DataError::Other(format!("invalid config: {}", v.join("; "))))
        }
    }

    pub fn engine_config(&self) -> EngineConfig {
        EngineConfig {
            no_answer_threshold: self.no_answer_threshold,
            chitchat_margin: self.chitchat_margin,
            max_top: self.max_top,
            active: ActiveConfig {
                disagreement_margin: self.disagreement_margin,
                score_band: self.score_band,
                dbscan_eps: self.dbscan_eps,
                dbscan_min_pts: self.dbscan_min_pts,
            },
        }
    }

    pub fn engine(&self) -> Result<Engine, DataError> {
        let model = match &self.default_model_path {
            Some(p) => io::parse_model(&io::read_file(p)?)?,
            None => io::default_model(),
        };
        Ok(io::engine_with(model, self.engine_config()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_ranges_are_checked() {
        ServiceConfig::default().validate().unwrap();
        let bad = ServiceConfig {
            no_answer_threshold: 1.5,
            max_top: 0,
            ..Default::default()
        };
        let e = bad.validate().unwrap_err().to_string();
        assert!(e.contains("noAnswerThreshold") && e.contains("maxTop"), "{e}");
    }

    #[test]
    fn partial_json_fills_defaults() {
        let c: ServiceConfig = serde_json::from_str(r#"{"maxTop": 5}"#).unwrap();
        assert_eq!(c.max_top, 5);
        assert_eq!(c.dbscan_min_pts, 2);
        assert!(serde_json::from_str::<ServiceConfig>(r#"{"maxtop": 5}"#).is_err());
    }
}
