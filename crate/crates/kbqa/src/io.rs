//! File formats: the KB interchange document, label files, models and the
//! bundled chit-chat corpus.

use std::path::{Path, PathBuf};

use kbqa_core::bundled;
use kbqa_core::chitchat::{ChitChatCorpus, ChitChatIndex};
use kbqa_core::engine::{bundled_global_idf, EngineConfig};
use kbqa_core::kb::validate_kb;
use kbqa_core::{Analyzer, Engine, GbdtModel, KnowledgeBase, Persona, QaId, QaPair};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The model shipped with the binary, produced by `kbqa gen-model`.
pub const DEFAULT_MODEL: &str = include_str!("../data/default-model.json");

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{what}: {source}")]
    Json {
        what: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("labels line {line}: {message}")]
    Labels { line: usize, message: String },
    #[error("invalid knowledge base: {}", .0.join("; "))]
    Invalid(Vec<String>),
    #[error("{0}")]
    Other(String),
}

pub fn read_file(path: &Path) -> Result<String, DataError> {
    std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// KB interchange document. Field order here is the serialized order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct KbFile {
    pub kb_id: String,
    pub name: String,
    pub persona: Persona,
    #[serde(default)]
    pub synonyms: Vec<Vec<String>>,
    pub qa_pairs: Vec<QaPair>,
}

impl KbFile {
    pub fn from_kb(kb: &KnowledgeBase) -> Self {
        Self {
            kb_id: kb.kb_id.clone(),
            name: kb.name.clone(),
            persona: kb.persona,
            synonyms: kb.synonyms.clone(),
            qa_pairs: kb.qa_pairs().to_vec(),
        }
    }

    /// Builds and validates the snapshot.
    pub fn into_kb(self, analyzer: &Analyzer) -> Result<KnowledgeBase, DataError> {
        let kb = KnowledgeBase::new(self.kb_id, self.name, self.persona, self.synonyms, self.qa_pairs, analyzer);
        let v = validate_kb(&kb);
        if v.is_empty() {
            Ok(kb)
        } else {
            Err(DataError::Invalid(v))
        }
    }
}

pub fn parse_kb(src: &str) -> Result<KbFile, DataError> {
    serde_json::from_str(src).map_err(|source| DataError::Json {
        what: "knowledge base".into(),
        source,
    })
}

/// Canonical form: two-space indented JSON with a trailing newline.
pub fn serialize_kb(kb: &KbFile) -> String {
    let mut s = serde_json::to_string_pretty(kb).expect("KB serializes");
    s.push('\n');
    s
}

pub fn load_kb(path: &Path, analyzer: &Analyzer) -> Result<KnowledgeBase, DataError> {
    parse_kb(&read_file(path)?)?.into_kb(analyzer)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LabelRow {
    pub query: String,
    pub qa_id: QaId,
    pub label: bool,
}

/// `query TAB qaId TAB 0|1` per line. Blank lines are skipped.
pub fn parse_labels(src: &str) -> Result<Vec<LabelRow>, DataError> {
    let mut rows = Vec::new();
    for (i, line) in src.lines().enumerate() {
        let line_no = i + 1;
        let err = |message: String| DataError::Labels { line: line_no, message };
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.trim_end_matches('\r').split('\t').collect();
        if fields.len() != 3 {
            return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
        }
        let query = fields[0].trim();
        if query.is_empty() {
            return Err(err("empty query".into()));
        }
        let qa_id = fields[1]
            .trim()
            .parse::<QaId>()
            .map_err(|_| err(format!("qaId {:?} is not a positive integer", fields[1])))?;
        let label = match fields[2].trim() {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("label {other:?} is not 0 or 1"))),
        };
        rows.push(LabelRow {
            query: query.to_string(),
            qa_id,
            label,
        });
    }
    Ok(rows)
}

pub fn parse_model(src: &str) -> Result<GbdtModel, DataError> {
    let model: GbdtModel = serde_json::from_str(src).map_err(|source| DataError::Json {
        what: "model".into(),
        source,
    })?;
    model.validate().map_err(|e| DataError::Other(format!("model: {e}")))?;
    Ok(model)
}

pub fn default_model() -> GbdtModel {
    parse_model(DEFAULT_MODEL).expect("bundled model is valid")
}

pub fn serialize_model(model: &GbdtModel) -> String {
    let mut s = serde_json::to_string_pretty(model).expect("model serializes");
    s.push('\n');
    s
}

pub fn bundled_corpus() -> ChitChatCorpus {
    serde_json::from_str(bundled::CHITCHAT_CORPUS).expect("bundled chit-chat corpus parses")
}

pub fn bundled_chitchat(analyzer: &Analyzer) -> ChitChatIndex {
    ChitChatIndex::new(bundled_corpus(), analyzer, bundled_global_idf()).expect("bundled chit-chat corpus is valid")
}

/// Engine over every bundled resource and the given model.
pub fn engine_with(model: GbdtModel, config: EngineConfig) -> Engine {
    let chitchat = bundled_chitchat(&Analyzer::bundled());
    Engine::bundled(model, chitchat, config)
}

pub fn default_engine() -> Engine {
    engine_with(default_model(), EngineConfig::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn label_errors_carry_line_numbers() {
        let e = parse_labels("a\t1\t1\n\nb\t2\n").unwrap_err();
        assert_eq!(e.to_string(), "labels line 3: expected 3 tab-separated fields, found 2");
        let e = parse_labels("a\tx\t1").unwrap_err();
        assert!(e.to_string().starts_with("labels line 1: qaId"));
        let e = parse_labels("a\t1\t2").unwrap_err();
        assert!(e.to_string().contains("not 0 or 1"));
    }

    #[test]
    fn unknown_kb_field_is_named() {
        let src = r#"{"kbId":"k","name":"n","persona":"none","synonyms":[],"qaPairs":[],"colour":1}"#;
        let e = parse_kb(src).unwrap_err().to_string();
        assert!(e.contains("colour"), "{e}");
        let src = r#"{"kbId":"k","name":"n","persona":"none","synonyms":[],"qaPairs":[{"id":1,"question":"q","answer":"a","extra":true}]}"#;
        assert!(parse_kb(src).unwrap_err().to_string().contains("extra"));
    }

    #[test]
    fn bundled_resources_load() {
        assert!(bundled_corpus().intents.len() >= kbqa_core::chitchat::MIN_BUNDLED_INTENTS);
        default_model();
    }
}
