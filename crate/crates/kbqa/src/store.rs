//! On-disk KB store with per-KB single writers and atomic snapshot swaps.
//!
//! Layout: one directory per KB under the data directory holding
//! `kb.json` (canonical interchange file), `revision`, `suggestions.jsonl`
//! (append-only; later records supersede earlier ones with the same id) and
//! an optional `model-overlay.json`.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use kbqa_core::active::{
    apply_decision, cluster_suggestions, feedback_suggestion, ActiveError, Decision, FeedbackRecord, Origin, Status,
    Suggestion,
};
use kbqa_core::chitchat::DomainDecision;
use kbqa_core::engine::{AnswerOptions, EngineError};
use kbqa_core::extract::{extract_batch, ExtractError, ExtractWarning, SourceDocument, SourceFormat};
use kbqa_core::kb::validate_kb;
use kbqa_core::{AnswerKind, Engine, GbdtModel, KbSnapshot, KnowledgeBase, Persona, QaId, QaPair, QueryContext, RankedAnswer};
use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

use crate::io::{self, DataError, KbFile};

const KB_FILE: &str = "kb.json";
const REVISION_FILE: &str = "revision";
const SUGGESTIONS_FILE: &str = "suggestions.jsonl";
const OVERLAY_FILE: &str = "model-overlay.json";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("knowledge base {0} not found")]
    UnknownKb(String),
    #[error("revision conflict: expected {expected}, current {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("a knowledge base named {0:?} already exists")]
    DuplicateName(String),
    #[error("knowledge base {0} already exists")]
    DuplicateId(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("invalid knowledge base")]
    Invalid(Vec<String>),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Active(#[from] ActiveError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Writes `bytes` to `path` through a synced temporary file and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension("tmp");
    let mut f = File::create(&tmp).map_err(io_err(&tmp))?;
    f.write_all(bytes).map_err(io_err(&tmp))?;
    f.sync_all().map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))?;
    if let Some(dir) = path.parent() {
        // Persist the rename itself; not every platform can open directories.
        if let Ok(d) = File::open(dir) {
            let _ = d.sync_all();
        }
    }
    Ok(())
}

fn now_millis() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

/// Source document in a create request. The format is taken from `format`
/// or else from the name's extension.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SourceFile {
    pub name: String,
    #[serde(default)]
    pub format: Option<SourceFormat>,
    pub content: String,
}

/// A QA supplied by the client; the service assigns its id.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct NewQa {
    pub question: String,
    pub answer: String,
    #[serde(default)]
    pub alternate_questions: Vec<String>,
    #[serde(default)]
    pub parent_id: Option<QaId>,
    #[serde(default)]
    pub source: Option<String>,
    #[serde(default)]
    pub metadata: Vec<(String, String)>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct CreateKb {
    pub name: String,
    #[serde(default)]
    pub sources: Vec<SourceFile>,
    #[serde(default)]
    pub qa_pairs: Vec<NewQa>,
    #[serde(default)]
    pub persona: Persona,
    #[serde(default)]
    pub synonyms: Vec<Vec<String>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Created {
    pub kb_id: String,
    pub revision: u64,
    pub qa_count: usize,
    pub warnings: Vec<ExtractWarning>,
}

/// Distinguishes an absent field from an explicit `null`.
fn present<'de, D, T>(d: D) -> Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct QaEdit {
    pub id: QaId,
    #[serde(default)]
    pub question: Option<String>,
    #[serde(default)]
    pub answer: Option<String>,
    #[serde(default)]
    pub alternate_questions: Option<Vec<String>>,
    /// `null` clears the parent.
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub parent_id: Option<Option<QaId>>,
    #[serde(default)]
    pub metadata: Option<Vec<(String, String)>>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct KbPatch {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub persona: Option<Persona>,
    #[serde(default)]
    pub synonyms: Option<Vec<Vec<String>>>,
    #[serde(default)]
    pub add: Vec<NewQa>,
    #[serde(default)]
    pub edit: Vec<QaEdit>,
    #[serde(default)]
    pub delete: Vec<QaId>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AnswerRequest {
    pub question: String,
    #[serde(default)]
    pub top: Option<usize>,
    #[serde(default)]
    pub context: Option<QueryContext>,
    #[serde(default)]
    pub score_threshold: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct AnswerResponse {
    pub kind: AnswerKind,
    pub answers: Vec<RankedAnswer>,
    /// Set when this query produced an active-learning suggestion.
    pub active_learning_enabled: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainDecision>,
    pub revision: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KbSummary {
    pub kb_id: String,
    pub name: String,
    pub persona: Persona,
    pub revision: u64,
    pub qa_count: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct KbDocument {
    pub revision: u64,
    pub kb: KbFile,
}

/// Contents of the `revision` file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct RevisionFile {
    revision: u64,
    /// Ids are never reused, even after deletes.
    next_qa_id: QaId,
}

/// One committed state of a KB. Never mutated; replaced whole.
#[derive(Debug)]
pub struct KbState {
    pub revision: u64,
    pub next_qa_id: QaId,
    pub snapshot: Arc<KbSnapshot>,
    pub engine: Arc<Engine>,
    /// The exact bytes of `kb.json`.
    pub kb_json: Arc<String>,
}

impl KbState {
    pub fn kb(&self) -> &KnowledgeBase {
        self.snapshot.kb()
    }
}

#[derive(Debug)]
struct KbHandle {
    dir: PathBuf,
    writer: Mutex<()>,
    state: RwLock<Arc<KbState>>,
    /// Latest record per suggestion, in first-seen order.
    suggestions: Mutex<Vec<Suggestion>>,
}

impl KbHandle {
    fn current(&self) -> Arc<KbState> {
        self.state.read().expect("state lock").clone()
    }

    fn swap(&self, next: KbState) -> Arc<KbState> {
        let next = Arc::new(next);
        *self.state.write().expect("state lock") = next.clone();
        next
    }

    fn append_suggestions(&self, list: &mut Vec<Suggestion>, records: &[Suggestion]) -> Result<(), StoreError> {
        let path = self.dir.join(SUGGESTIONS_FILE);
        let mut f = OpenOptions::new().create(true).append(true).open(&path).map_err(io_err(&path))?;
        let mut buf = String::new();
        for r in records {
            buf.push_str(&serde_json::to_string(r).expect("suggestion serializes"));
            buf.push('\n');
        }
        f.write_all(buf.as_bytes()).map_err(io_err(&path))?;
        f.sync_data().map_err(io_err(&path))?;
        for r in records {
            match list.iter_mut().find(|s| s.suggestion_id == r.suggestion_id) {
                Some(s) => *s = r.clone(),
                None => list.push(r.clone()),
            }
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    base: Arc<Engine>,
    kbs: RwLock<BTreeMap<String, Arc<KbHandle>>>,
    /// Serializes KB creation and deletion (name uniqueness).
    registry: Mutex<()>,
}

fn valid_kb_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn read_suggestions(path: &Path) -> Result<Vec<Suggestion>, StoreError> {
    let mut out: Vec<Suggestion> = Vec::new();
    let src = match fs::read_to_string(path) {
        Ok(s) => s,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(io_err(path)(e)),
    };
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let s: Suggestion = serde_json::from_str(line).map_err(|source| DataError::Json {
            what: format!("{} line {}", path.display(), i + 1),
            source,
        })?;
        match out.iter_mut().find(|x| x.suggestion_id == s.suggestion_id) {
            Some(x) => *x = s,
            None => out.push(s),
        }
    }
    Ok(out)
}

impl Store {
    /// Opens (creating if needed) the data directory and loads every KB.
    pub fn open(root: impl Into<PathBuf>, base: Engine) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        let probe = root.join(".write-probe");
        write_atomic(&probe, b"ok")?;
        fs::remove_file(&probe).map_err(io_err(&probe))?;
        let store = Self {
            root: root.clone(),
            base: Arc::new(base),
            kbs: RwLock::new(BTreeMap::new()),
            registry: Mutex::new(()),
        };
        let mut entries: Vec<_> = fs::read_dir(&root)
            .map_err(io_err(&root))?
            .filter_map(Result::ok)
            .map(|e| e.path())
            .filter(|p| p.is_dir())
            .collect();
        entries.sort();
        let mut kbs = BTreeMap::new();
        for dir in entries {
            let name = dir.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
            if name.starts_with('.') {
                // Leftovers of an interrupted create or delete.
                let _ = fs::remove_dir_all(&dir);
                continue;
            }
            let handle = store.load_dir(&dir)?;
            kbs.insert(handle.current().kb().kb_id.clone(), Arc::new(handle));
        }
        *store.kbs.write().expect("registry lock") = kbs;
        Ok(store)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn engine(&self) -> &Engine {
        &self.base
    }

    fn load_dir(&self, dir: &Path) -> Result<KbHandle, StoreError> {
        let kb_path = dir.join(KB_FILE);
        let kb_json = fs::read_to_string(&kb_path).map_err(io_err(&kb_path))?;
        let file = io::parse_kb(&kb_json)?;
        let rev_path = dir.join(REVISION_FILE);
        let rev: RevisionFile = serde_json::from_str(&fs::read_to_string(&rev_path).map_err(io_err(&rev_path))?)
            .map_err(|source| DataError::Json {
                what: rev_path.display().to_string(),
                source,
            })?;
        let overlay_path = dir.join(OVERLAY_FILE);
        let engine = if overlay_path.exists() {
            let model = io::parse_model(&io::read_file(&overlay_path)?)?;
            Arc::new(Engine {
                model,
                ..(*self.base).clone()
            })
        } else {
            self.base.clone()
        };
        let kb = file.into_kb(&engine.analyzer)?;
        let state = KbState {
            revision: rev.revision,
            next_qa_id: rev.next_qa_id.max(kb.max_id() + 1),
            snapshot: Arc::new(engine.snapshot(kb)?),
            engine,
            kb_json: Arc::new(kb_json),
        };
        Ok(KbHandle {
            dir: dir.to_path_buf(),
            writer: Mutex::new(()),
            state: RwLock::new(Arc::new(state)),
            suggestions: Mutex::new(read_suggestions(&dir.join(SUGGESTIONS_FILE))?),
        })
    }

    fn handle(&self, id: &str) -> Result<Arc<KbHandle>, StoreError> {
        self.kbs
            .read()
            .expect("registry lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StoreError::UnknownKb(id.to_string()))
    }

    /// The committed state queries currently see.
    pub fn state(&self, id: &str) -> Result<Arc<KbState>, StoreError> {
        Ok(self.handle(id)?.current())
    }

    fn validate(kb: &KnowledgeBase) -> Result<(), StoreError> {
        let v = validate_kb(kb);
        if v.is_empty() {
            Ok(())
        } else {
            Err(StoreError::Invalid(v))
        }
    }

    /// Materializes a new KB directory under a hidden name, then renames it
    /// into place so a failure leaves nothing behind.
    fn install(&self, kb: KnowledgeBase, next_qa_id: QaId) -> Result<Arc<KbHandle>, StoreError> {
        let kb_json = io::serialize_kb(&KbFile::from_kb(&kb));
        let staging = self.root.join(format!(".new-{}", uuid::Uuid::new_v4()));
        let dir = self.root.join(&kb.kb_id);
        fs::create_dir(&staging).map_err(io_err(&staging))?;
        let rev = RevisionFile {
            revision: 1,
            next_qa_id,
        };
        let result = write_atomic(&staging.join(KB_FILE), kb_json.as_bytes())
            .and_then(|_| write_atomic(&staging.join(REVISION_FILE), &serde_json::to_vec(&rev).expect("revision")))
            .and_then(|_| fs::rename(&staging, &dir).map_err(io_err(&dir)));
        if let Err(e) = result {
            let _ = fs::remove_dir_all(&staging);
            return Err(e);
        }
        let state = KbState {
            revision: 1,
            next_qa_id,
            snapshot: Arc::new(self.base.snapshot(kb)?),
            engine: self.base.clone(),
            kb_json: Arc::new(kb_json),
        };
        Ok(Arc::new(KbHandle {
            dir,
            writer: Mutex::new(()),
            state: RwLock::new(Arc::new(state)),
            suggestions: Mutex::new(Vec::new()),
        }))
    }

    fn register(&self, kb: KnowledgeBase, next_qa_id: QaId) -> Result<Arc<KbState>, StoreError> {
        let _guard = self.registry.lock().expect("registry mutex");
        {
            let kbs = self.kbs.read().expect("registry lock");
            if kbs.contains_key(&kb.kb_id) {
                return Err(StoreError::DuplicateId(kb.kb_id));
            }
            if kbs.values().any(|h| h.current().kb().name == kb.name) {
                return Err(StoreError::DuplicateName(kb.name));
            }
        }
        let id = kb.kb_id.clone();
        let handle = self.install(kb, next_qa_id)?;
        let state = handle.current();
        self.kbs.write().expect("registry lock").insert(id, handle);
        Ok(state)
    }

    /// Extracts every source, appends the editorial QAs, validates and
    /// persists. Ids are assigned here: extracted QAs first, then editorial
    /// ones in request order.
    pub fn create(&self, req: CreateKb) -> Result<Created, StoreError> {
        if req.name.trim().is_empty() {
            return Err(StoreError::BadRequest("name must not be empty".into()));
        }
        if req.sources.is_empty() && req.qa_pairs.is_empty() {
            return Err(StoreError::BadRequest("no sources".into()));
        }
        let docs = req
            .sources
            .into_iter()
            .map(|s| match s.format {
                Some(format) => Ok(SourceDocument {
                    name: s.name,
                    format,
                    content: s.content,
                }),
                None => SourceDocument::new(s.name, s.content),
            })
            .collect::<Result<Vec<_>, _>>()?;
        let extraction = extract_batch(&docs, 1)?;
        let mut qas = extraction.qa_pairs;
        let mut next = qas.iter().map(|q| q.id).max().unwrap_or(0) + 1;
        for n in req.qa_pairs {
            qas.push(new_qa(next, n));
            next += 1;
        }
        let kb_id = uuid::Uuid::new_v4().simple().to_string();
        let kb = KnowledgeBase::new(kb_id, req.name, req.persona, req.synonyms, qas, &self.base.analyzer);
        Self::validate(&kb)?;
        let state = self.register(kb, next)?;
        Ok(Created {
            kb_id: state.kb().kb_id.clone(),
            revision: state.revision,
            qa_count: state.kb().len(),
            warnings: extraction.warnings,
        })
    }

    /// Creates a KB from an interchange file, keeping its ids. An empty
    /// `kbId` gets a fresh one.
    pub fn import(&self, mut file: KbFile) -> Result<Created, StoreError> {
        if file.kb_id.is_empty() {
            file.kb_id = uuid::Uuid::new_v4().simple().to_string();
        }
        if !valid_kb_id(&file.kb_id) {
            return Err(StoreError::BadRequest(format!(
                "kbId {:?} must be 1-128 characters of [A-Za-z0-9_-]",
                file.kb_id
            )));
        }
        let kb = match file.into_kb(&self.base.analyzer) {
            Ok(kb) => kb,
            Err(DataError::Invalid(v)) => return Err(StoreError::Invalid(v)),
            Err(e) => return Err(e.into()),
        };
        let next = kb.max_id() + 1;
        let state = self.register(kb, next)?;
        Ok(Created {
            kb_id: state.kb().kb_id.clone(),
            revision: state.revision,
            qa_count: state.kb().len(),
            warnings: Vec::new(),
        })
    }

    pub fn list(&self) -> Vec<KbSummary> {
        let kbs = self.kbs.read().expect("registry lock");
        kbs.values()
            .map(|h| {
                let s = h.current();
                KbSummary {
                    kb_id: s.kb().kb_id.clone(),
                    name: s.kb().name.clone(),
                    persona: s.kb().persona,
                    revision: s.revision,
                    qa_count: s.kb().len(),
                }
            })
            .collect()
    }

    pub fn get(&self, id: &str) -> Result<KbDocument, StoreError> {
        let s = self.state(id)?;
        Ok(KbDocument {
            revision: s.revision,
            kb: KbFile::from_kb(s.kb()),
        })
    }

    /// The canonical interchange file, byte for byte as stored.
    pub fn export(&self, id: &str) -> Result<Arc<String>, StoreError> {
        Ok(self.state(id)?.kb_json.clone())
    }

    fn check_revision(current: u64, expected: Option<u64>) -> Result<(), StoreError> {
        match expected {
            Some(e) if e != current => Err(StoreError::Conflict { expected: e, current }),
            _ => Ok(()),
        }
    }

    /// Persists `kb` as the next revision and swaps it in.
    fn commit(
        &self,
        h: &KbHandle,
        cur: &KbState,
        kb: KnowledgeBase,
        next_qa_id: QaId,
    ) -> Result<Arc<KbState>, StoreError> {
        let kb_json = io::serialize_kb(&KbFile::from_kb(&kb));
        let snapshot = Arc::new(cur.engine.snapshot(kb)?);
        let rev = RevisionFile {
            revision: cur.revision + 1,
            next_qa_id,
        };
        write_atomic(&h.dir.join(KB_FILE), kb_json.as_bytes())?;
        write_atomic(&h.dir.join(REVISION_FILE), &serde_json::to_vec(&rev).expect("revision"))?;
        Ok(h.swap(KbState {
            revision: rev.revision,
            next_qa_id,
            snapshot,
            engine: cur.engine.clone(),
            kb_json: Arc::new(kb_json),
        }))
    }

    /// Applies a patch: deletes, then edits, then additions, then settings.
    pub fn update(&self, id: &str, expected: Option<u64>, patch: KbPatch) -> Result<Arc<KbState>, StoreError> {
        // Renames need the registry; take it before the writer, as delete does.
        let _g = patch.name.is_some().then(|| self.registry.lock().expect("registry mutex"));
        let h = self.handle(id)?;
        let _w = h.writer.lock().expect("writer mutex");
        let cur = h.current();
        Self::check_revision(cur.revision, expected)?;
        let kb = cur.kb();
        let mut qas: Vec<QaPair> = kb.qa_pairs().to_vec();
        for d in &patch.delete {
            let before = qas.len();
            qas.retain(|q| q.id != *d);
            if qas.len() == before {
                return Err(StoreError::BadRequest(format!("delete: QAPair {d} not found")));
            }
        }
        for e in patch.edit {
            let qa = qas
                .iter_mut()
                .find(|q| q.id == e.id)
                .ok_or_else(|| StoreError::BadRequest(format!("edit: QAPair {} not found", e.id)))?;
            if let Some(q) = e.question {
                qa.question = q;
            }
            if let Some(a) = e.answer {
                qa.answer = a;
            }
            if let Some(alts) = e.alternate_questions {
                qa.alternate_questions = alts;
            }
            if let Some(p) = e.parent_id {
                qa.parent_id = p;
            }
            if let Some(m) = e.metadata {
                qa.metadata = m;
            }
        }
        let mut next = cur.next_qa_id;
        for n in patch.add {
            qas.push(new_qa(next, n));
            next += 1;
        }
        let mut new_kb = KnowledgeBase::new(
            kb.kb_id.clone(),
            patch.name.unwrap_or_else(|| kb.name.clone()),
            patch.persona.unwrap_or(kb.persona),
            patch.synonyms.unwrap_or_else(|| kb.synonyms.clone()),
            qas,
            &cur.engine.analyzer,
        );
        if new_kb.name.trim().is_empty() {
            return Err(StoreError::BadRequest("name must not be empty".into()));
        }
        if new_kb.name != kb.name {
            let taken = self
                .kbs
                .read()
                .expect("registry lock")
                .iter()
                .any(|(k, o)| k != id && o.current().kb().name == new_kb.name);
            if taken {
                return Err(StoreError::DuplicateName(std::mem::take(&mut new_kb.name)));
            }
        }
        Self::validate(&new_kb)?;
        self.commit(&h, &cur, new_kb, next)
    }

    pub fn delete(&self, id: &str, expected: Option<u64>) -> Result<(), StoreError> {
        let _g = self.registry.lock().expect("registry mutex");
        let h = self.handle(id)?;
        let _w = h.writer.lock().expect("writer mutex");
        Self::check_revision(h.current().revision, expected)?;
        let trash = self.root.join(format!(".del-{}", uuid::Uuid::new_v4()));
        fs::rename(&h.dir, &trash).map_err(io_err(&h.dir))?;
        self.kbs.write().expect("registry lock").remove(id);
        let _ = fs::remove_dir_all(&trash);
        Ok(())
    }

    /// Runs the answer pipeline on the committed snapshot. A ranker
    /// disagreement is recorded as a pending suggestion.
    pub fn answer(&self, id: &str, req: &AnswerRequest) -> Result<AnswerResponse, StoreError> {
        let h = self.handle(id)?;
        let state = h.current();
        let ctx = req.context.clone().unwrap_or_default();
        let opts = AnswerOptions {
            top: req.top,
            score_threshold: req.score_threshold,
        };
        let a = state.engine.answer(&state.snapshot, &req.question, &ctx, &opts)?;
        let mut logged = false;
        if let Some(d) = a.disagreement {
            tracing::debug!(kb = id, query = %req.question, a = d.qa_id_a, b = d.qa_id_b, "ranker disagreement");
            logged = self.record(&h, &req.question, d.qa_id_a, Origin::Disagreement)?;
        }
        Ok(AnswerResponse {
            kind: a.kind,
            answers: a.answers,
            active_learning_enabled: logged,
            domain: a.domain,
            revision: state.revision,
        })
    }

    /// Appends a pending suggestion unless an identical one is pending.
    /// Returns whether the query has a pending suggestion afterwards.
    fn record(&self, h: &KbHandle, query: &str, target: QaId, origin: Origin) -> Result<bool, StoreError> {
        let mut list = h.suggestions.lock().expect("suggestions mutex");
        let dup = list
            .iter()
            .any(|s| s.status == Status::Pending && s.target_qa_id == target && s.query_text == query);
        if !dup {
            let s = Suggestion::new(uuid::Uuid::new_v4().simple().to_string(), query, target, origin, now_millis());
            h.append_suggestions(&mut list, &[s])?;
        }
        Ok(true)
    }

    pub fn feedback(&self, id: &str, mut record: FeedbackRecord) -> Result<Option<Suggestion>, StoreError> {
        let h = self.handle(id)?;
        let state = h.current();
        for qa in std::iter::once(record.shown_qa_id).chain(record.selected_qa_id) {
            if state.kb().get(qa).is_none() {
                return Err(StoreError::BadRequest(format!("QAPair {qa} is not in the KB")));
            }
        }
        if record.query_text.trim().is_empty() {
            return Err(StoreError::BadRequest("queryText must not be empty".into()));
        }
        if record.timestamp == 0 {
            record.timestamp = now_millis();
        }
        let Some(s) = feedback_suggestion(&record, uuid::Uuid::new_v4().simple().to_string()) else {
            return Ok(None);
        };
        let mut list = h.suggestions.lock().expect("suggestions mutex");
        h.append_suggestions(&mut list, std::slice::from_ref(&s))?;
        Ok(Some(s))
    }

    /// Every suggestion, pending ones grouped by DBSCAN.
    pub fn suggestions(&self, id: &str) -> Result<Vec<Suggestion>, StoreError> {
        let h = self.handle(id)?;
        let a = h.current().engine.config.active;
        let list = h.suggestions.lock().expect("suggestions mutex");
        Ok(cluster_suggestions(&list, a.dbscan_eps, a.dbscan_min_pts))
    }

    /// Accepts or rejects the whole cluster of `sid`. Accepting commits a
    /// new KB revision.
    pub fn resolve(&self, id: &str, sid: &str, decision: Decision) -> Result<Resolved, StoreError> {
        let h = self.handle(id)?;
        let _w = h.writer.lock().expect("writer mutex");
        let cur = h.current();
        let a = cur.engine.config.active;
        let mut list = h.suggestions.lock().expect("suggestions mutex");
        let clustered = cluster_suggestions(&list, a.dbscan_eps, a.dbscan_min_pts);
        let r = apply_decision(cur.kb(), &clustered, sid, decision, &cur.engine.analyzer)?;
        let revision = if r.added.is_empty() {
            cur.revision
        } else {
            self.commit(&h, &cur, r.kb, cur.next_qa_id)?.revision
        };
        h.append_suggestions(&mut list, &r.updated)?;
        Ok(Resolved {
            revision,
            resolved: r.updated,
            added: r.added,
        })
    }

    /// Installs (or with `None` removes) a per-KB model overlay.
    pub fn set_overlay(&self, id: &str, model: Option<GbdtModel>) -> Result<(), StoreError> {
        let h = self.handle(id)?;
        let _w = h.writer.lock().expect("writer mutex");
        let cur = h.current();
        let path = h.dir.join(OVERLAY_FILE);
        let engine = match model {
            Some(m) => {
                write_atomic(&path, io::serialize_model(&m).as_bytes())?;
                Arc::new(Engine {
                    model: m,
                    ..(*self.base).clone()
                })
            }
            None => {
                if path.exists() {
                    fs::remove_file(&path).map_err(io_err(&path))?;
                }
                self.base.clone()
            }
        };
        h.swap(KbState {
            revision: cur.revision,
            next_qa_id: cur.next_qa_id,
            snapshot: cur.snapshot.clone(),
            engine,
            kb_json: cur.kb_json.clone(),
        });
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Resolved {
    pub revision: u64,
    pub resolved: Vec<Suggestion>,
    pub added: Vec<String>,
}

fn new_qa(id: QaId, n: NewQa) -> QaPair {
    QaPair {
        id,
        question: n.question,
        alternate_questions: n.alternate_questions,
        answer: n.answer,
        parent_id: n.parent_id,
        source: n.source.unwrap_or_else(|| "editorial".into()),
        metadata: n.metadata,
    }
}
