use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use quark_core::session::SessionDocument;
use quark_core::{load_kb, KnowledgeBase, Session};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub struct Entry {
    pub kb_id: String,
    pub session: Session,
}

#[derive(Serialize, Deserialize)]
struct Stored {
    kb_id: String,
    session: SessionDocument,
}

struct Inner {
    kbs: BTreeMap<String, Arc<KnowledgeBase>>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Entry>>>>,
    data_dir: Option<PathBuf>,
}

/// Knowledge bases, read-only and shared, plus the live sessions, each behind
/// its own lock.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

/// Every `*.json` file in `dir`, keyed by file stem.
pub fn load_kb_dir(dir: &Path) -> Result<BTreeMap<String, KnowledgeBase>, String> {
    let mut out = BTreeMap::new();
    let entries = fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
    for entry in entries {
        let path = entry.map_err(|e| e.to_string())?.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let Some(id) = path.file_stem().and_then(|s| s.to_str()) else { continue };
        let text = fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
        match load_kb(&text) {
            Ok(kb) => {
                out.insert(id.to_string(), kb);
            }
            Err(e) => tracing::warn!("skipping {}: {e}", path.display()),
        }
    }
    Ok(out)
}

impl AppState {
    /// Loads persisted sessions from `data_dir`, creating it if needed.
    pub fn new(kbs: BTreeMap<String, KnowledgeBase>, data_dir: Option<PathBuf>) -> Result<Self, String> {
        let kbs: BTreeMap<String, Arc<KnowledgeBase>> = kbs.into_iter().map(|(k, v)| (k, Arc::new(v))).collect();
        let mut sessions = HashMap::new();
        if let Some(dir) = &data_dir {
            fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            for entry in fs::read_dir(dir).map_err(|e| e.to_string())? {
                let path = entry.map_err(|e| e.to_string())?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                match restore(&path, &kbs) {
                    Ok(entry) => {
                        sessions.insert(entry.session.id().to_string(), Arc::new(Mutex::new(entry)));
                    }
                    Err(e) => tracing::warn!("not restoring {}: {e}", path.display()),
                }
            }
        }
        Ok(AppState { inner: Arc::new(Inner { kbs, sessions: RwLock::new(sessions), data_dir }) })
    }

    pub fn kb(&self, id: &str) -> Result<Arc<KnowledgeBase>, ApiError> {
        self.inner.kbs.get(id).cloned().ok_or_else(|| ApiError::unknown_kb(id))
    }

    pub fn kbs(&self) -> impl Iterator<Item = (&String, &Arc<KnowledgeBase>)> {
        self.inner.kbs.iter()
    }

    pub fn session(&self, id: &str) -> Result<Arc<Mutex<Entry>>, ApiError> {
        let sessions = self.inner.sessions.read().expect("session map lock");
        sessions.get(id).cloned().ok_or_else(|| ApiError::unknown_session(id))
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.inner.sessions.read().expect("session map lock").keys().cloned().collect();
        ids.sort();
        ids
    }

    pub fn insert(&self, entry: Entry) -> Result<Arc<Mutex<Entry>>, ApiError> {
        self.persist(&entry)?;
        let id = entry.session.id().to_string();
        let slot = Arc::new(Mutex::new(entry));
        self.inner.sessions.write().expect("session map lock").insert(id, slot.clone());
        Ok(slot)
    }

    pub fn persist(&self, entry: &Entry) -> Result<(), ApiError> {
        let Some(dir) = &self.inner.data_dir else { return Ok(()) };
        let stored = Stored { kb_id: entry.kb_id.clone(), session: entry.session.to_document() };
        let path = dir.join(format!("{}.json", entry.session.id()));
        let tmp = path.with_extension("json.tmp");
        let text = serde_json::to_string_pretty(&stored).expect("session documents serialize");
        fs::write(&tmp, text)
            .and_then(|_| fs::rename(&tmp, &path))
            .map_err(|e| ApiError::internal(format!("cannot persist session: {e}")))
    }
}

fn restore(path: &Path, kbs: &BTreeMap<String, Arc<KnowledgeBase>>) -> Result<Entry, String> {
    let text = fs::read_to_string(path).map_err(|e| e.to_string())?;
    let stored: Stored = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let kb = kbs.get(&stored.kb_id).ok_or_else(|| format!("knowledge base {:?} is not loaded", stored.kb_id))?;
    let doc = serde_json::to_string(&stored.session).expect("session documents serialize");
    let session = Session::load(&doc, kb.clone()).map_err(|e| e.to_string())?;
    Ok(Entry { kb_id: stored.kb_id, session })
}
