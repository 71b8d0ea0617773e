use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};

use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ExampleKey {
    pub dataset_id: String,
    pub split: String,
    pub index: usize,
}

impl ExampleKey {
    pub fn new(dataset_id: impl Into<String>, split: impl Into<String>, index: usize) -> Self {
        Self {
            dataset_id: dataset_id.into(),
            split: split.into(),
            index,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct NoteEntry {
    #[serde(flatten)]
    key: ExampleKey,
    text: String,
}

#[derive(Serialize, Deserialize)]
struct SessionRepr {
    #[serde(default)]
    notes: Vec<NoteEntry>,
    #[serde(default)]
    favorites: Vec<ExampleKey>,
}

/// Notes and favorites, keyed by example.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "SessionRepr", into = "SessionRepr")]
pub struct SessionState {
    pub notes: BTreeMap<ExampleKey, String>,
    pub favorites: BTreeSet<ExampleKey>,
}

impl From<SessionRepr> for SessionState {
    fn from(r: SessionRepr) -> Self {
        Self {
            notes: r.notes.into_iter().map(|n| (n.key, n.text)).collect(),
            favorites: r.favorites.into_iter().collect(),
        }
    }
}

impl From<SessionState> for SessionRepr {
    fn from(s: SessionState) -> Self {
        Self {
            notes: s
                .notes
                .into_iter()
                .map(|(key, text)| NoteEntry { key, text })
                .collect(),
            favorites: s.favorites.into_iter().collect(),
        }
    }
}

impl SessionState {
    pub fn is_empty(&self) -> bool {
        self.notes.is_empty() && self.favorites.is_empty()
    }

    /// Sets a note; blank text removes it.
    pub fn set_note(&mut self, key: ExampleKey, text: &str) {
        if text.trim().is_empty() {
            self.notes.remove(&key);
        } else {
            self.notes.insert(key, text.to_string());
        }
    }

    pub fn set_favorite(&mut self, key: ExampleKey, on: bool) {
        if on {
            self.favorites.insert(key);
        } else {
            self.favorites.remove(&key);
        }
    }

    /// Entries for which `live` holds. Dangling entries stay on disk.
    pub fn filtered(&self, live: impl Fn(&ExampleKey) -> bool) -> Self {
        Self {
            notes: self
                .notes
                .iter()
                .filter(|(k, _)| live(k))
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            favorites: self.favorites.iter().filter(|k| live(k)).cloned().collect(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SessionError {
    #[error("session file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("session file {path} is corrupt: {reason}")]
    Corrupt { path: PathBuf, reason: String },
}

/// Missing file yields an empty session.
pub fn load_session(path: &Path) -> Result<SessionState, SessionError> {
    let bytes = match std::fs::read(path) {
        Ok(b) => b,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(SessionState::default()),
        Err(source) => {
            return Err(SessionError::Io {
                path: path.to_path_buf(),
                source,
            })
        }
    };
    serde_json::from_slice(&bytes).map_err(|e| SessionError::Corrupt {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes to a sibling temp file, syncs, then renames over `path`.
pub fn persist_session(state: &SessionState, path: &Path) -> Result<(), SessionError> {
    let io = |source| SessionError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(io)?;
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = dir.join(format!(
        ".{name}.{}.{}.tmp",
        std::process::id(),
        TMP_COUNTER.fetch_add(1, Ordering::Relaxed)
    ));
    let bytes = serde_json::to_vec_pretty(state).expect("session serializes");
    let write = || -> std::io::Result<()> {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = std::fs::remove_file(&tmp);
        io(e)
    })
}

/// Single writer: every mutation holds the lock through the file replace.
pub struct SessionStore {
    path: PathBuf,
    state: Mutex<SessionState>,
}

impl SessionStore {
    pub fn new(path: PathBuf, state: SessionState) -> Self {
        Self {
            path,
            state: Mutex::new(state),
        }
    }

    /// Loads `path`. A corrupt file is moved aside and the session starts empty.
    pub fn open(path: PathBuf) -> Result<Self, SessionError> {
        let state = match load_session(&path) {
            Ok(s) => s,
            Err(SessionError::Corrupt { reason, .. }) => {
                let aside = path.with_extension("corrupt.json");
                tracing::warn!(
                    file = %path.display(),
                    moved_to = %aside.display(),
                    "session file is corrupt ({reason}); starting with an empty session"
                );
                std::fs::rename(&path, &aside).map_err(|source| SessionError::Io {
                    path: path.clone(),
                    source,
                })?;
                SessionState::default()
            }
            Err(e) => return Err(e),
        };
        Ok(Self::new(path, state))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub async fn snapshot(&self) -> SessionState {
        self.state.lock().await.clone()
    }

    /// Applies `f` and persists. On a write failure the in-memory state is left unchanged.
    pub async fn update(&self, f: impl FnOnce(&mut SessionState)) -> Result<(), SessionError> {
        let mut guard = self.state.lock().await;
        let mut next = guard.clone();
        f(&mut next);
        if next == *guard {
            return Ok(());
        }
        let path = self.path.clone();
        let next = tokio::task::spawn_blocking(move || persist_session(&next, &path).map(|_| next))
            .await
            .expect("session writer panicked")?;
        *guard = next;
        Ok(())
    }

    pub async fn flush(&self) -> Result<(), SessionError> {
        let guard = self.state.lock().await;
        if guard.is_empty() && !self.path.exists() {
            return Ok(());
        }
        persist_session(&guard, &self.path)
    }
}
