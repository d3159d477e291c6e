//! Append-only JSON-lines event log. The whole store is rebuilt by
//! replaying the log; readers work on immutable snapshots.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::Utc;
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::model::{CreationId, CreationRecord, IterationEntry, Session, StoreError};
use crate::guardrails::TaskTheme;
use crate::lang::Lang;

pub const LOG_FILE: &str = "sessions.log";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "kebab-case", deny_unknown_fields)]
enum Event {
    SessionCreated {
        session: Session,
    },
    CreationOpened {
        creation_id: CreationId,
        session_id: String,
        theme: TaskTheme,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        site_id: Option<String>,
    },
    IterationRecorded {
        creation_id: CreationId,
        entry: IterationEntry,
    },
    ImageSaved {
        creation_id: CreationId,
        image_id: String,
    },
}

/// Everything the log describes, as of some point in time.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StoreState {
    sessions: BTreeMap<String, Session>,
    creations: BTreeMap<CreationId, CreationRecord>,
}

impl StoreState {
    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn session(&self, session_id: &str) -> Option<&Session> {
        self.sessions.get(session_id)
    }

    /// All creations in id order.
    pub fn creations(&self) -> impl Iterator<Item = &CreationRecord> {
        self.creations.values()
    }

    pub fn creation(&self, id: CreationId) -> Option<&CreationRecord> {
        self.creations.get(&id)
    }

    pub fn creations_of<'a>(&'a self, session_id: &'a str) -> impl Iterator<Item = &'a CreationRecord> + 'a {
        self.creations.values().filter(move |c| c.session_id == session_id)
    }

    fn next_creation_id(&self) -> CreationId {
        self.creations.keys().next_back().map_or(1, |k| k + 1)
    }

    fn apply(&mut self, event: Event) -> Result<(), StoreError> {
        match event {
            Event::SessionCreated { session } => {
                if self.sessions.contains_key(&session.session_id) {
                    return Err(StoreError::InvalidEntry(format!(
                        "session `{}` exists",
                        session.session_id
                    )));
                }
                check_label(&session.participant_label)?;
                self.sessions.insert(session.session_id.clone(), session);
            }
            Event::CreationOpened {
                creation_id,
                session_id,
                theme,
                site_id,
            } => {
                if !self.sessions.contains_key(&session_id) {
                    return Err(StoreError::UnknownSession(session_id));
                }
                if creation_id < self.next_creation_id() {
                    return Err(StoreError::InvalidEntry(format!(
                        "creation id {creation_id} is not increasing"
                    )));
                }
                self.creations.insert(
                    creation_id,
                    CreationRecord {
                        creation_id,
                        session_id,
                        theme,
                        site_id,
                        iterations: Vec::new(),
                        saved_image_ids: Vec::new(),
                    },
                );
            }
            Event::IterationRecorded { creation_id, entry } => {
                let c = self
                    .creations
                    .get_mut(&creation_id)
                    .ok_or(StoreError::UnknownCreation(creation_id))?;
                entry.check().map_err(StoreError::InvalidEntry)?;
                if entry.theme != c.theme {
                    return Err(StoreError::InvalidEntry(format!(
                        "creation {creation_id} is {}, entry is {}",
                        c.theme, entry.theme
                    )));
                }
                c.iterations.push(entry);
            }
            Event::ImageSaved { creation_id, image_id } => {
                let c = self
                    .creations
                    .get_mut(&creation_id)
                    .ok_or(StoreError::UnknownCreation(creation_id))?;
                if c.produced(&image_id).is_none() {
                    return Err(StoreError::ImageNotInCreation { creation_id, image_id });
                }
                if !c.saved_image_ids.contains(&image_id) {
                    c.saved_image_ids.push(image_id);
                }
            }
        }
        Ok(())
    }
}

fn check_label(label: &str) -> Result<(), StoreError> {
    let ok = (1..=32).contains(&label.chars().count())
        && label.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_');
    if ok {
        Ok(())
    } else {
        Err(StoreError::BadLabel)
    }
}

pub struct SessionStore {
    path: Option<PathBuf>,
    writer: Mutex<Option<File>>,
    state: RwLock<Arc<StoreState>>,
}

fn storage(path: &Path, e: std::io::Error) -> StoreError {
    StoreError::StorageFailure(format!("{}: {e}", path.display()))
}

impl SessionStore {
    pub fn in_memory() -> SessionStore {
        SessionStore {
            path: None,
            writer: Mutex::new(None),
            state: RwLock::new(Arc::new(StoreState::default())),
        }
    }

    /// Opens `<dir>/sessions.log`, creating it if needed, and replays it.
    pub fn open(dir: impl AsRef<Path>) -> Result<SessionStore, StoreError> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir).map_err(|e| storage(dir, e))?;
        let path = dir.join(LOG_FILE);
        let mut state = StoreState::default();
        if path.exists() {
            let f = File::open(&path).map_err(|e| storage(&path, e))?;
            for (n, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(|e| storage(&path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |message: String| StoreError::Corrupt {
                    path: path.display().to_string(),
                    line: n + 1,
                    message,
                };
                let event: Event = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                state.apply(event).map_err(|e| corrupt(e.to_string()))?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| storage(&path, e))?;
        Ok(SessionStore {
            path: Some(path),
            writer: Mutex::new(Some(file)),
            state: RwLock::new(Arc::new(state)),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn snapshot(&self) -> Arc<StoreState> {
        self.state.read().clone()
    }

    /// The single write path: validate against a copy, persist, publish.
    fn commit(
        &self,
        build: impl FnOnce(&StoreState) -> Result<Event, StoreError>,
    ) -> Result<Arc<StoreState>, StoreError> {
        let mut writer = self.writer.lock();
        let current = self.snapshot();
        let event = build(&current)?;
        let mut next = (*current).clone();
        next.apply(event.clone())?;
        if let (Some(file), Some(path)) = (writer.as_mut(), &self.path) {
            let mut line = serde_json::to_string(&event).expect("events serialize");
            line.push('\n');
            file.write_all(line.as_bytes()).map_err(|e| storage(path, e))?;
            file.flush().map_err(|e| storage(path, e))?;
        }
        let next = Arc::new(next);
        *self.state.write() = next.clone();
        Ok(next)
    }

    pub fn create_session(&self, language: Lang, participant_label: &str) -> Result<Session, StoreError> {
        check_label(participant_label)?;
        let session = Session {
            session_id: format!("s-{}", uuid::Uuid::new_v4().simple()),
            created_at: Utc::now(),
            language,
            participant_label: participant_label.to_string(),
        };
        let s = session.clone();
        self.commit(move |_| Ok(Event::SessionCreated { session: s }))?;
        Ok(session)
    }

    /// Starts an empty creation; its id exceeds every id issued before.
    pub fn open_creation(
        &self,
        session_id: &str,
        theme: TaskTheme,
        site_id: Option<&str>,
    ) -> Result<CreationId, StoreError> {
        let mut id = 0;
        self.commit(|s| {
            id = s.next_creation_id();
            Ok(Event::CreationOpened {
                creation_id: id,
                session_id: session_id.to_string(),
                theme,
                site_id: site_id.map(str::to_string),
            })
        })?;
        Ok(id)
    }

    /// Appends to `creation_id`, or to a new creation when it is `None`.
    pub fn record_iteration(
        &self,
        session_id: &str,
        creation_id: Option<CreationId>,
        entry: IterationEntry,
    ) -> Result<CreationId, StoreError> {
        entry.check().map_err(StoreError::InvalidEntry)?;
        let snap = self.snapshot();
        if snap.session(session_id).is_none() {
            return Err(StoreError::UnknownSession(session_id.to_string()));
        }
        let id = match creation_id {
            Some(id) => {
                let c = snap.creation(id).ok_or(StoreError::UnknownCreation(id))?;
                if c.session_id != session_id {
                    return Err(StoreError::UnknownCreation(id));
                }
                id
            }
            None => self.open_creation(session_id, entry.theme, None)?,
        };
        self.commit(|_| Ok(Event::IterationRecorded { creation_id: id, entry }))?;
        Ok(id)
    }

    pub fn save_image(&self, session_id: &str, creation_id: CreationId, image_id: &str) -> Result<(), StoreError> {
        let snap = self.snapshot();
        if snap.session(session_id).is_none() {
            return Err(StoreError::UnknownSession(session_id.to_string()));
        }
        match snap.creation(creation_id) {
            Some(c) if c.session_id == session_id => {}
            _ => return Err(StoreError::UnknownCreation(creation_id)),
        }
        self.commit(|_| {
            Ok(Event::ImageSaved {
                creation_id,
                image_id: image_id.to_string(),
            })
        })?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::guardrails::{OutcomeStatus, TagSelection};
    use crate::store::model::OutcomeSummary;

    pub(crate) fn entry(theme: TaskTheme, tag: &str) -> IterationEntry {
        IterationEntry {
            theme,
            tags: TagSelection::default(),
            idea: "idea".into(),
            outcome: OutcomeSummary {
                status: OutcomeStatus::Accepted,
                rule_ids: vec![],
            },
            final_prompt: "prompt".into(),
            seed: 1,
            job_id: format!("job-{tag}"),
            image_ids: (0..4).map(|i| format!("img-{tag}-{i}")).collect(),
            timestamp: Utc::now(),
        }
    }

    const HR: TaskTheme = TaskTheme::HistoricalReconstruction;

    #[test]
    fn sessions_are_distinct() {
        let s = SessionStore::in_memory();
        let a = s.create_session(Lang::Zh, "P1").unwrap();
        let b = s.create_session(Lang::Zh, "P1").unwrap();
        assert_ne!(a.session_id, b.session_id);
        assert_eq!(a.language, Lang::Zh);
        assert!(matches!(
            s.create_session(Lang::En, "Jane Doe"),
            Err(StoreError::BadLabel)
        ));
    }

    #[test]
    fn creation_ids_increase() {
        let s = SessionStore::in_memory();
        let sid = s.create_session(Lang::En, "P2").unwrap().session_id;
        let a = s.record_iteration(&sid, None, entry(HR, "a")).unwrap();
        let b = s.record_iteration(&sid, None, entry(HR, "b")).unwrap();
        assert!(b > a);
        assert_eq!(s.record_iteration(&sid, Some(a), entry(HR, "c")).unwrap(), a);
        assert_eq!(s.snapshot().creation(a).unwrap().iterations.len(), 2);
    }

    #[test]
    fn invalid_entries_are_refused() {
        let s = SessionStore::in_memory();
        let sid = s.create_session(Lang::En, "P3").unwrap().session_id;
        let mut e = entry(HR, "a");
        e.image_ids.pop();
        assert!(matches!(
            s.record_iteration(&sid, None, e),
            Err(StoreError::InvalidEntry(_))
        ));
        assert!(matches!(
            s.record_iteration("s-nope", None, entry(HR, "a")),
            Err(StoreError::UnknownSession(_))
        ));
        let c = s.record_iteration(&sid, None, entry(HR, "a")).unwrap();
        assert!(matches!(
            s.record_iteration(&sid, Some(c), entry(TaskTheme::RiskEstimation, "b")),
            Err(StoreError::InvalidEntry(_))
        ));
        assert!(s.snapshot().creations().all(|c| !c.iterations.is_empty()));
    }

    #[test]
    fn only_produced_images_can_be_saved() {
        let s = SessionStore::in_memory();
        let sid = s.create_session(Lang::En, "P4").unwrap().session_id;
        let c = s.record_iteration(&sid, None, entry(HR, "a")).unwrap();
        s.save_image(&sid, c, "img-a-2").unwrap();
        s.save_image(&sid, c, "img-a-2").unwrap();
        assert_eq!(s.snapshot().creation(c).unwrap().saved_image_ids, ["img-a-2"]);
        assert!(matches!(
            s.save_image(&sid, c, "img-b-0"),
            Err(StoreError::ImageNotInCreation { .. })
        ));
        let other = s.create_session(Lang::En, "P5").unwrap().session_id;
        assert!(matches!(
            s.save_image(&other, c, "img-a-2"),
            Err(StoreError::UnknownCreation(_))
        ));
    }

    #[test]
    fn log_replays_to_the_same_state() {
        let dir = tempfile::tempdir().unwrap();
        let before = {
            let s = SessionStore::open(dir.path()).unwrap();
            let sid = s.create_session(Lang::Zh, "P6").unwrap().session_id;
            let c = s.record_iteration(&sid, None, entry(HR, "a")).unwrap();
            s.record_iteration(&sid, Some(c), entry(HR, "b")).unwrap();
            s.save_image(&sid, c, "img-b-1").unwrap();
            s.snapshot()
        };
        let s = SessionStore::open(dir.path()).unwrap();
        assert_eq!(*s.snapshot(), *before);
        let sid = before.sessions().next().unwrap().session_id.clone();
        let next = s.open_creation(&sid, HR, Some("ruishi-lou")).unwrap();
        assert!(before.creations().all(|c| c.creation_id < next));
    }

    #[test]
    fn unknown_fields_fail_the_load() {
        let dir = tempfile::tempdir().unwrap();
        {
            SessionStore::open(dir.path())
                .unwrap()
                .create_session(Lang::En, "P7")
                .unwrap();
        }
        let path = dir.path().join(LOG_FILE);
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(
            &path,
            text.replace("\"participant_label\"", "\"email\":\"a@b.c\",\"participant_label\""),
        )
        .unwrap();
        assert!(matches!(
            SessionStore::open(dir.path()),
            Err(StoreError::Corrupt { line: 1, .. })
        ));
    }

    #[test]
    fn unwritable_path_is_a_storage_failure() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        assert!(matches!(
            SessionStore::open(blocker.join("data")),
            Err(StoreError::StorageFailure(_))
        ));
    }
}
