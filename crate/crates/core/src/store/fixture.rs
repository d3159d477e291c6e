//! Pilot-study interaction logs: per-participant image and iteration totals,
//! and their replay into a store as synthetic iterations.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use sha2::{Digest, Sha256};

use super::log::SessionStore;
use super::model::{CreationId, IterationEntry, OutcomeSummary, StoreError};
use crate::guardrails::{OutcomeStatus, TagSelection, TaskTheme};
use crate::imaging::GRID_SIZE;
use crate::lang::Lang;
use crate::record::{parse_records, RecordError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThemeCounts {
    pub images: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotRow {
    pub participant: String,
    pub line: usize,
    pub counts: BTreeMap<TaskTheme, ThemeCounts>,
}

pub fn bundled_pilot_logs_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join("pilot_logs.corpus")
}

pub fn load_pilot_logs(path: impl AsRef<Path>) -> Result<Vec<PilotRow>, RecordError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| RecordError {
        path: path.display().to_string(),
        line: 0,
        message: e.to_string(),
    })?;
    parse_pilot_logs(&text, path)
}

pub fn parse_pilot_logs(text: &str, path: &Path) -> Result<Vec<PilotRow>, RecordError> {
    let mut keys = vec!["participant".to_string()];
    for t in TaskTheme::ALL {
        keys.push(format!("{t}.images"));
        keys.push(format!("{t}.iterations"));
    }
    let allowed: Vec<&str> = keys.iter().map(String::as_str).collect();
    let mut rows: Vec<PilotRow> = Vec::new();
    for rec in parse_records(text, path)? {
        rec.only_keys(&allowed)?;
        let participant = rec.one("participant")?.to_string();
        if rows.iter().any(|r| r.participant == participant) {
            return Err(rec.error(rec.line(), format!("participant `{participant}` listed twice")));
        }
        let mut counts = BTreeMap::new();
        for t in TaskTheme::ALL {
            counts.insert(
                t,
                ThemeCounts {
                    images: rec.parse_num(&format!("{t}.images"))?,
                    iterations: rec.parse_num(&format!("{t}.iterations"))?,
                },
            );
        }
        rows.push(PilotRow {
            participant,
            line: rec.line(),
            counts,
        });
    }
    Ok(rows)
}

fn synthetic_image_id(participant: &str, theme: TaskTheme, iteration: usize, index: usize) -> String {
    let digest = Sha256::digest(format!("{participant}/{theme}/{iteration}/{index}").as_bytes());
    format!("img-{}", &hex::encode(digest)[..32])
}

/// Creates one session per participant and one creation per theme they
/// worked on. Rows whose image count is not four per iteration are refused.
pub fn replay_pilot_logs(
    store: &SessionStore,
    rows: &[PilotRow],
) -> Result<BTreeMap<(String, TaskTheme), CreationId>, StoreError> {
    let epoch: DateTime<Utc> = DateTime::UNIX_EPOCH;
    let mut out = BTreeMap::new();
    for row in rows {
        for (theme, c) in &row.counts {
            if c.images != GRID_SIZE * c.iterations {
                return Err(StoreError::InvalidEntry(format!(
                    "{} {theme}: {} images for {} iterations",
                    row.participant, c.images, c.iterations
                )));
            }
        }
        let session = store.create_session(Lang::Zh, &row.participant)?;
        for (theme, c) in &row.counts {
            let mut creation = None;
            for k in 0..c.iterations {
                let entry = IterationEntry {
                    theme: *theme,
                    tags: TagSelection::default(),
                    idea: String::new(),
                    outcome: OutcomeSummary {
                        status: OutcomeStatus::Accepted,
                        rule_ids: Vec::new(),
                    },
                    final_prompt: format!("pilot log replay: {} {theme} iteration {}", row.participant, k + 1),
                    seed: k as u64,
                    job_id: format!("pilot-{}-{theme}-{}", row.participant, k + 1),
                    image_ids: (0..GRID_SIZE)
                        .map(|i| synthetic_image_id(&row.participant, *theme, k, i))
                        .collect(),
                    timestamp: epoch,
                };
                creation = Some(store.record_iteration(&session.session_id, creation, entry)?);
            }
            if let Some(id) = creation {
                out.insert((row.participant.clone(), *theme), id);
            }
        }
    }
    Ok(out)
}
