use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::guardrails::{OutcomeStatus, TagSelection, TaskTheme, ValidationOutcome};
use crate::imaging::GRID_SIZE;
use crate::lang::Lang;

pub type CreationId = u64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Session {
    pub session_id: String,
    pub created_at: DateTime<Utc>,
    pub language: Lang,
    /// Pseudonymous label such as `P7`; never a name.
    pub participant_label: String,
}

/// What the guardrails did to the idea, without the idea's full trace.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutcomeSummary {
    pub status: OutcomeStatus,
    pub rule_ids: Vec<String>,
}

impl From<&ValidationOutcome> for OutcomeSummary {
    fn from(o: &ValidationOutcome) -> Self {
        OutcomeSummary {
            status: o.status,
            rule_ids: o.violations.iter().map(|v| v.rule_id.clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IterationEntry {
    pub theme: TaskTheme,
    pub tags: TagSelection,
    pub idea: String,
    pub outcome: OutcomeSummary,
    pub final_prompt: String,
    pub seed: u64,
    pub job_id: String,
    pub image_ids: Vec<String>,
    pub timestamp: DateTime<Utc>,
}

impl IterationEntry {
    pub fn check(&self) -> Result<(), String> {
        if self.image_ids.len() != GRID_SIZE {
            return Err(format!("expected {GRID_SIZE} image ids, got {}", self.image_ids.len()));
        }
        if self.final_prompt.trim().is_empty() {
            return Err("final prompt is empty".into());
        }
        let mut ids = self.image_ids.clone();
        ids.sort();
        ids.dedup();
        if ids.len() != GRID_SIZE {
            return Err("image ids repeat".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreationRecord {
    pub creation_id: CreationId,
    pub session_id: String,
    pub theme: TaskTheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_id: Option<String>,
    pub iterations: Vec<IterationEntry>,
    pub saved_image_ids: Vec<String>,
}

impl CreationRecord {
    pub fn produced(&self, image_id: &str) -> Option<&IterationEntry> {
        self.iterations
            .iter()
            .find(|it| it.image_ids.iter().any(|i| i == image_id))
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("session storage failure: {0}")]
    StorageFailure(String),
    #[error("session log {path} line {line} is invalid: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("unknown creation {0}")]
    UnknownCreation(CreationId),
    #[error("invalid iteration entry: {0}")]
    InvalidEntry(String),
    #[error("image `{image_id}` was not produced in creation {creation_id}")]
    ImageNotInCreation { creation_id: CreationId, image_id: String },
    #[error("image `{image_id}` is not saved in creation {creation_id}")]
    ImageNotSaved { creation_id: CreationId, image_id: String },
    #[error("participant label must be 1-32 characters of letters, digits, `-` or `_`")]
    BadLabel,
}
