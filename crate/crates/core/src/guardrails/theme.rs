use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The three creation themes of the studio, ordered from strictest to most
/// permissive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TaskTheme {
    HistoricalReconstruction,
    RiskEstimation,
    FuturePreservation,
}

impl TaskTheme {
    pub const ALL: [TaskTheme; 3] = [
        TaskTheme::HistoricalReconstruction,
        TaskTheme::RiskEstimation,
        TaskTheme::FuturePreservation,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            TaskTheme::HistoricalReconstruction => "historical-reconstruction",
            TaskTheme::RiskEstimation => "risk-estimation",
            TaskTheme::FuturePreservation => "future-preservation",
        }
    }

    /// 1-based task number as used in studio copy ("Task 1").
    pub fn number(self) -> u8 {
        match self {
            TaskTheme::HistoricalReconstruction => 1,
            TaskTheme::RiskEstimation => 2,
            TaskTheme::FuturePreservation => 3,
        }
    }

    pub fn title_en(self) -> &'static str {
        match self {
            TaskTheme::HistoricalReconstruction => "Historical Reconstruction",
            TaskTheme::RiskEstimation => "Risk Estimation",
            TaskTheme::FuturePreservation => "Future Preservation",
        }
    }

    pub fn title_zh(self) -> &'static str {
        match self {
            TaskTheme::HistoricalReconstruction => "历史重建",
            TaskTheme::RiskEstimation => "风险评估",
            TaskTheme::FuturePreservation => "未来保护",
        }
    }
}

impl fmt::Display for TaskTheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown task theme `{0}`")]
pub struct UnknownTheme(pub String);

impl FromStr for TaskTheme {
    type Err = UnknownTheme;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "historical-reconstruction" | "task1" | "1" => Ok(TaskTheme::HistoricalReconstruction),
            "risk-estimation" | "task2" | "2" => Ok(TaskTheme::RiskEstimation),
            "future-preservation" | "task3" | "3" => Ok(TaskTheme::FuturePreservation),
            _ => Err(UnknownTheme(s.to_string())),
        }
    }
}
