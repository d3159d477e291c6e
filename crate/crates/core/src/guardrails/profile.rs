use serde::{Deserialize, Serialize};

use super::TaskTheme;
use crate::corpus::Lexicon;

pub const ARCHITECTURE_LOCK_CLAUSE: &str = "Preserve the Diaolou's structural identity exactly as in the base rendering: architectural form, proportions, façade details, window positions, and roofline remain unchanged; only the surrounding environment may be modified.";

pub const CULTURAL_CONTEXT_CLAUSE: &str = "The scene is set in Kaiping, Guangdong, China, and every human presence and cultural element stays consistent with Chinese cultural heritage.";

pub const TEMPORAL_1930S_CLAUSE: &str =
    "Time period: strictly the 1930s; every element conforms to that historical period.";

const TEMPORAL_PRESENT_CLAUSE: &str =
    "Time period: the present day or the near future, depicting realistic threats to the tower.";

const TEMPORAL_SPECULATIVE_CLAUSE: &str =
    "Time period: a speculative future in which the tower is safeguarded for coming generations.";

pub const INTERIOR_CLAUSE: &str = "Interior view: walls, layout, windows, doors, ceiling and floor remain unchanged; only decorative elements change, drawn from period Chinese decorative arts; the room is left unfurnished and unoccupied.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemporalRule {
    #[serde(rename = "strict-1930s")]
    Strict1930s,
    PresentOrNearFuture,
    SpeculativeFuture,
}

/// Tier-1 rules of one theme.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintProfile {
    pub theme: TaskTheme,
    pub temporal_rule: TemporalRule,
    pub temporal_clause: String,
    pub architecture_lock_clause: String,
    pub cultural_context_clause: String,
    pub allowed_content: Vec<String>,
    pub allowed_content_clause: String,
    /// Active rule ids in authoring order.
    pub rejection_lexicon: Vec<String>,
}

impl ConstraintProfile {
    /// Tier-1 clauses in prompt order.
    pub fn clauses(&self, interior: bool) -> Vec<&str> {
        let mut out = vec![
            self.architecture_lock_clause.as_str(),
            self.cultural_context_clause.as_str(),
            self.temporal_clause.as_str(),
            self.allowed_content_clause.as_str(),
        ];
        if interior && self.theme == TaskTheme::HistoricalReconstruction {
            out.push(INTERIOR_CLAUSE);
        }
        out
    }
}

pub fn constraint_profile(theme: TaskTheme, lexicon: &Lexicon) -> ConstraintProfile {
    let (temporal_rule, temporal_clause, allowed, allowed_clause): (_, _, &[&str], _) = match theme {
        TaskTheme::HistoricalReconstruction => (
            TemporalRule::Strict1930s,
            TEMPORAL_1930S_CLAUSE,
            &["period-kaiping-life", "interior-decoration"],
            "Allowed content: village life of 1930s Kaiping only.",
        ),
        TaskTheme::RiskEstimation => (
            TemporalRule::PresentOrNearFuture,
            TEMPORAL_PRESENT_CLAUSE,
            &[
                "water-damage",
                "weathering",
                "structural-deterioration",
                "foundation-issues",
                "visitor-impact",
                "environmental-threats",
            ],
            "Allowed content: water damage, weathering, structural deterioration, foundation issues, visitor impact, and environmental threats.",
        ),
        TaskTheme::FuturePreservation => (
            TemporalRule::SpeculativeFuture,
            TEMPORAL_SPECULATIVE_CLAUSE,
            &[
                "future-scenarios",
                "community-participation",
                "sustainable-development",
                "heritage-protection",
                "adaptive-reuse",
            ],
            "Allowed content: preservation scenarios, community participation, sustainable development, heritage protection strategies, and adaptive reuse that keeps the tower recognizable.",
        ),
    };
    ConstraintProfile {
        theme,
        temporal_rule,
        temporal_clause: temporal_clause.to_string(),
        architecture_lock_clause: ARCHITECTURE_LOCK_CLAUSE.to_string(),
        cultural_context_clause: CULTURAL_CONTEXT_CLAUSE.to_string(),
        allowed_content: allowed.iter().map(|s| s.to_string()).collect(),
        allowed_content_clause: allowed_clause.to_string(),
        rejection_lexicon: lexicon.active_rules(theme).map(|r| r.rule_id.clone()).collect(),
    }
}
