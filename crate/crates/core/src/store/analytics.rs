//! Per-theme effort statistics over participants.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::log::StoreState;
use crate::guardrails::TaskTheme;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanSd {
    pub mean: f64,
    /// Population standard deviation (divides by n).
    pub sd: f64,
}

impl MeanSd {
    pub fn of(values: &[f64]) -> MeanSd {
        if values.is_empty() {
            return MeanSd { mean: 0.0, sd: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        MeanSd { mean, sd: var.sqrt() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSummary {
    pub theme: TaskTheme,
    pub participants: usize,
    pub total_iterations: usize,
    pub total_images: usize,
    pub iterations: MeanSd,
    pub images: MeanSd,
}

/// Iterations and images per participant label for one theme. Participants
/// who never iterated on the theme are absent.
pub fn participant_totals(state: &StoreState, theme: TaskTheme) -> BTreeMap<String, (usize, usize)> {
    let mut out: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for c in state.creations().filter(|c| c.theme == theme) {
        let Some(session) = state.session(&c.session_id) else {
            continue;
        };
        for it in &c.iterations {
            let t = out.entry(session.participant_label.clone()).or_default();
            t.0 += 1;
            t.1 += it.image_ids.len();
        }
    }
    out
}

/// One summary per theme that has data, strictest theme first.
pub fn compute_summary(state: &StoreState, theme: Option<TaskTheme>) -> Vec<TaskSummary> {
    TaskTheme::ALL
        .into_iter()
        .filter(|t| theme.is_none_or(|f| f == *t))
        .filter_map(|t| {
            let totals = participant_totals(state, t);
            if totals.is_empty() {
                return None;
            }
            let iters: Vec<f64> = totals.values().map(|v| v.0 as f64).collect();
            let images: Vec<f64> = totals.values().map(|v| v.1 as f64).collect();
            Some(TaskSummary {
                theme: t,
                participants: totals.len(),
                total_iterations: totals.values().map(|v| v.0).sum(),
                total_images: totals.values().map(|v| v.1).sum(),
                iterations: MeanSd::of(&iters),
                images: MeanSd::of(&images),
            })
        })
        .collect()
}

/// Tab-separated table with a header row.
pub fn summary_tsv(rows: &[TaskSummary]) -> String {
    let mut out = String::from("theme\tparticipants\titerations_mean\titerations_sd\timages_mean\timages_sd\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{}\t{}\t{:.3}\t{:.3}\t{:.3}\t{:.3}",
            r.theme, r.participants, r.iterations.mean, r.iterations.sd, r.images.mean, r.images.sd
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn population_sd() {
        let m = MeanSd::of(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]);
        assert_eq!(m.mean, 5.0);
        assert_eq!(m.sd, 2.0);
        assert_eq!(MeanSd::of(&[3.0]).sd, 0.0);
        assert_eq!(MeanSd::of(&[]).mean, 0.0);
    }

    #[test]
    fn empty_store_gives_no_rows() {
        let s = StoreState::default();
        assert!(compute_summary(&s, None).is_empty());
        assert_eq!(summary_tsv(&[]).lines().count(), 1);
    }
}
