//! Idea elaboration: the model may enrich a validated idea, but whatever it
//! returns is filtered by the guardrails before anyone sees it.

use serde::{Deserialize, Serialize};

use super::port::{ChatTurn, LanguageModelPort};
use crate::corpus::Corpus;
use crate::guardrails::{
    constraint_profile, validate_idea, TagSelection, TaskTheme, TraceOrigin, ValidationOutcome, Violation,
};

/// Upper bound on elaboration length, in chars.
pub const MAX_ELABORATION_CHARS: usize = 600;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ElaborationSource {
    Template,
    Model,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Elaboration {
    pub text: String,
    pub source: ElaborationSource,
    /// Problems the guardrails found in the model's output.
    pub violations: Vec<Violation>,
}

/// Deterministic expansion: the idea followed by the selected tag phrases.
pub fn template_elaboration(idea: &str, selection: &TagSelection, corpus: &Corpus) -> String {
    let specs: Vec<&str> = selection
        .options(corpus)
        .into_iter()
        .map(|o| o.specification_text.as_str())
        .collect();
    let idea = idea.trim();
    let mut out = String::new();
    if !idea.is_empty() {
        out.push_str(idea);
        if !idea.ends_with(['.', '!', '?', '。', '！', '？']) {
            out.push('.');
        }
    }
    if !specs.is_empty() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(&specs.join("; "));
        out.push('.');
    }
    out
}

fn system_prompt(selection: &TagSelection, theme: TaskTheme, corpus: &Corpus) -> String {
    let profile = constraint_profile(theme, corpus.lexicon());
    let mut s = String::from(
        "You expand a visitor's short idea for a Kaiping Diaolou image into one vivid scene description of at most three sentences. Keep every phrase of the idea that describes the tower. Respect these rules:\n",
    );
    for clause in profile.clauses(selection.interior) {
        s.push_str("- ");
        s.push_str(clause);
        s.push('\n');
    }
    for opt in selection.options(corpus) {
        s.push_str("- ");
        s.push_str(&opt.specification_text);
        s.push('\n');
    }
    s.push_str("Reply with the scene description only.");
    s
}

/// Phrases the guardrails inserted into the idea; an elaboration must keep
/// them verbatim.
fn asserted_phrases(outcome: &ValidationOutcome) -> Vec<&str> {
    outcome
        .provenance_trace
        .iter()
        .filter(|s| matches!(s.origin, TraceOrigin::Rule { .. }))
        .map(|s| s.text.trim())
        .filter(|t| !t.is_empty())
        .collect()
}

/// Elaborates an idea that already went through [`validate_idea`].
pub fn elaborate_idea(
    outcome: &ValidationOutcome,
    selection: &TagSelection,
    theme: TaskTheme,
    corpus: &Corpus,
    port: &dyn LanguageModelPort,
) -> Elaboration {
    let idea = outcome.normalized_idea.trim();
    let template = || Elaboration {
        text: template_elaboration(idea, selection, corpus),
        source: ElaborationSource::Template,
        violations: Vec::new(),
    };
    if idea.is_empty() {
        return template();
    }
    let reply = match port.complete(
        &system_prompt(selection, theme, corpus),
        &[ChatTurn::user(idea)],
        MAX_ELABORATION_CHARS,
    ) {
        Ok(r) if !r.trim().is_empty() => r,
        Ok(_) => return template(),
        Err(e) => {
            tracing::debug!(error = %e, "elaboration falls back to template");
            return template();
        }
    };
    let filtered = validate_idea(reply.trim(), selection, theme, corpus);
    let text = filtered.normalized_idea.trim().to_string();
    if text.is_empty() || asserted_phrases(outcome).iter().any(|p| !text.contains(p)) {
        let mut t = template();
        t.violations = filtered.violations;
        return t;
    }
    Elaboration {
        text,
        source: ElaborationSource::Model,
        violations: filtered.violations,
    }
}
