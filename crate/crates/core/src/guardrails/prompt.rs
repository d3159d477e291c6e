use serde::{Deserialize, Serialize};

use super::profile::constraint_profile;
use super::tags::TagSelection;
use super::validate::{OutcomeStatus, ValidationOutcome};
use super::TaskTheme;
use crate::corpus::{CategoryId, Corpus, DiaolouSite, TagCategory, TagOption};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClauseOrigin {
    Tier1Invariant,
    Site,
    Tag { category: CategoryId },
    Idea,
    Enrichment,
}

impl ClauseOrigin {
    pub fn label(self) -> String {
        match self {
            ClauseOrigin::Tier1Invariant => "tier-1".into(),
            ClauseOrigin::Site => "site".into(),
            ClauseOrigin::Tag { category } => format!("tag:{category}"),
            ClauseOrigin::Idea => "idea".into(),
            ClauseOrigin::Enrichment => "enrichment".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clause {
    pub text: String,
    pub origin: ClauseOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldedPrompt {
    pub theme: TaskTheme,
    pub site_id: String,
    pub clauses: Vec<Clause>,
    pub rendered: String,
}

impl ScaffoldedPrompt {
    /// One `[origin] text` line per clause.
    pub fn structured_view(&self) -> Vec<String> {
        self.clauses
            .iter()
            .map(|c| format!("[{}] {}", c.origin.label(), c.text))
            .collect()
    }
}

/// Prompt clause contributed by a selected tag.
pub fn tag_clause(category: &TagCategory, option: &TagOption) -> String {
    format!("{}: {}.", category.prompt_heading, option.specification_text)
}

pub fn site_clause(site: &DiaolouSite, corpus: &Corpus) -> String {
    let style = corpus
        .option(&site.style)
        .map_or(site.style.as_str(), |o| o.label.en.as_str());
    format!(
        "Base exemplar: {} ({}) in {}, Kaiping, a {} style Diaolou.",
        site.names.en, site.names.zh, site.cluster.en, style
    )
}

/// The selected style tag wins over the site's own style.
pub fn effective_style<'a>(site: &'a DiaolouSite, selection: &'a TagSelection) -> &'a str {
    selection.get(CategoryId::ArchitecturalStyle).unwrap_or(&site.style)
}

pub fn enrichment_clause(style: &str, corpus: &Corpus) -> Option<String> {
    let phrases: Vec<&str> = corpus
        .enrichment()
        .iter()
        .filter(|e| e.applicable_styles.admits(style))
        .map(|e| e.phrase.en.as_str())
        .collect();
    if phrases.is_empty() {
        return None;
    }
    Some(format!("Diaolou details: {}.", phrases.join(", ")))
}

pub fn idea_clause(idea: &str) -> Option<String> {
    let idea = idea.trim();
    if idea.is_empty() {
        return None;
    }
    let end = idea.chars().last().unwrap();
    let stop = if matches!(end, '.' | '!' | '?' | '。' | '！' | '？') {
        ""
    } else {
        "."
    };
    Some(format!("Scene: {idea}{stop}"))
}

/// Builds the prompt in canonical clause order: Tier-1 invariants, site,
/// tags by category, idea, enrichment.
pub fn assemble_prompt(
    site: &DiaolouSite,
    selection: &TagSelection,
    outcome: &ValidationOutcome,
    theme: TaskTheme,
    corpus: &Corpus,
) -> ScaffoldedPrompt {
    debug_assert!(outcome.status != OutcomeStatus::TagError);
    let profile = constraint_profile(theme, corpus.lexicon());
    let mut clauses: Vec<Clause> = profile
        .clauses(selection.interior)
        .into_iter()
        .map(|t| Clause {
            text: t.to_string(),
            origin: ClauseOrigin::Tier1Invariant,
        })
        .collect();
    clauses.push(Clause {
        text: site_clause(site, corpus),
        origin: ClauseOrigin::Site,
    });
    for opt in selection.options(corpus) {
        clauses.push(Clause {
            text: tag_clause(corpus.category(opt.category), opt),
            origin: ClauseOrigin::Tag { category: opt.category },
        });
    }
    if let Some(text) = idea_clause(&outcome.normalized_idea) {
        clauses.push(Clause {
            text,
            origin: ClauseOrigin::Idea,
        });
    }
    if let Some(text) = enrichment_clause(effective_style(site, selection), corpus) {
        clauses.push(Clause {
            text,
            origin: ClauseOrigin::Enrichment,
        });
    }
    let rendered = clauses.iter().map(|c| c.text.as_str()).collect::<Vec<_>>().join(" ");
    ScaffoldedPrompt {
        theme,
        site_id: site.site_id.clone(),
        clauses,
        rendered,
    }
}
