//! Three-tier authenticity guardrails.
//!
//! Tier 1 is the per-theme [`ConstraintProfile`], Tier 2 the tag selection
//! checked by [`validate_tags`], Tier 3 the free-text idea handled by
//! [`validate_idea`]. [`assemble_prompt`] joins the three into a prompt and
//! [`revalidate`] re-checks a prompt after the user edits it.

pub mod lint;
mod matcher;
mod profile;
mod prompt;
mod tags;
mod theme;
mod validate;

pub(crate) use matcher::is_cjk;
pub use matcher::{fold_phrase, Match, Matcher};
pub use profile::{
    constraint_profile, ConstraintProfile, TemporalRule, ARCHITECTURE_LOCK_CLAUSE, CULTURAL_CONTEXT_CLAUSE,
    INTERIOR_CLAUSE, TEMPORAL_1930S_CLAUSE,
};
pub use prompt::{
    assemble_prompt, effective_style, enrichment_clause, idea_clause, site_clause, tag_clause, Clause, ClauseOrigin,
    ScaffoldedPrompt,
};
pub use tags::{validate_tags, TagError, TagIssue, TagIssueKind, TagSelection};
pub use theme::{TaskTheme, UnknownTheme};
pub use validate::{
    check_idea, revalidate, validate_idea, OutcomeStatus, Resolution, Span, TraceOrigin, TraceSegment,
    ValidationOutcome, Violation,
};
