//! Consistency checks between the rejection lexicon and every piece of text
//! the engine itself inserts into prompts.

use std::collections::BTreeSet;

use super::matcher::Matcher;
use super::profile::constraint_profile;
use super::prompt::{enrichment_clause, site_clause, tag_clause};
use super::validate::tidy_text;
use super::TaskTheme;
use crate::corpus::{Corpus, RuleEntry, TagOption};

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct LintReport {
    pub errors: Vec<String>,
    /// Active rule count per theme, strictest first.
    pub active_rules: Vec<(TaskTheme, usize)>,
}

impl LintReport {
    pub fn is_clean(&self) -> bool {
        self.errors.is_empty()
    }
}

fn trigger_matcher(corpus: &Corpus, theme: TaskTheme) -> (Matcher, Vec<&RuleEntry>) {
    let mut phrases = Vec::new();
    let mut owners = Vec::new();
    for rule in corpus.lexicon().active_rules(theme) {
        for p in &rule.trigger_terms {
            phrases.push(p.text.as_str());
            owners.push(rule);
        }
    }
    (Matcher::new(phrases), owners)
}

fn conflict_phrases<'c>(options: impl Iterator<Item = &'c TagOption>, corpus: &'c Corpus) -> Vec<&'c str> {
    options
        .flat_map(|o| o.conflict_terms.iter())
        .filter_map(|t| corpus.lexicon().term(t))
        .flat_map(|g| g.phrases.iter().map(|p| p.text.as_str()))
        .collect()
}

fn first_hit(m: &Matcher, text: &str) -> Option<String> {
    m.find(text)
        .first()
        .map(|h| text.chars().skip(h.start).take(h.end - h.start).collect())
}

fn check_clause(errors: &mut Vec<String>, what: String, text: &str, triggers: &Matcher, conflicts: &Matcher) {
    if let Some(hit) = first_hit(triggers, text) {
        errors.push(format!("{what} contains the rejected phrase \u{201c}{hit}\u{201d}"));
    }
    if let Some(hit) = first_hit(conflicts, text) {
        errors.push(format!("{what} contains the tag-conflict phrase \u{201c}{hit}\u{201d}"));
    }
    if tidy_text(text) != text {
        errors.push(format!("{what} is not in normalized form"));
    }
}

pub fn lint_corpus(corpus: &Corpus) -> LintReport {
    let mut errors = Vec::new();
    let lex = corpus.lexicon();

    let sets: Vec<BTreeSet<String>> = TaskTheme::ALL.iter().map(|t| lex.active_triggers(*t)).collect();
    for w in 0..2 {
        let (strict, loose) = (&sets[w], &sets[w + 1]);
        for t in loose.difference(strict) {
            errors.push(format!(
                "trigger sets do not nest: `{t}` is active under {} but not under {}",
                TaskTheme::ALL[w + 1],
                TaskTheme::ALL[w]
            ));
        }
    }

    let all_options = || corpus.categories().iter().flat_map(|c| c.options.iter());
    let every_conflict = Matcher::new(conflict_phrases(all_options(), corpus));
    let matchers: Vec<_> = TaskTheme::ALL
        .iter()
        .map(|t| (*t, trigger_matcher(corpus, *t)))
        .collect();
    let strictest = &matchers[0].1 .0;

    for rule in &lex.rules {
        let mut texts: Vec<&str> = Vec::new();
        if let Some(p) = rule.action.payload() {
            texts.extend([p.zh.as_str(), p.en.as_str()]);
        }
        for alt in &rule.alternatives {
            texts.extend([alt.zh.as_str(), alt.en.as_str()]);
        }
        for (theme, (m, owners)) in &matchers {
            if !rule.active_in(*theme) {
                continue;
            }
            for text in &texts {
                for h in m.find(text) {
                    errors.push(format!(
                        "rule `{}` suggests \u{201c}{text}\u{201d}, which `{}` rejects under {theme}",
                        rule.rule_id, owners[h.pattern].rule_id
                    ));
                }
            }
        }
        if let Some(p) = rule.action.payload() {
            for text in [&p.zh, &p.en] {
                if let Some(hit) = first_hit(&every_conflict, text) {
                    errors.push(format!(
                        "rule `{}` inserts \u{201c}{hit}\u{201d}, which contradicts a tag option",
                        rule.rule_id
                    ));
                }
            }
        }
    }

    for (theme, (m, _)) in &matchers {
        let profile = constraint_profile(*theme, lex);
        for clause in profile.clauses(true) {
            check_clause(
                &mut errors,
                format!("{theme} clause \u{201c}{clause}\u{201d}"),
                clause,
                m,
                &every_conflict,
            );
        }
    }
    for site in corpus.sites() {
        check_clause(
            &mut errors,
            format!("site clause of `{}`", site.site_id),
            &site_clause(site, corpus),
            strictest,
            &every_conflict,
        );
    }
    for style in &corpus.category(crate::corpus::CategoryId::ArchitecturalStyle).options {
        if let Some(text) = enrichment_clause(&style.option_id, corpus) {
            check_clause(
                &mut errors,
                format!("enrichment for `{}`", style.option_id),
                &text,
                strictest,
                &every_conflict,
            );
        }
    }
    for cat in corpus.categories() {
        let others = Matcher::new(conflict_phrases(
            all_options().filter(|o| o.category != cat.category_id),
            corpus,
        ));
        for opt in &cat.options {
            let text = tag_clause(cat, opt);
            check_clause(
                &mut errors,
                format!("tag clause of `{}`", opt.option_id),
                &text,
                strictest,
                &others,
            );
            let own = Matcher::new(conflict_phrases(std::iter::once(opt), corpus));
            if let Some(hit) = first_hit(&own, &text) {
                errors.push(format!(
                    "tag clause of `{}` contradicts itself with \u{201c}{hit}\u{201d}",
                    opt.option_id
                ));
            }
        }
    }

    LintReport {
        errors,
        active_rules: TaskTheme::ALL
            .iter()
            .map(|t| (*t, lex.active_rules(*t).count()))
            .collect(),
    }
}
