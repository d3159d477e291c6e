//! Lexicon data: conflict-term groups referenced by tag options, enrichment
//! vocabulary, and the theme-scoped rejection rules.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::guardrails::TaskTheme;
use crate::lang::{Bilingual, Lang};
use crate::record::{Record, RecordError};

/// A match phrase as authored, tagged with its language.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Phrase {
    pub lang: Lang,
    pub text: String,
}

/// Named group of phrases, e.g. `time.night`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermGroup {
    pub term_id: String,
    pub phrases: Vec<Phrase>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "phrase", rename_all = "kebab-case")]
pub enum RuleAction {
    Remove,
    Replace(Bilingual),
    Relocate(Bilingual),
}

impl RuleAction {
    pub fn payload(&self) -> Option<&Bilingual> {
        match self {
            RuleAction::Remove => None,
            RuleAction::Replace(p) | RuleAction::Relocate(p) => Some(p),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleEntry {
    pub rule_id: String,
    pub tier: u8,
    pub theme_scope: BTreeSet<TaskTheme>,
    pub trigger_terms: Vec<Phrase>,
    pub action: RuleAction,
    pub explanation: Bilingual,
    pub alternatives: Vec<Bilingual>,
}

impl RuleEntry {
    pub fn active_in(&self, theme: TaskTheme) -> bool {
        self.theme_scope.contains(&theme)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StyleScope {
    Any,
    Only(Vec<String>),
}

impl StyleScope {
    pub fn admits(&self, style_option: &str) -> bool {
        match self {
            StyleScope::Any => true,
            StyleScope::Only(styles) => styles.iter().any(|s| s == style_option),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnrichmentTerm {
    pub term_id: String,
    pub aspect: String,
    pub phrase: Bilingual,
    pub applicable_styles: StyleScope,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub terms: Vec<TermGroup>,
    pub enrichment: Vec<EnrichmentTerm>,
    pub rules: Vec<RuleEntry>,
}

impl Lexicon {
    pub fn term(&self, id: &str) -> Option<&TermGroup> {
        self.terms.iter().find(|t| t.term_id == id)
    }

    pub fn rule(&self, id: &str) -> Option<&RuleEntry> {
        self.rules.iter().find(|r| r.rule_id == id)
    }

    pub fn active_rules(&self, theme: TaskTheme) -> impl Iterator<Item = &RuleEntry> {
        self.rules.iter().filter(move |r| r.active_in(theme))
    }

    /// Case-folded trigger phrases active under `theme`.
    pub fn active_triggers(&self, theme: TaskTheme) -> BTreeSet<String> {
        self.active_rules(theme)
            .flat_map(|r| r.trigger_terms.iter())
            .map(|p| crate::guardrails::fold_phrase(&p.text))
            .collect()
    }

    pub(crate) fn absorb(&mut self, rec: &Record) -> Result<(), RecordError> {
        match rec.kind().0 {
            "term" => self.terms.push(parse_term(rec)?),
            "enrichment" => self.enrichment.push(parse_enrichment(rec)?),
            "rule" => self.rules.push(parse_rule(rec)?),
            other => return Err(rec.error(rec.line(), format!("unexpected record kind `{other}` in lexicon"))),
        }
        Ok(())
    }
}

fn phrases(rec: &Record, prefix: &str) -> Result<Vec<Phrase>, RecordError> {
    let mut out = Vec::new();
    for f in rec.fields() {
        let lang = match f.key.strip_prefix(prefix) {
            Some(".en") => Lang::En,
            Some(".zh") => Lang::Zh,
            _ => continue,
        };
        if f.value.trim().is_empty() {
            return Err(rec.error(f.line, format!("empty `{}`", f.key)));
        }
        out.push(Phrase {
            lang,
            text: f.value.clone(),
        });
    }
    Ok(out)
}

pub(crate) fn bilingual(rec: &Record, prefix: &str) -> Result<Bilingual, RecordError> {
    let zh = rec.one(&format!("{prefix}.zh"))?;
    let en = rec.one(&format!("{prefix}.en"))?;
    let b = Bilingual::new(zh, en);
    if !b.is_complete() {
        return Err(rec.error(
            rec.line_of(&format!("{prefix}.en")),
            format!("`{prefix}` must be given in zh and en"),
        ));
    }
    Ok(b)
}

fn parse_term(rec: &Record) -> Result<TermGroup, RecordError> {
    rec.only_keys(&["term", "phrase.en", "phrase.zh"])?;
    let phrases = phrases(rec, "phrase")?;
    if phrases.is_empty() {
        return Err(rec.error(rec.line(), "term needs at least one phrase"));
    }
    Ok(TermGroup {
        term_id: rec.kind().1.to_string(),
        phrases,
    })
}

fn parse_enrichment(rec: &Record) -> Result<EnrichmentTerm, RecordError> {
    rec.only_keys(&["enrichment", "aspect", "phrase.en", "phrase.zh", "style"])?;
    let styles = rec.all("style")?;
    let applicable_styles = if styles.is_empty() || styles == ["any"] {
        StyleScope::Any
    } else if styles.contains(&"any") {
        return Err(rec.error(
            rec.line_of("style"),
            "`style: any` cannot be combined with named styles",
        ));
    } else {
        StyleScope::Only(styles.iter().map(|s| s.to_string()).collect())
    };
    Ok(EnrichmentTerm {
        term_id: rec.kind().1.to_string(),
        aspect: rec.one("aspect")?.to_string(),
        phrase: bilingual(rec, "phrase")?,
        applicable_styles,
    })
}

fn parse_rule(rec: &Record) -> Result<RuleEntry, RecordError> {
    rec.only_keys(&[
        "rule",
        "tier",
        "theme",
        "trigger.en",
        "trigger.zh",
        "action",
        "replacement.en",
        "replacement.zh",
        "setting.en",
        "setting.zh",
        "explanation.en",
        "explanation.zh",
        "alternative.en",
        "alternative.zh",
    ])?;
    let rule_id = rec.kind().1.to_string();
    let tier: u8 = rec.parse_num("tier")?;
    if !(1..=3).contains(&tier) {
        return Err(rec.error(rec.line_of("tier"), format!("tier must be 1, 2 or 3, got {tier}")));
    }
    let mut theme_scope = BTreeSet::new();
    for t in rec.all("theme")? {
        let theme = t
            .parse::<TaskTheme>()
            .map_err(|e| rec.error(rec.line_of("theme"), e.to_string()))?;
        theme_scope.insert(theme);
    }
    if theme_scope.is_empty() {
        return Err(rec.error(rec.line(), "rule must list at least one theme"));
    }
    let trigger_terms = phrases(rec, "trigger")?;
    if trigger_terms.is_empty() {
        return Err(rec.error(rec.line(), "rule needs at least one trigger"));
    }
    let action = match rec.one("action")? {
        "remove" => RuleAction::Remove,
        "replace" => RuleAction::Replace(bilingual(rec, "replacement")?),
        "relocate" => RuleAction::Relocate(bilingual(rec, "setting")?),
        other => {
            return Err(rec.error(rec.line_of("action"), format!("unknown action `{other}`")));
        }
    };
    let has_payload_keys = ["replacement.en", "replacement.zh", "setting.en", "setting.zh"]
        .iter()
        .filter(|k| rec.fields().iter().any(|f| f.key == **k))
        .count();
    let expected = usize::from(action.payload().is_some()) * 2;
    if has_payload_keys != expected {
        return Err(rec.error(rec.line_of("action"), "payload fields do not match the action"));
    }
    let en = rec.all("alternative.en")?;
    let zh = rec.all("alternative.zh")?;
    if en.is_empty() || en.len() != zh.len() {
        return Err(rec.error(
            rec.line_of("alternative.en"),
            "rule needs at least one alternative, paired in zh and en",
        ));
    }
    Ok(RuleEntry {
        rule_id,
        tier,
        theme_scope,
        trigger_terms,
        action,
        explanation: bilingual(rec, "explanation")?,
        alternatives: zh.iter().zip(en).map(|(z, e)| Bilingual::new(*z, e)).collect(),
    })
}
