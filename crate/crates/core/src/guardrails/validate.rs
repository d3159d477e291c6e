//! Tier-3 idea validation and normalization.

use serde::{Deserialize, Serialize};

use super::matcher::{is_word_char, Matcher};
use super::profile::constraint_profile;
use super::prompt::{tag_clause, ClauseOrigin};
use super::tags::{validate_tags, TagIssue, TagIssueKind, TagSelection};
use super::TaskTheme;
use crate::corpus::{Corpus, RuleAction, RuleEntry, TagOption};
use crate::lang::{Bilingual, Lang};

/// Fixed-point rounds before leftover triggers are cut without cleanup.
const MAX_ROUNDS: usize = 8;

const ARTICLES: [&str; 3] = ["a", "an", "the"];
const LEADING_CONNECTORS: [&str; 11] = [
    "with",
    "and",
    "or",
    "of",
    "featuring",
    "including",
    "by",
    "from",
    "plus",
    "at",
    "during",
];
const TRAILING_CONNECTORS: [&str; 3] = ["and", "or", "with"];
const CJK_CONNECTORS: [char; 5] = ['和', '与', '及', '跟', '或'];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resolution {
    Removed,
    Replaced,
    Relocated,
    OverriddenByTag,
    /// The request itself was refused; nothing in the text changed.
    Rejected,
}

/// Char range (Unicode scalar values) into the submitted text.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub tier: u8,
    pub rule_id: String,
    pub offending_span: Span,
    pub offending_text: String,
    pub resolution: Resolution,
    pub explanation: Bilingual,
    pub alternatives: Vec<Bilingual>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OutcomeStatus {
    Accepted,
    Normalized,
    TagError,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceOrigin {
    /// Text kept from the submission; `start..end` indexes the submission.
    Input {
        start: usize,
        end: usize,
    },
    Rule {
        rule_id: String,
    },
    Reasserted {
        clause: ClauseOrigin,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSegment {
    pub text: String,
    pub origin: TraceOrigin,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationOutcome {
    pub status: OutcomeStatus,
    pub violations: Vec<Violation>,
    pub normalized_idea: String,
    pub provenance_trace: Vec<TraceSegment>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tag_errors: Vec<TagIssue>,
}

impl ValidationOutcome {
    pub fn is_accepted(&self) -> bool {
        self.status == OutcomeStatus::Accepted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Src {
    Input(usize),
    Inserted(usize),
}

#[derive(Debug, Clone, Copy)]
struct Slot {
    ch: char,
    src: Src,
}

enum Hit<'c> {
    Conflict(&'c TagOption),
    Rule(&'c RuleEntry, Lang),
}

struct PatternSet<'c> {
    matcher: Matcher,
    hits: Vec<Hit<'c>>,
}

fn conflict_patterns<'c>(selection: &TagSelection, corpus: &'c Corpus) -> PatternSet<'c> {
    let mut phrases = Vec::new();
    let mut hits = Vec::new();
    for opt in selection.options(corpus) {
        for term in &opt.conflict_terms {
            if let Some(group) = corpus.lexicon().term(term) {
                for p in &group.phrases {
                    phrases.push(p.text.as_str());
                    hits.push(Hit::Conflict(opt));
                }
            }
        }
    }
    PatternSet {
        matcher: Matcher::new(phrases),
        hits,
    }
}

fn rule_patterns(theme: TaskTheme, corpus: &Corpus) -> PatternSet<'_> {
    let mut phrases = Vec::new();
    let mut hits = Vec::new();
    for rule in corpus.lexicon().active_rules(theme) {
        for p in &rule.trigger_terms {
            phrases.push(p.text.as_str());
            hits.push(Hit::Rule(rule, p.lang));
        }
    }
    PatternSet {
        matcher: Matcher::new(phrases),
        hits,
    }
}

struct Work {
    input: Vec<char>,
    slots: Vec<Slot>,
    labels: Vec<TraceOrigin>,
    violations: Vec<Violation>,
}

impl Work {
    fn new(text: &str) -> Work {
        let input: Vec<char> = text.chars().collect();
        let slots = input
            .iter()
            .enumerate()
            .map(|(i, &ch)| Slot { ch, src: Src::Input(i) })
            .collect();
        Work {
            input,
            slots,
            labels: Vec::new(),
            violations: Vec::new(),
        }
    }

    fn text(&self) -> String {
        self.slots.iter().map(|s| s.ch).collect()
    }

    /// Smallest input range covering the slots `s..e`.
    fn span_of(&self, s: usize, e: usize) -> Span {
        let inputs = self.slots[s..e].iter().filter_map(|sl| match sl.src {
            Src::Input(i) => Some(i),
            Src::Inserted(_) => None,
        });
        let (mut lo, mut hi) = (usize::MAX, 0);
        for i in inputs {
            lo = lo.min(i);
            hi = hi.max(i + 1);
        }
        if lo == usize::MAX {
            let at = self.slots[e..]
                .iter()
                .find_map(|sl| match sl.src {
                    Src::Input(i) => Some(i),
                    Src::Inserted(_) => None,
                })
                .unwrap_or(self.input.len());
            return Span { start: at, end: at };
        }
        Span { start: lo, end: hi }
    }

    fn word_before(&self, s: usize, floor: usize) -> Option<(usize, String)> {
        let mut i = s;
        while i > floor && self.slots[i - 1].ch == ' ' {
            i -= 1;
        }
        let end = i;
        while i > floor && is_word_char(self.slots[i - 1].ch) {
            i -= 1;
        }
        if i == end || (i > 0 && is_word_char(self.slots[i - 1].ch)) {
            return None;
        }
        let word: String = self.slots[i..end].iter().map(|s| s.ch).collect();
        Some((i, word.to_lowercase()))
    }

    fn word_after(&self, e: usize, ceil: usize) -> Option<(usize, String)> {
        let mut i = e;
        while i < ceil && self.slots[i].ch == ' ' {
            i += 1;
        }
        let start = i;
        while i < ceil && is_word_char(self.slots[i].ch) {
            i += 1;
        }
        if i == start || (i < self.slots.len() && is_word_char(self.slots[i].ch)) {
            return None;
        }
        let word: String = self.slots[start..i].iter().map(|s| s.ch).collect();
        Some((i, word.to_lowercase()))
    }

    fn absorb_article(&self, s: usize, floor: usize) -> usize {
        match self.word_before(s, floor) {
            Some((ws, w)) if ARTICLES.contains(&w.as_str()) => ws,
            _ => s,
        }
    }

    /// Deletes `s..e` together with a dangling article and connector;
    /// returns where the deletion started.
    fn remove(&mut self, s: usize, e: usize, floor: usize, ceil: usize) -> usize {
        let mut s = self.absorb_article(s, floor);
        let mut e = e;
        let mut took_leading = false;
        if let Some((ws, w)) = self.word_before(s, floor) {
            if LEADING_CONNECTORS.contains(&w.as_str()) {
                s = ws;
                took_leading = true;
            }
        } else if s > floor && CJK_CONNECTORS.contains(&self.slots[s - 1].ch) {
            s -= 1;
            took_leading = true;
        }
        if !took_leading {
            match self.word_after(e, ceil) {
                Some((we, w)) if TRAILING_CONNECTORS.contains(&w.as_str()) => e = we,
                None if e < ceil && CJK_CONNECTORS.contains(&self.slots[e].ch) => e += 1,
                _ => {}
            }
        }
        self.slots.drain(s..e);
        s
    }

    fn replace(&mut self, s: usize, e: usize, floor: usize, payload: &str, label: usize) -> usize {
        let s = self.absorb_article(s, floor);
        let mut ins: Vec<Slot> = payload
            .chars()
            .map(|ch| Slot {
                ch,
                src: Src::Inserted(label),
            })
            .collect();
        let space = Slot {
            ch: ' ',
            src: Src::Inserted(label),
        };
        if s > 0 && is_word_char(self.slots[s - 1].ch) && ins.first().is_some_and(|f| is_word_char(f.ch)) {
            ins.insert(0, space);
        }
        if e < self.slots.len() && is_word_char(self.slots[e].ch) && ins.last().is_some_and(|l| is_word_char(l.ch)) {
            ins.push(space);
        }
        self.slots.splice(s..e, ins);
        s
    }

    fn label(&mut self, origin: TraceOrigin) -> usize {
        if let Some(i) = self.labels.iter().position(|l| *l == origin) {
            return i;
        }
        self.labels.push(origin);
        self.labels.len() - 1
    }

    /// Runs one pattern set over the text; returns whether anything matched.
    fn pass(&mut self, set: &PatternSet) -> bool {
        let text = self.text();
        let matches = set.matcher.find(&text);
        if matches.is_empty() {
            return false;
        }
        for m in &matches {
            let span = self.span_of(m.start, m.end);
            let offending_text: String = self.slots[m.start..m.end].iter().map(|s| s.ch).collect();
            let v = match &set.hits[m.pattern] {
                Hit::Conflict(opt) => Violation {
                    tier: 2,
                    rule_id: format!("tag.{}", opt.option_id),
                    offending_span: span,
                    resolution: Resolution::OverriddenByTag,
                    explanation: Bilingual::new(
                        format!(
                            "所选标签“{}”优先，与之冲突的“{}”已被移除。",
                            opt.label.zh, offending_text
                        ),
                        format!(
                            "The selected tag \u{201c}{}\u{201d} takes precedence, so \u{201c}{}\u{201d} was removed.",
                            opt.label.en, offending_text
                        ),
                    ),
                    alternatives: vec![Bilingual::new(opt.label.zh.clone(), opt.specification_text.clone())],
                    offending_text,
                },
                Hit::Rule(rule, _) => Violation {
                    tier: rule.tier,
                    rule_id: rule.rule_id.clone(),
                    offending_span: span,
                    resolution: match rule.action {
                        RuleAction::Remove => Resolution::Removed,
                        RuleAction::Replace(_) => Resolution::Replaced,
                        RuleAction::Relocate(_) => Resolution::Relocated,
                    },
                    explanation: rule.explanation.clone(),
                    alternatives: rule.alternatives.clone(),
                    offending_text,
                },
            };
            self.violations.push(v);
        }
        // Right to left, so earlier offsets stay valid. Each edit may reach
        // back to the previous match's end, so the next ceiling is where the
        // edit actually began.
        let mut ceil = self.slots.len();
        for (i, m) in matches.iter().enumerate().rev() {
            let floor = if i > 0 { matches[i - 1].end } else { 0 };
            ceil = match &set.hits[m.pattern] {
                Hit::Conflict(_) => self.remove(m.start, m.end, floor, ceil),
                Hit::Rule(rule, lang) => match rule.action.payload() {
                    None => self.remove(m.start, m.end, floor, ceil),
                    Some(p) => {
                        let label = self.label(TraceOrigin::Rule {
                            rule_id: rule.rule_id.clone(),
                        });
                        self.replace(m.start, m.end, floor, p.get(*lang), label)
                    }
                },
            };
        }
        true
    }

    fn tidy(&mut self) {
        let mut out = tidy_slots(std::mem::take(&mut self.slots));
        loop {
            let before = out.len();
            out = tidy_slots(out);
            if out.len() == before {
                break;
            }
        }
        self.slots = out;
    }

    fn trace(&self) -> Vec<TraceSegment> {
        let mut segs: Vec<TraceSegment> = Vec::new();
        let mut last: Option<(Src, usize)> = None;
        for sl in &self.slots {
            let same = match (last, sl.src) {
                (Some((Src::Input(_), _)), Src::Input(i)) => last.is_some_and(|(_, end)| end == i),
                (Some((Src::Inserted(a), _)), Src::Inserted(b)) => a == b,
                _ => false,
            };
            if same {
                let seg = segs.last_mut().unwrap();
                seg.text.push(sl.ch);
                if let (TraceOrigin::Input { end, .. }, Src::Input(i)) = (&mut seg.origin, sl.src) {
                    *end = i + 1;
                }
            } else {
                segs.push(TraceSegment {
                    text: sl.ch.to_string(),
                    origin: match sl.src {
                        Src::Input(i) => TraceOrigin::Input { start: i, end: i + 1 },
                        Src::Inserted(l) => self.labels[l].clone(),
                    },
                });
            }
            last = Some(match sl.src {
                Src::Input(i) => (sl.src, i + 1),
                Src::Inserted(_) => (sl.src, 0),
            });
        }
        segs
    }
}

fn is_soft_punct(c: char) -> bool {
    matches!(c, ',' | ';' | ':' | '，' | '；' | '：' | '、')
}

fn is_hard_punct(c: char) -> bool {
    matches!(c, '.' | '!' | '?' | '。' | '！' | '？')
}

fn is_punct(c: char) -> bool {
    is_soft_punct(c) || is_hard_punct(c)
}

/// One cleanup sweep over edited text.
fn tidy_slots(slots: Vec<Slot>) -> Vec<Slot> {
    let mut out: Vec<Slot> = Vec::with_capacity(slots.len());
    for sl in slots {
        let prev = out.last().map(|p| p.ch);
        if sl.ch.is_whitespace() {
            // collapse runs; no space at the start or after an open paren
            if prev.is_none_or(|p| p.is_whitespace() || p == '(' || p == '（') {
                continue;
            }
        } else if is_punct(sl.ch) || sl.ch == ')' || sl.ch == '）' {
            while out.last().is_some_and(|p| p.ch.is_whitespace()) {
                out.pop();
            }
            if out.is_empty() && is_punct(sl.ch) {
                continue;
            }
            if let Some(p) = out.last().map(|p| p.ch) {
                if is_punct(sl.ch) && is_soft_punct(p) {
                    // ", ." and ",," keep only the later mark
                    out.pop();
                } else if is_hard_punct(sl.ch) && is_hard_punct(p) {
                    continue;
                } else if (sl.ch == ')' && p == '(') || (sl.ch == '）' && p == '（') {
                    out.pop();
                    continue;
                }
            }
        }
        out.push(sl);
    }
    while out.last().is_some_and(|p| p.ch.is_whitespace() || is_soft_punct(p.ch)) {
        out.pop();
    }
    out
}

/// Text after the same cleanup edited ideas receive.
pub(crate) fn tidy_text(text: &str) -> String {
    let mut w = Work::new(text);
    w.tidy();
    w.text()
}

/// Applies tag-conflict and theme rule passes until the text is clean.
fn normalize(work: &mut Work, conflicts: &PatternSet, rules: &PatternSet) {
    for _ in 0..MAX_ROUNDS {
        let a = work.pass(conflicts);
        let b = work.pass(rules);
        if !(a || b) {
            return;
        }
        work.tidy();
    }
    // residual scan: cut whatever still matches, no cleanup heuristics
    for set in [conflicts, rules] {
        loop {
            let ms = set.matcher.find(&work.text());
            if ms.is_empty() {
                break;
            }
            for m in ms.iter().rev() {
                work.slots.drain(m.start..m.end);
            }
        }
    }
    work.tidy();
}

fn finish(work: Work, original: &str) -> ValidationOutcome {
    if work.violations.is_empty() {
        return ValidationOutcome {
            status: OutcomeStatus::Accepted,
            violations: Vec::new(),
            normalized_idea: original.to_string(),
            provenance_trace: if original.is_empty() {
                Vec::new()
            } else {
                vec![TraceSegment {
                    text: original.to_string(),
                    origin: TraceOrigin::Input {
                        start: 0,
                        end: work.input.len(),
                    },
                }]
            },
            tag_errors: Vec::new(),
        };
    }
    ValidationOutcome {
        status: OutcomeStatus::Normalized,
        normalized_idea: work.text(),
        provenance_trace: work.trace(),
        violations: work.violations,
        tag_errors: Vec::new(),
    }
}

fn empty_idea_violation(original: &str) -> Violation {
    Violation {
        tier: 3,
        rule_id: "empty-idea".into(),
        offending_span: Span {
            start: 0,
            end: original.chars().count(),
        },
        offending_text: original.to_string(),
        resolution: Resolution::Removed,
        explanation: Bilingual::new(
            "应用规则后，想法中没有留下可用的内容，提示词将只由所选标签生成。",
            "Nothing of the idea remained after the guardrails were applied, so the prompt is built from the selected tags alone.",
        ),
        alternatives: vec![
            Bilingual::new("塔楼旁宁静的村道", "a quiet village lane beside the tower"),
            Bilingual::new("村庄周围的稻田", "rice fields surrounding the village"),
        ],
    }
}

/// Validates and normalizes a free-text idea. Assumes the selection passed
/// [`validate_tags`]; options that do not resolve are ignored.
pub fn validate_idea(idea: &str, selection: &TagSelection, theme: TaskTheme, corpus: &Corpus) -> ValidationOutcome {
    let conflicts = conflict_patterns(selection, corpus);
    let rules = rule_patterns(theme, corpus);
    let mut work = Work::new(idea);
    normalize(&mut work, &conflicts, &rules);
    if !work.violations.is_empty() && !idea.trim().is_empty() && work.slots.is_empty() {
        work.violations.push(empty_idea_violation(idea));
    }
    finish(work, idea)
}

/// Tag validation followed by idea validation, as one outcome.
pub fn check_idea(idea: &str, selection: &TagSelection, theme: TaskTheme, corpus: &Corpus) -> ValidationOutcome {
    match validate_tags(selection, theme, corpus) {
        Ok(()) => validate_idea(idea, selection, theme, corpus),
        Err(err) => tag_error_outcome(idea, err.issues, corpus),
    }
}

fn tag_error_outcome(idea: &str, issues: Vec<TagIssue>, corpus: &Corpus) -> ValidationOutcome {
    let violations = issues
        .iter()
        .map(|issue| {
            let cat = corpus.category(issue.category);
            let alternatives = match issue.kind {
                TagIssueKind::InteriorOccupied => cat
                    .option("people.none")
                    .map(|o| vec![o.label.clone()])
                    .unwrap_or_default(),
                TagIssueKind::InteriorOnly => vec![Bilingual::new("切换到室内视角", "switch to an interior view")],
                _ => cat.options.iter().map(|o| o.label.clone()).collect(),
            };
            Violation {
                tier: 2,
                rule_id: format!("tag.{}", issue.category),
                offending_span: Span { start: 0, end: 0 },
                offending_text: issue.option_id.clone().unwrap_or_default(),
                resolution: Resolution::Rejected,
                explanation: issue.message.clone(),
                alternatives,
            }
        })
        .collect();
    ValidationOutcome {
        status: OutcomeStatus::TagError,
        violations,
        normalized_idea: idea.to_string(),
        provenance_trace: Vec::new(),
        tag_errors: issues,
    }
}

/// Re-checks a user-edited prompt: the idea pipeline runs over the whole
/// text, then Tier-1 clauses missing from the result are restored at the
/// front and missing tag clauses at the end.
pub fn revalidate(
    edited_prompt: &str,
    selection: &TagSelection,
    theme: TaskTheme,
    corpus: &Corpus,
) -> ValidationOutcome {
    let conflicts = conflict_patterns(selection, corpus);
    let rules = rule_patterns(theme, corpus);
    let mut work = Work::new(edited_prompt);
    normalize(&mut work, &conflicts, &rules);

    let profile = constraint_profile(theme, corpus.lexicon());
    let current = work.text();
    let at_end = work.input.len();
    let mut front: Vec<Slot> = Vec::new();
    for clause in profile.clauses(selection.interior) {
        if current.contains(clause) {
            continue;
        }
        let label = work.label(TraceOrigin::Reasserted {
            clause: ClauseOrigin::Tier1Invariant,
        });
        push_clause(&mut front, clause, label);
        work.violations
            .push(reassert_violation(1, "tier1.invariant", 0, clause));
    }
    let mut back: Vec<Slot> = Vec::new();
    for opt in selection.options(corpus) {
        let clause = tag_clause(corpus.category(opt.category), opt);
        if current.contains(&clause) {
            continue;
        }
        let label = work.label(TraceOrigin::Reasserted {
            clause: ClauseOrigin::Tag { category: opt.category },
        });
        push_clause(&mut back, &clause, label);
        work.violations.push(reassert_violation(
            2,
            &format!("tag.{}", opt.option_id),
            at_end,
            &clause,
        ));
    }
    if !front.is_empty() {
        if work.slots.is_empty() {
            front.pop();
        }
        work.slots.splice(0..0, front);
    }
    if !back.is_empty() {
        back.pop();
        if !work.slots.is_empty() {
            let label = back[0].src;
            work.slots.push(Slot { ch: ' ', src: label });
        }
        work.slots.extend(back);
    }
    finish(work, edited_prompt)
}

fn push_clause(out: &mut Vec<Slot>, clause: &str, label: usize) {
    out.extend(clause.chars().map(|ch| Slot {
        ch,
        src: Src::Inserted(label),
    }));
    out.push(Slot {
        ch: ' ',
        src: Src::Inserted(label),
    });
}

fn reassert_violation(tier: u8, rule_id: &str, at: usize, clause: &str) -> Violation {
    let (zh, en) = if tier == 1 {
        (
            "文化遗产的基本规则不能在编辑中删除，该条款已恢复。",
            "Heritage ground rules cannot be edited out of the prompt, so this clause was restored.",
        )
    } else {
        (
            "所选标签是硬性要求，删除的标签条款已恢复。",
            "Selected tags are hard requirements, so the deleted tag clause was restored.",
        )
    };
    Violation {
        tier,
        rule_id: rule_id.to_string(),
        offending_span: Span { start: at, end: at },
        offending_text: String::new(),
        resolution: Resolution::Replaced,
        explanation: Bilingual::new(zh, en),
        alternatives: vec![Bilingual::new(clause, clause)],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CategoryId;

    fn corpus() -> Corpus {
        Corpus::bundled().unwrap()
    }

    fn sel() -> TagSelection {
        TagSelection::default()
            .with(CategoryId::Viewpoint, "viewpoint.medium")
            .with(CategoryId::TimeOfDay, "time-of-day.morning")
            .with(CategoryId::People, "people.multiple")
            .with(CategoryId::RenderingStyle, "rendering-style.photorealistic")
    }

    const HR: TaskTheme = TaskTheme::HistoricalReconstruction;

    #[test]
    fn glass_curtain_wall_is_replaced() {
        let o = validate_idea("futuristic glass curtain wall", &sel(), HR, &corpus());
        assert_eq!(o.status, OutcomeStatus::Normalized);
        assert_eq!(o.normalized_idea, "masonry façades with iron-grille windows");
        assert_eq!(o.violations.len(), 1);
        assert_eq!(o.violations[0].rule_id, "anachronism.modern-facade");
        assert_eq!(o.violations[0].resolution, Resolution::Replaced);
        assert_eq!(o.violations[0].offending_span, Span { start: 0, end: 29 });
    }

    #[test]
    fn removal_drops_connectors() {
        let o = validate_idea(
            "a village square with tanks and armored vehicles, lanterns everywhere",
            &sel(),
            HR,
            &corpus(),
        );
        assert_eq!(o.normalized_idea, "a village square, lanterns everywhere");
        assert_eq!(o.violations[0].resolution, Resolution::Removed);
        assert_eq!(o.violations[0].offending_text, "tanks and armored vehicles");
    }

    #[test]
    fn relocation_absorbs_article() {
        let o = validate_idea(
            "the tower standing in an empty desert",
            &sel(),
            TaskTheme::RiskEstimation,
            &corpus(),
        );
        assert_eq!(
            o.normalized_idea,
            "the tower standing in a Kaiping village setting with rice fields, village houses, and ancestral halls"
        );
        assert_eq!(o.violations[0].resolution, Resolution::Relocated);
    }

    #[test]
    fn chinese_trigger_gets_chinese_replacement() {
        let o = validate_idea("碉楼被完全拆除了", &sel(), TaskTheme::RiskEstimation, &corpus());
        assert_eq!(o.normalized_idea, "出现明显结构裂缝和风化痕迹的碉楼了");
    }

    #[test]
    fn tags_take_precedence() {
        let o = validate_idea(
            "lanterns glowing at night",
            &sel(),
            TaskTheme::FuturePreservation,
            &corpus(),
        );
        assert_eq!(o.normalized_idea, "lanterns glowing");
        assert_eq!(o.violations[0].resolution, Resolution::OverriddenByTag);
        assert_eq!(o.violations[0].tier, 2);
        assert_eq!(o.violations[0].rule_id, "tag.time-of-day.morning");
    }

    #[test]
    fn compliant_idea_is_untouched() {
        let idea = "  farmers  carrying rice past the gate ";
        let o = validate_idea(idea, &sel(), HR, &corpus());
        assert_eq!(o.status, OutcomeStatus::Accepted);
        assert_eq!(o.normalized_idea, idea);
        assert!(o.violations.is_empty());
    }

    #[test]
    fn idea_emptied_by_rules_reports_once_more() {
        let o = validate_idea("alien attack", &sel(), HR, &corpus());
        assert_eq!(o.normalized_idea, "");
        let ids: Vec<_> = o.violations.iter().map(|v| v.rule_id.as_str()).collect();
        assert_eq!(ids, ["fantasy.invasion", "empty-idea"]);
        assert_eq!(
            validate_idea("   ", &sel(), HR, &corpus()).status,
            OutcomeStatus::Accepted
        );
    }

    #[test]
    fn trace_labels_inserted_text() {
        let o = validate_idea("a tower beside a skyscraper", &sel(), HR, &corpus());
        assert_eq!(
            o.normalized_idea,
            "a tower beside masonry façades with iron-grille windows"
        );
        let origins: Vec<_> = o.provenance_trace.iter().map(|s| (&s.text[..], &s.origin)).collect();
        assert_eq!(
            origins[0],
            ("a tower beside ", &TraceOrigin::Input { start: 0, end: 15 })
        );
        assert_eq!(
            origins[1].1,
            &TraceOrigin::Rule {
                rule_id: "anachronism.modern-facade".into()
            }
        );
    }

    #[test]
    fn tidy_cleans_leftovers() {
        let t = |s: &str| {
            let mut w = Work::new(s);
            w.tidy();
            w.text()
        };
        assert_eq!(t(" , a  tower ,. "), "a tower.");
        assert_eq!(t("Scene: ."), "Scene.");
        assert_eq!(t("a ( ) b"), "a b");
        assert_eq!(t("done. . next"), "done. next");
    }

    #[test]
    fn tag_errors_become_rejections() {
        let s = sel().with(CategoryId::DecorativePatterns, "decorative-patterns.animal");
        let o = check_idea("a quiet lane", &s, HR, &corpus());
        assert_eq!(o.status, OutcomeStatus::TagError);
        assert_eq!(o.violations.len(), 1);
        assert_eq!(o.violations[0].resolution, Resolution::Rejected);
        assert_eq!(o.tag_errors[0].kind, TagIssueKind::InteriorOnly);
    }
}
