//! The persona guide: scripted narration and grounded question answering.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::port::{ChatTurn, LanguageModelPort, TurnRole};
use crate::corpus::{Corpus, CorpusError, SectionId};
use crate::guardrails::is_cjk;
use crate::lang::{Bilingual, Lang};

pub const TOP_K: usize = 3;
pub const MAX_REPLY_CHARS: usize = 800;

const EN_STOPWORDS: &[&str] = &[
    "a", "about", "an", "and", "any", "are", "as", "at", "be", "been", "but", "by", "can", "could", "did", "do",
    "does", "for", "from", "had", "has", "have", "he", "her", "his", "how", "i", "if", "in", "into", "is", "it", "its",
    "me", "my", "of", "on", "or", "our", "please", "she", "so", "tell", "than", "that", "the", "their", "them", "then",
    "there", "these", "they", "this", "those", "to", "us", "was", "we", "were", "what", "when", "where", "which",
    "who", "whom", "why", "will", "with", "would", "you", "your",
];

const ZH_STOP_BIGRAMS: &[&str] = &[
    "什么", "是谁", "哪里", "为什", "么是", "怎么", "请问", "一下", "告诉", "我们", "你们", "这个", "那个", "是什",
    "的是",
];

const GREETINGS: &[&str] = &[
    "hello",
    "hi",
    "hey",
    "greetings",
    "good morning",
    "good afternoon",
    "good evening",
    "start",
    "begin",
    "你好",
    "您好",
    "开始",
    "嗨",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DialogueRole {
    User,
    Persona,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReplyKind {
    Scripted,
    Retrieved,
    Model,
    NoGrounding,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub role: DialogueRole,
    pub text: String,
    #[serde(default)]
    pub cited_concept_ids: Vec<String>,
    /// Persona turns only; absent on user turns.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<ReplyKind>,
}

impl DialogueTurn {
    pub fn user(text: impl Into<String>) -> DialogueTurn {
        DialogueTurn {
            role: DialogueRole::User,
            text: text.into(),
            cited_concept_ids: Vec::new(),
            kind: None,
        }
    }

    pub fn grounded(&self) -> bool {
        !self.cited_concept_ids.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PersonaError {
    #[error("question is empty")]
    EmptyQuestion,
}

/// A retrievable unit of corpus prose.
#[derive(Debug, Clone)]
struct Passage {
    concept_id: String,
    title: Bilingual,
    body: Bilingual,
    tokens: BTreeSet<String>,
    title_tokens: BTreeSet<String>,
}

/// Latin words minus stopwords, plus CJK character bigrams.
pub fn tokens(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut word = String::new();
    let mut cjk_run: Vec<char> = Vec::new();
    let flush_word = |w: &mut String, out: &mut BTreeSet<String>| {
        if w.chars().count() > 1 && !EN_STOPWORDS.contains(&w.as_str()) {
            out.insert(std::mem::take(w));
        }
        w.clear();
    };
    let flush_cjk = |run: &mut Vec<char>, out: &mut BTreeSet<String>| {
        for pair in run.windows(2) {
            let bg: String = pair.iter().collect();
            if !ZH_STOP_BIGRAMS.contains(&bg.as_str()) {
                out.insert(bg);
            }
        }
        run.clear();
    };
    for c in text.chars() {
        if is_cjk(c) {
            flush_word(&mut word, &mut out);
            cjk_run.push(c);
        } else if c.is_alphanumeric() {
            flush_cjk(&mut cjk_run, &mut out);
            word.extend(c.to_lowercase());
        } else {
            flush_word(&mut word, &mut out);
            flush_cjk(&mut cjk_run, &mut out);
        }
    }
    flush_word(&mut word, &mut out);
    flush_cjk(&mut cjk_run, &mut out);
    out
}

fn passages(corpus: &Corpus) -> Vec<Passage> {
    let mut out = Vec::new();
    let mut push = |concept_id: &str, title: &Bilingual, body: &Bilingual| {
        let mut title_tokens = tokens(&title.en);
        title_tokens.extend(tokens(&title.zh));
        let mut toks = title_tokens.clone();
        toks.extend(tokens(&body.en));
        toks.extend(tokens(&body.zh));
        out.push(Passage {
            concept_id: concept_id.to_string(),
            title: title.clone(),
            body: body.clone(),
            tokens: toks,
            title_tokens,
        });
    };
    for site in corpus.sites() {
        push(&site.site_id, &site.names, &site.descriptions);
    }
    for s in corpus.sections() {
        push(s.section_id.slug(), &s.title, &s.body);
    }
    for c in corpus.categories() {
        push(c.category_id.slug(), &c.name, &c.description);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scored {
    pub concept_id: String,
    pub score: f64,
}

/// Passages that share at least one distinctive term with the query,
/// best first. A term is distinctive when at most half the passages use it.
pub fn retrieve(query: &str, corpus: &Corpus, k: usize) -> Vec<Scored> {
    let ps = passages(corpus);
    let q = tokens(query);
    let n = ps.len() as f64;
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for p in &ps {
        for t in q.iter().filter(|t| p.tokens.contains(*t)) {
            *df.entry(t.as_str()).or_default() += 1;
        }
    }
    let idf = |t: &str| (n / df[t] as f64).ln();
    let mut scored: Vec<Scored> = ps
        .iter()
        .filter_map(|p| {
            let shared: Vec<&String> = q.iter().filter(|t| p.tokens.contains(*t)).collect();
            if !shared.iter().any(|t| df[t.as_str()] * 2 <= ps.len()) {
                return None;
            }
            Some(Scored {
                concept_id: p.concept_id.clone(),
                // title terms count double
                score: shared
                    .iter()
                    .map(|t| if p.title_tokens.contains(*t) { 2.0 } else { 1.0 } * idf(t))
                    .sum(),
            })
        })
        .collect();
    scored.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| a.concept_id.cmp(&b.concept_id))
    });
    scored.truncate(k);
    scored
}

fn is_greeting(question: &str) -> bool {
    let q = question
        .trim()
        .trim_end_matches(['!', '.', '?', '！', '。', '？', ','])
        .to_lowercase();
    GREETINGS.contains(&q.as_str())
}

pub fn narration_for(section_id: &str, lang: Lang, corpus: &Corpus) -> Result<String, CorpusError> {
    let id: SectionId = section_id
        .parse()
        .map_err(|_| CorpusError::UnknownConcept(section_id.to_string()))?;
    Ok(corpus.section(id).narration.resolve(lang).text.to_string())
}

fn persona_turn(text: String, cited: Vec<String>, kind: ReplyKind) -> DialogueTurn {
    DialogueTurn {
        role: DialogueRole::Persona,
        text,
        cited_concept_ids: cited,
        kind: Some(kind),
    }
}

/// Years and other numbers in `reply` that none of `sources` mention.
fn unsupported_numbers(reply: &str, sources: &[String]) -> bool {
    reply
        .split(|c: char| !c.is_ascii_digit())
        .filter(|d| d.len() >= 3)
        .any(|d| !sources.iter().any(|s| s.contains(d)))
}

pub fn persona_reply(
    history: &[DialogueTurn],
    question: &str,
    lang: Lang,
    corpus: &Corpus,
    port: &dyn LanguageModelPort,
) -> Result<DialogueTurn, PersonaError> {
    if question.trim().is_empty() {
        return Err(PersonaError::EmptyQuestion);
    }
    let persona = corpus.persona();
    if history.is_empty() && is_greeting(question) {
        let text = corpus
            .section(SectionId::Background)
            .narration
            .resolve(lang)
            .text
            .to_string();
        return Ok(persona_turn(
            text,
            vec![SectionId::Background.slug().to_string()],
            ReplyKind::Scripted,
        ));
    }
    let hits = retrieve(question, corpus, TOP_K);
    if hits.is_empty() {
        return Ok(persona_turn(
            persona.no_grounding.resolve(lang).text.to_string(),
            Vec::new(),
            ReplyKind::NoGrounding,
        ));
    }
    let all = passages(corpus);
    let passage = |id: &str| all.iter().find(|p| p.concept_id == id).expect("retrieved from corpus");
    let sources: Vec<String> = hits
        .iter()
        .map(|h| {
            let p = passage(&h.concept_id);
            format!(
                "[{}] {}: {}",
                p.concept_id,
                p.title.resolve(lang).text,
                p.body.resolve(lang).text
            )
        })
        .collect();

    let mut system = persona.framing.resolve(lang).text.to_string();
    system.push_str(match lang {
        Lang::En => "\nReference passages:\n",
        Lang::Zh => "\n参考资料：\n",
    });
    system.push_str(&sources.join("\n"));
    let mut turns: Vec<ChatTurn> = history
        .iter()
        .map(|t| ChatTurn {
            role: match t.role {
                DialogueRole::User => TurnRole::User,
                DialogueRole::Persona => TurnRole::Assistant,
            },
            text: t.text.clone(),
        })
        .collect();
    turns.push(ChatTurn::user(question.trim()));
    match port.complete(&system, &turns, MAX_REPLY_CHARS) {
        Ok(reply) if !reply.trim().is_empty() && !unsupported_numbers(&reply, &sources) => {
            return Ok(persona_turn(
                reply.trim().to_string(),
                hits.into_iter().map(|h| h.concept_id).collect(),
                ReplyKind::Model,
            ));
        }
        Ok(_) => tracing::warn!("persona reply discarded: empty or cites facts outside the corpus"),
        Err(e) => tracing::debug!(error = %e, "persona reply falls back to retrieval"),
    }
    let best = passage(&hits[0].concept_id);
    let text = format!(
        "{} {}",
        persona.preface.resolve(lang).text,
        best.body.resolve(lang).text
    );
    Ok(persona_turn(text, vec![best.concept_id.clone()], ReplyKind::Retrieved))
}
