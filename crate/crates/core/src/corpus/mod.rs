//! The bilingual Diaolou knowledge base.
//!
//! A [`Corpus`] is loaded once from a directory of `.corpus` record files,
//! validated exhaustively, and then only read. Reloading produces a new value;
//! nothing mutates a loaded corpus.

mod lexicon;
mod load;
mod model;

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

pub use lexicon::{EnrichmentTerm, Lexicon, Phrase, RuleAction, RuleEntry, StyleScope, TermGroup};
pub use load::load_corpus;
pub use model::{
    Applicability, CategoryId, ConceptKind, Description, DiaolouSite, KnowledgeSection, PersonaProfile, RenderingAsset,
    SectionId, SelectionRule, SiteFunction, TagCategory, TagOption,
};

use crate::lang::Lang;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("missing corpus file or directory: {0}")]
    MissingFile(String),
    #[error("schema violation at {path}:{line}: {message}")]
    SchemaViolation { path: String, line: usize, message: String },
    #[error("dangling reference at {path}:{line}: {message}")]
    DanglingReference { path: String, line: usize, message: String },
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("unknown tag category `{0}`")]
    UnknownCategory(String),
    #[error("unknown concept `{0}`")]
    UnknownConcept(String),
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),
}

impl From<crate::record::RecordError> for CorpusError {
    fn from(e: crate::record::RecordError) -> Self {
        CorpusError::SchemaViolation {
            path: e.path,
            line: e.line,
            message: e.message,
        }
    }
}

/// Location of the corpus shipped with this crate.
pub fn bundled_corpus_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("corpus")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Corpus {
    pub corpus_version: u32,
    sites: BTreeMap<String, DiaolouSite>,
    categories: Vec<TagCategory>,
    sections: Vec<KnowledgeSection>,
    persona: PersonaProfile,
    lexicon: Lexicon,
    renderings: BTreeMap<String, RenderingAsset>,
}

impl Corpus {
    /// Loads the corpus bundled with the crate.
    pub fn bundled() -> Result<Corpus, CorpusError> {
        load_corpus(bundled_corpus_dir())
    }

    pub fn sites(&self) -> impl Iterator<Item = &DiaolouSite> {
        self.sites.values()
    }

    pub fn site(&self, site_id: &str) -> Option<&DiaolouSite> {
        self.sites.get(site_id)
    }

    /// Categories in canonical prompt order.
    pub fn categories(&self) -> &[TagCategory] {
        &self.categories
    }

    pub fn category(&self, id: CategoryId) -> &TagCategory {
        // load guarantees every canonical category exists, in canonical order
        &self.categories[CategoryId::CANONICAL.iter().position(|c| *c == id).unwrap()]
    }

    pub fn option(&self, option_id: &str) -> Option<&TagOption> {
        self.categories.iter().find_map(|c| c.option(option_id))
    }

    pub fn sections(&self) -> &[KnowledgeSection] {
        &self.sections
    }

    pub fn section(&self, id: SectionId) -> &KnowledgeSection {
        self.sections
            .iter()
            .find(|s| s.section_id == id)
            .expect("validated at load")
    }

    pub fn persona(&self) -> &PersonaProfile {
        &self.persona
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn enrichment(&self) -> &[EnrichmentTerm] {
        &self.lexicon.enrichment
    }

    pub fn rendering(&self, asset_ref: &str) -> Option<&RenderingAsset> {
        self.renderings.get(asset_ref)
    }

    pub fn renderings(&self) -> impl Iterator<Item = &RenderingAsset> {
        self.renderings.values()
    }

    /// Options of a category in authored order.
    pub fn list_tag_options(&self, category_id: &str) -> Result<&[TagOption], CorpusError> {
        let id: CategoryId = category_id.parse().map_err(CorpusError::UnknownCategory)?;
        Ok(&self.category(id).options)
    }

    /// Prose for a site, category, option or section id in `lang`.
    pub fn describe(&self, concept_id: &str, lang: &str) -> Result<Description, CorpusError> {
        let lang: Lang = lang
            .parse()
            .map_err(|_| CorpusError::UnsupportedLanguage(lang.to_string()))?;
        let make = |kind, title: &crate::lang::Bilingual, body: &crate::lang::Bilingual| {
            let t = title.resolve(lang);
            let b = body.resolve(lang);
            Description {
                concept_id: concept_id.to_string(),
                kind,
                title: t.text.to_string(),
                text: b.text.to_string(),
                fell_back: t.fell_back || b.fell_back,
            }
        };
        if let Some(site) = self.site(concept_id) {
            return Ok(make(ConceptKind::Site, &site.names, &site.descriptions));
        }
        if let Ok(cat) = concept_id.parse::<CategoryId>() {
            let c = self.category(cat);
            return Ok(make(ConceptKind::Category, &c.name, &c.description));
        }
        if let Some(opt) = self.option(concept_id) {
            let cat = self.category(opt.category);
            let label = opt.label.resolve(lang);
            return Ok(Description {
                concept_id: concept_id.to_string(),
                kind: ConceptKind::Option,
                title: label.text.to_string(),
                text: format!("{}: {}", cat.name.get(lang), opt.specification_text),
                fell_back: label.fell_back,
            });
        }
        if let Ok(sec) = concept_id.parse::<SectionId>() {
            let s = self.section(sec);
            return Ok(make(ConceptKind::Section, &s.title, &s.body));
        }
        Err(CorpusError::UnknownConcept(concept_id.to_string()))
    }

    /// True when `concept_id` names a site, category, option or section.
    pub fn has_concept(&self, concept_id: &str) -> bool {
        self.site(concept_id).is_some()
            || concept_id.parse::<CategoryId>().is_ok()
            || self.option(concept_id).is_some()
            || concept_id.parse::<SectionId>().is_ok()
    }

    /// Deterministic serialized form, used to check reload stability.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("corpus serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn corpus() -> Corpus {
        Corpus::bundled().expect("bundled corpus loads")
    }

    #[test]
    fn bundled_corpus_cardinalities() {
        let c = corpus();
        assert_eq!(c.corpus_version, 1);
        assert_eq!(c.sites().count(), 10);
        assert_eq!(c.categories().len(), 8);
        let counts: Vec<usize> = c.categories().iter().map(|c| c.options.len()).collect();
        assert_eq!(counts, vec![3, 3, 3, 3, 5, 5, 3, 6]);
        assert_eq!(
            c.category(CategoryId::DecorativePatterns).applicability,
            Applicability::InteriorOnly
        );
    }

    #[test]
    fn lists_architectural_styles_in_order() {
        let c = corpus();
        let labels: Vec<&str> = c
            .list_tag_options("architectural-style")
            .unwrap()
            .iter()
            .map(|o| o.label.en.as_str())
            .collect();
        assert_eq!(
            labels,
            ["Romanesque", "Baroque", "Byzantine", "Indo-British", "Neoclassical"]
        );
    }

    #[test]
    fn lists_window_features() {
        let c = corpus();
        let specs: Vec<&str> = c
            .list_tag_options("window-features")
            .unwrap()
            .iter()
            .map(|o| o.specification_text.as_str())
            .collect();
        assert_eq!(specs.len(), 5);
        assert!(specs.contains(&"Yanhu (Baroque-style)"));
        assert!(specs.contains(&"Changhu (Neoclassical)"));
    }

    #[test]
    fn unknown_category_is_rejected() {
        assert_eq!(
            corpus().list_tag_options("season"),
            Err(CorpusError::UnknownCategory("season".into()))
        );
    }

    #[test]
    fn describe_resolves_languages() {
        let c = corpus();
        let d = c.describe("ruishi-lou", "en").unwrap();
        assert_eq!(d.kind, ConceptKind::Site);
        assert!(d.text.contains("Huang Bixiu"));
        let bg = c.describe("background", "zh").unwrap();
        assert_eq!(bg.text, c.section(SectionId::Background).body.zh);
        assert!(!bg.fell_back);
        let opt = c.describe("time-of-day.morning", "en").unwrap();
        assert!(opt.text.contains("low-angle golden light"));
    }

    #[test]
    fn describe_errors() {
        let c = corpus();
        assert_eq!(
            c.describe("nonexistent", "en"),
            Err(CorpusError::UnknownConcept("nonexistent".into()))
        );
        assert_eq!(
            c.describe("background", "fr"),
            Err(CorpusError::UnsupportedLanguage("fr".into()))
        );
    }

    #[test]
    fn reload_is_byte_identical() {
        assert_eq!(corpus().to_canonical_json(), corpus().to_canonical_json());
    }
}
