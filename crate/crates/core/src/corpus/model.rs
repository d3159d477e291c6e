use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::lang::Bilingual;

/// The eight Tier-2 tag categories, in canonical prompt order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CategoryId {
    Viewpoint,
    TimeOfDay,
    People,
    BuildingFunction,
    ArchitecturalStyle,
    WindowFeatures,
    DecorativePatterns,
    RenderingStyle,
}

impl CategoryId {
    pub const CANONICAL: [CategoryId; 8] = [
        CategoryId::Viewpoint,
        CategoryId::TimeOfDay,
        CategoryId::People,
        CategoryId::BuildingFunction,
        CategoryId::ArchitecturalStyle,
        CategoryId::WindowFeatures,
        CategoryId::DecorativePatterns,
        CategoryId::RenderingStyle,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            CategoryId::Viewpoint => "viewpoint",
            CategoryId::TimeOfDay => "time-of-day",
            CategoryId::People => "people",
            CategoryId::BuildingFunction => "building-function",
            CategoryId::ArchitecturalStyle => "architectural-style",
            CategoryId::WindowFeatures => "window-features",
            CategoryId::DecorativePatterns => "decorative-patterns",
            CategoryId::RenderingStyle => "rendering-style",
        }
    }

    /// Option cardinality of the published tag vocabulary.
    pub fn expected_option_count(self) -> usize {
        match self {
            CategoryId::ArchitecturalStyle | CategoryId::WindowFeatures => 5,
            CategoryId::RenderingStyle => 6,
            _ => 3,
        }
    }
}

impl fmt::Display for CategoryId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for CategoryId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CategoryId::CANONICAL
            .into_iter()
            .find(|c| c.slug() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    ExactlyOne,
    AtMostOne,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Applicability {
    AllViews,
    InteriorOnly,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagOption {
    pub option_id: String,
    pub category: CategoryId,
    pub label: Bilingual,
    /// Constraint phrase inserted verbatim into assembled prompts.
    pub specification_text: String,
    /// Lexicon term-group ids this option contradicts.
    pub conflict_terms: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagCategory {
    pub category_id: CategoryId,
    pub name: Bilingual,
    /// Lead-in of this category's prompt clauses.
    pub prompt_heading: String,
    pub description: Bilingual,
    pub selection_rule: SelectionRule,
    pub applicability: Applicability,
    pub options: Vec<TagOption>,
}

impl TagCategory {
    pub fn option(&self, option_id: &str) -> Option<&TagOption> {
        self.options.iter().find(|o| o.option_id == option_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SiteFunction {
    DefenseFocused,
    FloodProtection,
    Residential,
}

impl SiteFunction {
    pub fn slug(self) -> &'static str {
        match self {
            SiteFunction::DefenseFocused => "defense-focused",
            SiteFunction::FloodProtection => "flood-protection",
            SiteFunction::Residential => "residential",
        }
    }

    /// The building-function tag option describing the same function.
    pub fn option_id(self) -> String {
        format!("building-function.{}", self.slug())
    }
}

impl FromStr for SiteFunction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "defense-focused" => Ok(SiteFunction::DefenseFocused),
            "flood-protection" => Ok(SiteFunction::FloodProtection),
            "residential" => Ok(SiteFunction::Residential),
            other => Err(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiaolouSite {
    pub site_id: String,
    pub names: Bilingual,
    pub cluster: Bilingual,
    pub functions: BTreeSet<SiteFunction>,
    /// Option id in the architectural-style category.
    pub style: String,
    /// Option ids in the window-features category.
    pub window_features: Vec<String>,
    pub conservation_status: String,
    pub descriptions: Bilingual,
    pub base_rendering_ref: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SectionId {
    Background,
    HistoricalReconstruction,
    SpeculativeFutures,
}

impl SectionId {
    pub const ALL: [SectionId; 3] = [
        SectionId::Background,
        SectionId::HistoricalReconstruction,
        SectionId::SpeculativeFutures,
    ];

    pub fn slug(self) -> &'static str {
        match self {
            SectionId::Background => "background",
            SectionId::HistoricalReconstruction => "historical-reconstruction",
            SectionId::SpeculativeFutures => "speculative-futures",
        }
    }
}

impl FromStr for SectionId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SectionId::ALL
            .into_iter()
            .find(|c| c.slug() == s)
            .ok_or_else(|| s.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeSection {
    pub section_id: SectionId,
    pub title: Bilingual,
    pub body: Bilingual,
    /// Persona narration script for this section.
    pub narration: Bilingual,
    pub site_ids: Vec<String>,
    pub category_ids: Vec<CategoryId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonaProfile {
    pub persona_id: String,
    pub name: Bilingual,
    /// System framing handed to a remote language model.
    pub framing: Bilingual,
    /// Sentence prefixed to retrieved passages in offline replies.
    pub preface: Bilingual,
    pub no_grounding: Bilingual,
    /// Corpus concept ids the persona is grounded in.
    pub grounding: Vec<String>,
}

/// A bundled base rendering, loaded eagerly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderingAsset {
    pub asset_ref: String,
    pub media_type: String,
    pub sha256: String,
    pub byte_size: usize,
    #[serde(skip)]
    pub bytes: Arc<Vec<u8>>,
}

/// What kind of entity a concept id names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ConceptKind {
    Site,
    Category,
    Option,
    Section,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Description {
    pub concept_id: String,
    pub kind: ConceptKind,
    pub title: String,
    pub text: String,
    /// Set when the requested language was missing and zh was served.
    pub fell_back: bool,
}
