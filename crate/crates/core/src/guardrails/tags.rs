use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::TaskTheme;
use crate::corpus::{Applicability, CategoryId, Corpus, SelectionRule, TagOption};
use crate::lang::Bilingual;

/// Tier-2 preset choices: at most one option per category.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TagSelection {
    #[serde(default)]
    pub tags: BTreeMap<CategoryId, String>,
    /// Interior scenes admit decorative patterns.
    #[serde(default)]
    pub interior: bool,
}

impl TagSelection {
    pub fn with(mut self, category: CategoryId, option_id: &str) -> Self {
        self.tags.insert(category, option_id.to_string());
        self
    }

    pub fn interior(mut self, interior: bool) -> Self {
        self.interior = interior;
        self
    }

    pub fn get(&self, category: CategoryId) -> Option<&str> {
        self.tags.get(&category).map(String::as_str)
    }

    /// Selected options that exist in the corpus, in canonical order.
    pub fn options<'c>(&self, corpus: &'c Corpus) -> Vec<&'c TagOption> {
        CategoryId::CANONICAL
            .iter()
            .filter_map(|c| self.get(*c).and_then(|id| corpus.category(*c).option(id)))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TagIssueKind {
    UnknownOption,
    WrongCategory,
    MissingRequired,
    InteriorOnly,
    InteriorOccupied,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TagIssue {
    pub category: CategoryId,
    pub kind: TagIssueKind,
    pub option_id: Option<String>,
    pub message: Bilingual,
}

/// Every problem found in a selection, one entry per offending category.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{} tag selection problem(s)", issues.len())]
pub struct TagError {
    pub issues: Vec<TagIssue>,
}

pub fn validate_tags(selection: &TagSelection, theme: TaskTheme, corpus: &Corpus) -> Result<(), TagError> {
    let mut issues = Vec::new();
    for cat in corpus.categories() {
        let id = cat.category_id;
        let name = &cat.name;
        let Some(option_id) = selection.get(id) else {
            if cat.selection_rule == SelectionRule::ExactlyOne {
                issues.push(TagIssue {
                    category: id,
                    kind: TagIssueKind::MissingRequired,
                    option_id: None,
                    message: Bilingual::new(
                        format!("请为“{}”选择一个选项。", name.zh),
                        format!("Choose one {} option.", name.en),
                    ),
                });
            }
            continue;
        };
        if cat.option(option_id).is_none() {
            let (kind, message) = match corpus.option(option_id) {
                Some(other) => (
                    TagIssueKind::WrongCategory,
                    Bilingual::new(
                        format!(
                            "选项“{option_id}”属于“{}”，不能用于“{}”。",
                            corpus.category(other.category).name.zh,
                            name.zh
                        ),
                        format!(
                            "Option `{option_id}` belongs to {}, not {}.",
                            corpus.category(other.category).name.en,
                            name.en
                        ),
                    ),
                ),
                None => (
                    TagIssueKind::UnknownOption,
                    Bilingual::new(
                        format!("“{}”中没有选项“{option_id}”。", name.zh),
                        format!("{} has no option `{option_id}`.", name.en),
                    ),
                ),
            };
            issues.push(TagIssue {
                category: id,
                kind,
                option_id: Some(option_id.to_string()),
                message,
            });
            continue;
        }
        if cat.applicability == Applicability::InteriorOnly && !selection.interior {
            issues.push(TagIssue {
                category: id,
                kind: TagIssueKind::InteriorOnly,
                option_id: Some(option_id.to_string()),
                message: Bilingual::new(
                    format!("“{}”仅适用于室内视角。", name.zh),
                    format!("{} apply to interior views only.", name.en),
                ),
            });
        }
        if id == CategoryId::People
            && selection.interior
            && theme == TaskTheme::HistoricalReconstruction
            && option_id != "people.none"
        {
            issues.push(TagIssue {
                category: id,
                kind: TagIssueKind::InteriorOccupied,
                option_id: Some(option_id.to_string()),
                message: Bilingual::new(
                    "历史重建的室内场景不出现人物，请选择“无”。",
                    "Historical interior scenes are shown without occupants; choose None.",
                ),
            });
        }
    }
    if issues.is_empty() {
        Ok(())
    } else {
        Err(TagError { issues })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base() -> TagSelection {
        TagSelection::default()
            .with(CategoryId::Viewpoint, "viewpoint.distant")
            .with(CategoryId::TimeOfDay, "time-of-day.morning")
            .with(CategoryId::People, "people.none")
            .with(CategoryId::RenderingStyle, "rendering-style.photorealistic")
    }

    fn kinds(r: Result<(), TagError>) -> Vec<(CategoryId, TagIssueKind)> {
        r.unwrap_err().issues.iter().map(|i| (i.category, i.kind)).collect()
    }

    #[test]
    fn full_compliant_selection_passes() {
        let c = Corpus::bundled().unwrap();
        let sel = base()
            .with(CategoryId::BuildingFunction, "building-function.defense-focused")
            .with(CategoryId::ArchitecturalStyle, "architectural-style.baroque")
            .with(CategoryId::WindowFeatures, "window-features.yanhu");
        for t in TaskTheme::ALL {
            assert_eq!(validate_tags(&sel, t, &c), Ok(()));
        }
        let interior = sel
            .with(CategoryId::DecorativePatterns, "decorative-patterns.plant")
            .interior(true);
        assert_eq!(
            validate_tags(&interior, TaskTheme::HistoricalReconstruction, &c),
            Ok(())
        );
    }

    #[test]
    fn decorative_patterns_need_interior() {
        let c = Corpus::bundled().unwrap();
        let sel = base().with(CategoryId::DecorativePatterns, "decorative-patterns.geometric");
        assert_eq!(
            kinds(validate_tags(&sel, TaskTheme::RiskEstimation, &c)),
            vec![(CategoryId::DecorativePatterns, TagIssueKind::InteriorOnly)]
        );
    }

    #[test]
    fn unknown_and_misplaced_options() {
        let c = Corpus::bundled().unwrap();
        let sel = base()
            .with(CategoryId::ArchitecturalStyle, "architectural-style.gothic")
            .with(CategoryId::WindowFeatures, "architectural-style.baroque");
        assert_eq!(
            kinds(validate_tags(&sel, TaskTheme::FuturePreservation, &c)),
            vec![
                (CategoryId::ArchitecturalStyle, TagIssueKind::UnknownOption),
                (CategoryId::WindowFeatures, TagIssueKind::WrongCategory),
            ]
        );
    }

    #[test]
    fn required_categories_are_named() {
        let c = Corpus::bundled().unwrap();
        let mut sel = base();
        sel.tags.remove(&CategoryId::TimeOfDay);
        sel.tags.remove(&CategoryId::People);
        assert_eq!(
            kinds(validate_tags(&sel, TaskTheme::RiskEstimation, &c)),
            vec![
                (CategoryId::TimeOfDay, TagIssueKind::MissingRequired),
                (CategoryId::People, TagIssueKind::MissingRequired),
            ]
        );
    }

    #[test]
    fn historical_interiors_are_unoccupied() {
        let c = Corpus::bundled().unwrap();
        let sel = base().with(CategoryId::People, "people.single").interior(true);
        assert_eq!(
            kinds(validate_tags(&sel, TaskTheme::HistoricalReconstruction, &c)),
            vec![(CategoryId::People, TagIssueKind::InteriorOccupied)]
        );
        assert_eq!(validate_tags(&sel, TaskTheme::RiskEstimation, &c), Ok(()));
    }
}
