use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sha2::{Digest, Sha256};

use super::lexicon::{bilingual, Lexicon, StyleScope};
use super::model::*;
use super::{Corpus, CorpusError};
use crate::record::{parse_records, Record, CORPUS_VERSION};

/// Enrichment aspects every corpus must cover.
const REQUIRED_ASPECTS: [&str; 4] = ["facade", "roof", "parapet", "loophole"];

fn read(path: &Path) -> Result<String, CorpusError> {
    if !path.is_file() {
        return Err(CorpusError::MissingFile(path.display().to_string()));
    }
    fs::read_to_string(path).map_err(|e| CorpusError::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

fn records(path: &Path) -> Result<Vec<Record>, CorpusError> {
    Ok(parse_records(&read(path)?, path)?)
}

/// `.corpus` files of a directory, sorted by name.
fn corpus_files(dir: &Path) -> Result<Vec<PathBuf>, CorpusError> {
    if !dir.is_dir() {
        return Err(CorpusError::MissingFile(dir.display().to_string()));
    }
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CorpusError::Io {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "corpus"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(CorpusError::MissingFile(format!("{}/*.corpus", dir.display())));
    }
    Ok(files)
}

fn schema(rec: &Record, line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::SchemaViolation {
        path: rec.path().display().to_string(),
        line,
        message: message.into(),
    }
}

fn dangling(rec: &Record, key: &str, message: impl Into<String>) -> CorpusError {
    CorpusError::DanglingReference {
        path: rec.path().display().to_string(),
        line: rec.line_of(key),
        message: message.into(),
    }
}

fn expect_kind(rec: &Record, kinds: &[&str]) -> Result<(), CorpusError> {
    let (k, _) = rec.kind();
    if kinds.contains(&k) {
        Ok(())
    } else {
        Err(schema(
            rec,
            rec.line(),
            format!("unexpected record kind `{k}`, expected one of {kinds:?}"),
        ))
    }
}

fn slug_ok(id: &str) -> bool {
    !id.is_empty()
        && id
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-' || c == '.')
}

/// Loads and validates a corpus directory.
pub fn load_corpus(root: impl AsRef<Path>) -> Result<Corpus, CorpusError> {
    let root = root.as_ref();
    if !root.is_dir() {
        return Err(CorpusError::MissingFile(root.display().to_string()));
    }

    // taxonomy
    let tax_path = root.join("taxonomy/categories.corpus");
    let mut categories: Vec<TagCategory> = Vec::new();
    let mut option_records: Vec<Record> = Vec::new();
    for rec in records(&tax_path)? {
        expect_kind(&rec, &["category", "option"])?;
        match rec.kind().0 {
            "category" => {
                rec.only_keys(&[
                    "category",
                    "name.zh",
                    "name.en",
                    "heading",
                    "selection",
                    "applicability",
                    "description.zh",
                    "description.en",
                ])?;
                let id: CategoryId = rec
                    .kind()
                    .1
                    .parse()
                    .map_err(|s| schema(&rec, rec.line(), format!("unknown category id `{s}`")))?;
                if categories.iter().any(|c| c.category_id == id) {
                    return Err(schema(&rec, rec.line(), format!("category `{id}` defined twice")));
                }
                let selection_rule = match rec.one("selection")? {
                    "exactly-one" => SelectionRule::ExactlyOne,
                    "at-most-one" => SelectionRule::AtMostOne,
                    other => {
                        return Err(schema(
                            &rec,
                            rec.line_of("selection"),
                            format!("bad selection rule `{other}`"),
                        ))
                    }
                };
                let applicability = match rec.one("applicability")? {
                    "all-views" => Applicability::AllViews,
                    "interior-only" => Applicability::InteriorOnly,
                    other => {
                        return Err(schema(
                            &rec,
                            rec.line_of("applicability"),
                            format!("bad applicability `{other}`"),
                        ))
                    }
                };
                let name = bilingual(&rec, "name")?;
                categories.push(TagCategory {
                    category_id: id,
                    prompt_heading: rec.opt("heading")?.unwrap_or(&name.en).to_string(),
                    name,
                    description: bilingual(&rec, "description")?,
                    selection_rule,
                    applicability,
                    options: Vec::new(),
                });
            }
            _ => option_records.push(rec),
        }
    }
    for rec in option_records {
        rec.only_keys(&["option", "category", "label.zh", "label.en", "spec", "conflict"])?;
        let option_id = rec.kind().1.to_string();
        if !slug_ok(&option_id) {
            return Err(schema(
                &rec,
                rec.line(),
                format!("option id `{option_id}` is not a slug"),
            ));
        }
        let cat_id: CategoryId = rec.one("category")?.parse().map_err(|s| {
            dangling(
                &rec,
                "category",
                format!("option `{option_id}` -> unknown category `{s}`"),
            )
        })?;
        if !option_id.starts_with(&format!("{}.", cat_id.slug())) {
            return Err(schema(
                &rec,
                rec.line(),
                format!("option `{option_id}` must be prefixed by `{cat_id}.`"),
            ));
        }
        let Some(cat) = categories.iter_mut().find(|c| c.category_id == cat_id) else {
            return Err(dangling(
                &rec,
                "category",
                format!("option `{option_id}` -> undefined category `{cat_id}`"),
            ));
        };
        if cat.options.iter().any(|o| o.option_id == option_id) {
            return Err(schema(&rec, rec.line(), format!("option `{option_id}` defined twice")));
        }
        let spec = rec.one("spec")?.to_string();
        cat.options.push(TagOption {
            option_id,
            category: cat_id,
            label: bilingual(&rec, "label")?,
            specification_text: spec,
            conflict_terms: rec.all("conflict")?.into_iter().map(String::from).collect(),
        });
    }
    categories.sort_by_key(|c| c.category_id);
    let tax_err = |message: String| CorpusError::SchemaViolation {
        path: tax_path.display().to_string(),
        line: 0,
        message,
    };
    if categories.len() != CategoryId::CANONICAL.len() {
        return Err(tax_err(format!(
            "expected 8 tag categories, found {}",
            categories.len()
        )));
    }
    for cat in &categories {
        let want = cat.category_id.expected_option_count();
        if cat.options.len() != want {
            return Err(tax_err(format!(
                "category `{}` must have {want} options, found {}",
                cat.category_id,
                cat.options.len()
            )));
        }
    }
    if categories
        .iter()
        .any(|c| (c.category_id == CategoryId::DecorativePatterns) != (c.applicability == Applicability::InteriorOnly))
    {
        return Err(tax_err(
            "only decorative-patterns may be interior-only, and it must be".into(),
        ));
    }

    // lexicon
    let mut lexicon = Lexicon::default();
    let lex_dir = root.join("lexicon");
    let terms_path = lex_dir.join("terms.corpus");
    if !terms_path.is_file() {
        return Err(CorpusError::MissingFile(terms_path.display().to_string()));
    }
    for path in corpus_files(&lex_dir)? {
        for rec in records(&path)? {
            lexicon.absorb(&rec)?;
        }
    }
    let mut seen = BTreeSet::new();
    for id in lexicon
        .terms
        .iter()
        .map(|t| &t.term_id)
        .chain(lexicon.enrichment.iter().map(|t| &t.term_id))
        .chain(lexicon.rules.iter().map(|r| &r.rule_id))
    {
        if !seen.insert(id.clone()) {
            return Err(CorpusError::SchemaViolation {
                path: lex_dir.display().to_string(),
                line: 0,
                message: format!("lexicon id `{id}` defined twice"),
            });
        }
    }

    // sites
    let mut sites = BTreeMap::new();
    let mut site_records = Vec::new();
    for path in corpus_files(&root.join("sites"))? {
        for rec in records(&path)? {
            expect_kind(&rec, &["site"])?;
            rec.only_keys(&[
                "site",
                "name.zh",
                "name.en",
                "cluster.zh",
                "cluster.en",
                "function",
                "style",
                "window",
                "conservation",
                "description.zh",
                "description.en",
                "rendering",
            ])?;
            let site_id = rec.kind().1.to_string();
            if !slug_ok(&site_id) {
                return Err(schema(&rec, rec.line(), format!("site id `{site_id}` is not a slug")));
            }
            let mut functions = BTreeSet::new();
            for f in rec.all("function")? {
                functions.insert(
                    f.parse::<SiteFunction>()
                        .map_err(|s| schema(&rec, rec.line_of("function"), format!("unknown site function `{s}`")))?,
                );
            }
            if functions.is_empty() {
                return Err(schema(&rec, rec.line(), "site needs at least one function"));
            }
            let site = DiaolouSite {
                site_id: site_id.clone(),
                names: bilingual(&rec, "name")?,
                cluster: bilingual(&rec, "cluster")?,
                functions,
                style: rec.one("style")?.to_string(),
                window_features: rec.all("window")?.into_iter().map(String::from).collect(),
                conservation_status: rec.one("conservation")?.to_string(),
                descriptions: bilingual(&rec, "description")?,
                base_rendering_ref: rec.one("rendering")?.to_string(),
            };
            if sites.insert(site_id.clone(), site).is_some() {
                return Err(schema(&rec, rec.line(), format!("site `{site_id}` defined twice")));
            }
            site_records.push(rec);
        }
    }

    // knowledge sections and persona
    let mut sections = Vec::new();
    let mut persona = None;
    let mut knowledge_records = Vec::new();
    for path in corpus_files(&root.join("knowledge"))? {
        for rec in records(&path)? {
            expect_kind(&rec, &["section", "persona"])?;
            if rec.kind().0 == "section" {
                rec.only_keys(&[
                    "section",
                    "title.zh",
                    "title.en",
                    "body.zh",
                    "body.en",
                    "narration.zh",
                    "narration.en",
                    "site",
                    "category",
                ])?;
                let id: SectionId = rec
                    .kind()
                    .1
                    .parse()
                    .map_err(|s| schema(&rec, rec.line(), format!("unknown section id `{s}`")))?;
                if sections.iter().any(|s: &KnowledgeSection| s.section_id == id) {
                    return Err(schema(
                        &rec,
                        rec.line(),
                        format!("section `{}` defined twice", id.slug()),
                    ));
                }
                let mut category_ids = Vec::new();
                for c in rec.all("category")? {
                    category_ids.push(c.parse::<CategoryId>().map_err(|s| {
                        dangling(
                            &rec,
                            "category",
                            format!("section `{}` -> unknown category `{s}`", id.slug()),
                        )
                    })?);
                }
                sections.push(KnowledgeSection {
                    section_id: id,
                    title: bilingual(&rec, "title")?,
                    body: bilingual(&rec, "body")?,
                    narration: bilingual(&rec, "narration")?,
                    site_ids: rec.all("site")?.into_iter().map(String::from).collect(),
                    category_ids,
                });
            } else {
                rec.only_keys(&[
                    "persona",
                    "name.zh",
                    "name.en",
                    "framing.zh",
                    "framing.en",
                    "preface.zh",
                    "preface.en",
                    "no-grounding.zh",
                    "no-grounding.en",
                    "grounding",
                ])?;
                if persona.is_some() {
                    return Err(schema(&rec, rec.line(), "only one persona may be defined"));
                }
                persona = Some(PersonaProfile {
                    persona_id: rec.kind().1.to_string(),
                    name: bilingual(&rec, "name")?,
                    framing: bilingual(&rec, "framing")?,
                    preface: bilingual(&rec, "preface")?,
                    no_grounding: bilingual(&rec, "no-grounding")?,
                    grounding: rec.all("grounding")?.into_iter().map(String::from).collect(),
                });
            }
            knowledge_records.push(rec);
        }
    }
    sections.sort_by_key(|s| s.section_id);
    let knowledge_dir = root.join("knowledge").display().to_string();
    for id in SectionId::ALL {
        if !sections.iter().any(|s| s.section_id == id) {
            return Err(CorpusError::SchemaViolation {
                path: knowledge_dir.clone(),
                line: 0,
                message: format!("knowledge section `{}` is missing", id.slug()),
            });
        }
    }
    let Some(persona) = persona else {
        return Err(CorpusError::SchemaViolation {
            path: knowledge_dir,
            line: 0,
            message: "no persona record found".into(),
        });
    };

    // renderings
    let assets_dir = root.join("assets/renderings");
    if !assets_dir.is_dir() {
        return Err(CorpusError::MissingFile(assets_dir.display().to_string()));
    }
    let mut renderings = BTreeMap::new();

    let mut corpus = Corpus {
        corpus_version: CORPUS_VERSION,
        sites,
        categories,
        sections,
        persona,
        lexicon,
        renderings: BTreeMap::new(),
    };

    // referential integrity
    let style_cat = corpus.category(CategoryId::ArchitecturalStyle).clone();
    let window_cat = corpus.category(CategoryId::WindowFeatures).clone();
    for rec in &site_records {
        let site = &corpus.sites[rec.kind().1];
        if style_cat.option(&site.style).is_none() {
            return Err(dangling(
                rec,
                "style",
                format!(
                    "site `{}` -> unknown architectural style `{}`",
                    site.site_id, site.style
                ),
            ));
        }
        for w in &site.window_features {
            if window_cat.option(w).is_none() {
                return Err(dangling(
                    rec,
                    "window",
                    format!("site `{}` -> unknown window feature `{w}`", site.site_id),
                ));
            }
        }
        let asset_ref = &site.base_rendering_ref;
        let asset_path = assets_dir.join(asset_ref);
        if asset_ref.contains('/') || asset_ref.contains("..") || !asset_path.is_file() {
            return Err(dangling(
                rec,
                "rendering",
                format!("site `{}` -> missing base rendering `{asset_ref}`", site.site_id),
            ));
        }
        if !renderings.contains_key(asset_ref) {
            let bytes = fs::read(&asset_path).map_err(|e| CorpusError::Io {
                path: asset_path.display().to_string(),
                message: e.to_string(),
            })?;
            renderings.insert(asset_ref.clone(), rendering_asset(asset_ref, bytes));
        }
    }
    corpus.renderings = renderings;

    for cat in corpus.categories.iter() {
        for opt in &cat.options {
            for term in &opt.conflict_terms {
                if corpus.lexicon.term(term).is_none() {
                    return Err(CorpusError::DanglingReference {
                        path: tax_path.display().to_string(),
                        line: 0,
                        message: format!("option `{}` -> unknown lexicon term `{term}`", opt.option_id),
                    });
                }
            }
        }
    }
    for rec in &knowledge_records {
        if rec.kind().0 == "section" {
            for s in rec.all("site")? {
                if corpus.site(s).is_none() {
                    return Err(dangling(
                        rec,
                        "site",
                        format!("section `{}` -> unknown site `{s}`", rec.kind().1),
                    ));
                }
            }
        } else {
            for g in rec.all("grounding")? {
                if !corpus.has_concept(g) {
                    return Err(dangling(rec, "grounding", format!("persona -> unknown concept `{g}`")));
                }
            }
        }
    }
    let lex_err = |message: String| CorpusError::DanglingReference {
        path: lex_dir.display().to_string(),
        line: 0,
        message,
    };
    if corpus.lexicon.enrichment.is_empty() {
        return Err(CorpusError::SchemaViolation {
            path: lex_dir.display().to_string(),
            line: 0,
            message: "enrichment vocabulary is empty".into(),
        });
    }
    for aspect in REQUIRED_ASPECTS {
        if !corpus.lexicon.enrichment.iter().any(|e| e.aspect == aspect) {
            return Err(CorpusError::SchemaViolation {
                path: lex_dir.display().to_string(),
                line: 0,
                message: format!("enrichment vocabulary lacks a `{aspect}` entry"),
            });
        }
    }
    for e in &corpus.lexicon.enrichment {
        if let StyleScope::Only(styles) = &e.applicable_styles {
            for s in styles {
                if style_cat.option(s).is_none() {
                    return Err(lex_err(format!("enrichment `{}` -> unknown style `{s}`", e.term_id)));
                }
            }
        }
    }

    // concept ids share one namespace
    let mut ids = BTreeSet::new();
    let all_ids = corpus
        .sites
        .keys()
        .cloned()
        .chain(CategoryId::CANONICAL.iter().map(|c| c.slug().to_string()))
        .chain(
            corpus
                .categories
                .iter()
                .flat_map(|c| c.options.iter().map(|o| o.option_id.clone())),
        )
        .chain(SectionId::ALL.iter().map(|s| s.slug().to_string()));
    for id in all_ids {
        if !ids.insert(id.clone()) {
            return Err(CorpusError::SchemaViolation {
                path: root.display().to_string(),
                line: 0,
                message: format!("concept id `{id}` is used by more than one entity"),
            });
        }
    }

    let report = crate::guardrails::lint::lint_corpus(&corpus);
    if let Some(issue) = report.errors.first() {
        return Err(CorpusError::SchemaViolation {
            path: lex_dir.display().to_string(),
            line: 0,
            message: format!("{} ({} lexicon problem(s) in total)", issue, report.errors.len()),
        });
    }
    Ok(corpus)
}

fn rendering_asset(asset_ref: &str, bytes: Vec<u8>) -> RenderingAsset {
    let media_type = match Path::new(asset_ref).extension().and_then(|e| e.to_str()) {
        Some("png") => "image/png",
        Some("jpg" | "jpeg") => "image/jpeg",
        Some("webp") => "image/webp",
        _ => "application/octet-stream",
    };
    RenderingAsset {
        asset_ref: asset_ref.to_string(),
        media_type: media_type.to_string(),
        sha256: hex::encode(Sha256::digest(&bytes)),
        byte_size: bytes.len(),
        bytes: Arc::new(bytes),
    }
}
