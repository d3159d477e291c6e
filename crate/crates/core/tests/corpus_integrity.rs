use heritage_core::corpus::{bundled_corpus_dir, load_corpus, CategoryId, Corpus, CorpusError, SectionId};
use heritage_core::lang::Lang;
use sha2::{Digest, Sha256};

fn corpus() -> Corpus {
    Corpus::bundled().unwrap()
}

#[test]
fn counts_and_cardinalities() {
    let c = corpus();
    assert_eq!(c.sites().count(), 10);
    let cats: Vec<(CategoryId, usize)> = c
        .categories()
        .iter()
        .map(|k| (k.category_id, k.options.len()))
        .collect();
    let want = [
        (CategoryId::Viewpoint, 3),
        (CategoryId::TimeOfDay, 3),
        (CategoryId::People, 3),
        (CategoryId::BuildingFunction, 3),
        (CategoryId::ArchitecturalStyle, 5),
        (CategoryId::WindowFeatures, 5),
        (CategoryId::DecorativePatterns, 3),
        (CategoryId::RenderingStyle, 6),
    ];
    assert_eq!(cats, want);
    assert_eq!(c.sections().len(), SectionId::ALL.len());
}

#[test]
fn no_dangling_references() {
    let c = corpus();
    for s in c.sites() {
        assert!(
            c.option(&s.style)
                .is_some_and(|o| o.category == CategoryId::ArchitecturalStyle),
            "{}",
            s.site_id
        );
        for w in &s.window_features {
            assert!(
                c.option(w).is_some_and(|o| o.category == CategoryId::WindowFeatures),
                "{w}"
            );
        }
        for f in &s.functions {
            assert!(c.option(&f.option_id()).is_some(), "{f:?}");
        }
        let r = c.rendering(&s.base_rendering_ref).expect("rendering bundled");
        assert_eq!(hex::encode(Sha256::digest(r.bytes.as_slice())), r.sha256);
        assert_eq!(r.bytes.len(), r.byte_size);
    }
    for sec in c.sections() {
        for id in &sec.site_ids {
            assert!(c.site(id).is_some(), "{id}");
        }
    }
    for cat in c.categories() {
        for o in &cat.options {
            assert_eq!(o.category, cat.category_id);
            for t in &o.conflict_terms {
                assert!(c.lexicon().term(t).is_some(), "{} -> {t}", o.option_id);
            }
        }
    }
    for g in &c.persona().grounding {
        assert!(c.has_concept(g), "{g}");
    }
}

#[test]
fn every_text_is_bilingual() {
    let c = corpus();
    for s in c.sites() {
        for b in [&s.names, &s.cluster, &s.descriptions] {
            assert!(!b.zh.is_empty() && !b.en.is_empty(), "{}", s.site_id);
        }
    }
    for cat in c.categories() {
        assert!(!cat.name.zh.is_empty() && !cat.name.en.is_empty());
        for o in &cat.options {
            assert!(!o.label.zh.is_empty() && !o.label.en.is_empty(), "{}", o.option_id);
        }
    }
    for sec in c.sections() {
        for b in [&sec.title, &sec.body, &sec.narration] {
            assert!(!b.zh.is_empty() && !b.en.is_empty());
        }
    }
    for lang in Lang::ALL {
        let d = c.describe("ruishi-lou", lang.code()).unwrap();
        assert!(!d.fell_back);
    }
}

#[test]
fn loading_is_deterministic() {
    let a = load_corpus(bundled_corpus_dir()).unwrap();
    let b = load_corpus(bundled_corpus_dir()).unwrap();
    assert_eq!(a.to_canonical_json(), b.to_canonical_json());
}

#[test]
fn missing_directory_is_reported() {
    assert!(matches!(
        load_corpus("/no/such/corpus"),
        Err(CorpusError::MissingFile(_))
    ));
}

fn copy_dir(from: &std::path::Path, to: &std::path::Path) {
    std::fs::create_dir_all(to).unwrap();
    for e in std::fs::read_dir(from).unwrap() {
        let e = e.unwrap();
        let dst = to.join(e.file_name());
        if e.file_type().unwrap().is_dir() {
            copy_dir(&e.path(), &dst);
        } else {
            std::fs::copy(e.path(), dst).unwrap();
        }
    }
}

fn edited(file: &str, from: &str, to: &str) -> Result<Corpus, CorpusError> {
    let dir = tempfile::tempdir().unwrap();
    copy_dir(&bundled_corpus_dir(), dir.path());
    let path = dir.path().join(file);
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.contains(from), "{file} lacks {from}");
    std::fs::write(&path, text.replacen(from, to, 1)).unwrap();
    load_corpus(dir.path())
}

#[test]
fn dangling_style_is_rejected() {
    let r = edited(
        "sites/fangshi-denglou.corpus",
        "style: architectural-style.romanesque",
        "style: architectural-style.gothic",
    );
    assert!(matches!(r, Err(CorpusError::DanglingReference { .. })), "{r:?}");
}

#[test]
fn missing_rendering_is_rejected() {
    let r = edited(
        "sites/fangshi-denglou.corpus",
        "rendering: fangshi-denglou.png",
        "rendering: nowhere.png",
    );
    assert!(r.is_err());
}

#[test]
fn unknown_keys_are_schema_violations() {
    let r = edited(
        "sites/fangshi-denglou.corpus",
        "conservation:",
        "height_m: 30\nconservation:",
    );
    assert!(matches!(r, Err(CorpusError::SchemaViolation { .. })), "{r:?}");
}

#[test]
fn loads_quickly() {
    let t = std::time::Instant::now();
    corpus();
    assert!(t.elapsed().as_secs_f64() < 1.0);
}
