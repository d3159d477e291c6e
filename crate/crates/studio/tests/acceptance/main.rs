//! Release acceptance: one line per criterion, nonzero exit if any fails.
//!
//! Run with `cargo test -p heritage-studio --test acceptance`.

#[path = "../common/mod.rs"]
mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use common::{tags, Harness, API};
use heritage_core::corpus::{bundled_corpus_dir, load_corpus, Applicability, CategoryId, Corpus, SelectionRule};
use heritage_core::guardrails::{
    assemble_prompt, check_idea, revalidate, validate_idea, OutcomeStatus, Resolution, TagSelection, TaskTheme,
    ARCHITECTURE_LOCK_CLAUSE, CULTURAL_CONTEXT_CLAUSE, TEMPORAL_1930S_CLAUSE,
};
use heritage_core::imaging::GRID_SIZE;
use heritage_core::record::parse_records;
use heritage_core::store::{
    bundled_pilot_logs_path, compute_summary, load_pilot_logs, read_exhibit_data, replay_pilot_logs, SessionStore,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRunner};
use serde_json::{json, Value};

const CASES: u32 = 1000;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    limit: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            name: "guardrail golden corpus",
            limit: Duration::from_secs(1),
            run: golden_corpus,
        },
        Criterion {
            name: "tier clause invariants",
            limit: Duration::from_secs(10),
            run: tier_clauses,
        },
        Criterion {
            name: "precedence, idempotence and strictness",
            limit: Duration::from_secs(10),
            run: precedence,
        },
        Criterion {
            name: "analytics reproduction",
            limit: Duration::from_secs(10),
            run: analytics,
        },
        Criterion {
            name: "end-to-end stub run",
            limit: Duration::from_secs(30),
            run: end_to_end,
        },
        Criterion {
            name: "corpus integrity",
            limit: Duration::from_secs(1),
            run: corpus_integrity,
        },
    ];
    // warm the shared corpus so the first criterion is not billed for it
    let _ = corpus();
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(c.run)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        let elapsed = start.elapsed();
        let (ok, detail) = match result {
            Ok(d) if elapsed <= c.limit => (true, d),
            Ok(d) => (false, format!("too slow; {d}")),
            Err(e) => (false, e),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {} ({:.2} s, limit {} s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            c.name,
            elapsed.as_secs_f64(),
            c.limit.as_secs()
        );
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} of {} criteria failed", criteria.len());
        ExitCode::FAILURE
    }
}

fn corpus() -> &'static Corpus {
    static C: OnceLock<Corpus> = OnceLock::new();
    C.get_or_init(|| Corpus::bundled().expect("bundled corpus loads"))
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn default_selection() -> TagSelection {
    serde_json::from_value(tags()).unwrap()
}

fn golden_corpus() -> Outcome {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/guardrail_golden.corpus");
    let text = std::fs::read_to_string(&path).map_err(|e| e.to_string())?;
    let records = parse_records(&text, &path).map_err(|e| e.to_string())?;
    let sel = default_selection();
    for r in &records {
        let name = r.one("case").map_err(|e| e.to_string())?;
        let theme: TaskTheme = r.one("theme").unwrap().parse().map_err(|e| format!("{e}"))?;
        let rule = r.one("rule").unwrap();
        let resolution: Resolution =
            serde_json::from_value(Value::from(r.one("resolution").unwrap())).map_err(|e| e.to_string())?;
        let out = check_idea(r.one("idea").unwrap(), &sel, theme, corpus());
        ensure(out.status == OutcomeStatus::Normalized, || {
            format!("{name}: status {:?}", out.status)
        })?;
        let v = out
            .violations
            .iter()
            .find(|v| v.rule_id == rule)
            .ok_or_else(|| format!("{name}: {rule} did not fire"))?;
        ensure(v.resolution == resolution, || {
            format!("{name}: {:?} not {resolution:?}", v.resolution)
        })?;
        for c in r.all("contains").unwrap() {
            ensure(out.normalized_idea.contains(c), || format!("{name}: missing {c:?}"))?;
        }
        for a in r.all("absent").unwrap() {
            ensure(!out.normalized_idea.to_lowercase().contains(a), || {
                format!("{name}: kept {a:?}")
            })?;
        }
    }
    ensure(records.len() == 7, || {
        format!("{} golden cases, expected 7", records.len())
    })?;
    Ok(format!("{} cases", records.len()))
}

#[derive(Debug, Clone)]
struct Input {
    theme: TaskTheme,
    site: usize,
    picks: Vec<usize>,
    optional: Vec<bool>,
    interior: bool,
    idea: String,
}

fn vocabulary() -> &'static [String] {
    static V: OnceLock<Vec<String>> = OnceLock::new();
    V.get_or_init(|| {
        let c = corpus();
        let mut out: Vec<String> = Vec::new();
        for t in TaskTheme::ALL {
            for r in c.lexicon().active_rules(t) {
                out.extend(r.trigger_terms.iter().map(|p| p.text.clone()));
            }
        }
        for cat in c.categories() {
            for o in &cat.options {
                for t in &o.conflict_terms {
                    out.extend(c.lexicon().term(t).unwrap().phrases.iter().map(|p| p.text.clone()));
                }
            }
        }
        out.extend(["rice fields", "the tower", "with", "and", "a", "lanterns", "碉楼", "和"].map(String::from));
        out.sort();
        out.dedup();
        out
    })
}

fn input() -> impl Strategy<Value = Input> {
    let n = vocabulary().len();
    let idea = prop::collection::vec(
        prop_oneof![4 => (0..n).prop_map(|i| vocabulary()[i].clone()), 1 => "[a-z]{1,8}", 1 => "[,. ]{1,2}"],
        0..10,
    )
    .prop_map(|w| w.join(" "));
    (
        prop::sample::select(TaskTheme::ALL.to_vec()),
        0..10usize,
        prop::collection::vec(0..64usize, 8),
        prop::collection::vec(any::<bool>(), 8),
        prop::bool::weighted(0.2),
        idea,
    )
        .prop_map(|(theme, site, picks, optional, interior, idea)| Input {
            theme,
            site,
            picks,
            optional,
            interior,
            idea,
        })
}

fn selection(i: &Input) -> TagSelection {
    let mut sel = TagSelection::default().interior(i.interior);
    for (k, cat) in corpus().categories().iter().enumerate() {
        if cat.applicability == Applicability::InteriorOnly && !i.interior {
            continue;
        }
        if cat.selection_rule == SelectionRule::AtMostOne && !i.optional[k] {
            continue;
        }
        let mut opt = &cat.options[i.picks[k] % cat.options.len()];
        if i.interior && cat.category_id == CategoryId::People {
            opt = cat.option("people.none").unwrap();
        }
        sel = sel.with(cat.category_id, &opt.option_id);
    }
    sel
}

fn runner() -> TestRunner {
    TestRunner::new(Config {
        cases: CASES,
        failure_persistence: None,
        ..Config::default()
    })
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), TestCaseError> {
    if ok {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg()))
    }
}

fn tier_clauses() -> Outcome {
    runner()
        .run(&input(), |i| {
            let c = corpus();
            let sel = selection(&i);
            let out = check_idea(&i.idea, &sel, i.theme, c);
            check(out.status != OutcomeStatus::TagError, || {
                format!("{:?}", out.tag_errors)
            })?;
            let site = c.sites().nth(i.site).unwrap();
            let p = assemble_prompt(site, &sel, &out, i.theme, c);
            check(p.rendered.contains(ARCHITECTURE_LOCK_CLAUSE), || {
                "architecture lock missing".into()
            })?;
            check(p.rendered.contains(CULTURAL_CONTEXT_CLAUSE), || {
                "Kaiping context missing".into()
            })?;
            check(
                p.rendered.contains(TEMPORAL_1930S_CLAUSE) == (i.theme == TaskTheme::HistoricalReconstruction),
                || format!("1930s clause wrong under {}", i.theme),
            )
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{CASES} cases"))
}

/// Word-boundary containment, ignoring case.
fn occurs(hay: &str, needle: &str) -> bool {
    let hay = hay.to_lowercase();
    let needle = needle.to_lowercase();
    let cjk = needle.chars().any(|c| ('\u{4e00}'..='\u{9fff}').contains(&c));
    let mut from = 0;
    while let Some(pos) = hay[from..].find(&needle) {
        let start = from + pos;
        let end = start + needle.len();
        let edge = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric());
        if cjk || (edge(hay[..start].chars().next_back()) && edge(hay[end..].chars().next())) {
            return true;
        }
        from = start + needle.chars().next().unwrap().len_utf8();
    }
    false
}

fn precedence() -> Outcome {
    runner()
        .run(&input(), |i| {
            let c = corpus();
            let sel = selection(&i);
            let out = check_idea(&i.idea, &sel, i.theme, c);
            let p = assemble_prompt(c.sites().nth(i.site).unwrap(), &sel, &out, i.theme, c);
            for opt in sel.options(c) {
                for t in &opt.conflict_terms {
                    for ph in &c.lexicon().term(t).unwrap().phrases {
                        check(!occurs(&p.rendered, &ph.text), || {
                            format!("{} survived {}", ph.text, opt.option_id)
                        })?;
                    }
                }
            }
            let again = revalidate(&p.rendered, &sel, i.theme, c);
            check(again.violations.is_empty(), || {
                format!("rendered prompt fails revalidation: {:?}", again.violations)
            })?;

            let once = validate_idea(&i.idea, &sel, i.theme, c);
            let twice = validate_idea(&once.normalized_idea, &sel, i.theme, c);
            check(
                twice.status == OutcomeStatus::Accepted && twice.normalized_idea == once.normalized_idea,
                || format!("not idempotent on {:?}", i.idea),
            )?;

            let strict = validate_idea(&i.idea, &sel, TaskTheme::HistoricalReconstruction, c);
            if strict.status == OutcomeStatus::Accepted {
                for t in [TaskTheme::RiskEstimation, TaskTheme::FuturePreservation] {
                    let o = validate_idea(&i.idea, &sel, t, c);
                    check(
                        o.status == OutcomeStatus::Accepted && o.normalized_idea == strict.normalized_idea,
                        || format!("{:?} accepted under the strictest theme but changed under {t}", i.idea),
                    )?;
                }
            }
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("{CASES} cases"))
}

fn analytics() -> Outcome {
    let rows = load_pilot_logs(bundled_pilot_logs_path()).map_err(|e| e.to_string())?;
    ensure(rows.len() == 18, || format!("{} rows", rows.len()))?;
    for r in &rows {
        for (t, c) in &r.counts {
            ensure(c.images == GRID_SIZE * c.iterations, || {
                format!("{} {t}: images != 4 x iterations", r.participant)
            })?;
        }
    }
    // direct sum/count over the fixture rows
    let oracle: Vec<(f64, f64)> = TaskTheme::ALL
        .iter()
        .map(|t| {
            let worked: Vec<_> = rows.iter().map(|r| r.counts[t]).filter(|c| c.iterations > 0).collect();
            let n = worked.len() as f64;
            (
                worked.iter().map(|c| c.iterations as f64).sum::<f64>() / n,
                worked.iter().map(|c| c.images as f64).sum::<f64>() / n,
            )
        })
        .collect();
    let store = SessionStore::in_memory();
    replay_pilot_logs(&store, &rows).map_err(|e| e.to_string())?;
    let summary = compute_summary(&store.snapshot(), None);
    ensure(summary.len() == 3, || format!("{} summary rows", summary.len()))?;
    let targets = [(1.722, 6.889), (1.389, 5.556), (1.278, 5.111)];
    let reported = [(1.8, 7.3), (1.6, 6.0), (1.3, 5.6)];
    let mut notes = Vec::new();
    for (k, s) in summary.iter().enumerate() {
        let (it, im) = targets[k];
        ensure(
            (s.iterations.mean - it).abs() <= 0.005 && (s.images.mean - im).abs() <= 0.005,
            || format!("{}: {:.3}/{:.3}", s.theme, s.iterations.mean, s.images.mean),
        )?;
        ensure(
            (s.iterations.mean - oracle[k].0).abs() < 1e-9 && (s.images.mean - oracle[k].1).abs() < 1e-9,
            || format!("{} disagrees with the direct count", s.theme),
        )?;
        let (pit, pim) = reported[k];
        ensure((s.images.mean - pim).abs() > 0.005, || {
            format!("{}: reported images mean reproduced", s.theme)
        })?;
        notes.push(format!(
            "{} iterations {:.3} (reported {pit}) images {:.3} (reported {pim})",
            s.theme, s.iterations.mean, s.images.mean
        ));
    }
    Ok(format!(
        "means within 0.005; reported summary row diverges from the 18 logged rows: {}",
        notes.join("; ")
    ))
}

fn end_to_end() -> Outcome {
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async {
        let h = Harness::start().await;
        let result = scripted_session(&h).await;
        h.stop().await;
        result
    })
}

async fn scripted_session(h: &Harness) -> Outcome {
    let theme = "historical-reconstruction";
    let idea = "a quiet harvest beside the tower";
    let session = h.session("P1").await;

    let (s, v) = h
        .post(
            &format!("{API}/guardrails/validate"),
            &json!({"theme": theme, "tags": tags(), "idea": idea, "site_id": "ruishi-lou"}),
        )
        .await;
    ensure(s == 200, || format!("validate {s}: {v}"))?;
    let prompt = v["scaffolded_prompt"]["rendered"]
        .as_str()
        .unwrap_or_default()
        .to_string();
    let body = |p: &str| {
        json!({"session_id": session, "confirmed_prompt": p, "site_id": "ruishi-lou",
            "theme": theme, "tags": tags(), "idea": idea})
    };

    let (s, first) = h.post(&format!("{API}/generate"), &body(&prompt)).await;
    ensure(s == 202 && first["corrected"] == false, || {
        format!("generate {s}: {first}")
    })?;
    let cid = first["creation_id"].as_u64().unwrap_or_default();
    let job = h.wait_job(first["job_id"].as_str().unwrap_or_default()).await;
    let images: Vec<String> = job["image_ids"]
        .as_array()
        .map(|a| a.iter().filter_map(|v| v.as_str().map(String::from)).collect())
        .unwrap_or_default();
    ensure(job["status"] == "done" && images.len() == GRID_SIZE, || {
        format!("first grid: {job}")
    })?;

    for img in &images {
        let url = format!("{API}/images/{img}");
        let a = h.raw(&url).await.bytes().await.map_err(|e| e.to_string())?;
        let b = h.raw(&url).await.bytes().await.map_err(|e| e.to_string())?;
        ensure(!a.is_empty() && a == b, || {
            format!("image proxy not byte-stable for {img}")
        })?;
    }

    let mut refine = body(&prompt);
    refine["parent_image_id"] = json!(images[1]);
    let (s, refined) = h.post(&format!("{API}/generate"), &refine).await;
    ensure(s == 202 && refined["creation_id"].as_u64() == Some(cid), || {
        format!("refine {s}: {refined}")
    })?;
    let rjob = h.wait_job(refined["job_id"].as_str().unwrap_or_default()).await;
    let rimages = rjob["image_ids"].as_array().cloned().unwrap_or_default();
    ensure(rjob["status"] == "done" && rimages.len() == GRID_SIZE, || {
        format!("refined grid: {rjob}")
    })?;

    let saved = rimages[0].as_str().unwrap_or_default().to_string();
    let (s, v) = h
        .post(
            &format!("{API}/sessions/{session}/iterations/save-image"),
            &json!({"creation_id": cid, "image_id": saved}),
        )
        .await;
    ensure(s == 200, || format!("save {s}: {v}"))?;
    let card = h.raw(v["exhibit_card_url"].as_str().unwrap_or_default()).await;
    let html = card.text().await.map_err(|e| e.to_string())?;
    let data = read_exhibit_data(html.as_bytes()).ok_or("exhibit card carries no data")?;
    ensure(data.image_id == saved && data.prompt == prompt, || {
        "exhibit card does not match".into()
    })?;

    // tampered prompt: lock clause deleted, anachronism added
    let tampered = prompt.replace(ARCHITECTURE_LOCK_CLAUSE, "") + " Add a futuristic glass curtain wall.";
    let oracle = revalidate(
        &tampered,
        &default_selection(),
        TaskTheme::HistoricalReconstruction,
        corpus(),
    );
    let (s, fixed) = h.post(&format!("{API}/generate"), &body(&tampered)).await;
    ensure(
        s == 202 && fixed["corrected"] == true && fixed["prompt"] == oracle.normalized_idea.as_str(),
        || format!("tampered prompt not corrected: {fixed}"),
    )?;
    ensure(fixed["creation_id"].as_u64() > Some(cid), || {
        "creation ids not monotone".into()
    })?;
    let fjob = h.wait_job(fixed["job_id"].as_str().unwrap_or_default()).await;
    ensure(fjob["request"]["prompt"] == oracle.normalized_idea.as_str(), || {
        "backend saw the tampered text".into()
    })?;

    Ok(format!(
        "3 grids of {GRID_SIZE}, tampered prompt corrected with {} rule(s)",
        oracle.violations.len()
    ))
}

fn corpus_integrity() -> Outcome {
    let c = load_corpus(bundled_corpus_dir()).map_err(|e| e.to_string())?;
    ensure(c.sites().count() == 10, || format!("{} sites", c.sites().count()))?;
    let counts: Vec<usize> = c.categories().iter().map(|k| k.options.len()).collect();
    ensure(c.categories().len() == 8 && counts == [3, 3, 3, 3, 5, 5, 3, 6], || {
        format!("cardinalities {counts:?}")
    })?;
    for s in c.sites() {
        ensure(c.option(&s.style).is_some(), || {
            format!("{}: dangling style", s.site_id)
        })?;
        ensure(s.window_features.iter().all(|w| c.option(w).is_some()), || {
            format!("{}: dangling window", s.site_id)
        })?;
        ensure(c.rendering(&s.base_rendering_ref).is_some(), || {
            format!("{}: missing rendering", s.site_id)
        })?;
    }
    for cat in c.categories() {
        for o in &cat.options {
            ensure(o.conflict_terms.iter().all(|t| c.lexicon().term(t).is_some()), || {
                format!("{}: dangling term", o.option_id)
            })?;
        }
    }
    for sec in c.sections() {
        ensure(sec.site_ids.iter().all(|id| c.site(id).is_some()), || {
            "dangling section site".into()
        })?;
    }
    ensure(c.persona().grounding.iter().all(|g| c.has_concept(g)), || {
        "dangling persona grounding".into()
    })?;
    Ok("10 sites, 8 categories, 0 dangling references".into())
}
