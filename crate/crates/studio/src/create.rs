//! The creation loop: validate an idea, confirm and generate, poll jobs,
//! fetch images.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::extract::{ConnectInfo, Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use chrono::Utc;
use heritage_core::guardrails::{
    assemble_prompt, check_idea, revalidate, OutcomeStatus, TagError, TagSelection, TaskTheme, Violation,
};
use heritage_core::imaging::{is_image_id, ConfirmedPrompt, GenerationJob, GenerationRequest, JobStatus};
use heritage_core::lang::Lang;
use heritage_core::scaffold::{elaborate_idea, ElaborationSource};
use heritage_core::store::{IterationEntry, OutcomeSummary};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::content::{immutable, parse_body, LangQuery, API};
use crate::error::{ApiError, ErrorCode};
use crate::state::Shared;

pub fn notice(v: &Violation, lang: Lang) -> Value {
    json!({
        "tier": v.tier,
        "rule_id": v.rule_id,
        "resolution": v.resolution,
        "offending_text": v.offending_text,
        "offending_span": v.offending_span,
        "explanation": v.explanation.resolve(lang).text,
        "alternatives": v.alternatives.iter().map(|a| a.resolve(lang).text).collect::<Vec<_>>(),
    })
}

fn body_lang(state: &Shared, query: Option<&str>, body: Option<&str>) -> Result<Lang, ApiError> {
    state.lang(body.or(query))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateBody {
    pub theme: TaskTheme,
    #[serde(default)]
    pub tags: TagSelection,
    #[serde(default)]
    pub idea: String,
    #[serde(default)]
    pub site_id: Option<String>,
    #[serde(default)]
    pub lang: Option<String>,
}

pub async fn validate(
    State(state): State<Shared>,
    Query(q): Query<LangQuery>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let body: ValidateBody = parse_body(&body, lang)?;
    let lang = body_lang(&state, q.lang.as_deref(), body.lang.as_deref())?;
    let st = state.clone();
    tokio::task::spawn_blocking(move || run_validate(&st, body, lang))
        .await
        .map_err(ApiError::internal)?
        .map(Json)
        .map_err(|e| e.in_lang(lang))
}

fn run_validate(state: &Shared, body: ValidateBody, lang: Lang) -> Result<Value, ApiError> {
    let corpus = &state.corpus;
    let site = match &body.site_id {
        Some(id) => corpus
            .site(id)
            .ok_or_else(|| ApiError::unknown(ErrorCode::UnknownSite, "碉楼", "site", id))?,
        None => corpus
            .sites()
            .next()
            .ok_or_else(|| ApiError::internal("corpus has no sites"))?,
    };
    let outcome = check_idea(&body.idea, &body.tags, body.theme, corpus);
    if outcome.status == OutcomeStatus::TagError {
        return Err(TagError {
            issues: outcome.tag_errors,
        }
        .into());
    }
    let elaboration = elaborate_idea(&outcome, &body.tags, body.theme, corpus, state.port.as_ref());
    let prompt = if elaboration.source == ElaborationSource::Model {
        let mut o = outcome.clone();
        o.normalized_idea = elaboration.text.clone();
        assemble_prompt(site, &body.tags, &o, body.theme, corpus)
    } else {
        assemble_prompt(site, &body.tags, &outcome, body.theme, corpus)
    };
    Ok(json!({
        "lang": lang,
        "outcome": outcome,
        "notices": outcome.violations.iter().map(|v| notice(v, lang)).collect::<Vec<_>>(),
        "elaboration": {
            "text": elaboration.text,
            "source": elaboration.source,
            "notices": elaboration.violations.iter().map(|v| notice(v, lang)).collect::<Vec<_>>(),
        },
        "scaffolded_prompt": {
            "theme": prompt.theme,
            "site_id": prompt.site_id,
            "clauses": prompt.clauses,
            "structured": prompt.structured_view(),
            "rendered": prompt.rendered,
        },
    }))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateBody {
    pub session_id: String,
    pub confirmed_prompt: String,
    pub site_id: String,
    pub theme: TaskTheme,
    #[serde(default)]
    pub tags: TagSelection,
    #[serde(default)]
    pub idea: String,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub creation_id: Option<u64>,
    /// Refine this image instead of starting from the site rendering.
    #[serde(default)]
    pub parent_image_id: Option<String>,
    #[serde(default)]
    pub lang: Option<String>,
}

pub async fn generate(
    State(state): State<Shared>,
    ConnectInfo(peer): ConnectInfo<SocketAddr>,
    Query(q): Query<LangQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    if let Err(wait) = state.limiter.check(peer.ip()) {
        let secs = wait.as_secs().max(1);
        let mut resp = ApiError::new(
            ErrorCode::RateLimited,
            format!("生成请求过于频繁，请 {secs} 秒后再试"),
            format!("Too many generation requests; retry in {secs} s"),
        )
        .in_lang(lang)
        .into_response();
        resp.headers_mut().insert(
            header::RETRY_AFTER,
            HeaderValue::from_str(&secs.to_string()).expect("digits"),
        );
        return Ok(resp);
    }
    let body: GenerateBody = parse_body(&body, lang)?;
    let lang = body_lang(&state, q.lang.as_deref(), body.lang.as_deref())?;
    let st = state.clone();
    let out = tokio::task::spawn_blocking(move || run_generate(&st, body, lang))
        .await
        .map_err(ApiError::internal)?
        .map_err(|e| e.in_lang(lang))?;
    Ok((StatusCode::ACCEPTED, Json(out)).into_response())
}

fn run_generate(state: &Shared, body: GenerateBody, lang: Lang) -> Result<Value, ApiError> {
    let corpus = &state.corpus;
    let snap = state.sessions.snapshot();
    if snap.session(&body.session_id).is_none() {
        return Err(ApiError::unknown(
            ErrorCode::UnknownSession,
            "会话",
            "session",
            &body.session_id,
        ));
    }
    let site = corpus
        .site(&body.site_id)
        .ok_or_else(|| ApiError::unknown(ErrorCode::UnknownSite, "碉楼", "site", &body.site_id))?;

    // Clients are untrusted: whatever they send is revalidated here.
    let confirmed = ConfirmedPrompt::confirm(&body.confirmed_prompt, &body.tags, body.theme, corpus)?;
    let recheck = revalidate(confirmed.text(), &body.tags, body.theme, corpus);
    if let Some(v) = recheck.violations.first() {
        return Err(ApiError::guardrail(v.tier, &v.explanation, &v.alternatives));
    }

    let creation_id = match (&body.parent_image_id, body.creation_id) {
        (Some(parent), requested) => {
            let owner = snap
                .creations_of(&body.session_id)
                .find(|c| c.produced(parent).is_some())
                .ok_or_else(|| ApiError::unknown(ErrorCode::UnknownImage, "图像", "image", parent))?;
            if requested.is_some_and(|r| r != owner.creation_id) {
                return Err(ApiError::new(
                    ErrorCode::ImageNotInCreation,
                    format!("图像 {parent} 不属于所选作品"),
                    format!("Image {parent} does not belong to the requested creation"),
                ));
            }
            owner.creation_id
        }
        (None, Some(cid)) => match snap.creation(cid) {
            Some(c) if c.session_id == body.session_id => cid,
            _ => {
                return Err(ApiError::unknown(
                    ErrorCode::UnknownCreation,
                    "作品",
                    "creation",
                    &cid.to_string(),
                ))
            }
        },
        (None, None) => 0,
    };
    if creation_id != 0 {
        let c = snap.creation(creation_id).expect("checked above");
        if c.theme != body.theme {
            return Err(ApiError::bad_request(format!(
                "creation {creation_id} belongs to theme {}, not {}",
                c.theme, body.theme
            )));
        }
    }

    let seed = body.seed.unwrap_or_else(|| {
        snap.creations_of(&body.session_id)
            .map(|c| c.iterations.len() as u64)
            .sum::<u64>()
            + 1
    });
    let creation_id = if creation_id == 0 {
        state
            .sessions
            .open_creation(&body.session_id, body.theme, Some(&site.site_id))?
    } else {
        creation_id
    };

    let sessions = state.sessions.clone();
    let session_id = body.session_id.clone();
    let final_prompt = confirmed.text().to_string();
    let (theme, tags, idea) = (body.theme, body.tags.clone(), body.idea.clone());
    let outcome = OutcomeSummary {
        status: if confirmed.corrections().is_empty() {
            OutcomeStatus::Accepted
        } else {
            OutcomeStatus::Normalized
        },
        rule_ids: confirmed.corrections().iter().map(|v| v.rule_id.clone()).collect(),
    };
    let on_finished = Box::new(move |job: &GenerationJob| {
        if job.status != JobStatus::Done {
            return;
        }
        let entry = IterationEntry {
            theme,
            tags,
            idea,
            outcome,
            final_prompt,
            seed,
            job_id: job.job_id.clone(),
            image_ids: job.image_ids.clone(),
            timestamp: job.timings.finished_at.unwrap_or_else(Utc::now),
        };
        if let Err(e) = sessions.record_iteration(&session_id, Some(creation_id), entry) {
            tracing::error!(job = %job.job_id, error = %e, "could not record iteration");
        }
    });
    let job_id = match &body.parent_image_id {
        Some(parent) => state.pipeline.refine(parent, &confirmed, seed, Some(on_finished))?,
        None => state.pipeline.submit_with(
            GenerationRequest::new(&confirmed, site.base_rendering_ref.clone(), seed),
            Some(on_finished),
        )?,
    };
    Ok(json!({
        "job_id": job_id,
        "job_url": format!("{API}/jobs/{job_id}"),
        "creation_id": creation_id,
        "seed": seed,
        "prompt": confirmed.text(),
        "corrected": !confirmed.corrections().is_empty(),
        "corrections": confirmed.corrections().iter().map(|v| notice(v, lang)).collect::<Vec<_>>(),
    }))
}

pub fn job_view(job: &GenerationJob) -> Value {
    let mut v = serde_json::to_value(job).expect("jobs serialize");
    v["image_urls"] = Value::from(
        job.image_ids
            .iter()
            .map(|i| format!("{API}/images/{i}"))
            .collect::<Vec<_>>(),
    );
    v
}

pub async fn job(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<LangQuery>,
) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let job = state.pipeline.poll(&id).map_err(|e| ApiError::from(e).in_lang(lang))?;
    Ok(Json(job_view(&job)))
}

pub async fn image(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<LangQuery>,
) -> Result<Response, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let missing = || ApiError::unknown(ErrorCode::UnknownImage, "图像", "image", &id).in_lang(lang);
    if !is_image_id(&id) {
        return Err(missing());
    }
    let (bytes, media_type) = state.pipeline.fetch_image(&id).map_err(|_| missing())?;
    Ok(immutable(Bytes::from(bytes.as_ref().clone()), &media_type))
}
