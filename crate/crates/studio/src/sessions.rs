//! Sessions, saved creations, exhibit cards and analytics.

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use heritage_core::guardrails::TaskTheme;
use heritage_core::lang::Lang;
use heritage_core::store::{compute_summary, export_exhibit_card, CreationId};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::content::{parse_body, LangQuery, API};
use crate::error::{ApiError, ErrorCode};
use crate::state::Shared;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewSessionBody {
    pub language: Lang,
    pub participant_label: String,
}

pub async fn create_session(
    State(state): State<Shared>,
    Query(q): Query<LangQuery>,
    body: Bytes,
) -> Result<Response, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let body: NewSessionBody = parse_body(&body, lang)?;
    let session = state
        .sessions
        .create_session(body.language, &body.participant_label)
        .map_err(|e| ApiError::from(e).in_lang(lang))?;
    Ok((StatusCode::CREATED, Json(session)).into_response())
}

fn require_session(state: &Shared, session_id: &str, lang: Lang) -> Result<(), ApiError> {
    if state.sessions.snapshot().session(session_id).is_none() {
        return Err(ApiError::unknown(ErrorCode::UnknownSession, "会话", "session", session_id).in_lang(lang));
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SaveImageBody {
    pub creation_id: CreationId,
    pub image_id: String,
}

pub async fn save_image(
    State(state): State<Shared>,
    Path(session_id): Path<String>,
    Query(q): Query<LangQuery>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let body: SaveImageBody = parse_body(&body, lang)?;
    state
        .sessions
        .save_image(&session_id, body.creation_id, &body.image_id)
        .map_err(|e| ApiError::from(e).in_lang(lang))?;
    let snap = state.sessions.snapshot();
    let c = snap.creation(body.creation_id).expect("just saved into it");
    Ok(Json(json!({
        "creation_id": c.creation_id,
        "saved_image_ids": c.saved_image_ids,
        "exhibit_card_url": format!(
            "{API}/sessions/{session_id}/creations/{}/exhibit-card?image_id={}",
            c.creation_id, body.image_id
        ),
    })))
}

pub async fn creations(
    State(state): State<Shared>,
    Path(session_id): Path<String>,
    Query(q): Query<LangQuery>,
) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    require_session(&state, &session_id, lang)?;
    let snap = state.sessions.snapshot();
    let list: Vec<_> = snap.creations_of(&session_id).collect();
    Ok(Json(json!({ "session_id": session_id, "creations": list })))
}

#[derive(Debug, Default, Deserialize)]
pub struct CardQuery {
    pub lang: Option<String>,
    pub image_id: Option<String>,
}

pub async fn exhibit_card(
    State(state): State<Shared>,
    Path((session_id, creation_id)): Path<(String, String)>,
    Query(q): Query<CardQuery>,
) -> Result<Response, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    require_session(&state, &session_id, lang)?;
    let unknown = || ApiError::unknown(ErrorCode::UnknownCreation, "作品", "creation", &creation_id).in_lang(lang);
    let cid: CreationId = creation_id.parse().map_err(|_| unknown())?;
    let snap = state.sessions.snapshot();
    let creation = snap
        .creation(cid)
        .filter(|c| c.session_id == session_id)
        .ok_or_else(unknown)?;
    // Without an explicit image the most recently saved one is used.
    let image_id = match q.image_id.or_else(|| creation.saved_image_ids.last().cloned()) {
        Some(i) => i,
        None => {
            return Err(ApiError::new(
                ErrorCode::ImageNotSaved,
                format!("作品 {cid} 还没有保存的图像"),
                format!("Creation {cid} has no saved image"),
            )
            .in_lang(lang))
        }
    };
    let st = state.clone();
    let card = tokio::task::spawn_blocking(move || {
        export_exhibit_card(&snap, st.pipeline.images(), &st.corpus, cid, &image_id)
    })
    .await
    .map_err(ApiError::internal)?
    .map_err(|e| ApiError::from(e).in_lang(lang))?;
    let mut resp = (StatusCode::OK, card).into_response();
    let h = resp.headers_mut();
    h.insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("text/html; charset=utf-8"),
    );
    h.insert(
        header::CONTENT_DISPOSITION,
        HeaderValue::from_str(&format!("attachment; filename=\"diaolou-creation-{cid}.html\"")).expect("ascii"),
    );
    Ok(resp)
}

#[derive(Debug, Default, Deserialize)]
pub struct SummaryQuery {
    pub lang: Option<String>,
    pub theme: Option<String>,
}

pub async fn summary(State(state): State<Shared>, Query(q): Query<SummaryQuery>) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let theme = match q.theme.as_deref() {
        None | Some("") => None,
        Some(t) => Some(
            t.parse::<TaskTheme>()
                .map_err(|e| ApiError::bad_request(e).in_lang(lang))?,
        ),
    };
    let snap = state.sessions.snapshot();
    Ok(Json(json!({ "summaries": compute_summary(&snap, theme) })))
}
