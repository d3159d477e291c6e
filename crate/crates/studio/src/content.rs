//! Read-only knowledge routes. Every JSON body here is produced by a plain
//! function of the corpus so the offline manifest can hash the same bytes.

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::Json;
use heritage_core::corpus::{CategoryId, Corpus, DiaolouSite, SectionId, TagCategory};
use heritage_core::lang::{Bilingual, Lang};
use heritage_core::scaffold::{persona_reply, DialogueTurn};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::error::{ApiError, ErrorCode};
use crate::state::Shared;

pub const API: &str = "/api/v1";
pub const SHELL_HTML: &str = include_str!("../assets/index.html");

#[derive(Debug, Default, Deserialize)]
pub struct LangQuery {
    pub lang: Option<String>,
}

pub fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes, lang: Lang) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(e).in_lang(lang))
}

fn text(b: &Bilingual, lang: Lang) -> &str {
    b.resolve(lang).text
}

pub fn rendering_url(asset_ref: &str) -> String {
    format!("{API}/renderings/{asset_ref}")
}

fn option_ref(corpus: &Corpus, option_id: &str, lang: Lang) -> Value {
    let label = corpus.option(option_id).map_or(option_id, |o| text(&o.label, lang));
    json!({ "option_id": option_id, "label": label })
}

pub fn site_view(corpus: &Corpus, site: &DiaolouSite, lang: Lang) -> Value {
    json!({
        "site_id": site.site_id,
        "name": text(&site.names, lang),
        "cluster": text(&site.cluster, lang),
        "functions": site.functions.iter().map(|f| option_ref(corpus, &f.option_id(), lang)).collect::<Vec<_>>(),
        "style": option_ref(corpus, &site.style, lang),
        "window_features": site.window_features.iter().map(|w| option_ref(corpus, w, lang)).collect::<Vec<_>>(),
        "conservation_status": site.conservation_status,
        "description": text(&site.descriptions, lang),
        "base_rendering_ref": site.base_rendering_ref,
        "base_rendering_url": rendering_url(&site.base_rendering_ref),
    })
}

pub fn sites_view(corpus: &Corpus, lang: Lang) -> Value {
    Value::from(corpus.sites().map(|s| site_view(corpus, s, lang)).collect::<Vec<_>>())
}

fn category_view(c: &TagCategory, lang: Lang) -> Value {
    json!({
        "category_id": c.category_id.slug(),
        "name": text(&c.name, lang),
        "description": text(&c.description, lang),
        "selection_rule": c.selection_rule,
        "applicability": c.applicability,
        "option_count": c.options.len(),
    })
}

pub fn categories_view(corpus: &Corpus, lang: Lang) -> Value {
    Value::from(
        corpus
            .categories()
            .iter()
            .map(|c| category_view(c, lang))
            .collect::<Vec<_>>(),
    )
}

pub fn options_view(c: &TagCategory, lang: Lang) -> Value {
    Value::from(
        c.options
            .iter()
            .map(|o| {
                json!({
                    "option_id": o.option_id,
                    "category_id": c.category_id.slug(),
                    "label": text(&o.label, lang),
                    "specification_text": o.specification_text,
                })
            })
            .collect::<Vec<_>>(),
    )
}

pub fn section_view(corpus: &Corpus, id: SectionId, lang: Lang) -> Value {
    let s = corpus.section(id);
    json!({
        "section_id": id.slug(),
        "title": text(&s.title, lang),
        "body": text(&s.body, lang),
        "narration": text(&s.narration, lang),
        "persona_name": text(&corpus.persona().name, lang),
        "site_ids": s.site_ids,
        "category_ids": s.category_ids.iter().map(|c| c.slug()).collect::<Vec<_>>(),
    })
}

pub fn health_view(state: &Shared) -> Value {
    json!({
        "status": "ok",
        "corpus_version": state.corpus.corpus_version,
        "image_backend": state.pipeline.backend_name(),
        "language_model": state.port.name(),
    })
}

pub async fn health(State(state): State<Shared>) -> Json<Value> {
    Json(health_view(&state))
}

pub async fn sites(State(state): State<Shared>, Query(q): Query<LangQuery>) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    Ok(Json(sites_view(&state.corpus, lang)))
}

pub async fn site(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<LangQuery>,
) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let site = state
        .corpus
        .site(&id)
        .ok_or_else(|| ApiError::unknown(ErrorCode::UnknownSite, "碉楼", "site", &id).in_lang(lang))?;
    Ok(Json(site_view(&state.corpus, site, lang)))
}

pub async fn categories(State(state): State<Shared>, Query(q): Query<LangQuery>) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    Ok(Json(categories_view(&state.corpus, lang)))
}

pub async fn category_options(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<LangQuery>,
) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let cat: CategoryId = id
        .parse()
        .map_err(|_| ApiError::unknown(ErrorCode::UnknownCategory, "标签类别", "tag category", &id).in_lang(lang))?;
    Ok(Json(options_view(state.corpus.category(cat), lang)))
}

pub async fn knowledge(
    State(state): State<Shared>,
    Path(section): Path<String>,
    Query(q): Query<LangQuery>,
) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let id: SectionId = section.parse().map_err(|_| {
        ApiError::unknown(ErrorCode::UnknownSection, "知识板块", "knowledge section", &section).in_lang(lang)
    })?;
    Ok(Json(section_view(&state.corpus, id, lang)))
}

/// Long-lived, content-addressed binary response.
pub fn immutable(bytes: Bytes, media_type: &str) -> Response {
    let digest = hex::encode(Sha256::digest(&bytes));
    let mut resp = (StatusCode::OK, bytes).into_response();
    let h = resp.headers_mut();
    if let Ok(v) = HeaderValue::from_str(media_type) {
        h.insert(header::CONTENT_TYPE, v);
    }
    h.insert(
        header::CACHE_CONTROL,
        HeaderValue::from_static("public, max-age=31536000, immutable"),
    );
    h.insert(
        header::ETAG,
        HeaderValue::from_str(&format!("\"{digest}\"")).expect("hex is a valid header"),
    );
    h.insert(
        "x-content-sha256",
        HeaderValue::from_str(&digest).expect("hex is a valid header"),
    );
    h.insert(header::ACCESS_CONTROL_ALLOW_ORIGIN, HeaderValue::from_static("*"));
    h.insert("cross-origin-resource-policy", HeaderValue::from_static("cross-origin"));
    resp
}

pub async fn rendering(State(state): State<Shared>, Path(asset): Path<String>) -> Result<Response, ApiError> {
    let lang = state.settings.lang_default;
    let a = state
        .corpus
        .rendering(&asset)
        .ok_or_else(|| ApiError::unknown(ErrorCode::UnknownRendering, "底图", "rendering", &asset).in_lang(lang))?;
    Ok(immutable(Bytes::from(a.bytes.as_ref().clone()), &a.media_type))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChatBody {
    #[serde(default)]
    pub history: Vec<DialogueTurn>,
    pub question: String,
    #[serde(default)]
    pub lang: Option<String>,
}

pub async fn persona_chat(
    State(state): State<Shared>,
    Query(q): Query<LangQuery>,
    body: Bytes,
) -> Result<Json<Value>, ApiError> {
    let lang = state.lang(q.lang.as_deref())?;
    let body: ChatBody = parse_body(&body, lang)?;
    let lang = match body.lang.as_deref() {
        Some(l) => state.lang(Some(l))?,
        None => lang,
    };
    let st = state.clone();
    let turn = tokio::task::spawn_blocking(move || {
        persona_reply(&body.history, &body.question, lang, &st.corpus, st.port.as_ref())
    })
    .await
    .map_err(ApiError::internal)?
    .map_err(|e| ApiError::from(e).in_lang(lang))?;
    Ok(Json(json!({
        "persona_name": text(&state.corpus.persona().name, lang),
        "lang": lang,
        "turn": turn,
    })))
}

pub async fn shell() -> Response {
    let mut resp = (StatusCode::OK, SHELL_HTML).into_response();
    resp.headers_mut().insert(
        header::CONTENT_TYPE,
        HeaderValue::from_static("text/html; charset=utf-8"),
    );
    resp.headers_mut()
        .insert(header::CACHE_CONTROL, HeaderValue::from_static("no-cache"));
    resp
}

pub async fn offline_manifest(State(state): State<Shared>) -> Json<Value> {
    Json(serde_json::to_value(&state.manifest).expect("manifest serializes"))
}

pub async fn not_found(State(state): State<Shared>, Query(q): Query<LangQuery>) -> ApiError {
    let lang = state.lang(q.lang.as_deref()).unwrap_or(state.settings.lang_default);
    ApiError::new(ErrorCode::NotFound, "没有这个接口", "No such route").in_lang(lang)
}
