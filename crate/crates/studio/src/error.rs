//! The API error body and its closed set of codes.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use heritage_core::corpus::CorpusError;
use heritage_core::guardrails::{TagError, TagIssue};
use heritage_core::imaging::PipelineError;
use heritage_core::lang::{Bilingual, Lang};
use heritage_core::scaffold::PersonaError;
use heritage_core::store::StoreError;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadRequest,
    NotFound,
    UnsupportedLanguage,
    UnknownSite,
    UnknownCategory,
    UnknownSection,
    UnknownRendering,
    UnknownSession,
    UnknownCreation,
    UnknownJob,
    UnknownImage,
    ImageNotInCreation,
    ImageNotSaved,
    TagError,
    GuardrailViolation,
    QueueFull,
    RateLimited,
    StorageFailure,
    Internal,
}

impl ErrorCode {
    pub const ALL: [ErrorCode; 19] = [
        ErrorCode::BadRequest,
        ErrorCode::NotFound,
        ErrorCode::UnsupportedLanguage,
        ErrorCode::UnknownSite,
        ErrorCode::UnknownCategory,
        ErrorCode::UnknownSection,
        ErrorCode::UnknownRendering,
        ErrorCode::UnknownSession,
        ErrorCode::UnknownCreation,
        ErrorCode::UnknownJob,
        ErrorCode::UnknownImage,
        ErrorCode::ImageNotInCreation,
        ErrorCode::ImageNotSaved,
        ErrorCode::TagError,
        ErrorCode::GuardrailViolation,
        ErrorCode::QueueFull,
        ErrorCode::RateLimited,
        ErrorCode::StorageFailure,
        ErrorCode::Internal,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::BadRequest => "bad_request",
            ErrorCode::NotFound => "not_found",
            ErrorCode::UnsupportedLanguage => "unsupported_language",
            ErrorCode::UnknownSite => "unknown_site",
            ErrorCode::UnknownCategory => "unknown_category",
            ErrorCode::UnknownSection => "unknown_section",
            ErrorCode::UnknownRendering => "unknown_rendering",
            ErrorCode::UnknownSession => "unknown_session",
            ErrorCode::UnknownCreation => "unknown_creation",
            ErrorCode::UnknownJob => "unknown_job",
            ErrorCode::UnknownImage => "unknown_image",
            ErrorCode::ImageNotInCreation => "image_not_in_creation",
            ErrorCode::ImageNotSaved => "image_not_saved",
            ErrorCode::TagError => "tag_error",
            ErrorCode::GuardrailViolation => "guardrail_violation",
            ErrorCode::QueueFull => "queue_full",
            ErrorCode::RateLimited => "rate_limited",
            ErrorCode::StorageFailure => "storage_failure",
            ErrorCode::Internal => "internal",
        }
    }

    pub fn status(self) -> StatusCode {
        match self {
            ErrorCode::BadRequest | ErrorCode::UnsupportedLanguage => StatusCode::BAD_REQUEST,
            ErrorCode::NotFound
            | ErrorCode::UnknownSite
            | ErrorCode::UnknownCategory
            | ErrorCode::UnknownSection
            | ErrorCode::UnknownRendering
            | ErrorCode::UnknownSession
            | ErrorCode::UnknownCreation
            | ErrorCode::UnknownJob
            | ErrorCode::UnknownImage => StatusCode::NOT_FOUND,
            ErrorCode::ImageNotInCreation | ErrorCode::ImageNotSaved => StatusCode::CONFLICT,
            ErrorCode::TagError | ErrorCode::GuardrailViolation => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorCode::QueueFull => StatusCode::SERVICE_UNAVAILABLE,
            ErrorCode::RateLimited => StatusCode::TOO_MANY_REQUESTS,
            ErrorCode::StorageFailure | ErrorCode::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    pub code: ErrorCode,
    #[serde(skip)]
    pub text: Bilingual,
    /// `text` in the requested language; filled in when rendered.
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tier: Option<u8>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub explanation: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub alternatives: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub issues: Vec<IssueView>,
    #[serde(skip)]
    lang: Lang,
    #[serde(skip)]
    alt_text: Vec<Bilingual>,
    #[serde(skip)]
    tag_issues: Vec<TagIssue>,
}

#[derive(Debug, Clone, Serialize)]
pub struct IssueView {
    pub category: String,
    pub kind: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub option_id: Option<String>,
    pub message: String,
}

impl ApiError {
    pub fn new(code: ErrorCode, zh: impl Into<String>, en: impl Into<String>) -> ApiError {
        ApiError {
            code,
            text: Bilingual::new(zh, en),
            message: String::new(),
            tier: None,
            explanation: None,
            alternatives: Vec::new(),
            issues: Vec::new(),
            lang: Lang::En,
            alt_text: Vec::new(),
            tag_issues: Vec::new(),
        }
    }

    pub fn bad_request(detail: impl std::fmt::Display) -> ApiError {
        ApiError::new(
            ErrorCode::BadRequest,
            format!("请求无效：{detail}"),
            format!("Bad request: {detail}"),
        )
    }

    pub fn internal(detail: impl std::fmt::Display) -> ApiError {
        tracing::error!(%detail, "internal error");
        ApiError::new(ErrorCode::Internal, "服务器内部错误", "Internal server error")
    }

    pub fn unknown(code: ErrorCode, what_zh: &str, what_en: &str, id: &str) -> ApiError {
        ApiError::new(code, format!("未知{what_zh}：{id}"), format!("Unknown {what_en}: {id}"))
    }

    pub fn in_lang(mut self, lang: Lang) -> ApiError {
        self.lang = lang;
        self
    }

    pub fn guardrail(tier: u8, explanation: &Bilingual, alternatives: &[Bilingual]) -> ApiError {
        let mut e = ApiError::new(
            ErrorCode::GuardrailViolation,
            "提示词未通过真实性校验",
            "The prompt failed the authenticity checks",
        );
        e.tier = Some(tier);
        e.text = explanation.clone();
        e.alt_text = alternatives.to_vec();
        e
    }

    fn finish(mut self) -> ApiError {
        let lang = self.lang;
        self.message = self.text.resolve(lang).text.to_string();
        if self.code == ErrorCode::GuardrailViolation {
            self.explanation = Some(self.message.clone());
        }
        self.alternatives = self.alt_text.iter().map(|a| a.resolve(lang).text.to_string()).collect();
        self.issues = self
            .tag_issues
            .iter()
            .map(|i| IssueView {
                category: i.category.slug().to_string(),
                kind: serde_json::to_value(i.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
                option_id: i.option_id.clone(),
                message: i.message.resolve(lang).text.to_string(),
            })
            .collect();
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let e = self.finish();
        (e.code.status(), Json(e)).into_response()
    }
}

impl From<TagError> for ApiError {
    fn from(err: TagError) -> Self {
        let mut e = ApiError::new(
            ErrorCode::TagError,
            "标签选择不符合要求",
            "The tag selection does not satisfy the category rules",
        );
        e.tier = Some(2);
        e.tag_issues = err.issues;
        e
    }
}

impl From<PipelineError> for ApiError {
    fn from(err: PipelineError) -> Self {
        match err {
            PipelineError::UnknownBaseRendering(r) => {
                ApiError::unknown(ErrorCode::UnknownRendering, "底图", "base rendering", &r)
            }
            PipelineError::QueueFull => ApiError::new(
                ErrorCode::QueueFull,
                "生成队列已满，请稍后再试",
                "The generation queue is full, please try again shortly",
            ),
            PipelineError::UnknownJob(j) => ApiError::unknown(ErrorCode::UnknownJob, "任务", "job", &j),
            PipelineError::UnknownImage(i) => ApiError::unknown(ErrorCode::UnknownImage, "图像", "image", &i),
            PipelineError::ShutDown => ApiError::internal("pipeline shut down"),
        }
    }
}

impl From<StoreError> for ApiError {
    fn from(err: StoreError) -> Self {
        match err {
            StoreError::UnknownSession(s) => ApiError::unknown(ErrorCode::UnknownSession, "会话", "session", &s),
            StoreError::UnknownCreation(c) => {
                ApiError::unknown(ErrorCode::UnknownCreation, "作品", "creation", &c.to_string())
            }
            StoreError::ImageNotInCreation { creation_id, image_id } => ApiError::new(
                ErrorCode::ImageNotInCreation,
                format!("图像 {image_id} 不属于作品 {creation_id}"),
                format!("Image {image_id} was not produced in creation {creation_id}"),
            ),
            StoreError::ImageNotSaved { creation_id, image_id } => ApiError::new(
                ErrorCode::ImageNotSaved,
                format!("图像 {image_id} 尚未在作品 {creation_id} 中保存"),
                format!("Image {image_id} is not saved in creation {creation_id}"),
            ),
            StoreError::InvalidEntry(m) => ApiError::bad_request(m),
            StoreError::BadLabel => ApiError::new(
                ErrorCode::BadRequest,
                "参与者标签只能包含字母、数字、- 或 _，长度 1 到 32",
                "Participant labels are 1-32 letters, digits, `-` or `_`",
            ),
            StoreError::StorageFailure(m) | StoreError::Corrupt { message: m, .. } => {
                tracing::error!(%m, "session storage failure");
                ApiError::new(ErrorCode::StorageFailure, "存储失败", "Storage failure")
            }
        }
    }
}

impl From<CorpusError> for ApiError {
    fn from(err: CorpusError) -> Self {
        match err {
            CorpusError::UnknownCategory(c) => {
                ApiError::unknown(ErrorCode::UnknownCategory, "标签类别", "tag category", &c)
            }
            CorpusError::UnknownConcept(c) => ApiError::unknown(ErrorCode::NotFound, "概念", "concept", &c),
            CorpusError::UnsupportedLanguage(l) => ApiError::new(
                ErrorCode::UnsupportedLanguage,
                format!("不支持的语言：{l}"),
                format!("Unsupported language: {l}"),
            ),
            other => ApiError::internal(other),
        }
    }
}

impl From<PersonaError> for ApiError {
    fn from(err: PersonaError) -> Self {
        match err {
            PersonaError::EmptyQuestion => {
                ApiError::new(ErrorCode::BadRequest, "问题不能为空", "The question is empty")
            }
        }
    }
}
