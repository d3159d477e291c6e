use std::sync::Arc;

use heritage_core::corpus::Corpus;
use heritage_core::imaging::ImagePipeline;
use heritage_core::lang::Lang;
use heritage_core::scaffold::LanguageModelPort;
use heritage_core::store::SessionStore;

use crate::error::{ApiError, ErrorCode};
use crate::manifest::OfflineManifest;
use crate::ratelimit::RateLimiter;

pub const DEFAULT_GENERATE_PER_MINUTE: usize = 10;

#[derive(Debug, Clone, Copy)]
pub struct Settings {
    pub lang_default: Lang,
    pub generate_per_minute: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            lang_default: Lang::Zh,
            generate_per_minute: DEFAULT_GENERATE_PER_MINUTE,
        }
    }
}

/// Everything a handler may touch. Mutable state lives only in the session
/// store and the job registry inside the pipeline.
pub struct AppState {
    pub corpus: Arc<Corpus>,
    pub port: Arc<dyn LanguageModelPort>,
    pub pipeline: Arc<ImagePipeline>,
    pub sessions: Arc<SessionStore>,
    pub settings: Settings,
    pub limiter: RateLimiter,
    pub manifest: OfflineManifest,
}

pub type Shared = Arc<AppState>;

impl AppState {
    pub fn new(
        corpus: Arc<Corpus>,
        port: Arc<dyn LanguageModelPort>,
        pipeline: Arc<ImagePipeline>,
        sessions: Arc<SessionStore>,
        settings: Settings,
    ) -> Shared {
        let manifest = OfflineManifest::build(&corpus);
        Arc::new(AppState {
            corpus,
            port,
            pipeline,
            sessions,
            limiter: RateLimiter::new(settings.generate_per_minute),
            settings,
            manifest,
        })
    }

    /// Explicit `lang` wins over the server default.
    pub fn lang(&self, requested: Option<&str>) -> Result<Lang, ApiError> {
        match requested {
            None | Some("") => Ok(self.settings.lang_default),
            Some(raw) => raw.parse().map_err(|_| {
                ApiError::new(
                    ErrorCode::UnsupportedLanguage,
                    format!("不支持的语言：{raw}（可选 zh 或 en）"),
                    format!("Unsupported language `{raw}` (expected zh or en)"),
                )
                .in_lang(self.settings.lang_default)
            }),
        }
    }
}
