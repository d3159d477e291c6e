use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Lang {
    Zh,
    En,
}

impl Lang {
    pub const ALL: [Lang; 2] = [Lang::Zh, Lang::En];

    pub fn code(self) -> &'static str {
        match self {
            Lang::Zh => "zh",
            Lang::En => "en",
        }
    }
}

impl fmt::Display for Lang {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unsupported language `{0}` (expected zh or en)")]
pub struct UnsupportedLanguage(pub String);

impl FromStr for Lang {
    type Err = UnsupportedLanguage;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "zh" | "zh-cn" | "zh-hans" => Ok(Lang::Zh),
            "en" | "en-us" | "en-gb" => Ok(Lang::En),
            _ => Err(UnsupportedLanguage(s.to_string())),
        }
    }
}

/// A zh/en text pair.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bilingual {
    pub zh: String,
    pub en: String,
}

/// Text picked for a language; `fell_back` is set when the requested
/// language was empty and the zh text was used instead.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Resolved<'a> {
    pub text: &'a str,
    pub fell_back: bool,
}

impl Bilingual {
    pub fn new(zh: impl Into<String>, en: impl Into<String>) -> Self {
        Self {
            zh: zh.into(),
            en: en.into(),
        }
    }

    pub fn resolve(&self, lang: Lang) -> Resolved<'_> {
        let text = match lang {
            Lang::Zh => &self.zh,
            Lang::En => &self.en,
        };
        if text.trim().is_empty() && lang != Lang::Zh {
            tracing::warn!(requested = %lang, "missing translation, falling back to zh");
            Resolved {
                text: &self.zh,
                fell_back: true,
            }
        } else {
            Resolved { text, fell_back: false }
        }
    }

    pub fn get(&self, lang: Lang) -> &str {
        self.resolve(lang).text
    }

    pub fn is_complete(&self) -> bool {
        !self.zh.trim().is_empty() && !self.en.trim().is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_language_codes() {
        assert_eq!("zh".parse::<Lang>().unwrap(), Lang::Zh);
        assert_eq!("EN".parse::<Lang>().unwrap(), Lang::En);
        assert!("fr".parse::<Lang>().is_err());
    }

    #[test]
    fn missing_english_falls_back_to_chinese() {
        let b = Bilingual::new("碉楼", "");
        let r = b.resolve(Lang::En);
        assert_eq!(r.text, "碉楼");
        assert!(r.fell_back);
        assert!(!b.is_complete());
        let full = Bilingual::new("碉楼", "Diaolou");
        assert_eq!(full.get(Lang::En), "Diaolou");
        assert!(!full.resolve(Lang::En).fell_back);
    }
}
