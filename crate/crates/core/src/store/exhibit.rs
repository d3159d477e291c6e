//! Exhibit cards: one self-contained HTML page per saved image.

use std::fmt::Write;

use base64::Engine;
use serde::{Deserialize, Serialize};

use super::log::StoreState;
use super::model::{CreationId, StoreError};
use crate::corpus::Corpus;
use crate::imaging::ImageStore;

/// The facts a card shows, also embedded as JSON for machine reading.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExhibitData {
    pub creation_id: CreationId,
    pub image_id: String,
    pub theme: String,
    pub site_id: Option<String>,
    pub tags: Vec<String>,
    pub idea: String,
    pub prompt: String,
    pub seed: u64,
    pub created_at: String,
}

const DATA_OPEN: &str = "<script type=\"application/json\" id=\"exhibit-data\">";

fn esc(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&#39;"),
            _ => out.push(c),
        }
    }
    out
}

pub fn export_exhibit_card(
    state: &StoreState,
    images: &ImageStore,
    corpus: &Corpus,
    creation_id: CreationId,
    image_id: &str,
) -> Result<Vec<u8>, StoreError> {
    let creation = state
        .creation(creation_id)
        .ok_or(StoreError::UnknownCreation(creation_id))?;
    let not_saved = || StoreError::ImageNotSaved {
        creation_id,
        image_id: image_id.to_string(),
    };
    if !creation.saved_image_ids.iter().any(|i| i == image_id) {
        return Err(not_saved());
    }
    let iteration = creation.produced(image_id).ok_or_else(not_saved)?;
    let (bytes, media_type) = images.bytes(image_id).ok_or_else(not_saved)?;

    let data = ExhibitData {
        creation_id,
        image_id: image_id.to_string(),
        theme: creation.theme.to_string(),
        site_id: creation.site_id.clone(),
        tags: iteration.tags.tags.values().cloned().collect(),
        idea: iteration.idea.clone(),
        prompt: iteration.final_prompt.clone(),
        seed: iteration.seed,
        created_at: iteration.timestamp.to_rfc3339(),
    };
    let site = creation.site_id.as_deref().and_then(|s| corpus.site(s));
    let theme = creation.theme;

    let mut h = String::new();
    h.push_str("<!DOCTYPE html>\n<html lang=\"zh-Hans\">\n<head>\n<meta charset=\"utf-8\">\n");
    let _ = writeln!(h, "<title>Diaolou exhibit card #{creation_id}</title>");
    h.push_str(
        "<style>body{font-family:serif;max-width:46rem;margin:2rem auto;color:#222}\
         img{width:100%;border:1px solid #999}dt{font-weight:bold;margin-top:.6rem}\
         .prompt{white-space:pre-wrap;font-family:monospace;font-size:.9rem}</style>\n</head>\n<body>\n",
    );
    let _ = writeln!(h, "<h1>{} · {}</h1>", esc(theme.title_zh()), esc(theme.title_en()));
    if let Some(site) = site {
        let _ = writeln!(h, "<h2>{} · {}</h2>", esc(&site.names.zh), esc(&site.names.en));
    }
    let b64 = base64::engine::general_purpose::STANDARD.encode(bytes.as_slice());
    let _ = writeln!(
        h,
        "<img alt=\"creation {creation_id}\" src=\"data:{};base64,{b64}\">",
        esc(&media_type)
    );
    h.push_str("<dl>\n");
    let _ = writeln!(h, "<dt>创作编号 Creation ID</dt><dd>{creation_id}</dd>");
    if !data.tags.is_empty() {
        h.push_str("<dt>标签 Tags</dt><dd><ul>");
        for id in &data.tags {
            match corpus.option(id) {
                Some(o) => {
                    let _ = write!(h, "<li>{} · {}</li>", esc(&o.label.zh), esc(&o.label.en));
                }
                None => {
                    let _ = write!(h, "<li>{}</li>", esc(id));
                }
            }
        }
        h.push_str("</ul></dd>\n");
    }
    if !data.idea.is_empty() {
        let _ = writeln!(h, "<dt>创意 Idea</dt><dd>{}</dd>", esc(&data.idea));
    }
    let _ = writeln!(
        h,
        "<dt>提示词 Prompt</dt><dd class=\"prompt\">{}</dd>",
        esc(&data.prompt)
    );
    let _ = writeln!(h, "<dt>Seed</dt><dd>{}</dd>", data.seed);
    let _ = writeln!(h, "<dt>时间 Created</dt><dd>{}</dd>", esc(&data.created_at));
    h.push_str("</dl>\n");
    let json = serde_json::to_string(&data)
        .expect("exhibit data serializes")
        .replace('<', "\\u003c")
        .replace('>', "\\u003e")
        .replace('&', "\\u0026");
    let _ = writeln!(h, "{DATA_OPEN}{json}</script>");
    h.push_str("</body>\n</html>\n");
    Ok(h.into_bytes())
}

/// Reads back the embedded data block of a card.
pub fn read_exhibit_data(card: &[u8]) -> Option<ExhibitData> {
    let text = std::str::from_utf8(card).ok()?;
    let start = text.find(DATA_OPEN)? + DATA_OPEN.len();
    let end = start + text[start..].find("</script>")?;
    serde_json::from_str(&text[start..end]).ok()
}
