//! The list of shell and knowledge resources a client may cache offline.

use heritage_core::corpus::{Corpus, SectionId};
use heritage_core::lang::Lang;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::content::{
    categories_view, options_view, rendering_url, section_view, site_view, sites_view, API, SHELL_HTML,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub route: String,
    pub sha256: String,
    pub byte_size: usize,
    pub media_type: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OfflineManifest {
    /// Hash over all entries; changes whenever any cached resource does.
    pub version: String,
    pub entries: Vec<ManifestEntry>,
}

fn entry(route: String, bytes: &[u8], media_type: &str) -> ManifestEntry {
    ManifestEntry {
        route,
        sha256: hex::encode(Sha256::digest(bytes)),
        byte_size: bytes.len(),
        media_type: media_type.to_string(),
    }
}

fn json_entry(route: String, v: &Value) -> ManifestEntry {
    entry(
        route,
        &serde_json::to_vec(v).expect("views serialize"),
        "application/json",
    )
}

impl OfflineManifest {
    pub fn build(corpus: &Corpus) -> OfflineManifest {
        let mut entries = vec![entry("/".into(), SHELL_HTML.as_bytes(), "text/html; charset=utf-8")];
        for lang in Lang::ALL {
            let q = format!("?lang={lang}");
            entries.push(json_entry(format!("{API}/sites{q}"), &sites_view(corpus, lang)));
            for s in corpus.sites() {
                entries.push(json_entry(
                    format!("{API}/sites/{}{q}", s.site_id),
                    &site_view(corpus, s, lang),
                ));
            }
            entries.push(json_entry(
                format!("{API}/taxonomy/categories{q}"),
                &categories_view(corpus, lang),
            ));
            for c in corpus.categories() {
                entries.push(json_entry(
                    format!("{API}/taxonomy/categories/{}/options{q}", c.category_id.slug()),
                    &options_view(c, lang),
                ));
            }
            for id in SectionId::ALL {
                entries.push(json_entry(
                    format!("{API}/knowledge/{}{q}", id.slug()),
                    &section_view(corpus, id, lang),
                ));
            }
        }
        for r in corpus.renderings() {
            entries.push(entry(rendering_url(&r.asset_ref), &r.bytes, &r.media_type));
        }
        let mut h = Sha256::new();
        for e in &entries {
            h.update(e.route.as_bytes());
            h.update(b"\0");
            h.update(e.sha256.as_bytes());
            h.update(b"\n");
        }
        OfflineManifest {
            version: hex::encode(h.finalize())[..16].to_string(),
            entries,
        }
    }
}
