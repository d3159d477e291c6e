//! Generated image storage. Each image keeps the exact prompt it was made
//! from and, for refinements, its parent.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use chrono::{DateTime, Utc};
use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

const INDEX_FILE: &str = "index.jsonl";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredImage {
    pub image_id: String,
    pub job_id: String,
    /// Position in the 2×2 grid, 0..4.
    pub grid_index: usize,
    pub media_type: String,
    pub sha256: String,
    pub byte_size: usize,
    pub prompt: String,
    pub seed: u64,
    pub base_rendering_ref: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_image_id: Option<String>,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone)]
pub struct NewImage {
    pub job_id: String,
    pub grid_index: usize,
    pub media_type: String,
    pub bytes: Vec<u8>,
    pub prompt: String,
    pub seed: u64,
    pub base_rendering_ref: String,
    pub parent_image_id: Option<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ImageStoreError {
    #[error("image store I/O failure at {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("image index {path} line {line} is corrupt: {message}")]
    Corrupt { path: String, line: usize, message: String },
    #[error("parent image `{0}` is not stored")]
    UnknownParent(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ImageStoreError + '_ {
    move |source| ImageStoreError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn extension(media_type: &str) -> &str {
    match media_type {
        "image/png" => "png",
        "image/jpeg" => "jpg",
        "image/webp" => "webp",
        _ => "bin",
    }
}

/// Ids are `img-` plus 32 lowercase hex digits.
pub fn is_image_id(s: &str) -> bool {
    s.strip_prefix("img-")
        .is_some_and(|h| h.len() == 32 && h.bytes().all(|b| b.is_ascii_digit() || (b'a'..=b'f').contains(&b)))
}

#[derive(Default)]
struct Entries {
    meta: BTreeMap<String, StoredImage>,
    bytes: BTreeMap<String, Arc<Vec<u8>>>,
}

pub struct ImageStore {
    dir: Option<PathBuf>,
    entries: RwLock<Entries>,
    index: Mutex<Option<File>>,
}

impl ImageStore {
    pub fn in_memory() -> ImageStore {
        ImageStore {
            dir: None,
            entries: RwLock::new(Entries::default()),
            index: Mutex::new(None),
        }
    }

    /// Opens (or creates) a directory-backed store and reloads its index.
    pub fn open(dir: impl AsRef<Path>) -> Result<ImageStore, ImageStoreError> {
        let dir = dir.as_ref().to_path_buf();
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
        let index_path = dir.join(INDEX_FILE);
        let mut entries = Entries::default();
        if index_path.exists() {
            let f = File::open(&index_path).map_err(io_err(&index_path))?;
            for (n, line) in BufReader::new(f).lines().enumerate() {
                let line = line.map_err(io_err(&index_path))?;
                if line.trim().is_empty() {
                    continue;
                }
                let corrupt = |message: String| ImageStoreError::Corrupt {
                    path: index_path.display().to_string(),
                    line: n + 1,
                    message,
                };
                let meta: StoredImage = serde_json::from_str(&line).map_err(|e| corrupt(e.to_string()))?;
                let file = dir.join(format!("{}.{}", meta.image_id, extension(&meta.media_type)));
                let bytes = std::fs::read(&file).map_err(io_err(&file))?;
                if hex::encode(Sha256::digest(&bytes)) != meta.sha256 {
                    return Err(corrupt(format!("{} does not match its recorded hash", file.display())));
                }
                entries.bytes.insert(meta.image_id.clone(), Arc::new(bytes));
                entries.meta.insert(meta.image_id.clone(), meta);
            }
        }
        let index = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&index_path)
            .map_err(io_err(&index_path))?;
        Ok(ImageStore {
            dir: Some(dir),
            entries: RwLock::new(entries),
            index: Mutex::new(Some(index)),
        })
    }

    pub fn put(&self, img: NewImage) -> Result<StoredImage, ImageStoreError> {
        if let Some(p) = &img.parent_image_id {
            if !self.entries.read().meta.contains_key(p) {
                return Err(ImageStoreError::UnknownParent(p.clone()));
            }
        }
        let meta = StoredImage {
            image_id: format!("img-{}", uuid::Uuid::new_v4().simple()),
            job_id: img.job_id,
            grid_index: img.grid_index,
            sha256: hex::encode(Sha256::digest(&img.bytes)),
            byte_size: img.bytes.len(),
            media_type: img.media_type,
            prompt: img.prompt,
            seed: img.seed,
            base_rendering_ref: img.base_rendering_ref,
            parent_image_id: img.parent_image_id,
            created_at: Utc::now(),
        };
        let mut index = self.index.lock();
        if let (Some(dir), Some(file)) = (&self.dir, index.as_mut()) {
            let path = dir.join(format!("{}.{}", meta.image_id, extension(&meta.media_type)));
            std::fs::write(&path, &img.bytes).map_err(io_err(&path))?;
            let mut line = serde_json::to_string(&meta).expect("image metadata serializes");
            line.push('\n');
            let index_path = dir.join(INDEX_FILE);
            file.write_all(line.as_bytes()).map_err(io_err(&index_path))?;
            file.flush().map_err(io_err(&index_path))?;
        }
        let mut e = self.entries.write();
        e.bytes.insert(meta.image_id.clone(), Arc::new(img.bytes));
        e.meta.insert(meta.image_id.clone(), meta.clone());
        Ok(meta)
    }

    pub fn get(&self, image_id: &str) -> Option<StoredImage> {
        self.entries.read().meta.get(image_id).cloned()
    }

    pub fn bytes(&self, image_id: &str) -> Option<(Arc<Vec<u8>>, String)> {
        let e = self.entries.read();
        Some((e.bytes.get(image_id)?.clone(), e.meta.get(image_id)?.media_type.clone()))
    }

    /// Ancestors of an image, nearest first.
    pub fn lineage(&self, image_id: &str) -> Vec<String> {
        let e = self.entries.read();
        let mut out = Vec::new();
        let mut cur = e.meta.get(image_id).and_then(|m| m.parent_image_id.clone());
        while let Some(p) = cur {
            cur = e.meta.get(&p).and_then(|m| m.parent_image_id.clone());
            out.push(p);
        }
        out
    }

    pub fn len(&self) -> usize {
        self.entries.read().meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn all(&self) -> Vec<StoredImage> {
        self.entries.read().meta.values().cloned().collect()
    }
}
