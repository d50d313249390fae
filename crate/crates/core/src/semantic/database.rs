use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::transcript::normalize_word;
use crate::error::{Error, Result};
use crate::motion::{validate_rotations, MotionClip};
use crate::vqvae::{LatentSequence, VqvaeModel};

pub const DATABASE_FORMAT: &str = "gesture-db";
pub const MAX_GESTURE_SECONDS: f64 = 3.0;

/// A short labeled gesture clip before encoding.
#[derive(Debug, Clone)]
pub struct LabeledClip {
    pub id: String,
    pub label: String,
    pub category: String,
    pub keywords: Vec<String>,
    pub clip: MotionClip,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticGestureEntry {
    pub id: String,
    pub label: String,
    pub category: String,
    pub keywords: Vec<String>,
    pub duration: f64,
    pub embedding: LatentSequence,
    pub source: String,
}

/// Immutable gesture collection indexed by id, keyword and category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GestureDatabase {
    format: String,
    latent_dim: usize,
    entries: Vec<SemanticGestureEntry>,
    #[serde(skip)]
    by_id: BTreeMap<String, usize>,
    #[serde(skip)]
    by_keyword: BTreeMap<String, Vec<usize>>,
}

impl GestureDatabase {
    /// Indexes already-encoded entries.
    pub fn from_entries(entries: Vec<SemanticGestureEntry>) -> Result<Self> {
        let latent_dim = entries.first().map(|e| e.embedding.dim()).unwrap_or(0);
        let mut db = Self {
            format: DATABASE_FORMAT.into(),
            latent_dim,
            entries,
            by_id: BTreeMap::new(),
            by_keyword: BTreeMap::new(),
        };
        db.reindex()?;
        Ok(db)
    }

    fn reindex(&mut self) -> Result<()> {
        self.by_id.clear();
        self.by_keyword.clear();
        for (i, e) in self.entries.iter().enumerate() {
            if e.keywords.is_empty() {
                return Err(Error::Database(format!("entry {} has no keywords", e.id)));
            }
            if e.duration > MAX_GESTURE_SECONDS + 1e-9 {
                return Err(Error::Database(format!("entry {} lasts {:.3} s", e.id, e.duration)));
            }
            if e.embedding.dim() != self.latent_dim {
                return Err(Error::Database(format!("entry {} has latent width {}", e.id, e.embedding.dim())));
            }
            let expected = (e.duration * 30.0 / 4.0 - 1e-9).ceil() as usize;
            if e.embedding.len() != expected {
                return Err(Error::Database(format!(
                    "entry {} has {} latent frames, expected {expected}",
                    e.id,
                    e.embedding.len()
                )));
            }
            if self.by_id.insert(e.id.clone(), i).is_some() {
                return Err(Error::Database(format!("duplicate id {}", e.id)));
            }
            for k in &e.keywords {
                let key = normalize_phrase(k);
                if key.is_empty() {
                    return Err(Error::Database(format!("entry {} has an empty keyword", e.id)));
                }
                self.by_keyword.entry(key).or_default().push(i);
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn entries(&self) -> &[SemanticGestureEntry] {
        &self.entries
    }

    pub fn get(&self, id: &str) -> Option<&SemanticGestureEntry> {
        self.by_id.get(id).map(|&i| &self.entries[i])
    }

    /// Entries with a keyword equal to `phrase` after normalization.
    pub fn lookup_keyword(&self, phrase: &str) -> Vec<&SemanticGestureEntry> {
        self.by_keyword
            .get(&normalize_phrase(phrase))
            .map(|v| v.iter().map(|&i| &self.entries[i]).collect())
            .unwrap_or_default()
    }

    pub fn by_category(&self, category: &str) -> Vec<&SemanticGestureEntry> {
        self.entries.iter().filter(|e| e.category == category).collect()
    }

    /// Normalized keywords as word lists, each with its entry index, in
    /// entry order.
    pub(crate) fn keyword_phrases(&self) -> Vec<(Vec<String>, usize)> {
        let mut out = Vec::new();
        for (i, e) in self.entries.iter().enumerate() {
            for k in &e.keywords {
                out.push((normalize_phrase(k).split(' ').map(str::to_string).collect(), i));
            }
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_vec(self)?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut db: Self = serde_json::from_slice(&fs::read(path)?)?;
        if db.format != DATABASE_FORMAT {
            return Err(Error::Database(format!("unexpected format {:?}", db.format)));
        }
        db.reindex()?;
        Ok(db)
    }
}

fn normalize_phrase(p: &str) -> String {
    p.split_whitespace()
        .map(normalize_word)
        .filter(|w| !w.is_empty())
        .collect::<Vec<_>>()
        .join(" ")
}

/// Encodes every clip with `vqvae`. Clips must be valid rotations, at most
/// three seconds long, with unique ids.
pub fn build_database(clips: Vec<LabeledClip>, vqvae: &VqvaeModel) -> Result<GestureDatabase> {
    let mut entries = Vec::with_capacity(clips.len());
    for c in clips {
        let duration = c.clip.duration_seconds();
        if duration > MAX_GESTURE_SECONDS + 1e-9 {
            return Err(Error::Database(format!(
                "clip {} lasts {duration:.3} s, limit is {MAX_GESTURE_SECONDS} s",
                c.id
            )));
        }
        let bad = validate_rotations(&c.clip, 1e-4);
        if let Some(v) = bad.first() {
            return Err(Error::Database(format!(
                "clip {} has an invalid rotation at frame {}, joint {}",
                c.id, v.frame, v.joint
            )));
        }
        let embedding = vqvae.encode(&c.clip)?;
        entries.push(SemanticGestureEntry {
            id: c.id,
            label: c.label,
            category: c.category,
            keywords: c.keywords,
            duration,
            embedding,
            source: c.source,
        });
    }
    GestureDatabase::from_entries(entries)
}
