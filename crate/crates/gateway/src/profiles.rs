//! Persistent profile store.
//!
//! Layout under the store directory:
//! `blobs/<sha256>.bin` holds each distinct driving video once, and
//! `index.json` maps user ids to their blob and voice reference. The index
//! is rewritten through a temp file and a rename, so a crash leaves either
//! the old or the new index.

use std::collections::BTreeMap;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::RwLock;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};
use thiserror::Error;
pub use txt2vid_core::api::ProfileEntry;
use txt2vid_core::wire::SessionProfile;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("profile store {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("profile index {path} is corrupt: {source}")]
    Index {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unknown profile {0}")]
    Unknown(u16),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PutOutcome {
    /// The user id already had a profile.
    pub replaced: bool,
    /// The blob was already stored (by this or another user id).
    pub deduplicated: bool,
}

#[derive(Debug)]
pub struct ProfileStore {
    dir: PathBuf,
    index: RwLock<BTreeMap<u16, ProfileEntry>>,
}

impl ProfileStore {
    /// Opens or creates a store, checking that it is writable.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        let blobs = dir.join("blobs");
        std::fs::create_dir_all(&blobs).map_err(|e| io_err(&blobs, e))?;
        let probe = dir.join(".write-test");
        std::fs::write(&probe, b"").map_err(|e| io_err(&probe, e))?;
        let _ = std::fs::remove_file(&probe);
        let index_path = dir.join("index.json");
        let index = match std::fs::read(&index_path) {
            Ok(bytes) => {
                let entries: Vec<ProfileEntry> = serde_json::from_slice(&bytes).map_err(|source| StoreError::Index {
                    path: index_path.clone(),
                    source,
                })?;
                entries.into_iter().map(|e| (e.user_id, e)).collect()
            }
            Err(e) if e.kind() == io::ErrorKind::NotFound => BTreeMap::new(),
            Err(e) => return Err(io_err(&index_path, e)),
        };
        Ok(Self {
            dir,
            index: RwLock::new(index),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn blob_path(&self, sha256: &str) -> PathBuf {
        self.dir.join("blobs").join(format!("{sha256}.bin"))
    }

    pub fn put(&self, profile: &SessionProfile) -> Result<(ProfileEntry, PutOutcome), StoreError> {
        let sha = hex::encode(Sha256::digest(&profile.driving_video));
        let blob = self.blob_path(&sha);
        let deduplicated = blob.is_file();
        if !deduplicated {
            write_atomic(&blob, &profile.driving_video)?;
        }
        let entry = ProfileEntry {
            user_id: profile.user_id,
            blob_sha256: sha,
            blob_len: profile.driving_video.len() as u64,
            container_tag: profile.container_tag_str(),
            voice_profile_ref: profile.voice_profile_ref.clone(),
            registered_at_ms: SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0),
        };
        let mut index = self.index.write().unwrap_or_else(|p| p.into_inner());
        let replaced = index.insert(profile.user_id, entry.clone()).is_some();
        let snapshot: Vec<&ProfileEntry> = index.values().collect();
        let json = serde_json::to_vec_pretty(&snapshot).expect("serializable");
        write_atomic(&self.dir.join("index.json"), &json)?;
        Ok((entry, PutOutcome { replaced, deduplicated }))
    }

    pub fn get(&self, user_id: u16) -> Option<ProfileEntry> {
        self.index.read().unwrap_or_else(|p| p.into_inner()).get(&user_id).cloned()
    }

    pub fn contains(&self, user_id: u16) -> bool {
        self.index.read().unwrap_or_else(|p| p.into_inner()).contains_key(&user_id)
    }

    pub fn ids(&self) -> Vec<u16> {
        self.index.read().unwrap_or_else(|p| p.into_inner()).keys().copied().collect()
    }

    pub fn entries(&self) -> Vec<ProfileEntry> {
        self.index.read().unwrap_or_else(|p| p.into_inner()).values().cloned().collect()
    }

    /// Entry and driving-video bytes.
    pub fn load(&self, user_id: u16) -> Result<(ProfileEntry, Vec<u8>), StoreError> {
        let entry = self.get(user_id).ok_or(StoreError::Unknown(user_id))?;
        let path = self.blob_path(&entry.blob_sha256);
        let blob = std::fs::read(&path).map_err(|e| io_err(&path, e))?;
        Ok((entry, blob))
    }
}

fn io_err(path: &Path, source: io::Error) -> StoreError {
    StoreError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let tmp = path.with_extension(format!("tmp{}", std::process::id()));
    std::fs::write(&tmp, bytes).map_err(|e| io_err(&tmp, e))?;
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}
