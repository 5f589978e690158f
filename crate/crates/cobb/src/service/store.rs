//! Directory store: `images/<sha256>` holds uploaded bytes as received and
//! `sessions/<id>.json` one session each. Every write goes to a temporary file
//! that is synced and then renamed over the target.

use std::collections::HashMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use cobb_core::Measurement;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub image_id: String,
    pub observer_id: String,
    pub created_at: String,
    pub measurements: Vec<Measurement>,
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    locks: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

pub fn image_id(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn valid_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = path.parent().expect("store paths have a parent");
    let tmp = dir.join(format!(".{}.tmp-{}", path.file_name().unwrap().to_string_lossy(), uuid::Uuid::new_v4().simple()));
    let mut f = fs::File::create(&tmp)?;
    f.write_all(bytes)?;
    f.sync_all()?;
    drop(f);
    fs::rename(&tmp, path)?;
    if let Ok(d) = fs::File::open(dir) {
        let _ = d.sync_all();
    }
    Ok(())
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> io::Result<Self> {
        let root = root.into();
        fs::create_dir_all(root.join("images"))?;
        fs::create_dir_all(root.join("sessions"))?;
        Ok(Self { root, locks: Mutex::new(HashMap::new()) })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    fn image_path(&self, id: &str) -> Option<PathBuf> {
        valid_id(id).then(|| self.root.join("images").join(id))
    }

    fn session_path(&self, id: &str) -> Option<PathBuf> {
        valid_id(id).then(|| self.root.join("sessions").join(format!("{id}.json")))
    }

    /// Stores image bytes under their content hash. Storing the same bytes
    /// again is a no-op.
    pub fn put_image(&self, bytes: &[u8]) -> io::Result<String> {
        let id = image_id(bytes);
        let path = self.image_path(&id).expect("hex ids are valid");
        if !path.exists() {
            write_atomic(&path, bytes)?;
        }
        Ok(id)
    }

    pub fn get_image(&self, id: &str) -> io::Result<Option<Vec<u8>>> {
        let Some(path) = self.image_path(id) else { return Ok(None) };
        match fs::read(path) {
            Ok(b) => Ok(Some(b)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn has_image(&self, id: &str) -> bool {
        self.image_path(id).is_some_and(|p| p.is_file())
    }

    pub fn get_session(&self, id: &str) -> io::Result<Option<Session>> {
        let Some(path) = self.session_path(id) else { return Ok(None) };
        match fs::read(path) {
            Ok(b) => serde_json::from_slice(&b).map(Some).map_err(io::Error::other),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(e),
        }
    }

    pub fn put_session(&self, session: &Session) -> io::Result<()> {
        let path = self
            .session_path(&session.session_id)
            .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "invalid session id"))?;
        let bytes = serde_json::to_vec_pretty(session).map_err(io::Error::other)?;
        write_atomic(&path, &bytes)
    }

    /// Every stored session, ordered by creation time then id.
    pub fn sessions(&self) -> io::Result<Vec<Session>> {
        let mut out = Vec::new();
        for entry in fs::read_dir(self.root.join("sessions"))? {
            let path = entry?.path();
            if path.extension().is_some_and(|e| e == "json") {
                let bytes = fs::read(&path)?;
                out.push(serde_json::from_slice::<Session>(&bytes).map_err(io::Error::other)?);
            }
        }
        out.sort_by(|a, b| (&a.created_at, &a.session_id).cmp(&(&b.created_at, &b.session_id)));
        Ok(out)
    }

    /// Lock serializing writes to one session.
    pub fn session_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        self.locks.lock().expect("lock table poisoned").entry(id.to_string()).or_default().clone()
    }
}
