//! Installs the four MNIST IDX files into a data directory, verifying each
//! against a SHA-256 table.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use super::stream::{TEST_IMAGES, TEST_LABELS, TRAIN_IMAGES, TRAIN_LABELS};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// File name and expected SHA-256 (lowercase hex).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Checksum {
    pub file: String,
    pub sha256: String,
}

/// Digests of the canonical MNIST distribution.
pub fn mnist_checksums() -> Vec<Checksum> {
    [
        (
            TRAIN_IMAGES,
            "ba891046e6505d7aadcbbe25680a0738ad16aec93bde7f9b65e87a2fc25776db",
        ),
        (
            TRAIN_LABELS,
            "65a50cbbf4e906d70832878ad85ccda5333a97f0f4c3dd2ef09a8a9eef7101c5",
        ),
        (
            TEST_IMAGES,
            "0fa7898d509279e482958e8ce81c8e77db3f2f8254e26661ceb7762c4d494ce7",
        ),
        (
            TEST_LABELS,
            "ff7bcfd416de33731a308c3f266cc351222c34898ecbeaf847f06e48f7ec33f2",
        ),
    ]
    .into_iter()
    .map(|(f, h)| Checksum {
        file: f.to_string(),
        sha256: h.to_string(),
    })
    .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FetchAction {
    /// Already present with the right digest.
    Kept,
    Copied,
}

#[derive(Debug, Clone, Serialize)]
pub struct FetchedFile {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
    pub action: FetchAction,
}

#[derive(Debug, Clone, Serialize)]
pub struct FetchManifest {
    pub source: String,
    pub files: Vec<FetchedFile>,
}

/// Ensures every file of `table` is present in `dest` with its expected
/// digest, copying from `source` where needed. Files already valid are left
/// untouched. Writes `manifest.toml` into `dest`.
pub fn fetch_data(source: Option<&Path>, dest: &Path, table: &[Checksum]) -> Result<FetchManifest> {
    fs::create_dir_all(dest).map_err(|e| Error::io(format!("creating {}", dest.display()), e))?;
    let mut files = Vec::with_capacity(table.len());
    for entry in table {
        let target = dest.join(&entry.file);
        let mut action = FetchAction::Kept;
        let valid = target.exists() && file_digest(&target)? == entry.sha256;
        if !valid {
            let from: PathBuf = match source {
                Some(dir) => dir.join(&entry.file),
                None => {
                    return Err(Error::Data(format!(
                        "{} missing or corrupt and no --source directory given",
                        target.display()
                    )))
                }
            };
            if !from.exists() {
                return Err(Error::Data(format!("{} not found", from.display())));
            }
            let found = file_digest(&from)?;
            if found != entry.sha256 {
                return Err(Error::Checksum {
                    path: from.clone(),
                    expected: entry.sha256.clone(),
                    found,
                });
            }
            let tmp = dest.join(format!(".{}.partial", entry.file));
            fs::copy(&from, &tmp).map_err(|e| Error::io(format!("copying {}", from.display()), e))?;
            fs::rename(&tmp, &target).map_err(|e| Error::io(format!("installing {}", target.display()), e))?;
            action = FetchAction::Copied;
        }
        let bytes = fs::metadata(&target)
            .map_err(|e| Error::io(format!("reading {}", target.display()), e))?
            .len();
        files.push(FetchedFile {
            file: entry.file.clone(),
            sha256: entry.sha256.clone(),
            bytes,
            action,
        });
    }
    let manifest = FetchManifest {
        source: source.map(|s| s.display().to_string()).unwrap_or_default(),
        files,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Data(format!("serializing manifest: {e}")))?;
    let path = dest.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(manifest)
}
