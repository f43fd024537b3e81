//! Per-stage manifests: what a stage read, what it wrote, and under which
//! configuration.

use std::io::Read;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::stage::Stage;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    /// Relative to the output directory for artifacts, the file name for
    /// external inputs.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub stage: Stage,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    /// Hash over every input record, upstream artifacts included.
    pub input_hash: String,
    pub depends_on: Vec<Stage>,
    pub inputs: Vec<FileRecord>,
    pub outputs: Vec<FileRecord>,
    /// UTC completion time; the only field that varies between reruns.
    pub created_at: String,
}

pub fn sha256_bytes(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

pub fn sha256_file(path: &Path) -> std::io::Result<(String, u64)> {
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex::encode(h.finalize()), total))
}

pub fn record(path: &Path, label: String) -> std::io::Result<FileRecord> {
    let (sha256, bytes) = sha256_file(path)?;
    Ok(FileRecord { path: label, sha256, bytes })
}

/// Hash of a record list, independent of its order.
pub fn hash_records(records: &[FileRecord]) -> String {
    let mut lines: Vec<String> = records.iter().map(|r| format!("{}\t{}\n", r.path, r.sha256)).collect();
    lines.sort();
    sha256_bytes(lines.concat().as_bytes())
}

/// Files under `dir`, sorted, as forward-slash paths relative to `root`.
pub fn list_files(dir: &Path, root: &Path) -> std::io::Result<Vec<(PathBuf, String)>> {
    let mut out = Vec::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap_or(&p);
                let label = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
                out.push((p, label));
            }
        }
    }
    out.sort_by(|a, b| a.1.cmp(&b.1));
    Ok(out)
}

impl Manifest {
    pub fn path(out: &Path, stage: Stage) -> PathBuf {
        out.join(stage.name()).join(MANIFEST_FILE)
    }

    pub fn load(out: &Path, stage: Stage) -> Option<Manifest> {
        let text = std::fs::read_to_string(Self::path(out, stage)).ok()?;
        serde_json::from_str(&text).ok()
    }

    pub fn write(&self, out: &Path) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(Self::path(out, self.stage), text + "\n")
    }

    /// Every recorded output is still on disk with its recorded content.
    pub fn outputs_intact(&self, out: &Path) -> bool {
        self.outputs.iter().all(|r| sha256_file(&out.join(&r.path)).map(|(h, _)| h == r.sha256).unwrap_or(false))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn record_hash_ignores_order() {
        let a = FileRecord { path: "a".into(), sha256: "1".into(), bytes: 1 };
        let b = FileRecord { path: "b".into(), sha256: "2".into(), bytes: 1 };
        assert_eq!(hash_records(&[a.clone(), b.clone()]), hash_records(&[b.clone(), a.clone()]));
        let c = FileRecord { sha256: "3".into(), ..b };
        assert_ne!(hash_records(&[a.clone(), c]), hash_records(&[a]));
    }

    #[test]
    fn sha256_known_value() {
        assert_eq!(sha256_bytes(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn files_listed_relative_and_sorted() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir_all(dir.path().join("s/sub")).unwrap();
        std::fs::write(dir.path().join("s/b.csv"), "x").unwrap();
        std::fs::write(dir.path().join("s/sub/a.csv"), "y").unwrap();
        let files = list_files(&dir.path().join("s"), dir.path()).unwrap();
        let labels: Vec<&str> = files.iter().map(|f| f.1.as_str()).collect();
        assert_eq!(labels, vec!["s/b.csv", "s/sub/a.csv"]);
    }
}
