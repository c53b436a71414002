//! Run directories written atomically, plus CSV and JSON emitters.
//!
//! Files go to a hidden sibling directory that is renamed onto the target
//! once every stage has succeeded. Output bytes depend only on the inputs:
//! floats use Rust's shortest round-trip formatting and maps are ordered.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{io_err, CliError, Result};

pub const SUMMARY_FILE: &str = "summary.json";
pub const SCHEMA_VERSION: u32 = 1;

pub struct RunDir {
    target: PathBuf,
    staging: tempfile::TempDir,
    files: Vec<String>,
}

impl RunDir {
    pub fn create(target: &Path) -> Result<Self> {
        let parent = match target.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        fs::create_dir_all(&parent).map_err(io_err(&parent))?;
        let name = target
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| "out".into());
        let staging = tempfile::Builder::new()
            .prefix(&format!(".{name}.partial-"))
            .tempdir_in(&parent)
            .map_err(io_err(&parent))?;
        Ok(RunDir {
            target: target.to_path_buf(),
            staging,
            files: Vec::new(),
        })
    }

    pub fn staging_path(&self) -> &Path {
        self.staging.path()
    }

    /// Relative names of the files written so far, in write order.
    pub fn manifest(&self) -> &[String] {
        &self.files
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.staging.path().join(name);
        fs::write(&path, bytes).map_err(io_err(&path))?;
        if !self.files.iter().any(|f| f == name) {
            self.files.push(name.to_string());
        }
        Ok(())
    }

    /// Writes a CSV with the given header; every row must match its width.
    pub fn write_csv<R, I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<()>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        let path = self.staging.path().join(name);
        let csv_err = |source| CliError::Csv {
            path: path.clone(),
            source,
        };
        w.write_record(header).map_err(csv_err)?;
        for row in rows {
            w.write_record(row).map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io {
            path: path.clone(),
            source: e.into_error(),
        })?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(name, &bytes)
    }

    /// Replaces the target directory with the staged one.
    pub fn commit(self) -> Result<PathBuf> {
        let staged = self.staging.keep();
        if self.target.exists() {
            fs::remove_dir_all(&self.target).map_err(io_err(&self.target))?;
        }
        fs::rename(&staged, &self.target).map_err(io_err(&self.target))?;
        Ok(self.target)
    }

    /// Keeps the staged files for inspection and wraps the error with the
    /// failing stage.
    pub fn abandon(self, stage: &str, source: CliError) -> CliError {
        let artifacts = self.staging.keep();
        CliError::Stage {
            stage: stage.to_string(),
            artifacts,
            source: Box::new(source),
        }
    }
}

/// Shortest round-trip decimal form.
pub fn num(x: f64) -> String {
    x.to_string()
}

/// Rows `(c, survival)` of a rank-size list.
pub fn rank_size_rows(points: &[(f64, f64)]) -> Vec<Vec<String>> {
    points.iter().map(|&(c, s)| vec![num(c), num(s)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn commit_replaces_target() {
        let root = tempfile::tempdir().unwrap();
        let target = root.path().join("run");
        fs::create_dir(&target).unwrap();
        fs::write(target.join("stale.txt"), "old").unwrap();
        let mut run = RunDir::create(&target).unwrap();
        run.write_csv("a.csv", &["x", "y"], vec![vec![num(1.0), num(0.5)]])
            .unwrap();
        assert!(!target.join("a.csv").exists());
        run.commit().unwrap();
        assert_eq!(fs::read_to_string(target.join("a.csv")).unwrap(), "x,y\n1,0.5\n");
        assert!(!target.join("stale.txt").exists());
    }

    #[test]
    fn abandon_keeps_partial_files() {
        let root = tempfile::tempdir().unwrap();
        let mut run = RunDir::create(&root.path().join("run")).unwrap();
        run.write_bytes("partial.txt", b"x").unwrap();
        match run.abandon("fit", CliError::Invalid("boom".into())) {
            CliError::Stage { artifacts, stage, .. } => {
                assert_eq!(stage, "fit");
                assert!(artifacts.join("partial.txt").exists());
            }
            other => panic!("{other:?}"),
        }
        assert!(!root.path().join("run").exists());
    }
}
