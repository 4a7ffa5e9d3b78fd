//! Job directories: every file is written to a temporary name and renamed
//! into place, and a manifest lists what was written.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;

use crate::CliError;

pub struct OutputDir {
    dir: PathBuf,
    written: Vec<(String, u64)>,
}

#[derive(Serialize)]
struct ManifestFile<'a> {
    name: &'a str,
    bytes: u64,
}

#[derive(Serialize)]
struct Manifest<'a, H: Serialize> {
    tool: &'static str,
    version: &'static str,
    created_unix: u64,
    exit_code: i32,
    job: &'a H,
    files: Vec<ManifestFile<'a>>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::usage(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(OutputDir { dir: dir.to_path_buf(), written: Vec::new() })
    }

    pub fn write(&mut self, name: &str, body: &[u8]) -> Result<(), CliError> {
        let tmp = self.dir.join(format!(".{name}.tmp"));
        let dst = self.dir.join(name);
        let res = (|| {
            let mut f = fs::File::create(&tmp)?;
            f.write_all(body)?;
            f.sync_all()?;
            fs::rename(&tmp, &dst)
        })();
        res.map_err(|e| CliError::usage(format!("cannot write {}: {e}", dst.display())))?;
        self.written.push((name.to_string(), body.len() as u64));
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut body = serde_json::to_vec_pretty(value).expect("reports serialize");
        body.push(b'\n');
        self.write(name, &body)
    }

    /// The only file carrying a timestamp.
    pub fn finish<H: Serialize>(mut self, job: &H, exit_code: i32) -> Result<(), CliError> {
        let created_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        let written = std::mem::take(&mut self.written);
        let manifest = Manifest {
            tool: "calibra",
            version: env!("CARGO_PKG_VERSION"),
            created_unix,
            exit_code,
            job,
            files: written.iter().map(|(name, bytes)| ManifestFile { name, bytes: *bytes }).collect(),
        };
        self.write_json("manifest.json", &manifest)
    }
}

/// A CSV table assembled in memory.
pub struct Csv(String);

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Csv(header.join(",") + "\n")
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, cells: I) {
        let cells: Vec<String> = cells.into_iter().collect();
        self.0.push_str(&cells.join(","));
        self.0.push('\n');
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.0.into_bytes()
    }
}

pub fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}
