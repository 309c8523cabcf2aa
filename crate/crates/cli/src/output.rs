use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::fail::{Exit, Fail, OrExit, Outcome};

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Provenance entry for one file read by the run.
pub fn describe_input(role: &str, path: &Path, bytes: &[u8]) -> Value {
    json!({
        "role": role,
        "path": path.display().to_string(),
        "bytes": bytes.len(),
        "sha256": sha256_hex(bytes),
    })
}

/// Output files of one command, all named `<stem>.<ext>` in one directory.
pub struct Outputs {
    dir: PathBuf,
    stem: String,
    written: Vec<String>,
}

impl Outputs {
    /// Checks up front that none of the files exist (unless `force`), so a
    /// refused run leaves nothing behind.
    pub fn plan(dir: &Path, stem: String, exts: &[&str], force: bool) -> Outcome<Self> {
        let out = Self {
            dir: dir.to_path_buf(),
            stem,
            written: Vec::new(),
        };
        if !force {
            for ext in exts.iter().copied().chain(["manifest.json"]) {
                let path = out.path(ext);
                if path.exists() {
                    return Err(Fail::msg(
                        Exit::Config,
                        format!("{} already exists; pass --force to overwrite", path.display()),
                    ));
                }
            }
        }
        fs::create_dir_all(dir).or_exit(Exit::Config, || format!("creating output directory {}", dir.display()))?;
        Ok(out)
    }

    pub fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.stem))
    }

    pub fn write<F>(&mut self, ext: &str, body: F) -> Outcome<PathBuf>
    where
        F: FnOnce(&mut BufWriter<File>) -> anyhow::Result<()>,
    {
        let path = self.path(ext);
        let ctx = || format!("writing {}", path.display());
        let file = File::create(&path).or_exit(Exit::Parse, ctx)?;
        let mut w = BufWriter::new(file);
        body(&mut w).or_exit(Exit::Parse, ctx)?;
        w.flush().or_exit(Exit::Parse, ctx)?;
        log::info!("wrote {}", path.display());
        self.written.push(path.display().to_string());
        Ok(path)
    }

    pub fn write_json<T: serde::Serialize>(&mut self, ext: &str, value: &T) -> Outcome<PathBuf> {
        self.write(ext, |w| {
            serde_json::to_writer_pretty(&mut *w, value)?;
            writeln!(w)?;
            Ok(())
        })
    }

    /// Writes `<stem>.manifest.json`: `fields` plus version, invocation,
    /// output list and timestamp.
    pub fn finish(mut self, command: &str, inputs: Vec<Value>, fields: Map<String, Value>) -> Outcome<()> {
        let created = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
        let mut manifest = Map::new();
        manifest.insert("software".into(), json!({"name": "informality", "version": env!("CARGO_PKG_VERSION")}));
        manifest.insert("command".into(), json!(command));
        manifest.insert("args".into(), json!(std::env::args().skip(1).collect::<Vec<_>>()));
        manifest.insert("inputs".into(), Value::Array(inputs));
        manifest.insert("outputs".into(), json!(self.written));
        manifest.extend(fields);
        manifest.insert("created_unix".into(), json!(created));
        self.write_json("manifest.json", &Value::Object(manifest))?;
        Ok(())
    }
}
