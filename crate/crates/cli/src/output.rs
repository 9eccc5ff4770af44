//! Report files. Every file carries the library version and the resolved
//! config; nothing time-dependent is written, so reruns are byte-identical.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::Format;

pub struct Sink {
    dir: PathBuf,
    formats: Vec<Format>,
    config: Value,
    written: Vec<PathBuf>,
}

impl Sink {
    pub fn new(dir: &Path, formats: &[Format], config: Value) -> io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), formats: formats.to_vec(), config, written: Vec::new() })
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn written(&self) -> &[PathBuf] {
        &self.written
    }

    /// `{xylab_version, config, result}`
    pub fn json<T: Serialize>(&mut self, name: &str, result: &T) -> io::Result<()> {
        let doc = json!({
            "xylab_version": xylab_core::VERSION,
            "config": self.config,
            "result": result,
        });
        let mut text = serde_json::to_string_pretty(&doc).map_err(io::Error::other)?;
        text.push('\n');
        self.write(&format!("{name}.json"), &text)
    }

    /// Table with `#` header lines for the version and the config.
    pub fn csv(&mut self, name: &str, body: &str) -> io::Result<()> {
        let text = format!(
            "# xylab {}\n# config: {}\n{body}",
            xylab_core::VERSION,
            serde_json::to_string(&self.config).map_err(io::Error::other)?
        );
        self.write(&format!("{name}.csv"), &text)
    }

    fn write(&mut self, file: &str, text: &str) -> io::Result<()> {
        let path = self.dir.join(file);
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }
}

/// File-name fragment for a temperature: `10`, `37.5`.
pub fn c_tag(c: f64) -> String {
    format!("{c}")
}
