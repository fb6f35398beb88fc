use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

/// Every file a subcommand writes, listed in `manifest.json`.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub config_path: Option<String>,
    pub output_dir: String,
    pub subcommand: String,
    pub toolkit_version: String,
    pub wall_time: f64,
    pub seeds: Vec<u64>,
    pub outputs: Vec<String>,
}

pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> anyhow::Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> anyhow::Result<()> {
        let path = self.root.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    /// Numeric CSV with 17 significant digits.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> anyhow::Result<()> {
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            let mut first = true;
            for v in row {
                if !first {
                    text.push(',');
                }
                first = false;
                write!(text, "{v:.16e}").unwrap();
            }
            text.push('\n');
        }
        self.write_text(name, &text)
    }

    pub fn finish(mut self, mut manifest: RunManifest) -> anyhow::Result<()> {
        manifest.output_dir = self.root.display().to_string();
        manifest.outputs = self.written.clone();
        manifest.outputs.push("manifest.json".into());
        self.write_json("manifest.json", &manifest)
    }
}
