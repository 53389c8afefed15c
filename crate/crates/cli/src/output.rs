//! Output directory bookkeeping: every artifact goes through [`OutDir`] so
//! the manifest can list it.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

#[derive(Clone, Debug, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: usize,
}

pub struct OutDir {
    root: PathBuf,
    files: Vec<OutputFile>,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("cannot create output directory {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), files: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn files(&self) -> &[OutputFile] {
        &self.files
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
        self.files.push(OutputFile { name: name.to_string(), bytes: contents.len() });
        Ok(())
    }

    pub fn write_json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<String> {
        let text = serde_json::to_string_pretty(value)? + "\n";
        self.write(name, &text)?;
        Ok(text)
    }

    /// Writes a CSV table and returns its text.
    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: Vec<Vec<String>>) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(&r)?;
        }
        let text = String::from_utf8(w.into_inner()?)?;
        self.write(name, &text)?;
        Ok(text)
    }
}

/// Run record written last as `manifest.json`.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub core_version: &'static str,
    /// Arguments after the program name; `replay` feeds them back.
    pub argv: Vec<String>,
    pub command: String,
    pub parameters: serde_json::Value,
    pub threads: usize,
    pub started_unix: u64,
    pub elapsed_seconds: f64,
    pub exit_code: u8,
    pub verdict: Option<String>,
    pub outputs: Vec<OutputFile>,
}

#[derive(Debug, serde::Deserialize)]
pub struct ManifestIn {
    pub argv: Vec<String>,
}

/// Gnuplot script plotting `columns` of a CSV file.
pub fn gnuplot(title: &str, csv: &str, using: &str, xlabel: &str, ylabel: &str, extra: &str) -> String {
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set title '{title}'\n\
         set xlabel '{xlabel}'\n\
         set ylabel '{ylabel}'\n\
         {extra}plot '{csv}' using {using} with linespoints\n"
    )
}
