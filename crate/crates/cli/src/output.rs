//! File headers, CSV writing and record loading.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use hubbard_anneal::records::SweepRecord;

use crate::VERSION;

/// Version and configuration lines placed at the top of every output.
pub struct Header {
    pub config: String,
}

impl Header {
    pub fn new(config: String) -> Self {
        Header { config }
    }

    pub fn version_line(&self) -> String {
        format!("hubbard-anneal {VERSION}")
    }

    pub fn config_line(&self) -> String {
        format!("config {}", self.config)
    }

    pub fn comment_lines(&self, prefix: &str) -> String {
        format!(
            "{prefix}{}\n{prefix}{}\n",
            self.version_line(),
            self.config_line()
        )
    }
}

pub fn csv_string<T: Serialize>(rows: &[T], with_header: bool) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(with_header)
        .from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

pub fn write_csv<T: Serialize>(path: Option<&Path>, header: &Header, rows: &[T]) -> Result<()> {
    let text = header.comment_lines("# ") + &csv_string(rows, true)?;
    write_text(path, &text)
}

/// Write to `path`, or standard output when absent.
pub fn write_text(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)
                    .with_context(|| format!("creating {}", dir.display()))?;
            }
            fs::write(p, text).with_context(|| format!("writing {}", p.display()))
        }
        None => {
            let mut out = io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

/// Records from a sweep CSV (comment lines skipped) or a JSON array.
pub fn read_records(path: &Path) -> Result<Vec<SweepRecord>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_records(&text).with_context(|| format!("parsing {}", path.display()))
}

pub fn parse_records(text: &str) -> Result<Vec<SweepRecord>> {
    if text.trim_start().starts_with('[') {
        return Ok(serde_json::from_str(text)?);
    }
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    r.deserialize()
        .map(|row| row.map_err(anyhow::Error::from))
        .collect()
}
