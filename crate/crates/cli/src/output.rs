//! File writers. Every CSV starts with its header line, followed by `#` metadata lines
//! (tool version, config format, seed, spec hash) and then the rows.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use scalesim_core::verify::sig17;
use sha2::{Digest, Sha256};

use crate::config::{ExperimentConfig, FORMAT_VERSION};
use crate::CliError;

pub const TOOL: &str = concat!("scalesim ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone)]
pub struct Meta {
    pub seed: u64,
    pub spec_hash: String,
}

impl Meta {
    pub fn of(cfg: &ExperimentConfig) -> Result<Self, CliError> {
        Ok(Self {
            seed: cfg.seed,
            spec_hash: spec_hash(cfg)?,
        })
    }

    pub fn lines(&self) -> String {
        format!(
            "# tool = {TOOL}\n# format_version = {FORMAT_VERSION}\n# seed = {}\n# spec_hash = {}\n",
            self.seed, self.spec_hash
        )
    }
}

/// SHA-256 of the canonical TOML of the spec and family blocks.
pub fn spec_hash(cfg: &ExperimentConfig) -> Result<String, CliError> {
    let mut text = toml::to_string(&cfg.spec).map_err(|e| CliError::Runtime(e.to_string()))?;
    if let Some(f) = &cfg.family {
        text.push_str("[family]\n");
        text.push_str(&toml::to_string(f).map_err(|e| CliError::Runtime(e.to_string()))?);
    }
    let digest = Sha256::digest(text.as_bytes());
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// A CSV cell: quoted when it holds a separator, quote or newline.
fn cell(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub struct Writer {
    dir: PathBuf,
    meta: Meta,
}

impl Writer {
    pub fn new(dir: &Path, meta: Meta) -> Result<Self, CliError> {
        fs::create_dir_all(dir.join("plot"))
            .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            meta,
        })
    }

    pub fn text(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, body).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
    }

    pub fn csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[String]>,
    {
        let mut out = header.join(",");
        out.push('\n');
        out.push_str(&self.meta.lines());
        for r in rows {
            let line: Vec<String> = r.as_ref().iter().map(|c| cell(c)).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        self.text(name, &out)
    }

    /// Two-column plot table under `plot/`.
    pub fn plot(&mut self, name: &str, cols: (&str, &str), points: &[(f64, f64)]) -> Result<(), CliError> {
        let rows = points.iter().map(|&(x, y)| [sig17(x), sig17(y)]);
        self.csv(&format!("plot/{name}.csv"), &[cols.0, cols.1], rows)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_are_quoted_when_needed() {
        assert_eq!(cell("plain"), "plain");
        assert_eq!(cell("a,b"), "\"a,b\"");
        assert_eq!(cell("say \"hi\""), "\"say \"\"hi\"\"\"");
    }

    #[test]
    fn hash_ignores_simulation_settings() {
        let a = crate::config::parse("format_version = 1\nseed = 1\n[spec]\nkind = \"skew\"\nalpha = 0.3\n", &[]).unwrap();
        let b = crate::config::parse(
            "format_version = 1\nseed = 9\n[spec]\nkind = \"skew\"\nalpha = 0.3\n[simulation]\npaths = 5\n",
            &[],
        )
        .unwrap();
        let c = crate::config::parse("format_version = 1\nseed = 1\n[spec]\nkind = \"skew\"\nalpha = 0.4\n", &[]).unwrap();
        assert_eq!(spec_hash(&a).unwrap(), spec_hash(&b).unwrap());
        assert_ne!(spec_hash(&a).unwrap(), spec_hash(&c).unwrap());
        assert_eq!(spec_hash(&a).unwrap().len(), 64);
    }
}
