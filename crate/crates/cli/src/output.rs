use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub seed: u64,
    pub tool_version: String,
    pub wall_time: f64,
}

/// Where a command's results go: stdout in the chosen format, plus files
/// (each with a manifest) when an output directory is set.
pub struct Sink {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub seed: u64,
    pub format: Format,
    pub out_dir: Option<PathBuf>,
    started: Instant,
}

impl Sink {
    pub fn new<A: Serialize>(command: &str, args: &A, seed: u64, format: Format, out_dir: Option<PathBuf>) -> Self {
        Self {
            command: command.to_string(),
            flags: flag_map(args),
            seed,
            format,
            out_dir,
            started: Instant::now(),
        }
    }

    pub fn manifest(&self) -> RunManifest {
        RunManifest {
            command: self.command.clone(),
            flags: self.flags.clone(),
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time: self.started.elapsed().as_secs_f64(),
        }
    }

    /// Prints the result and writes `<stem>.csv` / `<stem>.json` when an
    /// output directory is configured.
    pub fn emit(&self, stem: &str, csv: Option<&str>, json: Option<&Value>) -> Result<()> {
        let json_text = match json {
            Some(value) => Some(serde_json::to_string_pretty(value)? + "\n"),
            None => None,
        };
        if let Some(dir) = &self.out_dir {
            if let Some(text) = csv {
                self.write_file(dir, &format!("{stem}.csv"), text.as_bytes())?;
            }
            if let Some(text) = &json_text {
                self.write_file(dir, &format!("{stem}.json"), text.as_bytes())?;
            }
        }
        let text = match (self.format, csv, &json_text) {
            (Format::Csv, Some(text), _) | (Format::Json, Some(text), None) => text,
            (_, _, Some(text)) => text.as_str(),
            (_, None, None) => return Ok(()),
        };
        print_stdout(text)
    }

    pub fn write_file(&self, dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }

    pub fn finish(&self) -> Result<()> {
        if let Some(dir) = &self.out_dir {
            let mut text = serde_json::to_string_pretty(&self.manifest())?;
            text.push('\n');
            self.write_file(dir, &format!("{}.manifest.json", self.command), text.as_bytes())?;
        }
        Ok(())
    }
}

/// Writes to stdout; a closed pipe (e.g. `| head`) is not an error.
pub fn print_stdout(text: &str) -> Result<()> {
    let mut stdout = std::io::stdout().lock();
    match stdout.write_all(text.as_bytes()).and_then(|_| stdout.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn flag_map<A: Serialize>(args: &A) -> BTreeMap<String, String> {
    match serde_json::to_value(args) {
        Ok(Value::Object(map)) => map
            .into_iter()
            .map(|(k, v)| {
                let text = match v {
                    Value::String(s) => s,
                    other => other.to_string(),
                };
                (k, text)
            })
            .collect(),
        _ => BTreeMap::new(),
    }
}

/// Renders rows as CSV with the given header.
pub fn csv_string<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.serialize(row)?;
    }
    Ok(String::from_utf8(w.into_inner()?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Flags {
        n: usize,
        exact: bool,
        label: Option<String>,
    }

    #[test]
    fn csv_rows_follow_header() {
        let text = csv_string(&["t", "tail", "label"], [(0.5, 0.25, "a,b"), (1.0, 0.0, "c")]).unwrap();
        assert_eq!(text, "t,tail,label\n0.5,0.25,\"a,b\"\n1.0,0.0,c\n");
    }

    #[test]
    fn flags_are_stringified() {
        let sink = Sink::new("x", &Flags { n: 4, exact: true, label: None }, 7, Format::Csv, None);
        let manifest = sink.manifest();
        assert_eq!(manifest.flags["n"], "4");
        assert_eq!(manifest.flags["exact"], "true");
        assert_eq!(manifest.flags["label"], "null");
        assert_eq!(manifest.seed, 7);
        assert_eq!(manifest.tool_version, env!("CARGO_PKG_VERSION"));
    }

    #[test]
    fn files_and_manifest_are_written() {
        let dir = tempfile::tempdir().unwrap();
        let sink = Sink::new("cmd", &Flags { n: 1, exact: false, label: None }, 0, Format::Json, Some(dir.path().into()));
        sink.write_file(dir.path(), "a.csv", b"x\n").unwrap();
        sink.finish().unwrap();
        assert_eq!(fs::read(dir.path().join("a.csv")).unwrap(), b"x\n");
        let manifest: Value = serde_json::from_slice(&fs::read(dir.path().join("cmd.manifest.json")).unwrap()).unwrap();
        assert_eq!(manifest["command"], "cmd");
    }
}
