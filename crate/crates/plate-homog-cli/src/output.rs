//! Result files stamped with the configuration hash.

use std::path::PathBuf;

use serde::Serialize;
use serde_json::Value;

use crate::Failure;

/// Output directory and reporting settings of one command.
pub struct Output {
    /// Directory receiving the files.
    pub dir: PathBuf,
    /// Configuration hash embedded in every file.
    pub hash: String,
    /// Suppress progress messages.
    pub quiet: bool,
}

impl Output {
    fn io(&self, name: &str, e: impl std::fmt::Display) -> Failure {
        Failure::Solver(format!("cannot write {}: {e}", self.dir.join(name).display()))
    }

    /// Prints a progress message unless quiet.
    pub fn say(&self, msg: &str) {
        if !self.quiet {
            eprintln!("{msg}");
        }
    }

    /// Writes a JSON object with the `config_hash` field added.
    pub fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<(), Failure> {
        let mut v = serde_json::to_value(value).map_err(|e| self.io(name, e))?;
        match &mut v {
            Value::Object(map) => {
                map.insert("config_hash".into(), Value::String(self.hash.clone()));
            }
            other => {
                v = serde_json::json!({ "config_hash": self.hash, "data": other.take() });
            }
        }
        let text = serde_json::to_string_pretty(&v).map_err(|e| self.io(name, e))?;
        std::fs::write(self.dir.join(name), text).map_err(|e| self.io(name, e))
    }

    fn writer(&self, name: &str) -> Result<csv::Writer<std::fs::File>, Failure> {
        let path = self.dir.join(name);
        let mut file = std::fs::File::create(&path).map_err(|e| self.io(name, e))?;
        use std::io::Write;
        writeln!(file, "# config_hash: {}", self.hash).map_err(|e| self.io(name, e))?;
        Ok(csv::Writer::from_writer(file))
    }

    /// Writes a CSV file with a leading `# config_hash` comment line.
    pub fn csv(&self, name: &str, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<(), Failure> {
        let mut w = self.writer(name)?;
        w.write_record(header).map_err(|e| self.io(name, e))?;
        for r in rows {
            w.write_record(&r).map_err(|e| self.io(name, e))?;
        }
        w.flush().map_err(|e| self.io(name, e))
    }

    /// Writes serializable records as CSV with a leading `# config_hash` comment line.
    pub fn csv_records<T: Serialize>(&self, name: &str, rows: &[T]) -> Result<(), Failure> {
        let mut w = self.writer(name)?;
        for r in rows {
            w.serialize(r).map_err(|e| self.io(name, e))?;
        }
        w.flush().map_err(|e| self.io(name, e))
    }
}
