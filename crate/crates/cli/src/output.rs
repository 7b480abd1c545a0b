//! Artifacts of a run: `summary.json`, `metadata.json`, CSV tables and
//! JSON-lines logs in the output directory.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

/// Shortest decimal string that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn nums(xs: &[f64]) -> Vec<String> {
    xs.iter().map(|x| num(*x)).collect()
}

pub struct Output {
    dir: PathBuf,
    files: Vec<String>,
    started: SystemTime,
    clock: Instant,
}

impl Output {
    pub fn create(dir: &Path) -> Result<Output, CliError> {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Usage(format!("cannot create output directory {}: {e}", dir.display())))?;
        Ok(Output {
            dir: dir.to_path_buf(),
            files: Vec::new(),
            started: SystemTime::now(),
            clock: Instant::now(),
        })
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, CliError> {
        self.files.push(name.to_string());
        let path = self.dir.join(name);
        let f = File::create(&path).map_err(|e| CliError::Failure(format!("cannot write {}: {e}", path.display())))?;
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize + ?Sized>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Failure(e.to_string()))?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    pub fn csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let w = self.open(name)?;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(header).map_err(|e| CliError::Failure(e.to_string()))?;
        for row in rows {
            out.write_record(&row).map_err(|e| CliError::Failure(e.to_string()))?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn json_lines<T: Serialize>(&mut self, name: &str, records: &[T]) -> Result<(), CliError> {
        let mut w = self.open(name)?;
        for r in records {
            serde_json::to_writer(&mut w, r).map_err(|e| CliError::Failure(e.to_string()))?;
            writeln!(w)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Write `summary.json` (deterministic) and `metadata.json` (timestamps).
    pub fn finish(mut self, summary: &Value, argv: &[String], dir: &Path) -> Result<(), CliError> {
        self.json("summary.json", summary)?;
        let started = self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0);
        let mut files = self.files.clone();
        files.push("metadata.json".into());
        let metadata = json!({
            "version": env!("CARGO_PKG_VERSION"),
            "argv": argv,
            "output_dir": dir,
            "started_unix": started,
            "elapsed_seconds": self.clock.elapsed().as_secs_f64(),
            "threads": rayon::current_num_threads(),
            "files": files,
        });
        self.json("metadata.json", &metadata)?;
        Ok(())
    }
}
