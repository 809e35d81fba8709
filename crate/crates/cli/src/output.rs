use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use serde::Serialize;

use crate::CliError;

/// The output directory of one run, plus the lines meant for stdout.
#[derive(Debug)]
pub struct Output {
    dir: PathBuf,
    report: Mutex<Vec<String>>,
}

fn write_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", path.display()))
}

impl Output {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| write_error(&dir, e))?;
        Ok(Output { dir, report: Mutex::new(Vec::new()) })
    }

    /// Queues a line for stdout.
    pub fn say(&self, line: impl Into<String>) {
        self.report.lock().expect("report lock").push(line.into());
    }

    pub fn into_report(self) -> Vec<String> {
        self.report.into_inner().expect("report lock")
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn file(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        let path = self.path(name);
        File::create(&path).map(BufWriter::new).map_err(|e| write_error(&path, e))
    }

    pub fn csv(&self, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
        Ok(csv::Writer::from_writer(self.file(name)?))
    }

    pub fn text(&self, name: &str, content: &str) -> Result<(), CliError> {
        let path = self.path(name);
        let mut f = self.file(name)?;
        f.write_all(content.as_bytes()).and_then(|_| f.flush()).map_err(|e| write_error(&path, e))
    }

    /// Writes rows through a closure and flushes.
    pub fn table<F>(&self, name: &str, header: &[&str], fill: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut csv::Writer<BufWriter<File>>) -> csv::Result<()>,
    {
        let path = self.path(name);
        let mut w = self.csv(name)?;
        w.write_record(header).map_err(|e| write_error(&path, e))?;
        fill(&mut w).map_err(|e| write_error(&path, e))?;
        w.flush().map_err(|e| write_error(&path, e))
    }

    pub fn echo<T: Serialize>(&self, command: &str, seed: u64, section: &T) -> Result<(), CliError> {
        self.text("effective_config.toml", &crate::config::echo(command, seed, section)?)
    }
}
