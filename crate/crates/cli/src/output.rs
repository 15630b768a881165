use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use termgeom::io::fmt_sig;

use crate::profile::ResolvedTolerances;
use crate::{Cli, Failure};

/// Output directory plus the list of files written to it.
pub struct OutDir {
    root: PathBuf,
    written: Vec<String>,
}

fn io_failure(path: &Path, e: impl std::fmt::Display) -> Failure {
    Failure::input(format!("{}: {e}", path.display()))
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, Failure> {
        fs::create_dir_all(root).map_err(|e| io_failure(root, e))?;
        Ok(Self {
            root: root.to_path_buf(),
            written: Vec::new(),
        })
    }

    fn open(&mut self, name: &str) -> Result<BufWriter<File>, Failure> {
        let path = self.root.join(name);
        let f = File::create(&path).map_err(|e| io_failure(&path, e))?;
        self.written.push(name.to_string());
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), Failure> {
        let mut w = self.open(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(|e| Failure::input(e.to_string()))?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(|e| io_failure(&self.root.join(name), e))
    }

    /// Writes a CSV of numbers, each with 12 significant digits.
    pub fn csv<I, R>(&mut self, name: &str, header: &[String], rows: I) -> Result<(), Failure>
    where
        I: IntoIterator<Item = R>,
        R: AsRef<[f64]>,
    {
        let w = self.open(name)?;
        let mut c = csv::Writer::from_writer(w);
        let fail = |e: csv::Error| Failure::input(format!("{name}: {e}"));
        c.write_record(header).map_err(fail)?;
        for row in rows {
            c.write_record(row.as_ref().iter().map(|v| fmt_sig(*v)))
                .map_err(fail)?;
        }
        c.flush().map_err(|e| io_failure(&self.root.join(name), e))
    }

    /// Writes through a callback that takes the raw file.
    pub fn with_file(
        &mut self,
        name: &str,
        f: impl FnOnce(&mut BufWriter<File>) -> termgeom::Result<()>,
    ) -> Result<(), Failure> {
        let mut w = self.open(name)?;
        f(&mut w)?;
        w.flush().map_err(|e| io_failure(&self.root.join(name), e))
    }

    /// Writes `manifest.json` last, listing every other output.
    pub fn finish<C: Serialize>(
        mut self,
        cli: &Cli,
        tolerances: &ResolvedTolerances,
        resolved: &C,
    ) -> Result<(), Failure> {
        let outputs = std::mem::take(&mut self.written);
        let manifest = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            arguments: cli,
            tolerances,
            resolved,
            outputs,
        };
        self.json("manifest.json", &manifest)
    }
}

#[derive(Serialize)]
struct Manifest<'a, C: Serialize> {
    tool: &'static str,
    version: &'static str,
    arguments: &'a Cli,
    tolerances: &'a ResolvedTolerances,
    resolved: &'a C,
    outputs: Vec<String>,
}

pub fn header(names: &[&str]) -> Vec<String> {
    names.iter().map(|s| s.to_string()).collect()
}
