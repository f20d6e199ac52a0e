use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use super::{CliError, CliResult};

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn open_input(path: &Path) -> CliResult<File> {
    File::open(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| CliError::Input(format!("cannot create {}: {e}", dir.display())))
}

pub fn create(dir: &Path, name: &str) -> CliResult<BufWriter<File>> {
    let path = dir.join(name);
    File::create(&path).map(BufWriter::new).map_err(|e| CliError::Input(format!("cannot write {}: {e}", path.display())))
}

fn io_err(dir: &Path, name: &str, e: impl std::fmt::Display) -> CliError {
    CliError::Input(format!("cannot write {}: {e}", dir.join(name).display()))
}

pub fn write_json<T: Serialize + ?Sized>(dir: &Path, name: &str, value: &T) -> CliResult<()> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(dir, name, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(dir, name, e))
}

pub fn write_csv(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(create(dir, name)?);
    w.write_record(header).map_err(|e| io_err(dir, name, e))?;
    for row in rows {
        w.write_record(row).map_err(|e| io_err(dir, name, e))?;
    }
    w.flush().map_err(|e| io_err(dir, name, e))
}

/// Runs a library writer against `dir/name`.
pub fn write_with<F>(dir: &Path, name: &str, f: F) -> CliResult<()>
where
    F: FnOnce(BufWriter<File>) -> Result<(), crate::io::FormatError>,
{
    f(create(dir, name)?).map_err(|e| io_err(dir, name, e))
}

/// Exact zeros become the integer `0`.
pub fn json_num(x: f64) -> Value {
    if x == 0.0 {
        Value::from(0)
    } else {
        Value::from(x)
    }
}

pub fn json_vec(v: &DVector<f64>) -> Value {
    Value::Array(v.iter().map(|&x| json_num(x)).collect())
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config: Value,
    pub seeds: Value,
}

impl<'a> Manifest<'a> {
    pub fn new<C: Serialize>(command: &'a str, config: &C, seeds: Value) -> CliResult<Self> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Input(e.to_string()))?;
        Ok(Self { tool: env!("CARGO_PKG_NAME"), version: env!("CARGO_PKG_VERSION"), command, config, seeds })
    }

    pub fn write(&self, dir: &Path) -> CliResult<()> {
        write_json(dir, "manifest.json", self)
    }
}
