//! CSV and manifest writers. Reals are written with 17 significant digits,
//! lines end in `\n`, and nothing time- or host-dependent is recorded, so
//! equal inputs give byte-identical files.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use csv::{Terminator, Writer, WriterBuilder};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OutputError {
    #[error("cannot write {path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("cannot write {path}: {source}")]
    Csv { path: String, source: csv::Error },
}

/// `{:.16e}` for finite values, `inf`, `-inf` or `nan` otherwise.
pub fn real(v: f64) -> String {
    if v == 0.0 {
        "0.0000000000000000e0".into()
    } else if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

pub fn flag(b: bool) -> &'static str {
    if b {
        "true"
    } else {
        "false"
    }
}

/// Row-at-a-time CSV file with a mandatory header.
pub struct Table {
    path: PathBuf,
    writer: Writer<fs::File>,
}

impl Table {
    pub fn create(dir: &Path, name: &str, header: &[&str]) -> Result<Self, OutputError> {
        let path = dir.join(name);
        let writer = WriterBuilder::new()
            .terminator(Terminator::Any(b'\n'))
            .from_path(&path)
            .map_err(|source| OutputError::Csv { path: path.display().to_string(), source })?;
        let mut table = Self { path, writer };
        table.row(header.iter().copied())?;
        Ok(table)
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), OutputError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(|source| self.csv_err(source))
    }

    pub fn finish(mut self) -> Result<PathBuf, OutputError> {
        self.writer.flush().map_err(|source| OutputError::Io { path: self.path.display().to_string(), source })?;
        Ok(self.path)
    }

    fn csv_err(&self, source: csv::Error) -> OutputError {
        OutputError::Csv { path: self.path.display().to_string(), source }
    }
}

pub fn ensure_dir(dir: &Path) -> Result<(), OutputError> {
    fs::create_dir_all(dir).map_err(|source| OutputError::Io { path: dir.display().to_string(), source })
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<PathBuf, OutputError> {
    let path = dir.join(name);
    fs::write(&path, text).map_err(|source| OutputError::Io { path: path.display().to_string(), source })?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_keep_seventeen_digits() {
        assert_eq!(real(1.0), "1.0000000000000000e0");
        assert_eq!(real(0.1), "1.0000000000000001e-1");
        assert_eq!(real(f64::NAN), "nan");
        assert_eq!(real(-0.0), "0.0000000000000000e0");
        assert_eq!(real(f64::NEG_INFINITY), "-inf");
        let x = std::f64::consts::SQRT_2;
        assert_eq!(real(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn tables_use_lf() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::create(dir.path(), "t.csv", &["a", "b"]).unwrap();
        t.row([real(1.5), "x,y".to_string()]).unwrap();
        let path = t.finish().unwrap();
        let text = fs::read_to_string(path).unwrap();
        assert_eq!(text, "a,b\n1.5000000000000000e0,\"x,y\"\n");
    }
}
