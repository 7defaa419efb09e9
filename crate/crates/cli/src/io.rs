//! CSV and JSON input/output with atomic file replacement.

use std::fs::File;
use std::io::{self, BufReader, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::Formatter;
use tempfile::NamedTempFile;
use truncreg::{Dataset, DenseMatrix};

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// or to stdout when `path` is `None`.
pub fn write_output(path: Option<&Path>, bytes: &[u8]) -> io::Result<()> {
    match path {
        None => {
            let mut out = io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()
        }
        Some(p) => {
            let dir = match p.parent() {
                Some(d) if !d.as_os_str().is_empty() => d,
                _ => Path::new("."),
            };
            let mut tmp = NamedTempFile::new_in(dir)?;
            tmp.write_all(bytes)?;
            tmp.as_file().sync_all()?;
            tmp.persist(p).map_err(|e| e.error)?;
            Ok(())
        }
    }
}

/// Compact JSON with every float written as `d.dddddddddddddddde±x`
/// (17 significant digits). Non-finite floats become `null`.
struct SciFloats;

impl Formatter for SciFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, f64::from(value))
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, SciFloats);
    value.serialize(&mut ser).expect("serializing to memory cannot fail");
    buf.push(b'\n');
    buf
}

#[derive(Debug)]
pub enum CsvError {
    Io(io::Error),
    Format(String),
}

impl std::fmt::Display for CsvError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CsvError::Io(e) => write!(f, "{e}"),
            CsvError::Format(m) => write!(f, "{m}"),
        }
    }
}

/// `x1,…,xk,y` followed by one row per sample. Floats use Rust's shortest
/// round-trip formatting, so reading the file back is exact.
pub fn dataset_to_csv(data: &Dataset) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let k = data.dim();
    let mut header: Vec<String> = (1..=k).map(|i| format!("x{i}")).collect();
    header.push("y".into());
    w.write_record(&header).expect("in-memory write");
    for s in data.iter() {
        let row: Vec<String> = s.x.iter().chain(std::iter::once(&s.y)).map(|v| v.to_string()).collect();
        w.write_record(&row).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

pub fn read_dataset(path: &Path) -> Result<Dataset, CsvError> {
    let file = File::open(path).map_err(CsvError::Io)?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let header = r.headers().map_err(|e| CsvError::Format(e.to_string()))?.clone();
    let cols = header.len();
    if cols < 2 {
        return Err(CsvError::Format("header must be x1,...,xk,y with k >= 1".into()));
    }
    for (i, name) in header.iter().enumerate() {
        let expected = if i + 1 == cols { "y".to_string() } else { format!("x{}", i + 1) };
        if name.trim() != expected {
            return Err(CsvError::Format(format!("header column {} is {name:?}, expected {expected:?}", i + 1)));
        }
    }
    let k = cols - 1;
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| CsvError::Format(e.to_string()))?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|_| CsvError::Format(format!("row {}: {field:?} is not a number", line + 1)))?;
            if !v.is_finite() {
                return Err(CsvError::Format(format!("row {}: non-finite value {field:?}", line + 1)));
            }
            if j < k {
                xs.push(v);
            } else {
                ys.push(v);
            }
        }
    }
    let n = ys.len();
    Dataset::new(DenseMatrix::from_row_major(n, k, xs), ys).map_err(|e| CsvError::Format(e.to_string()))
}

/// Writes a table with a header row.
pub fn table_to_csv(header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}
