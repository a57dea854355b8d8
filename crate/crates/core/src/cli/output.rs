use std::fs::File;
use std::io::{self, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p)?),
        None => Box::new(io::stdout().lock()),
    })
}

/// Rows as CSV (header always written) or as a JSON array.
pub fn write_rows<T: Serialize>(rows: &[T], headers: &[&str], format: Format, path: Option<&Path>) -> io::Result<()> {
    let mut out = sink(path)?;
    match format {
        Format::Csv => {
            let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(&mut out);
            w.write_record(headers)?;
            for row in rows {
                w.serialize(row)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, rows)?;
            writeln!(out)?;
        }
    }
    out.flush()
}

/// A single JSON document.
pub fn write_json<T: Serialize>(doc: &T, path: Option<&Path>) -> io::Result<()> {
    let mut out = sink(path)?;
    serde_json::to_writer_pretty(&mut out, doc)?;
    writeln!(out)?;
    out.flush()
}
