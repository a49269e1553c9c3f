//! CSV and JSON result files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::engine::SweepResult;
use crate::error::{Error, Result};

pub const CSV_HEADER: &str = "snr_db,frames,bit_errors,ber_sim,ber_theory,ber_lower,mean_sinr_db";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            _ => Err(Error::Config(format!("unknown output format `{s}`"))),
        }
    }
}

/// One CSV line. Missing values are written as empty fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub snr_db: f64,
    pub frames: u64,
    pub bit_errors: u64,
    pub ber_sim: Option<f64>,
    pub ber_theory: Option<f64>,
    pub ber_lower: Option<f64>,
    pub mean_sinr_db: Option<f64>,
}

fn ser(e: impl std::fmt::Display) -> Error {
    Error::Serialize(e.to_string())
}

/// Rows only: the file carries no timing, so equal runs give equal bytes.
pub fn write_csv<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in &result.rows {
        w.serialize(CsvRow {
            snr_db: r.snr_db,
            frames: r.frames,
            bit_errors: r.bit_errors,
            ber_sim: r.ber_sim,
            ber_theory: r.ber_theory,
            ber_lower: r.ber_lower,
            mean_sinr_db: r.mean_sinr_db,
        })
        .map_err(ser)?;
    }
    if result.rows.is_empty() {
        w.write_record(CSV_HEADER.split(',')).map_err(ser)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<CsvRow>> {
    csv::Reader::from_reader(input).deserialize().map(|r| r.map_err(ser)).collect()
}

/// Rows plus metadata (configuration echo, seed, version, wall times).
pub fn write_json<W: Write>(result: &SweepResult, out: W) -> Result<()> {
    let mut w = BufWriter::new(out);
    serde_json::to_writer_pretty(&mut w, result).map_err(ser)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn emit_results(result: &SweepResult, format: OutputFormat, path: &Path) -> Result<()> {
    let file = File::create(path)?;
    match format {
        OutputFormat::Csv => write_csv(result, file),
        OutputFormat::Json => write_json(result, file),
    }
}
