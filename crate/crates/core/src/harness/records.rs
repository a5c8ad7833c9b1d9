//! JSON-lines result files.
//!
//! Line 1 is a header, every further line one [`ResultRecord`]. Floats are
//! written with 17 significant digits so that reading a file back gives the
//! same bits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::config::RunConfig;
use crate::error::{GmcError, Result};
use crate::toy_model::VarianceSplit;

pub const FORMAT_TAG: &str = "gmclab-results";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsHeader {
    pub format: String,
    pub version: String,
    pub config: Option<RunConfig>,
}

impl ResultsHeader {
    pub fn new(config: Option<RunConfig>) -> Self {
        ResultsHeader {
            format: FORMAT_TAG.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            config,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRecord {
    pub replica_index: u64,
    pub seed: u64,
    pub payload: Payload,
    pub wall_time_ms: u64,
}

/// Per-replica output of each experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Decay {
        total_mass: f64,
        /// `(n, c_n)` at the configured frequencies.
        coefficients: Vec<(u64, Complex64)>,
        /// `max |c_n| n^β` over each dyadic block.
        block_maxima: Vec<f64>,
        /// `max |c_n|` over each dyadic block.
        block_maxima_plain: Vec<f64>,
    },
    FourthMoment {
        coefficients: Vec<(u64, Complex64)>,
    },
    LimitLaw {
        coefficient: Complex64,
        rescaled: Complex64,
        /// Mass of the independent `M_{2γ}` replica.
        reference_mass: f64,
        reference: Complex64,
    },
    Capacity {
        total_mass: f64,
        riesz_energy: f64,
        capacity_sum: f64,
    },
    Convolve {
        /// `‖f_{K_{i+1}} − f_{K_i}‖_1` for consecutive Fejér cutoffs.
        l1_differences: Vec<f64>,
        min_density: f64,
        max_density: f64,
    },
    ToyModel {
        z_n: Complex64,
        projection: Complex64,
        split: VarianceSplit,
    },
    Kappa {
        value: f64,
    },
}

/// Serde formatter that writes every float as `{:.16e}` (17 significant digits).
#[derive(Debug, Clone, Copy, Default)]
pub struct SignificantDigits;

impl serde_json::ser::Formatter for SignificantDigits {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        write!(writer, "{:.16e}", value as f64)
    }
}

/// Serialises `value` as compact JSON with 17-digit floats.
pub fn to_json_line<T: Serialize>(value: &T, out: &mut impl Write) -> Result<()> {
    let mut ser = serde_json::Serializer::with_formatter(&mut *out, SignificantDigits);
    value
        .serialize(&mut ser)
        .map_err(|e| GmcError::Io(io::Error::other(e)))?;
    Ok(())
}

pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut buf = Vec::new();
    to_json_line(value, &mut buf)?;
    Ok(String::from_utf8(buf).expect("serde_json writes UTF-8"))
}

/// Streams records into a results file; each record is flushed as written.
pub struct RecordWriter<W: Write> {
    out: W,
}

impl RecordWriter<BufWriter<File>> {
    pub fn create(path: &Path, header: &ResultsHeader) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        Self::new(BufWriter::new(File::create(path)?), header)
    }
}

impl<W: Write> RecordWriter<W> {
    pub fn new(mut out: W, header: &ResultsHeader) -> Result<Self> {
        to_json_line(header, &mut out)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(RecordWriter { out })
    }

    pub fn write(&mut self, record: &ResultRecord) -> Result<()> {
        to_json_line(record, &mut self.out)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

pub fn write_results(path: &Path, header: &ResultsHeader, records: &[ResultRecord]) -> Result<()> {
    let mut w = RecordWriter::create(path, header)?;
    for r in records {
        w.write(r)?;
    }
    Ok(())
}

/// Reads a results file; malformed lines are reported with their number.
pub fn read_results(path: &Path) -> Result<(ResultsHeader, Vec<ResultRecord>)> {
    read_results_from(BufReader::new(File::open(path)?))
}

pub fn read_results_from(input: impl BufRead) -> Result<(ResultsHeader, Vec<ResultRecord>)> {
    let mut lines = input.lines();
    let first = lines.next().ok_or(GmcError::Malformed {
        line: 1,
        message: "missing header".into(),
    })??;
    let header: ResultsHeader = serde_json::from_str(&first).map_err(|e| GmcError::Malformed {
        line: 1,
        message: format!("bad header: {e}"),
    })?;
    if header.format != FORMAT_TAG {
        return Err(GmcError::Malformed {
            line: 1,
            message: format!("not a results file (format `{}`)", header.format),
        });
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line).map_err(|e| GmcError::Malformed {
            line: i + 2,
            message: e.to_string(),
        })?;
        records.push(rec);
    }
    Ok((header, records))
}
