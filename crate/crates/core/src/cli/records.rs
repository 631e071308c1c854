//! CSV and JSON emitters for experiment records.
//!
//! CSV reals carry 17 significant digits, so every binary64 value reads back
//! exactly. JSON has no NaN; failed-trial metrics become `null` there.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{ConvergenceAggregate, ConvergenceRecord, ExperimentRecord};
use crate::model::Link;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Fixed-point when the decimal exponent lies in `[-5, 16]`, scientific
/// otherwise. `1/3` renders as `0.33333333333333331`.
pub fn format_real(v: f64) -> String {
    if v.is_nan() {
        return "NaN".into();
    }
    if v.is_infinite() {
        return if v > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let sci = format!("{v:.16e}");
    let exp: i32 = sci[sci.find('e').expect("exponent") + 1..]
        .parse()
        .expect("integer exponent");
    if (-5..17).contains(&exp) {
        format!("{:.*}", (16 - exp) as usize, v)
    } else {
        sci
    }
}

/// A row type with a fixed CSV column order.
pub trait Record: Serialize + Sized {
    const HEADER: &'static [&'static str];
    fn csv_fields(&self) -> Vec<String>;
    fn from_csv_fields(fields: &csv::StringRecord) -> Result<Self>;
}

fn field<T: std::str::FromStr>(fields: &csv::StringRecord, k: usize, name: &str) -> Result<T> {
    let raw = fields
        .get(k)
        .ok_or_else(|| Error::InvalidInput(format!("missing column {name}")))?;
    raw.parse()
        .map_err(|_| Error::InvalidInput(format!("bad value `{raw}` in column {name}")))
}

fn link_field(fields: &csv::StringRecord, k: usize) -> Result<Link> {
    fields
        .get(k)
        .ok_or_else(|| Error::InvalidInput("missing column link".into()))?
        .parse()
}

impl Record for ExperimentRecord {
    const HEADER: &'static [&'static str] = &[
        "trial",
        "link",
        "p",
        "s",
        "n",
        "inv_snr",
        "cosine_error",
        "dist",
        "iterations",
        "support_ok_all_iters",
        "seed",
    ];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.trial.to_string(),
            self.link.name(),
            self.p.to_string(),
            self.s.to_string(),
            self.n.to_string(),
            format_real(self.inv_snr),
            format_real(self.cosine_error),
            format_real(self.dist),
            self.iterations.to_string(),
            self.support_ok_all_iters.to_string(),
            self.seed.to_string(),
        ]
    }

    fn from_csv_fields(f: &csv::StringRecord) -> Result<Self> {
        Ok(Self {
            trial: field(f, 0, "trial")?,
            link: link_field(f, 1)?,
            p: field(f, 2, "p")?,
            s: field(f, 3, "s")?,
            n: field(f, 4, "n")?,
            inv_snr: field(f, 5, "inv_snr")?,
            cosine_error: field(f, 6, "cosine_error")?,
            dist: field(f, 7, "dist")?,
            iterations: field(f, 8, "iterations")?,
            support_ok_all_iters: field(f, 9, "support_ok_all_iters")?,
            seed: field(f, 10, "seed")?,
            error: None,
        })
    }
}

impl Record for ConvergenceRecord {
    const HEADER: &'static [&'static str] = &["trial", "link", "t", "err_t", "log_gap"];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.trial.to_string(),
            self.link.name(),
            self.t.to_string(),
            format_real(self.err_t),
            format_real(self.log_gap),
        ]
    }

    fn from_csv_fields(f: &csv::StringRecord) -> Result<Self> {
        Ok(Self {
            trial: field(f, 0, "trial")?,
            link: link_field(f, 1)?,
            t: field(f, 2, "t")?,
            err_t: field(f, 3, "err_t")?,
            log_gap: field(f, 4, "log_gap")?,
        })
    }
}

impl Record for ConvergenceAggregate {
    const HEADER: &'static [&'static str] = &["link", "t", "mean", "stderr", "count"];

    fn csv_fields(&self) -> Vec<String> {
        vec![
            self.link.name(),
            self.t.to_string(),
            format_real(self.mean),
            format_real(self.stderr),
            self.count.to_string(),
        ]
    }

    fn from_csv_fields(f: &csv::StringRecord) -> Result<Self> {
        Ok(Self {
            link: link_field(f, 0)?,
            t: field(f, 1, "t")?,
            mean: field(f, 2, "mean")?,
            stderr: field(f, 3, "stderr")?,
            count: field(f, 4, "count")?,
        })
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub fn write_records_to<R: Record, W: Write>(records: &[R], mut out: W, format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(R::HEADER).map_err(csv_err)?;
            for r in records {
                w.write_record(r.csv_fields()).map_err(csv_err)?;
            }
            w.flush()?;
        }
        Format::Json => {
            serde_json::to_writer_pretty(&mut out, records).map_err(|e| Error::Io(e.to_string()))?;
            out.write_all(b"\n")?;
            out.flush()?;
        }
    }
    Ok(())
}

pub fn write_records<R: Record>(records: &[R], path: impl AsRef<Path>, format: Format) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    write_records_to(records, std::io::BufWriter::new(file), format)
}

/// Reads CSV written by [`write_records_to`]; the header must match exactly.
pub fn read_csv_records<R: Record, I: Read>(input: I) -> Result<Vec<R>> {
    let mut rdr = csv::Reader::from_reader(input);
    let header = rdr.headers().map_err(csv_err)?.clone();
    if header.iter().ne(R::HEADER.iter().copied()) {
        return Err(Error::InvalidInput(format!(
            "header {:?} does not match {:?}",
            header.iter().collect::<Vec<_>>(),
            R::HEADER
        )));
    }
    rdr.records()
        .map(|row| R::from_csv_fields(&row.map_err(csv_err)?))
        .collect()
}

pub fn read_records<R: Record + for<'de> Deserialize<'de>>(path: impl AsRef<Path>, format: Format) -> Result<Vec<R>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    match format {
        Format::Csv => read_csv_records(file),
        Format::Json => serde_json::from_reader(std::io::BufReader::new(file))
            .map_err(|e| Error::InvalidInput(e.to_string())),
    }
}
