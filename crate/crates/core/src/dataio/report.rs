use std::io::{self, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};

use super::matrix::format_f64;
use crate::error::{Error, Result};
use crate::evaluation::{EvaluationReport, FoldOutcome, Metric};

/// Pretty JSON with every float written with 17 significant digits.
struct ExactFloats<'a>(PrettyFormatter<'a>);

impl Formatter for ExactFloats<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        write!(writer, "{value:.16e}")
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

pub fn report_to_string<T: Serialize>(report: &T) -> Result<String> {
    let mut buf = Vec::new();
    let mut ser =
        serde_json::Serializer::with_formatter(&mut buf, ExactFloats(PrettyFormatter::new()));
    report.serialize(&mut ser)?;
    buf.push(b'\n');
    Ok(String::from_utf8(buf).expect("JSON is UTF-8"))
}

/// Writes the report as JSON; refuses to replace an existing file unless
/// `overwrite` is set.
pub fn export_report(report: &EvaluationReport, path: &Path, overwrite: bool) -> Result<()> {
    if path.exists() && !overwrite {
        return Err(Error::FileExists(path.to_path_buf()));
    }
    std::fs::write(path, report_to_string(report)?)?;
    Ok(())
}

pub fn read_report(path: &Path) -> Result<EvaluationReport> {
    if !path.is_file() {
        return Err(Error::FileNotFound {
            path: path.to_path_buf(),
            subject: "-".into(),
        });
    }
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

/// One CSV row per (repetition, fold, strategy) with the five metrics.
pub fn write_fold_dump(folds: &[FoldOutcome], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec![
        "repetition".to_string(),
        "fold".to_string(),
        "strategy".to_string(),
    ];
    header.extend(Metric::ALL.iter().map(|m| m.to_string()));
    w.write_record(&header)?;
    for f in folds {
        for (strategy, m) in &f.metrics {
            let mut rec = vec![
                f.repetition.to_string(),
                f.fold.to_string(),
                strategy.to_string(),
            ];
            rec.extend(Metric::ALL.iter().map(|&metric| format_f64(m.get(metric))));
            w.write_record(&rec)?;
        }
    }
    w.flush()?;
    Ok(())
}
