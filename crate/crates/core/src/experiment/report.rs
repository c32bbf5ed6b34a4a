use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::spec::Method;
use super::sweep::{MetricsRecord, SummaryRecord};
use crate::error::{Error, Result};

pub const RESULTS_HEADER: &str =
    "method,noise,split,lambda,train_acc,test_acc,train_f1,test_f1,seconds";
pub const SUMMARY_HEADER: &str = "method,noise,splits,train_acc,test_acc,train_f1,test_f1";

fn opt(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.6}")).unwrap_or_default()
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn write_results_csv(records: &[MetricsRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{RESULTS_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{:.6},{},{:.6},{:.6},{:.6},{},{},{:.6}",
            r.method,
            r.noise,
            r.split,
            r.lambda,
            r.train_accuracy,
            r.test_accuracy,
            opt(r.train_f1),
            opt(r.test_f1),
            r.wall_time_seconds
        )?;
    }
    out.flush()?;
    Ok(())
}

/// One row per record, 6-decimal fixed point; missing F1 is an empty field.
pub fn emit_results_csv(records: &[MetricsRecord], path: impl AsRef<Path>) -> Result<()> {
    write_results_csv(records, create(path.as_ref())?)
}

/// Parses text written by [`write_results_csv`]. Fields the CSV does not
/// carry (validation accuracy, failure reason, label reads) come back empty.
pub fn parse_results_csv(text: &str) -> Result<Vec<MetricsRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, header)) if header == RESULTS_HEADER => {}
        _ => return Err(row_err(1, "missing results header")),
    }
    lines
        .filter(|(_, l)| !l.is_empty())
        .map(|(idx, line)| {
            let line_no = idx + 1;
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(row_err(line_no, format!("expected 9 fields, got {}", fields.len())));
            }
            let num = |i: usize| -> Result<f64> {
                fields[i]
                    .parse()
                    .map_err(|_| row_err(line_no, format!("bad number {:?}", fields[i])))
            };
            let opt_num = |i: usize| -> Result<Option<f64>> {
                if fields[i].is_empty() {
                    Ok(None)
                } else {
                    num(i).map(Some)
                }
            };
            let method: Method = fields[0].parse().map_err(|e: Error| row_err(line_no, e.to_string()))?;
            let split = fields[2]
                .parse()
                .map_err(|_| row_err(line_no, format!("bad split {:?}", fields[2])))?;
            let test_accuracy = num(5)?;
            Ok(MetricsRecord {
                method,
                noise: num(1)?,
                split,
                lambda: num(3)?,
                train_accuracy: num(4)?,
                test_accuracy,
                train_f1: opt_num(6)?,
                test_f1: opt_num(7)?,
                validation_accuracy: None,
                wall_time_seconds: num(8)?,
                failure: test_accuracy.is_nan().then(|| "failed".to_string()),
                eval_label_reads: 0,
            })
        })
        .collect()
}

fn row_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        source_name: "results csv".into(),
        line,
        message: message.into(),
    }
}

pub fn write_summary_csv(summaries: &[SummaryRecord], mut out: impl Write) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    for s in summaries {
        writeln!(
            out,
            "{},{:.6},{},{:.6},{:.6},{},{}",
            s.method,
            s.noise,
            s.splits,
            s.train_accuracy,
            s.test_accuracy,
            opt(s.train_f1),
            opt(s.test_f1)
        )?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_summary_csv(summaries: &[SummaryRecord], path: impl AsRef<Path>) -> Result<()> {
    write_summary_csv(summaries, create(path.as_ref())?)
}

/// `step,loss`; step 0 is the loss at the initial parameters.
pub fn emit_loss_history_csv(history: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    writeln!(out, "step,loss")?;
    for (step, loss) in history.iter().enumerate() {
        writeln!(out, "{step},{loss}")?;
    }
    out.flush()?;
    Ok(())
}

/// `alpha,loss`.
pub fn emit_cross_section_csv(points: &[(f64, f64)], path: impl AsRef<Path>) -> Result<()> {
    let mut out = create(path.as_ref())?;
    writeln!(out, "alpha,loss")?;
    for (alpha, loss) in points {
        writeln!(out, "{alpha:.6},{loss}")?;
    }
    out.flush()?;
    Ok(())
}
