use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{ExperimentError, TrialRecord};
use crate::behavior::{BlockOrder, InformationAccess};
use crate::game::{Location, Proportion};
use crate::signal::VisType;

pub const CSV_HEADER: [&str; 10] = [
    "participant_id",
    "vis_type",
    "access",
    "block_order",
    "trial_index",
    "signal_prop",
    "choice",
    "prob_estimate",
    "payoff",
    "strategy_text",
];
const CHECKS_COLUMN: &str = "passed_checks";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestOptions {
    /// Drop rows whose `passed_checks` column is false. Files without the
    /// column keep every row.
    pub require_passed_checks: bool,
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes records in the canonical column order with LF line endings. The
/// `passed_checks` column is appended only when some record carries it.
pub fn write_records<W: Write>(writer: W, records: &[TrialRecord]) -> Result<(), ExperimentError> {
    let with_checks = records.iter().any(|r| r.passed_checks.is_some());
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(writer);
    let mut header: Vec<&str> = CSV_HEADER.to_vec();
    if with_checks {
        header.push(CHECKS_COLUMN);
    }
    w.write_record(&header)?;
    for r in records {
        let block_order = r.block_order.as_str();
        let access = r.access.as_str();
        let mut row = vec![
            r.participant_id.to_string(),
            r.vis_type.as_str().to_string(),
            access.to_string(),
            block_order.to_string(),
            r.trial_index.to_string(),
            opt_f64(r.signal_prop.map(Proportion::value)),
            match r.choice {
                Location::A => "A".to_string(),
                Location::B => "B".to_string(),
            },
            r.prob_estimate.to_string(),
            opt_f64(r.payoff),
            r.strategy_text.clone().unwrap_or_default(),
        ];
        if with_checks {
            row.push(r.passed_checks.map(|b| b.to_string()).unwrap_or_default());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_records_csv(path: &Path, records: &[TrialRecord]) -> Result<(), ExperimentError> {
    write_records(File::create(path)?, records)
}

struct Row<'a> {
    record: &'a csv::StringRecord,
    columns: &'a [usize],
    row: usize,
}

impl Row<'_> {
    fn raw(&self, col: usize) -> &str {
        self.record.get(self.columns[col]).unwrap_or("").trim()
    }

    fn err(&self, col: usize, message: impl Into<String>) -> ExperimentError {
        let column = if col < CSV_HEADER.len() { CSV_HEADER[col] } else { CHECKS_COLUMN };
        ExperimentError::Parse { row: self.row, column: column.to_string(), message: message.into() }
    }

    fn parse<T: std::str::FromStr>(&self, col: usize) -> Result<T, ExperimentError> {
        let s = self.raw(col);
        s.parse().map_err(|_| self.err(col, format!("cannot parse `{s}`")))
    }

    fn parse_opt_f64(&self, col: usize) -> Result<Option<f64>, ExperimentError> {
        if self.raw(col).is_empty() {
            return Ok(None);
        }
        let v: f64 = self.parse(col)?;
        if !v.is_finite() {
            return Err(self.err(col, "value must be finite"));
        }
        Ok(Some(v))
    }
}

fn parse_row(row: &Row<'_>, has_checks: bool) -> Result<TrialRecord, ExperimentError> {
    let vis_type = match row.raw(1) {
        "bar" => VisType::Bar,
        "hops" => VisType::Hops,
        other => return Err(row.err(1, format!("expected `bar` or `hops`, got `{other}`"))),
    };
    let access = match row.raw(2) {
        "private" => InformationAccess::Private,
        "public" => InformationAccess::Public,
        other => return Err(row.err(2, format!("expected `private` or `public`, got `{other}`"))),
    };
    let block_order = match row.raw(3) {
        "public_first" => BlockOrder::PublicFirst,
        "private_first" => BlockOrder::PrivateFirst,
        other => return Err(row.err(3, format!("expected `public_first` or `private_first`, got `{other}`"))),
    };
    let signal_prop = match row.parse_opt_f64(5)? {
        None => None,
        Some(p) => Some(Proportion::new(p).map_err(|_| row.err(5, format!("{p} is outside [0, 1]")))?),
    };
    let choice = match row.raw(6) {
        "A" => Location::A,
        "B" => Location::B,
        other => return Err(row.err(6, format!("expected `A` or `B`, got `{other}`"))),
    };
    let prob_estimate: f64 = row.parse(7)?;
    if !(0.0..=100.0).contains(&prob_estimate) {
        return Err(row.err(7, format!("{prob_estimate} is outside [0, 100]")));
    }
    let text = row.record.get(row.columns[9]).unwrap_or("");
    let passed_checks = if has_checks {
        match row.raw(10).to_ascii_lowercase().as_str() {
            "" => None,
            "true" | "1" => Some(true),
            "false" | "0" => Some(false),
            other => return Err(row.err(10, format!("expected a boolean, got `{other}`"))),
        }
    } else {
        None
    };
    Ok(TrialRecord {
        participant_id: row.parse(0)?,
        vis_type,
        access,
        block_order,
        trial_index: row.parse(4)?,
        signal_prop,
        choice,
        prob_estimate,
        payoff: row.parse_opt_f64(8)?,
        strategy_text: (!text.is_empty()).then(|| text.to_string()),
        passed_checks,
    })
}

/// Parses and validates trial records. Columns are matched by name, so extra
/// columns and any column order are accepted.
pub fn read_records<R: Read>(reader: R, opts: IngestOptions) -> Result<Vec<TrialRecord>, ExperimentError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).flexible(false).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let find = |name: &str| headers.iter().position(|h| h.trim() == name);
    let missing: Vec<String> = CSV_HEADER.iter().filter(|h| find(h).is_none()).map(|h| h.to_string()).collect();
    if !missing.is_empty() {
        return Err(ExperimentError::Schema { missing });
    }
    let mut columns: Vec<usize> = CSV_HEADER.iter().map(|h| find(h).expect("checked above")).collect();
    let checks = find(CHECKS_COLUMN);
    if let Some(c) = checks {
        columns.push(c);
    }
    let mut out = Vec::new();
    for (i, result) in rdr.records().enumerate() {
        let record = result?;
        let rec = parse_row(&Row { record: &record, columns: &columns, row: i + 1 }, checks.is_some())?;
        if opts.require_passed_checks && rec.passed_checks == Some(false) {
            continue;
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn ingest_csv(path: &Path, opts: IngestOptions) -> Result<Vec<TrialRecord>, ExperimentError> {
    read_records(File::open(path)?, opts)
}
