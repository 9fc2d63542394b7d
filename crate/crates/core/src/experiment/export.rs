use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use super::analysis::Analysis;
use super::types::CellSummary;
use super::ExperimentError;
use crate::behavior::InformationAccess;
use crate::signal::VisType;
use crate::stats::RegressionFit;

const CELL_COLUMNS: [&str; 7] = ["vis_type", "access", "signal_prop", "proportion_a", "ci_lo", "ci_hi", "n"];
const COEF_COLUMNS: [&str; 4] = ["model", "term", "estimate", "std_error"];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportPaths {
    pub cells: PathBuf,
    pub coefficients: PathBuf,
    pub bundle: PathBuf,
}

fn writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>, ExperimentError> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(BufWriter::new(File::create(path)?)))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        v.to_string()
    }
}

/// Writes `cells.csv` (one row per cell), `coefficients.csv` (one row per
/// model term) and `analysis.json` into `dir`.
pub fn export_plot_data(analysis: &Analysis, dir: &Path) -> Result<ExportPaths, ExperimentError> {
    fs::create_dir_all(dir)?;
    let paths = ExportPaths {
        cells: dir.join("cells.csv"),
        coefficients: dir.join("coefficients.csv"),
        bundle: dir.join("analysis.json"),
    };

    let mut w = writer(&paths.cells)?;
    w.write_record(CELL_COLUMNS)?;
    for c in &analysis.cells {
        w.write_record([
            c.vis_type.as_str().to_string(),
            c.access.as_str().to_string(),
            c.signal_prop.map(|p| p.to_string()).unwrap_or_default(),
            fmt(c.proportion_a),
            fmt(c.ci_lo),
            fmt(c.ci_hi),
            c.n.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = writer(&paths.coefficients)?;
    w.write_record(COEF_COLUMNS)?;
    let fits: [(&str, Option<&RegressionFit>); 3] =
        [("eq3", analysis.eq3.as_ref()), ("eq4", Some(&analysis.eq4)), ("eq5", Some(&analysis.eq5))];
    for (model, fit) in fits.into_iter().filter_map(|(m, f)| f.map(|f| (m, f))) {
        for (i, term) in fit.names.iter().enumerate() {
            w.write_record([model, term, &fmt(fit.coefficients[i]), &fmt(fit.standard_errors[i])])?;
        }
    }
    w.flush()?;

    let mut f = BufWriter::new(File::create(&paths.bundle)?);
    serde_json::to_writer_pretty(&mut f, analysis)?;
    f.write_all(b"\n")?;
    f.flush()?;
    Ok(paths)
}

/// Reads back a `cells.csv` written by [`export_plot_data`].
pub fn read_summary_csv(path: &Path) -> Result<Vec<CellSummary>, ExperimentError> {
    let mut rdr = csv::Reader::from_path(path)?;
    let headers = rdr.headers()?.clone();
    let missing: Vec<String> =
        CELL_COLUMNS.iter().filter(|c| !headers.iter().any(|h| h == **c)).map(|c| c.to_string()).collect();
    if !missing.is_empty() {
        return Err(ExperimentError::Schema { missing });
    }
    let col = |name: &str| headers.iter().position(|h| h == name).expect("checked above");
    let idx: Vec<usize> = CELL_COLUMNS.iter().map(|c| col(c)).collect();
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let field = |j: usize| rec.get(idx[j]).unwrap_or("");
        let err = |j: usize, msg: String| ExperimentError::Parse { row, column: CELL_COLUMNS[j].to_string(), message: msg };
        let num = |j: usize| -> Result<f64, ExperimentError> {
            let s = field(j);
            if s.is_empty() {
                return Ok(f64::NAN);
            }
            s.parse().map_err(|_| err(j, format!("cannot parse `{s}`")))
        };
        let vis_type = match field(0) {
            "bar" => VisType::Bar,
            "hops" => VisType::Hops,
            other => return Err(err(0, format!("unknown visualization `{other}`"))),
        };
        let access = match field(1) {
            "private" => InformationAccess::Private,
            "public" => InformationAccess::Public,
            other => return Err(err(1, format!("unknown access `{other}`"))),
        };
        let signal = num(2)?;
        out.push(CellSummary {
            vis_type,
            access,
            signal_prop: (!signal.is_nan()).then_some(signal),
            proportion_a: num(3)?,
            ci_lo: num(4)?,
            ci_hi: num(5)?,
            n: field(6).parse().map_err(|_| err(6, format!("cannot parse `{}`", field(6))))?,
            replicates: Vec::new(),
        });
    }
    Ok(out)
}
