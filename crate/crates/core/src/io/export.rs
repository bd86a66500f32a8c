//! Score export and re-import.
//!
//! Reals are written with 9 significant digits in `%g` style (plain decimal
//! for exponents in `[-5, 9)`, scientific otherwise), trailing zeros
//! trimmed, negative zero written as `0`.

use std::path::{Path, PathBuf};

use crate::data::{EnsembleScore, ScoreTable, SubjectScore};

use super::{csv_reader, csv_writer, locate_columns, PipelineError};

pub const RESPONSE_SCORES_FILE: &str = "response_scores.csv";
pub const SUBJECT_SCORES_FILE: &str = "subject_scores.csv";
pub const ENSEMBLE_SCORES_FILE: &str = "ensemble_scores.csv";

pub fn format_sig9(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.8e}");
    let (mantissa, exp) = sci
        .split_once('e')
        .expect("scientific format has an exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..9).contains(&exp) {
        let decimals = (8 - exp).max(0) as usize;
        let s = trim_zeros(format!("{x:.decimals$}"));
        if s == "-0" {
            "0".into()
        } else {
            s
        }
    } else {
        format!(
            "{}e{}{:02}",
            trim_zeros(mantissa.to_string()),
            if exp < 0 { '-' } else { '+' },
            exp.abs()
        )
    }
}

fn trim_zeros(s: String) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

/// Writes the three score CSVs into `dir`, sorted by key columns. Returns
/// the written paths.
pub fn export_scores(table: &ScoreTable, dir: &Path) -> Result<Vec<PathBuf>, PipelineError> {
    std::fs::create_dir_all(dir).map_err(|e| PipelineError::io(dir, e))?;
    let mut table = table.clone();
    table.sort();

    let response_path = dir.join(RESPONSE_SCORES_FILE);
    write_csv(
        &response_path,
        &[
            "subject_id",
            "prompt_id",
            "order",
            "model_id",
            "originality_distance",
            "elaboration",
        ],
        table.response_scores.iter().map(|r| {
            vec![
                r.subject_id.clone(),
                r.prompt_id.clone(),
                r.order.to_string(),
                r.model_id.clone(),
                format_sig9(r.originality_distance),
                r.elaboration.to_string(),
            ]
        }),
    )?;

    let subject_path = dir.join(SUBJECT_SCORES_FILE);
    write_csv(
        &subject_path,
        &[
            "subject_id",
            "prompt_id",
            "model_id",
            "originality_topk",
            "flexibility_sum",
            "fluency",
        ],
        table.subject_scores.iter().map(|s| {
            vec![
                s.subject_id.clone(),
                s.prompt_id.clone(),
                s.model_id.clone(),
                format_sig9(s.originality_topk),
                format_sig9(s.flexibility_sum),
                s.fluency.to_string(),
            ]
        }),
    )?;

    let ensemble_path = dir.join(ENSEMBLE_SCORES_FILE);
    write_csv(
        &ensemble_path,
        &[
            "subject_id",
            "prompt_id",
            "originality_z_mean",
            "flexibility_z_mean",
            "group_label",
        ],
        table.ensemble_scores.iter().map(|e| {
            vec![
                e.subject_id.clone(),
                e.prompt_id.clone(),
                format_sig9(e.originality_z_mean),
                format_sig9(e.flexibility_z_mean),
                e.group_label.clone().unwrap_or_default(),
            ]
        }),
    )?;

    Ok(vec![response_path, subject_path, ensemble_path])
}

fn write_csv(
    path: &Path,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> Result<(), PipelineError> {
    let file = std::fs::File::create(path).map_err(|e| PipelineError::io(path, e))?;
    let mut w = csv_writer(std::io::BufWriter::new(file));
    let wrap = |e: csv::Error| PipelineError::from_csv(e, path, 0);
    w.write_record(header).map_err(wrap)?;
    for row in rows {
        w.write_record(&row).map_err(wrap)?;
    }
    w.flush().map_err(|e| PipelineError::io(path, e))
}

/// A CSV file held as header-indexed string rows.
#[derive(Debug, Clone)]
pub struct CsvTable {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self, PipelineError> {
        let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
        let mut rdr = csv_reader(file);
        let headers = rdr
            .headers()
            .map_err(|e| PipelineError::from_csv(e, path, 0))?
            .iter()
            .map(|h| h.trim().trim_start_matches('\u{feff}').to_string())
            .collect();
        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| PipelineError::from_csv(e, path, i + 1))?;
            rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(Self { headers, rows })
    }

    pub fn column(&self, name: &str) -> Result<usize, PipelineError> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| PipelineError::Schema {
                row: 0,
                message: format!("missing column {name:?}"),
            })
    }
}

fn parse_f64(raw: &str, row: usize, column: &str) -> Result<f64, PipelineError> {
    raw.trim().parse().map_err(|_| PipelineError::Parse {
        row,
        message: format!("{column} {raw:?} is not a number"),
    })
}

pub fn read_subject_scores(path: &Path) -> Result<Vec<SubjectScore>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut rdr = csv_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| PipelineError::from_csv(e, path, 0))?
        .clone();
    let names = [
        "subject_id",
        "prompt_id",
        "model_id",
        "originality_topk",
        "flexibility_sum",
        "fluency",
    ];
    let (c, _) = locate_columns(&headers, &names, &[])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| PipelineError::from_csv(e, path, row))?;
        let f = |k: usize| rec.get(c[k]).unwrap_or("");
        out.push(SubjectScore {
            subject_id: f(0).to_string(),
            prompt_id: f(1).to_string(),
            model_id: f(2).to_string(),
            originality_topk: parse_f64(f(3), row, names[3])?,
            flexibility_sum: parse_f64(f(4), row, names[4])?,
            fluency: f(5).trim().parse().map_err(|_| PipelineError::Parse {
                row,
                message: format!("fluency {:?} is not an integer", f(5)),
            })?,
        });
    }
    Ok(out)
}

pub fn read_ensemble_scores(path: &Path) -> Result<Vec<EnsembleScore>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    let mut rdr = csv_reader(file);
    let headers = rdr
        .headers()
        .map_err(|e| PipelineError::from_csv(e, path, 0))?
        .clone();
    let names = [
        "subject_id",
        "prompt_id",
        "originality_z_mean",
        "flexibility_z_mean",
    ];
    let (c, opt) = locate_columns(&headers, &names, &["group_label"])?;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| PipelineError::from_csv(e, path, row))?;
        let f = |k: usize| rec.get(c[k]).unwrap_or("");
        out.push(EnsembleScore {
            subject_id: f(0).to_string(),
            prompt_id: f(1).to_string(),
            originality_z_mean: parse_f64(f(2), row, names[2])?,
            flexibility_z_mean: parse_f64(f(3), row, names[3])?,
            group_label: opt[0]
                .and_then(|g| rec.get(g))
                .map(str::trim)
                .filter(|g| !g.is_empty())
                .map(String::from),
        });
    }
    Ok(out)
}
