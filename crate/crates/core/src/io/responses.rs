use std::io::{Read, Write};
use std::path::Path;

use crate::data::ResponseRecord;

use super::{csv_reader, csv_writer, locate_columns, PipelineError};

const REQUIRED: [&str; 4] = ["subject_id", "prompt_id", "order", "response_text"];

/// Reads `subject_id,prompt_id,order,response_text[,group_label]`. Extra
/// columns are ignored.
pub fn parse_responses<R: Read>(reader: R) -> Result<Vec<ResponseRecord>, PipelineError> {
    parse_responses_named(reader, Path::new("<responses>"))
}

pub fn parse_responses_file(path: &Path) -> Result<Vec<ResponseRecord>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    parse_responses_named(file, path)
}

fn parse_responses_named<R: Read>(
    reader: R,
    name: &Path,
) -> Result<Vec<ResponseRecord>, PipelineError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| PipelineError::from_csv(e, name, 0))?
        .clone();
    let (cols, opt) = locate_columns(&headers, &REQUIRED, &["group_label"])?;
    let group_col = opt[0];

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| PipelineError::from_csv(e, name, row))?;
        let field = |c: usize| rec.get(c).unwrap_or("");
        let order_raw = field(cols[2]).trim();
        let order: u32 = order_raw.parse().map_err(|_| PipelineError::Parse {
            row,
            message: format!("order {order_raw:?} is not a positive integer"),
        })?;
        let group = group_col.map(|c| field(c).trim().to_string());
        let record = ResponseRecord::new(
            field(cols[0]).trim(),
            field(cols[1]).trim(),
            order,
            field(cols[3]),
            group,
        )
        .map_err(|e| PipelineError::Parse {
            row,
            message: e.to_string(),
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Writes records in the input format (with a `group_label` column).
pub fn write_responses<W: Write>(
    records: &[ResponseRecord],
    writer: W,
) -> Result<(), PipelineError> {
    let name = Path::new("<responses>");
    let mut w = csv_writer(writer);
    let wrap = |e: csv::Error| PipelineError::from_csv(e, name, 0);
    w.write_record([
        "subject_id",
        "prompt_id",
        "order",
        "response_text",
        "group_label",
    ])
    .map_err(wrap)?;
    for r in records {
        w.write_record([
            r.subject_id.as_str(),
            r.prompt_id.as_str(),
            &r.order.to_string(),
            r.response_text.as_str(),
            r.group_label.as_deref().unwrap_or(""),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| PipelineError::io(name, e))
}
