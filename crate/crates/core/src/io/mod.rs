//! Dataset ingestion, run configuration, score export and run manifests.
//!
//! CSV files follow RFC 4180 (quoted fields may contain commas and
//! newlines). Rows are numbered from 1 for the first data row; the header is
//! row 0.

mod config;
mod export;
mod manifest;
mod ratings;
mod responses;

use std::path::{Path, PathBuf};

use thiserror::Error;

pub use config::{RunConfig, CONFIG_SCHEMA_VERSION};
pub use export::{
    export_scores, format_sig9, read_ensemble_scores, read_subject_scores, CsvTable,
    ENSEMBLE_SCORES_FILE, RESPONSE_SCORES_FILE, SUBJECT_SCORES_FILE,
};
pub use manifest::{
    canonical_json_digest, sha256_digest, ModelRunStats, RunManifest, MANIFEST_FILE,
};
pub use ratings::{parse_ratings, parse_ratings_file};
pub use responses::{parse_responses, parse_responses_file, write_responses};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("row {row}: schema error: {message}")]
    Schema { row: usize, message: String },
    #[error("row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("row {row}: out of range: {message}")]
    Range { row: usize, message: String },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl PipelineError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        PipelineError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Maps a csv error to a row-numbered parse error (or I/O error).
    pub(crate) fn from_csv(err: csv::Error, path: &Path, fallback_row: usize) -> Self {
        let row = err
            .position()
            .map(|p| p.record() as usize)
            .unwrap_or(fallback_row);
        match err.into_kind() {
            csv::ErrorKind::Io(e) => PipelineError::io(path, e),
            kind => PipelineError::Parse {
                row,
                message: format!("{kind:?}"),
            },
        }
    }
}

/// Column positions of `required` (and `optional`) names in a header row.
pub(crate) fn locate_columns(
    headers: &csv::StringRecord,
    required: &[&str],
    optional: &[&str],
) -> Result<(Vec<usize>, Vec<Option<usize>>), PipelineError> {
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}') == name)
    };
    let mut req = Vec::with_capacity(required.len());
    for name in required {
        req.push(find(name).ok_or_else(|| PipelineError::Schema {
            row: 0,
            message: format!("missing column {name:?}"),
        })?);
    }
    Ok((req, optional.iter().map(|n| find(n)).collect()))
}

pub(crate) fn csv_reader<R: std::io::Read>(reader: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader)
}

pub(crate) fn csv_writer<W: std::io::Write>(writer: W) -> csv::Writer<W> {
    csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer)
}
