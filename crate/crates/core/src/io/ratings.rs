use std::io::Read;
use std::path::Path;

use crate::data::{HumanRating, RatingKind};

use super::{csv_reader, locate_columns, PipelineError};

const REQUIRED: [&str; 6] = [
    "subject_id",
    "prompt_id",
    "order",
    "rater_id",
    "rating",
    "rating_kind",
];

/// Reads `subject_id,prompt_id,order,rater_id,rating,rating_kind`.
///
/// `rating_kind` is `originality` (0-4, per response) or `flexibility`
/// (snapshot, 1-5, per trial; `order` may be blank).
pub fn parse_ratings<R: Read>(reader: R) -> Result<Vec<HumanRating>, PipelineError> {
    parse_named(reader, Path::new("<ratings>"))
}

pub fn parse_ratings_file(path: &Path) -> Result<Vec<HumanRating>, PipelineError> {
    let file = std::fs::File::open(path).map_err(|e| PipelineError::io(path, e))?;
    parse_named(file, path)
}

fn parse_named<R: Read>(reader: R, name: &Path) -> Result<Vec<HumanRating>, PipelineError> {
    let mut rdr = csv_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| PipelineError::from_csv(e, name, 0))?
        .clone();
    let (cols, _) = locate_columns(&headers, &REQUIRED, &[])?;

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| PipelineError::from_csv(e, name, row))?;
        let field = |c: usize| rec.get(cols[c]).unwrap_or("").trim();
        let parse_err = |message: String| PipelineError::Parse { row, message };

        let kind: RatingKind = field(5)
            .parse()
            .map_err(|e: crate::data::DataError| parse_err(e.to_string()))?;
        let order = match field(2) {
            "" => None,
            s => Some(
                s.parse::<u32>()
                    .ok()
                    .filter(|&o| o > 0)
                    .ok_or_else(|| parse_err(format!("order {s:?} is not a positive integer")))?,
            ),
        };
        let raw = field(4);
        let rating: f64 = raw
            .parse()
            .ok()
            .filter(|v: &f64| v.is_finite())
            .ok_or_else(|| parse_err(format!("rating {raw:?} is not a number")))?;
        let (lo, hi) = kind.bounds();
        if rating < lo || rating > hi {
            return Err(PipelineError::Range {
                row,
                message: format!("{kind} rating {rating} outside [{lo}, {hi}]"),
            });
        }
        let rating = HumanRating::new(field(0), field(1), order, field(3), rating, kind)
            .map_err(|e| parse_err(e.to_string()))?;
        out.push(rating);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "subject_id,prompt_id,order,rater_id,rating,rating_kind\n";

    fn parse(body: &str) -> Result<Vec<HumanRating>, PipelineError> {
        parse_ratings(format!("{HEADER}{body}").as_bytes())
    }

    #[test]
    fn scale_bounds() {
        assert_eq!(parse("s1,p,1,r1,4,originality\n").unwrap()[0].rating, 4.0);
        assert!(matches!(
            parse("s1,p,1,r1,5,originality\n"),
            Err(PipelineError::Range { row: 1, .. })
        ));
        let flex = parse("s1,p,,r1,5,flexibility\n").unwrap();
        assert_eq!(flex[0].order, None);
        assert_eq!(flex[0].rating_kind, RatingKind::Flexibility);
        assert!(matches!(
            parse("s1,p,,r1,0.5,flexibility\n"),
            Err(PipelineError::Range { .. })
        ));
    }

    #[test]
    fn malformed_fields() {
        assert!(matches!(
            parse("s1,p,1,r1,high,originality\n"),
            Err(PipelineError::Parse { row: 1, .. })
        ));
        assert!(matches!(
            parse("s1,p,1,r1,2,fluency\n"),
            Err(PipelineError::Parse { .. })
        ));
        assert!(matches!(
            parse("s1,p,,r1,2,originality\n"),
            Err(PipelineError::Parse { .. })
        ));
        assert!(matches!(
            parse_ratings("subject_id,prompt_id,order,rating\n".as_bytes()),
            Err(PipelineError::Schema { row: 0, .. })
        ));
    }
}
