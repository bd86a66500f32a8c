//! Core domain types shared across the crate.
//!
//! Response order is always explicit in the input. Nothing here infers order
//! from row position, because flexibility depends on which responses are
//! adjacent.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("duplicate order {order} for subject {subject_id:?}, prompt {prompt_id:?}")]
    DuplicateOrder {
        subject_id: String,
        prompt_id: String,
        order: u32,
    },
    #[error(
        "order gap for subject {subject_id:?}, prompt {prompt_id:?}: expected {expected}, found {found}"
    )]
    OrderGap {
        subject_id: String,
        prompt_id: String,
        expected: u32,
        found: u32,
    },
    #[error("subject {subject_id:?} has conflicting group labels {first:?} and {second:?}")]
    GroupConflict {
        subject_id: String,
        first: String,
        second: String,
    },
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },
}

fn invalid(what: &'static str, reason: impl Into<String>) -> DataError {
    DataError::Invalid {
        what,
        reason: reason.into(),
    }
}

/// An AUT cue object, e.g. `toothbrush`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptItem {
    pub prompt_id: String,
    pub prompt_text: String,
}

impl PromptItem {
    pub fn new(
        prompt_id: impl Into<String>,
        prompt_text: impl Into<String>,
    ) -> Result<Self, DataError> {
        let prompt_id = prompt_id.into();
        let prompt_text = prompt_text.into().trim().to_string();
        if prompt_id.trim().is_empty() {
            return Err(invalid("prompt", "prompt_id is empty"));
        }
        if prompt_text.is_empty() {
            return Err(invalid(
                "prompt",
                format!("prompt {prompt_id:?} has empty text"),
            ));
        }
        Ok(Self {
            prompt_id,
            prompt_text,
        })
    }
}

/// One answer to one prompt by one subject.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ResponseRecord {
    pub subject_id: String,
    pub prompt_id: String,
    /// 1-based generation order within the (subject, prompt) trial.
    pub order: u32,
    pub response_text: String,
    pub group_label: Option<String>,
}

impl ResponseRecord {
    /// Validates and normalizes a record. Surrounding whitespace is trimmed
    /// from the response; interior whitespace is kept.
    pub fn new(
        subject_id: impl Into<String>,
        prompt_id: impl Into<String>,
        order: u32,
        response_text: impl AsRef<str>,
        group_label: Option<String>,
    ) -> Result<Self, DataError> {
        let subject_id = subject_id.into();
        let prompt_id = prompt_id.into();
        if subject_id.is_empty() {
            return Err(invalid("response", "subject_id is empty"));
        }
        if prompt_id.is_empty() {
            return Err(invalid("response", "prompt_id is empty"));
        }
        if order == 0 {
            return Err(invalid("response", "order must be a positive integer"));
        }
        let response_text = response_text.as_ref().trim().to_string();
        if response_text.is_empty() {
            return Err(invalid("response", "response_text is empty"));
        }
        let group_label = group_label.filter(|g| !g.trim().is_empty());
        Ok(Self {
            subject_id,
            prompt_id,
            order,
            response_text,
            group_label,
        })
    }
}

/// The ordered responses of one subject to one prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubjectTrial {
    pub subject_id: String,
    pub prompt_id: String,
    pub responses: Vec<ResponseRecord>,
}

impl SubjectTrial {
    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.responses.iter().map(|r| r.response_text.as_str())
    }
}

/// Groups records into trials, one per (subject, prompt), sorted by subject
/// then prompt. Each trial's orders must run `1..=k` without gaps.
pub fn build_trials(records: &[ResponseRecord]) -> Result<Vec<SubjectTrial>, DataError> {
    let mut grouped: BTreeMap<(&str, &str), Vec<&ResponseRecord>> = BTreeMap::new();
    for rec in records {
        grouped
            .entry((rec.subject_id.as_str(), rec.prompt_id.as_str()))
            .or_default()
            .push(rec);
    }

    let mut trials = Vec::with_capacity(grouped.len());
    for ((subject_id, prompt_id), mut recs) in grouped {
        // Ties on order are reported below; the text tiebreak only keeps the
        // reported duplicate independent of input order.
        recs.sort_by(|a, b| {
            a.order
                .cmp(&b.order)
                .then_with(|| a.response_text.cmp(&b.response_text))
        });
        for (i, rec) in recs.iter().enumerate() {
            let expected = i as u32 + 1;
            if i > 0 && rec.order == recs[i - 1].order {
                return Err(DataError::DuplicateOrder {
                    subject_id: subject_id.to_string(),
                    prompt_id: prompt_id.to_string(),
                    order: rec.order,
                });
            }
            if rec.order != expected {
                return Err(DataError::OrderGap {
                    subject_id: subject_id.to_string(),
                    prompt_id: prompt_id.to_string(),
                    expected,
                    found: rec.order,
                });
            }
        }
        trials.push(SubjectTrial {
            subject_id: subject_id.to_string(),
            prompt_id: prompt_id.to_string(),
            responses: recs.into_iter().cloned().collect(),
        });
    }
    Ok(trials)
}

/// Inverse of [`build_trials`].
pub fn flatten_trials(trials: &[SubjectTrial]) -> Vec<ResponseRecord> {
    trials
        .iter()
        .flat_map(|t| t.responses.iter().cloned())
        .collect()
}

/// One group label per subject (`None` when the subject has none).
pub fn subject_groups(
    records: &[ResponseRecord],
) -> Result<BTreeMap<String, Option<String>>, DataError> {
    let mut groups: BTreeMap<String, Option<String>> = BTreeMap::new();
    for rec in records {
        let slot = groups.entry(rec.subject_id.clone()).or_insert(None);
        match (&*slot, &rec.group_label) {
            (_, None) => {}
            (None, Some(g)) => *slot = Some(g.clone()),
            (Some(a), Some(b)) if a == b => {}
            (Some(a), Some(b)) => {
                let (first, second) = if a <= b { (a, b) } else { (b, a) };
                return Err(DataError::GroupConflict {
                    subject_id: rec.subject_id.clone(),
                    first: first.clone(),
                    second: second.clone(),
                });
            }
        }
    }
    Ok(groups)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatingKind {
    /// 0 (not at all creative) to 4 (very creative).
    Originality,
    /// Snapshot flexibility, 1 (not flexible at all) to 5 (very flexible).
    Flexibility,
}

impl RatingKind {
    pub fn bounds(self) -> (f64, f64) {
        match self {
            RatingKind::Originality => (0.0, 4.0),
            RatingKind::Flexibility => (1.0, 5.0),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RatingKind::Originality => "originality",
            RatingKind::Flexibility => "flexibility",
        }
    }
}

impl fmt::Display for RatingKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for RatingKind {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "originality" => Ok(RatingKind::Originality),
            "flexibility" => Ok(RatingKind::Flexibility),
            other => Err(invalid(
                "rating_kind",
                format!("unknown rating kind {other:?}"),
            )),
        }
    }
}

/// A human judgement. Originality ratings target one response (`order` set);
/// snapshot flexibility ratings target a whole trial (`order` may be absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanRating {
    pub subject_id: String,
    pub prompt_id: String,
    pub order: Option<u32>,
    pub rater_id: String,
    pub rating: f64,
    pub rating_kind: RatingKind,
}

impl HumanRating {
    pub fn new(
        subject_id: impl Into<String>,
        prompt_id: impl Into<String>,
        order: Option<u32>,
        rater_id: impl Into<String>,
        rating: f64,
        rating_kind: RatingKind,
    ) -> Result<Self, DataError> {
        let (lo, hi) = rating_kind.bounds();
        if !rating.is_finite() || rating < lo || rating > hi {
            return Err(invalid(
                "rating",
                format!("{rating_kind} rating {rating} outside [{lo}, {hi}]"),
            ));
        }
        if rating_kind == RatingKind::Originality && order.is_none() {
            return Err(invalid(
                "rating",
                "originality ratings need a response order",
            ));
        }
        if order == Some(0) {
            return Err(invalid("rating", "order must be a positive integer"));
        }
        let rater_id = rater_id.into();
        if rater_id.is_empty() {
            return Err(invalid("rating", "rater_id is empty"));
        }
        Ok(Self {
            subject_id: subject_id.into(),
            prompt_id: prompt_id.into(),
            order,
            rater_id,
            rating,
            rating_kind,
        })
    }
}

/// A dense real vector with every entry finite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct EmbeddingVector(Vec<f64>);

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Result<Self, DataError> {
        if values.is_empty() {
            return Err(invalid("embedding", "dimension must be positive"));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(invalid("embedding", format!("entry {i} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Rounds every entry to the nearest `f32`, the precision of the cache
    /// payload.
    pub fn quantized(&self) -> Self {
        Self(self.0.iter().map(|&v| v as f32 as f64).collect())
    }
}

impl TryFrom<Vec<f64>> for EmbeddingVector {
    type Error = DataError;

    fn try_from(values: Vec<f64>) -> Result<Self, Self::Error> {
        Self::new(values)
    }
}

impl From<EmbeddingVector> for Vec<f64> {
    fn from(v: EmbeddingVector) -> Self {
        v.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseScore {
    pub subject_id: String,
    pub prompt_id: String,
    pub order: u32,
    pub model_id: String,
    pub originality_distance: f64,
    pub elaboration: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubjectScore {
    pub subject_id: String,
    pub prompt_id: String,
    pub model_id: String,
    pub originality_topk: f64,
    pub flexibility_sum: f64,
    pub fluency: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleScore {
    pub subject_id: String,
    pub prompt_id: String,
    pub originality_z_mean: f64,
    pub flexibility_z_mean: f64,
    pub group_label: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScoreTable {
    pub response_scores: Vec<ResponseScore>,
    pub subject_scores: Vec<SubjectScore>,
    pub ensemble_scores: Vec<EnsembleScore>,
}

impl ScoreTable {
    /// Sorts every table by its key columns.
    pub fn sort(&mut self) {
        self.response_scores.sort_by(|a, b| {
            (&a.subject_id, &a.prompt_id, a.order, &a.model_id).cmp(&(
                &b.subject_id,
                &b.prompt_id,
                b.order,
                &b.model_id,
            ))
        });
        self.subject_scores.sort_by(|a, b| {
            (&a.subject_id, &a.prompt_id, &a.model_id).cmp(&(
                &b.subject_id,
                &b.prompt_id,
                &b.model_id,
            ))
        });
        self.ensemble_scores
            .sort_by(|a, b| (&a.subject_id, &a.prompt_id).cmp(&(&b.subject_id, &b.prompt_id)));
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for r in &self.response_scores {
            if !(0.0..=2.0).contains(&r.originality_distance) {
                return Err(invalid(
                    "score table",
                    format!(
                        "originality distance {} outside [0, 2]",
                        r.originality_distance
                    ),
                ));
            }
        }
        for s in &self.subject_scores {
            // also rejects NaN
            if s.flexibility_sum.is_nan() || s.flexibility_sum < 0.0 {
                return Err(invalid(
                    "score table",
                    format!("negative flexibility {}", s.flexibility_sum),
                ));
            }
            if s.fluency < 1 {
                return Err(invalid("score table", "fluency below 1"));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rec(s: &str, p: &str, order: u32, text: &str) -> ResponseRecord {
        ResponseRecord::new(s, p, order, text, None).unwrap()
    }

    #[test]
    fn groups_one_trial_in_order() {
        let trials = build_trials(&[rec("s1", "p1", 2, "b"), rec("s1", "p1", 1, "a")]).unwrap();
        assert_eq!(trials.len(), 1);
        let texts: Vec<_> = trials[0].texts().collect();
        assert_eq!(texts, ["a", "b"]);
    }

    #[test]
    fn partitions_by_prompt() {
        let trials = build_trials(&[rec("s1", "p2", 1, "x"), rec("s1", "p1", 1, "y")]).unwrap();
        let keys: Vec<_> = trials.iter().map(|t| t.prompt_id.as_str()).collect();
        assert_eq!(keys, ["p1", "p2"]);
    }

    #[test]
    fn duplicate_order_rejected() {
        let err = build_trials(&[rec("s1", "p1", 1, "a"), rec("s1", "p1", 1, "b")]).unwrap_err();
        assert!(matches!(err, DataError::DuplicateOrder { order: 1, .. }));
    }

    #[test]
    fn order_gap_rejected() {
        let err = build_trials(&[rec("s1", "p1", 1, "a"), rec("s1", "p1", 3, "b")]).unwrap_err();
        assert_eq!(
            err,
            DataError::OrderGap {
                subject_id: "s1".into(),
                prompt_id: "p1".into(),
                expected: 2,
                found: 3
            }
        );
        let err = build_trials(&[rec("s1", "p1", 2, "a")]).unwrap_err();
        assert!(matches!(
            err,
            DataError::OrderGap {
                expected: 1,
                found: 2,
                ..
            }
        ));
    }

    #[test]
    fn record_trims_but_keeps_interior_whitespace() {
        let r = rec("s", "p", 1, "  铺 床单 \n");
        assert_eq!(r.response_text, "铺 床单");
        assert!(ResponseRecord::new("s", "p", 1, "   ", None).is_err());
        assert!(ResponseRecord::new("s", "p", 0, "x", None).is_err());
    }

    #[test]
    fn rating_bounds() {
        assert!(HumanRating::new("s", "p", Some(1), "r1", 4.0, RatingKind::Originality).is_ok());
        assert!(HumanRating::new("s", "p", Some(1), "r1", 5.0, RatingKind::Originality).is_err());
        assert!(HumanRating::new("s", "p", None, "r1", 5.0, RatingKind::Flexibility).is_ok());
        assert!(HumanRating::new("s", "p", None, "r1", 0.0, RatingKind::Flexibility).is_err());
    }

    #[test]
    fn group_conflict_detected() {
        let a = ResponseRecord::new("s1", "p1", 1, "x", Some("creative".into())).unwrap();
        let b = ResponseRecord::new("s1", "p2", 1, "y", Some("common".into())).unwrap();
        assert!(matches!(
            subject_groups(&[a.clone(), b]),
            Err(DataError::GroupConflict { .. })
        ));
        let c = ResponseRecord::new("s1", "p2", 1, "y", None).unwrap();
        let groups = subject_groups(&[c, a]).unwrap();
        assert_eq!(groups["s1"].as_deref(), Some("creative"));
    }

    #[test]
    fn embedding_rejects_non_finite() {
        assert!(EmbeddingVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(EmbeddingVector::new(vec![]).is_err());
    }

    fn corpus() -> impl Strategy<Value = Vec<ResponseRecord>> {
        prop::collection::vec((0u8..4, 0u8..3, 1usize..5), 1..12).prop_map(|trials| {
            let mut seen = std::collections::BTreeSet::new();
            let mut out = Vec::new();
            for (s, p, n) in trials {
                if !seen.insert((s, p)) {
                    continue;
                }
                for o in 1..=n {
                    out.push(rec(
                        &format!("s{s}"),
                        &format!("p{p}"),
                        o as u32,
                        &format!("r{s}{p}{o}"),
                    ));
                }
            }
            out
        })
    }

    proptest! {
        #[test]
        fn build_trials_is_permutation_invariant(
            records in corpus(),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = records.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            prop_assert_eq!(build_trials(&records).unwrap(), build_trials(&shuffled).unwrap());
        }

        #[test]
        fn flatten_round_trips(records in corpus()) {
            let trials = build_trials(&records).unwrap();
            let mut flat = flatten_trials(&trials);
            let mut orig = records.clone();
            flat.sort();
            orig.sort();
            prop_assert_eq!(flat, orig);
        }
    }
}
