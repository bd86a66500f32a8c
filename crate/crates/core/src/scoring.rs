//! Originality, flexibility, fluency, elaboration and cross-model ensembling.
//!
//! All arithmetic is `f64`. Distances are `1 - cos(p, r)`, so they lie in
//! `[0, 2]` with 0 for identical directions and 2 for opposite ones.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{EmbeddingVector, SubjectTrial};

/// Floating-point overshoot beyond `[0, 2]` that is clamped away silently.
const CLAMP_SLACK: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScoreError {
    #[error("zero-norm embedding{}", .index.map(|i| format!(" at response order {i}")).unwrap_or_default())]
    DegenerateVector { index: Option<usize> },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("empty input")]
    EmptyInput,
    #[error("zero variance{}", .model_id.as_ref().map(|m| format!(" in model {m:?}")).unwrap_or_default())]
    ZeroVariance { model_id: Option<String> },
    #[error("need at least 2 values to standardize, got {0}")]
    InsufficientData(usize),
    #[error("misaligned score lists: {0}")]
    AlignmentError(String),
    #[error("invalid ensemble spec: {0}")]
    InvalidSpec(String),
}

/// `1 - cosine similarity` between prompt and response embeddings.
pub fn semantic_distance(p: &EmbeddingVector, r: &EmbeddingVector) -> Result<f64, ScoreError> {
    if p.dim() != r.dim() {
        return Err(ScoreError::DimensionMismatch {
            left: p.dim(),
            right: r.dim(),
        });
    }
    let (mut dot, mut pp, mut rr) = (0.0, 0.0, 0.0);
    for (a, b) in p.values().iter().zip(r.values()) {
        dot += a * b;
        pp += a * a;
        rr += b * b;
    }
    if pp == 0.0 || rr == 0.0 {
        return Err(ScoreError::DegenerateVector { index: None });
    }
    // sqrt(pp * rr) returns pp exactly when p == r, so identical vectors
    // score exactly 0; the split form guards against overflow/underflow.
    let prod = pp * rr;
    let denom = if prod.is_normal() {
        prod.sqrt()
    } else {
        pp.sqrt() * rr.sqrt()
    };
    let d = 1.0 - dot / denom;
    debug_assert!(
        d > -CLAMP_SLACK && d < 2.0 + CLAMP_SLACK,
        "distance {d} out of range"
    );
    Ok(d.clamp(0.0, 2.0))
}

/// Mean of the `min(k, n)` largest distances.
pub fn subject_originality(distances: &[f64], k: usize) -> Result<f64, ScoreError> {
    if distances.is_empty() {
        return Err(ScoreError::EmptyInput);
    }
    if k == 0 {
        return Err(ScoreError::InvalidSpec("top-k must be at least 1".into()));
    }
    let mut sorted = distances.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let take = k.min(sorted.len());
    Ok(sorted[..take].iter().sum::<f64>() / take as f64)
}

/// Sum of distances between adjacent responses. A single response scores 0.
///
/// A degenerate embedding is reported with its 1-based response order.
pub fn flexibility(embeddings: &[EmbeddingVector]) -> Result<f64, ScoreError> {
    if embeddings.is_empty() {
        return Err(ScoreError::EmptyInput);
    }
    if let Some(i) = embeddings.iter().position(|e| e.norm() == 0.0) {
        return Err(ScoreError::DegenerateVector { index: Some(i + 1) });
    }
    embeddings
        .windows(2)
        .map(|w| semantic_distance(&w[0], &w[1]))
        .sum()
}

/// Number of responses. Verbatim duplicates are counted.
pub fn fluency(trial: &SubjectTrial) -> u32 {
    trial.responses.len() as u32
}

/// Count of non-whitespace characters.
pub fn elaboration(response_text: &str) -> u32 {
    response_text.chars().filter(|c| !c.is_whitespace()).count() as u32
}

/// Count of characters in the CJK Unified Ideograph blocks only.
pub fn elaboration_cjk(response_text: &str) -> u32 {
    response_text.chars().filter(|&c| is_cjk_unified(c)).count() as u32
}

fn is_cjk_unified(c: char) -> bool {
    matches!(c as u32,
        0x4E00..=0x9FFF
        | 0x3400..=0x4DBF
        | 0x20000..=0x2A6DF
        | 0x2A700..=0x2B73F
        | 0x2B740..=0x2B81F
        | 0x2B820..=0x2CEAF
        | 0x2CEB0..=0x2EBEF
        | 0x2EBF0..=0x2EE5F
        | 0x30000..=0x3134F
        | 0x31350..=0x323AF)
}

/// z-scores using the sample (n - 1) standard deviation.
pub fn standardize(scores: &[f64]) -> Result<Vec<f64>, ScoreError> {
    let n = scores.len();
    if n < 2 {
        return Err(ScoreError::InsufficientData(n));
    }
    let mean = scores.iter().sum::<f64>() / n as f64;
    let var = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    // Relative guard: constant inputs leave only rounding residue in `var`.
    let scale = scores.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if sd.is_nan() || sd <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return Err(ScoreError::ZeroVariance { model_id: None });
    }
    Ok(scores.iter().map(|x| (x - mean) / sd).collect())
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum StandardizeScope {
    /// z-scores computed separately within each prompt.
    #[default]
    #[serde(alias = "per_prompt")]
    PerPrompt,
    #[serde(alias = "global")]
    Global,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Combine {
    #[default]
    ZMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub model_ids: Vec<String>,
    #[serde(default)]
    pub standardize_scope: StandardizeScope,
    #[serde(default)]
    pub combine: Combine,
}

impl EnsembleSpec {
    pub fn new(
        model_ids: Vec<String>,
        standardize_scope: StandardizeScope,
    ) -> Result<Self, ScoreError> {
        let spec = Self {
            model_ids,
            standardize_scope,
            combine: Combine::ZMean,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), ScoreError> {
        if self.model_ids.is_empty() {
            return Err(ScoreError::InvalidSpec("no models".into()));
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.model_ids {
            if !seen.insert(m) {
                return Err(ScoreError::InvalidSpec(format!("duplicate model {m:?}")));
            }
        }
        Ok(())
    }
}

/// Standardizes each model's scores, then averages element-wise across
/// models in `spec.model_ids` order. All elements are treated as one stratum.
pub fn ensemble(
    per_model_scores: &BTreeMap<String, Vec<f64>>,
    spec: &EnsembleSpec,
) -> Result<Vec<f64>, ScoreError> {
    let n = spec
        .model_ids
        .first()
        .and_then(|m| per_model_scores.get(m))
        .map_or(0, Vec::len);
    ensemble_stratified(per_model_scores, &vec![(); n], spec)
}

/// Like [`ensemble`], with `strata[i]` naming the prompt of element `i`.
/// Under [`StandardizeScope::PerPrompt`] z-scores are computed within each
/// stratum; under [`StandardizeScope::Global`] across all elements.
pub fn ensemble_stratified<S: Ord>(
    per_model_scores: &BTreeMap<String, Vec<f64>>,
    strata: &[S],
    spec: &EnsembleSpec,
) -> Result<Vec<f64>, ScoreError> {
    spec.validate()?;
    let n = strata.len();
    let mut columns = Vec::with_capacity(spec.model_ids.len());
    for model_id in &spec.model_ids {
        let scores = per_model_scores.get(model_id).ok_or_else(|| {
            ScoreError::AlignmentError(format!("no scores for model {model_id:?}"))
        })?;
        if scores.len() != n {
            return Err(ScoreError::AlignmentError(format!(
                "model {model_id:?} has {} scores, expected {n}",
                scores.len()
            )));
        }
        columns.push((model_id, scores));
    }
    if n < 2 {
        return Err(ScoreError::InsufficientData(n));
    }

    let groups: Vec<Vec<usize>> = match spec.standardize_scope {
        StandardizeScope::Global => vec![(0..n).collect()],
        StandardizeScope::PerPrompt => {
            let mut by: BTreeMap<&S, Vec<usize>> = BTreeMap::new();
            for (i, s) in strata.iter().enumerate() {
                by.entry(s).or_default().push(i);
            }
            by.into_values().collect()
        }
    };

    let mut sum = vec![0.0; n];
    for (model_id, scores) in columns {
        for idx in &groups {
            let xs: Vec<f64> = idx.iter().map(|&i| scores[i]).collect();
            let z = standardize(&xs).map_err(|e| match e {
                ScoreError::ZeroVariance { .. } => ScoreError::ZeroVariance {
                    model_id: Some(model_id.clone()),
                },
                other => other,
            })?;
            for (&i, zi) in idx.iter().zip(z) {
                sum[i] += zi;
            }
        }
    }
    let m = spec.model_ids.len() as f64;
    Ok(sum.into_iter().map(|s| s / m).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ResponseRecord;
    use proptest::prelude::*;

    fn v(xs: &[f64]) -> EmbeddingVector {
        EmbeddingVector::new(xs.to_vec()).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn distance_examples() {
        assert_eq!(
            semantic_distance(&v(&[1., 0., 0.]), &v(&[1., 0., 0.])).unwrap(),
            0.0
        );
        assert!(close(
            semantic_distance(&v(&[1., 0.]), &v(&[0., 1.])).unwrap(),
            1.0,
            1e-15
        ));
        // dot 8, norms 3 and 3
        let d = semantic_distance(&v(&[1., 2., 2.]), &v(&[2., 1., 2.])).unwrap();
        assert!(close(d, 1.0 - 8.0 / 9.0, 1e-12));
        assert!(close(d, 0.1111, 1e-4));
    }

    #[test]
    fn distance_errors() {
        assert_eq!(
            semantic_distance(&v(&[1., 0.]), &v(&[1., 0., 0.])),
            Err(ScoreError::DimensionMismatch { left: 2, right: 3 })
        );
        assert_eq!(
            semantic_distance(&v(&[0., 0.]), &v(&[1., 0.])),
            Err(ScoreError::DegenerateVector { index: None })
        );
    }

    #[test]
    fn top_k_examples() {
        assert!(close(
            subject_originality(&[0.2, 0.9, 0.5, 0.7], 3).unwrap(),
            0.7,
            1e-12
        ));
        assert_eq!(subject_originality(&[0.4], 3).unwrap(), 0.4);
        assert!(close(
            subject_originality(&[0.6, 0.6, 0.6], 2).unwrap(),
            0.6,
            1e-15
        ));
        assert_eq!(subject_originality(&[], 3), Err(ScoreError::EmptyInput));
    }

    /// Unit vector in the plane at `angle` radians from the x axis.
    fn at(angle: f64) -> EmbeddingVector {
        v(&[angle.cos(), angle.sin()])
    }

    #[test]
    fn flexibility_examples() {
        assert_eq!(flexibility(&[v(&[1., 2.])]).unwrap(), 0.0);
        // distance 0.3 means cos = 0.7
        let a = 0.7f64.acos();
        assert!(close(flexibility(&[at(0.0), at(a)]).unwrap(), 0.3, 1e-12));
        let b = 0.5f64.acos();
        assert!(close(
            flexibility(&[at(0.0), at(a), at(a + b)]).unwrap(),
            0.8,
            1e-12
        ));
    }

    #[test]
    fn flexibility_reports_degenerate_order() {
        let err = flexibility(&[v(&[1., 0.]), v(&[0., 0.]), v(&[0., 1.])]).unwrap_err();
        assert_eq!(err, ScoreError::DegenerateVector { index: Some(2) });
    }

    #[test]
    fn fluency_counts_duplicates() {
        let mk = |o, t| ResponseRecord::new("s", "p", o, t, None).unwrap();
        let trial = SubjectTrial {
            subject_id: "s".into(),
            prompt_id: "p".into(),
            responses: vec![mk(1, "刷鞋"), mk(2, "刷鞋")],
        };
        assert_eq!(fluency(&trial), 2);
    }

    #[test]
    fn elaboration_examples() {
        assert_eq!(elaboration("用牙刷刷鞋"), 5);
        assert_eq!(elaboration(""), 0);
        assert_eq!(elaboration("铺 床单"), 3);
        assert_eq!(elaboration("用3D打印 mold"), 9);
        assert_eq!(elaboration_cjk("用3D打印 mold"), 3);
        assert_eq!(elaboration_cjk("㐀𠀀"), 2);
    }

    #[test]
    fn standardize_examples() {
        assert_eq!(standardize(&[1., 2., 3.]).unwrap(), vec![-1., 0., 1.]);
        assert_eq!(
            standardize(&[5., 5., 5.]),
            Err(ScoreError::ZeroVariance { model_id: None })
        );
        assert_eq!(standardize(&[5.]), Err(ScoreError::InsufficientData(1)));
    }

    fn models(pairs: &[(&str, &[f64])]) -> BTreeMap<String, Vec<f64>> {
        pairs
            .iter()
            .map(|(k, v)| (k.to_string(), v.to_vec()))
            .collect()
    }

    fn spec(ids: &[&str]) -> EnsembleSpec {
        EnsembleSpec::new(
            ids.iter().map(|s| s.to_string()).collect(),
            StandardizeScope::Global,
        )
        .unwrap()
    }

    #[test]
    fn ensemble_examples() {
        let out = ensemble(
            &models(&[("a", &[1., -1.]), ("b", &[-1., 1.])]),
            &spec(&["a", "b"]),
        )
        .unwrap();
        assert_eq!(out, vec![0., 0.]);
        let out = ensemble(&models(&[("a", &[3., 1., 2.])]), &spec(&["a"])).unwrap();
        assert_eq!(out, vec![1., -1., 0.]);
        let out = ensemble(
            &models(&[("a", &[1., 2., 3.]), ("b", &[10., 20., 30.])]),
            &spec(&["a", "b"]),
        )
        .unwrap();
        assert_eq!(out, vec![-1., 0., 1.]);
    }

    #[test]
    fn ensemble_errors() {
        let err = ensemble(
            &models(&[("a", &[1., 2.]), ("b", &[1., 2., 3.])]),
            &spec(&["a", "b"]),
        )
        .unwrap_err();
        assert!(matches!(err, ScoreError::AlignmentError(_)));
        let err = ensemble(
            &models(&[("a", &[1., 2.]), ("b", &[4., 4.])]),
            &spec(&["a", "b"]),
        )
        .unwrap_err();
        assert_eq!(
            err,
            ScoreError::ZeroVariance {
                model_id: Some("b".into())
            }
        );
        assert!(EnsembleSpec::new(vec!["a".into(), "a".into()], StandardizeScope::Global).is_err());
        assert!(EnsembleSpec::new(vec![], StandardizeScope::Global).is_err());
    }

    #[test]
    fn per_prompt_scope_standardizes_within_strata() {
        let scores = models(&[("a", &[1., 2., 3., 100., 200., 300.])]);
        let strata = ["p", "p", "p", "q", "q", "q"];
        let mut s = spec(&["a"]);
        s.standardize_scope = StandardizeScope::PerPrompt;
        let out = ensemble_stratified(&scores, &strata, &s).unwrap();
        assert_eq!(out, vec![-1., 0., 1., -1., 0., 1.]);
        s.standardize_scope = StandardizeScope::Global;
        let out = ensemble_stratified(&scores, &strata, &s).unwrap();
        assert!(out[0] < out[3]);
    }

    fn nonzero_vec(dim: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, dim)
            .prop_filter("nonzero", |x| x.iter().any(|v| v.abs() > 1e-3))
    }

    proptest! {
        #[test]
        fn originality_permutation_invariant_and_monotone(
            mut xs in prop::collection::vec(0.0f64..2.0, 1..12),
            k in 1usize..5,
            bump in 0.0f64..1.0,
            which in any::<prop::sample::Index>(),
        ) {
            let base = subject_originality(&xs, k).unwrap();
            let mut rev = xs.clone();
            rev.reverse();
            prop_assert!((subject_originality(&rev, k).unwrap() - base).abs() < 1e-12);
            let i = which.index(xs.len());
            xs[i] += bump;
            prop_assert!(subject_originality(&xs, k).unwrap() >= base - 1e-12);
        }

        #[test]
        fn distance_scale_invariant(
            (p, r) in (2usize..16).prop_flat_map(|d| (nonzero_vec(d), nonzero_vec(d))),
            a in 0.01f64..100.0,
            b in 0.01f64..100.0,
        ) {
            let d0 = semantic_distance(&v(&p), &v(&r)).unwrap();
            let ps: Vec<f64> = p.iter().map(|x| x * a).collect();
            let rs: Vec<f64> = r.iter().map(|x| x * b).collect();
            let d1 = semantic_distance(&v(&ps), &v(&rs)).unwrap();
            prop_assert!((d0 - d1).abs() <= 1e-9);
        }

        #[test]
        fn standardized_has_zero_mean_unit_sd(xs in prop::collection::vec(-1e3f64..1e3, 2..40)) {
            if let Ok(z) = standardize(&xs) {
                let n = z.len() as f64;
                let mean = z.iter().sum::<f64>() / n;
                let sd = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
                prop_assert!(mean.abs() < 1e-9);
                prop_assert!((sd - 1.0).abs() < 1e-9);
            }
        }
    }
}
