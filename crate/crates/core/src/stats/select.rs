//! Model and prompt selection from a model × prompt × rater correlation table.
//!
//! A (model, prompt) cell passes when its correlation with every rater
//! strictly exceeds the threshold. The retained set is then the largest
//! rectangle of passing cells: a prompt subset and the models that pass on
//! all of those prompts. This is how a single failing cell (one rater below
//! threshold) removes a model entirely and a prompt few models handle well
//! drops out for all of them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::StatsError;

/// Largest prompt (or model) count searched exhaustively.
const MAX_EXHAUSTIVE: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CorrKey {
    pub model_id: String,
    pub prompt_id: String,
    pub rater_id: String,
}

impl CorrKey {
    pub fn new(
        model_id: impl Into<String>,
        prompt_id: impl Into<String>,
        rater_id: impl Into<String>,
    ) -> Self {
        Self {
            model_id: model_id.into(),
            prompt_id: prompt_id.into(),
            rater_id: rater_id.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Selection {
    pub threshold: f64,
    /// Cells whose correlation exceeds the threshold for every rater.
    pub passing: BTreeSet<(String, String)>,
    pub models: Vec<String>,
    pub prompts: Vec<String>,
    /// `models × prompts`.
    pub retained: BTreeSet<(String, String)>,
}

/// `NaN` correlations (undefined, e.g. zero variance) never pass.
pub fn select_models(
    corr_table: &BTreeMap<CorrKey, f64>,
    threshold: f64,
) -> Result<Selection, StatsError> {
    let mut raters_by_prompt: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    let mut cells: BTreeMap<(&str, &str), BTreeMap<&str, f64>> = BTreeMap::new();
    for (key, &r) in corr_table {
        raters_by_prompt
            .entry(&key.prompt_id)
            .or_default()
            .insert(&key.rater_id);
        cells
            .entry((&key.model_id, &key.prompt_id))
            .or_default()
            .insert(&key.rater_id, r);
    }

    let models: BTreeSet<&str> = cells.keys().map(|(m, _)| *m).collect();
    let prompts: BTreeSet<&str> = cells.keys().map(|(_, p)| *p).collect();

    let mut passing = BTreeSet::new();
    for &m in &models {
        for &p in &prompts {
            let raters = &raters_by_prompt[p];
            let row = cells.get(&(m, p)).ok_or_else(|| {
                StatsError::IncompleteTable(format!(
                    "no correlations for model {m:?}, prompt {p:?}"
                ))
            })?;
            if let Some(missing) = raters.iter().find(|r| !row.contains_key(*r)) {
                return Err(StatsError::IncompleteTable(format!(
                    "model {m:?}, prompt {p:?} lacks rater {missing:?}"
                )));
            }
            if row.values().all(|&r| r > threshold) {
                passing.insert((m.to_string(), p.to_string()));
            }
        }
    }

    let model_list: Vec<&str> = models.into_iter().collect();
    let prompt_list: Vec<&str> = prompts.into_iter().collect();
    let (best_models, best_prompts) = largest_rectangle(&model_list, &prompt_list, &passing)?;

    let retained = best_models
        .iter()
        .flat_map(|m| best_prompts.iter().map(move |p| (m.clone(), p.clone())))
        .collect();
    Ok(Selection {
        threshold,
        passing,
        models: best_models,
        prompts: best_prompts,
        retained,
    })
}

/// Enumerates subsets of the smaller axis. Ties prefer more prompts, then
/// the lexicographically first subset.
fn largest_rectangle(
    models: &[&str],
    prompts: &[&str],
    passing: &BTreeSet<(String, String)>,
) -> Result<(Vec<String>, Vec<String>), StatsError> {
    let passes = |m: &str, p: &str| passing.contains(&(m.to_string(), p.to_string()));
    let by_prompt = prompts.len() <= models.len();
    let (axis, other) = if by_prompt {
        (prompts, models)
    } else {
        (models, prompts)
    };
    if axis.len() > MAX_EXHAUSTIVE {
        return Err(StatsError::InvalidArgument(format!(
            "selection over {} models and {} prompts is too large",
            models.len(),
            prompts.len()
        )));
    }

    let mut best: Option<(usize, usize, Vec<&str>, Vec<&str>)> = None;
    for mask in 1u32..(1u32 << axis.len()) {
        let chosen: Vec<&str> = (0..axis.len())
            .filter(|i| mask & (1 << i) != 0)
            .map(|i| axis[i])
            .collect();
        let partners: Vec<&str> = other
            .iter()
            .copied()
            .filter(|o| {
                chosen.iter().all(|c| {
                    if by_prompt {
                        passes(o, c)
                    } else {
                        passes(c, o)
                    }
                })
            })
            .collect();
        if partners.is_empty() {
            continue;
        }
        let (ms, ps) = if by_prompt {
            (partners, chosen)
        } else {
            (chosen, partners)
        };
        let area = ms.len() * ps.len();
        let better = match &best {
            None => true,
            Some((a, np, bm, bp)) => {
                area > *a
                    || (area == *a
                        && (ps.len() > *np || (ps.len() == *np && (&ps, &ms) < (bp, bm))))
            }
        };
        if better {
            best = Some((area, ps.len(), ms, ps));
        }
    }
    Ok(match best {
        Some((_, _, ms, ps)) => (
            ms.into_iter().map(String::from).collect(),
            ps.into_iter().map(String::from).collect(),
        ),
        None => (Vec::new(), Vec::new()),
    })
}
