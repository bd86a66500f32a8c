use serde::{Deserialize, Serialize};

use super::StatsError;

/// Two-way random effects, absolute agreement, average of `k` raters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IccResult {
    pub icc2k: f64,
    pub ms_rows: f64,
    pub ms_cols: f64,
    pub ms_error: f64,
    pub n_targets: usize,
    pub k_raters: usize,
}

/// ICC(2,k) for an `n_targets x k_raters` matrix (rows are targets).
///
/// `(MSR - MSE) / (MSR + (MSC - MSE) / n)`.
pub fn icc_2k(ratings: &[Vec<f64>]) -> Result<IccResult, StatsError> {
    let n = ratings.len();
    let k = ratings.first().map_or(0, Vec::len);
    if n < 2 || k < 2 {
        return Err(StatsError::InsufficientData(format!(
            "need at least 2 targets and 2 raters, got {n} x {k}"
        )));
    }
    if ratings
        .iter()
        .any(|row| row.len() != k || row.iter().any(|v| !v.is_finite()))
    {
        return Err(StatsError::IncompleteMatrix);
    }

    let (nf, kf) = (n as f64, k as f64);
    let grand = ratings.iter().flatten().sum::<f64>() / (nf * kf);
    let row_means: Vec<f64> = ratings.iter().map(|r| r.iter().sum::<f64>() / kf).collect();
    let col_means: Vec<f64> = (0..k)
        .map(|j| ratings.iter().map(|r| r[j]).sum::<f64>() / nf)
        .collect();

    let ss_rows = kf * row_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_cols = nf * col_means.iter().map(|m| (m - grand).powi(2)).sum::<f64>();
    let ss_total: f64 = ratings.iter().flatten().map(|v| (v - grand).powi(2)).sum();
    let ss_error = (ss_total - ss_rows - ss_cols).max(0.0);

    let ms_rows = ss_rows / (nf - 1.0);
    let ms_cols = ss_cols / (kf - 1.0);
    let ms_error = ss_error / ((nf - 1.0) * (kf - 1.0));

    let denom = ms_rows + (ms_cols - ms_error) / nf;
    if denom.abs() <= 1e-12 * ss_total.max(f64::MIN_POSITIVE) || ss_total == 0.0 {
        return Err(StatsError::DegenerateAnova);
    }
    Ok(IccResult {
        icc2k: (ms_rows - ms_error) / denom,
        ms_rows,
        ms_cols,
        ms_error,
        n_targets: n,
        k_raters: k,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_anova_example() {
        let r = icc_2k(&[vec![1., 2.], vec![3., 4.], vec![5., 6.]]).unwrap();
        assert!((r.ms_rows - 8.0).abs() < 1e-12);
        assert!((r.ms_cols - 1.5).abs() < 1e-12);
        assert!(r.ms_error.abs() < 1e-12);
        assert!((r.icc2k - 8.0 / 8.5).abs() < 1e-12);
    }

    #[test]
    fn identical_raters_give_one() {
        let r = icc_2k(&[vec![1., 1., 1.], vec![3., 3., 3.], vec![2., 2., 2.]]).unwrap();
        assert!((r.icc2k - 1.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(
            icc_2k(&[vec![2., 2.], vec![2., 2.]]),
            Err(StatsError::DegenerateAnova)
        );
        assert_eq!(
            icc_2k(&[vec![1., 2.], vec![3.]]),
            Err(StatsError::IncompleteMatrix)
        );
        assert_eq!(
            icc_2k(&[vec![1., f64::NAN], vec![3., 4.]]),
            Err(StatsError::IncompleteMatrix)
        );
        assert!(matches!(
            icc_2k(&[vec![1.], vec![3.]]),
            Err(StatsError::InsufficientData(_))
        ));
    }

    #[test]
    fn shift_invariant() {
        let m = vec![
            vec![1., 2., 0.],
            vec![3., 4., 4.],
            vec![0., 3., 1.],
            vec![4., 4., 3.],
        ];
        let shifted: Vec<Vec<f64>> = m
            .iter()
            .map(|r| r.iter().map(|v| v + 17.0).collect())
            .collect();
        let a = icc_2k(&m).unwrap().icc2k;
        let b = icc_2k(&shifted).unwrap().icc2k;
        assert!((a - b).abs() < 1e-12);
    }
}
