use serde::{Deserialize, Serialize};

use super::dist::{nct_cdf, t_cdf, t_sf, t_two_tailed_p, Z_975};
use super::StatsError;

/// Alternative hypothesis, stated for group 1 relative to group 2.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alternative {
    #[default]
    TwoSided,
    /// mean1 > mean2
    Greater,
    /// mean1 < mean2
    Less,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DCiMethod {
    /// `d ± z * sqrt((n1 + n2) / (n1 n2) + d² / (2 (n1 + n2)))`
    #[default]
    Normal,
    /// Inverts the noncentral t distribution of the observed t.
    NoncentralT,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TTestOptions {
    pub alternative: Alternative,
    /// Welch-Satterthwaite instead of pooled variance.
    pub welch: bool,
    pub d_ci: DCiMethod,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub mean1: f64,
    pub sd1: f64,
    pub n1: usize,
    pub mean2: f64,
    pub sd2: f64,
    pub n2: usize,
    pub t_stat: f64,
    pub df: f64,
    pub p: f64,
    pub alternative: Alternative,
    pub welch: bool,
    /// Standardized mean difference over the pooled SD.
    pub cohens_d: f64,
    pub d_ci95: (f64, f64),
    pub d_ci_method: DCiMethod,
}

pub fn t_test_from_summary(
    mean1: f64,
    sd1: f64,
    n1: usize,
    mean2: f64,
    sd2: f64,
    n2: usize,
    opts: TTestOptions,
) -> Result<GroupComparison, StatsError> {
    if !(sd1 > 0.0 && sd2 > 0.0) {
        return Err(StatsError::ZeroVariance);
    }
    summary(mean1, sd1, n1, mean2, sd2, n2, opts)
}

/// Two-sample t test on raw observations.
pub fn t_test_pooled(
    group1: &[f64],
    group2: &[f64],
    opts: TTestOptions,
) -> Result<GroupComparison, StatsError> {
    let (n1, n2) = (group1.len(), group2.len());
    if n1 < 2 || n2 < 2 {
        return Err(StatsError::InsufficientData(format!(
            "need at least 2 observations per group, got {n1} and {n2}"
        )));
    }
    summary(
        super::mean(group1),
        super::sample_sd(group1),
        n1,
        super::mean(group2),
        super::sample_sd(group2),
        n2,
        opts,
    )
}

fn summary(
    mean1: f64,
    sd1: f64,
    n1: usize,
    mean2: f64,
    sd2: f64,
    n2: usize,
    opts: TTestOptions,
) -> Result<GroupComparison, StatsError> {
    if n1 < 2 || n2 < 2 {
        return Err(StatsError::InsufficientData(format!(
            "need at least 2 observations per group, got {n1} and {n2}"
        )));
    }
    let (f1, f2) = (n1 as f64, n2 as f64);
    let (v1, v2) = (sd1 * sd1, sd2 * sd2);
    let pooled_var = ((f1 - 1.0) * v1 + (f2 - 1.0) * v2) / (f1 + f2 - 2.0);
    if pooled_var.is_nan() || pooled_var <= 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let pooled_sd = pooled_var.sqrt();
    let diff = mean1 - mean2;

    let (t_stat, df) = if opts.welch {
        let (a, b) = (v1 / f1, v2 / f2);
        let df = (a + b).powi(2) / (a * a / (f1 - 1.0) + b * b / (f2 - 1.0));
        (diff / (a + b).sqrt(), df)
    } else {
        (
            diff / (pooled_sd * (1.0 / f1 + 1.0 / f2).sqrt()),
            f1 + f2 - 2.0,
        )
    };
    let p = match opts.alternative {
        Alternative::TwoSided => t_two_tailed_p(t_stat, df),
        Alternative::Greater => t_sf(t_stat, df),
        Alternative::Less => t_cdf(t_stat, df),
    };

    let d = diff / pooled_sd;
    let d_ci95 = match opts.d_ci {
        DCiMethod::Normal => {
            let se = ((f1 + f2) / (f1 * f2) + d * d / (2.0 * (f1 + f2))).sqrt();
            (d - Z_975 * se, d + Z_975 * se)
        }
        DCiMethod::NoncentralT => {
            let pooled_t = d / (1.0 / f1 + 1.0 / f2).sqrt();
            let pooled_df = f1 + f2 - 2.0;
            let scale = (1.0 / f1 + 1.0 / f2).sqrt();
            let lo = noncentrality_for(pooled_t, pooled_df, 0.975);
            let hi = noncentrality_for(pooled_t, pooled_df, 0.025);
            (lo * scale, hi * scale)
        }
    };

    Ok(GroupComparison {
        mean1,
        sd1,
        n1,
        mean2,
        sd2,
        n2,
        t_stat,
        df,
        p,
        alternative: opts.alternative,
        welch: opts.welch,
        cohens_d: d,
        d_ci95,
        d_ci_method: opts.d_ci,
    })
}

/// The noncentrality `δ` with `P(T <= t | δ) = target`; the CDF is
/// decreasing in `δ`.
fn noncentrality_for(t: f64, df: f64, target: f64) -> f64 {
    let mut lo = t - 10.0;
    let mut hi = t + 10.0;
    while nct_cdf(t, df, lo) < target {
        lo -= 10.0;
    }
    while nct_cdf(t, df, hi) > target {
        hi += 10.0;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if nct_cdf(t, df, mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_sided() -> TTestOptions {
        TTestOptions::default()
    }

    #[test]
    fn identical_groups() {
        let g = [1.0, 2.0, 3.0, 4.0];
        let r = t_test_pooled(&g, &g, two_sided()).unwrap();
        assert_eq!(r.t_stat, 0.0);
        assert_eq!(r.cohens_d, 0.0);
        assert!((r.p - 1.0).abs() < 1e-12);
        assert_eq!(r.df, 6.0);
    }

    #[test]
    fn creative_vs_common_summary() {
        let r = t_test_from_summary(0.31, 0.56, 61, -0.29, 0.93, 66, two_sided()).unwrap();
        // pooled-variance hand computation
        assert!((r.t_stat - 4.360243920528241).abs() < 1e-9);
        assert!((r.cohens_d - 0.7744185734482516).abs() < 1e-9);
        assert!((r.p - 2.6863107838075817e-05).abs() < 1e-12);
        assert_eq!(r.df, 125.0);
    }

    #[test]
    fn flexible_vs_persistent_summary() {
        let r = t_test_from_summary(0.22, 0.93, 68, -0.22, 0.66, 67, two_sided()).unwrap();
        assert!((r.t_stat - 3.1659144958104917).abs() < 1e-9);
        assert!((r.cohens_d - 0.5449720233283966).abs() < 1e-9);
        assert!((r.p - 0.0019170982604682838).abs() < 1e-10);
    }

    #[test]
    fn one_sided_p_follows_declared_direction() {
        let g1 = [3.0, 4.0, 5.0, 6.0];
        let g2 = [1.0, 2.0, 2.5, 3.0];
        let two = t_test_pooled(&g1, &g2, two_sided()).unwrap();
        let greater = t_test_pooled(
            &g1,
            &g2,
            TTestOptions {
                alternative: Alternative::Greater,
                ..two_sided()
            },
        )
        .unwrap();
        let less = t_test_pooled(
            &g1,
            &g2,
            TTestOptions {
                alternative: Alternative::Less,
                ..two_sided()
            },
        )
        .unwrap();
        assert!((greater.p - two.p / 2.0).abs() < 1e-14);
        assert!((less.p - (1.0 - two.p / 2.0)).abs() < 1e-12);
    }

    #[test]
    fn swapping_groups_negates() {
        let g1 = [0.3, 1.2, 0.8, 2.0, 1.1];
        let g2 = [0.1, -0.4, 0.9, 0.2];
        let a = t_test_pooled(&g1, &g2, two_sided()).unwrap();
        let b = t_test_pooled(&g2, &g1, two_sided()).unwrap();
        assert!((a.t_stat + b.t_stat).abs() < 1e-12);
        assert!((a.cohens_d + b.cohens_d).abs() < 1e-12);
        assert!((a.p - b.p).abs() < 1e-12);
    }

    #[test]
    fn welch_matches_pooled_for_equal_designs() {
        let w = t_test_from_summary(
            1.0,
            2.0,
            30,
            0.0,
            2.0,
            30,
            TTestOptions {
                welch: true,
                ..two_sided()
            },
        )
        .unwrap();
        let p = t_test_from_summary(1.0, 2.0, 30, 0.0, 2.0, 30, two_sided()).unwrap();
        assert!((w.t_stat - p.t_stat).abs() < 1e-12);
        assert!((w.df - 58.0).abs() < 1e-9);
    }

    #[test]
    fn d_intervals() {
        let normal = t_test_from_summary(0.31, 0.56, 61, -0.29, 0.93, 66, two_sided()).unwrap();
        let (lo, hi) = normal.d_ci95;
        assert!(lo < normal.cohens_d && normal.cohens_d < hi);
        assert!((hi - normal.cohens_d - (normal.cohens_d - lo)).abs() < 1e-12);

        let nct = t_test_from_summary(
            0.31,
            0.56,
            61,
            -0.29,
            0.93,
            66,
            TTestOptions {
                d_ci: DCiMethod::NoncentralT,
                ..two_sided()
            },
        )
        .unwrap();
        let (lo, hi) = nct.d_ci95;
        let scale = (1.0 / 61.0 + 1.0 / 66.0f64).sqrt();
        assert!((nct_cdf(nct.t_stat, 125.0, lo / scale) - 0.975).abs() < 1e-9);
        assert!((nct_cdf(nct.t_stat, 125.0, hi / scale) - 0.025).abs() < 1e-9);
        // scipy.stats.nct inverted with brentq
        assert!((lo - 0.4118998802708096).abs() < 1e-6);
        assert!((hi - 1.1340505271578725).abs() < 1e-6);
    }

    #[test]
    fn degenerate_variance() {
        assert_eq!(
            t_test_pooled(&[1.0, 1.0], &[2.0, 2.0], two_sided()),
            Err(StatsError::ZeroVariance)
        );
        assert_eq!(
            t_test_from_summary(1.0, 0.0, 10, 0.0, 1.0, 10, two_sided()),
            Err(StatsError::ZeroVariance)
        );
    }
}
