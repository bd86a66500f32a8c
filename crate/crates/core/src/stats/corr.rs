use serde::{Deserialize, Serialize};

use super::dist::{normal_sf, t_two_tailed_p, Z_975};
use super::StatsError;

/// Product-moment correlation with its significance test and Fisher-z CI.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrResult {
    pub r: f64,
    pub n: usize,
    pub t_stat: f64,
    pub p_two_tailed: f64,
    pub ci95: (f64, f64),
}

impl CorrResult {
    /// Test statistics for a known `r` at sample size `n`.
    pub fn from_r(r: f64, n: usize) -> Result<Self, StatsError> {
        if n < 3 {
            return Err(StatsError::InsufficientData(format!(
                "need n >= 3, got {n}"
            )));
        }
        if !(-1.0..=1.0).contains(&r) {
            return Err(StatsError::InvalidArgument(format!(
                "r = {r} outside [-1, 1]"
            )));
        }
        let df = (n - 2) as f64;
        if r.abs() == 1.0 {
            return Ok(Self {
                r,
                n,
                t_stat: r * f64::INFINITY,
                p_two_tailed: 0.0,
                ci95: (r, r),
            });
        }
        let t_stat = r * df.sqrt() / (1.0 - r * r).sqrt();
        let ci95 = if n > 3 {
            let z = r.atanh();
            let half = Z_975 / ((n - 3) as f64).sqrt();
            ((z - half).tanh(), (z + half).tanh())
        } else {
            (-1.0, 1.0)
        };
        Ok(Self {
            r,
            n,
            t_stat,
            p_two_tailed: t_two_tailed_p(t_stat, df),
            ci95,
        })
    }
}

/// Two-tailed p of a correlation `r` at sample size `n`.
pub fn corr_p_value(r: f64, n: usize) -> Result<f64, StatsError> {
    CorrResult::from_r(r, n).map(|c| c.p_two_tailed)
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<CorrResult, StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::AlignmentError(format!(
            "{} vs {} values",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(StatsError::InsufficientData(format!(
            "need n >= 3, got {n}"
        )));
    }
    let mx = super::mean(x);
    let my = super::mean(y);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::ZeroVariance);
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    CorrResult::from_r(r, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZTest {
    pub z: f64,
    pub p_two_tailed: f64,
}

impl ZTest {
    fn new(z: f64) -> Self {
        Self {
            z,
            p_two_tailed: (2.0 * normal_sf(z.abs())).min(1.0),
        }
    }
}

fn check_r(r: f64) -> Result<(), StatsError> {
    if r.is_nan() || r.abs() > 1.0 {
        return Err(StatsError::InvalidArgument(format!(
            "r = {r} outside [-1, 1]"
        )));
    }
    if r.abs() == 1.0 {
        return Err(StatsError::DegenerateCorrelation);
    }
    Ok(())
}

/// Fisher z test for correlations from two independent samples.
pub fn fisher_z_independent(r1: f64, n1: usize, r2: f64, n2: usize) -> Result<ZTest, StatsError> {
    check_r(r1)?;
    check_r(r2)?;
    if n1 < 4 || n2 < 4 {
        return Err(StatsError::InsufficientData(
            "need n >= 4 per sample".into(),
        ));
    }
    let se = (1.0 / (n1 - 3) as f64 + 1.0 / (n2 - 3) as f64).sqrt();
    Ok(ZTest::new((r1.atanh() - r2.atanh()) / se))
}

/// Steiger's Z for two dependent correlations sharing variable 3:
/// compares `r13` with `r23` given `r12`, from one sample of size `n`.
/// Uses the pooled `(r13 + r23) / 2` in the asymptotic covariance.
pub fn steiger_z_dependent(r13: f64, r23: f64, r12: f64, n: usize) -> Result<ZTest, StatsError> {
    check_r(r13)?;
    check_r(r23)?;
    check_r(r12)?;
    if n < 4 {
        return Err(StatsError::InsufficientData("need n >= 4".into()));
    }
    let det = 1.0 - r12 * r12 - r13 * r13 - r23 * r23 + 2.0 * r12 * r13 * r23;
    if det < -1e-12 {
        return Err(StatsError::InvalidCorrelationMatrix);
    }
    let rbar = 0.5 * (r13 + r23);
    let rbar2 = rbar * rbar;
    let psi = r12 * (1.0 - 2.0 * rbar2) - 0.5 * rbar2 * (1.0 - 2.0 * rbar2 - r12 * r12);
    let c = psi / (1.0 - rbar2).powi(2);
    let denom = 2.0 - 2.0 * c;
    if denom <= 0.0 {
        return Err(StatsError::InvalidCorrelationMatrix);
    }
    Ok(ZTest::new(
        (r13.atanh() - r23.atanh()) * ((n - 3) as f64).sqrt() / denom.sqrt(),
    ))
}
