//! A priori power for the balanced two-sample t test.

use serde::{Deserialize, Serialize};

use super::dist::{nct_cdf, nct_sf, t_quantile};
use super::StatsError;

const N_CAP: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tails {
    One,
    Two,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerRequest {
    /// Cohen's d, > 0.
    pub d: f64,
    pub alpha: f64,
    pub power: f64,
    pub tails: Tails,
}

impl PowerRequest {
    pub fn validate(&self) -> Result<(), StatsError> {
        if !(self.d > 0.0 && self.d.is_finite()) {
            return Err(StatsError::InvalidArgument(format!(
                "d = {} must be positive",
                self.d
            )));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(StatsError::InvalidArgument(format!(
                "alpha = {} outside (0, 1)",
                self.alpha
            )));
        }
        if !(self.power > 0.0 && self.power < 1.0) {
            return Err(StatsError::InvalidArgument(format!(
                "power = {} outside (0, 1)",
                self.power
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerResult {
    pub n_per_group: u64,
    pub achieved_power: f64,
}

/// Power with `n` per group: df `2n - 2`, noncentrality `d * sqrt(n / 2)`.
pub fn power_two_sample(n: u64, d: f64, alpha: f64, tails: Tails) -> f64 {
    assert!(n >= 2, "need at least 2 per group");
    let nf = n as f64;
    let df = 2.0 * nf - 2.0;
    let delta = d * (nf / 2.0).sqrt();
    match tails {
        Tails::One => nct_sf(t_quantile(1.0 - alpha, df), df, delta),
        Tails::Two => {
            let crit = t_quantile(1.0 - alpha / 2.0, df);
            nct_sf(crit, df, delta) + nct_cdf(-crit, df, delta)
        }
    }
}

/// Smallest `n` per group whose power reaches `req.power`.
pub fn min_n_per_group(req: &PowerRequest) -> Result<PowerResult, StatsError> {
    req.validate()?;
    let power = |n| power_two_sample(n, req.d, req.alpha, req.tails);

    let first = power(2);
    if first >= req.power {
        return Ok(PowerResult {
            n_per_group: 2,
            achieved_power: first,
        });
    }
    // Bracket by doubling, then bisect; power is increasing in n.
    let mut lo = 2u64;
    let mut hi = 4u64;
    loop {
        if power(hi) >= req.power {
            break;
        }
        if hi >= N_CAP {
            return Err(StatsError::NotAttainable(N_CAP));
        }
        lo = hi;
        hi = (hi * 2).min(N_CAP);
    }
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if power(mid) >= req.power {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(PowerResult {
        n_per_group: hi,
        achieved_power: power(hi),
    })
}
