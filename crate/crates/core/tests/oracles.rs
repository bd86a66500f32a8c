//! Cross-checks of the distribution code against independent numerical
//! oracles built on `statrs`.

use dtscore::stats::dist::{nct_cdf, t_cdf, t_quantile};
use dtscore::stats::{power_two_sample, Tails};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal, StudentsT};

/// `P(T <= t)` for `T = (Z + delta) / sqrt(V / df)`, `V ~ chi2(df)`, by
/// composite Simpson integration over `V`.
fn nct_cdf_quadrature(t: f64, df: f64, delta: f64) -> f64 {
    let chi = ChiSquared::new(df).unwrap();
    let z = Normal::new(0.0, 1.0).unwrap();
    let upper = df + 60.0 * (2.0 * df).sqrt() + 60.0;
    let n = 200_000;
    let h = upper / n as f64;
    let f = |v: f64| {
        if v <= 0.0 {
            return 0.0;
        }
        chi.pdf(v) * z.cdf(t * (v / df).sqrt() - delta)
    };
    let mut acc = f(0.0) + f(upper);
    for i in 1..n {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    acc * h / 3.0
}

#[test]
fn noncentral_t_matches_quadrature() {
    let cases = [
        (1.5, 10.0, 1.0),
        (-0.5, 5.0, 0.7),
        (2.0, 30.0, -1.2),
        (1.66, 100.0, 3.54),
        (1.98, 126.0, 3.9),
        (-2.0, 8.0, -0.5),
        (0.3, 4.0, 2.0),
        (5.0, 60.0, 4.0),
    ];
    for (t, df, delta) in cases {
        let want = nct_cdf_quadrature(t, df, delta);
        let got = nct_cdf(t, df, delta);
        assert!(
            (got - want).abs() < 1e-8,
            "t={t} df={df} delta={delta}: {got} vs {want}"
        );
    }
}

#[test]
fn central_t_matches_statrs() {
    for &df in &[1.0, 2.5, 7.0, 30.0, 125.0, 348.0] {
        let oracle = StudentsT::new(0.0, 1.0, df).unwrap();
        for &t in &[-6.0, -2.1, -0.3, 0.0, 0.8, 1.96, 3.3, 10.0] {
            assert!(
                (t_cdf(t, df) - oracle.cdf(t)).abs() < 1e-10,
                "t={t} df={df}"
            );
        }
        for &p in &[0.025, 0.5, 0.95, 0.995] {
            assert!(
                (t_quantile(p, df) - oracle.inverse_cdf(p)).abs() < 1e-6,
                "p={p} df={df}"
            );
        }
    }
}

#[test]
fn power_matches_quadrature() {
    for (n, d, tails) in [
        (51u64, 0.5, Tails::One),
        (64, 0.5, Tails::Two),
        (14, 1.0, Tails::One),
    ] {
        let df = 2.0 * n as f64 - 2.0;
        let delta = d * (n as f64 / 2.0).sqrt();
        let oracle_t = StudentsT::new(0.0, 1.0, df).unwrap();
        let want = match tails {
            Tails::One => 1.0 - nct_cdf_quadrature(oracle_t.inverse_cdf(0.95), df, delta),
            Tails::Two => {
                let c = oracle_t.inverse_cdf(0.975);
                1.0 - nct_cdf_quadrature(c, df, delta) + nct_cdf_quadrature(-c, df, delta)
            }
        };
        let got = power_two_sample(n, d, 0.05, tails);
        assert!((got - want).abs() < 1e-6, "n={n}: {got} vs {want}");
    }
}
