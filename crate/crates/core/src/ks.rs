//! One-sample Kolmogorov-Smirnov goodness-of-fit test.

/// Outcome of a KS test against a fully specified CDF.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KsOutcome {
    pub n: usize,
    pub statistic: f64,
    pub critical: f64,
}

impl KsOutcome {
    pub fn passes(&self) -> bool {
        self.statistic < self.critical
    }
}

/// sup |F_n(x) - F(x)|; sorts `samples` in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> f64 {
    samples.sort_unstable_by(f64::total_cmp);
    let n = samples.len() as f64;
    samples.iter().enumerate().fold(0.0f64, |d, (i, &x)| {
        let f = cdf(x);
        d.max(f - i as f64 / n).max((i + 1) as f64 / n - f)
    })
}

/// Critical value of D_n at significance `alpha`.
///
/// Asymptotic Kolmogorov quantile `sqrt(-ln(alpha/2) / 2)` with Stephens'
/// finite-sample correction: `c / (sqrt(n) + 0.12 + 0.11 / sqrt(n))`.
pub fn critical_value(n: usize, alpha: f64) -> f64 {
    let c = (-(alpha / 2.0).ln() / 2.0).sqrt();
    let rn = (n as f64).sqrt();
    c / (rn + 0.12 + 0.11 / rn)
}

/// KS test at the 1% level.
pub fn ks_test<F: Fn(f64) -> f64>(samples: &mut [f64], cdf: F) -> KsOutcome {
    let statistic = ks_statistic(samples, cdf);
    KsOutcome {
        n: samples.len(),
        statistic,
        critical: critical_value(samples.len(), 0.01),
    }
}
