//! Exact per-beam SINR law and its extreme-value machinery.
//!
//! For user k with effective SNRs `rho_0` (serving) and `rho_b` (interferers),
//! the per-beam SINR has tail
//!
//! ```text
//! T(x) = 1 - F(x) = exp(-x/rho_0) / [ (1+x)^(M-1) * prod_b (1 + x rho_b/rho_0)^M ]
//! ```
//!
//! which is the interference MGF `Psi(tau) = (1-rho_0 tau)^-(M-1) prod_b
//! (1-rho_b tau)^-M` evaluated at `tau = -x/rho_0`, times `exp(-x/rho_0)`.
//! Everything here works on `log T`, which stays finite long after `T`
//! underflows.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::scenario::{Scenario, UserChannelProfile};

/// Relative tolerance under which two pole locations are merged.
pub const POLE_MERGE_RTOL: f64 = 1e-12;

/// Per-beam SINR distribution of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrDistribution {
    num_antennas: usize,
    rho_serving: f64,
    rho_interferers: Vec<f64>,
    /// rho_0 / rho_b, the pole locations contributed by the interferers.
    ratios: Vec<f64>,
}

/// A pole `-location` of the rational part of `T`, with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Pole {
    pub location: f64,
    pub multiplicity: u32,
}

/// Solution of `1 - F(w) = 1/K0`, bracketed by the crossings of the bounds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LevelCrossing {
    pub k0: f64,
    pub w: f64,
    pub w_lb: f64,
    pub w_ub: f64,
    /// `|1 - F(w) - 1/K0|`.
    pub residual: f64,
}

/// Large-K0 expansions of the level crossing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AsymptoticLevel {
    /// `rho_0 ln K0 - rho_0 ((J+1)M - 1) ln ln K0`.
    pub two_term: f64,
    /// Expansion of the upper bracket, carries `ln(rho_min ln K0)`.
    pub ub_expansion: f64,
    /// Expansion of the lower bracket, carries `ln(rho_max ln K0)`.
    pub lb_expansion: f64,
}

fn check_x(x: f64) -> Result<()> {
    if x >= 0.0 && !x.is_nan() {
        Ok(())
    } else {
        Err(Error::domain("SINR argument x", x))
    }
}

impl SinrDistribution {
    pub fn new(num_antennas: usize, rho_serving: f64, rho_interferers: Vec<f64>) -> Result<Self> {
        let profile = UserChannelProfile::new(0, rho_serving, rho_interferers);
        Scenario {
            num_antennas,
            users: vec![profile],
        }
        .validate()
        .map(|s| Self::from_profile(s.num_antennas, &s.users[0]))
    }

    /// Assumes `profile` comes from a validated scenario.
    pub fn from_profile(num_antennas: usize, profile: &UserChannelProfile) -> Self {
        let ratios = profile
            .rho_interferers
            .iter()
            .map(|r| profile.rho_serving / r)
            .collect();
        Self {
            num_antennas,
            rho_serving: profile.rho_serving,
            rho_interferers: profile.rho_interferers.clone(),
            ratios,
        }
    }

    /// One distribution per user, in user order.
    pub fn for_scenario(s: &Scenario) -> Vec<Self> {
        s.users
            .iter()
            .map(|u| Self::from_profile(s.num_antennas, u))
            .collect()
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn rho_serving(&self) -> f64 {
        self.rho_serving
    }

    pub fn rho_interferers(&self) -> &[f64] {
        &self.rho_interferers
    }

    /// `rho_0 / rho_b` for every interferer.
    pub fn ratios(&self) -> &[f64] {
        &self.ratios
    }

    /// `(J+1)M - 1`, the number of linear factors in the tail denominator.
    pub fn tail_order(&self) -> u32 {
        ((self.rho_interferers.len() + 1) * self.num_antennas - 1) as u32
    }

    fn m(&self) -> f64 {
        self.num_antennas as f64
    }

    /// Smallest and largest of `rho_0, rho_1, ..., rho_J`.
    pub fn rho_extremes(&self) -> (f64, f64) {
        self.rho_interferers
            .iter()
            .fold((self.rho_serving, self.rho_serving), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            })
    }

    /// Distinct poles of `1/((x+1)^(M-1) prod_b (x + rho_0/rho_b)^M)`;
    /// locations closer than [`POLE_MERGE_RTOL`] are merged and their
    /// multiplicities summed.
    pub fn poles(&self) -> Vec<Pole> {
        let mut poles: Vec<Pole> = Vec::new();
        let intracell = (self.num_antennas - 1) as u32;
        let candidates = std::iter::once((1.0, intracell))
            .chain(self.ratios.iter().map(|&c| (c, self.num_antennas as u32)));
        // the unit pole is seeded even when M = 1 so a ratio within tolerance
        // of 1 lands exactly on it
        for (location, multiplicity) in candidates {
            match poles.iter_mut().find(|p| {
                (p.location - location).abs() <= POLE_MERGE_RTOL * p.location.max(location)
            }) {
                Some(p) => p.multiplicity += multiplicity,
                None => poles.push(Pole {
                    location,
                    multiplicity,
                }),
            }
        }
        poles.retain(|p| p.multiplicity > 0);
        poles
    }

    /// `ln(1 - F(x))` for `x >= 0` (no domain check).
    pub fn log_tail(&self, x: f64) -> f64 {
        let m = self.m();
        let mut v = -x / self.rho_serving;
        if self.num_antennas > 1 {
            v -= (m - 1.0) * x.ln_1p();
        }
        for &c in &self.ratios {
            v -= m * (x / c).ln_1p();
        }
        v
    }

    /// `-d/dx ln T(x) = f(x) / (1 - F(x))`.
    pub fn hazard(&self, x: f64) -> f64 {
        let m = self.m();
        let mut h = 1.0 / self.rho_serving + (m - 1.0) / (1.0 + x);
        for &c in &self.ratios {
            h += m / (x + c);
        }
        h
    }

    /// `d/dx` of [`Self::hazard`].
    fn hazard_slope(&self, x: f64) -> f64 {
        let m = self.m();
        let mut s = -(m - 1.0) / ((1.0 + x) * (1.0 + x));
        for &c in &self.ratios {
            s -= m / ((x + c) * (x + c));
        }
        s
    }

    pub fn cdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(-self.log_tail(x).exp_m1())
    }

    pub fn pdf(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(self.log_tail(x).exp() * self.hazard(x))
    }

    /// MGF of the interference-plus-intracell term.
    ///
    /// Defined for `tau < 1/rho` over every factor with nonzero exponent.
    pub fn mgf_interference(&self, tau: f64) -> Result<f64> {
        let m = self.m();
        let mut log = 0.0;
        let factors = std::iter::once((self.rho_serving, m - 1.0))
            .chain(self.rho_interferers.iter().map(|&r| (r, m)));
        for (rho, exponent) in factors {
            if exponent == 0.0 {
                continue;
            }
            let base = 1.0 - rho * tau;
            if !(base > 0.0) {
                return Err(Error::domain("MGF argument tau (at or beyond a pole)", tau));
            }
            log -= exponent * base.ln();
        }
        Ok(log.exp())
    }

    fn bound_log_tail(&self, x: f64, rho: f64) -> f64 {
        -x / self.rho_serving - self.tail_order() as f64 * (rho / self.rho_serving * x).ln_1p()
    }

    /// `(F_lb(x), F_ub(x))` with `F_lb <= F <= F_ub`.
    ///
    /// Both replace every linear factor `(1 + x rho_b / rho_0)` of the tail by a
    /// common one: `rho_min` for the lower bound, `rho_max` for the upper.
    pub fn cdf_bounds(&self, x: f64) -> Result<(f64, f64)> {
        check_x(x)?;
        let (lo, hi) = self.rho_extremes();
        Ok((
            -self.bound_log_tail(x, lo).exp_m1(),
            -self.bound_log_tail(x, hi).exp_m1(),
        ))
    }

    /// Growth function `g = (1 - F) / f = 1 / hazard`.
    pub fn growth_function(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        Ok(1.0 / self.hazard(x))
    }

    /// `g'(x)`; tends to zero for distributions attracted to the Gumbel law.
    pub fn gumbel_criterion(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let h = self.hazard(x);
        Ok(-self.hazard_slope(x) / (h * h))
    }

    /// Von Mises ratio `(F - 1) f' / f^2`, equal to `1 - h'/h^2`.
    pub fn von_mises_ratio(&self, x: f64) -> Result<f64> {
        check_x(x)?;
        let h = self.hazard(x);
        Ok(1.0 - self.hazard_slope(x) / (h * h))
    }

    /// Smallest `x` with `log_tail(x) <= target` (target < 0), by bisection.
    pub fn tail_quantile(&self, target: f64) -> f64 {
        bisect_decreasing(|x| self.log_tail(x), target, self.search_hi(-target))
    }

    fn search_hi(&self, log_k: f64) -> f64 {
        let order = ((self.rho_interferers.len() + 1) * self.num_antennas) as f64;
        self.rho_serving * (log_k + order * log_k.ln_1p()) + 64.0
    }

    /// Solves `1 - F(w) = 1/K0`.
    pub fn solve_level(&self, k0: f64) -> Result<LevelCrossing> {
        if !(k0 >= 2.0) || !k0.is_finite() {
            return Err(Error::domain("K0 (need K0 >= 2)", k0));
        }
        let target = -k0.ln();
        let hi = self.search_hi(-target);
        let (rho_min, rho_max) = self.rho_extremes();
        // the lower CDF bound has the heavier tail, so it crosses later
        let w_ub = bisect_decreasing(|x| self.bound_log_tail(x, rho_min), target, hi);
        let w_lb = bisect_decreasing(|x| self.bound_log_tail(x, rho_max), target, hi);
        let w = bisect_on(|x| self.log_tail(x), target, w_lb, w_ub);
        let residual = (self.log_tail(w).exp() - 1.0 / k0).abs();
        Ok(LevelCrossing {
            k0,
            w,
            w_lb,
            w_ub,
            residual,
        })
    }

    pub fn asymptotic_level(&self, k0: f64) -> Result<AsymptoticLevel> {
        if !(k0 >= 16.0) || !k0.is_finite() {
            return Err(Error::domain("K0 (need K0 >= 16)", k0));
        }
        let rho0 = self.rho_serving;
        let n = self.tail_order() as f64;
        let l = k0.ln();
        let (rho_min, rho_max) = self.rho_extremes();
        Ok(AsymptoticLevel {
            two_term: rho0 * l - rho0 * n * l.ln(),
            ub_expansion: rho0 * l - rho0 * n * (rho_min * l).ln(),
            lb_expansion: rho0 * l - rho0 * n * (rho_max * l).ln(),
        })
    }
}

/// Bisection for the crossing of a decreasing function with `target`,
/// searching `[0, hi]` and doubling `hi` until it brackets.
fn bisect_decreasing<F: Fn(f64) -> f64>(f: F, target: f64, mut hi: f64) -> f64 {
    while f(hi) > target {
        hi *= 2.0;
    }
    bisect_on(f, target, 0.0, hi)
}

/// Bisection on `[lo, hi]` until the bracket cannot shrink further.
fn bisect_on<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64) -> f64 {
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint with the smaller residual
    if (f(lo) - target).abs() <= (f(hi) - target).abs() {
        lo
    } else {
        hi
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_to_infinity, Tolerance};
    use proptest::prelude::*;

    fn dist(m: usize, rho0: f64, rho: &[f64]) -> SinrDistribution {
        SinrDistribution::new(m, rho0, rho.to_vec()).unwrap()
    }

    fn configs() -> Vec<SinrDistribution> {
        vec![
            dist(1, 1.0, &[]),
            dist(2, 1.0, &[0.5]),
            dist(2, 1.0, &[0.5, 2.0]),
            dist(4, 3.0, &[0.2, 1.0, 7.0]),
            dist(3, 0.3, &[0.3]),
        ]
    }

    #[test]
    fn cdf_reference_values() {
        for d in configs() {
            assert_eq!(d.cdf(0.0).unwrap(), 0.0);
        }
        let exp = dist(1, 1.0, &[]);
        assert!((exp.cdf(1.0).unwrap() - (1.0 - (-1.0f64).exp())).abs() < 1e-15);
        // 1 - e^-1 * 2^2 / (2 * 3^2)
        let d = dist(2, 1.0, &[0.5]);
        let expected = 1.0 - (-1.0f64).exp() * 4.0 / 18.0;
        assert!((d.cdf(1.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.918_249).abs() < 1e-6);
    }

    #[test]
    fn cdf_rejects_negative() {
        let d = dist(2, 1.0, &[0.5]);
        assert!(d.cdf(-0.1).is_err());
        assert!(d.pdf(-1.0).is_err());
        assert!(d.cdf(f64::NAN).is_err());
        assert!(d.cdf_bounds(-1.0).is_err());
    }

    #[test]
    fn cdf_small_x_has_no_cancellation() {
        let d = dist(1, 1.0, &[]);
        let x = 1e-12;
        let rel = (d.cdf(x).unwrap() - x * (1.0 - x / 2.0)).abs() / x;
        assert!(rel < 1e-15);
    }

    #[test]
    fn pdf_reference_and_finite_difference() {
        let exp = dist(1, 1.0, &[]);
        assert_eq!(exp.pdf(0.0).unwrap(), 1.0);
        assert!((exp.pdf(2.0).unwrap() - (-2.0f64).exp()).abs() < 1e-16);
        for d in configs() {
            let x = 0.7;
            let h = 1e-5;
            let fd = (d.cdf(x + h).unwrap() - d.cdf(x - h).unwrap()) / (2.0 * h);
            let pdf = d.pdf(x).unwrap();
            assert!((fd - pdf).abs() <= 1e-6 * pdf, "{d:?}: {fd} vs {pdf}");
            assert!(d.pdf(1e4).unwrap() < 1e-300);
        }
    }

    #[test]
    fn pdf_integrates_to_one() {
        for d in configs() {
            let q = integrate_to_infinity(
                |x| d.pdf(x).unwrap(),
                0.0,
                d.rho_serving().min(1.0),
                Tolerance::new(0.0, 1e-12),
            );
            assert!((q.value - 1.0).abs() < 1e-8, "{d:?}: {}", q.value);
        }
    }

    #[test]
    fn mgf_reference_values() {
        let d = dist(2, 1.0, &[0.5]);
        assert_eq!(d.mgf_interference(0.0).unwrap(), 1.0);
        let d = dist(1, 1.0, &[2.0]);
        assert!((d.mgf_interference(-1.0).unwrap() - 1.0 / 3.0).abs() < 1e-16);
        assert!(d.mgf_interference(0.5).is_err());
        assert!(d.mgf_interference(0.6).is_err());
        assert!(d.mgf_interference(0.49).is_ok());
        // M = 1 drops the rho_0 factor entirely
        let d = dist(1, 10.0, &[1.0]);
        assert!(d.mgf_interference(0.5).is_ok());
    }

    #[test]
    fn tail_equals_exp_times_mgf() {
        let mut x = 0.0;
        for d in configs() {
            for i in 0..20 {
                x = (x * 1.37 + 0.113 * i as f64) % 25.0;
                let tail = d.log_tail(x).exp();
                let rho0 = d.rho_serving();
                let via_mgf = (-x / rho0).exp() * d.mgf_interference(-x / rho0).unwrap();
                assert!((tail - via_mgf).abs() <= 1e-12 * tail, "{x}");
            }
        }
    }

    #[test]
    fn bounds_reference_cases() {
        let d = dist(2, 1.0, &[0.5, 2.0]);
        assert_eq!(d.cdf_bounds(0.0).unwrap(), (0.0, 0.0));
        let (lb, ub) = d.cdf_bounds(1.0).unwrap();
        let f = d.cdf(1.0).unwrap();
        assert!(lb < f && f < ub, "{lb} {f} {ub}");
        for i in 1..=100 {
            let x = i as f64 * 0.2;
            let (lb, ub) = d.cdf_bounds(x).unwrap();
            let f = d.cdf(x).unwrap();
            assert!(lb <= f && f <= ub);
        }
        let homo = dist(3, 0.7, &[0.7, 0.7]);
        for x in [0.1, 1.0, 5.0] {
            let (lb, ub) = homo.cdf_bounds(x).unwrap();
            let f = homo.cdf(x).unwrap();
            assert!((lb - f).abs() < 1e-15 && (ub - f).abs() < 1e-15);
        }
    }

    #[test]
    fn growth_function_cases() {
        let exp = dist(1, 3.0, &[]);
        for x in [0.0, 1.0, 1e3] {
            assert_eq!(exp.growth_function(x).unwrap(), 3.0);
        }
        let d = dist(2, 1.0, &[1.0]);
        assert!((d.growth_function(0.0).unwrap() - 0.25).abs() < 1e-16);
        for d in configs() {
            let x = 1.3;
            // 1 - cdf loses digits as cdf approaches 1
            let ratio = (1.0 - d.cdf(x).unwrap()) / d.pdf(x).unwrap();
            assert!((ratio - d.growth_function(x).unwrap()).abs() < 1e-10 * ratio);
            let far = d.growth_function(1e12).unwrap();
            assert!((far - d.rho_serving()).abs() < 1e-9 * d.rho_serving());
        }
    }

    #[test]
    fn gumbel_criterion_cases() {
        let exp = dist(1, 2.0, &[]);
        for x in [0.0, 1.0, 1e6] {
            assert_eq!(exp.gumbel_criterion(x).unwrap(), 0.0);
        }
        let d = dist(2, 1.0, &[0.5]);
        assert!(d.gumbel_criterion(1e6).unwrap().abs() < 1e-9);
        for d in configs() {
            let x = 5.0;
            let h = 1e-4;
            let fd =
                (d.growth_function(x + h).unwrap() - d.growth_function(x - h).unwrap()) / (2.0 * h);
            let g = d.gumbel_criterion(x).unwrap();
            assert!((fd - g).abs() <= 1e-6 * g.abs().max(1e-300), "{fd} {g}");
            let vm = d.von_mises_ratio(x).unwrap();
            assert!((vm - 1.0 - g).abs() < 1e-14);
        }
    }

    #[test]
    fn von_mises_matches_numeric_derivatives() {
        let d = dist(2, 1.0, &[0.5]);
        let x = 3.0;
        let h = 1e-4;
        let fprime = (d.pdf(x + h).unwrap() - d.pdf(x - h).unwrap()) / (2.0 * h);
        let f = d.pdf(x).unwrap();
        let numeric = (d.cdf(x).unwrap() - 1.0) * fprime / (f * f);
        assert!((numeric - d.von_mises_ratio(x).unwrap()).abs() < 1e-6);
        assert!((d.von_mises_ratio(1e6).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn level_crossing_exponential_is_exact() {
        let d = dist(1, 1.0, &[]);
        let lc = d.solve_level(100.0).unwrap();
        assert!((lc.w - 100f64.ln()).abs() < 1e-13);
        assert!((lc.w - 4.605_170).abs() < 1e-6);
        let d = dist(1, 2.0, &[]);
        let k0 = 10f64.exp().round();
        let lc = d.solve_level(k0).unwrap();
        assert!((lc.w - 2.0 * k0.ln()).abs() < 1e-12);
    }

    #[test]
    fn level_crossing_bracketed() {
        let d = dist(2, 1.0, &[0.5]);
        let lc = d.solve_level(1e4).unwrap();
        assert!(lc.w_lb <= lc.w && lc.w <= lc.w_ub);
        assert!(lc.w_lb < lc.w_ub);
        assert!(lc.residual <= 1e-12);
        assert!(d.solve_level(1.0).is_err());
    }

    #[test]
    fn level_crossing_increases_with_k0() {
        for d in configs() {
            let mut prev = 0.0;
            for e in 1..=12 {
                let w = d.solve_level(10f64.powi(e)).unwrap().w;
                assert!(w > prev);
                prev = w;
            }
        }
    }

    #[test]
    fn asymptotic_level_cases() {
        let d = dist(1, 1.0, &[]);
        let a = d.asymptotic_level(1e5).unwrap();
        assert!((a.two_term - 1e5f64.ln()).abs() < 1e-14);
        let d = dist(2, 1.0, &[1.0]);
        let a = d.asymptotic_level(1e6).unwrap();
        let l = 1e6f64.ln();
        assert!((a.two_term - (l - 3.0 * l.ln())).abs() < 1e-12);
        assert!((a.two_term - 5.938).abs() < 1e-3);
        assert!(d.asymptotic_level(15.0).is_err());
        let d = dist(2, 1.0, &[0.5, 2.0]);
        let a = d.asymptotic_level(1e9).unwrap();
        assert!(a.lb_expansion < a.ub_expansion);
    }

    #[test]
    fn pole_merging() {
        let d = dist(3, 2.0, &[2.0, 1.0, 1.0 * (1.0 + 1e-14)]);
        let poles = d.poles();
        assert_eq!(poles.len(), 2);
        assert_eq!(
            poles[0],
            Pole {
                location: 1.0,
                multiplicity: 2 + 3
            }
        );
        assert_eq!(poles[1].multiplicity, 6);
        let d = dist(1, 1.0, &[0.5]);
        assert_eq!(
            d.poles(),
            vec![Pole {
                location: 2.0,
                multiplicity: 1
            }]
        );
        assert!(dist(1, 1.0, &[]).poles().is_empty());
        let d = dist(1, 2.0, &[2.0 * (1.0 - 1e-13)]);
        assert_eq!(
            d.poles(),
            vec![Pole {
                location: 1.0,
                multiplicity: 1
            }]
        );
    }

    proptest! {
        #[test]
        fn cdf_monotone_and_sandwiched(
            m in 1usize..5,
            rho0 in 0.1..10.0f64,
            rho in proptest::collection::vec(0.1..10.0f64, 0..4),
            a in 0.0..30.0f64,
            b in 0.0..30.0f64,
        ) {
            let d = SinrDistribution::new(m, rho0, rho).unwrap();
            let (x, y) = if a <= b { (a, b) } else { (b, a) };
            let (fx, fy) = (d.cdf(x).unwrap(), d.cdf(y).unwrap());
            prop_assert!(fx <= fy);
            prop_assert!((0.0..=1.0).contains(&fx));
            let (lb, ub) = d.cdf_bounds(x).unwrap();
            prop_assert!(lb <= fx * (1.0 + 1e-15) && fx <= ub * (1.0 + 1e-15));
            prop_assert!(d.pdf(x).unwrap() >= 0.0);
        }
    }
}
