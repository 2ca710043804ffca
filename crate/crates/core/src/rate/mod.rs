//! Individual sum rate `R_k = K0 R_k^(per-user)`, in bits per channel use.
//!
//! Two independent paths:
//!
//! * the closed form: `d(F^K0)` is split into `K0` exponential-times-rational
//!   terms, each rational part is expanded in partial fractions and
//!   integrated against `ln(1+x)` through the `I1`/`I2` family;
//! * quadrature of `(M/ln 2) int_0^inf (1 - F(x)^K0) / (1 + x) dx`, the
//!   integrated-by-parts form of `M int ln(1+x) d(F^K0)`.

pub mod closed;
pub mod partial;
pub mod real;
pub mod special;

use serde::Serialize;

use crate::analytic::SinrDistribution;
use crate::error::{Error, Result};
use crate::quad::{integrate_pieces, Tolerance};
use crate::scenario::Scenario;

pub use closed::ClosedFormValue;
pub use partial::{partial_fractions, FractionTerm, PartialFraction, PoleSystem, SystemPole};
pub use special::{exp_int_e1, integral_i1, integral_i2};

/// Default largest `K0` accepted by the closed form.
pub const DEFAULT_CLOSED_FORM_CAP: u64 = 64;

/// Hard ceiling on the cap: the decomposition weights are exact 128-bit
/// binomials.
pub const MAX_CLOSED_FORM_CAP: u64 = 128;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClosedFormOptions {
    pub cap: u64,
}

impl Default for ClosedFormOptions {
    fn default() -> Self {
        Self {
            cap: DEFAULT_CLOSED_FORM_CAP,
        }
    }
}

impl ClosedFormOptions {
    fn check(&self, k0: u64) -> Result<()> {
        let cap = self.cap.min(MAX_CLOSED_FORM_CAP);
        if k0 == 0 {
            return Err(Error::domain("K0 (need K0 >= 1)", 0.0));
        }
        if k0 > cap {
            return Err(Error::ClosedFormCap { k0, cap });
        }
        Ok(())
    }
}

/// `(l, K0 C(K0-1, l) (-1)^l / (l+1))` for `l = 0..K0`.
///
/// The weight equals `(-1)^l C(K0, l+1)` and is formed exactly before the
/// conversion to `f64`; the weights sum to 1.
pub fn pdf_decomposition_terms(k0: u64, opts: ClosedFormOptions) -> Result<Vec<(usize, f64)>> {
    opts.check(k0)?;
    Ok(closed::signed_weights(k0)
        .into_iter()
        .enumerate()
        .map(|(l, w)| (l, w as f64))
        .collect())
}

/// Closed-form individual sum rate of a user with distribution `d`.
pub fn closed_form_rate(d: &SinrDistribution, k0: u64, opts: ClosedFormOptions) -> Result<f64> {
    closed_form_details(d, k0, opts).map(|v| v.bits_per_use)
}

/// As [`closed_form_rate`], with the precision bookkeeping.
pub fn closed_form_details(
    d: &SinrDistribution,
    k0: u64,
    opts: ClosedFormOptions,
) -> Result<ClosedFormValue> {
    opts.check(k0)?;
    closed::closed_form(d, k0)
}

/// Quadrature tolerance (relative) of the reference path.
const QUAD_TOL: Tolerance = Tolerance::new(0.0, 1e-13);

/// Reference individual sum rate by adaptive quadrature; no cap on `K0`.
pub fn quadrature_rate(d: &SinrDistribution, k0: u64) -> Result<f64> {
    if k0 == 0 {
        return Err(Error::domain("K0 (need K0 >= 1)", 0.0));
    }
    let k = k0 as f64;
    let integrand = |x: f64| {
        let log_tail = d.log_tail(x);
        let tail = log_tail.exp();
        let log_cdf = if tail < 0.5 {
            (-tail).ln_1p()
        } else {
            (-log_tail.exp_m1()).ln()
        };
        -(k * log_cdf).exp_m1() / (1.0 + x)
    };
    // beyond x_cut, 1 - F^K0 <= K0 (1 - F) <= 1e-16
    let x_cut = d.tail_quantile((1e-16 / k).ln());
    let (centre, width) = if k0 >= 2 {
        let w = d.solve_level(k)?.w;
        (w, d.growth_function(w)?)
    } else {
        (0.0, d.growth_function(0.0)?)
    };
    let mut points = vec![0.0, x_cut];
    for t in [-32.0, -8.0, -2.0, 0.0, 2.0, 8.0] {
        let p = centre + t * width;
        if p > 0.0 && p < x_cut {
            points.push(p);
        }
    }
    points.sort_by(f64::total_cmp);
    points.dedup();
    let q = integrate_pieces(integrand, &points, QUAD_TOL);
    Ok(d.num_antennas() as f64 / std::f64::consts::LN_2 * q.value)
}

fn user_distribution(s: &Scenario, user: usize) -> Result<SinrDistribution> {
    let profile = s.users.get(user).ok_or_else(|| {
        Error::Dimension(format!("user {user} out of range (K0 = {})", s.num_users()))
    })?;
    Ok(SinrDistribution::from_profile(s.num_antennas, profile))
}

/// Closed-form `R_k` for user `user` of `s`, with `K0` = number of users.
pub fn individual_sum_rate_closed(
    s: &Scenario,
    user: usize,
    opts: ClosedFormOptions,
) -> Result<f64> {
    closed_form_rate(&user_distribution(s, user)?, s.num_users() as u64, opts)
}

/// Quadrature `R_k` for user `user`; `k0_override` replaces the user count.
pub fn individual_sum_rate_quadrature(
    s: &Scenario,
    user: usize,
    k0_override: Option<u64>,
) -> Result<f64> {
    let k0 = k0_override.unwrap_or(s.num_users() as u64);
    quadrature_rate(&user_distribution(s, user)?, k0)
}

/// Which analytic paths to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum RateMethod {
    Closed,
    Quadrature,
    Both,
}

/// Individual sum rate of one user from the requested paths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateReport {
    pub user: usize,
    pub closed: Option<f64>,
    pub quadrature: Option<f64>,
    /// `|closed - quadrature| / |quadrature|` when both are present.
    pub discrepancy: Option<f64>,
}

pub fn rate_report(
    s: &Scenario,
    user: usize,
    method: RateMethod,
    opts: ClosedFormOptions,
) -> Result<RateReport> {
    let closed = match method {
        RateMethod::Closed | RateMethod::Both => Some(individual_sum_rate_closed(s, user, opts)?),
        RateMethod::Quadrature => None,
    };
    let quadrature = match method {
        RateMethod::Quadrature | RateMethod::Both => {
            Some(individual_sum_rate_quadrature(s, user, None)?)
        }
        RateMethod::Closed => None,
    };
    let discrepancy = match (closed, quadrature) {
        (Some(c), Some(q)) => Some((c - q).abs() / q.abs()),
        _ => None,
    };
    Ok(RateReport {
        user,
        closed,
        quadrature,
        discrepancy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dist(m: usize, rho0: f64, rho: &[f64]) -> SinrDistribution {
        SinrDistribution::new(m, rho0, rho.to_vec()).unwrap()
    }

    const REF_RATE: f64 = 0.860_347_382_270_885_9;

    #[test]
    fn decomposition_weights() {
        let o = ClosedFormOptions::default();
        assert_eq!(pdf_decomposition_terms(1, o).unwrap(), vec![(0, 1.0)]);
        assert_eq!(
            pdf_decomposition_terms(2, o).unwrap(),
            vec![(0, 2.0), (1, -1.0)]
        );
        assert!(matches!(
            pdf_decomposition_terms(65, o),
            Err(Error::ClosedFormCap { k0: 65, cap: 64 })
        ));
        assert!(pdf_decomposition_terms(100, ClosedFormOptions { cap: 100 }).is_ok());
        assert!(pdf_decomposition_terms(129, ClosedFormOptions { cap: 1000 }).is_err());
    }

    #[test]
    fn decomposition_reconstructs_cdf_power() {
        // F^K0 = 1 - sum_l w_l T^(l+1)
        let d = dist(2, 1.0, &[0.5]);
        for k0 in [1u64, 3, 8, 20] {
            let terms = pdf_decomposition_terms(k0, ClosedFormOptions::default()).unwrap();
            for i in 0..20 {
                let x = 0.05 + i as f64 * 0.4;
                let t = 1.0 - d.cdf(x).unwrap();
                let sum: f64 = terms.iter().map(|&(l, w)| w * t.powi(l as i32 + 1)).sum();
                let want = d.cdf(x).unwrap().powi(k0 as i32);
                assert!((1.0 - sum - want).abs() < 1e-10, "{k0} {x}");
            }
        }
    }

    #[test]
    fn quadrature_single_user_reference() {
        let d = dist(1, 1.0, &[]);
        let q = quadrature_rate(&d, 1).unwrap();
        assert!((q - REF_RATE).abs() < 1e-12);
    }

    #[test]
    fn closed_matches_quadrature_reference_case() {
        let d = dist(2, 1.0, &[0.5]);
        let c = closed_form_rate(&d, 8, ClosedFormOptions::default()).unwrap();
        let q = quadrature_rate(&d, 8).unwrap();
        assert!((c - q).abs() <= 1e-6 * q, "{c} {q}");
        assert!((c - q).abs() <= 1e-10 * q, "{c} {q}");
    }

    #[test]
    fn single_user_rate_is_antenna_times_mean_log() {
        use crate::quad::integrate_to_infinity;
        for d in [
            dist(2, 1.0, &[0.5]),
            dist(3, 4.0, &[0.2, 1.7]),
            dist(1, 0.3, &[2.0]),
        ] {
            let mean_log = integrate_to_infinity(
                |x| (1.0 + x).log2() * d.pdf(x).unwrap(),
                0.0,
                d.rho_serving().min(1.0),
                Tolerance::new(0.0, 1e-13),
            )
            .value;
            let want = d.num_antennas() as f64 * mean_log;
            let c = closed_form_rate(&d, 1, ClosedFormOptions::default()).unwrap();
            let q = quadrature_rate(&d, 1).unwrap();
            assert!((c - want).abs() < 1e-8 * want, "{c} {want}");
            assert!((q - want).abs() < 1e-8 * want, "{q} {want}");
        }
    }

    #[test]
    fn closed_form_merged_unit_pole() {
        // rho_0 = rho_1 puts the interferer pole on the intracell pole
        let d = dist(2, 1.5, &[1.5]);
        let c = closed_form_rate(&d, 4, ClosedFormOptions::default()).unwrap();
        let q = quadrature_rate(&d, 4).unwrap();
        assert!((c - q).abs() <= 1e-9 * q);
        let d = dist(1, 2.0, &[2.0]);
        let c = closed_form_rate(&d, 3, ClosedFormOptions::default()).unwrap();
        let q = quadrature_rate(&d, 3).unwrap();
        assert!((c - q).abs() <= 1e-9 * q);
    }

    #[test]
    fn quadrature_monotone_in_k0_and_fast_for_huge_k0() {
        let d = dist(2, 1.0, &[0.5]);
        assert!(quadrature_rate(&d, 64).unwrap() > quadrature_rate(&d, 8).unwrap());
        let start = std::time::Instant::now();
        let r = quadrature_rate(&dist(2, 1.3, &[0.4]), 1_000_000).unwrap();
        assert!(r.is_finite() && r > 0.0);
        assert!(start.elapsed().as_secs_f64() < 1.0);
    }

    #[test]
    fn closed_form_rejects_cap() {
        let s = Scenario::from_profiles(1, (0..70).map(|_| (1.0, vec![]))).unwrap();
        let err = individual_sum_rate_closed(&s, 0, ClosedFormOptions::default()).unwrap_err();
        assert!(err.to_string().contains("quadrature"));
        assert!(individual_sum_rate_quadrature(&s, 0, None).is_ok());
        assert!(individual_sum_rate_quadrature(&s, 70, None).is_err());
    }

    #[test]
    fn homogeneous_users_share_rate() {
        let s = Scenario::from_profiles(2, (0..3).map(|_| (1.2, vec![0.4]))).unwrap();
        let r: Vec<f64> = (0..3)
            .map(|k| individual_sum_rate_closed(&s, k, ClosedFormOptions::default()).unwrap())
            .collect();
        assert!(r.iter().all(|&v| v == r[0]));
        let rep = rate_report(&s, 1, RateMethod::Both, ClosedFormOptions::default()).unwrap();
        assert!(rep.discrepancy.unwrap() < 1e-9);
    }
}
