//! Partial fractions of `prod_i (x + a_i)^(-n_i)` with repeated poles.
//!
//! Around `x = -a` the other factors form `g(x) = prod_{i != a} (x + a_i)^(-n_i)`.
//! Its Taylor coefficients `c_m` in `t = x + a` follow from the logarithmic
//! derivative: with `d_i = a_i - a`,
//!
//! ```text
//! c_0 = prod d_i^(-n_i)
//! s_j = sum_i (-n_i) (-1)^(j-1) / d_i^j
//! c_m = (1/m) sum_{j=1..m} s_j c_{m-j}
//! ```
//!
//! and the coefficient of `(x + a)^-(n - m)` is `c_m`.

use crate::analytic::SinrDistribution;
use crate::error::{Error, Result};
use crate::rate::real::Real;

/// One pole `-location` with its multiplicity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemPole {
    pub location: f64,
    pub multiplicity: u32,
}

/// Distinct poles of the rational factor of `T(x)^(l+1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PoleSystem {
    poles: Vec<SystemPole>,
    ell: usize,
}

impl PoleSystem {
    /// Checks that locations are positive and pairwise distinct and that
    /// every multiplicity is at least one.
    pub fn new(poles: Vec<SystemPole>, ell: usize) -> Result<Self> {
        for (i, p) in poles.iter().enumerate() {
            if !(p.location > 0.0) || !p.location.is_finite() {
                return Err(Error::domain("pole location", p.location));
            }
            if p.multiplicity == 0 {
                return Err(Error::Dimension(format!("pole {i} has multiplicity 0")));
            }
            if poles[..i].iter().any(|q| q.location == p.location) {
                return Err(Error::Dimension(format!(
                    "duplicate pole location {} (merge coincident poles first)",
                    p.location
                )));
            }
        }
        Ok(Self { poles, ell })
    }

    /// Poles of `1/((x+1)^((M-1)(l+1)) prod_b (x + rho_0/rho_b)^(M(l+1)))`.
    pub fn for_decomposition(d: &SinrDistribution, ell: usize) -> Self {
        let scale = (ell + 1) as u32;
        let poles = d
            .poles()
            .into_iter()
            .map(|p| SystemPole {
                location: p.location,
                multiplicity: p.multiplicity * scale,
            })
            .collect();
        Self { poles, ell }
    }

    pub fn poles(&self) -> &[SystemPole] {
        &self.poles
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn total_multiplicity(&self) -> u32 {
        self.poles.iter().map(|p| p.multiplicity).sum()
    }

    /// `prod (x + a_i)^(-n_i)`.
    pub fn evaluate(&self, x: f64) -> f64 {
        self.poles
            .iter()
            .map(|p| (x + p.location).powi(-(p.multiplicity as i32)))
            .product()
    }
}

/// `coefficient / (x + location)^order`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FractionTerm {
    pub location: f64,
    pub order: u32,
    pub coefficient: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PartialFraction {
    pub terms: Vec<FractionTerm>,
}

impl PartialFraction {
    pub fn evaluate(&self, x: f64) -> f64 {
        self.terms
            .iter()
            .map(|t| t.coefficient / (x + t.location).powi(t.order as i32))
            .sum()
    }

    pub fn coefficient(&self, location: f64, order: u32) -> Option<f64> {
        self.terms
            .iter()
            .find(|t| t.location == location && t.order == order)
            .map(|t| t.coefficient)
    }
}

/// Expansion coefficients in any arithmetic: `out[i][j - 1]` multiplies
/// `(x + a_i)^-j`.
pub fn expand<R: Real>(locations: &[R], multiplicities: &[u32]) -> Vec<Vec<R>> {
    assert_eq!(locations.len(), multiplicities.len());
    let p = locations.len();
    (0..p)
        .map(|k| {
            let a = &locations[k];
            let n = multiplicities[k] as usize;
            let others: Vec<(R, u32)> = (0..p)
                .filter(|&i| i != k)
                .map(|i| (locations[i].sub(a).recip(), multiplicities[i]))
                .collect();
            let mut c0 = R::one();
            for (inv, ni) in &others {
                c0 = c0.mul(&inv.powi(*ni));
            }
            // s_j for j = 1..n-1, via running powers of 1/d_i
            let mut powers: Vec<R> = others.iter().map(|(inv, _)| inv.clone()).collect();
            let mut s = Vec::with_capacity(n.saturating_sub(1));
            for j in 1..n {
                let mut sj = R::zero();
                for ((inv, ni), pw) in others.iter().zip(powers.iter_mut()) {
                    sj = sj.add(&pw.mul_f64(*ni as f64));
                    *pw = pw.mul(inv);
                }
                // (-n_i)(-1)^(j-1) = n_i (-1)^j
                s.push(if j % 2 == 1 { sj.neg() } else { sj });
            }
            let mut c = Vec::with_capacity(n);
            c.push(c0);
            for m in 1..n {
                let mut acc = R::zero();
                for j in 1..=m {
                    acc = acc.add(&s[j - 1].mul(&c[m - j]));
                }
                c.push(acc.div(&R::lift(m as f64)));
            }
            // c_m multiplies order n - m; reorder by ascending order
            c.reverse();
            c
        })
        .collect()
}

/// Partial-fraction expansion of a [`PoleSystem`] in double precision.
pub fn partial_fractions(ps: &PoleSystem) -> Result<PartialFraction> {
    let ps = PoleSystem::new(ps.poles.clone(), ps.ell)?;
    let locations: Vec<f64> = ps.poles.iter().map(|p| p.location).collect();
    let mults: Vec<u32> = ps.poles.iter().map(|p| p.multiplicity).collect();
    let coeffs = expand(&locations, &mults);
    let terms = ps
        .poles
        .iter()
        .zip(coeffs)
        .flat_map(|(p, cs)| {
            cs.into_iter()
                .enumerate()
                .map(move |(j, coefficient)| FractionTerm {
                    location: p.location,
                    order: j as u32 + 1,
                    coefficient,
                })
        })
        .collect();
    Ok(PartialFraction { terms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rate::real::{with_precision, Mp};

    fn system(poles: &[(f64, u32)]) -> PoleSystem {
        PoleSystem::new(
            poles
                .iter()
                .map(|&(location, multiplicity)| SystemPole {
                    location,
                    multiplicity,
                })
                .collect(),
            0,
        )
        .unwrap()
    }

    #[test]
    fn two_simple_poles() {
        let pf = partial_fractions(&system(&[(1.0, 1), (2.0, 1)])).unwrap();
        assert!((pf.coefficient(1.0, 1).unwrap() - 1.0).abs() < 1e-15);
        assert!((pf.coefficient(2.0, 1).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn double_pole() {
        let pf = partial_fractions(&system(&[(1.0, 2), (2.0, 1)])).unwrap();
        assert!((pf.coefficient(1.0, 2).unwrap() - 1.0).abs() < 1e-15);
        assert!((pf.coefficient(1.0, 1).unwrap() + 1.0).abs() < 1e-15);
        assert!((pf.coefficient(2.0, 1).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_pole_is_its_own_expansion() {
        let pf = partial_fractions(&system(&[(3.0, 4)])).unwrap();
        assert_eq!(pf.terms.len(), 4);
        assert_eq!(pf.coefficient(3.0, 4), Some(1.0));
        assert_eq!(pf.coefficient(3.0, 1), Some(0.0));
    }

    /// 20 deterministic points spread over `[0, hi)`.
    fn probes(hi: f64) -> impl Iterator<Item = f64> {
        (0..20).map(move |i| (i as f64 * 0.618_033_988_749_895).fract() * hi)
    }

    #[test]
    fn decomposition_reconstructs() {
        let d = SinrDistribution::new(2, 1.0, vec![0.5, 0.25]).unwrap();
        let ps = PoleSystem::for_decomposition(&d, 1);
        assert_eq!(ps.total_multiplicity(), 2 + 4 + 4);
        let pf = partial_fractions(&ps).unwrap();
        // beyond the pole scale the terms cancel down to x^-10 and f64
        // reconstruction degrades; the multiprecision check covers that range
        for x in probes(4.0) {
            let exact = ps.evaluate(x);
            assert!((pf.evaluate(x) - exact).abs() <= 1e-9 * exact, "{x}");
        }
    }

    #[test]
    fn decomposition_reconstructs_far_out_in_multiprecision() {
        let d = SinrDistribution::new(2, 1.0, vec![0.5, 0.25]).unwrap();
        let ps = PoleSystem::for_decomposition(&d, 1);
        with_precision(256, || {
            let locs: Vec<Mp> = ps.poles().iter().map(|p| Mp::lift(p.location)).collect();
            let mults: Vec<u32> = ps.poles().iter().map(|p| p.multiplicity).collect();
            let coeffs = expand(&locs, &mults);
            for x in probes(50.0) {
                let x = Mp::lift(x);
                let mut sum = Mp::zero();
                let mut exact = Mp::one();
                for ((a, &n), cs) in locs.iter().zip(&mults).zip(&coeffs) {
                    let base = x.add(a);
                    exact = exact.div(&base.powi(n));
                    for (j, c) in cs.iter().enumerate() {
                        sum = sum.add(&c.div(&base.powi(j as u32 + 1)));
                    }
                }
                assert!(sum.sub(&exact).div(&exact).log2_abs() < -150.0);
            }
        });
    }

    #[test]
    fn multiprecision_matches_f64_and_reconstructs() {
        let locs = [1.0, 2.0, 0.3];
        let mults = [3, 2, 4];
        let f = expand(&locs, &mults);
        with_precision(256, || {
            let mp_locs: Vec<Mp> = locs.iter().map(|&a| Mp::lift(a)).collect();
            let g = expand(&mp_locs, &mults);
            for (fi, gi) in f.iter().zip(&g) {
                for (a, b) in fi.iter().zip(gi) {
                    assert!((a - b.to_f64()).abs() <= 1e-12 * a.abs().max(1e-300));
                }
            }
            let x = Mp::lift(0.7);
            let mut sum = Mp::zero();
            let mut exact = Mp::one();
            for (i, a) in mp_locs.iter().enumerate() {
                let base = x.add(a);
                exact = exact.div(&base.powi(mults[i]));
                for (j, c) in g[i].iter().enumerate() {
                    sum = sum.add(&c.div(&base.powi(j as u32 + 1)));
                }
            }
            let rel = sum.sub(&exact).div(&exact);
            assert!(rel.log2_abs() < -240.0);
        });
    }

    #[test]
    fn rejects_bad_systems() {
        let dup = vec![
            SystemPole {
                location: 1.0,
                multiplicity: 1,
            };
            2
        ];
        assert!(PoleSystem::new(dup, 0).is_err());
        assert!(PoleSystem::new(
            vec![SystemPole {
                location: -1.0,
                multiplicity: 1
            }],
            0
        )
        .is_err());
        assert!(PoleSystem::new(
            vec![SystemPole {
                location: 1.0,
                multiplicity: 0
            }],
            0
        )
        .is_err());
    }

    proptest::proptest! {
        #[test]
        fn random_systems_reconstruct(
            locs in proptest::collection::btree_set(1u32..200, 1..4),
            mults in proptest::collection::vec(1u32..3, 4),
            x in 0.0..10.0f64,
        ) {
            let poles: Vec<SystemPole> = locs
                .iter()
                .zip(&mults)
                .map(|(&l, &m)| SystemPole { location: l as f64 / 10.0, multiplicity: m })
                .collect();
            let ps = PoleSystem::new(poles, 0).unwrap();
            let pf = partial_fractions(&ps).unwrap();
            let exact = ps.evaluate(x);
            // nearby poles amplify rounding by roughly gap^-n
            proptest::prop_assert!((pf.evaluate(x) - exact).abs() <= 1e-6 * exact);
        }
    }
}
