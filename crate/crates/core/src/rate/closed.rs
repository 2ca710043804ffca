//! Closed-form individual sum rate in arbitrary precision.
//!
//! ```text
//! R = (M / ln 2) sum_l w_l prod_a a^(n_a (l+1))
//!       sum_a sum_j psi_{a,j} J_a(j),     alpha = (l+1) / rho_0
//! ```
//!
//! with `w_l = (-1)^l C(K0, l+1)`, `J_1(j) = I2(alpha, 1, j+1)` at the unit
//! pole and `J_a(j) = I1(alpha, a, j)` elsewhere. The coefficients `psi`
//! grow like `gap^-(n)` for nearby poles while the sum stays O(1), so the
//! whole assembly runs at a precision chosen from the observed cancellation
//! and is repeated with extra bits to confirm the digits.

use std::cell::RefCell;

use crate::analytic::SinrDistribution;
use crate::error::{Error, Result};
use crate::rate::partial::expand;
use crate::rate::real::{euler_gamma, precision, with_precision, Mp, Real};

/// Largest `z` evaluated by the power series; the continued fraction is
/// used above.
const SERIES_MAX_Z: f64 = 64.0;

/// Give up beyond this working precision.
const MAX_BITS: usize = 1 << 15;

thread_local! {
    /// Euler's constant at the highest precision computed so far. A more
    /// precise operand is harmless: every operation rounds to the current
    /// precision.
    static GAMMA_CACHE: RefCell<Option<(usize, Mp)>> = const { RefCell::new(None) };
}

fn cached_euler_gamma() -> Mp {
    let p = precision();
    GAMMA_CACHE.with(|c| {
        let mut c = c.borrow_mut();
        match &*c {
            Some((bits, g)) if *bits >= p => g.clone(),
            _ => {
                let bits = p.next_multiple_of(1024);
                let g = with_precision(bits, euler_gamma);
                *c = Some((bits, g.clone()));
                g
            }
        }
    })
}

fn tolerance_reached(term: &Mp, sum: &Mp, bits: usize) -> bool {
    term.is_zero() || term.log2_abs() < sum.log2_abs() - bits as f64
}

/// `e^z E_1(z)` by the power series. The series cancels down from `e^z`, so
/// the caller must carry `z log2(e)` guard bits.
fn series_scaled_e1(z: &Mp, zf: f64) -> Mp {
    let p = precision();
    let mut sum = Mp::zero();
    let mut term = Mp::one();
    let mut k = 1u64;
    loop {
        let kk = Mp::lift(k as f64);
        term = term.mul(z).div(&kk).neg();
        let add = term.div(&kk).neg();
        sum = sum.add(&add);
        if k as f64 > zf && tolerance_reached(&add, &sum, p + 4) {
            break;
        }
        k += 1;
    }
    cached_euler_gamma()
        .neg()
        .sub(&z.ln())
        .add(&sum)
        .mul(&z.exp())
}

/// `e^z E_n(z)` by the continued fraction (modified Lentz).
fn continued_fraction_scaled_en(n: u32, z: &Mp) -> Mp {
    let p = precision();
    let mut b = z.add(&Mp::lift(n as f64));
    let mut d = b.recip();
    let mut h = d.clone();
    let mut c: Option<Mp> = None;
    let two = Mp::lift(2.0);
    for i in 1u64.. {
        let an = Mp::lift(-(i as f64) * (n as f64 - 1.0 + i as f64));
        b = b.add(&two);
        d = an.mul(&d).add(&b).recip();
        let cn = match &c {
            None => b.clone(),
            Some(c) => b.add(&an.div(c)),
        };
        let del = cn.mul(&d);
        h = h.mul(&del);
        c = Some(cn);
        if tolerance_reached(&del.sub(&Mp::one()), &Mp::one(), p + 4) {
            break;
        }
    }
    h
}

/// `S_n = e^z E_n(z)` for `n = 1..=nmax` at the current precision, with
/// `z = alpha * beta` formed in multiprecision (a rounded product would be
/// amplified by the `I1` recurrence).
pub(crate) fn scaled_en_family(alpha: &Mp, beta: f64, nmax: u32) -> Vec<Mp> {
    let p = precision();
    let z = alpha.to_f64() * beta;
    let exact_z = || alpha.mul(&Mp::lift(beta));
    if z <= SERIES_MAX_Z {
        // upward recurrence S_{n+1} = (1 - z S_n) / n amplifies by z/n
        let guard = (z * std::f64::consts::LOG2_E).ceil() as usize + 16;
        return with_precision(p + guard, || {
            let zm = exact_z();
            let mut out = Vec::with_capacity(nmax as usize);
            out.push(series_scaled_e1(&zm, z));
            for n in 1..nmax {
                let next = Mp::one()
                    .sub(&zm.mul(&out[n as usize - 1]))
                    .div(&Mp::lift(n as f64));
                out.push(next);
            }
            out
        });
    }
    // start where both recurrence directions are stable
    let n0 = (z.ceil() as u32).clamp(1, nmax);
    with_precision(p + 16, || {
        let zm = exact_z();
        let mut out = vec![Mp::zero(); nmax as usize];
        out[n0 as usize - 1] = continued_fraction_scaled_en(n0, &zm);
        for n in (1..n0).rev() {
            // S_n = (1 - n S_{n+1}) / z
            out[n as usize - 1] = Mp::one().sub(&out[n as usize].mul_f64(n as f64)).div(&zm);
        }
        for n in n0..nmax {
            out[n as usize] = Mp::one()
                .sub(&zm.mul(&out[n as usize - 1]))
                .div(&Mp::lift(n as f64));
        }
        out
    })
}

/// `I2(alpha, beta, g)` for `g = 1..=gmax`.
fn i2_family(alpha: &Mp, beta: f64, gmax: u32) -> Vec<Mp> {
    let s = scaled_en_family(alpha, beta, gmax);
    let inv = Mp::lift(beta).recip();
    let mut scale = Mp::one();
    s.into_iter()
        .map(|sn| {
            let v = sn.mul(&scale);
            scale = scale.mul(&inv);
            v
        })
        .collect()
}

/// Extra bits needed by [`i1_family`] up to order `jmax`.
fn i1_guard(alpha: f64, beta: f64, jmax: u32) -> usize {
    let growth = ((beta + 1.0 / alpha) / (beta - 1.0).abs()).max(1.0);
    (jmax as f64 * growth.log2()).ceil() as usize + 32
}

/// `I1(alpha, beta, j)` for `j = 1..=jmax` from
/// `I1(j) = (I1(j-1) - I2(alpha, beta, j)) / (beta - 1)`, starting from
/// `start = I2(alpha, 1, 1)`, which must carry [`i1_guard`] extra bits.
fn i1_family(alpha: &Mp, beta: f64, jmax: u32, start: &Mp) -> Vec<Mp> {
    let p = precision();
    with_precision(p + i1_guard(alpha.to_f64(), beta, jmax), || {
        let mut prev = start.clone();
        let i2 = i2_family(alpha, beta, jmax);
        let inv_gap = Mp::lift(beta).sub(&Mp::one()).recip();
        i2.iter()
            .map(|v| {
                prev = prev.sub(v).mul(&inv_gap);
                prev.clone()
            })
            .collect()
    })
}

/// `(-1)^l C(K0, l+1)` for `l = 0..K0`, exact.
pub(crate) fn signed_weights(k0: u64) -> Vec<i128> {
    // Pascal row K0 by additions only, so no intermediate overflows
    let n = k0 as usize;
    let mut row = vec![0u128; n + 1];
    row[0] = 1;
    for i in 1..=n {
        for j in (1..=i).rev() {
            row[j] += row[j - 1];
        }
    }
    (0..n)
        .map(|l| {
            let c = row[l + 1] as i128;
            if l % 2 == 0 {
                c
            } else {
                -c
            }
        })
        .collect()
}

struct Evaluation {
    value: Mp,
    /// Largest `log2` magnitude among the summed terms.
    peak_log2: f64,
}

fn evaluate(d: &SinrDistribution, k0: u64) -> Evaluation {
    let poles = d.poles();
    let locations: Vec<Mp> = poles.iter().map(|p| Mp::lift(p.location)).collect();
    let rho0 = d.rho_serving();
    let mut total = Mp::zero();
    let mut peak = f64::NEG_INFINITY;
    for (ell, w) in signed_weights(k0).into_iter().enumerate() {
        let scale = ell as u32 + 1;
        // alpha rounded to f64 per term would be amplified by the binomial sum
        let alpha_mp = Mp::lift(scale as f64).div(&Mp::lift(rho0));
        let alpha = scale as f64 / rho0;
        let mults: Vec<u32> = poles.iter().map(|p| p.multiplicity * scale).collect();
        // I2(alpha, 1, .) is shared by the unit pole and every I1 start
        let guard = poles
            .iter()
            .zip(&mults)
            .filter(|(p, _)| p.location != 1.0)
            .map(|(p, &n)| i1_guard(alpha, p.location, n))
            .max()
            .unwrap_or(0);
        let unit_order = poles
            .iter()
            .zip(&mults)
            .find(|(p, _)| p.location == 1.0)
            .map_or(1, |(_, &n)| n + 1);
        let unit = with_precision(precision() + guard, || {
            i2_family(&alpha_mp, 1.0, unit_order)
        });
        let mut bracket = Mp::zero();
        if poles.is_empty() {
            bracket = unit[0].clone();
        }
        let coeffs = expand(&locations, &mults);
        let outer_log2 = prefactor_bound(&poles, scale) + (w.unsigned_abs() as f64).log2();
        let mut prefactor = Mp::one();
        for ((pole, loc), (cs, &n)) in poles.iter().zip(&locations).zip(coeffs.iter().zip(&mults)) {
            prefactor = prefactor.mul(&loc.powi(n));
            let i1;
            let family: &[Mp] = if pole.location == 1.0 {
                &unit[1..]
            } else {
                i1 = i1_family(&alpha_mp, pole.location, n, &unit[0]);
                &i1
            };
            for (c, v) in cs.iter().zip(family) {
                let t = c.mul(v);
                peak = peak.max(t.log2_abs() + outer_log2);
                bracket = bracket.add(&t);
            }
        }
        let weight = Mp::from_u128(w.unsigned_abs());
        let term = prefactor.mul(&bracket).mul(&weight);
        let term = if w < 0 { term.neg() } else { term };
        peak = peak.max(term.log2_abs());
        total = total.add(&term);
    }
    let m = Mp::lift(d.num_antennas() as f64);
    let ln2 = Mp::lift(2.0).ln();
    Evaluation {
        value: total.mul(&m).div(&ln2),
        peak_log2: peak,
    }
}

/// `log2 prod_a a^(n_a (l+1))`, used for the magnitude estimate only.
fn prefactor_bound(poles: &[crate::analytic::Pole], scale: u32) -> f64 {
    poles
        .iter()
        .map(|p| (p.multiplicity * scale) as f64 * p.location.log2())
        .sum()
}

/// Result of [`closed_form`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct ClosedFormValue {
    pub bits_per_use: f64,
    /// Working precision of the accepted evaluation.
    pub precision_bits: usize,
    /// Bits cancelled between the largest term and the result.
    pub cancellation_bits: f64,
}

/// Agreement demanded between the two confirming evaluations, in bits.
const AGREEMENT_BITS: f64 = 90.0;

/// Evaluates the closed form, raising precision until two evaluations
/// `EXTRA` bits apart agree to [`AGREEMENT_BITS`].
pub fn closed_form(d: &SinrDistribution, k0: u64) -> Result<ClosedFormValue> {
    const EXTRA: usize = 96;
    // a low-precision probe can hide cancellation beyond its own precision,
    // so the estimate is refreshed at every level until it fits
    let mut bits = 192;
    loop {
        if bits > MAX_BITS {
            return Err(Error::PrecisionExhausted { bits: MAX_BITS });
        }
        let a = with_precision(bits, || evaluate(d, k0));
        let estimate = (a.peak_log2 - a.value.log2_abs()).max(0.0);
        let need = (estimate.ceil() as usize + 160).max(256);
        if need > bits {
            bits = need.max(bits + 64);
            continue;
        }
        let b = with_precision(bits + EXTRA, || evaluate(d, k0));
        let diff = with_precision(bits + EXTRA, || a.value.sub(&b.value));
        let rel = diff.log2_abs() - b.value.log2_abs();
        if rel < -AGREEMENT_BITS {
            return Ok(ClosedFormValue {
                bits_per_use: b.value.to_f64(),
                precision_bits: bits + EXTRA,
                cancellation_bits: (b.peak_log2 - b.value.log2_abs()).max(0.0),
            });
        }
        bits *= 2;
    }
}
