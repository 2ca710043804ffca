//! Exponential integrals and the `I1`/`I2` integral family in double precision.
//!
//! ```text
//! I2(a, b, g) = int_0^inf e^(-a x) / (b + x)^g dx            = b^(1-g) e^z E_g(z),  z = a b
//! I1(a, b, g) = int_0^inf e^(-a x) / ((1 + x)(b + x)^g) dx
//! ```

use crate::error::{Error, Result};
use crate::rate::partial::{partial_fractions, PoleSystem, SystemPole};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

fn series_e1(x: f64) -> f64 {
    // E1(x) = -gamma - ln x + sum_{k>=1} (-1)^(k+1) x^k / (k k!)
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..200 {
        term *= -x / k as f64;
        let add = -term / k as f64;
        sum += add;
        if add.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() + sum
}

/// `e^z E_n(z)` by the continued fraction (modified Lentz), for `z > 1`.
fn continued_fraction_en(n: u32, z: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let n1 = n as f64 - 1.0;
    let mut b = z + n as f64;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..10_000 {
        let an = -(i as f64) * (n1 + i as f64);
        b += 2.0;
        d = 1.0 / (an * d + b);
        c = b + an / c;
        let del = c * d;
        h *= del;
        if (del - 1.0).abs() < 1e-16 {
            break;
        }
    }
    h
}

/// Exponential integral `E1(x)` for `x > 0`.
pub fn exp_int_e1(x: f64) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::domain("E1 argument (need x > 0)", x));
    }
    Ok(if x <= 1.0 {
        series_e1(x)
    } else {
        (-x).exp() * continued_fraction_en(1, x)
    })
}

/// Scaled generalized exponential integral `e^z E_n(z)` for `n >= 1`, `z > 0`.
pub fn scaled_exp_int(n: u32, z: f64) -> f64 {
    debug_assert!(n >= 1 && z > 0.0);
    if z > 1.0 {
        return continued_fraction_en(n, z);
    }
    // E_{k+1} = (e^-z - z E_k) / k is stable upward for z <= 1
    let mut s = z.exp() * series_e1(z);
    for k in 1..n {
        s = (1.0 - z * s) / k as f64;
    }
    s
}

fn check_family(alpha: f64, beta: f64, gamma: u32) -> Result<()> {
    if !(alpha > 0.0) || !alpha.is_finite() {
        return Err(Error::domain("alpha (need alpha > 0)", alpha));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::domain("beta (need beta > 0)", beta));
    }
    if gamma == 0 {
        return Err(Error::domain("gamma (need integer gamma >= 1)", 0.0));
    }
    Ok(())
}

/// `I2(alpha, beta, gamma)`.
pub fn integral_i2(alpha: f64, beta: f64, gamma: u32) -> Result<f64> {
    check_family(alpha, beta, gamma)?;
    Ok(beta.powi(1 - gamma as i32) * scaled_exp_int(gamma, alpha * beta))
}

/// `I1(alpha, beta, gamma)`.
///
/// Near `beta = 1` it reduces to `I2(alpha, 1, gamma + 1)`. For
/// `|beta - 1| <= 0.9 beta` it sums the convergent expansion
/// `1/(1+x) = sum_n (beta-1)^n / (beta+x)^(n+1)`; otherwise the partial
/// fractions of `1/((1+x)(beta+x)^gamma)` are well conditioned and used.
pub fn integral_i1(alpha: f64, beta: f64, gamma: u32) -> Result<f64> {
    check_family(alpha, beta, gamma)?;
    if (beta - 1.0).abs() <= 1e-9 {
        return integral_i2(alpha, 1.0, gamma + 1);
    }
    let z = alpha * beta;
    let q = (beta - 1.0) / beta;
    if q.abs() <= 0.9 {
        let mut sum = 0.0;
        let mut qn = 1.0;
        for n in 0..2000u32 {
            let term = qn * scaled_exp_int(gamma + n + 1, z);
            sum += term;
            if term.abs() <= 1e-17 * sum.abs() {
                break;
            }
            qn *= q;
        }
        return Ok(beta.powi(-(gamma as i32)) * sum);
    }
    let ps = PoleSystem::new(
        vec![
            SystemPole {
                location: 1.0,
                multiplicity: 1,
            },
            SystemPole {
                location: beta,
                multiplicity: gamma,
            },
        ],
        0,
    )?;
    let pf = partial_fractions(&ps)?;
    let mut sum = 0.0;
    for t in &pf.terms {
        sum += t.coefficient * integral_i2(alpha, t.location, t.order)?;
    }
    Ok(sum)
}
