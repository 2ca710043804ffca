//! Scalar abstraction over `f64` and arbitrary-precision floats.
//!
//! [`Mp`] wraps an astro-float `BigFloat`. The working precision is a
//! thread-local set by [`with_precision`], so generic code written against
//! [`Real`] runs unchanged in either arithmetic.

use std::cell::{Cell, RefCell};

use astro_float::{BigFloat, Consts, RoundingMode, Sign};

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static PRECISION: Cell<usize> = const { Cell::new(128) };
    static CONSTS: RefCell<Consts> =
        RefCell::new(Consts::new().expect("astro-float constant cache"));
}

/// Current working precision in bits.
pub fn precision() -> usize {
    PRECISION.with(Cell::get)
}

struct Restore(usize);

impl Drop for Restore {
    fn drop(&mut self) {
        PRECISION.with(|p| p.set(self.0));
    }
}

/// Runs `f` with the working precision set to `bits`.
pub fn with_precision<T>(bits: usize, f: impl FnOnce() -> T) -> T {
    let _restore = Restore(PRECISION.with(|p| p.replace(bits.max(64))));
    f()
}

pub trait Real: Clone + std::fmt::Debug {
    fn lift(x: f64) -> Self;
    fn from_u128(x: u128) -> Self;
    fn add(&self, o: &Self) -> Self;
    fn sub(&self, o: &Self) -> Self;
    fn mul(&self, o: &Self) -> Self;
    fn div(&self, o: &Self) -> Self;
    fn neg(&self) -> Self;
    fn exp(&self) -> Self;
    fn ln(&self) -> Self;
    fn powi(&self, n: u32) -> Self;
    fn abs(&self) -> Self;
    fn to_f64(&self) -> f64;
    /// `log2 |x|`, `-inf` for zero; finite even where `to_f64` would overflow.
    fn log2_abs(&self) -> f64;
    fn is_negative(&self) -> bool;

    fn zero() -> Self {
        Self::lift(0.0)
    }

    fn one() -> Self {
        Self::lift(1.0)
    }

    fn recip(&self) -> Self {
        Self::one().div(self)
    }

    fn mul_f64(&self, x: f64) -> Self {
        self.mul(&Self::lift(x))
    }
}

impl Real for f64 {
    fn lift(x: f64) -> Self {
        x
    }
    fn from_u128(x: u128) -> Self {
        x as f64
    }
    fn add(&self, o: &Self) -> Self {
        self + o
    }
    fn sub(&self, o: &Self) -> Self {
        self - o
    }
    fn mul(&self, o: &Self) -> Self {
        self * o
    }
    fn div(&self, o: &Self) -> Self {
        self / o
    }
    fn neg(&self) -> Self {
        -self
    }
    fn exp(&self) -> Self {
        f64::exp(*self)
    }
    fn ln(&self) -> Self {
        f64::ln(*self)
    }
    fn powi(&self, n: u32) -> Self {
        f64::powi(*self, n as i32)
    }
    fn abs(&self) -> Self {
        f64::abs(*self)
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn log2_abs(&self) -> f64 {
        f64::abs(*self).log2()
    }
    fn is_negative(&self) -> bool {
        *self < 0.0
    }
}

/// Arbitrary-precision real at the thread's working precision.
#[derive(Debug, Clone)]
pub struct Mp(BigFloat);

impl Mp {
    fn wrap(x: BigFloat) -> Self {
        debug_assert!(!x.is_nan(), "multiprecision NaN: {:?}", x.err());
        Mp(x)
    }

    fn with_consts<T>(f: impl FnOnce(&mut Consts) -> T) -> T {
        CONSTS.with(|c| f(&mut c.borrow_mut()))
    }

    pub fn from_i64(x: i64) -> Self {
        Mp(BigFloat::from_i64(x, precision()))
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Mantissa bits actually carried.
    pub fn bits(&self) -> usize {
        self.0.mantissa_max_bit_len().unwrap_or(0)
    }
}

/// `x * 2^e` without intermediate overflow or underflow.
fn ldexp(mut x: f64, mut e: i64) -> f64 {
    while e > 1000 {
        x *= 2f64.powi(1000);
        e -= 1000;
        if x.is_infinite() {
            return x;
        }
    }
    while e < -1000 {
        x *= 2f64.powi(-1000);
        e += 1000;
        if x == 0.0 {
            return x;
        }
    }
    x * 2f64.powi(e as i32)
}

/// Top 64 mantissa bits and the binary exponent, value = top * 2^(e - 64).
fn top_word(x: &BigFloat) -> Option<(u64, i64, bool)> {
    let (words, _, sign, exp, _) = x.as_raw_parts()?;
    let top = *words.last()?;
    if top == 0 {
        return None;
    }
    Some((top, exp as i64, sign == Sign::Neg))
}

impl Real for Mp {
    fn lift(x: f64) -> Self {
        Mp(BigFloat::from_f64(x, precision().max(64)))
    }
    fn from_u128(x: u128) -> Self {
        let p = precision().max(128);
        let hi = BigFloat::from_u64((x >> 64) as u64, p);
        let lo = BigFloat::from_u64(x as u64, p);
        let shift = BigFloat::from_f64(2f64.powi(64), p);
        Mp(hi.mul(&shift, p, RM).add(&lo, p, RM))
    }
    fn add(&self, o: &Self) -> Self {
        Mp::wrap(self.0.add(&o.0, precision(), RM))
    }
    fn sub(&self, o: &Self) -> Self {
        Mp::wrap(self.0.sub(&o.0, precision(), RM))
    }
    fn mul(&self, o: &Self) -> Self {
        Mp::wrap(self.0.mul(&o.0, precision(), RM))
    }
    fn div(&self, o: &Self) -> Self {
        Mp::wrap(self.0.div(&o.0, precision(), RM))
    }
    fn neg(&self) -> Self {
        Mp(self.0.neg())
    }
    fn exp(&self) -> Self {
        Mp::wrap(Mp::with_consts(|cc| self.0.exp(precision(), RM, cc)))
    }
    fn ln(&self) -> Self {
        Mp::wrap(Mp::with_consts(|cc| self.0.ln(precision(), RM, cc)))
    }
    fn powi(&self, n: u32) -> Self {
        if n == 0 {
            return Self::one();
        }
        Mp::wrap(self.0.powi(n as usize, precision(), RM))
    }
    fn abs(&self) -> Self {
        Mp(self.0.abs())
    }
    fn to_f64(&self) -> f64 {
        if self.0.is_zero() {
            return 0.0;
        }
        match top_word(&self.0) {
            Some((top, e, neg)) => {
                let v = ldexp(top as f64, e - 64);
                if neg {
                    -v
                } else {
                    v
                }
            }
            None => f64::NAN,
        }
    }
    fn log2_abs(&self) -> f64 {
        if self.0.is_zero() {
            return f64::NEG_INFINITY;
        }
        match top_word(&self.0) {
            Some((top, e, _)) => (top as f64).log2() + (e - 64) as f64,
            None => f64::NAN,
        }
    }
    fn is_negative(&self) -> bool {
        self.0.is_negative()
    }
}

/// Euler's constant at the working precision (Brent-McMillan).
///
/// With `A_0 = -ln n`, `B_0 = 1`, `B_k = B_{k-1} n^2 / k^2` and
/// `A_k = (A_{k-1} n^2 / k + B_k) / k`, `gamma = sum A_k / sum B_k` up to an
/// error of order `exp(-4n)`.
pub fn euler_gamma() -> Mp {
    let p = precision();
    let n = ((p as f64) * std::f64::consts::LN_2 / 4.0).ceil() as u64 + 2;
    let terms = (3.6 * n as f64).ceil() as u64;
    with_precision(p + 32, || {
        let n2 = Mp::lift((n * n) as f64);
        let mut a = Mp::lift(n as f64).ln().neg();
        let mut b = Mp::one();
        let (mut sa, mut sb) = (a.clone(), b.clone());
        for k in 1..=terms {
            let kk = Mp::lift(k as f64);
            b = b.mul(&n2).div(&kk.mul(&kk));
            a = a.mul(&n2).div(&kk).add(&b).div(&kk);
            sa = sa.add(&a);
            sb = sb.add(&b);
        }
        sa.div(&sb)
    })
}
