//! Counter-based random substreams.
//!
//! Every random object of a trial (the serving beam set, each interfering
//! cell's beam set, each user's channel vectors) owns a substream keyed by
//! `(master seed, trial, object)`. The key is hashed into the seed of a small
//! xoshiro256++ generator, so a trial's randomness never depends on which
//! worker runs it or in what order.

use num_complex::Complex64;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

/// Random object within one trial.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamTag {
    ServingBeams,
    /// Beam set of interfering base station `b` (0-based).
    InterfererBeams(usize),
    /// Serving and interfering channel vectors of user `k`.
    User(usize),
}

impl StreamTag {
    fn code(self) -> u64 {
        match self {
            StreamTag::ServingBeams => 0,
            StreamTag::InterfererBeams(b) => 1 + ((b as u64) << 2),
            StreamTag::User(k) => 2 + ((k as u64) << 2),
        }
    }
}

/// splitmix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Factory of substreams derived from one master seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Substreams {
    seed: u64,
}

impl Substreams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self, trial: u64, tag: StreamTag) -> Stream {
        let mut h = mix64(self.seed ^ 0x9e37_79b9_7f4a_7c15);
        h = mix64(h ^ trial.wrapping_mul(0xd1b5_4a32_d192_ed03));
        h = mix64(h ^ tag.code().wrapping_mul(0xaef1_7502_108e_f2d9));
        Stream(Xoshiro256PlusPlus::seed_from_u64(h))
    }
}

/// One substream.
#[derive(Debug, Clone)]
pub struct Stream(Xoshiro256PlusPlus);

impl Stream {
    /// Uniform on (0, 1], 53-bit resolution.
    #[inline]
    pub fn uniform_open0(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard complex Gaussian (Box-Muller): real and imaginary parts are
    /// independent N(0, 1/2), so E|h|^2 = 1.
    #[inline]
    pub fn complex_gaussian(&mut self) -> Complex64 {
        let u1 = self.uniform_open0();
        let u2 = self.uniform_open0();
        let r = (-u1.ln()).sqrt();
        let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
        Complex64::new(r * c, r * s)
    }

    pub fn fill_complex_gaussian(&mut self, out: &mut [Complex64]) {
        for z in out {
            *z = self.complex_gaussian();
        }
    }
}
