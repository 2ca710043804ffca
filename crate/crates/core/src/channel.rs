//! One block-fading realization: random orthonormal beams, Rayleigh channel
//! vectors and the per-user, per-beam SINR matrix.
//!
//! Interferer `b` of every user is base station `b` of the network, so all
//! users that list an interferer at position `b` see the same beam set.
//!
//! Intercell shortcut: each interfering beam set is unitary, so
//! `sum_i |h_b phi_i^b|^2 = ||h_b||^2` and the interferer beams drop out of
//! the SINR. [`compute_sinr_shortcut`] and the simulator's fast path use this;
//! [`compute_sinr`] evaluates the literal sum.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::rng::{Stream, StreamTag, Substreams};
use crate::scenario::{Scenario, UserChannelProfile};

/// `M` orthonormal beams of dimension `M`, the columns of a Haar unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    m: usize,
    /// Beam `i` occupies `data[i*m .. (i+1)*m]`.
    data: Vec<Complex64>,
}

impl BeamSet {
    pub fn num_antennas(&self) -> usize {
        self.m
    }

    pub fn beam(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn beams(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.m)
    }

    /// Builds a beam set from explicit columns, checking orthonormality.
    pub fn from_columns(columns: Vec<Vec<Complex64>>) -> Result<Self> {
        let m = columns.len();
        if m == 0 || columns.iter().any(|c| c.len() != m) {
            return Err(Error::Dimension(format!(
                "beam set must be M x M with M >= 1, got {} columns",
                m
            )));
        }
        let set = Self {
            m,
            data: columns.into_iter().flatten().collect(),
        };
        for i in 0..m {
            for j in 0..m {
                let g = inner(set.beam(i), set.beam(j));
                let target = if i == j { 1.0 } else { 0.0 };
                if (g - target).norm() > 1e-10 {
                    return Err(Error::Dimension(format!(
                        "beams {i} and {j} are not orthonormal (<phi_i, phi_j> = {g})"
                    )));
                }
            }
        }
        Ok(set)
    }
}

/// `<a, b> = sum conj(a_i) b_i`.
fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `|h phi|^2` for a row vector `h` and column `phi`.
#[inline]
fn gain(h: &[Complex64], phi: &[Complex64]) -> f64 {
    h.iter()
        .zip(phi)
        .map(|(x, y)| x * y)
        .sum::<Complex64>()
        .norm_sqr()
}

#[inline]
fn norm_sqr(h: &[Complex64]) -> f64 {
    h.iter().map(|z| z.norm_sqr()).sum()
}

/// Draws a Haar-distributed beam set.
///
/// Gram-Schmidt on the columns of an i.i.d. complex Gaussian matrix is its QR
/// decomposition with a positive real diagonal in R, which makes Q unique and
/// Haar. Each projection pass is applied twice to hold orthogonality at
/// machine precision.
pub fn draw_beams(m: usize, stream: &mut Stream) -> Result<BeamSet> {
    if m == 0 {
        return Err(Error::Dimension("draw_beams needs M >= 1".into()));
    }
    let mut data = vec![Complex64::new(0.0, 0.0); m * m];
    stream.fill_complex_gaussian(&mut data);
    for i in 0..m {
        let (done, rest) = data.split_at_mut(i * m);
        let col = &mut rest[..m];
        for _ in 0..2 {
            for q in done.chunks_exact(m) {
                let r = inner(q, col);
                for (c, qv) in col.iter_mut().zip(q) {
                    *c -= r * qv;
                }
            }
        }
        let norm = norm_sqr(col).sqrt();
        for c in col.iter_mut() {
            *c /= norm;
        }
    }
    Ok(BeamSet { m, data })
}

/// Row-major `K0 x M` matrix of per-user, per-beam SINRs.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrMatrix {
    users: usize,
    beams: usize,
    data: Vec<f64>,
}

impl SinrMatrix {
    pub fn zeros(users: usize, beams: usize) -> Self {
        Self {
            users,
            beams,
            data: vec![0.0; users * beams],
        }
    }

    pub fn num_users(&self) -> usize {
        self.users
    }

    pub fn num_beams(&self) -> usize {
        self.beams
    }

    pub fn get(&self, k: usize, m: usize) -> f64 {
        self.data[k * self.beams + m]
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.beams..(k + 1) * self.beams]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.beams..(k + 1) * self.beams]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Small-scale channel vectors of one user.
#[derive(Debug, Clone, PartialEq)]
pub struct UserChannels {
    /// `h^(0)`, length `M`.
    pub serving: Vec<Complex64>,
    /// `h^(b)` for each interferer in profile order, each length `M`.
    pub interferers: Vec<Vec<Complex64>>,
}

impl UserChannels {
    /// Draws the user's vectors: serving first, then interferers in order.
    pub fn draw(m: usize, num_interferers: usize, stream: &mut Stream) -> Self {
        let mut serving = vec![Complex64::new(0.0, 0.0); m];
        stream.fill_complex_gaussian(&mut serving);
        let interferers = (0..num_interferers)
            .map(|_| {
                let mut h = vec![Complex64::new(0.0, 0.0); m];
                stream.fill_complex_gaussian(&mut h);
                h
            })
            .collect();
        Self {
            serving,
            interferers,
        }
    }
}

/// One realization of every random quantity of a trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw {
    pub beams: BeamSet,
    /// Beam set of interfering base station `b`, for `b < max J_k`.
    pub interferer_beams: Vec<BeamSet>,
    pub users: Vec<UserChannels>,
    pub sinr: SinrMatrix,
}

impl ChannelDraw {
    /// Draws trial `trial` of `substreams` and evaluates the literal SINR.
    pub fn generate(s: &Scenario, substreams: &Substreams, trial: u64) -> Result<Self> {
        let m = s.num_antennas;
        let beams = draw_beams(m, &mut substreams.stream(trial, StreamTag::ServingBeams))?;
        let interferer_beams = (0..s.max_interferers())
            .map(|b| {
                draw_beams(
                    m,
                    &mut substreams.stream(trial, StreamTag::InterfererBeams(b)),
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let users: Vec<UserChannels> = s
            .users
            .iter()
            .enumerate()
            .map(|(k, u)| {
                UserChannels::draw(
                    m,
                    u.num_interferers(),
                    &mut substreams.stream(trial, StreamTag::User(k)),
                )
            })
            .collect();
        let sinr = compute_sinr(s, &beams, &users, &interferer_beams)?;
        Ok(Self {
            beams,
            interferer_beams,
            users,
            sinr,
        })
    }
}

fn check_dims(s: &Scenario, beams: &BeamSet, users: &[UserChannels]) -> Result<()> {
    let m = s.num_antennas;
    if beams.num_antennas() != m {
        return Err(Error::Dimension(format!(
            "beam set is {0}x{0}, scenario has M = {m}",
            beams.num_antennas()
        )));
    }
    if users.len() != s.num_users() {
        return Err(Error::Dimension(format!(
            "{} channel sets for {} users",
            users.len(),
            s.num_users()
        )));
    }
    for (k, (u, p)) in users.iter().zip(&s.users).enumerate() {
        if u.serving.len() != m || u.interferers.iter().any(|h| h.len() != m) {
            return Err(Error::Dimension(format!(
                "user {k}: channel vectors must have length {m}"
            )));
        }
        if u.interferers.len() != p.num_interferers() {
            return Err(Error::Dimension(format!(
                "user {k}: {} interferer channels for J = {}",
                u.interferers.len(),
                p.num_interferers()
            )));
        }
    }
    Ok(())
}

/// Per-beam SINR of one user given its intercell interference power;
/// `powers` is scratch of length M.
#[inline]
fn fill_row(
    rho0: f64,
    h: &[Complex64],
    beams: &BeamSet,
    intercell: f64,
    powers: &mut [f64],
    row: &mut [f64],
) {
    if let ([z], [phi]) = (&mut *row, beams.data.as_slice()) {
        // single beam: no intracell interference
        *z = rho0 * gain(h, std::slice::from_ref(phi)) / (intercell + 1.0);
        return;
    }
    for (pi, phi) in powers.iter_mut().zip(beams.beams()) {
        *pi = rho0 * gain(h, phi);
    }
    for (mm, z) in row.iter_mut().enumerate() {
        let mut intracell = 0.0;
        for (i, &pi) in powers.iter().enumerate() {
            if i != mm {
                intracell += pi;
            }
        }
        *z = powers[mm] / (intracell + intercell + 1.0);
    }
}

/// SINR matrix with the intercell term evaluated literally over every
/// interfering beam.
pub fn compute_sinr(
    s: &Scenario,
    beams: &BeamSet,
    users: &[UserChannels],
    interferer_beams: &[BeamSet],
) -> Result<SinrMatrix> {
    check_dims(s, beams, users)?;
    if interferer_beams.len() < s.max_interferers()
        || interferer_beams
            .iter()
            .any(|b| b.num_antennas() != s.num_antennas)
    {
        return Err(Error::Dimension(format!(
            "need {} interferer beam sets of size M = {}",
            s.max_interferers(),
            s.num_antennas
        )));
    }
    let mut out = SinrMatrix::zeros(s.num_users(), s.num_antennas);
    let mut powers = vec![0.0; s.num_antennas];
    for (k, (u, p)) in users.iter().zip(&s.users).enumerate() {
        let intercell: f64 = u
            .interferers
            .iter()
            .zip(&p.rho_interferers)
            .zip(interferer_beams)
            .map(|((h, rho), set)| rho * set.beams().map(|phi| gain(h, phi)).sum::<f64>())
            .sum();
        fill_row(
            p.rho_serving,
            &u.serving,
            beams,
            intercell,
            &mut powers,
            out.row_mut(k),
        );
    }
    Ok(out)
}

/// SINR matrix using `sum_i |h_b phi_i^b|^2 = ||h_b||^2`.
pub fn compute_sinr_shortcut(
    s: &Scenario,
    beams: &BeamSet,
    users: &[UserChannels],
) -> Result<SinrMatrix> {
    check_dims(s, beams, users)?;
    let mut out = SinrMatrix::zeros(s.num_users(), s.num_antennas);
    let mut powers = vec![0.0; s.num_antennas];
    for (k, (u, p)) in users.iter().zip(&s.users).enumerate() {
        fill_row(
            p.rho_serving,
            &u.serving,
            beams,
            shortcut_intercell(u, p),
            &mut powers,
            out.row_mut(k),
        );
    }
    Ok(out)
}

fn shortcut_intercell(u: &UserChannels, p: &UserChannelProfile) -> f64 {
    u.interferers
        .iter()
        .zip(&p.rho_interferers)
        .map(|(h, rho)| rho * norm_sqr(h))
        .sum()
}

/// Reusable buffers for drawing one user's SINR row without allocating.
#[derive(Debug, Clone)]
pub(crate) struct RowScratch {
    h: Vec<Complex64>,
    powers: Vec<f64>,
}

impl RowScratch {
    pub(crate) fn new(m: usize) -> Self {
        Self {
            h: vec![Complex64::new(0.0, 0.0); m],
            powers: vec![0.0; m],
        }
    }
}

/// Draws user `k`'s channels from its substream and writes its SINR row
/// (shortcut form). Consumes the stream exactly as [`UserChannels::draw`].
pub(crate) fn draw_user_row(
    p: &UserChannelProfile,
    beams: &BeamSet,
    stream: &mut Stream,
    scratch: &mut RowScratch,
    row: &mut [f64],
) {
    let m = beams.num_antennas();
    let mut serving = std::mem::take(&mut scratch.h);
    stream.fill_complex_gaussian(&mut serving);
    let mut intercell = 0.0;
    for &rho in &p.rho_interferers {
        let mut e = 0.0;
        for _ in 0..m {
            e += stream.complex_gaussian().norm_sqr();
        }
        intercell += rho * e;
    }
    fill_row(
        p.rho_serving,
        &serving,
        beams,
        intercell,
        &mut scratch.powers,
        row,
    );
    scratch.h = serving;
}
