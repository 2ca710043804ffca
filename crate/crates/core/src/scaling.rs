//! Extreme-value checks and the `M ln ln K0` scaling sweep.

use serde::Serialize;

use crate::analytic::SinrDistribution;
use crate::error::{Error, Result};
use crate::rate::quadrature_rate;
use crate::scenario::{Scenario, UserChannelProfile};
use crate::scheduler::{ScheduleOutcome, Simulator, TrialSink};

/// Smallest population for which the window and the sweep are defined.
pub const MIN_K0: u64 = 16;

/// Largest population simulated by [`mc_in_window_frequency`].
pub const MAX_MC_K0: u64 = 10_000;

/// Concentration window of the winner's SINR at population `k0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Window {
    pub lo: f64,
    pub hi: f64,
}

impl Window {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }
}

/// `lo = rho_0 ln K0 - rho_0 n ln ln K0`, `hi = rho_0 ln K0 - rho_0 (n-2) ln ln K0`
/// with `n = (J+1) M`; the `ln ln ln K0` corrections are not included.
///
/// The window is asymptotic. For `n > 2` the omitted terms grow with `n`
/// and the level `w` can sit above `hi` (or `hi` below zero) until `K0` is
/// far beyond simulation scale.
pub fn concentration_window(d: &SinrDistribution, k0: f64) -> Result<Window> {
    if !(k0 >= MIN_K0 as f64) || !k0.is_finite() {
        return Err(Error::domain("K0 (need K0 >= 16)", k0));
    }
    let rho0 = d.rho_serving();
    let n = (d.tail_order() + 1) as f64;
    let l = k0.ln();
    let ll = l.ln();
    Ok(Window {
        lo: rho0 * l - rho0 * n * ll,
        hi: rho0 * l - rho0 * (n - 2.0) * ll,
    })
}

/// `count` integers spread log-uniformly over `[lo, hi]`, endpoints included.
pub fn log_spaced_grid(lo: u64, hi: u64, count: usize) -> Result<Vec<u64>> {
    if lo == 0 || hi < lo || count == 0 || (count == 1 && hi != lo) {
        return Err(Error::Config(format!(
            "invalid log grid {lo}..{hi} with {count} points"
        )));
    }
    let (a, b) = ((lo as f64).ln(), (hi as f64).ln());
    let mut out: Vec<u64> = (0..count)
        .map(|i| {
            let t = if count == 1 {
                0.0
            } else {
                i as f64 / (count - 1) as f64
            };
            ((a + t * (b - a)).exp().round() as u64).clamp(lo, hi)
        })
        .collect();
    out.dedup();
    Ok(out)
}

/// One grid point of a [`ScalingSweep`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalingRow {
    pub k0: u64,
    pub w: f64,
    pub w_two_term: f64,
    pub w_lb: f64,
    pub w_ub: f64,
    pub residual: f64,
    pub lo: f64,
    pub hi: f64,
    /// Individual sum rate by quadrature, bits per channel use.
    pub rate_bits: f64,
    /// `rate_bits / (M log2(e) ln ln K0)`.
    pub scaling_ratio: f64,
    /// `M log2(1 + w + rho_0 ln ln K0)`.
    pub eq27_bound: f64,
    pub mc_in_window_freq: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScalingSweep {
    pub user: usize,
    pub rows: Vec<ScalingRow>,
}

fn check_grid(grid: &[u64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config("empty K0 grid".into()));
    }
    if grid[0] < MIN_K0 {
        return Err(Error::Config(format!(
            "K0 grid starts at {} < {MIN_K0}",
            grid[0]
        )));
    }
    if grid.windows(2).any(|p| p[1] <= p[0]) {
        return Err(Error::Config("K0 grid must be strictly increasing".into()));
    }
    Ok(())
}

/// Analytic sweep of user `user`'s profile over `grid`.
pub fn scaling_ratio_sweep(s: &Scenario, user: usize, grid: &[u64]) -> Result<ScalingSweep> {
    check_grid(grid)?;
    let profile = s
        .users
        .get(user)
        .ok_or_else(|| Error::Config(format!("user {user} not in 0..{}", s.num_users())))?;
    let d = SinrDistribution::from_profile(s.num_antennas, profile);
    let m = s.num_antennas as f64;
    let rows = grid
        .iter()
        .map(|&k0| {
            let k = k0 as f64;
            let level = d.solve_level(k)?;
            let asym = d.asymptotic_level(k)?;
            let window = concentration_window(&d, k)?;
            let rate_bits = quadrature_rate(&d, k0)?;
            let lnln = k.ln().ln();
            Ok(ScalingRow {
                k0,
                w: level.w,
                w_two_term: asym.two_term,
                w_lb: level.w_lb,
                w_ub: level.w_ub,
                residual: level.residual,
                lo: window.lo,
                hi: window.hi,
                rate_bits,
                scaling_ratio: rate_bits / (m * std::f64::consts::LOG2_E * lnln),
                eq27_bound: m * (1.0 + level.w + d.rho_serving() * lnln).log2(),
                mc_in_window_freq: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ScalingSweep { user, rows })
}

/// Counts of winner SINRs inside the winner's own window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WindowFrequency {
    pub k0: u64,
    pub inside: u64,
    /// Trials times beams.
    pub total: u64,
}

impl WindowFrequency {
    pub fn frequency(&self) -> f64 {
        self.inside as f64 / self.total as f64
    }
}

struct WindowSink<'a> {
    windows: &'a [Window],
    inside: u64,
    total: u64,
}

impl TrialSink for WindowSink<'_> {
    fn record(&mut self, _trial: u64, o: &ScheduleOutcome) {
        for w in &o.winners {
            self.total += 1;
            if self.windows[w.user].contains(w.true_sinr) {
                self.inside += 1;
            }
        }
    }

    fn merge(&mut self, later: Self) {
        self.inside += later.inside;
        self.total += later.total;
    }
}

/// Simulates the scheduler on `s` and counts, per beam, how often the
/// winner's SINR lies in its window at `K0 = s.num_users()`.
pub fn mc_in_window_frequency(
    s: &Scenario,
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<WindowFrequency> {
    let k0 = s.num_users() as u64;
    if k0 > MAX_MC_K0 {
        return Err(Error::Config(format!(
            "Monte Carlo window check is limited to K0 <= {MAX_MC_K0}"
        )));
    }
    if trials == 0 {
        return Err(Error::domain("trials (need at least 1)", 0.0));
    }
    let sim = Simulator::new(s, seed);
    let windows = sim
        .distributions()
        .iter()
        .map(|d| concentration_window(d, k0 as f64))
        .collect::<Result<Vec<_>>>()?;
    let sink = sim.run(trials, workers, || WindowSink {
        windows: &windows,
        inside: 0,
        total: 0,
    })?;
    Ok(WindowFrequency {
        k0,
        inside: sink.inside,
        total: sink.total,
    })
}

/// `k0` users sharing one profile.
pub fn replicated_scenario(
    num_antennas: usize,
    profile: &UserChannelProfile,
    k0: u64,
) -> Result<Scenario> {
    Scenario::from_profiles(
        num_antennas,
        (0..k0).map(|_| (profile.rho_serving, profile.rho_interferers.clone())),
    )
}

/// [`scaling_ratio_sweep`] plus the in-window frequency for every grid point
/// up to [`MAX_MC_K0`], simulated with `user`'s profile replicated `K0` times.
pub fn scaling_sweep_with_mc(
    s: &Scenario,
    user: usize,
    grid: &[u64],
    trials: u64,
    seed: u64,
    workers: usize,
) -> Result<ScalingSweep> {
    let mut sweep = scaling_ratio_sweep(s, user, grid)?;
    for row in sweep.rows.iter_mut().filter(|r| r.k0 <= MAX_MC_K0) {
        let rep = replicated_scenario(s.num_antennas, &s.users[user], row.k0)?;
        row.mc_in_window_freq =
            Some(mc_in_window_frequency(&rep, trials, seed, workers)?.frequency());
    }
    Ok(sweep)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GumbelPoint {
    pub x: f64,
    pub criterion: f64,
    pub von_mises: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GumbelReport {
    /// `x = 10^j`, `j = 0..=8`.
    pub points: Vec<GumbelPoint>,
    /// `|g'|` non-increasing from `x = 10^2` on.
    pub monotone: bool,
    /// `|g'(10^8)| < 1e-9`.
    pub final_small: bool,
    /// `|von Mises ratio - 1| <= 1e-6` at `x = 10^6`.
    pub von_mises_converged: bool,
}

impl GumbelReport {
    pub fn passes(&self) -> bool {
        self.monotone && self.final_small && self.von_mises_converged
    }
}

pub fn gumbel_attraction_check(d: &SinrDistribution) -> GumbelReport {
    let points: Vec<GumbelPoint> = (0..=8)
        .map(|j| {
            let x = 10f64.powi(j);
            GumbelPoint {
                x,
                criterion: d.gumbel_criterion(x).expect("x > 0"),
                von_mises: d.von_mises_ratio(x).expect("x > 0"),
            }
        })
        .collect();
    let monotone = points[2..]
        .windows(2)
        .all(|p| p[1].criterion.abs() <= p[0].criterion.abs());
    GumbelReport {
        monotone,
        final_small: points[8].criterion.abs() < 1e-9,
        von_mises_converged: (points[6].von_mises - 1.0).abs() <= 1e-6,
        points,
    }
}
