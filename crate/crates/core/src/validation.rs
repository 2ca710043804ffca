//! Property suite cross-checking the analytic and stochastic engines on one
//! scenario.
//!
//! Every check reports a statistic against a critical value:
//!
//! * per-user KS of the simulated beam-0 SINR against the analytic CDF;
//! * per-user KS of the virtual SINR `F_k(Z)` against the uniform law;
//! * per-user KS of the beam-0 winner's SINR against `F_k^K0`;
//! * per-user, per-beam binomial z-score of the selection count;
//! * closed form against quadrature on a grid of `K0`.
//!
//! KS tests run at the 1% level (see [`crate::ks::critical_value`]).

use rayon::prelude::*;
use serde::Serialize;

use crate::analytic::SinrDistribution;
use crate::channel::ChannelDraw;
use crate::error::{Error, Result};
use crate::ks::{ks_test, KsOutcome};
use crate::rate::{closed_form_rate, quadrature_rate, ClosedFormOptions};
use crate::rng::Substreams;
use crate::scenario::Scenario;
use crate::scheduler::{ScheduleOutcome, Simulator, TrialSink};

pub const MIN_TRIALS: u64 = 10_000;

/// Largest binomial z-score accepted for a selection count.
pub const FAIRNESS_SIGMAS: f64 = 3.0;

/// Largest relative closed-form vs quadrature discrepancy accepted.
pub const RATE_REL_TOL: f64 = 1e-6;

/// `K0` values of the closed-form vs quadrature check (the scenario's own
/// `K0` is added when within the closed-form cap).
pub const RATE_GRID: [u64; 4] = [1, 2, 8, 32];

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationOptions {
    pub trials: u64,
    pub seed: u64,
    pub workers: usize,
    /// Multiplies every user's serving SNR on the analytic side only; a
    /// negative control that the KS checks must reject.
    pub corrupt_rho: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    SinrCdf,
    VirtualUniform,
    WinnerCdf,
    Fairness,
    ClosedVsQuadrature,
}

/// One statistic against its critical value.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub kind: CheckKind,
    pub user: usize,
    /// Beam for fairness, `K0` for the rate check, 0 otherwise.
    pub index: u64,
    pub samples: u64,
    pub statistic: f64,
    pub critical: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }

    pub fn failures(&self) -> usize {
        self.checks.iter().filter(|c| !c.pass).count()
    }
}

fn ks_check(kind: CheckKind, user: usize, ks: KsOutcome) -> Check {
    Check {
        kind,
        user,
        index: 0,
        samples: ks.n as u64,
        statistic: ks.statistic,
        critical: ks.critical,
        pass: ks.passes(),
    }
}

struct WinnerSink {
    counts: Vec<Vec<u64>>,
    beam0: Vec<Vec<f64>>,
}

impl TrialSink for WinnerSink {
    fn record(&mut self, _trial: u64, o: &ScheduleOutcome) {
        for (m, w) in o.winners.iter().enumerate() {
            self.counts[w.user][m] += 1;
        }
        let w = o.winners[0];
        self.beam0[w.user].push(w.true_sinr);
    }

    fn merge(&mut self, later: Self) {
        for (a, b) in self.counts.iter_mut().zip(&later.counts) {
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
        }
        for (a, b) in self.beam0.iter_mut().zip(later.beam0) {
            a.extend(b);
        }
    }
}

/// Analytic side of the suite, possibly corrupted.
fn analytic_side(s: &Scenario, corrupt: Option<f64>) -> Result<Vec<SinrDistribution>> {
    let factor = corrupt.unwrap_or(1.0);
    if !(factor.is_finite() && factor > 0.0) {
        return Err(Error::Config(format!(
            "corruption factor must be positive, got {factor}"
        )));
    }
    s.users
        .iter()
        .map(|u| {
            SinrDistribution::new(
                s.num_antennas,
                u.rho_serving * factor,
                u.rho_interferers.clone(),
            )
        })
        .collect()
}

/// Beam-0 SINR of every user over `trials` literal channel draws;
/// `out[k][t]`.
fn sinr_samples(s: &Scenario, trials: u64, seed: u64, workers: usize) -> Result<Vec<Vec<f64>>> {
    let subs = Substreams::new(seed);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Pool(e.to_string()))?;
    let rows: Vec<Vec<f64>> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|t| {
                ChannelDraw::generate(s, &subs, t)
                    .map(|d| (0..s.num_users()).map(|k| d.sinr.get(k, 0)).collect())
            })
            .collect::<Result<_>>()
    })?;
    Ok((0..s.num_users())
        .map(|k| rows.iter().map(|r| r[k]).collect())
        .collect())
}

pub fn validate(s: &Scenario, opts: &ValidationOptions) -> Result<ValidationReport> {
    if opts.trials < MIN_TRIALS {
        return Err(Error::Config(format!(
            "validation needs at least {MIN_TRIALS} trials, got {}",
            opts.trials
        )));
    }
    if opts.workers == 0 {
        return Err(Error::Pool("worker count must be at least 1".into()));
    }
    let dists = analytic_side(s, opts.corrupt_rho)?;
    let k0 = s.num_users();
    let mut checks = Vec::new();

    let samples = sinr_samples(s, opts.trials, opts.seed, opts.workers)?;
    for (k, (d, mut x)) in dists.iter().zip(samples).enumerate() {
        let mut u: Vec<f64> = x.iter().map(|&z| d.cdf(z)).collect::<Result<_>>()?;
        checks.push(ks_check(
            CheckKind::SinrCdf,
            k,
            ks_test(&mut x, |z| d.cdf(z).unwrap_or(f64::NAN)),
        ));
        checks.push(ks_check(
            CheckKind::VirtualUniform,
            k,
            ks_test(&mut u, |v| v.clamp(0.0, 1.0)),
        ));
    }

    // the scheduler runs on the true statistics
    let sim = Simulator::new(s, opts.seed);
    let m = s.num_antennas;
    let sink = sim.run(opts.trials, opts.workers, || WinnerSink {
        counts: vec![vec![0; m]; k0],
        beam0: vec![Vec::new(); k0],
    })?;
    for (k, (d, mut x)) in dists.iter().zip(sink.beam0).enumerate() {
        let ks = ks_test(&mut x, |z| (-d.log_tail(z).exp_m1()).powi(k0 as i32));
        checks.push(ks_check(CheckKind::WinnerCdf, k, ks));
    }
    let n = opts.trials as f64;
    let p = 1.0 / k0 as f64;
    let sigma = (n * p * (1.0 - p)).sqrt();
    for (k, counts) in sink.counts.iter().enumerate() {
        for (beam, &c) in counts.iter().enumerate() {
            let dev = (c as f64 - n * p).abs();
            // a single user wins every beam: sigma = 0 and dev must be 0
            let z = if sigma > 0.0 { dev / sigma } else { dev };
            checks.push(Check {
                kind: CheckKind::Fairness,
                user: k,
                index: beam as u64,
                samples: opts.trials,
                statistic: z,
                critical: FAIRNESS_SIGMAS,
                pass: z <= FAIRNESS_SIGMAS,
            });
        }
    }

    let cap = ClosedFormOptions::default();
    let mut grid = RATE_GRID.to_vec();
    if (k0 as u64) <= cap.cap && !grid.contains(&(k0 as u64)) {
        grid.push(k0 as u64);
        grid.sort_unstable();
    }
    for (k, d) in dists.iter().enumerate() {
        for &kk in &grid {
            let c = closed_form_rate(d, kk, cap)?;
            let q = quadrature_rate(d, kk)?;
            let rel = (c - q).abs() / q.abs();
            checks.push(Check {
                kind: CheckKind::ClosedVsQuadrature,
                user: k,
                index: kk,
                samples: 0,
                statistic: rel,
                critical: RATE_REL_TOL,
                pass: rel <= RATE_REL_TOL,
            });
        }
    }
    Ok(ValidationReport { checks })
}
