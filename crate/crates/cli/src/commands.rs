use std::fmt;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use cdfsched::rate::{rate_report, ClosedFormOptions, RateMethod};
use cdfsched::scaling::{log_spaced_grid, scaling_ratio_sweep, scaling_sweep_with_mc, ScalingRow};
use cdfsched::scheduler::{default_workers, simulate_with_workers, Estimate};
use cdfsched::validation::{self, CheckKind, ValidationOptions};
use cdfsched::{Error, Scenario};

use crate::manifest::RunManifest;
use crate::{Common, Method};

/// Largest closed-form vs quadrature discrepancy `rate --method both`
/// accepts.
pub const RATE_BOTH_TOL: f64 = 1e-5;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn usage(message: impl Into<String>) -> Self {
        Self {
            code: 2,
            message: message.into(),
        }
    }

    fn failure(message: impl Into<String>) -> Self {
        Self {
            code: 1,
            message: message.into(),
        }
    }

    pub fn code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::PrecisionExhausted { .. } | Error::Pool(_) => Self::failure(e.to_string()),
            _ => Self::usage(e.to_string()),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn load(path: &Path) -> CliResult<(Scenario, Vec<u8>)> {
    let bytes = std::fs::read(path)
        .map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let text = String::from_utf8(bytes.clone())
        .map_err(|_| CliError::usage(format!("{} is not UTF-8", path.display())))?;
    match Scenario::from_json_str(&text) {
        Ok(s) => Ok((s, bytes)),
        Err(Error::Validation(v)) => {
            let list: Vec<String> = v.iter().map(|x| format!("  - {x}")).collect();
            Err(CliError::usage(format!(
                "invalid config {} ({} problems):\n{}",
                path.display(),
                v.len(),
                list.join("\n")
            )))
        }
        Err(e) => Err(CliError::usage(format!("{}: {e}", path.display()))),
    }
}

fn workers() -> CliResult<usize> {
    Ok(default_workers()?)
}

/// Shortest round-trip decimal, switching to exponent form outside
/// `[1e-4, 1e15)`.
fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e15).contains(&a) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn csv_body(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("CSV fields are UTF-8")
}

/// Writes header + body to `--out` (with the manifest sidecar) or stdout.
fn emit(common: &Common, mut manifest: RunManifest, body: &str, started: Instant) -> CliResult<()> {
    let secs = started.elapsed().as_secs_f64();
    manifest.duration_s = Some(secs);
    let text = format!("{}{body}", manifest.header());
    match &common.out {
        Some(path) => {
            let io = |e: std::io::Error| CliError::failure(format!("{}: {e}", path.display()));
            std::fs::write(path, text).map_err(io)?;
            let mut side = path.clone().into_os_string();
            side.push(".manifest.json");
            std::fs::write(&side, manifest.to_json() + "\n").map_err(io)?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())
                .map_err(|e| CliError::failure(format!("stdout: {e}")))?;
        }
    }
    eprintln!("{} finished in {secs:.2} s", manifest.command);
    Ok(())
}

pub fn rate(common: &Common, user: Option<usize>, method: Method) -> CliResult<()> {
    let started = Instant::now();
    let (s, bytes) = load(&common.config)?;
    let users: Vec<usize> = match user {
        Some(k) if k >= s.num_users() => {
            return Err(CliError::usage(format!(
                "--user {k} not in 0..{}",
                s.num_users()
            )))
        }
        Some(k) => vec![k],
        None => (0..s.num_users()).collect(),
    };
    let (m, name) = match method {
        Method::Closed => (RateMethod::Closed, "closed"),
        Method::Quadrature => (RateMethod::Quadrature, "quadrature"),
        Method::Both => (RateMethod::Both, "both"),
    };
    let opts = ClosedFormOptions::default();
    let mut rows = Vec::new();
    let mut worst = 0.0f64;
    for &k in &users {
        let r = rate_report(&s, k, m, opts)?;
        if let Some(d) = r.discrepancy {
            worst = worst.max(d);
        }
        eprintln!(
            "user {k}: closed {} quadrature {} discrepancy {}",
            opt_num(r.closed),
            opt_num(r.quadrature),
            opt_num(r.discrepancy)
        );
        rows.push(vec![
            k.to_string(),
            opt_num(r.closed),
            opt_num(r.quadrature),
            opt_num(r.discrepancy),
        ]);
    }
    let manifest = RunManifest::new("rate", &common.config, &bytes, common.seed)
        .param("method", name)
        .param("users", user.map_or("all".to_string(), |k| k.to_string()))
        .param("k0", s.num_users());
    let body = csv_body(
        &["user", "closed_bits", "quadrature_bits", "discrepancy"],
        &rows,
    );
    emit(common, manifest, &body, started)?;
    if worst > RATE_BOTH_TOL {
        return Err(CliError::failure(format!(
            "closed form and quadrature disagree by {worst:.3e} (limit {RATE_BOTH_TOL:e})"
        )));
    }
    Ok(())
}

fn estimate_fields(e: &Estimate) -> (String, String) {
    (num(e.mean), opt_num(e.std_error))
}

pub fn simulate(common: &Common, trials: u64) -> CliResult<()> {
    let started = Instant::now();
    let (s, bytes) = load(&common.config)?;
    let r = simulate_with_workers(&s, trials, common.seed, workers()?)?;
    let mut rows = Vec::new();
    for (k, counts) in r.selection_counts.iter().enumerate() {
        let (mean, se) = estimate_fields(&r.per_user_rate[k]);
        let individual = num(r.per_user_individual_sum_rate[k].mean);
        for (m, c) in counts.iter().enumerate() {
            rows.push(vec![
                k.to_string(),
                m.to_string(),
                c.to_string(),
                mean.clone(),
                se.clone(),
                individual.clone(),
            ]);
        }
    }
    let (sum, sum_se) = estimate_fields(&r.mean_sum_rate);
    rows.push(vec![
        "sum_rate".into(),
        String::new(),
        trials.to_string(),
        sum,
        sum_se,
        String::new(),
    ]);
    let p = r.multi_beam_collision_rate;
    let p_se = (trials > 1).then(|| (p * (1.0 - p) / trials as f64).sqrt());
    rows.push(vec![
        "collision_rate".into(),
        String::new(),
        ((p * trials as f64).round() as u64).to_string(),
        num(p),
        opt_num(p_se),
        String::new(),
    ]);
    eprintln!(
        "sum rate {} bits/use (se {}), multi-beam collision rate {}",
        num(r.mean_sum_rate.mean),
        opt_num(r.mean_sum_rate.std_error),
        num(p)
    );
    let mut manifest = RunManifest::new("simulate", &common.config, &bytes, common.seed);
    manifest.trials = Some(trials);
    let body = csv_body(
        &[
            "user",
            "beam",
            "selection_count",
            "mean_rate",
            "stderr",
            "individual_sum_rate_empirical",
        ],
        &rows,
    );
    emit(common, manifest, &body, started)
}

/// `lo:hi:count` log-spaced, or a comma-separated list.
pub fn parse_grid(spec: &str) -> CliResult<Vec<u64>> {
    let bad = || CliError::usage(format!("bad --k0-grid {spec:?}: use lo:hi:count or a,b,c"));
    let int = |t: &str| -> CliResult<u64> {
        let v: f64 = t.trim().parse().map_err(|_| bad())?;
        if v >= 1.0 && v.fract() == 0.0 && v < 1.8e19 {
            Ok(v as u64)
        } else {
            Err(bad())
        }
    };
    let parts: Vec<&str> = spec.split(':').collect();
    match parts.as_slice() {
        [lo, hi, count] => {
            let count: usize = count.trim().parse().map_err(|_| bad())?;
            Ok(log_spaced_grid(int(lo)?, int(hi)?, count)?)
        }
        [list] => list.split(',').map(int).collect(),
        _ => Err(bad()),
    }
}

fn scaling_row(r: &ScalingRow, with_mc: bool) -> Vec<String> {
    let mut v = vec![
        r.k0.to_string(),
        num(r.w),
        num(r.w_two_term),
        num(r.w_lb),
        num(r.w_ub),
        num(r.lo),
        num(r.hi),
        num(r.rate_bits),
        num(r.scaling_ratio),
        num(r.eq27_bound),
    ];
    if with_mc {
        v.push(opt_num(r.mc_in_window_freq));
    }
    v
}

pub fn scaling(common: &Common, user: usize, grid: &str, with_mc: Option<u64>) -> CliResult<()> {
    let started = Instant::now();
    let (s, bytes) = load(&common.config)?;
    if user >= s.num_users() {
        return Err(CliError::usage(format!(
            "--user {user} not in 0..{}",
            s.num_users()
        )));
    }
    let k0s = parse_grid(grid)?;
    let w = if with_mc.is_some() { workers()? } else { 1 };
    let mut rows = Vec::new();
    for &k0 in &k0s {
        let sweep = match with_mc {
            Some(t) => scaling_sweep_with_mc(&s, user, &[k0], t, common.seed, w)?,
            None => scaling_ratio_sweep(&s, user, &[k0])?,
        };
        let r = &sweep.rows[0];
        eprintln!(
            "K0={k0}: w={} rate={} bits ratio={}",
            num(r.w),
            num(r.rate_bits),
            num(r.scaling_ratio)
        );
        rows.push(scaling_row(r, with_mc.is_some()));
    }
    let mut header = vec![
        "K0",
        "w",
        "w_two_term",
        "w_lb",
        "w_ub",
        "lo",
        "hi",
        "rate_bits",
        "scaling_ratio",
        "eq27_bound",
    ];
    if with_mc.is_some() {
        header.push("mc_in_window_freq");
    }
    let mut manifest = RunManifest::new("scaling", &common.config, &bytes, common.seed)
        .param("user", user)
        .param("k0_grid", grid);
    manifest.trials = with_mc;
    emit(common, manifest, &csv_body(&header, &rows), started)
}

fn kind_name(k: CheckKind) -> &'static str {
    match k {
        CheckKind::SinrCdf => "sinr_cdf_ks",
        CheckKind::VirtualUniform => "virtual_sinr_uniform_ks",
        CheckKind::WinnerCdf => "winner_cdf_ks",
        CheckKind::Fairness => "fairness_z",
        CheckKind::ClosedVsQuadrature => "closed_vs_quadrature",
    }
}

pub fn validate(common: &Common, trials: u64, corrupt_rho: Option<f64>) -> CliResult<()> {
    let started = Instant::now();
    let (s, bytes) = load(&common.config)?;
    let opts = ValidationOptions {
        trials,
        seed: common.seed,
        workers: workers()?,
        corrupt_rho,
    };
    let report = validation::validate(&s, &opts)?;
    let mut rows = Vec::new();
    for c in &report.checks {
        let verdict = if c.pass { "PASS" } else { "FAIL" };
        eprintln!(
            "{verdict} {} user {} index {}: {} vs critical {}",
            kind_name(c.kind),
            c.user,
            c.index,
            num(c.statistic),
            num(c.critical)
        );
        rows.push(vec![
            kind_name(c.kind).to_string(),
            c.user.to_string(),
            c.index.to_string(),
            c.samples.to_string(),
            num(c.statistic),
            num(c.critical),
            verdict.to_string(),
        ]);
    }
    let mut manifest = RunManifest::new("validate", &common.config, &bytes, common.seed);
    manifest.trials = Some(trials);
    if let Some(f) = corrupt_rho {
        manifest = manifest.param("corrupt_rho", num(f));
    }
    let header = [
        "check",
        "user",
        "index",
        "samples",
        "statistic",
        "critical",
        "result",
    ];
    emit(common, manifest, &csv_body(&header, &rows), started)?;
    let failed = report.failures();
    if failed > 0 {
        return Err(CliError::failure(format!(
            "{failed} of {} checks failed",
            report.checks.len()
        )));
    }
    eprintln!("all {} checks passed", report.checks.len());
    Ok(())
}
