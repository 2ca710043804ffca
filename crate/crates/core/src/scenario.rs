//! Network configuration for the cell of interest.
//!
//! Every downstream formula is written in effective SNRs
//! `rho = G p / (M sigma^2)`, so raw gains and powers are only accepted at the
//! ingestion boundary ([`RawChannelProfile::normalize`] and the JSON config)
//! and converted immediately.
//!
//! # Config file
//!
//! ```json
//! {
//!   "num_antennas": 2,
//!   "users": [
//!     { "rho_serving": 1.0, "rho_interferers": [0.5, 0.25] },
//!     { "raw": { "gain_serving_db": -3.0, "gains_interferers_db": [-10.0],
//!                "power_serving_db": 10.0, "powers_interferers_db": [10.0],
//!                "noise_power_db": 0.0 } }
//!   ]
//! }
//! ```
//!
//! Each user gives either linear effective SNRs or a `raw` block in dB
//! (converted with `10^(dB/10)`). `rho_interferers` may be omitted for an
//! interference-free user. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Violation};

/// Large-scale statistics of one user, in effective-SNR form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserChannelProfile {
    pub user_id: usize,
    pub rho_serving: f64,
    /// One entry per interfering base station; order only fixes the index b.
    pub rho_interferers: Vec<f64>,
}

impl UserChannelProfile {
    pub fn new(user_id: usize, rho_serving: f64, rho_interferers: Vec<f64>) -> Self {
        Self {
            user_id,
            rho_serving,
            rho_interferers,
        }
    }

    /// Number of interfering cells J_k.
    pub fn num_interferers(&self) -> usize {
        self.rho_interferers.len()
    }

    fn check(&self, out: &mut Vec<Violation>) {
        let k = self.user_id;
        if !(self.rho_serving > 0.0 && self.rho_serving.is_finite()) {
            out.push(Violation::user(
                k,
                "rho_serving",
                format!("must be positive and finite, got {}", self.rho_serving),
            ));
        }
        for (b, &r) in self.rho_interferers.iter().enumerate() {
            if !(r > 0.0 && r.is_finite()) {
                out.push(Violation::user(
                    k,
                    format!("rho_interferers[{b}]"),
                    format!("must be positive and finite, got {r}"),
                ));
            }
        }
    }
}

/// Physical gains and powers for one user (linear scale).
#[derive(Debug, Clone, PartialEq)]
pub struct RawChannelProfile {
    pub gain_serving: f64,
    pub gains_interferers: Vec<f64>,
    pub power_serving: f64,
    pub powers_interferers: Vec<f64>,
    pub noise_power: f64,
}

impl RawChannelProfile {
    /// Converts to effective SNRs: `rho_b = G_b p_b / (M sigma^2)`.
    pub fn normalize(&self, user_id: usize, num_antennas: usize) -> Result<UserChannelProfile> {
        let mut bad = Vec::new();
        let mut positive = |field: String, v: f64| {
            if !(v > 0.0 && v.is_finite()) {
                bad.push(Violation::user(
                    user_id,
                    field,
                    format!("must be positive and finite, got {v}"),
                ));
            }
        };
        positive("gain_serving".into(), self.gain_serving);
        positive("power_serving".into(), self.power_serving);
        positive("noise_power".into(), self.noise_power);
        for (b, &g) in self.gains_interferers.iter().enumerate() {
            positive(format!("gains_interferers[{b}]"), g);
        }
        for (b, &p) in self.powers_interferers.iter().enumerate() {
            positive(format!("powers_interferers[{b}]"), p);
        }
        if self.gains_interferers.len() != self.powers_interferers.len() {
            bad.push(Violation::user(
                user_id,
                "powers_interferers",
                format!(
                    "length {} differs from gains_interferers length {}",
                    self.powers_interferers.len(),
                    self.gains_interferers.len()
                ),
            ));
        }
        if num_antennas == 0 {
            bad.push(Violation::global("num_antennas", "must be at least 1"));
        }
        if !bad.is_empty() {
            return Err(Error::Validation(bad));
        }

        let scale = num_antennas as f64 * self.noise_power;
        Ok(UserChannelProfile {
            user_id,
            rho_serving: self.gain_serving * self.power_serving / scale,
            rho_interferers: self
                .gains_interferers
                .iter()
                .zip(&self.powers_interferers)
                .map(|(g, p)| g * p / scale)
                .collect(),
        })
    }
}

/// The cell of interest: M transmit antennas and K0 users.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub num_antennas: usize,
    pub users: Vec<UserChannelProfile>,
}

impl Scenario {
    /// Builds and validates a scenario, assigning ids `0..K0` in order.
    pub fn from_profiles(
        num_antennas: usize,
        profiles: impl IntoIterator<Item = (f64, Vec<f64>)>,
    ) -> Result<Self> {
        let users = profiles
            .into_iter()
            .enumerate()
            .map(|(k, (rho, interferers))| UserChannelProfile::new(k, rho, interferers))
            .collect();
        Scenario {
            num_antennas,
            users,
        }
        .validate()
    }

    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    /// Largest J_k over the users; interferer index b of every user refers
    /// to the same interfering base station b.
    pub fn max_interferers(&self) -> usize {
        self.users
            .iter()
            .map(UserChannelProfile::num_interferers)
            .max()
            .unwrap_or(0)
    }

    /// Returns the scenario unchanged, or every violated invariant.
    pub fn validate(self) -> Result<Self> {
        let mut bad = Vec::new();
        if self.num_antennas == 0 {
            bad.push(Violation::global("num_antennas", "must be at least 1"));
        }
        if self.users.is_empty() {
            bad.push(Violation::global("users", "no users"));
        }
        let mut seen = vec![false; self.users.len()];
        for u in &self.users {
            if u.user_id >= self.users.len() {
                bad.push(Violation::user(
                    u.user_id,
                    "user_id",
                    format!("ids must be contiguous in 0..{}", self.users.len()),
                ));
            } else if seen[u.user_id] {
                bad.push(Violation::user(u.user_id, "user_id", "duplicate id"));
            } else {
                seen[u.user_id] = true;
            }
            u.check(&mut bad);
        }
        if bad.is_empty() {
            let mut s = self;
            s.users.sort_by_key(|u| u.user_id);
            Ok(s)
        } else {
            Err(Error::Validation(bad))
        }
    }

    /// Parses the JSON config format documented at module level.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: ConfigFile =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.into_scenario()
    }

    pub fn from_json_file(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text)
    }

    /// Serializes back to the linear form of the config format.
    pub fn to_json_string(&self) -> String {
        let users: Vec<_> = self
            .users
            .iter()
            .map(|u| {
                serde_json::json!({
                    "rho_serving": u.rho_serving,
                    "rho_interferers": u.rho_interferers,
                })
            })
            .collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "num_antennas": self.num_antennas,
            "users": users,
        }))
        .expect("scenario is always serializable")
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    num_antennas: usize,
    users: Vec<UserEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct UserEntry {
    rho_serving: Option<f64>,
    rho_interferers: Option<Vec<f64>>,
    raw: Option<RawEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEntry {
    gain_serving_db: f64,
    #[serde(default)]
    gains_interferers_db: Vec<f64>,
    power_serving_db: f64,
    #[serde(default)]
    powers_interferers_db: Vec<f64>,
    noise_power_db: f64,
}

fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

impl ConfigFile {
    fn into_scenario(self) -> Result<Scenario> {
        let mut bad = Vec::new();
        let mut users = Vec::with_capacity(self.users.len());
        for (k, entry) in self.users.into_iter().enumerate() {
            match (entry.rho_serving, entry.raw) {
                (Some(rho), None) => users.push(UserChannelProfile::new(
                    k,
                    rho,
                    entry.rho_interferers.unwrap_or_default(),
                )),
                (None, Some(raw)) if entry.rho_interferers.is_none() => {
                    let raw = RawChannelProfile {
                        gain_serving: db_to_linear(raw.gain_serving_db),
                        gains_interferers: raw
                            .gains_interferers_db
                            .iter()
                            .copied()
                            .map(db_to_linear)
                            .collect(),
                        power_serving: db_to_linear(raw.power_serving_db),
                        powers_interferers: raw
                            .powers_interferers_db
                            .iter()
                            .copied()
                            .map(db_to_linear)
                            .collect(),
                        noise_power: db_to_linear(raw.noise_power_db),
                    };
                    match raw.normalize(k, self.num_antennas.max(1)) {
                        Ok(u) => users.push(u),
                        Err(e) => bad.extend(e.violations().iter().cloned()),
                    }
                }
                _ => bad.push(Violation::user(
                    k,
                    "users",
                    "give either rho_serving (+ rho_interferers) or a raw block, not both",
                )),
            }
        }
        let scenario = Scenario {
            num_antennas: self.num_antennas,
            users,
        };
        match scenario.validate() {
            Ok(s) if bad.is_empty() => Ok(s),
            Ok(_) => Err(Error::Validation(bad)),
            Err(e) => {
                bad.extend(e.violations().iter().cloned());
                Err(Error::Validation(bad))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn raw(g: f64, p: f64, noise: f64, interferers: &[(f64, f64)]) -> RawChannelProfile {
        RawChannelProfile {
            gain_serving: g,
            gains_interferers: interferers.iter().map(|x| x.0).collect(),
            power_serving: p,
            powers_interferers: interferers.iter().map(|x| x.1).collect(),
            noise_power: noise,
        }
    }

    #[test]
    fn normalize_identity() {
        let u = raw(1.0, 1.0, 1.0, &[]).normalize(0, 1).unwrap();
        assert_eq!(u.rho_serving, 1.0);
        assert!(u.rho_interferers.is_empty());
    }

    #[test]
    fn normalize_divides_by_antennas_and_noise() {
        let u = raw(2.0, 4.0, 1.0, &[(1.0, 2.0)]).normalize(0, 4).unwrap();
        assert_eq!(u.rho_serving, 2.0);
        assert_eq!(u.rho_interferers, vec![0.5]);
    }

    #[test]
    fn zero_noise_is_rejected() {
        let err = raw(1.0, 1.0, 0.0, &[]).normalize(3, 1).unwrap_err();
        let v = err.violations();
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].field, "noise_power");
        assert_eq!(v[0].user, Some(3));
    }

    #[test]
    fn mismatched_interferer_lists_rejected() {
        let mut r = raw(1.0, 1.0, 1.0, &[(1.0, 1.0)]);
        r.powers_interferers.push(2.0);
        assert!(r.normalize(0, 2).is_err());
    }

    #[test]
    fn valid_scenario_roundtrips() {
        let s = Scenario::from_profiles(2, [(1.0, vec![0.5]), (2.0, vec![])]).unwrap();
        assert_eq!(s.clone().validate().unwrap(), s);
        assert_eq!(s.max_interferers(), 1);
    }

    #[test]
    fn empty_user_list_reports_no_users() {
        let err = Scenario {
            num_antennas: 2,
            users: vec![],
        }
        .validate()
        .unwrap_err();
        assert!(err.to_string().contains("no users"));
    }

    #[test]
    fn all_violations_are_reported() {
        let s = Scenario {
            num_antennas: 0,
            users: vec![
                UserChannelProfile::new(0, -1.0, vec![0.5, 0.0]),
                UserChannelProfile::new(0, 1.0, vec![]),
            ],
        };
        let err = s.validate().unwrap_err();
        let v = err.violations();
        assert!(v.iter().any(|x| x.field == "num_antennas"));
        assert!(v
            .iter()
            .any(|x| x.field == "rho_serving" && x.user == Some(0)));
        assert!(v.iter().any(|x| x.field == "rho_interferers[1]"));
        assert!(v.iter().any(|x| x.message == "duplicate id"));
        assert!(err.to_string().contains("user 0: rho_serving"));
    }

    #[test]
    fn config_linear_and_db() {
        let text = r#"{
            "num_antennas": 2,
            "users": [
                {"rho_serving": 1.0, "rho_interferers": [0.5]},
                {"raw": {"gain_serving_db": 3.0103, "gains_interferers_db": [0.0],
                         "power_serving_db": 0.0, "powers_interferers_db": [0.0],
                         "noise_power_db": 0.0}}
            ]
        }"#;
        let s = Scenario::from_json_str(text).unwrap();
        assert_eq!(s.num_users(), 2);
        assert!((s.users[1].rho_serving - 1.0).abs() < 1e-4);
        assert_eq!(s.users[1].rho_interferers, vec![0.5]);
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let text = r#"{"num_antennas": 1, "users": [{"rho_serving": 1.0, "snr": 2}]}"#;
        assert!(matches!(
            Scenario::from_json_str(text),
            Err(Error::Config(_))
        ));
        let text = r#"{"num_antennas": 1, "users": [], "extra": 1}"#;
        assert!(Scenario::from_json_str(text).is_err());
    }

    #[test]
    fn config_lists_every_bad_user() {
        let text = r#"{"num_antennas": 1, "users": [
            {"rho_serving": -1.0},
            {"rho_serving": 1.0, "rho_interferers": [-2.0]}
        ]}"#;
        let err = Scenario::from_json_str(text).unwrap_err();
        assert_eq!(err.violations().len(), 2);
    }

    #[test]
    fn json_writer_is_parseable() {
        let s = Scenario::from_profiles(3, [(1.5, vec![0.2, 0.3])]).unwrap();
        assert_eq!(Scenario::from_json_str(&s.to_json_string()).unwrap(), s);
    }

    proptest! {
        #[test]
        fn normalize_is_scale_invariant(
            g in 1e-3..1e3f64, p in 1e-3..1e3f64, n in 1e-3..1e3f64,
            gb in 1e-3..1e3f64, pb in 1e-3..1e3f64,
            c in 1e-3..1e3f64, m in 1usize..8,
        ) {
            let a = raw(g, p, n, &[(gb, pb)]).normalize(0, m).unwrap();
            // rho is G p / (M sigma^2): scaling sigma^2 together with either all
            // gains or all powers leaves it fixed
            let by_gain = raw(c * g, p, c * n, &[(c * gb, pb)]).normalize(0, m).unwrap();
            let by_power = raw(g, c * p, c * n, &[(gb, c * pb)]).normalize(0, m).unwrap();
            for b in [by_gain, by_power] {
                prop_assert!((a.rho_serving - b.rho_serving).abs() <= 1e-12 * a.rho_serving);
                prop_assert!((a.rho_interferers[0] - b.rho_interferers[0]).abs()
                    <= 1e-12 * a.rho_interferers[0]);
            }
        }

        #[test]
        fn normalized_profiles_validate(
            g in 1e-6..1e6f64, p in 1e-6..1e6f64, n in 1e-6..1e6f64, m in 1usize..16,
        ) {
            let u = raw(g, p, n, &[(g, p)]).normalize(0, m).unwrap();
            let s = Scenario { num_antennas: m, users: vec![u] };
            prop_assert!(s.validate().is_ok());
        }
    }
}
