//! System parameters, presets and the key-value config file.
//!
//! Config files are TOML. Every key is optional and overrides the chosen
//! preset (`preset = "desk" | "paper-fig1" | "paper-fig2"`, default `desk`).
//! Power ratios may be given linearly (`rho_d`) or in decibels (`rho_d_db`);
//! decibel keys are converted once, at load time.
//!
//! ```toml
//! preset = "desk"
//! num_aps = 50              # M
//! antennas_per_ap = 8       # N
//! num_ues = 10              # K
//! area_side_m = 500.0       # D
//! alpha = 0.0               # channel inversion rate
//! tau_p = 5                 # pilot length, defaults to max(1, K / 2)
//! tau_c = 200
//! xi = 0.5
//! rho_d_db = 115.0
//! rho_p_db = 112.0
//! sigma_sh_db = 4.0
//! cluster_size = 5          # |M_k|
//! seed = 1
//! mc_draws = 1000000
//! pilot_policy = "round-robin"   # or "random"
//! shadowing = "iid"
//! strategy = "mr"           # mr | mr-u | mmf | mmf-u
//! snapshots = 100
//! alphas = [-1.0, 0.0, 1.0]
//! ```

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::performance::Strategy;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(lin: f64) -> f64 {
    10.0 * lin.log10()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotPolicy {
    /// UE `k` gets pilot `k mod tau_p`.
    RoundRobin,
    /// Each UE draws a pilot uniformly at random.
    Random,
}

impl FromStr for PilotPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "round-robin" => Ok(Self::RoundRobin),
            "random" => Ok(Self::Random),
            other => Err(Error::Config(format!("unknown pilot policy `{other}`"))),
        }
    }
}

/// Shadow-fading model. Only independent per-link shadowing is implemented.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ShadowingModel {
    Iid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    /// M
    pub num_aps: usize,
    /// N
    pub antennas_per_ap: usize,
    /// K
    pub num_ues: usize,
    /// D, side of the square deployment area in metres.
    pub area_side_m: f64,
    /// Channel inversion rate of the precoder normalisation.
    pub alpha: f64,
    pub tau_p: usize,
    pub tau_c: usize,
    /// Downlink share of the data part of the coherence block.
    pub xi: f64,
    /// Maximum downlink SNR, linear.
    pub rho_d: f64,
    /// Pilot SNR, linear.
    pub rho_p: f64,
    pub sigma_sh_db: f64,
    /// Number of serving APs per UE, |M_k|.
    pub cluster_size: usize,
    pub seed: u64,
    /// Sample count for the Monte-Carlo oracle.
    pub mc_draws: usize,
    pub pilot_policy: PilotPolicy,
    pub shadowing: ShadowingModel,
}

impl SystemConfig {
    /// Desk-scale default: M = 50, K = 10, N = 8 with the remaining
    /// parameters at their default simulation values.
    pub fn desk() -> Self {
        Self::with_sizes(50, 8, 10)
    }

    /// M = 200, N = 8, K = 40 (alpha sweep of SE percentiles).
    pub fn paper_fig1() -> Self {
        Self::with_sizes(200, 8, 40)
    }

    /// M = 100, N = 8, K = 20 (strategy comparison).
    pub fn paper_fig2() -> Self {
        Self::with_sizes(100, 8, 20)
    }

    /// Default simulation values for everything except the three sizes;
    /// `tau_p = max(1, K / 2)`.
    pub fn with_sizes(num_aps: usize, antennas_per_ap: usize, num_ues: usize) -> Self {
        Self {
            num_aps,
            antennas_per_ap,
            num_ues,
            area_side_m: 500.0,
            alpha: 0.0,
            tau_p: (num_ues / 2).max(1),
            tau_c: 200,
            xi: 0.5,
            rho_d: db_to_linear(115.0),
            rho_p: db_to_linear(112.0),
            sigma_sh_db: 4.0,
            cluster_size: 5.min(num_aps),
            seed: 1,
            mc_draws: 1_000_000,
            pilot_policy: PilotPolicy::RoundRobin,
            shadowing: ShadowingModel::Iid,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.num_aps == 0 || self.antennas_per_ap == 0 || self.num_ues == 0 {
            return bad("num_aps, antennas_per_ap and num_ues must be at least 1".into());
        }
        if self.tau_p == 0 || self.tau_p > self.tau_c {
            return bad(format!(
                "need 1 <= tau_p <= tau_c, got tau_p = {}, tau_c = {}",
                self.tau_p, self.tau_c
            ));
        }
        if !(self.xi > 0.0 && self.xi < 1.0) {
            return bad(format!("xi must lie in (0, 1), got {}", self.xi));
        }
        if self.cluster_size == 0 || self.cluster_size > self.num_aps {
            return bad(format!(
                "cluster_size must lie in [1, num_aps = {}], got {}",
                self.num_aps, self.cluster_size
            ));
        }
        if !self.alpha.is_finite() || self.alpha >= self.antennas_per_ap as f64 - 1.0 {
            return bad(format!(
                "alpha must be finite and below N - 1 = {}, got {}",
                self.antennas_per_ap as f64 - 1.0,
                self.alpha
            ));
        }
        if !(self.area_side_m > 0.0 && self.area_side_m.is_finite()) {
            return bad(format!("area_side_m must be positive, got {}", self.area_side_m));
        }
        if !(self.rho_d > 0.0 && self.rho_d.is_finite() && self.rho_p > 0.0 && self.rho_p.is_finite()) {
            return bad("rho_d and rho_p must be positive and finite".into());
        }
        if !(self.sigma_sh_db >= 0.0 && self.sigma_sh_db.is_finite()) {
            return bad(format!("sigma_sh_db must be non-negative, got {}", self.sigma_sh_db));
        }
        if self.mc_draws == 0 {
            return bad("mc_draws must be at least 1".into());
        }
        Ok(())
    }

    /// Pre-log factor `xi (1 - tau_p / tau_c)`.
    pub fn prelog(&self) -> f64 {
        self.xi * (1.0 - self.tau_p as f64 / self.tau_c as f64)
    }

    /// Short stable digest of every parameter, recorded in output files.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serialises");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Preset {
    Desk,
    PaperFig1,
    PaperFig2,
}

impl Preset {
    pub fn config(self) -> SystemConfig {
        match self {
            Preset::Desk => SystemConfig::desk(),
            Preset::PaperFig1 => SystemConfig::paper_fig1(),
            Preset::PaperFig2 => SystemConfig::paper_fig2(),
        }
    }
}

impl FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(Preset::Desk),
            "paper-fig1" => Ok(Preset::PaperFig1),
            "paper-fig2" => Ok(Preset::PaperFig2),
            other => Err(Error::Config(format!("unknown preset `{other}`"))),
        }
    }
}

impl fmt::Display for Preset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Preset::Desk => "desk",
            Preset::PaperFig1 => "paper-fig1",
            Preset::PaperFig2 => "paper-fig2",
        })
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    num_aps: Option<usize>,
    antennas_per_ap: Option<usize>,
    num_ues: Option<usize>,
    area_side_m: Option<f64>,
    alpha: Option<f64>,
    tau_p: Option<usize>,
    tau_c: Option<usize>,
    xi: Option<f64>,
    rho_d: Option<f64>,
    rho_d_db: Option<f64>,
    rho_p: Option<f64>,
    rho_p_db: Option<f64>,
    sigma_sh_db: Option<f64>,
    cluster_size: Option<usize>,
    seed: Option<u64>,
    mc_draws: Option<usize>,
    pilot_policy: Option<PilotPolicy>,
    shadowing: Option<ShadowingModel>,
    strategy: Option<String>,
    snapshots: Option<usize>,
    alphas: Option<Vec<f64>>,
}

/// A parsed config file: system parameters plus optional experiment keys.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub strategy: Option<Strategy>,
    pub snapshots: Option<usize>,
    pub alphas: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn from_preset(preset: Preset) -> Self {
        Self {
            system: preset.config(),
            strategy: None,
            snapshots: None,
            alphas: None,
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        let preset = match raw.preset.as_deref() {
            Some(p) => p.parse()?,
            None => Preset::Desk,
        };
        let mut sys = preset.config();
        let tau_p_default = raw.num_ues.map(|k| (k / 2).max(1));

        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = raw.$field { sys.$field = v; } )* };
        }
        take!(
            num_aps, antennas_per_ap, num_ues, area_side_m, alpha, tau_c, xi, sigma_sh_db, seed,
            mc_draws, pilot_policy, shadowing
        );
        sys.tau_p = raw.tau_p.or(tau_p_default).unwrap_or(sys.tau_p);
        sys.cluster_size = raw.cluster_size.unwrap_or(sys.cluster_size.min(sys.num_aps));
        sys.rho_d = pick_power("rho_d", raw.rho_d, raw.rho_d_db)?.unwrap_or(sys.rho_d);
        sys.rho_p = pick_power("rho_p", raw.rho_p, raw.rho_p_db)?.unwrap_or(sys.rho_p);
        sys.validate()?;

        let strategy = raw.strategy.as_deref().map(str::parse).transpose()?;
        if let Some(alphas) = &raw.alphas {
            for &a in alphas {
                let mut probe = sys.clone();
                probe.alpha = a;
                probe.validate()?;
            }
        }
        Ok(Self {
            system: sys,
            strategy,
            snapshots: raw.snapshots,
            alphas: raw.alphas,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }
}

fn pick_power(name: &str, linear: Option<f64>, db: Option<f64>) -> Result<Option<f64>> {
    match (linear, db) {
        (Some(_), Some(_)) => Err(Error::Config(format!(
            "give either `{name}` or `{name}_db`, not both"
        ))),
        (Some(v), None) => Ok(Some(v)),
        (None, Some(v)) => Ok(Some(db_to_linear(v))),
        (None, None) => Ok(None),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn desk_defaults_are_valid() {
        let c = SystemConfig::desk();
        c.validate().unwrap();
        assert_eq!(c.tau_p, 5);
        assert!((linear_to_db(c.rho_d) - 115.0).abs() < 1e-9);
        assert!((linear_to_db(c.rho_p) - 112.0).abs() < 1e-9);
    }

    #[test]
    fn presets_have_expected_sizes() {
        let f1 = SystemConfig::paper_fig1();
        assert_eq!((f1.num_aps, f1.antennas_per_ap, f1.num_ues, f1.tau_p), (200, 8, 40, 20));
        let f2 = SystemConfig::paper_fig2();
        assert_eq!((f2.num_aps, f2.antennas_per_ap, f2.num_ues, f2.tau_p), (100, 8, 20, 10));
    }

    #[test]
    fn db_keys_convert_once() {
        let cfg = ExperimentConfig::parse("rho_d_db = 100.0\nrho_p = 2.0\nnum_ues = 8\n").unwrap();
        assert!((cfg.system.rho_d - 1e10).abs() / 1e10 < 1e-12);
        assert_eq!(cfg.system.rho_p, 2.0);
        assert_eq!(cfg.system.tau_p, 4);
    }

    #[test]
    fn both_power_keys_rejected() {
        assert!(ExperimentConfig::parse("rho_d = 1.0\nrho_d_db = 0.0\n").is_err());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ExperimentConfig::parse("colour = 3\n").is_err());
    }

    #[test]
    fn alpha_too_close_to_n_rejected() {
        assert!(ExperimentConfig::parse("antennas_per_ap = 2\nalpha = 1.0\n").is_err());
        assert!(ExperimentConfig::parse("antennas_per_ap = 2\nalpha = 0.9\n").is_ok());
    }

    #[test]
    fn invalid_sizes_rejected() {
        let mut c = SystemConfig::desk();
        c.cluster_size = 51;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::desk();
        c.tau_p = 201;
        assert!(c.validate().is_err());
        let mut c = SystemConfig::desk();
        c.xi = 1.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn experiment_keys_parse() {
        let cfg = ExperimentConfig::parse("strategy = \"mmf-u\"\nsnapshots = 3\nalphas = [-1.0, 0.5]\n").unwrap();
        assert_eq!(cfg.strategy, Some(Strategy::MmfUniform));
        assert_eq!(cfg.snapshots, Some(3));
        assert_eq!(cfg.alphas, Some(vec![-1.0, 0.5]));
    }

    #[test]
    fn hash_tracks_parameters() {
        let a = SystemConfig::desk();
        let mut b = a.clone();
        assert_eq!(a.hash(), b.hash());
        b.seed += 1;
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 16);
    }
}
