//! TOML experiment configuration.
//!
//! ```toml
//! algorithm = "eancdrr"
//! horizon = 20000
//! replications = 100
//! base_seed = 1
//! lambda = 0.5
//! plateau = [[2000, 20000]]
//!
//! [market]
//! example = "drrs4"
//! ```

use std::path::{Path, PathBuf};

use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::examples::named_example;
use super::simulate::{Algorithm, RunSpec};
use crate::engine::{rr_firm, AgentAction, EstimateMode, SimRng};
use crate::error::{Error, Result};
use crate::firm::FirmMode;
use crate::market::{generate_alpha_reducible, generate_market, Market, MarketParams};
use crate::reward::{RewardKind, RewardName};

pub const OUTPUT_ENV: &str = "MATCH_BANDITS_OUT";
pub const DEFAULT_OUTPUT_DIR: &str = "out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateSection {
    pub n: usize,
    pub m: usize,
    pub min_gap: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub alpha_reducible: bool,
}

/// Exactly one of `example`, `file`, `generate` or `arms`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<String>,
    /// JSON market file, relative to the config file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub file: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generate: Option<GenerateSection>,
    /// Arm means of a single-agent market.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arms: Option<Vec<f64>>,
    /// Ignored for `file`, which carries its own reward family.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reward: Option<RewardName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

fn default_replications() -> usize {
    1
}

fn default_stride() -> u64 {
    100
}

fn default_epsilon() -> f64 {
    crate::hinted::DEFAULT_EPSILON
}

fn default_rank() -> usize {
    1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub market: MarketSection,
    pub algorithm: Algorithm,
    #[serde(default)]
    pub firm_mode: FirmMode,
    #[serde(default)]
    pub agent_estimates: EstimateMode,
    pub horizon: u64,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub base_seed: u64,
    /// Index of the first replication; replication i uses seed `base_seed + i`.
    #[serde(default)]
    pub first_replication: usize,
    #[serde(default = "default_stride")]
    pub stride: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_rank")]
    pub eap_rank: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Write per-round agent and firm logs.
    #[serde(default)]
    pub round_log: bool,
    /// (t_early, t_late) pairs; defaults to (T/10, T).
    #[serde(default)]
    pub plateau: Vec<[u64; 2]>,
    /// Applied firm per agent in each of the first rounds, 1-based; 0 sits the round out.
    #[serde(default)]
    pub forced_rounds: Vec<Vec<usize>>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, origin: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::ConfigSyntax { path: origin.to_string(), detail: e.to_string() })?;
        cfg.check_fields()?;
        Ok(cfg)
    }

    /// Seed of replication `i`.
    pub fn seed(&self, i: usize) -> u64 {
        self.base_seed.wrapping_add(i as u64)
    }

    pub fn replication_indices(&self) -> std::ops::Range<usize> {
        self.first_replication..self.first_replication + self.replications
    }

    pub fn plateau_pairs(&self) -> Vec<(u64, u64)> {
        if self.plateau.is_empty() {
            if self.horizon >= 10 {
                vec![(self.horizon / 10, self.horizon)]
            } else {
                Vec::new()
            }
        } else {
            self.plateau.iter().map(|p| (p[0], p[1])).collect()
        }
    }

    /// Rounds written to the series CSV: multiples of the stride, powers of ten,
    /// plateau endpoints and the horizon.
    pub fn series_rounds(&self) -> Vec<u64> {
        let t = self.horizon;
        let mut v: Vec<u64> = (1..=t / self.stride).map(|k| k * self.stride).collect();
        let mut p = 1u64;
        while p <= t {
            v.push(p);
            p = match p.checked_mul(10) {
                Some(x) => x,
                None => break,
            };
        }
        for (a, b) in self.plateau_pairs() {
            v.extend([a, b]);
        }
        v.push(t);
        v.sort_unstable();
        v.dedup();
        v
    }

    /// SHA-256 over every field that affects results.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn reward(&self) -> Result<RewardKind> {
        let name = self.market.reward.unwrap_or(RewardName::Bernoulli);
        RewardKind::from_parts(name, self.market.sigma).map_err(|e| Error::config("market.sigma", e.to_string()))
    }

    fn check_fields(&self) -> Result<()> {
        let mk = &self.market;
        let sources =
            [mk.example.is_some(), mk.file.is_some(), mk.generate.is_some(), mk.arms.is_some()].iter().filter(|&&b| b).count();
        if sources != 1 {
            return Err(Error::config("market", format!("give exactly one of example, file, generate, arms (got {sources})")));
        }
        if self.horizon == 0 {
            return Err(Error::config("horizon", "must be at least 1"));
        }
        if self.replications == 0 {
            return Err(Error::config("replications", "must be at least 1"));
        }
        if self.stride == 0 {
            return Err(Error::config("stride", "must be at least 1"));
        }
        match (self.algorithm, self.lambda) {
            (Algorithm::Eancdrr, None) => return Err(Error::config("lambda", "required for eancdrr")),
            (Algorithm::Eancdrr, Some(l)) if !(l > 0.0 && l < 1.0) => {
                return Err(Error::config("lambda", format!("must lie in (0, 1), got {l}")))
            }
            (a, Some(_)) if a != Algorithm::Eancdrr => return Err(Error::config("lambda", "only used by eancdrr")),
            _ => {}
        }
        if !(self.epsilon.is_finite() && self.epsilon >= 0.0) {
            return Err(Error::config("epsilon", format!("must be finite and non-negative, got {}", self.epsilon)));
        }
        for (k, &[a, b]) in self.plateau.iter().enumerate() {
            if a == 0 || a >= b || b > self.horizon {
                return Err(Error::config(
                    format!("plateau[{k}]"),
                    format!("need 1 <= t_early < t_late <= horizon, got [{a}, {b}]"),
                ));
            }
        }
        if !self.forced_rounds.is_empty() && (self.algorithm == Algorithm::Drr || self.algorithm.is_hinted()) {
            return Err(Error::config("forced_rounds", format!("not supported for {:?}", self.algorithm)));
        }
        if self.forced_rounds.len() as u64 > self.horizon {
            return Err(Error::config("forced_rounds", "more forced rounds than the horizon"));
        }
        if let Some(g) = &mk.generate {
            if g.n == 0 || g.n > g.m {
                return Err(Error::config("market.generate", format!("need 1 <= n <= m, got n = {}, m = {}", g.n, g.m)));
            }
        }
        if let Some(arms) = &mk.arms {
            if arms.len() < 2 {
                return Err(Error::config("market.arms", "need at least 2 arms"));
            }
        }
        self.reward()?;
        Ok(())
    }

    /// Builds the market and runs checks that depend on it.
    pub fn build_market(&self) -> Result<Market> {
        let reward = self.reward()?;
        let mk = &self.market;
        let market = if let Some(name) = &mk.example {
            named_example(name, reward)?
        } else if let Some(file) = &mk.file {
            let path = if file.is_absolute() { file.clone() } else { self.base_dir.join(file) };
            Market::load_json(&path)?
        } else if let Some(g) = &mk.generate {
            let params = MarketParams { n: g.n, m: g.m, min_gap: g.min_gap, reward };
            let mut rng = SimRng::seed_from_u64(g.seed);
            let made = if g.alpha_reducible {
                generate_alpha_reducible(&params, &mut rng)
            } else {
                generate_market(&params, &mut rng)
            };
            made.map_err(|e| Error::config("market.generate", e.to_string()))?
        } else {
            let arms = mk.arms.as_ref().expect("checked");
            let firm_rows = vec![vec![0.5]; arms.len()];
            Market::new(vec![arms.clone()], firm_rows, reward).map_err(|e| Error::config("market.arms", e.to_string()))?
        };
        self.check_against(&market)?;
        Ok(market)
    }

    fn check_against(&self, market: &Market) -> Result<()> {
        let (n, m) = (market.n(), market.m());
        if self.algorithm.is_hinted() {
            if n != 1 {
                return Err(Error::config("market", format!("{:?} needs a 1-agent market, got n = {n}", self.algorithm)));
            }
            if self.algorithm == Algorithm::Eap && !(1..m).contains(&self.eap_rank) {
                return Err(Error::config("eap_rank", format!("need 1 <= eap_rank <= {}, got {}", m - 1, self.eap_rank)));
            }
        }
        for (k, row) in self.forced_rounds.iter().enumerate() {
            if row.len() != n {
                return Err(Error::config(format!("forced_rounds[{k}]"), format!("expected {n} entries, got {}", row.len())));
            }
            if let Some(&f) = row.iter().find(|&&f| f > m) {
                return Err(Error::config(format!("forced_rounds[{k}]"), format!("firm {f} out of range 0..={m}")));
            }
        }
        Ok(())
    }

    /// Forced prefix as engine actions: interview the applied firm and the
    /// round-robin firm, apply to the former.
    pub fn forced_actions(&self, m: usize) -> Vec<Vec<AgentAction>> {
        self.forced_rounds
            .iter()
            .enumerate()
            .map(|(k, row)| {
                let t = k as u64 + 1;
                row.iter()
                    .enumerate()
                    .map(|(a, &f)| {
                        let rr = rr_firm(a, t, m);
                        match f {
                            0 => AgentAction::new(vec![rr, rr], vec![]),
                            f => AgentAction::new(vec![f - 1, rr], vec![f - 1]),
                        }
                    })
                    .collect()
            })
            .collect()
    }

    pub fn run_spec(&self, market: &Market) -> RunSpec {
        let mut spec = RunSpec::new(self.algorithm, self.firm_mode, self.horizon);
        spec.agent_estimates = self.agent_estimates;
        spec.lambda = self.lambda;
        spec.epsilon = self.epsilon;
        spec.eap_rank = self.eap_rank;
        spec.forced = self.forced_actions(market.m());
        spec.checkpoints = self.series_rounds();
        spec
    }
}

/// Reads, parses and validates a config, including building its market.
pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = ExperimentConfig::from_toml_str(&text, &path.display().to_string())?;
    cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.build_market()?;
    Ok(cfg)
}

/// Flag, then config, then the environment variable, then `./out`.
pub fn resolve_output_dir(flag: Option<&Path>, cfg: &ExperimentConfig, env: Option<&str>) -> PathBuf {
    if let Some(f) = flag {
        return f.to_path_buf();
    }
    if let Some(d) = &cfg.output_dir {
        return if d.is_absolute() { d.clone() } else { cfg.base_dir.join(d) };
    }
    match env {
        Some(e) if !e.is_empty() => PathBuf::from(e),
        _ => PathBuf::from(DEFAULT_OUTPUT_DIR),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = "algorithm = \"cia\"\nhorizon = 100\n[market]\nexample = \"coordfgs\"\n";

    fn parse(s: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(s, "test")
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::Config { field, .. } => field,
            other => panic!("expected a config error, got {other}"),
        }
    }

    #[test]
    fn minimal_config_defaults() {
        let c = parse(BASE).unwrap();
        assert_eq!(c.replications, 1);
        assert_eq!(c.firm_mode, FirmMode::Uncertain);
        assert_eq!(c.plateau_pairs(), vec![(10, 100)]);
        assert_eq!(c.build_market().unwrap().n(), 3);
    }

    #[test]
    fn eancdrr_needs_lambda() {
        let s = BASE.replace("\"cia\"", "\"eancdrr\"");
        assert_eq!(field_of(parse(&s).unwrap_err()), "lambda");
        let ok = format!("lambda = 0.5\n{s}");
        assert!(parse(&ok).is_ok());
        let stray = format!("lambda = 0.5\n{BASE}");
        assert_eq!(field_of(parse(&stray).unwrap_err()), "lambda");
    }

    #[test]
    fn zero_horizon_rejected() {
        assert_eq!(field_of(parse(&BASE.replace("100", "0")).unwrap_err()), "horizon");
    }

    #[test]
    fn unknown_field_and_example() {
        assert!(matches!(parse(&format!("bogus = 1\n{BASE}")), Err(Error::ConfigSyntax { .. })));
        let c = parse(&BASE.replace("coordfgs", "nope")).unwrap();
        match c.build_market() {
            Err(Error::UnknownExample { known, .. }) => assert!(known.contains("drrs4")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hinted_needs_one_agent() {
        let s = BASE.replace("\"cia\"", "\"allprobe\"");
        assert_eq!(field_of(parse(&s).unwrap().build_market().unwrap_err()), "market");
        let arms = "algorithm = \"eap\"\neap_rank = 5\nhorizon = 10\n[market]\narms = [0.9, 0.5, 0.2]\n";
        assert_eq!(field_of(parse(arms).unwrap().build_market().unwrap_err()), "eap_rank");
    }

    #[test]
    fn series_rounds_include_powers_and_pairs() {
        let c = parse(&format!("stride = 30\nplateau = [[7, 95]]\n{BASE}")).unwrap();
        assert_eq!(c.series_rounds(), vec![1, 7, 10, 30, 60, 90, 95, 100]);
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = parse(BASE).unwrap();
        let b = parse(&format!("output_dir = \"elsewhere\"\n{BASE}")).unwrap();
        let c = parse(&format!("base_seed = 3\n{BASE}")).unwrap();
        let d = parse(&format!("replications = 1\n{BASE}")).unwrap();
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
        assert_eq!(a.hash(), d.hash());
    }

    #[test]
    fn output_dir_precedence() {
        let mut c = parse(BASE).unwrap();
        assert_eq!(resolve_output_dir(None, &c, None), PathBuf::from("out"));
        assert_eq!(resolve_output_dir(None, &c, Some("env")), PathBuf::from("env"));
        c.output_dir = Some("cfg".into());
        assert_eq!(resolve_output_dir(None, &c, Some("env")), PathBuf::from("cfg"));
        assert_eq!(resolve_output_dir(Some(Path::new("flag")), &c, Some("env")), PathBuf::from("flag"));
    }

    #[test]
    fn forced_rounds_translate() {
        let c = parse(&format!("forced_rounds = [[2, 0]]\n{}", BASE.replace("coordfgs", "k3"))).unwrap();
        let mk = c.build_market().unwrap();
        let acts = c.forced_actions(mk.m());
        assert_eq!(acts[0][0].applications, vec![1]);
        assert!(acts[0][1].applications.is_empty());
        let bad = parse(&format!("forced_rounds = [[3, 0]]\n{}", BASE.replace("coordfgs", "k3"))).unwrap();
        assert_eq!(field_of(bad.build_market().unwrap_err()), "forced_rounds[0]");
    }
}
