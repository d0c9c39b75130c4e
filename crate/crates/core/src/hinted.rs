//! Single-agent bandits with hints: each round the learner probes two arms
//! and pulls the one whose probe came out higher.

use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::engine::SimRng;
use crate::error::{Error, Result};
use crate::reward::{expected_max, RewardDist, RewardKind};

pub const DEFAULT_EPSILON: f64 = 0.1;

/// Running mean and population variance of one arm.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ArmStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl ArmStats {
    pub fn record(&mut self, x: f64) {
        self.count += 1;
        let d = x - self.mean;
        self.mean += d / self.count as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then_some(self.mean)
    }

    pub fn variance(&self) -> Option<f64> {
        (self.count > 0).then(|| (self.m2 / self.count as f64).max(0.0))
    }

    /// Mean plus `eps` times the variance; `None` before the first sample.
    pub fn ucb_prime(&self, eps: f64) -> Option<f64> {
        Some(self.mean()? + eps * self.variance()?)
    }
}

/// Arms by decreasing index; unsampled arms first; ties by arm index.
pub fn rank_arms(arms: &[ArmStats], eps: f64) -> Vec<usize> {
    let scores: Vec<f64> = arms.iter().map(|a| a.ucb_prime(eps).unwrap_or(f64::INFINITY)).collect();
    let mut order: Vec<usize> = (0..arms.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    order
}

/// Arm distributions of a hinted bandit instance.
#[derive(Clone, Debug)]
pub struct ArmSet {
    dists: Vec<RewardDist>,
}

impl ArmSet {
    pub fn new(means: &[f64], kind: RewardKind) -> Result<Self> {
        if means.len() < 2 {
            return Err(Error::param("arms", format!("need at least 2 arms, got {}", means.len())));
        }
        Ok(ArmSet { dists: means.iter().map(|&u| RewardDist::new(kind, u)).collect::<Result<_>>()? })
    }

    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dists.is_empty()
    }

    pub fn mean(&self, i: usize) -> f64 {
        self.dists[i].mean()
    }

    /// Arm indices by decreasing true mean.
    pub fn true_order(&self) -> Vec<usize> {
        let mut o: Vec<usize> = (0..self.len()).collect();
        o.sort_by(|&a, &b| self.mean(b).total_cmp(&self.mean(a)).then(a.cmp(&b)));
        o
    }

    pub fn expected_max(&self, i: usize, j: usize) -> f64 {
        expected_max(&self.dists[i], &self.dists[j])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct HintedStep {
    pub rr: usize,
    /// Arms at ranks i and i+1 of the current ordering.
    pub probes: (usize, usize),
    pub pulled: usize,
}

/// Observes the round-robin arm and the arms ranked `rank` and `rank + 1`
/// (1-based), then pulls the higher probe. Ties go to the higher-ranked probe.
pub fn probe_step(arms: &mut [ArmStats], env: &ArmSet, rank: usize, t: u64, eps: f64, rng: &mut SimRng) -> Result<HintedStep> {
    let m = arms.len();
    if m < 2 || env.len() != m {
        return Err(Error::param("arms", format!("need at least 2 arms matching the environment, got {m}")));
    }
    if rank == 0 || rank >= m {
        return Err(Error::param("i", format!("need 1 <= i <= {}, got {rank}", m - 1)));
    }
    let order = rank_arms(arms, eps);
    let (p, q) = (order[rank - 1], order[rank]);
    let rr = (t % m as u64) as usize;
    let x_rr = env.dists[rr].sample(rng);
    let x_p = env.dists[p].sample(rng);
    let x_q = env.dists[q].sample(rng);
    arms[rr].record(x_rr);
    arms[p].record(x_p);
    arms[q].record(x_q);
    let pulled = if x_q > x_p { q } else { p };
    Ok(HintedStep { rr, probes: (p, q), pulled })
}

pub fn allprobe_step(arms: &mut [ArmStats], env: &ArmSet, t: u64, eps: f64, rng: &mut SimRng) -> Result<HintedStep> {
    probe_step(arms, env, 1, t, eps, rng)
}

pub fn eap_step(arms: &mut [ArmStats], env: &ArmSet, i: usize, t: u64, eps: f64, rng: &mut SimRng) -> Result<HintedStep> {
    probe_step(arms, env, i, t, eps, rng)
}

/// AllProbe ranking by empirical means.
pub fn apem_step(arms: &mut [ArmStats], env: &ArmSet, t: u64, rng: &mut SimRng) -> Result<HintedStep> {
    probe_step(arms, env, 1, t, 0.0, rng)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HintedAlgo {
    AllProbe { epsilon: f64 },
    Eap { i: usize, epsilon: f64 },
    Apem,
}

impl HintedAlgo {
    /// True rank the algorithm targets (1-based).
    pub fn target_rank(&self) -> usize {
        match self {
            HintedAlgo::Eap { i, .. } => *i,
            _ => 1,
        }
    }

    fn rank_and_eps(&self) -> (usize, f64) {
        match *self {
            HintedAlgo::AllProbe { epsilon } => (1, epsilon),
            HintedAlgo::Eap { i, epsilon } => (i, epsilon),
            HintedAlgo::Apem => (1, 0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HintedRun {
    pub steps: Vec<HintedStep>,
    pub arms: Vec<ArmStats>,
}

impl HintedRun {
    pub fn pull_counts(&self, from_round: u64) -> Vec<u64> {
        let mut c = vec![0; self.arms.len()];
        for s in self.steps.iter().skip(from_round.saturating_sub(1) as usize) {
            c[s.pulled] += 1;
        }
        c
    }
}

pub fn run_hinted(env: &ArmSet, algo: HintedAlgo, horizon: u64, seed: u64) -> Result<HintedRun> {
    if horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    let (rank, eps) = algo.rank_and_eps();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut arms = vec![ArmStats::default(); env.len()];
    let steps = (1..=horizon).map(|t| probe_step(&mut arms, env, rank, t, eps, &mut rng)).collect::<Result<_>>()?;
    Ok(HintedRun { steps, arms })
}

/// Cumulative hinted regret against the arm of true rank `i`.
pub fn hinted_regret(probes: impl IntoIterator<Item = (usize, usize)>, env: &ArmSet, i: usize) -> Vec<f64> {
    let target = env.mean(env.true_order()[i - 1]);
    let mut acc = 0.0;
    probes
        .into_iter()
        .map(|(p, q)| {
            acc += (target - env.expected_max(p, q)).max(0.0);
            acc
        })
        .collect()
}
