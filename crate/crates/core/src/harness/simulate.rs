//! One replication of a market or hinted-bandit experiment.

use serde::{Deserialize, Serialize};

use crate::agents::{AncdrrAgent, Cia, Decentralized, DrrPolicy, EancdrrAgent, ForcedPrefix, PhaseRecord};
use crate::engine::{AgentAction, AgentPolicy, EstimateMode, RoundOutcome, Simulation};
use crate::error::{Error, Result};
use crate::firm::FirmMode;
use crate::hinted::{hinted_regret, run_hinted, ArmSet, HintedAlgo};
use crate::market::{Market, Matching, StableBaselines};
use crate::metrics::{ConvergenceTracker, RegretSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Cia,
    Drr,
    Ancdrr,
    Eancdrr,
    Allprobe,
    Eap,
    Apem,
}

impl Algorithm {
    pub fn is_hinted(&self) -> bool {
        matches!(self, Algorithm::Allprobe | Algorithm::Eap | Algorithm::Apem)
    }
}

/// Everything that determines a replication apart from the market and seed.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSpec {
    pub algorithm: Algorithm,
    pub firm_mode: FirmMode,
    pub agent_estimates: EstimateMode,
    pub horizon: u64,
    pub lambda: Option<f64>,
    pub epsilon: f64,
    pub eap_rank: usize,
    /// Actions played verbatim in the first rounds.
    pub forced: Vec<Vec<AgentAction>>,
    /// Rounds at which regret values are kept, ascending.
    pub checkpoints: Vec<u64>,
    /// Keep every round outcome in memory.
    pub keep_rounds: bool,
}

impl RunSpec {
    pub fn new(algorithm: Algorithm, firm_mode: FirmMode, horizon: u64) -> Self {
        RunSpec {
            algorithm,
            firm_mode,
            agent_estimates: EstimateMode::Learned,
            horizon,
            lambda: None,
            epsilon: crate::hinted::DEFAULT_EPSILON,
            eap_rank: 1,
            forced: Vec::new(),
            checkpoints: vec![horizon],
            keep_rounds: false,
        }
    }
}

/// Regret values after round `t`, per agent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Checkpoint {
    pub t: u64,
    /// From realized rewards.
    pub opt: Vec<f64>,
    pub pess: Vec<f64>,
    /// From the means of the matched pairs.
    pub exp_opt: Vec<f64>,
    pub exp_pess: Vec<f64>,
}

/// Counts of rounds breaking protocol invariants, plus firm-behaviour tallies.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct InvariantTally {
    pub rounds: u64,
    pub vprime_not_subset: u64,
    pub vacancy_below_floor: u64,
    pub applied_not_interviewed: u64,
    pub reward_without_match: u64,
    /// Rounds where some firm received two or more applications.
    pub collision_rounds: u64,
    /// Firm-rounds with the hiring flag off.
    pub abstentions: u64,
    /// Firm abstentions in two consecutive updating rounds (coordinated learner only).
    pub consecutive_update_abstentions: u64,
}

impl InvariantTally {
    pub fn merge(&mut self, o: &InvariantTally) {
        self.rounds += o.rounds;
        self.vprime_not_subset += o.vprime_not_subset;
        self.vacancy_below_floor += o.vacancy_below_floor;
        self.applied_not_interviewed += o.applied_not_interviewed;
        self.reward_without_match += o.reward_without_match;
        self.collision_rounds += o.collision_rounds;
        self.abstentions += o.abstentions;
        self.consecutive_update_abstentions += o.consecutive_update_abstentions;
    }

    pub fn feedback_ok(&self) -> bool {
        self.vprime_not_subset == 0 && self.vacancy_below_floor == 0
    }

    fn observe(&mut self, out: &RoundOutcome, n: usize, m: usize) {
        self.rounds += 1;
        if !out.vacant.is_subset(&out.changed) {
            self.vprime_not_subset += 1;
        }
        if out.vacant.len() < m - n {
            self.vacancy_below_floor += 1;
        }
        let mut load = vec![0u32; m];
        for (a, apps) in out.applications.iter().enumerate() {
            for &f in apps {
                load[f] += 1;
                if !out.interviews[a].contains(&f) {
                    self.applied_not_interviewed += 1;
                }
            }
            if out.rewards[a] > 0.0 && out.matching.agent_partner(a).is_none() {
                self.reward_without_match += 1;
            }
        }
        if load.iter().any(|&l| l > 1) {
            self.collision_rounds += 1;
        }
        self.abstentions += out.gamma.iter().filter(|&&g| !g).count() as u64;
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MatchingRun {
    pub checkpoints: Vec<Checkpoint>,
    pub convergence_round: Option<u64>,
    pub limit: Option<Vec<usize>>,
    pub final_matching: Matching,
    pub tally: InvariantTally,
    pub phases: Option<Vec<PhaseRecord>>,
    pub anomalies: u64,
    pub rounds: Vec<RoundOutcome>,
}

impl MatchingRun {
    pub fn checkpoint(&self, t: u64) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.t == t)
    }
}

type Hook<'a, P> = &'a mut dyn FnMut(&P, &RoundOutcome) -> Result<()>;

struct Core {
    checkpoints: Vec<Checkpoint>,
    conv: ConvergenceTracker,
    tally: InvariantTally,
    final_matching: Matching,
    rounds: Vec<RoundOutcome>,
}

fn drive<P: AgentPolicy>(
    market: &Market,
    policy: P,
    spec: &RunSpec,
    seed: u64,
    recorder: &mut dyn FnMut(&RoundOutcome) -> Result<()>,
    hook: Hook<'_, P>,
) -> Result<(P, Core)> {
    if spec.horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    let base = StableBaselines::new(market)?;
    let mut realized = RegretSeries::from_baselines(&base);
    let mut expected = RegretSeries::from_baselines(&base);
    let (n, m) = (market.n(), market.m());
    let mut sim = Simulation::new(market.clone(), policy, spec.firm_mode, spec.agent_estimates, seed);
    let mut core = Core {
        checkpoints: Vec::with_capacity(spec.checkpoints.len()),
        conv: ConvergenceTracker::default(),
        tally: InvariantTally::default(),
        final_matching: Matching::empty(n, m),
        rounds: Vec::new(),
    };
    let mut next_cp = spec.checkpoints.iter().copied().filter(|&t| t >= 1 && t <= spec.horizon).peekable();
    for _ in 0..spec.horizon {
        let out = sim.step()?;
        realized.update(&out.rewards);
        expected.update(&out.expected_rewards);
        core.conv.push(&out.matching);
        core.tally.observe(&out, n, m);
        hook(sim.policy(), &out)?;
        recorder(&out)?;
        while next_cp.peek() == Some(&out.t) {
            next_cp.next();
            core.checkpoints.push(Checkpoint {
                t: out.t,
                opt: realized.opt.clone(),
                pess: realized.pess.clone(),
                exp_opt: expected.opt.clone(),
                exp_pess: expected.pess.clone(),
            });
        }
        if out.t == spec.horizon {
            core.final_matching = out.matching.clone();
        }
        if spec.keep_rounds {
            core.rounds.push(out);
        }
    }
    Ok((sim.into_policy(), core))
}

fn finish(core: Core, phases: Option<Vec<PhaseRecord>>, anomalies: u64) -> MatchingRun {
    let limit = core.conv.limit().map(|l| l.iter().map(|f| f.expect("perfect")).collect());
    MatchingRun {
        checkpoints: core.checkpoints,
        convergence_round: core.conv.round(),
        limit,
        final_matching: core.final_matching,
        tally: core.tally,
        phases,
        anomalies,
        rounds: core.rounds,
    }
}

/// Runs one replication of a market algorithm, passing every round to `recorder`.
pub fn simulate_market_with(
    market: &Market,
    spec: &RunSpec,
    seed: u64,
    recorder: &mut dyn FnMut(&RoundOutcome) -> Result<()>,
) -> Result<MatchingRun> {
    let (n, m) = (market.n(), market.m());
    let forced = spec.forced.clone();
    match spec.algorithm {
        Algorithm::Cia => {
            let p = ForcedPrefix::new(Cia::default(), forced);
            let (_, core) = drive(market, p, spec, seed, recorder, &mut |_, _| Ok(()))?;
            Ok(finish(core, None, 0))
        }
        Algorithm::Drr => {
            if !forced.is_empty() {
                return Err(Error::param("forced_rounds", "not supported for the coordinated learner"));
            }
            let mut prev: Option<(bool, Vec<bool>)> = None;
            let mut consecutive = 0u64;
            let mut hook = |p: &DrrPolicy, out: &RoundOutcome| {
                let upd = p.is_updating(out.t);
                if let Some((prev_upd, prev_gamma)) = &prev {
                    if upd && *prev_upd {
                        consecutive +=
                            out.gamma.iter().zip(prev_gamma).filter(|(g, pg)| !**g && !**pg).count() as u64;
                    }
                }
                prev = Some((upd, out.gamma.clone()));
                Ok(())
            };
            let (p, mut core) = drive(market, DrrPolicy::new(n, m), spec, seed, recorder, &mut hook)?;
            core.tally.consecutive_update_abstentions = consecutive;
            Ok(finish(core, Some(p.phases().to_vec()), 0))
        }
        Algorithm::Ancdrr => {
            let inner = Decentralized::new((0..n).map(|_| AncdrrAgent::new(m)).collect(), 2);
            let (p, core) = drive(market, ForcedPrefix::new(inner, forced), spec, seed, recorder, &mut |_, _| Ok(()))?;
            Ok(finish(core, None, p.inner().anomalies()))
        }
        Algorithm::Eancdrr => {
            let lambda = spec.lambda.ok_or_else(|| Error::param("lambda", "required for eancdrr"))?;
            let agents = (0..n).map(|_| EancdrrAgent::new(m, lambda)).collect::<Result<Vec<_>>>()?;
            let inner = Decentralized::new(agents, 3);
            let (p, core) = drive(market, ForcedPrefix::new(inner, forced), spec, seed, recorder, &mut |_, _| Ok(()))?;
            Ok(finish(core, None, p.inner().anomalies()))
        }
        a => Err(Error::param("algorithm", format!("{a:?} is a single-agent hinted algorithm"))),
    }
}

pub fn simulate_market(market: &Market, spec: &RunSpec, seed: u64) -> Result<MatchingRun> {
    simulate_market_with(market, spec, seed, &mut |_| Ok(()))
}

#[derive(Clone, Debug, PartialEq)]
pub struct HintedRecord {
    /// (t, cumulative hinted regret)
    pub checkpoints: Vec<(u64, f64)>,
    pub pulls: Vec<u64>,
    /// Pull counts over the last quarter of the horizon.
    pub final_quarter_pulls: Vec<u64>,
    pub target_arm: usize,
    /// Pulled arm per round.
    pub pulled: Vec<usize>,
}

pub fn hinted_algo(spec: &RunSpec) -> Result<HintedAlgo> {
    Ok(match spec.algorithm {
        Algorithm::Allprobe => HintedAlgo::AllProbe { epsilon: spec.epsilon },
        Algorithm::Eap => HintedAlgo::Eap { i: spec.eap_rank, epsilon: spec.epsilon },
        Algorithm::Apem => HintedAlgo::Apem,
        a => return Err(Error::param("algorithm", format!("{a:?} is not a hinted algorithm"))),
    })
}

/// Runs a hinted bandit on the single agent's row of `market`.
pub fn simulate_hinted(market: &Market, spec: &RunSpec, seed: u64) -> Result<HintedRecord> {
    if market.n() != 1 {
        return Err(Error::param("market", format!("hinted algorithms need a 1-agent market, got n = {}", market.n())));
    }
    let algo = hinted_algo(spec)?;
    let env = ArmSet::new(market.agent_row(0), market.reward_kind())?;
    let run = run_hinted(&env, algo, spec.horizon, seed)?;
    let series = hinted_regret(run.steps.iter().map(|s| s.probes), &env, algo.target_rank());
    let checkpoints = spec
        .checkpoints
        .iter()
        .filter(|&&t| t >= 1 && t <= spec.horizon)
        .map(|&t| (t, series[t as usize - 1]))
        .collect();
    let quarter_start = spec.horizon - spec.horizon / 4 + 1;
    Ok(HintedRecord {
        checkpoints,
        pulls: run.pull_counts(1),
        final_quarter_pulls: run.pull_counts(quarter_start),
        target_arm: env.true_order()[algo.target_rank() - 1],
        pulled: run.steps.iter().map(|s| s.pulled).collect(),
    })
}
