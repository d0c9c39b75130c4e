//! Synchronous round protocol: interviews, applications and hiring, feedback.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::estimation::EstimatorState;
use crate::firm::{FirmMode, FirmState};
use crate::market::{FirmSet, Market, Matching};

pub type SimRng = ChaCha8Rng;

/// How agents form their estimates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateMode {
    #[default]
    Learned,
    Oracle,
}

/// One agent's move in a round.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct AgentAction {
    /// Interviewed firms as a multiset; a repeated firm is sampled once per entry.
    pub interviews: Vec<usize>,
    /// Applied firms in acceptance priority order. Empty means the agent sits out.
    pub applications: Vec<usize>,
}

impl AgentAction {
    pub fn new(interviews: Vec<usize>, applications: Vec<usize>) -> Self {
        AgentAction { interviews, applications }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RoundOutcome {
    pub t: u64,
    pub interviews: Vec<Vec<usize>>,
    pub applications: Vec<Vec<usize>>,
    /// Hiring flag per firm.
    pub gamma: Vec<bool>,
    pub matching: Matching,
    /// Realized reward per agent.
    pub rewards: Vec<f64>,
    /// Mean of the realized reward's distribution (0 when unmatched).
    pub expected_rewards: Vec<f64>,
    /// Firms vacant this round.
    pub vacant: FirmSet,
    /// Vacant firms plus firms whose hire changed since the previous round.
    pub changed: FirmSet,
}

/// Everything a policy may consult when planning round `t`.
pub struct PlanContext<'a> {
    pub t: u64,
    pub n: usize,
    pub m: usize,
    pub agent_est: &'a EstimatorState,
    pub firm_est: &'a EstimatorState,
}

pub trait AgentPolicy {
    /// Interview budget k.
    fn budget(&self) -> usize;
    fn plan(&mut self, ctx: &PlanContext<'_>, rng: &mut SimRng) -> Result<Vec<AgentAction>>;
    fn observe(&mut self, outcome: &RoundOutcome) -> Result<()>;
}

impl<P: AgentPolicy + ?Sized> AgentPolicy for Box<P> {
    fn budget(&self) -> usize {
        (**self).budget()
    }
    fn plan(&mut self, ctx: &PlanContext<'_>, rng: &mut SimRng) -> Result<Vec<AgentAction>> {
        (**self).plan(ctx, rng)
    }
    fn observe(&mut self, outcome: &RoundOutcome) -> Result<()> {
        (**self).observe(outcome)
    }
}

/// Round-robin firm of agent `i` at round `t`, both 1-based.
pub fn round_robin_firm(i: usize, t: u64, m: usize) -> usize {
    ((t as usize + i) % m) + 1
}

/// 0-based round-robin firm of 0-based agent `a`.
pub(crate) fn rr_firm(a: usize, t: u64, m: usize) -> usize {
    round_robin_firm(a + 1, t, m) - 1
}

/// V' and V from the current and previous matchings.
pub fn compute_feedback(current: &Matching, previous: &Matching) -> (FirmSet, FirmSet) {
    let m = current.m();
    let vacant = FirmSet::from_indices(m, (0..m).filter(|&f| current.firm_partner(f).is_none()));
    let changed = FirmSet::from_indices(
        m,
        (0..m).filter(|&f| current.firm_partner(f).is_none() || current.firm_partner(f) != previous.firm_partner(f)),
    );
    (vacant, changed)
}

pub struct Simulation<P> {
    market: Market,
    policy: P,
    firm_mode: FirmMode,
    firms: Vec<FirmState>,
    agent_est: EstimatorState,
    firm_est: EstimatorState,
    previous: Matching,
    t: u64,
    env_rng: SimRng,
    policy_rng: SimRng,
}

impl<P: AgentPolicy> Simulation<P> {
    pub fn new(market: Market, policy: P, firm_mode: FirmMode, agent_estimates: EstimateMode, seed: u64) -> Self {
        let agent_est = match agent_estimates {
            EstimateMode::Learned => EstimatorState::agents(&market),
            EstimateMode::Oracle => EstimatorState::oracle(&market, Side::Agent),
        };
        let firm_est = match firm_mode {
            FirmMode::Uncertain => EstimatorState::firms(&market),
            FirmMode::Certain => EstimatorState::oracle(&market, Side::Firm),
        };
        let mut env_rng = SimRng::seed_from_u64(seed);
        env_rng.set_stream(0);
        let mut policy_rng = SimRng::seed_from_u64(seed);
        policy_rng.set_stream(1);
        Simulation {
            firms: vec![FirmState::new(market.n()); market.m()],
            previous: Matching::empty(market.n(), market.m()),
            market,
            policy,
            firm_mode,
            agent_est,
            firm_est,
            t: 0,
            env_rng,
            policy_rng,
        }
    }

    pub fn market(&self) -> &Market {
        &self.market
    }

    pub fn policy(&self) -> &P {
        &self.policy
    }

    pub fn into_policy(self) -> P {
        self.policy
    }

    pub fn firm_states(&self) -> &[FirmState] {
        &self.firms
    }

    pub fn agent_estimates(&self) -> &EstimatorState {
        &self.agent_est
    }

    pub fn firm_estimates(&self) -> &EstimatorState {
        &self.firm_est
    }

    /// Rounds played so far.
    pub fn round(&self) -> u64 {
        self.t
    }

    pub fn step(&mut self) -> Result<RoundOutcome> {
        let t = self.t + 1;
        let ctx = PlanContext {
            t,
            n: self.market.n(),
            m: self.market.m(),
            agent_est: &self.agent_est,
            firm_est: &self.firm_est,
        };
        let actions = self.policy.plan(&ctx, &mut self.policy_rng)?;
        self.play(actions)
    }

    /// Plays a round with externally chosen actions; the policy still observes the outcome.
    pub fn step_forced(&mut self, actions: Vec<AgentAction>) -> Result<RoundOutcome> {
        self.play(actions)
    }

    fn validate(&self, t: u64, actions: &[AgentAction]) -> Result<()> {
        let (n, m, k) = (self.market.n(), self.market.m(), self.policy.budget());
        if actions.len() != n {
            return Err(Error::protocol(t, format!("expected {n} agent actions, got {}", actions.len())));
        }
        for (a, act) in actions.iter().enumerate() {
            let len = act.interviews.len();
            if len < 2 || len > k {
                return Err(Error::protocol(t, format!("agent {a} interviews {len} firms, budget is 2..={k}")));
            }
            if let Some(&f) = act.interviews.iter().find(|&&f| f >= m) {
                return Err(Error::protocol(t, format!("agent {a} interviews firm {f} but m = {m}")));
            }
            if act.applications.len() > 2 {
                return Err(Error::protocol(t, format!("agent {a} applies to {} firms", act.applications.len())));
            }
            for (i, f) in act.applications.iter().enumerate() {
                if !act.interviews.contains(f) {
                    return Err(Error::protocol(t, format!("agent {a} applies to firm {f} without interviewing it")));
                }
                if act.applications[..i].contains(f) {
                    return Err(Error::protocol(t, format!("agent {a} applies to firm {f} twice")));
                }
            }
        }
        Ok(())
    }

    fn play(&mut self, actions: Vec<AgentAction>) -> Result<RoundOutcome> {
        let t = self.t + 1;
        self.validate(t, &actions)?;
        let (n, m) = (self.market.n(), self.market.m());

        for (a, act) in actions.iter().enumerate() {
            for &f in &act.interviews {
                let x = self.market.sample_reward(Side::Agent, a, f, &mut self.env_rng);
                let y = self.market.sample_reward(Side::Firm, a, f, &mut self.env_rng);
                self.agent_est.record(a, f, x)?;
                self.firm_est.record(f, a, y)?;
            }
        }

        let mut pools: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (a, act) in actions.iter().enumerate() {
            for &f in &act.applications {
                pools[f].push(a);
            }
        }
        let mut gamma = vec![true; m];
        let mut offers: Vec<Option<usize>> = vec![None; m];
        for f in 0..m {
            let est = self.firm_est.estimated_pref_list(f);
            gamma[f] = self.firms[f].decide(self.firm_mode, &pools[f], &est);
            if gamma[f] {
                offers[f] = est.first_where(|a| pools[f].contains(&a));
            }
        }
        let partners: Vec<Option<usize>> = actions
            .iter()
            .enumerate()
            .map(|(a, act)| act.applications.iter().copied().find(|&f| offers[f] == Some(a)))
            .collect();
        let matching = Matching::from_agent_partners(partners, m)?;
        for f in 0..m {
            self.firms[f].update(t, gamma[f], &pools[f], offers[f], matching.firm_partner(f));
        }

        let mut rewards = vec![0.0; n];
        let mut expected_rewards = vec![0.0; n];
        for (a, f) in matching.pairs() {
            rewards[a] = self.market.sample_reward(Side::Agent, a, f, &mut self.env_rng);
            expected_rewards[a] = self.market.agent_mean(a, f);
        }
        let (vacant, changed) = compute_feedback(&matching, &self.previous);

        let outcome = RoundOutcome {
            t,
            interviews: actions.iter().map(|x| x.interviews.clone()).collect(),
            applications: actions.into_iter().map(|x| x.applications).collect(),
            gamma,
            matching,
            rewards,
            expected_rewards,
            vacant,
            changed,
        };
        self.policy.observe(&outcome)?;
        self.previous = outcome.matching.clone();
        self.t = t;
        Ok(outcome)
    }
}

/// Runs `horizon` rounds, handing each outcome to `recorder`.
pub fn run_horizon<P: AgentPolicy>(
    sim: &mut Simulation<P>,
    horizon: u64,
    mut recorder: impl FnMut(&RoundOutcome) -> Result<()>,
) -> Result<()> {
    if horizon == 0 {
        return Err(Error::param("horizon", "must be at least 1"));
    }
    for _ in 0..horizon {
        let out = sim.step()?;
        recorder(&out)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardKind;

    struct Fixed(Vec<AgentAction>, usize);

    impl AgentPolicy for Fixed {
        fn budget(&self) -> usize {
            self.1
        }
        fn plan(&mut self, _: &PlanContext<'_>, _: &mut SimRng) -> Result<Vec<AgentAction>> {
            Ok(self.0.clone())
        }
        fn observe(&mut self, _: &RoundOutcome) -> Result<()> {
            Ok(())
        }
    }

    fn market(reward: RewardKind) -> Market {
        Market::new(
            vec![vec![0.9, 0.5, 0.1], vec![0.8, 0.6, 0.2]],
            vec![vec![0.3, 0.7], vec![0.6, 0.4], vec![0.5, 0.2]],
            reward,
        )
        .unwrap()
    }

    #[test]
    fn round_robin_example() {
        assert_eq!(round_robin_firm(1, 1, 3), 3);
        assert_eq!(round_robin_firm(2, 1, 3), 1);
        assert_eq!(rr_firm(0, 1, 3), 2);
    }

    #[test]
    fn firm_keeps_best_applicant() {
        let acts = vec![AgentAction::new(vec![0, 1], vec![0]), AgentAction::new(vec![0, 2], vec![0])];
        let mut sim = Simulation::new(market(RewardKind::PointMass), Fixed(acts, 2), FirmMode::Certain, EstimateMode::Learned, 1);
        let out = sim.step().unwrap();
        assert_eq!(out.matching.agent_partners(), &[None, Some(0)]);
        assert_eq!(out.rewards, vec![0.0, 0.8]);
        assert_eq!(out.vacant.iter().collect::<Vec<_>>(), vec![1, 2]);
        assert_eq!(out.changed.iter().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(sim.firm_states()[0].r, vec![1, 0]);
        let out2 = sim.step().unwrap();
        assert_eq!(out2.changed, out2.vacant);
    }

    #[test]
    fn interviews_update_both_sides() {
        let acts = vec![AgentAction::new(vec![0, 1], vec![]), AgentAction::new(vec![0, 0], vec![])];
        let mut sim = Simulation::new(market(RewardKind::Bernoulli), Fixed(acts, 2), FirmMode::Uncertain, EstimateMode::Learned, 1);
        sim.step().unwrap();
        assert_eq!(sim.agent_estimates().count(0, 0), 1);
        assert_eq!(sim.agent_estimates().count(0, 1), 1);
        assert_eq!(sim.agent_estimates().count(1, 0), 2);
        assert_eq!(sim.firm_estimates().count(0, 1), 2);
        assert_eq!(sim.firm_estimates().count(1, 0), 1);
    }

    #[test]
    fn malformed_actions_are_protocol_errors() {
        let cases = vec![
            vec![AgentAction::new(vec![0], vec![]), AgentAction::new(vec![0, 1], vec![])],
            vec![AgentAction::new(vec![0, 1, 2], vec![]), AgentAction::new(vec![0, 1], vec![])],
            vec![AgentAction::new(vec![0, 1], vec![2]), AgentAction::new(vec![0, 1], vec![])],
            vec![AgentAction::new(vec![0, 5], vec![]), AgentAction::new(vec![0, 1], vec![])],
        ];
        for acts in cases {
            let mut sim = Simulation::new(market(RewardKind::Bernoulli), Fixed(acts, 2), FirmMode::Certain, EstimateMode::Learned, 0);
            assert!(matches!(sim.step(), Err(Error::Protocol { round: 1, .. })));
        }
    }

    #[test]
    fn zero_horizon_rejected() {
        let acts = vec![AgentAction::new(vec![0, 1], vec![]); 2];
        let mut sim = Simulation::new(market(RewardKind::Bernoulli), Fixed(acts, 2), FirmMode::Certain, EstimateMode::Learned, 0);
        assert!(run_horizon(&mut sim, 0, |_| Ok(())).is_err());
    }

    #[test]
    fn feedback_examples() {
        let prev = Matching::from_agent_partners(vec![Some(0), Some(1)], 3).unwrap();
        let same = prev.clone();
        let (v1, v) = compute_feedback(&same, &prev);
        assert_eq!((v1.iter().collect::<Vec<_>>(), v.iter().collect::<Vec<_>>()), (vec![2], vec![2]));
        let swapped = Matching::from_agent_partners(vec![Some(1), Some(0)], 3).unwrap();
        let (v1, v) = compute_feedback(&swapped, &prev);
        assert!(!v1.contains(0) && v.contains(0) && v.contains(1));
    }
}
