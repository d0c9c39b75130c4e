//! Agent-side policies: the centralized allocator and the decentralized learners.

mod ancdrr;
mod centralized;
mod drr;
mod eancdrr;
mod forced;

use crate::engine::{rr_firm, AgentAction, AgentPolicy, PlanContext, RoundOutcome, SimRng};
use crate::error::Result;
use crate::estimation::EstimatorState;
use crate::market::{FirmSet, PrefList};

pub use ancdrr::{AncdrrAgent, CandidateClock};
pub use centralized::{cia_plan, Cia, CiaPlan};
pub use drr::{drr_phase_len, DrrAgent, DrrPolicy, Phase, PhaseRecord, Triggers};
pub use eancdrr::EancdrrAgent;
pub use forced::ForcedPrefix;

/// What a decentralized agent sees before acting: its own estimates only.
pub struct LocalView<'a> {
    pub agent: usize,
    pub t: u64,
    pub n: usize,
    pub m: usize,
    est: &'a EstimatorState,
}

impl<'a> LocalView<'a> {
    pub fn new(agent: usize, t: u64, n: usize, m: usize, est: &'a EstimatorState) -> Self {
        LocalView { agent, t, n, m, est }
    }

    pub fn mean(&self, f: usize) -> Option<f64> {
        self.est.mean(self.agent, f)
    }

    pub fn pref_list(&self) -> PrefList {
        self.est.estimated_pref_list(self.agent)
    }

    pub fn rr_firm(&self) -> usize {
        rr_firm(self.agent, self.t, self.m)
    }
}

/// What a decentralized agent learns after a round: its own result plus the
/// public firm-side feedback. Identities of other hires are never exposed.
pub struct LocalOutcome<'a> {
    pub t: u64,
    pub applied: &'a [usize],
    pub matched: Option<usize>,
    pub vacant: &'a FirmSet,
    pub changed: &'a FirmSet,
}

impl<'a> LocalOutcome<'a> {
    pub fn of(agent: usize, out: &'a RoundOutcome) -> Self {
        LocalOutcome {
            t: out.t,
            applied: &out.applications[agent],
            matched: out.matching.agent_partner(agent),
            vacant: &out.vacant,
            changed: &out.changed,
        }
    }
}

pub trait LocalAgent {
    fn decide(&mut self, view: &LocalView<'_>, rng: &mut SimRng) -> Result<AgentAction>;
    fn observe(&mut self, out: &LocalOutcome<'_>) -> Result<()>;
    /// Rounds where the agent fell back because its candidate set was empty.
    fn anomalies(&self) -> u64 {
        0
    }
}

/// Runs one independent [`LocalAgent`] per agent.
pub struct Decentralized<A> {
    agents: Vec<A>,
    budget: usize,
}

impl<A: LocalAgent> Decentralized<A> {
    pub fn new(agents: Vec<A>, budget: usize) -> Self {
        Decentralized { agents, budget }
    }

    pub fn agents(&self) -> &[A] {
        &self.agents
    }

    pub fn anomalies(&self) -> u64 {
        self.agents.iter().map(LocalAgent::anomalies).sum()
    }
}

impl<A: LocalAgent> AgentPolicy for Decentralized<A> {
    fn budget(&self) -> usize {
        self.budget
    }

    fn plan(&mut self, ctx: &PlanContext<'_>, rng: &mut SimRng) -> Result<Vec<AgentAction>> {
        self.agents
            .iter_mut()
            .enumerate()
            .map(|(a, ag)| ag.decide(&LocalView::new(a, ctx.t, ctx.n, ctx.m, ctx.agent_est), rng))
            .collect()
    }

    fn observe(&mut self, out: &RoundOutcome) -> Result<()> {
        for (a, ag) in self.agents.iter_mut().enumerate() {
            ag.observe(&LocalOutcome::of(a, out))?;
        }
        Ok(())
    }
}

/// r update shared by the decentralized learners: an applied firm that kept
/// a hire but not this agent rejected it.
pub(crate) fn record_rejections(r: &mut [u64], out: &LocalOutcome<'_>) {
    for &f in out.applied {
        if out.matched != Some(f) && !out.vacant.contains(f) {
            r[f] = out.t;
        }
    }
}
