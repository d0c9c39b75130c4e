use serde::Serialize;

use super::{record_rejections, LocalAgent, LocalOutcome, LocalView};
use crate::engine::{AgentAction, AgentPolicy, PlanContext, RoundOutcome, SimRng};
use crate::error::{Error, Result};
use crate::market::PrefList;

/// Updating phases last exactly 3n^2 rounds.
pub fn drr_phase_len(n: usize) -> u64 {
    3 * (n as u64) * (n as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Update,
    Commit,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Triggers {
    pub inc: bool,
    pub rej: bool,
    pub vac: bool,
}

impl Triggers {
    pub fn any(&self) -> bool {
        self.inc || self.rej || self.vac
    }

    pub fn label(&self) -> String {
        let mut parts = Vec::new();
        if self.inc {
            parts.push("inc");
        }
        if self.rej {
            parts.push("rej");
        }
        if self.vac {
            parts.push("vac");
        }
        if parts.is_empty() {
            "start".to_string()
        } else {
            parts.join("+")
        }
    }
}

/// Per-agent state of the coordinated learner.
#[derive(Clone, Debug)]
pub struct DrrAgent {
    n: usize,
    t_gs: u64,
    r: Vec<u64>,
    snapshot: Option<PrefList>,
    frozen: Option<Vec<bool>>,
    committed: Option<usize>,
    rej_seen: bool,
    fired: Triggers,
}

impl DrrAgent {
    pub fn new(n: usize, m: usize) -> Self {
        DrrAgent {
            n,
            t_gs: 1,
            r: vec![0; m],
            snapshot: None,
            frozen: None,
            committed: None,
            rej_seen: false,
            fired: Triggers::default(),
        }
    }

    pub fn t_gs(&self) -> u64 {
        self.t_gs
    }

    pub fn rejections(&self) -> &[u64] {
        &self.r
    }

    pub fn phase_at(&self, t: u64) -> Phase {
        if t < self.t_gs + drr_phase_len(self.n) {
            Phase::Update
        } else {
            Phase::Commit
        }
    }

    /// Firms that have not rejected the agent since the phase began.
    pub fn candidate_set(&self) -> Vec<usize> {
        (0..self.r.len()).filter(|&f| self.r[f] < self.t_gs).collect()
    }

    pub fn snapshot(&self) -> Option<&PrefList> {
        self.snapshot.as_ref()
    }

    pub fn committed_firm(&self) -> Option<usize> {
        self.committed
    }

    fn reset(&mut self, next: u64) {
        self.t_gs = next;
        self.r.iter_mut().for_each(|x| *x = 0);
        self.snapshot = None;
        self.frozen = None;
        self.committed = None;
        self.rej_seen = false;
    }
}

impl LocalAgent for DrrAgent {
    fn decide(&mut self, view: &LocalView<'_>, _rng: &mut SimRng) -> Result<AgentAction> {
        let t = view.t;
        let current = view.pref_list();
        let phase = self.phase_at(t);
        let snapshot = self.snapshot.get_or_insert_with(|| current.clone());
        let rr = view.rr_firm();
        self.fired = Triggers::default();
        match phase {
            Phase::Update => {
                let (r, t_gs) = (&self.r, self.t_gs);
                let f = snapshot
                    .first_where(|f| r[f] < t_gs)
                    .ok_or_else(|| Error::protocol(t, format!("agent {} has an empty candidate set", view.agent)))?;
                Ok(AgentAction::new(vec![f, rr], vec![f]))
            }
            Phase::Commit => {
                if self.frozen.is_none() {
                    let frozen: Vec<bool> = self.r.iter().map(|&x| x < self.t_gs).collect();
                    self.committed = snapshot.first_where(|f| frozen[f]);
                    self.frozen = Some(frozen);
                }
                let frozen = self.frozen.as_ref().expect("set above");
                let cur = current
                    .first_where(|f| frozen[f])
                    .ok_or_else(|| Error::protocol(t, format!("agent {} has an empty candidate set", view.agent)))?;
                self.fired.inc = Some(cur) != self.committed;
                self.fired.rej = self.rej_seen;
                if self.fired.any() {
                    Ok(AgentAction::new(vec![cur, rr], vec![]))
                } else {
                    Ok(AgentAction::new(vec![cur, rr], vec![cur]))
                }
            }
        }
    }

    fn observe(&mut self, out: &LocalOutcome<'_>) -> Result<()> {
        let t = out.t;
        record_rejections(&mut self.r, out);
        if out.applied.iter().any(|&f| out.vacant.contains(f)) {
            self.rej_seen = true;
        }
        let m = self.r.len();
        self.fired.vac = self.phase_at(t) == Phase::Commit && out.vacant.len() > m - self.n;
        if self.fired.any() {
            self.reset(t + 1);
        }
        Ok(())
    }
}

/// One updating/committing cycle of the coordinated learner.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseRecord {
    pub index: usize,
    pub t_gs: u64,
    /// Switch conditions that ended the previous phase.
    pub cause: Triggers,
    /// Committed firm per agent, once the phase reached committing.
    pub committed: Option<Vec<usize>>,
    /// Committed firms are pairwise distinct.
    pub perfect: Option<bool>,
    /// Every committed firm was among the agent's top-n snapshot firms.
    pub committed_in_top_n: Option<bool>,
}

/// The coordinated learner for all agents, with phase bookkeeping.
pub struct DrrPolicy {
    agents: Vec<DrrAgent>,
    n: usize,
    phases: Vec<PhaseRecord>,
}

impl DrrPolicy {
    pub fn new(n: usize, m: usize) -> Self {
        DrrPolicy {
            agents: (0..n).map(|_| DrrAgent::new(n, m)).collect(),
            n,
            phases: vec![PhaseRecord {
                index: 0,
                t_gs: 1,
                cause: Triggers::default(),
                committed: None,
                perfect: None,
                committed_in_top_n: None,
            }],
        }
    }

    pub fn agents(&self) -> &[DrrAgent] {
        &self.agents
    }

    pub fn phases(&self) -> &[PhaseRecord] {
        &self.phases
    }

    pub fn is_updating(&self, t: u64) -> bool {
        let len = drr_phase_len(self.n);
        let p = self.phases.iter().rev().find(|p| p.t_gs <= t);
        p.is_some_and(|p| t < p.t_gs + len)
    }
}

impl AgentPolicy for DrrPolicy {
    fn budget(&self) -> usize {
        2
    }

    fn plan(&mut self, ctx: &PlanContext<'_>, rng: &mut SimRng) -> Result<Vec<AgentAction>> {
        let acts = self
            .agents
            .iter_mut()
            .enumerate()
            .map(|(a, ag)| ag.decide(&LocalView::new(a, ctx.t, ctx.n, ctx.m, ctx.agent_est), rng))
            .collect::<Result<Vec<_>>>()?;
        let rec = self.phases.last_mut().expect("phase");
        if rec.committed.is_none() && self.agents[0].phase_at(ctx.t) == Phase::Commit {
            let committed: Vec<usize> = self.agents.iter().map(|ag| ag.committed.expect("committing")).collect();
            let mut seen = vec![false; ctx.m];
            let perfect = committed.iter().all(|&f| !std::mem::replace(&mut seen[f], true));
            let top_n = self.agents.iter().zip(&committed).all(|(ag, f)| {
                ag.snapshot.as_ref().is_some_and(|s| s.top_k(self.n).contains(f))
            });
            rec.committed = Some(committed);
            rec.perfect = Some(perfect);
            rec.committed_in_top_n = Some(top_n);
        }
        Ok(acts)
    }

    fn observe(&mut self, out: &RoundOutcome) -> Result<()> {
        let mut cause = Triggers::default();
        let before = self.agents[0].t_gs;
        for (a, ag) in self.agents.iter_mut().enumerate() {
            ag.observe(&LocalOutcome::of(a, out))?;
            cause.inc |= ag.fired.inc;
            cause.rej |= ag.fired.rej;
            cause.vac |= ag.fired.vac;
        }
        let t_gs = self.agents[0].t_gs;
        if let Some(ag) = self.agents.iter().find(|ag| ag.t_gs != t_gs) {
            return Err(Error::protocol(
                out.t,
                format!("agents out of sync: phase starts {} and {}", t_gs, ag.t_gs),
            ));
        }
        if t_gs != before {
            self.phases.push(PhaseRecord {
                index: self.phases.len(),
                t_gs,
                cause,
                committed: None,
                perfect: None,
                committed_in_top_n: None,
            });
        }
        Ok(())
    }
}
