use crate::engine::{AgentAction, AgentPolicy, PlanContext, RoundOutcome, SimRng};
use crate::error::Result;

/// Plays fixed actions for the first rounds, then hands over to the inner policy.
/// The inner policy observes every round, including forced ones.
pub struct ForcedPrefix<P> {
    inner: P,
    rounds: Vec<Vec<AgentAction>>,
}

impl<P: AgentPolicy> ForcedPrefix<P> {
    pub fn new(inner: P, rounds: Vec<Vec<AgentAction>>) -> Self {
        ForcedPrefix { inner, rounds }
    }

    pub fn inner(&self) -> &P {
        &self.inner
    }
}

impl<P: AgentPolicy> AgentPolicy for ForcedPrefix<P> {
    fn budget(&self) -> usize {
        self.inner.budget()
    }

    fn plan(&mut self, ctx: &PlanContext<'_>, rng: &mut SimRng) -> Result<Vec<AgentAction>> {
        match self.rounds.get(ctx.t as usize - 1) {
            Some(acts) => Ok(acts.clone()),
            None => self.inner.plan(ctx, rng),
        }
    }

    fn observe(&mut self, out: &RoundOutcome) -> Result<()> {
        self.inner.observe(out)
    }
}
