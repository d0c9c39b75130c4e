use rand::Rng;

use super::{CandidateClock, LocalAgent, LocalOutcome, LocalView};
use crate::engine::{AgentAction, SimRng};
use crate::error::{Error, Result};

/// Randomized two-application extension of the coordination-free learner
/// (interview budget 3).
#[derive(Clone, Debug)]
pub struct EancdrrAgent {
    pub clock: CandidateClock,
    lambda: f64,
    anchor: Option<usize>,
    anomalies: u64,
}

impl EancdrrAgent {
    pub fn new(m: usize, lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda < 1.0) {
            return Err(Error::param("lambda", format!("must lie in (0, 1), got {lambda}")));
        }
        Ok(EancdrrAgent { clock: CandidateClock::new(m), lambda, anchor: None, anomalies: 0 })
    }

    /// Firm the agent falls back on: its last match.
    pub fn anchor(&self) -> Option<usize> {
        self.anchor
    }
}

impl LocalAgent for EancdrrAgent {
    fn decide(&mut self, view: &LocalView<'_>, rng: &mut SimRng) -> Result<AgentAction> {
        let (target, fallback) = self.clock.pick(&view.pref_list(), self.anchor);
        self.anomalies += fallback as u64;
        let explore = rng.random::<f64>() < self.lambda;
        let rr = view.rr_firm();
        Ok(match self.anchor {
            None => AgentAction::new(vec![target, rr], vec![target]),
            Some(p) => {
                let apps = if explore && target != p { vec![target, p] } else { vec![p] };
                AgentAction::new(vec![target, p, rr], apps)
            }
        })
    }

    fn observe(&mut self, out: &LocalOutcome<'_>) -> Result<()> {
        self.clock.observe(out);
        if let Some(f) = out.matched {
            self.anchor = Some(f);
        }
        Ok(())
    }

    fn anomalies(&self) -> u64 {
        self.anomalies
    }
}
