use super::{record_rejections, LocalAgent, LocalOutcome, LocalView};
use crate::engine::{AgentAction, SimRng};
use crate::error::Result;
use crate::market::PrefList;

/// Rejection times and last hiring-change times per firm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CandidateClock {
    pub r: Vec<u64>,
    /// Last round each firm appeared in V (0 = never).
    pub last_change: Vec<u64>,
}

impl CandidateClock {
    pub fn new(m: usize) -> Self {
        CandidateClock { r: vec![0; m], last_change: vec![0; m] }
    }

    /// Never rejected, or changed its hire after the last rejection.
    pub fn is_candidate(&self, f: usize) -> bool {
        self.r[f] == 0 || self.last_change[f] > self.r[f]
    }

    pub fn candidates(&self) -> Vec<usize> {
        (0..self.r.len()).filter(|&f| self.is_candidate(f)).collect()
    }

    pub fn observe(&mut self, out: &LocalOutcome<'_>) {
        record_rejections(&mut self.r, out);
        for f in out.changed.iter() {
            self.last_change[f] = out.t;
        }
    }

    /// Best candidate, else `fallback`, else the estimated top. The flag marks a fallback.
    pub(crate) fn pick(&self, list: &PrefList, fallback: Option<usize>) -> (usize, bool) {
        match list.first_where(|f| self.is_candidate(f)) {
            Some(f) => (f, false),
            None => (fallback.or(list.top()).expect("m >= 1"), true),
        }
    }
}

/// Coordination-free learner driven by the hiring-change feedback.
#[derive(Clone, Debug)]
pub struct AncdrrAgent {
    pub clock: CandidateClock,
    prev_apply: Option<usize>,
    anomalies: u64,
}

impl AncdrrAgent {
    pub fn new(m: usize) -> Self {
        AncdrrAgent { clock: CandidateClock::new(m), prev_apply: None, anomalies: 0 }
    }
}

impl LocalAgent for AncdrrAgent {
    fn decide(&mut self, view: &LocalView<'_>, _rng: &mut SimRng) -> Result<AgentAction> {
        let (f, fallback) = self.clock.pick(&view.pref_list(), self.prev_apply);
        self.anomalies += fallback as u64;
        Ok(AgentAction::new(vec![f, view.rr_firm()], vec![f]))
    }

    fn observe(&mut self, out: &LocalOutcome<'_>) -> Result<()> {
        self.clock.observe(out);
        self.prev_apply = out.applied.first().copied();
        Ok(())
    }

    fn anomalies(&self) -> u64 {
        self.anomalies
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::FirmSet;

    #[test]
    fn candidate_set_examples() {
        let mut c = CandidateClock::new(3);
        assert_eq!(c.candidates(), vec![0, 1, 2]);
        c.r[0] = 5;
        assert!(!c.is_candidate(0));
        c.last_change[0] = 7;
        assert!(c.is_candidate(0));
    }

    #[test]
    fn rejection_and_change_in_same_round_excludes() {
        let mut c = CandidateClock::new(2);
        let vac = FirmSet::from_indices(2, [1]);
        let changed = FirmSet::from_indices(2, [0, 1]);
        c.observe(&LocalOutcome { t: 4, applied: &[0], matched: None, vacant: &vac, changed: &changed });
        assert_eq!(c.r, vec![4, 0]);
        assert_eq!(c.candidates(), vec![1]);
    }

    #[test]
    fn empty_candidates_fall_back() {
        let mut c = CandidateClock::new(2);
        c.r = vec![3, 3];
        let list = PrefList::new(vec![1, 0], 2).unwrap();
        assert_eq!(c.pick(&list, Some(0)), (0, true));
        assert_eq!(c.pick(&list, None), (1, true));
    }
}
