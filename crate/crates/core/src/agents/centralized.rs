use crate::engine::{rr_firm, AgentAction, AgentPolicy, PlanContext, RoundOutcome, SimRng};
use crate::error::{Result, Side};
use crate::market::{gale_shapley, PrefList};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CiaPlan {
    pub apply: Vec<usize>,
    pub rr: Vec<usize>,
    /// `[apply, rr]` per agent; equal entries mean the firm is sampled twice.
    pub interviews: Vec<Vec<usize>>,
}

/// Agent-proposing deferred acceptance on the reported lists plus round-robin exploration.
pub fn cia_plan(agent_lists: &[PrefList], firm_lists: &[PrefList], t: u64) -> Result<CiaPlan> {
    let matching = gale_shapley(agent_lists, firm_lists, Side::Agent)?;
    let m = firm_lists.len();
    let apply: Vec<usize> = matching.agent_partners().iter().map(|f| f.expect("agents proposing with n <= m")).collect();
    let rr: Vec<usize> = (0..agent_lists.len()).map(|a| rr_firm(a, t, m)).collect();
    let interviews = apply.iter().zip(&rr).map(|(&a, &r)| vec![a, r]).collect();
    Ok(CiaPlan { apply, rr, interviews })
}

/// Central interview allocator.
#[derive(Clone, Debug, Default)]
pub struct Cia {
    /// Agent-rounds where the apply firm coincided with the round-robin firm.
    pub double_samples: u64,
}

impl AgentPolicy for Cia {
    fn budget(&self) -> usize {
        2
    }

    fn plan(&mut self, ctx: &PlanContext<'_>, _rng: &mut SimRng) -> Result<Vec<AgentAction>> {
        let plan = cia_plan(&ctx.agent_est.estimated_pref_lists(), &ctx.firm_est.estimated_pref_lists(), ctx.t)?;
        self.double_samples += plan.apply.iter().zip(&plan.rr).filter(|(a, r)| a == r).count() as u64;
        Ok(plan.interviews.into_iter().zip(plan.apply).map(|(i, a)| AgentAction::new(i, vec![a])).collect())
    }

    fn observe(&mut self, _: &RoundOutcome) -> Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(v: &[usize]) -> PrefList {
        PrefList::new(v.to_vec(), v.len()).unwrap()
    }

    #[test]
    fn single_agent_applies_to_top() {
        let plan = cia_plan(&[pl(&[1, 0, 2])], &[pl(&[0]), pl(&[0]), pl(&[0])], 4).unwrap();
        assert_eq!(plan.apply, vec![1]);
        assert_eq!(plan.rr, vec![(4 + 1) % 3]);
        assert_eq!(plan.interviews, vec![vec![1, 2]]);
    }

    #[test]
    fn rr_covers_all_firms() {
        let agents = vec![pl(&[0, 1, 2, 3]); 2];
        let firms = vec![pl(&[0, 1]); 4];
        for t0 in 1..6u64 {
            let mut seen = vec![vec![false; 4]; 2];
            for t in t0..t0 + 4 {
                let plan = cia_plan(&agents, &firms, t).unwrap();
                for a in 0..2 {
                    seen[a][plan.rr[a]] = true;
                }
            }
            assert!(seen.iter().flatten().all(|&b| b));
        }
    }
}
