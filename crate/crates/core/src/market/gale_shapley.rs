use std::collections::VecDeque;

use super::{Matching, PrefList};
use crate::error::{Error, Result, Side};

fn validate(lists: &[PrefList], len: usize, side: Side) -> Result<()> {
    for (i, l) in lists.iter().enumerate() {
        PrefList::new(l.as_slice().to_vec(), len)
            .map_err(|e| Error::MalformedPrefList(format!("{side} {i}: {e}")))?;
    }
    Ok(())
}

/// Deferred acceptance. The proposing side obtains its optimal stable matching.
pub fn gale_shapley(agent_prefs: &[PrefList], firm_prefs: &[PrefList], proposer: Side) -> Result<Matching> {
    let n = agent_prefs.len();
    let m = firm_prefs.len();
    if n > m {
        return Err(Error::InvalidMarket(format!("need n <= m, got n = {n}, m = {m}")));
    }
    validate(agent_prefs, m, Side::Agent)?;
    validate(firm_prefs, n, Side::Firm)?;
    let (props, recv) = match proposer {
        Side::Agent => (agent_prefs, firm_prefs),
        Side::Firm => (firm_prefs, agent_prefs),
    };
    let recv_rank: Vec<Vec<usize>> = recv.iter().map(PrefList::ranks).collect();
    let mut next = vec![0usize; props.len()];
    let mut held: Vec<Option<usize>> = vec![None; recv.len()];
    let mut free: VecDeque<usize> = (0..props.len()).collect();
    while let Some(p) = free.pop_front() {
        let Some(&r) = props[p].as_slice().get(next[p]) else {
            continue;
        };
        next[p] += 1;
        match held[r] {
            None => held[r] = Some(p),
            Some(q) if recv_rank[r][p] < recv_rank[r][q] => {
                held[r] = Some(p);
                free.push_back(q);
            }
            Some(_) => free.push_back(p),
        }
    }
    let mut agent = vec![None; n];
    match proposer {
        Side::Agent => {
            for (f, a) in held.iter().enumerate() {
                if let Some(a) = a {
                    agent[*a] = Some(f);
                }
            }
        }
        Side::Firm => agent = held,
    }
    Matching::from_agent_partners(agent, m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pl(v: &[usize]) -> PrefList {
        PrefList::new(v.to_vec(), v.len()).unwrap()
    }

    #[test]
    fn classic_two_by_two_sides_disagree() {
        // agents want opposite firms from what firms want
        let agents = vec![pl(&[0, 1]), pl(&[1, 0])];
        let firms = vec![pl(&[1, 0]), pl(&[0, 1])];
        let ap = gale_shapley(&agents, &firms, Side::Agent).unwrap();
        let fp = gale_shapley(&agents, &firms, Side::Firm).unwrap();
        assert_eq!(ap.agent_partners(), &[Some(0), Some(1)]);
        assert_eq!(fp.agent_partners(), &[Some(1), Some(0)]);
    }

    #[test]
    fn unbalanced_leaves_firms_vacant() {
        let agents = vec![pl(&[2, 0, 1])];
        let firms = vec![pl(&[0]), pl(&[0]), pl(&[0])];
        for side in [Side::Agent, Side::Firm] {
            let mt = gale_shapley(&agents, &firms, side).unwrap();
            assert_eq!(mt.agent_partner(0), Some(2));
        }
    }

    #[test]
    fn rejects_malformed_lists() {
        let agents = vec![PrefList::from_scores(&[0.1, 0.2])];
        let firms = vec![PrefList::from_scores(&[0.5])];
        assert!(gale_shapley(&agents, &firms, Side::Agent).is_err());
    }
}
