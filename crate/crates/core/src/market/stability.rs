use super::{gale_shapley, Market, Matching, PrefList};
use crate::error::{Error, Result, Side};

/// Largest n accepted by [`enumerate_stable_matchings`].
pub const ENUMERATION_LIMIT: usize = 8;

/// Pairs (a, f) not matched together where both prefer each other to their
/// current partners. Unmatched counts as worse than anything.
pub fn blocking_pairs(matching: &Matching, agent_prefs: &[PrefList], firm_prefs: &[PrefList]) -> Vec<(usize, usize)> {
    let arank: Vec<Vec<usize>> = agent_prefs.iter().map(PrefList::ranks).collect();
    let frank: Vec<Vec<usize>> = firm_prefs.iter().map(PrefList::ranks).collect();
    let mut out = Vec::new();
    for a in 0..agent_prefs.len() {
        let cur_a = matching.agent_partner(a).map_or(usize::MAX, |f| arank[a][f]);
        for f in 0..firm_prefs.len() {
            if matching.agent_partner(a) == Some(f) || arank[a][f] >= cur_a {
                continue;
            }
            let cur_f = matching.firm_partner(f).map_or(usize::MAX, |b| frank[f][b]);
            if frank[f][a] < cur_f {
                out.push((a, f));
            }
        }
    }
    out
}

pub fn is_stable(matching: &Matching, agent_prefs: &[PrefList], firm_prefs: &[PrefList]) -> bool {
    blocking_pairs(matching, agent_prefs, firm_prefs).is_empty()
}

/// All stable matchings plus per-participant extreme partners.
#[derive(Clone, Debug, PartialEq)]
pub struct StableSet {
    pub matchings: Vec<Matching>,
    /// Best stable partner of each agent.
    pub agent_best: Vec<usize>,
    pub agent_worst: Vec<usize>,
    /// Best stable partner of each firm, `None` for firms unmatched in every stable matching.
    pub firm_best: Vec<Option<usize>>,
    pub firm_worst: Vec<Option<usize>>,
}

/// Brute-force enumeration with pairwise pruning. Limited to n <= 8.
pub fn enumerate_stable_matchings(agent_prefs: &[PrefList], firm_prefs: &[PrefList]) -> Result<StableSet> {
    let n = agent_prefs.len();
    let m = firm_prefs.len();
    if n > ENUMERATION_LIMIT {
        return Err(Error::TooLarge { n, limit: ENUMERATION_LIMIT });
    }
    if n > m {
        return Err(Error::InvalidMarket(format!("need n <= m, got n = {n}, m = {m}")));
    }
    for l in agent_prefs {
        PrefList::new(l.as_slice().to_vec(), m)?;
    }
    for l in firm_prefs {
        PrefList::new(l.as_slice().to_vec(), n)?;
    }
    let arank: Vec<Vec<usize>> = agent_prefs.iter().map(PrefList::ranks).collect();
    let frank: Vec<Vec<usize>> = firm_prefs.iter().map(PrefList::ranks).collect();

    let mut found = Vec::new();
    let mut assign: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; m];

    fn rec(
        assign: &mut Vec<usize>,
        used: &mut [bool],
        n: usize,
        arank: &[Vec<usize>],
        frank: &[Vec<usize>],
        found: &mut Vec<Vec<usize>>,
    ) {
        let a = assign.len();
        if a == n {
            // remaining check: agents against vacant firms
            for (b, &g) in assign.iter().enumerate() {
                for (f, &u) in used.iter().enumerate() {
                    if !u && arank[b][f] < arank[b][g] {
                        return;
                    }
                }
            }
            found.push(assign.clone());
            return;
        }
        for f in 0..used.len() {
            if used[f] {
                continue;
            }
            let ok = assign.iter().enumerate().all(|(b, &g)| {
                let ab = arank[a][g] < arank[a][f] && frank[g][a] < frank[g][b];
                let ba = arank[b][f] < arank[b][g] && frank[f][b] < frank[f][a];
                !ab && !ba
            });
            if !ok {
                continue;
            }
            used[f] = true;
            assign.push(f);
            rec(assign, used, n, arank, frank, found);
            assign.pop();
            used[f] = false;
        }
    }
    rec(&mut assign, &mut used, n, &arank, &frank, &mut found);

    let mut agent_best = vec![usize::MAX; n];
    let mut agent_worst = vec![usize::MAX; n];
    let mut firm_best: Vec<Option<usize>> = vec![None; m];
    let mut firm_worst: Vec<Option<usize>> = vec![None; m];
    let mut matchings = Vec::with_capacity(found.len());
    for asg in &found {
        for (a, &f) in asg.iter().enumerate() {
            if agent_best[a] == usize::MAX || arank[a][f] < arank[a][agent_best[a]] {
                agent_best[a] = f;
            }
            if agent_worst[a] == usize::MAX || arank[a][f] > arank[a][agent_worst[a]] {
                agent_worst[a] = f;
            }
            if firm_best[f].map_or(true, |b| frank[f][a] < frank[f][b]) {
                firm_best[f] = Some(a);
            }
            if firm_worst[f].map_or(true, |b| frank[f][a] > frank[f][b]) {
                firm_worst[f] = Some(a);
            }
        }
        matchings.push(Matching::from_agent_partners(asg.iter().map(|&f| Some(f)).collect(), m)?);
    }
    Ok(StableSet { matchings, agent_best, agent_worst, firm_best, firm_worst })
}

/// Agent-optimal and agent-pessimal stable partners via deferred acceptance.
#[derive(Clone, Debug, PartialEq)]
pub struct StableBaselines {
    pub agent_best: Vec<usize>,
    pub agent_worst: Vec<usize>,
    pub firm_best: Vec<Option<usize>>,
    pub firm_worst: Vec<Option<usize>>,
    /// u_{a, best stable partner}
    pub opt_means: Vec<f64>,
    pub pess_means: Vec<f64>,
}

impl StableBaselines {
    pub fn new(market: &Market) -> Result<Self> {
        let ap = market.agent_pref_lists();
        let fp = market.firm_pref_lists();
        let best = gale_shapley(&ap, &fp, Side::Agent)?;
        let worst = gale_shapley(&ap, &fp, Side::Firm)?;
        let agent_best: Vec<usize> = best.agent_partners().iter().map(|f| f.expect("perfect")).collect();
        let agent_worst: Vec<usize> = worst.agent_partners().iter().map(|f| f.expect("perfect")).collect();
        let opt_means = agent_best.iter().enumerate().map(|(a, &f)| market.agent_mean(a, f)).collect();
        let pess_means = agent_worst.iter().enumerate().map(|(a, &f)| market.agent_mean(a, f)).collect();
        Ok(StableBaselines {
            agent_best,
            agent_worst,
            // firms fare best in the agent-pessimal matching
            firm_best: worst.firm_partners().to_vec(),
            firm_worst: best.firm_partners().to_vec(),
            opt_means,
            pess_means,
        })
    }

    pub fn is_unique(&self) -> bool {
        self.agent_best == self.agent_worst
    }
}

/// Repeatedly removes mutual-top pairs. `None` if some sub-market reached has none.
pub fn alpha_reducibility(agent_prefs: &[PrefList], firm_prefs: &[PrefList]) -> Option<Vec<(usize, usize)>> {
    let n = agent_prefs.len();
    let m = firm_prefs.len();
    let mut agent_left = vec![true; n];
    let mut firm_left = vec![true; m];
    let mut seq = Vec::with_capacity(n);
    for _ in 0..n {
        let pair = (0..n).filter(|&a| agent_left[a]).find_map(|a| {
            let f = agent_prefs[a].first_where(|f| firm_left[f])?;
            let top = firm_prefs[f].first_where(|b| agent_left[b])?;
            (top == a).then_some((a, f))
        })?;
        agent_left[pair.0] = false;
        firm_left[pair.1] = false;
        seq.push(pair);
    }
    Some(seq)
}

/// Largest n + m accepted by [`every_submarket_has_fixed_pair`].
pub const SUBMARKET_LIMIT: usize = 20;

/// Exhaustive check that every non-empty sub-market has a mutual-top pair.
pub fn every_submarket_has_fixed_pair(agent_prefs: &[PrefList], firm_prefs: &[PrefList]) -> Result<bool> {
    let (n, m) = (agent_prefs.len(), firm_prefs.len());
    if n + m > SUBMARKET_LIMIT {
        return Err(Error::TooLarge { n: n + m, limit: SUBMARKET_LIMIT });
    }
    for amask in 1u32..(1 << n) {
        for fmask in 1u32..(1 << m) {
            let has = (0..n).filter(|a| amask >> a & 1 == 1).any(|a| {
                let f = agent_prefs[a].first_where(|f| fmask >> f & 1 == 1).expect("non-empty");
                firm_prefs[f].first_where(|b| amask >> b & 1 == 1) == Some(a)
            });
            if !has {
                return Ok(false);
            }
        }
    }
    Ok(true)
}
