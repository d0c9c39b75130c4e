//! Two-sided market model: means, preference lists, matchings.

mod gale_shapley;
mod generate;
mod stability;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result, Side};
use crate::reward::{RewardDist, RewardKind, RewardName};

pub use gale_shapley::gale_shapley;
pub use generate::{generate_alpha_reducible, generate_market, MarketParams};
pub use stability::{
    alpha_reducibility, blocking_pairs, enumerate_stable_matchings, every_submarket_has_fixed_pair, is_stable,
    StableBaselines, StableSet, ENUMERATION_LIMIT, SUBMARKET_LIMIT,
};

/// Peer indices ordered from most to least preferred.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PrefList(Vec<usize>);

impl PrefList {
    /// Checks that `order` is a permutation of `0..len`.
    pub fn new(order: Vec<usize>, len: usize) -> Result<Self> {
        if order.len() != len {
            return Err(Error::MalformedPrefList(format!("expected {len} entries, got {}", order.len())));
        }
        let mut seen = vec![false; len];
        for &p in &order {
            if p >= len {
                return Err(Error::MalformedPrefList(format!("peer {p} out of range 0..{len}")));
            }
            if std::mem::replace(&mut seen[p], true) {
                return Err(Error::MalformedPrefList(format!("peer {p} listed twice")));
            }
        }
        Ok(PrefList(order))
    }

    /// Sorts by decreasing score; equal scores keep ascending index order.
    pub fn from_scores(scores: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..scores.len()).collect();
        order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
        PrefList(order)
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn top(&self) -> Option<usize> {
        self.0.first().copied()
    }

    pub fn position(&self, peer: usize) -> Option<usize> {
        self.0.iter().position(|&p| p == peer)
    }

    /// `ranks()[p]` is the 0-based position of peer `p`.
    pub fn ranks(&self) -> Vec<usize> {
        let mut r = vec![usize::MAX; self.0.len()];
        for (i, &p) in self.0.iter().enumerate() {
            r[p] = i;
        }
        r
    }

    /// Most preferred peer satisfying `allowed`.
    pub fn first_where(&self, mut allowed: impl FnMut(usize) -> bool) -> Option<usize> {
        self.0.iter().copied().find(|&p| allowed(p))
    }

    pub fn top_k(&self, k: usize) -> &[usize] {
        &self.0[..k.min(self.0.len())]
    }
}

/// Set of firm indices stored as a membership mask.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct FirmSet(Vec<bool>);

impl FirmSet {
    pub fn empty(m: usize) -> Self {
        FirmSet(vec![false; m])
    }

    pub fn from_indices(m: usize, idx: impl IntoIterator<Item = usize>) -> Self {
        let mut s = Self::empty(m);
        for f in idx {
            s.insert(f);
        }
        s
    }

    pub fn insert(&mut self, f: usize) {
        self.0[f] = true;
    }

    pub fn contains(&self, f: usize) -> bool {
        self.0.get(f).copied().unwrap_or(false)
    }

    pub fn len(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.0.iter().any(|&b| b)
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.0.iter().enumerate().filter(|(_, &b)| b).map(|(i, _)| i)
    }

    pub fn is_subset(&self, other: &FirmSet) -> bool {
        self.iter().all(|f| other.contains(f))
    }
}

/// One-to-one partial matching between n agents and m firms.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Matching {
    agent: Vec<Option<usize>>,
    firm: Vec<Option<usize>>,
}

impl Matching {
    pub fn empty(n: usize, m: usize) -> Self {
        Matching { agent: vec![None; n], firm: vec![None; m] }
    }

    pub fn from_agent_partners(partners: Vec<Option<usize>>, m: usize) -> Result<Self> {
        let mut firm = vec![None; m];
        for (a, p) in partners.iter().enumerate() {
            if let Some(f) = *p {
                if f >= m {
                    return Err(Error::InvalidMarket(format!("agent {a} matched to firm {f} but m = {m}")));
                }
                if let Some(other) = firm[f].replace(a) {
                    return Err(Error::InvalidMarket(format!("firm {f} matched to agents {other} and {a}")));
                }
            }
        }
        Ok(Matching { agent: partners, firm })
    }

    pub fn n(&self) -> usize {
        self.agent.len()
    }

    pub fn m(&self) -> usize {
        self.firm.len()
    }

    pub fn agent_partner(&self, a: usize) -> Option<usize> {
        self.agent[a]
    }

    pub fn firm_partner(&self, f: usize) -> Option<usize> {
        self.firm[f]
    }

    pub fn agent_partners(&self) -> &[Option<usize>] {
        &self.agent
    }

    pub fn firm_partners(&self) -> &[Option<usize>] {
        &self.firm
    }

    /// Every agent is matched.
    pub fn is_perfect(&self) -> bool {
        self.agent.iter().all(Option::is_some)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.agent.iter().enumerate().filter_map(|(a, f)| f.map(|f| (a, f)))
    }
}

/// On-disk market description. Means are row-major: agent row `a` holds
/// `agent_means[a * m .. (a + 1) * m]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketFile {
    pub n: usize,
    pub m: usize,
    pub agent_means: Vec<f64>,
    pub firm_means: Vec<f64>,
    pub reward_kind: RewardName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
}

/// A market instance: n agents, m firms, mean rewards for both sides.
#[derive(Clone, Debug, PartialEq)]
pub struct Market {
    n: usize,
    m: usize,
    agent_means: Vec<f64>,
    firm_means: Vec<f64>,
    reward: RewardKind,
    agent_dists: Vec<RewardDist>,
    firm_dists: Vec<RewardDist>,
}

fn check_row(side: Side, row: usize, values: &[f64]) -> Result<()> {
    for &v in values {
        if !v.is_finite() || !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidMarket(format!("{side} row {row} has mean {v} outside [0, 1]")));
        }
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateMeans { side, row, value: w[0] });
    }
    Ok(())
}

impl Market {
    pub fn new(agent_rows: Vec<Vec<f64>>, firm_rows: Vec<Vec<f64>>, reward: RewardKind) -> Result<Self> {
        let n = agent_rows.len();
        let m = firm_rows.len();
        if n == 0 {
            return Err(Error::InvalidMarket("market needs at least one agent".into()));
        }
        if n > m {
            return Err(Error::InvalidMarket(format!("need n <= m, got n = {n}, m = {m}")));
        }
        for (a, row) in agent_rows.iter().enumerate() {
            if row.len() != m {
                return Err(Error::InvalidMarket(format!("agent row {a} has {} entries, expected {m}", row.len())));
            }
            check_row(Side::Agent, a, row)?;
        }
        for (f, row) in firm_rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::InvalidMarket(format!("firm row {f} has {} entries, expected {n}", row.len())));
            }
            check_row(Side::Firm, f, row)?;
        }
        let agent_means: Vec<f64> = agent_rows.into_iter().flatten().collect();
        let firm_means: Vec<f64> = firm_rows.into_iter().flatten().collect();
        let agent_dists = agent_means.iter().map(|&u| RewardDist::new(reward, u)).collect::<Result<_>>()?;
        let firm_dists = firm_means.iter().map(|&u| RewardDist::new(reward, u)).collect::<Result<_>>()?;
        Ok(Market { n, m, agent_means, firm_means, reward, agent_dists, firm_dists })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn reward_kind(&self) -> RewardKind {
        self.reward
    }

    /// u_{a,f}
    pub fn agent_mean(&self, a: usize, f: usize) -> f64 {
        self.agent_means[a * self.m + f]
    }

    /// u_{f,a}
    pub fn firm_mean(&self, f: usize, a: usize) -> f64 {
        self.firm_means[f * self.n + a]
    }

    pub fn agent_row(&self, a: usize) -> &[f64] {
        &self.agent_means[a * self.m..(a + 1) * self.m]
    }

    pub fn firm_row(&self, f: usize) -> &[f64] {
        &self.firm_means[f * self.n..(f + 1) * self.n]
    }

    pub fn agent_pref_list(&self, a: usize) -> PrefList {
        PrefList::from_scores(self.agent_row(a))
    }

    pub fn firm_pref_list(&self, f: usize) -> PrefList {
        PrefList::from_scores(self.firm_row(f))
    }

    pub fn agent_pref_lists(&self) -> Vec<PrefList> {
        (0..self.n).map(|a| self.agent_pref_list(a)).collect()
    }

    pub fn firm_pref_lists(&self) -> Vec<PrefList> {
        (0..self.m).map(|f| self.firm_pref_list(f)).collect()
    }

    pub fn reward_dist(&self, side: Side, agent: usize, firm: usize) -> &RewardDist {
        match side {
            Side::Agent => &self.agent_dists[agent * self.m + firm],
            Side::Firm => &self.firm_dists[firm * self.n + agent],
        }
    }

    /// Draws the reward `side` receives from the pair (agent, firm).
    pub fn sample_reward<R: Rng + ?Sized>(&self, side: Side, agent: usize, firm: usize, rng: &mut R) -> f64 {
        self.reward_dist(side, agent, firm).sample(rng)
    }

    pub fn to_file(&self) -> MarketFile {
        MarketFile {
            n: self.n,
            m: self.m,
            agent_means: self.agent_means.clone(),
            firm_means: self.firm_means.clone(),
            reward_kind: self.reward.name(),
            sigma: self.reward.sigma(),
        }
    }

    pub fn from_file(file: MarketFile) -> Result<Self> {
        let MarketFile { n, m, agent_means, firm_means, reward_kind, sigma } = file;
        if agent_means.len() != n * m || firm_means.len() != n * m {
            return Err(Error::InvalidMarket(format!(
                "expected {} means per side for n = {n}, m = {m}; got {} agent and {} firm",
                n * m,
                agent_means.len(),
                firm_means.len()
            )));
        }
        if m == 0 {
            return Err(Error::InvalidMarket("market needs at least one firm".into()));
        }
        let reward = RewardKind::from_parts(reward_kind, sigma)?;
        let agent_rows = agent_means.chunks(m).map(<[f64]>::to_vec).collect();
        let firm_rows = if n == 0 { Vec::new() } else { firm_means.chunks(n).map(<[f64]>::to_vec).collect() };
        Market::new(agent_rows, firm_rows, reward)
    }

    pub fn load_json(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Market::from_file(serde_json::from_str(&text)?)
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file())?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> Market {
        Market::new(
            vec![vec![0.9, 0.2, 0.5], vec![0.1, 0.8, 0.3]],
            vec![vec![0.4, 0.6], vec![0.7, 0.2], vec![0.5, 0.55]],
            RewardKind::Bernoulli,
        )
        .unwrap()
    }

    #[test]
    fn pref_lists_sort_by_decreasing_mean() {
        let mk = small();
        assert_eq!(mk.agent_pref_list(0).as_slice(), &[0, 2, 1]);
        assert_eq!(mk.agent_pref_list(1).as_slice(), &[1, 2, 0]);
        assert_eq!(mk.firm_pref_list(2).as_slice(), &[1, 0]);
    }

    #[test]
    fn rejects_duplicate_means_and_shape_errors() {
        let dup = Market::new(vec![vec![0.5, 0.5]], vec![vec![0.1], vec![0.2]], RewardKind::Bernoulli);
        assert!(matches!(dup, Err(Error::DuplicateMeans { side: Side::Agent, row: 0, .. })));
        let wide = Market::new(vec![vec![0.1], vec![0.2]], vec![vec![0.1, 0.2]], RewardKind::Bernoulli);
        assert!(matches!(wide, Err(Error::InvalidMarket(_))));
        let out = Market::new(vec![vec![1.5]], vec![vec![0.1]], RewardKind::Bernoulli);
        assert!(out.is_err());
    }

    #[test]
    fn pref_list_validation() {
        assert!(PrefList::new(vec![2, 0, 1], 3).is_ok());
        assert!(PrefList::new(vec![2, 2, 1], 3).is_err());
        assert!(PrefList::new(vec![0, 3, 1], 3).is_err());
        assert!(PrefList::new(vec![0, 1], 3).is_err());
        let p = PrefList::new(vec![2, 0, 1], 3).unwrap();
        assert_eq!(p.ranks(), vec![1, 2, 0]);
    }

    #[test]
    fn from_scores_breaks_ties_by_index() {
        assert_eq!(PrefList::from_scores(&[0.3, 0.7, 0.3, 0.7]).as_slice(), &[1, 3, 0, 2]);
    }

    #[test]
    fn matching_rejects_shared_firm() {
        assert!(Matching::from_agent_partners(vec![Some(1), Some(1)], 3).is_err());
        let mt = Matching::from_agent_partners(vec![Some(2), None], 3).unwrap();
        assert_eq!(mt.firm_partner(2), Some(0));
        assert!(!mt.is_perfect());
    }

    #[test]
    fn json_round_trip() {
        let mk = small();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        mk.save_json(&p).unwrap();
        assert_eq!(Market::load_json(&p).unwrap(), mk);
    }

    #[test]
    fn firm_set_ops() {
        let a = FirmSet::from_indices(4, [1, 3]);
        let b = FirmSet::from_indices(4, [0, 1, 3]);
        assert!(a.is_subset(&b));
        assert!(!b.is_subset(&a));
        assert_eq!(a.iter().collect::<Vec<_>>(), vec![1, 3]);
        assert_eq!(a.len(), 2);
    }
}
