//! Regret accounting, reward gaps, convergence and plateau diagnostics.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimation::{validity, EstimatorState};
use crate::market::{Market, Matching, PrefList, StableBaselines};

/// Cumulative optimal and pessimal regret per agent.
#[derive(Clone, Debug, PartialEq)]
pub struct RegretSeries {
    pub opt_baseline: Vec<f64>,
    pub pess_baseline: Vec<f64>,
    pub opt: Vec<f64>,
    pub pess: Vec<f64>,
    pub rounds: u64,
}

impl RegretSeries {
    pub fn new(opt_baseline: Vec<f64>, pess_baseline: Vec<f64>) -> Self {
        let n = opt_baseline.len();
        RegretSeries { opt_baseline, pess_baseline, opt: vec![0.0; n], pess: vec![0.0; n], rounds: 0 }
    }

    pub fn from_baselines(b: &StableBaselines) -> Self {
        Self::new(b.opt_means.clone(), b.pess_means.clone())
    }

    /// Adds one round of rewards.
    pub fn update(&mut self, rewards: &[f64]) {
        for (a, &x) in rewards.iter().enumerate() {
            self.opt[a] += self.opt_baseline[a] - x;
            self.pess[a] += self.pess_baseline[a] - x;
        }
        self.rounds += 1;
    }
}

/// Reward gaps relative to stable partners. Firm rows are `None` for firms
/// left unmatched in every stable matching.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapTable {
    pub agent_opt: Vec<Vec<f64>>,
    pub agent_pess: Vec<Vec<f64>>,
    pub firm_opt: Vec<Option<Vec<f64>>>,
    pub firm_pess: Vec<Option<Vec<f64>>>,
    /// Smallest positive optimal gap per agent (`None` if the row has no positive gap).
    pub agent_min: Vec<Option<f64>>,
    pub firm_min: Vec<Option<f64>>,
}

fn min_positive(row: &[f64]) -> Option<f64> {
    row.iter().copied().filter(|&g| g > 0.0).min_by(f64::total_cmp)
}

pub fn gap_table(market: &Market, b: &StableBaselines) -> GapTable {
    let gaps = |row: &[f64], base: usize| row.iter().map(|&u| (row[base] - u).abs()).collect::<Vec<_>>();
    let agent_opt: Vec<Vec<f64>> = (0..market.n()).map(|a| gaps(market.agent_row(a), b.agent_best[a])).collect();
    let agent_pess = (0..market.n()).map(|a| gaps(market.agent_row(a), b.agent_worst[a])).collect();
    let firm_opt: Vec<Option<Vec<f64>>> =
        (0..market.m()).map(|f| b.firm_best[f].map(|a| gaps(market.firm_row(f), a))).collect();
    let firm_pess = (0..market.m()).map(|f| b.firm_worst[f].map(|a| gaps(market.firm_row(f), a))).collect();
    GapTable {
        agent_min: agent_opt.iter().map(|r| min_positive(r)).collect(),
        firm_min: firm_opt.iter().map(|r| r.as_deref().and_then(min_positive)).collect(),
        agent_opt,
        agent_pess,
        firm_opt,
        firm_pess,
    }
}

/// Streaming form of [`convergence_round`].
#[derive(Clone, Debug, Default)]
pub struct ConvergenceTracker {
    last: Option<Vec<Option<usize>>>,
    since: Option<u64>,
    t: u64,
}

impl ConvergenceTracker {
    pub fn push(&mut self, matching: &Matching) {
        self.t += 1;
        let cur = matching.agent_partners();
        let perfect = matching.is_perfect();
        let same = self.last.as_deref() == Some(cur);
        self.since = match (perfect, same, self.since) {
            (false, _, _) => None,
            (true, true, Some(s)) => Some(s),
            (true, _, _) => Some(self.t),
        };
        self.last = Some(cur.to_vec());
    }

    /// First round of the final constant perfect stretch.
    pub fn round(&self) -> Option<u64> {
        self.since
    }

    pub fn limit(&self) -> Option<&[Option<usize>]> {
        self.since.and(self.last.as_deref())
    }
}

/// Smallest t from which every agent keeps the same partner through the end.
pub fn convergence_round(log: &[Matching]) -> Option<u64> {
    let mut tr = ConvergenceTracker::default();
    for mt in log {
        tr.push(mt);
    }
    tr.round()
}

/// Early and late cumulative regret values.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Plateau {
    pub early: f64,
    pub late: f64,
    /// late / early; 1.0 when both are zero.
    pub ratio: f64,
    pub zero_denominator: bool,
}

/// Absolute regret treated as zero.
pub const ZERO_SLACK: f64 = 1e-9;

impl Plateau {
    /// Growth from early to late is at most `(tol - 1) * |early|`. For a
    /// positive early value this is `ratio <= tol`.
    pub fn within(&self, tol: f64) -> bool {
        if self.zero_denominator {
            return self.late <= ZERO_SLACK;
        }
        self.late - self.early <= (tol - 1.0) * self.early.abs()
    }
}

/// `series[t - 1]` is the cumulative value after round `t`.
pub fn plateau_ratio(series: &[f64], t_early: u64, t_late: u64) -> Result<Plateau> {
    if t_early == 0 || t_early >= t_late {
        return Err(Error::param("t_early", format!("need 1 <= t_early < t_late, got {t_early} and {t_late}")));
    }
    if t_late as usize > series.len() {
        return Err(Error::param("t_late", format!("{t_late} exceeds series length {}", series.len())));
    }
    Ok(plateau_from_values(series[t_early as usize - 1], series[t_late as usize - 1]))
}

pub fn plateau_from_values(early: f64, late: f64) -> Plateau {
    if early.abs() <= ZERO_SLACK {
        let ratio = if late.abs() <= ZERO_SLACK { 1.0 } else { f64::INFINITY.copysign(late) };
        return Plateau { early, late, ratio, zero_denominator: true };
    }
    Plateau { early, late, ratio: late / early, zero_denominator: false }
}

/// Counts rounds where an estimated list is invalid for a tracked (row, target) pair.
#[derive(Clone, Debug)]
pub struct InvalidityCounter {
    targets: Vec<(usize, usize)>,
    truth: Vec<PrefList>,
    pub counts: Vec<u64>,
}

impl InvalidityCounter {
    pub fn new(targets: Vec<(usize, usize)>, truth: Vec<PrefList>) -> Self {
        let counts = vec![0; targets.len()];
        InvalidityCounter { targets, truth, counts }
    }

    pub fn observe_lists(&mut self, lists: &[PrefList]) {
        for (i, &(row, target)) in self.targets.iter().enumerate() {
            if !validity(&lists[row], &self.truth[row], target).valid {
                self.counts[i] += 1;
            }
        }
    }

    pub fn observe(&mut self, est: &EstimatorState) {
        let lists = est.estimated_pref_lists();
        self.observe_lists(&lists);
    }
}

/// Per-target invalid-round counts over a sequence of list snapshots.
pub fn invalidity_counter(snapshots: &[Vec<PrefList>], truth: &[PrefList], targets: &[(usize, usize)]) -> Vec<u64> {
    let mut c = InvalidityCounter::new(targets.to_vec(), truth.to_vec());
    for s in snapshots {
        c.observe_lists(s);
    }
    c.counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardKind;

    #[test]
    fn never_matched_regret() {
        let mut s = RegretSeries::new(vec![0.9], vec![0.9]);
        for _ in 0..10 {
            s.update(&[0.0]);
        }
        assert!((s.opt[0] - 9.0).abs() < 1e-12);
        assert_eq!(s.rounds, 10);
    }

    #[test]
    fn pessimal_increment_can_be_negative() {
        let mut s = RegretSeries::new(vec![0.9], vec![0.5]);
        s.update(&[0.9]);
        assert!(s.pess[0] < 0.0);
        assert_eq!(s.opt[0], 0.0);
    }

    #[test]
    fn gaps() {
        let mk = Market::new(vec![vec![0.9, 0.5]], vec![vec![0.4], vec![0.6]], RewardKind::Bernoulli).unwrap();
        let b = StableBaselines::new(&mk).unwrap();
        let g = gap_table(&mk, &b);
        assert!((g.agent_opt[0][1] - 0.4).abs() < 1e-12);
        assert_eq!(g.agent_opt[0][0], 0.0);
        assert_eq!(g.firm_opt[1], None);
        assert!((g.agent_min[0].unwrap() - 0.4).abs() < 1e-12);
    }

    fn mt(v: &[Option<usize>]) -> Matching {
        Matching::from_agent_partners(v.to_vec(), 3).unwrap()
    }

    #[test]
    fn convergence_examples() {
        let a = mt(&[Some(0), Some(1)]);
        let b = mt(&[Some(1), Some(0)]);
        let u = mt(&[Some(1), None]);
        assert_eq!(convergence_round(&[a.clone(), a.clone(), a.clone()]), Some(1));
        assert_eq!(convergence_round(&[a.clone(), a.clone(), u.clone()]), None);
        assert_eq!(convergence_round(&[a.clone(), b.clone(), b.clone()]), Some(2));
        assert_eq!(convergence_round(&[b.clone(), u, b.clone(), b]), Some(3));
    }

    #[test]
    fn plateau_examples() {
        let flat: Vec<f64> = (1..=100).map(|t| (t.min(10)) as f64).collect();
        assert_eq!(plateau_ratio(&flat, 10, 100).unwrap().ratio, 1.0);
        let lin: Vec<f64> = (1..=100).map(|t| t as f64).collect();
        let p = plateau_ratio(&lin, 10, 100).unwrap();
        assert!((p.ratio - 10.0).abs() < 1e-12);
        assert!(!p.within(1.1));
        let zero = vec![0.0; 100];
        let z = plateau_ratio(&zero, 10, 100).unwrap();
        assert!(z.zero_denominator && z.ratio == 1.0 && z.within(1.1));
        assert!(plateau_ratio(&lin, 50, 10).is_err());
        assert!(plateau_ratio(&lin, 10, 200).is_err());
    }

    #[test]
    fn negative_plateau_is_growth_based() {
        assert!(plateau_from_values(-5.0, -50.0).within(1.15));
        assert!(!plateau_from_values(-5.0, 0.0).within(1.15));
        assert!(plateau_from_values(10.0, 11.0).within(1.15));
    }

    #[test]
    fn invalidity_examples() {
        let truth = vec![PrefList::new(vec![0, 1, 2], 3).unwrap()];
        let swapped = vec![PrefList::new(vec![1, 0, 2], 3).unwrap()];
        let snaps = vec![swapped.clone(); 5];
        assert_eq!(invalidity_counter(&snaps, &truth, &[(0, 0), (0, 2)]), vec![5, 0]);
        assert_eq!(invalidity_counter(&[truth.clone()], &truth, &[(0, 0)]), vec![0]);
    }
}
