//! Empirical-mean estimators and list diagnostics.

use crate::error::{Error, Result, Side};
use crate::market::{Market, PrefList};

/// Running sums and counts for one side of the market.
///
/// In oracle mode every query returns the ground truth and records are ignored.
#[derive(Clone, Debug, PartialEq)]
pub struct EstimatorState {
    side: Side,
    rows: usize,
    cols: usize,
    sums: Vec<f64>,
    counts: Vec<u64>,
    oracle: Option<Vec<f64>>,
}

impl EstimatorState {
    pub fn new(side: Side, rows: usize, cols: usize) -> Self {
        EstimatorState { side, rows, cols, sums: vec![0.0; rows * cols], counts: vec![0; rows * cols], oracle: None }
    }

    /// Learned estimator for agents (rows = agents, cols = firms).
    pub fn agents(market: &Market) -> Self {
        Self::new(Side::Agent, market.n(), market.m())
    }

    /// Learned estimator for firms (rows = firms, cols = agents).
    pub fn firms(market: &Market) -> Self {
        Self::new(Side::Firm, market.m(), market.n())
    }

    pub fn oracle(market: &Market, side: Side) -> Self {
        let (mut est, truth) = match side {
            Side::Agent => (Self::agents(market), (0..market.n()).flat_map(|a| market.agent_row(a).to_vec()).collect()),
            Side::Firm => (Self::firms(market), (0..market.m()).flat_map(|f| market.firm_row(f).to_vec()).collect()),
        };
        est.oracle = Some(truth);
        est
    }

    pub fn side(&self) -> Side {
        self.side
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_oracle(&self) -> bool {
        self.oracle.is_some()
    }

    pub fn record(&mut self, row: usize, col: usize, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::Observation { side: self.side, row, col, value });
        }
        if self.oracle.is_none() {
            let i = row * self.cols + col;
            self.sums[i] += value;
            self.counts[i] += 1;
        }
        Ok(())
    }

    pub fn mean(&self, row: usize, col: usize) -> Option<f64> {
        let i = row * self.cols + col;
        if let Some(truth) = &self.oracle {
            return Some(truth[i]);
        }
        (self.counts[i] > 0).then(|| self.sums[i] / self.counts[i] as f64)
    }

    /// Observation count; `u64::MAX` stands for the infinite count of oracle mode.
    pub fn count(&self, row: usize, col: usize) -> u64 {
        if self.oracle.is_some() {
            u64::MAX
        } else {
            self.counts[row * self.cols + col]
        }
    }

    /// Peers by decreasing mean; unobserved peers first; ties by index.
    pub fn estimated_pref_list(&self, row: usize) -> PrefList {
        let scores: Vec<f64> = (0..self.cols).map(|c| self.mean(row, c).unwrap_or(f64::INFINITY)).collect();
        PrefList::from_scores(&scores)
    }

    pub fn estimated_pref_lists(&self) -> Vec<PrefList> {
        (0..self.rows).map(|r| self.estimated_pref_list(r)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ValidityReport {
    pub valid: bool,
    /// Peers above the target in the estimate but below it in truth.
    pub offending: Vec<usize>,
}

pub fn validity(est: &PrefList, truth: &PrefList, target: usize) -> ValidityReport {
    let truth_rank = truth.ranks();
    let t = truth_rank[target];
    let offending: Vec<usize> =
        est.as_slice().iter().copied().take_while(|&p| p != target).filter(|&p| truth_rank[p] > t).collect();
    ValidityReport { valid: offending.is_empty(), offending }
}

/// First `k` entries agree as ordered sequences.
pub fn topk_aligned(est: &PrefList, truth: &PrefList, k: usize) -> Result<bool> {
    if k == 0 || k > truth.len() || est.len() != truth.len() {
        return Err(Error::param("k", format!("need 1 <= k <= {}, got {k}", truth.len())));
    }
    Ok(est.top_k(k) == truth.top_k(k))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reward::RewardKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn pl(v: &[usize]) -> PrefList {
        PrefList::new(v.to_vec(), v.len()).unwrap()
    }

    #[test]
    fn running_mean() {
        let mut e = EstimatorState::new(Side::Agent, 1, 2);
        assert_eq!(e.mean(0, 0), None);
        assert_eq!(e.count(0, 0), 0);
        for v in [1.0, 0.0, 1.0] {
            e.record(0, 0, v).unwrap();
        }
        assert!((e.mean(0, 0).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(e.count(0, 0), 3);
        assert!(matches!(e.record(0, 1, 1.2), Err(Error::Observation { .. })));
    }

    #[test]
    fn bernoulli_mean_converges() {
        let mk = Market::new(vec![vec![0.3]], vec![vec![0.5]], RewardKind::Bernoulli).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut e = EstimatorState::agents(&mk);
        for _ in 0..10_000 {
            e.record(0, 0, mk.sample_reward(Side::Agent, 0, 0, &mut rng)).unwrap();
        }
        assert!((e.mean(0, 0).unwrap() - 0.3).abs() < 0.02);
    }

    #[test]
    fn unobserved_first_then_decreasing() {
        let mut e = EstimatorState::new(Side::Agent, 1, 3);
        e.record(0, 0, 0.4).unwrap();
        e.record(0, 2, 0.9).unwrap();
        assert_eq!(e.estimated_pref_list(0).as_slice(), &[1, 2, 0]);
        let mut t = EstimatorState::new(Side::Agent, 1, 2);
        t.record(0, 0, 0.5).unwrap();
        t.record(0, 1, 0.5).unwrap();
        assert_eq!(t.estimated_pref_list(0).as_slice(), &[0, 1]);
    }

    #[test]
    fn oracle_returns_truth() {
        let mk = Market::new(
            vec![vec![0.2, 0.9, 0.5]],
            vec![vec![0.3], vec![0.1], vec![0.6]],
            RewardKind::Bernoulli,
        )
        .unwrap();
        let mut e = EstimatorState::oracle(&mk, Side::Firm);
        e.record(0, 0, 1.0).unwrap();
        assert_eq!(e.mean(0, 0), Some(0.3));
        assert_eq!(e.estimated_pref_lists(), mk.firm_pref_lists());
        let a = EstimatorState::oracle(&mk, Side::Agent);
        assert_eq!(a.estimated_pref_list(0).as_slice(), &[1, 2, 0]);
    }

    #[test]
    fn validity_examples() {
        let truth = pl(&[0, 1, 2]);
        assert!(validity(&pl(&[1, 0, 2]), &truth, 2).valid);
        let r = validity(&pl(&[2, 0, 1]), &truth, 0);
        assert!(!r.valid);
        assert_eq!(r.offending, vec![2]);
        for t in 0..3 {
            assert!(validity(&truth, &truth, t).valid);
        }
    }

    #[test]
    fn topk_examples() {
        let truth = pl(&[0, 1, 2]);
        let est = pl(&[0, 2, 1]);
        assert!(topk_aligned(&est, &truth, 1).unwrap());
        assert!(!topk_aligned(&est, &truth, 2).unwrap());
        assert!(topk_aligned(&truth, &truth, 3).unwrap());
        assert!(topk_aligned(&truth, &truth, 0).is_err());
    }
}
