use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Market;
use crate::error::{Error, Result};
use crate::reward::RewardKind;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarketParams {
    pub n: usize,
    pub m: usize,
    pub min_gap: f64,
    #[serde(default)]
    pub reward: RewardKind,
}

impl MarketParams {
    fn check(&self) -> Result<()> {
        if self.n == 0 || self.n > self.m {
            return Err(Error::param("n", format!("need 1 <= n <= m, got n = {}, m = {}", self.n, self.m)));
        }
        if !(self.min_gap.is_finite() && self.min_gap >= 0.0) {
            return Err(Error::param("min_gap", format!("must be a finite non-negative number, got {}", self.min_gap)));
        }
        let span = self.n.max(self.m);
        if span > 1 && self.min_gap * span as f64 >= 1.0 {
            return Err(Error::param(
                "min_gap",
                format!("{} levels with gap {} do not fit in [0, 1]", span, self.min_gap),
            ));
        }
        Ok(())
    }
}

/// `len` values, one per cell of width 1/len, jittered inside the cell so that
/// neighbours stay at least `gap` apart. Returned in decreasing order.
fn grid_levels<R: Rng + ?Sized>(len: usize, gap: f64, rng: &mut R) -> Vec<f64> {
    let w = 1.0 / len as f64;
    let room = (w - gap).max(0.0);
    let mut v: Vec<f64> = (0..len).map(|j| j as f64 * w + room * rng.random::<f64>()).collect();
    v.reverse();
    v
}

fn random_rows<R: Rng + ?Sized>(rows: usize, len: usize, gap: f64, rng: &mut R) -> Vec<Vec<f64>> {
    (0..rows)
        .map(|_| {
            let mut v = grid_levels(len, gap, rng);
            v.shuffle(rng);
            v
        })
        .collect()
}

/// Random market with per-row mean separation of at least `min_gap`.
pub fn generate_market<R: Rng + ?Sized>(params: &MarketParams, rng: &mut R) -> Result<Market> {
    params.check()?;
    let agents = random_rows(params.n, params.m, params.min_gap, rng);
    let firms = random_rows(params.m, params.n, params.min_gap, rng);
    Market::new(agents, firms, params.reward)
}

fn means_from_order<R: Rng + ?Sized>(order: &[usize], gap: f64, rng: &mut R) -> Vec<f64> {
    let levels = grid_levels(order.len(), gap, rng);
    let mut row = vec![0.0; order.len()];
    for (rank, &peer) in order.iter().enumerate() {
        row[peer] = levels[rank];
    }
    row
}

fn order_by_score(scores: impl Iterator<Item = usize>) -> Vec<usize> {
    let s: Vec<usize> = scores.collect();
    let mut o: Vec<usize> = (0..s.len()).collect();
    o.sort_by(|&x, &y| s[y].cmp(&s[x]));
    o
}

/// Random market in which both sides rank by one shared pair score, so the
/// top-scoring pair of any sub-market is a fixed pair. Labels are arranged
/// so that the fixed-pair sequence is (a_i, f_i) for i in 0..n.
pub fn generate_alpha_reducible<R: Rng + ?Sized>(params: &MarketParams, rng: &mut R) -> Result<Market> {
    params.check()?;
    let (n, m, gap) = (params.n, params.m, params.min_gap);
    let mut cells: Vec<usize> = (0..n * m).collect();
    cells.shuffle(rng);
    let score = |a: usize, f: usize| cells[a * m + f];
    let (mut agents_left, mut firms_left) = (vec![true; n], vec![true; m]);
    let (mut p, mut q) = (Vec::with_capacity(n), Vec::with_capacity(m));
    for _ in 0..n {
        let (a, f) = (0..n)
            .filter(|&a| agents_left[a])
            .flat_map(|a| (0..m).filter(|&f| firms_left[f]).map(move |f| (a, f)))
            .max_by_key(|&(a, f)| score(a, f))
            .expect("n <= m");
        agents_left[a] = false;
        firms_left[f] = false;
        p.push(a);
        q.push(f);
    }
    q.extend((0..m).filter(|&f| firms_left[f]));
    let s = |i: usize, j: usize| score(p[i], q[j]);
    let agents = (0..n).map(|i| means_from_order(&order_by_score((0..m).map(|j| s(i, j))), gap, rng)).collect();
    let firms = (0..m).map(|j| means_from_order(&order_by_score((0..n).map(|i| s(i, j))), gap, rng)).collect();
    Market::new(agents, firms, params.reward)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::alpha_reducibility;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(n: usize, m: usize, gap: f64) -> MarketParams {
        MarketParams { n, m, min_gap: gap, reward: RewardKind::Bernoulli }
    }

    fn min_sep(row: &[f64]) -> f64 {
        let mut v = row.to_vec();
        v.sort_by(f64::total_cmp);
        v.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn same_seed_same_market() {
        let p = params(3, 3, 0.2);
        let a = generate_market(&p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = generate_market(&p, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gap_respected() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let mk = generate_market(&params(4, 6, 0.1), &mut rng).unwrap();
            for a in 0..4 {
                assert!(min_sep(mk.agent_row(a)) >= 0.1 - 1e-12);
            }
            for f in 0..6 {
                assert!(min_sep(mk.firm_row(f)) >= 0.1 - 1e-12);
            }
        }
    }

    #[test]
    fn infeasible_gap_is_rejected() {
        let r = generate_market(&params(3, 3, 0.5), &mut ChaCha8Rng::seed_from_u64(0));
        assert!(matches!(r, Err(Error::Parameter { name: "min_gap", .. })));
    }

    #[test]
    fn one_by_one_accepts_any_gap() {
        let mk = generate_market(&params(1, 1, 3.0), &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!((mk.n(), mk.m()), (1, 1));
    }

    #[test]
    fn planted_pairs_are_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let mk = generate_alpha_reducible(&params(2, 2, 0.2), &mut rng).unwrap();
            let seq = alpha_reducibility(&mk.agent_pref_lists(), &mk.firm_pref_lists()).unwrap();
            assert_eq!(seq, vec![(0, 0), (1, 1)]);
        }
    }

    #[test]
    fn every_submarket_has_a_fixed_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (n, m) in [(3, 3), (4, 6), (5, 5)] {
            for _ in 0..50 {
                let mk = generate_alpha_reducible(&params(n, m, 0.0), &mut rng).unwrap();
                let (ap, fp) = (mk.agent_pref_lists(), mk.firm_pref_lists());
                assert!(crate::market::every_submarket_has_fixed_pair(&ap, &fp).unwrap());
                assert_eq!(alpha_reducibility(&ap, &fp).unwrap(), (0..n).map(|i| (i, i)).collect::<Vec<_>>());
            }
        }
    }
}
