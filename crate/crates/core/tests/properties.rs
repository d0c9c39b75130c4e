use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use match_bandits::engine::compute_feedback;
use match_bandits::estimation::EstimatorState;
use match_bandits::firm::FirmMode;
use match_bandits::harness::{simulate_market, Algorithm, RunSpec};
use match_bandits::hinted::{rank_arms, ArmStats};
use match_bandits::market::{
    alpha_reducibility, enumerate_stable_matchings, gale_shapley, generate_alpha_reducible, generate_market,
    is_stable, Market, MarketParams, Matching, PrefList, StableBaselines,
};
use match_bandits::metrics::{convergence_round, plateau_from_values, RegretSeries};
use match_bandits::reward::{bernoulli_max_expectation, expected_max, RewardDist, RewardKind};
use match_bandits::Side;

fn perm(len: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..len).collect::<Vec<_>>()).prop_shuffle()
}

fn prefs(rows: usize, len: usize) -> impl Strategy<Value = Vec<PrefList>> {
    prop::collection::vec(perm(len), rows)
        .prop_map(move |v| v.into_iter().map(|o| PrefList::new(o, len).unwrap()).collect())
}

fn instance() -> impl Strategy<Value = (Vec<PrefList>, Vec<PrefList>)> {
    (1usize..=4)
        .prop_flat_map(|n| (Just(n), n..=5))
        .prop_flat_map(|(n, m)| (prefs(n, m), prefs(m, n)))
}

/// Every injection of agents into firms, filtered by stability.
fn brute_force_stable(ap: &[PrefList], fp: &[PrefList]) -> Vec<Vec<usize>> {
    fn rec(a: usize, cur: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>, ap: &[PrefList], fp: &[PrefList]) {
        if a == ap.len() {
            let mt = Matching::from_agent_partners(cur.iter().map(|&f| Some(f)).collect(), fp.len()).unwrap();
            if is_stable(&mt, ap, fp) {
                out.push(cur.clone());
            }
            return;
        }
        for f in 0..fp.len() {
            if !used[f] {
                used[f] = true;
                cur.push(f);
                rec(a + 1, cur, used, out, ap, fp);
                cur.pop();
                used[f] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(0, &mut Vec::new(), &mut vec![false; fp.len()], &mut out, ap, fp);
    out
}

fn partners(mt: &Matching) -> Vec<usize> {
    mt.agent_partners().iter().map(|f| f.unwrap()).collect()
}

fn random_market(n: usize, m: usize, seed: u64) -> Market {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    generate_market(&MarketParams { n, m, min_gap: 0.05, reward: RewardKind::Bernoulli }, &mut rng).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn enumeration_matches_brute_force((ap, fp) in instance()) {
        let set = enumerate_stable_matchings(&ap, &fp).unwrap();
        let mut got: Vec<Vec<usize>> = set.matchings.iter().map(partners).collect();
        let mut want = brute_force_stable(&ap, &fp);
        got.sort();
        want.sort();
        prop_assert_eq!(got, want);
    }

    #[test]
    fn deferred_acceptance_gives_lattice_extremes((ap, fp) in instance()) {
        let set = enumerate_stable_matchings(&ap, &fp).unwrap();
        let best = gale_shapley(&ap, &fp, Side::Agent).unwrap();
        let worst = gale_shapley(&ap, &fp, Side::Firm).unwrap();
        prop_assert!(is_stable(&best, &ap, &fp));
        prop_assert!(is_stable(&worst, &ap, &fp));
        prop_assert_eq!(partners(&best), set.agent_best);
        prop_assert_eq!(partners(&worst), set.agent_worst);
    }

    #[test]
    fn fixed_pair_sequence_is_the_unique_stable_matching((ap, fp) in instance()) {
        if let Some(seq) = alpha_reducibility(&ap, &fp) {
            let set = enumerate_stable_matchings(&ap, &fp).unwrap();
            prop_assert_eq!(set.matchings.len(), 1);
            let mut from_seq = vec![0; ap.len()];
            seq.iter().for_each(|&(a, f)| from_seq[a] = f);
            prop_assert_eq!(partners(&set.matchings[0]), from_seq);
        }
    }

    #[test]
    fn generated_alpha_markets_are_reducible(n in 1usize..=4, extra in 0usize..=2, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mk = generate_alpha_reducible(&MarketParams { n, m: n + extra, min_gap: 0.1, reward: RewardKind::Bernoulli }, &mut rng).unwrap();
        let seq = alpha_reducibility(&mk.agent_pref_lists(), &mk.firm_pref_lists());
        prop_assert_eq!(seq, Some((0..n).map(|i| (i, i)).collect::<Vec<_>>()));
    }

    #[test]
    fn feedback_sets(n in 1usize..=4, extra in 0usize..=3, a in any::<u64>(), b in any::<u64>()) {
        let m = n + extra;
        let pick = |seed: u64| {
            let mut partners: Vec<Option<usize>> = (0..n).map(|i| Some(i)).collect();
            let mut s = seed;
            for p in partners.iter_mut() {
                if s % 3 == 0 { *p = None; }
                s /= 3;
            }
            let mut firms: Vec<usize> = (0..m).collect();
            firms.rotate_left((seed % m as u64) as usize);
            let v = partners.into_iter().map(|p| p.map(|i| firms[i])).collect();
            Matching::from_agent_partners(v, m).unwrap()
        };
        let (cur, prev) = (pick(a), pick(b));
        let (vacant, changed) = compute_feedback(&cur, &prev);
        prop_assert!(vacant.is_subset(&changed));
        prop_assert!(vacant.len() >= m - n);
    }

    #[test]
    fn estimated_lists_are_permutations(cols in 1usize..6, obs in prop::collection::vec((0usize..6, 0.0f64..=1.0), 0..20)) {
        let mut e = EstimatorState::new(Side::Agent, 1, cols);
        for (c, x) in obs {
            if c < cols { e.record(0, c, x).unwrap(); }
        }
        let l = e.estimated_pref_list(0);
        let mut sorted = l.as_slice().to_vec();
        sorted.sort();
        prop_assert_eq!(sorted, (0..cols).collect::<Vec<_>>());
        let unseen = (0..cols).filter(|&c| e.count(0, c) == 0).count();
        prop_assert!(l.as_slice()[..unseen].iter().all(|&c| e.count(0, c) == 0));
        for w in l.as_slice()[unseen..].windows(2) {
            prop_assert!(e.mean(0, w[0]).unwrap() >= e.mean(0, w[1]).unwrap());
        }
    }

    #[test]
    fn regret_decomposition(rewards in prop::collection::vec(0.0f64..=1.0, 1..100), hi in 0.5f64..1.0, lo in 0.0f64..0.5) {
        let mut s = RegretSeries::new(vec![hi], vec![lo]);
        for (t, &x) in rewards.iter().enumerate() {
            s.update(&[x]);
            let want = (t + 1) as f64 * (hi - lo);
            prop_assert!((s.opt[0] - s.pess[0] - want).abs() < 1e-9);
            prop_assert!(s.opt[0] >= s.pess[0]);
        }
    }

    #[test]
    fn bernoulli_max_bounds(p in 0.0f64..=1.0, q in 0.0f64..=1.0) {
        let e = bernoulli_max_expectation(p, q);
        prop_assert!(e >= p.max(q) - 1e-12 && e <= 1.0 + 1e-12);
        prop_assert!((e - bernoulli_max_expectation(q, p)).abs() < 1e-12);
        let (x, y) = (RewardDist::new(RewardKind::Bernoulli, p).unwrap(), RewardDist::new(RewardKind::Bernoulli, q).unwrap());
        prop_assert!((expected_max(&x, &y) - e).abs() < 1e-12);
    }

    #[test]
    fn truncated_gaussian_hits_its_mean(u in 0.05f64..0.95, sigma in 0.05f64..0.5) {
        let d = RewardDist::new(RewardKind::Gaussian { sigma }, u).unwrap();
        // E[X] = integral of the survival function over [0, 1]
        let k = 4000;
        let h = 1.0 / k as f64;
        let mean: f64 = (0..k).map(|i| 1.0 - d.cdf((i as f64 + 0.5) * h)).sum::<f64>() * h;
        prop_assert!((mean - u).abs() < 1e-3, "mean {} for target {}", mean, u);
    }

    #[test]
    fn positive_plateau_is_a_ratio_test(early in 0.01f64..100.0, late in 0.0f64..1000.0, tol in 1.0f64..2.0) {
        let p = plateau_from_values(early, late);
        if late / early < tol - 1e-9 {
            prop_assert!(p.within(tol));
        }
        if late / early > tol + 1e-9 {
            prop_assert!(!p.within(tol));
        }
    }

    #[test]
    fn arm_ranking_is_a_permutation(samples in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, 0..5), 2..6)) {
        let arms: Vec<ArmStats> = samples.iter().map(|xs| {
            let mut a = ArmStats::default();
            xs.iter().for_each(|&x| a.record(x));
            a
        }).collect();
        for (a, xs) in arms.iter().zip(&samples) {
            if !xs.is_empty() {
                let k = xs.len() as f64;
                let mean = xs.iter().sum::<f64>() / k;
                let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / k;
                prop_assert!((a.variance().unwrap() - var).abs() < 1e-9);
            }
        }
        let mut order = rank_arms(&arms, 0.1);
        order.sort();
        prop_assert_eq!(order, (0..arms.len()).collect::<Vec<_>>());
    }

    #[test]
    fn convergence_round_matches_definition(log in prop::collection::vec(0usize..3, 1..30)) {
        // 0: unmatched agent, 1 and 2: two distinct perfect matchings
        let mk = |k: usize| match k {
            0 => Matching::from_agent_partners(vec![None, Some(1)], 2).unwrap(),
            1 => Matching::from_agent_partners(vec![Some(0), Some(1)], 2).unwrap(),
            _ => Matching::from_agent_partners(vec![Some(1), Some(0)], 2).unwrap(),
        };
        let ms: Vec<Matching> = log.iter().map(|&k| mk(k)).collect();
        let want = (1..=ms.len()).find(|&t| {
            ms[t - 1].is_perfect() && ms[t - 1..].iter().all(|x| x == &ms[t - 1])
        }).map(|t| t as u64);
        prop_assert_eq!(convergence_round(&ms), want);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn simulated_rounds_keep_protocol_invariants(
        n in 1usize..=3,
        extra in 0usize..=1,
        seed in any::<u64>(),
        alg in prop::sample::select(vec![Algorithm::Cia, Algorithm::Drr, Algorithm::Ancdrr, Algorithm::Eancdrr]),
        certain in any::<bool>(),
    ) {
        let mk = random_market(n, n + extra, seed);
        let mode = if certain { FirmMode::Certain } else { FirmMode::Uncertain };
        let mut spec = RunSpec::new(alg, mode, 300);
        spec.lambda = Some(0.5);
        spec.checkpoints = vec![100, 300];
        let run = simulate_market(&mk, &spec, seed ^ 0x5eed).unwrap();
        let t = &run.tally;
        prop_assert_eq!(t.rounds, 300);
        prop_assert!(t.feedback_ok());
        prop_assert_eq!(t.applied_not_interviewed, 0);
        prop_assert_eq!(t.reward_without_match, 0);
        if certain {
            prop_assert_eq!(t.abstentions, 0);
        }
        if alg == Algorithm::Cia {
            prop_assert_eq!(t.collision_rounds, 0);
        }
        let b = StableBaselines::new(&mk).unwrap();
        for c in &run.checkpoints {
            for a in 0..n {
                let gap = b.opt_means[a] - b.pess_means[a];
                prop_assert!((c.opt[a] - c.pess[a] - c.t as f64 * gap).abs() < 1e-6);
            }
        }
        let again = simulate_market(&mk, &spec, seed ^ 0x5eed).unwrap();
        prop_assert_eq!(run, again);
    }
}
