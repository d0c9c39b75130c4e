//! Replicated runs, aggregation and artifact files.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use super::config::ExperimentConfig;
use super::simulate::{simulate_hinted, simulate_market_with, HintedRecord, InvariantTally, MatchingRun};
use crate::agents::drr_phase_len;
use crate::engine::RoundOutcome;
use crate::error::{Error, Result};
use crate::market::{enumerate_stable_matchings, is_stable, Market, Matching, StableBaselines};
use crate::metrics::{plateau_from_values, Plateau};

pub const TOOL_NAME: &str = env!("CARGO_PKG_NAME");
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq)]
pub enum ReplicationBody {
    Matching(MatchingRun),
    Hinted(HintedRecord),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReplicationResult {
    pub index: usize,
    pub seed: u64,
    pub body: ReplicationBody,
}

impl ReplicationResult {
    pub fn matching(&self) -> Option<&MatchingRun> {
        match &self.body {
            ReplicationBody::Matching(r) => Some(r),
            ReplicationBody::Hinted(_) => None,
        }
    }

    pub fn hinted(&self) -> Option<&HintedRecord> {
        match &self.body {
            ReplicationBody::Hinted(h) => Some(h),
            ReplicationBody::Matching(_) => None,
        }
    }
}

fn join_1based(v: &[usize]) -> String {
    v.iter().map(|f| (f + 1).to_string()).collect::<Vec<_>>().join(";")
}

struct RoundLog {
    agents: csv::Writer<fs::File>,
    firms: csv::Writer<fs::File>,
}

impl RoundLog {
    fn create(dir: &Path, index: usize) -> Result<Self> {
        let open = |name: String| -> Result<csv::Writer<fs::File>> {
            let p = dir.join(name);
            Ok(csv::Writer::from_writer(fs::File::create(&p).map_err(|e| Error::io(&p, e))?))
        };
        let mut agents = open(format!("rep_{index:04}_agents.csv"))?;
        let mut firms = open(format!("rep_{index:04}_firms.csv"))?;
        agents.write_record(["t", "agent", "interviews", "applications", "partner", "reward", "expected_reward"])?;
        firms.write_record(["t", "firm", "gamma", "hired", "vacant", "changed"])?;
        Ok(RoundLog { agents, firms })
    }

    fn write(&mut self, out: &RoundOutcome) -> Result<()> {
        let t = out.t.to_string();
        for a in 0..out.rewards.len() {
            self.agents.write_record([
                t.clone(),
                (a + 1).to_string(),
                join_1based(&out.interviews[a]),
                join_1based(&out.applications[a]),
                out.matching.agent_partner(a).map_or(0, |f| f + 1).to_string(),
                out.rewards[a].to_string(),
                out.expected_rewards[a].to_string(),
            ])?;
        }
        for f in 0..out.gamma.len() {
            self.firms.write_record([
                t.clone(),
                (f + 1).to_string(),
                u8::from(out.gamma[f]).to_string(),
                out.matching.firm_partner(f).map_or(0, |a| a + 1).to_string(),
                u8::from(out.vacant.contains(f)).to_string(),
                u8::from(out.changed.contains(f)).to_string(),
            ])?;
        }
        Ok(())
    }

    fn finish(mut self) -> Result<()> {
        self.agents.flush().map_err(|e| Error::io("round log", e))?;
        self.firms.flush().map_err(|e| Error::io("round log", e))?;
        Ok(())
    }
}

/// Runs replication `index` (seed `base_seed + index`). With `round_dir`, the
/// per-round logs are streamed there.
pub fn run_replication(
    cfg: &ExperimentConfig,
    market: &Market,
    index: usize,
    round_dir: Option<&Path>,
) -> Result<ReplicationResult> {
    let seed = cfg.seed(index);
    let spec = cfg.run_spec(market);
    let wrap = |e: Error| Error::Replication { replication: index, seed, source: Box::new(e) };
    let body = if cfg.algorithm.is_hinted() {
        ReplicationBody::Hinted(simulate_hinted(market, &spec, seed).map_err(wrap)?)
    } else {
        let mut log = match round_dir {
            Some(d) => Some(RoundLog::create(d, index).map_err(wrap)?),
            None => None,
        };
        let mut rec = |out: &RoundOutcome| match log.as_mut() {
            Some(l) => l.write(out),
            None => Ok(()),
        };
        let run = simulate_market_with(market, &spec, seed, &mut rec).map_err(wrap)?;
        if let Some(l) = log {
            l.finish().map_err(wrap)?;
        }
        ReplicationBody::Matching(run)
    };
    Ok(ReplicationResult { index, seed, body })
}

/// All replications in parallel, returned in index order. The first failing
/// replication by index is reported.
pub fn run_replications(cfg: &ExperimentConfig, market: &Market, round_dir: Option<&Path>) -> Result<Vec<ReplicationResult>> {
    let results: Vec<Result<ReplicationResult>> =
        cfg.replication_indices().into_par_iter().map(|i| run_replication(cfg, market, i, round_dir)).collect();
    results.into_iter().collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct MeanSe {
    pub mean: f64,
    pub se: f64,
}

/// Mean and standard error, summed in the given order.
pub fn mean_se(xs: &[f64]) -> MeanSe {
    let k = xs.len() as f64;
    if xs.is_empty() {
        return MeanSe { mean: f64::NAN, se: f64::NAN };
    }
    let mean = xs.iter().sum::<f64>() / k;
    let se = if xs.len() > 1 {
        (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt() / k.sqrt()
    } else {
        0.0
    };
    MeanSe { mean, se }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MarketSummary {
    pub n: usize,
    pub m: usize,
    /// 1-based firm per agent.
    pub agent_optimal: Vec<usize>,
    pub agent_pessimal: Vec<usize>,
    pub unique_stable: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stable_count: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckpointSummary {
    pub t: u64,
    pub opt: Vec<MeanSe>,
    pub pess: Vec<MeanSe>,
    pub exp_opt: Vec<MeanSe>,
    pub exp_pess: Vec<MeanSe>,
}

/// Ratios of replication-mean cumulative regret, per agent.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlateauSummary {
    pub t_early: u64,
    pub t_late: u64,
    pub opt: Vec<Plateau>,
    pub pess: Vec<Plateau>,
    pub exp_opt: Vec<Plateau>,
    pub exp_pess: Vec<Plateau>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceSummary {
    pub converged: usize,
    pub rounds: Vec<Option<u64>>,
    /// Limit matching (1-based firms, `-` separated) to replication count.
    pub limits: BTreeMap<String, usize>,
    pub stable_limits: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PhaseSummary {
    pub phase_len: u64,
    pub per_replication: Vec<usize>,
    /// Replications with an updating phase starting after T/2.
    pub late_start_replications: usize,
    pub imperfect_phases: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HintedSummary {
    /// 1-based arm of the targeted true rank.
    pub target_arm: usize,
    pub checkpoints: Vec<(u64, MeanSe)>,
    pub plateau: Vec<(u64, u64, Plateau)>,
    /// Replications whose most pulled arm in the final quarter is the target.
    pub target_most_pulled: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub algorithm: super::simulate::Algorithm,
    pub horizon: u64,
    pub replications: usize,
    pub seeds: Vec<u64>,
    pub market: MarketSummary,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checkpoints: Vec<CheckpointSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub plateau: Vec<PlateauSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub convergence: Option<ConvergenceSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub invariants: Option<InvariantTally>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub phases: Option<PhaseSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomalies: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hinted: Option<HintedSummary>,
}

fn limit_key(limit: &[usize]) -> String {
    limit.iter().map(|f| (f + 1).to_string()).collect::<Vec<_>>().join("-")
}

fn argmax(counts: &[u64]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

pub fn market_summary(market: &Market) -> Result<MarketSummary> {
    let b = StableBaselines::new(market)?;
    let stable_count = enumerate_stable_matchings(&market.agent_pref_lists(), &market.firm_pref_lists())
        .ok()
        .map(|s| s.matchings.len());
    Ok(MarketSummary {
        n: market.n(),
        m: market.m(),
        agent_optimal: b.agent_best.iter().map(|f| f + 1).collect(),
        agent_pessimal: b.agent_worst.iter().map(|f| f + 1).collect(),
        unique_stable: b.is_unique(),
        stable_count,
    })
}

pub fn summarize(cfg: &ExperimentConfig, market: &Market, results: &[ReplicationResult]) -> Result<Summary> {
    let mut s = Summary {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        config_hash: cfg.hash(),
        algorithm: cfg.algorithm,
        horizon: cfg.horizon,
        replications: results.len(),
        seeds: results.iter().map(|r| r.seed).collect(),
        market: market_summary(market)?,
        checkpoints: Vec::new(),
        plateau: Vec::new(),
        convergence: None,
        invariants: None,
        phases: None,
        anomalies: None,
        hinted: None,
    };
    let pairs = cfg.plateau_pairs();
    if cfg.algorithm.is_hinted() {
        let recs: Vec<&HintedRecord> = results.iter().filter_map(|r| r.hinted()).collect();
        let Some(first) = recs.first() else { return Ok(s) };
        let mean_at = |t: u64| {
            let xs: Vec<f64> =
                recs.iter().map(|h| h.checkpoints.iter().find(|c| c.0 == t).map_or(f64::NAN, |c| c.1)).collect();
            mean_se(&xs)
        };
        s.hinted = Some(HintedSummary {
            target_arm: first.target_arm + 1,
            checkpoints: first.checkpoints.iter().map(|&(t, _)| (t, mean_at(t))).collect(),
            plateau: pairs.iter().map(|&(a, b)| (a, b, plateau_from_values(mean_at(a).mean, mean_at(b).mean))).collect(),
            target_most_pulled: recs.iter().filter(|h| argmax(&h.final_quarter_pulls) == h.target_arm).count(),
        });
        return Ok(s);
    }
    let runs: Vec<&MatchingRun> = results.iter().filter_map(|r| r.matching()).collect();
    let n = market.n();
    let column = |t: u64, pick: &dyn Fn(&super::simulate::Checkpoint) -> &Vec<f64>| -> Vec<MeanSe> {
        (0..n)
            .map(|a| {
                let xs: Vec<f64> = runs.iter().map(|r| r.checkpoint(t).map_or(f64::NAN, |c| pick(c)[a])).collect();
                mean_se(&xs)
            })
            .collect()
    };
    if let Some(first) = runs.first() {
        s.checkpoints = first
            .checkpoints
            .iter()
            .map(|c| CheckpointSummary {
                t: c.t,
                opt: column(c.t, &|c| &c.opt),
                pess: column(c.t, &|c| &c.pess),
                exp_opt: column(c.t, &|c| &c.exp_opt),
                exp_pess: column(c.t, &|c| &c.exp_pess),
            })
            .collect();
    }
    let find = |t: u64| s.checkpoints.iter().find(|c| c.t == t);
    let ratios = |e: &[MeanSe], l: &[MeanSe]| -> Vec<Plateau> {
        e.iter().zip(l).map(|(e, l)| plateau_from_values(e.mean, l.mean)).collect()
    };
    let plateau: Vec<PlateauSummary> = pairs
        .iter()
        .filter_map(|&(a, b)| {
            let (e, l) = (find(a)?, find(b)?);
            Some(PlateauSummary {
                t_early: a,
                t_late: b,
                opt: ratios(&e.opt, &l.opt),
                pess: ratios(&e.pess, &l.pess),
                exp_opt: ratios(&e.exp_opt, &l.exp_opt),
                exp_pess: ratios(&e.exp_pess, &l.exp_pess),
            })
        })
        .collect();
    s.plateau = plateau;

    let (ap, fp) = (market.agent_pref_lists(), market.firm_pref_lists());
    let mut limits = BTreeMap::new();
    let mut stable_limits = 0;
    for r in &runs {
        if let Some(l) = &r.limit {
            *limits.entry(limit_key(l)).or_insert(0) += 1;
            let mt = Matching::from_agent_partners(l.iter().map(|&f| Some(f)).collect(), market.m())?;
            if is_stable(&mt, &ap, &fp) {
                stable_limits += 1;
            }
        }
    }
    s.convergence = Some(ConvergenceSummary {
        converged: runs.iter().filter(|r| r.convergence_round.is_some()).count(),
        rounds: runs.iter().map(|r| r.convergence_round).collect(),
        limits,
        stable_limits,
    });
    let mut tally = InvariantTally::default();
    runs.iter().for_each(|r| tally.merge(&r.tally));
    s.invariants = Some(tally);
    s.anomalies = Some(runs.iter().map(|r| r.anomalies).sum());
    if runs.iter().any(|r| r.phases.is_some()) {
        let half = cfg.horizon / 2;
        s.phases = Some(PhaseSummary {
            phase_len: drr_phase_len(n),
            per_replication: runs.iter().map(|r| r.phases.as_ref().map_or(0, Vec::len)).collect(),
            late_start_replications: runs
                .iter()
                .filter(|r| r.phases.iter().flatten().any(|p| p.t_gs > half))
                .count(),
            imperfect_phases: runs.iter().flat_map(|r| r.phases.iter().flatten()).filter(|p| p.perfect == Some(false)).count(),
        });
    }
    Ok(s)
}

fn series_csv(path: &Path, r: &ReplicationResult, n: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    match &r.body {
        ReplicationBody::Matching(run) => {
            let mut header = vec!["t".to_string()];
            for tag in ["opt", "pess", "exp_opt", "exp_pess"] {
                header.extend((1..=n).map(|a| format!("{tag}_{a}")));
            }
            w.write_record(&header)?;
            for c in &run.checkpoints {
                let mut row = vec![c.t.to_string()];
                for v in [&c.opt, &c.pess, &c.exp_opt, &c.exp_pess] {
                    row.extend(v.iter().map(f64::to_string));
                }
                w.write_record(&row)?;
            }
        }
        ReplicationBody::Hinted(h) => {
            w.write_record(["t", "regret"])?;
            for (t, v) in &h.checkpoints {
                w.write_record([t.to_string(), v.to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn phases_csv(path: &Path, run: &MatchingRun) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["phase", "t_gs", "cause", "committed", "perfect", "committed_in_top_n"])?;
    let opt = |b: Option<bool>| b.map_or(String::new(), |b| u8::from(b).to_string());
    for p in run.phases.iter().flatten() {
        w.write_record([
            p.index.to_string(),
            p.t_gs.to_string(),
            p.cause.label(),
            p.committed.as_deref().map_or(String::new(), join_1based),
            opt(p.perfect),
            opt(p.committed_in_top_n),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub base_seed: u64,
    pub replications: Vec<usize>,
    /// Paths relative to the output directory.
    pub files: Vec<String>,
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    serde_json::to_writer_pretty(&mut f, value)?;
    f.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    Ok(())
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::io(p, e))
}

/// Writes series, phase, summary and manifest files; returns the manifest.
pub fn write_artifacts(
    cfg: &ExperimentConfig,
    market: &Market,
    results: &[ReplicationResult],
    summary: &Summary,
    out: &Path,
) -> Result<Manifest> {
    let series_dir = out.join("series");
    mkdir(&series_dir)?;
    let mut files = Vec::new();
    let rel = |p: &Path| p.strip_prefix(out).unwrap_or(p).display().to_string();
    for r in results {
        let p = series_dir.join(format!("rep_{:04}.csv", r.index));
        series_csv(&p, r, market.n())?;
        files.push(rel(&p));
        if let Some(run) = r.matching().filter(|m| m.phases.is_some()) {
            let dir = out.join("phases");
            mkdir(&dir)?;
            let p = dir.join(format!("rep_{:04}.csv", r.index));
            phases_csv(&p, run)?;
            files.push(rel(&p));
        }
        if cfg.round_log && !cfg.algorithm.is_hinted() {
            for kind in ["agents", "firms"] {
                files.push(format!("rounds/rep_{:04}_{kind}.csv", r.index));
            }
        }
    }
    let summary_path = out.join("summary.json");
    write_json(&summary_path, summary)?;
    files.push("summary.json".to_string());
    let manifest = Manifest {
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        config_hash: cfg.hash(),
        base_seed: cfg.base_seed,
        replications: cfg.replication_indices().collect(),
        files,
    };
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub summary: Summary,
    pub manifest: Manifest,
    pub results: Vec<ReplicationResult>,
}

/// Builds the market, runs every replication and writes all artifacts to `out`.
pub fn run_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<ExperimentReport> {
    let market = cfg.build_market()?;
    mkdir(out)?;
    let round_dir = if cfg.round_log && !cfg.algorithm.is_hinted() {
        let d = out.join("rounds");
        mkdir(&d)?;
        Some(d)
    } else {
        None
    };
    let results = run_replications(cfg, &market, round_dir.as_deref())?;
    let summary = summarize(cfg, &market, &results)?;
    let manifest = write_artifacts(cfg, &market, &results, &summary, out)?;
    Ok(ExperimentReport { out_dir: out.to_path_buf(), summary, manifest, results })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_se_values() {
        let m = mean_se(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.se - 1.0).abs() < 1e-12);
        assert_eq!(mean_se(&[4.0]).se, 0.0);
    }

    #[test]
    fn argmax_prefers_first() {
        assert_eq!(argmax(&[3, 5, 5, 1]), 1);
    }
}
