use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use match_bandits::harness::{
    load_config, market_summary, named_example, resolve_output_dir, run_experiment, EXAMPLE_NAMES, OUTPUT_ENV,
};
use match_bandits::market::{enumerate_stable_matchings, gale_shapley, Market, Matching};
use match_bandits::reward::RewardKind;
use match_bandits::{Result, Side};

#[derive(Parser)]
#[command(name = "match-bandits", version, about = "Bandit learning of stable matchings with interviews")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory; overrides the config and MATCH_BANDITS_OUT.
        #[arg(long, short)]
        out: Option<PathBuf>,
        /// Run only this replication index (seed base_seed + index).
        #[arg(long)]
        replication: Option<usize>,
    },
    /// Parse and check a config without running it.
    Validate { config: PathBuf },
    /// List the built-in example markets.
    Examples,
    /// Print the stable matchings of a market.
    Stable {
        /// JSON market file.
        market: Option<PathBuf>,
        /// Use a built-in example instead of a file.
        #[arg(long, conflicts_with = "market")]
        example: Option<String>,
    },
}

fn fmt_matching(mt: &Matching) -> String {
    mt.pairs().map(|(a, f)| format!("(a{}, f{})", a + 1, f + 1)).collect::<Vec<_>>().join(" ")
}

fn stable(market: &Market) -> Result<()> {
    let (ap, fp) = (market.agent_pref_lists(), market.firm_pref_lists());
    println!("market: {} agents, {} firms", market.n(), market.m());
    println!("agent-optimal:  {}", fmt_matching(&gale_shapley(&ap, &fp, Side::Agent)?));
    println!("agent-pessimal: {}", fmt_matching(&gale_shapley(&ap, &fp, Side::Firm)?));
    match enumerate_stable_matchings(&ap, &fp) {
        Ok(set) => {
            println!("stable matchings: {}", set.matchings.len());
            for mt in &set.matchings {
                println!("  {}", fmt_matching(mt));
            }
        }
        Err(e) => println!("enumeration skipped: {e}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, out, replication } => {
            let mut cfg = load_config(&config)?;
            if let Some(i) = replication {
                cfg.first_replication = i;
                cfg.replications = 1;
            }
            let env = std::env::var(OUTPUT_ENV).ok();
            let dir = resolve_output_dir(out.as_deref(), &cfg, env.as_deref());
            let report = run_experiment(&cfg, &dir)?;
            println!("wrote {} files to {}", report.manifest.files.len() + 1, dir.display());
            if let Some(c) = &report.summary.convergence {
                println!("converged {}/{}", c.converged, report.summary.replications);
            }
            for p in &report.summary.plateau {
                let r: Vec<String> = p.exp_opt.iter().map(|x| format!("{:.3}", x.ratio)).collect();
                println!("expected optimal regret ratio {}..{}: {}", p.t_early, p.t_late, r.join(" "));
            }
            if let Some(h) = &report.summary.hinted {
                for (a, b, p) in &h.plateau {
                    println!("hinted regret ratio {a}..{b}: {:.3}", p.ratio);
                }
            }
        }
        Command::Validate { config } => {
            let cfg = load_config(&config)?;
            let market = cfg.build_market()?;
            let ms = market_summary(&market)?;
            println!("ok: {:?} on {}x{} market, config hash {}", cfg.algorithm, ms.n, ms.m, cfg.hash());
        }
        Command::Examples => {
            for name in EXAMPLE_NAMES {
                let ms = market_summary(&named_example(name, RewardKind::Bernoulli)?)?;
                let count = ms.stable_count.map_or("?".to_string(), |c| c.to_string());
                println!("{name:<16}{}x{}  stable matchings: {count}", ms.n, ms.m);
            }
        }
        Command::Stable { market, example } => {
            let mk = match (market, example) {
                (_, Some(name)) => named_example(&name, RewardKind::Bernoulli)?,
                (Some(p), None) => Market::load_json(p)?,
                (None, None) => {
                    eprintln!("give a market file or --example");
                    std::process::exit(2);
                }
            };
            stable(&mk)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
