//! Small named markets given by ordinal preference tables.

use crate::error::{Error, Result};
use crate::market::Market;
use crate::reward::RewardKind;

pub const EXAMPLE_NAMES: [&str; 6] = ["introstrategic", "coordfgs", "ucb3x3", "drrs4", "k3", "multappl"];

/// Lists are 1-based, best first: agents rank firms, firms rank agents.
struct Table {
    agents: &'static [&'static [usize]],
    firms: &'static [&'static [usize]],
}

fn table(name: &str) -> Option<Table> {
    Some(match name {
        "introstrategic" => Table { agents: &[&[1, 2], &[1, 2]], firms: &[&[1, 2], &[2, 1]] },
        "coordfgs" => Table {
            agents: &[&[1, 2, 3], &[2, 1, 3], &[1, 3, 2]],
            firms: &[&[1, 2, 3], &[1, 2, 3], &[1, 2, 3]],
        },
        "ucb3x3" => Table {
            agents: &[&[1, 2, 3], &[2, 1, 3], &[3, 1, 2]],
            firms: &[&[2, 3, 1], &[1, 2, 3], &[3, 1, 2]],
        },
        "drrs4" => Table {
            agents: &[&[1, 2, 3], &[2, 3, 1], &[3, 2, 1]],
            firms: &[&[2, 3, 1], &[3, 1, 2], &[1, 2, 3]],
        },
        "k3" | "multappl" => Table { agents: &[&[1, 2], &[2, 1]], firms: &[&[2, 1], &[1, 2]] },
        _ => return None,
    })
}

/// Means evenly spaced on [0.1, 0.9] by rank.
fn row_from_order(order: &[usize]) -> Vec<f64> {
    let len = order.len();
    let mut row = vec![0.0; len];
    for (rank, &peer) in order.iter().enumerate() {
        row[peer - 1] = if len == 1 { 0.9 } else { 0.1 + 0.8 * (len - 1 - rank) as f64 / (len - 1) as f64 };
    }
    row
}

pub fn named_example(name: &str, reward: RewardKind) -> Result<Market> {
    let t = table(name).ok_or_else(|| Error::UnknownExample { name: name.to_string(), known: EXAMPLE_NAMES.join(", ") })?;
    Market::new(
        t.agents.iter().map(|o| row_from_order(o)).collect(),
        t.firms.iter().map(|o| row_from_order(o)).collect(),
        reward,
    )
}
