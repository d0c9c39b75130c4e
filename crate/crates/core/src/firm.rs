//! Firm-side hiring policy with strategic abstention.

use serde::{Deserialize, Serialize};

use crate::market::PrefList;

/// Whether firms know their own preferences.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirmMode {
    Certain,
    #[default]
    Uncertain,
}

/// Rejection clocks of one firm. A value of 0 means "never".
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FirmState {
    /// `r[a]`: last round the firm rejected `a` while hiring someone else.
    pub r: Vec<u64>,
    /// Last round the firm ended vacant.
    pub c: u64,
}

impl FirmState {
    pub fn new(n: usize) -> Self {
        FirmState { r: vec![0; n], c: 0 }
    }

    /// Hiring flag for this round. `pool` holds the applicants; an empty pool reports `true`.
    pub fn decide(&self, mode: FirmMode, pool: &[usize], est: &PrefList) -> bool {
        if mode == FirmMode::Certain || pool.is_empty() {
            return true;
        }
        let Some(top) = est.first_where(|a| pool.contains(&a)) else {
            return true;
        };
        let above = est.as_slice().iter().take_while(|&&a| a != top);
        !above.into_iter().any(|&a| self.r[a] >= 1 && self.r[a] >= self.c)
    }

    /// `hired` is the agent that ended matched to this firm, if any.
    pub fn update(&mut self, t: u64, gamma: bool, pool: &[usize], offered: Option<usize>, hired: Option<usize>) {
        if gamma {
            for &a in pool {
                if Some(a) != offered {
                    self.r[a] = t;
                }
            }
        }
        if hired.is_none() {
            self.c = t;
        }
    }
}
