//! C ABI over the simulator: market handles, stable matchings and config runs.
//!
//! Every function returns an [`MbStatus`]. On failure the message is kept per
//! thread and read with [`mb_last_error_message`]. Strings handed out by this
//! library must be released with [`mb_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use match_bandits::harness::{named_example, run_experiment, run_replications, summarize, ExperimentConfig};
use match_bandits::market::{enumerate_stable_matchings, gale_shapley, Market, MarketFile, Matching};
use match_bandits::reward::RewardKind;
use match_bandits::{Error, Side};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MbStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidMarket = 3,
    InvalidConfig = 4,
    TooLarge = 5,
    OutOfRange = 6,
    Io = 7,
    Internal = 8,
}

/// Opaque market handle.
pub struct MbMarket {
    market: Market,
    stable: Option<Vec<Matching>>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

struct Failure(MbStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::InvalidMarket(_) | Error::DuplicateMeans { .. } | Error::MalformedPrefList(_) | Error::UnknownExample { .. } => {
                MbStatus::InvalidMarket
            }
            Error::Config { .. } | Error::ConfigSyntax { .. } | Error::Parameter { .. } => MbStatus::InvalidConfig,
            Error::TooLarge { .. } => MbStatus::TooLarge,
            Error::Io { .. } => MbStatus::Io,
            Error::Json(_) => MbStatus::InvalidMarket,
            _ => MbStatus::Internal,
        };
        Failure(code, e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> MbStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MbStatus::Ok
        }
        Ok(Err(Failure(code, msg))) => {
            set_error(msg);
            code
        }
        Err(_) => {
            set_error("internal panic");
            MbStatus::Internal
        }
    }
}

fn null() -> Failure {
    Failure(MbStatus::NullPointer, "null pointer argument".into())
}

unsafe fn text<'a>(p: *const c_char) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null());
    }
    CStr::from_ptr(p).to_str().map_err(|_| Failure(MbStatus::InvalidUtf8, "argument is not valid UTF-8".into()))
}

unsafe fn market_ref<'a>(h: *const MbMarket) -> Result<&'a MbMarket, Failure> {
    h.as_ref().ok_or_else(null)
}

unsafe fn hand_out(handle: MbMarket, out: *mut *mut MbMarket) {
    *out = Box::into_raw(Box::new(handle));
}

fn write_partners(mt: &Matching, out: *mut i32, len: usize) -> Result<(), Failure> {
    let partners = mt.agent_partners();
    if out.is_null() {
        return Err(null());
    }
    if len < partners.len() {
        return Err(Failure(MbStatus::OutOfRange, format!("buffer holds {len} entries, need {}", partners.len())));
    }
    for (i, p) in partners.iter().enumerate() {
        // SAFETY: caller guarantees `out` has `len` slots.
        unsafe { *out.add(i) = p.map_or(-1, |f| f as i32) };
    }
    Ok(())
}

/// Message of the last failed call on this thread, or null. Valid until the next call.
#[no_mangle]
pub extern "C" fn mb_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Builds a named example market with Bernoulli rewards.
///
/// # Safety
/// `name` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_market_from_example(name: *const c_char, out: *mut *mut MbMarket) -> MbStatus {
    guard(|| {
        let name = text(name)?;
        if out.is_null() {
            return Err(null());
        }
        let market = named_example(name, RewardKind::Bernoulli)?;
        hand_out(MbMarket { market, stable: None }, out);
        Ok(())
    })
}

/// Parses a market from its JSON description.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a writable pointer.
#[no_mangle]
pub unsafe extern "C" fn mb_market_from_json(json: *const c_char, out: *mut *mut MbMarket) -> MbStatus {
    guard(|| {
        let json = text(json)?;
        if out.is_null() {
            return Err(null());
        }
        let file: MarketFile = serde_json::from_str(json).map_err(Error::from)?;
        let market = Market::from_file(file)?;
        hand_out(MbMarket { market, stable: None }, out);
        Ok(())
    })
}

/// Releases a handle. Null is ignored.
///
/// # Safety
/// `market` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mb_market_free(market: *mut MbMarket) {
    if !market.is_null() {
        drop(Box::from_raw(market));
    }
}

/// Number of agents and firms.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_market_size(market: *const MbMarket, n: *mut usize, m: *mut usize) -> MbStatus {
    guard(|| {
        let h = market_ref(market)?;
        if n.is_null() || m.is_null() {
            return Err(null());
        }
        *n = h.market.n();
        *m = h.market.m();
        Ok(())
    })
}

/// Deferred acceptance on the true preferences. `proposer` 0 = agents, 1 = firms.
/// Writes the 0-based firm of each agent (-1 if unmatched) into `out[0..n]`.
///
/// # Safety
/// `out` must point to `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn mb_market_gale_shapley(market: *const MbMarket, proposer: i32, out: *mut i32, len: usize) -> MbStatus {
    guard(|| {
        let h = market_ref(market)?;
        let side = match proposer {
            0 => Side::Agent,
            1 => Side::Firm,
            p => return Err(Failure(MbStatus::OutOfRange, format!("proposer must be 0 or 1, got {p}"))),
        };
        let mt = gale_shapley(&h.market.agent_pref_lists(), &h.market.firm_pref_lists(), side)?;
        write_partners(&mt, out, len)
    })
}

fn stable_set(h: &mut MbMarket) -> Result<&[Matching], Failure> {
    if h.stable.is_none() {
        let set = enumerate_stable_matchings(&h.market.agent_pref_lists(), &h.market.firm_pref_lists())?;
        h.stable = Some(set.matchings);
    }
    Ok(h.stable.as_deref().unwrap_or_default())
}

/// Number of stable matchings.
///
/// # Safety
/// Pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn mb_market_stable_count(market: *mut MbMarket, count: *mut usize) -> MbStatus {
    guard(|| {
        let h = market.as_mut().ok_or_else(null)?;
        if count.is_null() {
            return Err(null());
        }
        *count = stable_set(h)?.len();
        Ok(())
    })
}

/// Stable matching number `index`, written like [`mb_market_gale_shapley`].
///
/// # Safety
/// `out` must point to `len` writable entries.
#[no_mangle]
pub unsafe extern "C" fn mb_market_stable_get(market: *mut MbMarket, index: usize, out: *mut i32, len: usize) -> MbStatus {
    guard(|| {
        let h = market.as_mut().ok_or_else(null)?;
        let set = stable_set(h)?;
        let mt = set
            .get(index)
            .ok_or_else(|| Failure(MbStatus::OutOfRange, format!("index {index} but only {} stable matchings", set.len())))?;
        write_partners(mt, out, len)
    })
}

/// Runs a TOML experiment config and returns its summary as JSON in `summary_json`.
/// With a non-null `out_dir` all artifacts are written there too; relative
/// market files resolve against the working directory.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string, `out_dir` null or one, and
/// `summary_json` writable. Free the result with [`mb_string_free`].
#[no_mangle]
pub unsafe extern "C" fn mb_run_config(
    config_toml: *const c_char,
    out_dir: *const c_char,
    summary_json: *mut *mut c_char,
) -> MbStatus {
    guard(|| {
        let toml = text(config_toml)?;
        if summary_json.is_null() {
            return Err(null());
        }
        let cfg = ExperimentConfig::from_toml_str(toml, "<ffi>")?;
        let summary = if out_dir.is_null() {
            let market = cfg.build_market()?;
            let results = run_replications(&cfg, &market, None)?;
            summarize(&cfg, &market, &results)?
        } else {
            run_experiment(&cfg, Path::new(text(out_dir)?))?.summary
        };
        let json = serde_json::to_string(&summary).map_err(Error::from)?;
        *summary_json = CString::new(json).map_err(|e| Failure(MbStatus::Internal, e.to_string()))?.into_raw();
        Ok(())
    })
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn mb_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}
