//! Configured verification runs: each suite checks one family of identities on random
//! inputs and reports every case.

pub mod config;
pub mod report;
mod suites;

use std::sync::Arc;
use std::time::Instant;

pub use config::{ConfigError, RunConfig};
pub use report::{CaseRecord, SuiteReport};
pub use suites::logexp_cap;

use crate::tower::Tower;

/// The suite registry, in run order.
pub const SUITES: [&str; 11] = [
    "logexp",
    "tower",
    "different",
    "majoration",
    "delta",
    "pairing-bilinear",
    "main-theorem-r",
    "main-theorem-lhs",
    "level-shift",
    "iwasawa",
    "conjugation",
];

fn registered(name: &str) -> Result<&'static str, ConfigError> {
    SUITES.iter().copied().find(|s| *s == name).ok_or_else(|| ConfigError::UnknownSuite(name.to_string()))
}

/// The tower of the configured module at precision `prec.pi`.
pub fn build_tower(cfg: &RunConfig) -> Result<Tower, ConfigError> {
    Ok(Tower::new(Arc::new(cfg.module(cfg.pi_prec)?)))
}

fn run_on(name: &'static str, cfg: &RunConfig, tower: &Tower) -> SuiteReport {
    let start = Instant::now();
    let mut ctx = suites::Ctx::new(cfg, tower, name);
    suites::run(name, &mut ctx);
    SuiteReport {
        suite: name.to_string(),
        config_digest: cfg.digest(),
        cases: ctx.cases,
        wall_ms: start.elapsed().as_millis(),
    }
}

pub fn run_suite(name: &str, cfg: &RunConfig) -> Result<SuiteReport, ConfigError> {
    let name = registered(name)?;
    let tower = build_tower(cfg)?;
    Ok(run_on(name, cfg, &tower))
}

/// Runs the named suites (all of them when `names` is empty) in parallel over one
/// shared tower; reports come back in registry order.
pub fn run_suites(names: &[String], cfg: &RunConfig) -> Result<Vec<SuiteReport>, ConfigError> {
    let mut selected = Vec::new();
    for name in names {
        let name = registered(name)?;
        if !selected.contains(&name) {
            selected.push(name);
        }
    }
    if selected.is_empty() {
        selected = SUITES.to_vec();
    }
    selected.sort_by_key(|name| SUITES.iter().position(|s| s == name));
    let tower = build_tower(cfg)?;
    let reports = std::thread::scope(|scope| {
        let handles: Vec<_> = selected.iter().map(|&name| scope.spawn(|| run_on(name, cfg, &tower))).collect();
        handles.into_iter().map(|h| h.join().expect("suite thread panicked")).collect()
    });
    Ok(reports)
}
