//! `key=value` run configuration.
//!
//! ```text
//! field.p = 2
//! field.k = 1
//! field.d_h = 1
//! module.m0 = 1
//! module.unit_u = 1            # pi-digits separated by ';', each a list of residue coordinates
//! module.rho_pi[0][1] = 1      # coefficient of tau^0 pi^1
//! module.rho_pi[1][0] = 1
//! prec.pi = 32
//! prec.tau = 8
//! run.levels = 1,2,3
//! run.seed = 0
//! run.samples = 50
//! run.exploratory_m = 4,5,6
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::drinfeld::DrinfeldModule;
use crate::residue::{Fe, LaurentNum, LocalField};
use crate::twisted::TwistedSeries;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Schema(Vec<String>),
    #[error("invalid module: {0}")]
    InvalidModule(#[from] crate::Error),
    #[error("unknown suite `{0}`")]
    UnknownSuite(String),
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Residue-field element given by its coordinates over `F_p` in the polynomial basis.
pub type Coords = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunConfig {
    pub p: u32,
    pub k: u32,
    pub d_h: u32,
    pub m0: u32,
    /// `pi`-digits of `u` in `eta = u pi^{m_0}`.
    pub unit_u: Vec<Coords>,
    /// `(tau power, pi power) -> residue coordinates`.
    pub rho_pi: BTreeMap<(usize, usize), Coords>,
    pub pi_prec: i64,
    pub tau_trunc: usize,
    pub levels: Vec<u32>,
    pub seed: u64,
    pub samples: usize,
    pub exploratory_m: Vec<u32>,
}

const KEYS: [&str; 11] = [
    "field.p",
    "field.k",
    "field.d_h",
    "module.m0",
    "module.unit_u",
    "prec.pi",
    "prec.tau",
    "run.levels",
    "run.seed",
    "run.samples",
    "run.exploratory_m",
];

/// Least `prec.pi` the suites are written for.
pub const MIN_PI_PREC: i64 = 16;

fn parse_rho_key(key: &str) -> Option<(usize, usize)> {
    let rest = key.strip_prefix("module.rho_pi[")?;
    let (i, rest) = rest.split_once("][")?;
    let j = rest.strip_suffix(']')?;
    Some((i.trim().parse().ok()?, j.trim().parse().ok()?))
}

fn parse_coords(text: &str) -> Result<Coords, String> {
    text.split(',').map(|c| c.trim().parse::<u32>().map_err(|e| format!("`{c}`: {e}"))).collect()
}

fn parse_list<T: std::str::FromStr>(text: &str) -> Result<Vec<T>, String>
where
    T::Err: std::fmt::Display,
{
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    text.split(',').map(|c| c.trim().parse::<T>().map_err(|e| format!("`{}`: {e}", c.trim()))).collect()
}

fn join<T: ToString>(xs: &[T]) -> String {
    xs.iter().map(T::to_string).collect::<Vec<_>>().join(",")
}

impl RunConfig {
    /// Carlitz module over `F_q((pi))` for prime `q`; the exploratory prime-case levels
    /// are only listed for `q = 2`, where they stay small.
    pub fn carlitz(q: u32) -> Self {
        let mut rho_pi = BTreeMap::new();
        rho_pi.insert((0, 1), vec![1]);
        rho_pi.insert((1, 0), vec![1]);
        RunConfig {
            p: q,
            k: 1,
            d_h: 1,
            m0: 1,
            unit_u: vec![vec![1]],
            rho_pi,
            pi_prec: 32,
            tau_trunc: 8,
            levels: vec![1, 2, 3],
            seed: 0,
            samples: 50,
            exploratory_m: if q == 2 { vec![4, 5, 6] } else { Vec::new() },
        }
    }

    /// `rho_pi = pi + (1 + pi) tau` over `F_2((pi))`.
    pub fn variant() -> Self {
        let mut cfg = Self::carlitz(2);
        cfg.rho_pi.insert((1, 1), vec![1]);
        cfg.levels = vec![1, 2];
        cfg
    }

    pub fn q(&self) -> u32 {
        self.p.pow(self.k)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::parse(&text)
    }

    /// Parses and validates; every violation found is reported.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut errors = Vec::new();
        let mut values: BTreeMap<String, String> = BTreeMap::new();
        let mut rho_pi = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                errors.push(format!("line {}: expected key = value", lineno + 1));
                continue;
            };
            let (key, value) = (key.trim(), value.trim());
            if key.starts_with("module.rho_pi") {
                match parse_rho_key(key) {
                    Some(ij) => match parse_coords(value) {
                        Ok(c) => {
                            if rho_pi.insert(ij, c).is_some() {
                                errors.push(format!("line {}: duplicate key {key}", lineno + 1));
                            }
                        }
                        Err(e) => errors.push(format!("line {}: {key}: {e}", lineno + 1)),
                    },
                    None => errors.push(format!("line {}: malformed key {key}, expected module.rho_pi[i][j]", lineno + 1)),
                }
            } else if KEYS.contains(&key) {
                if values.insert(key.to_string(), value.to_string()).is_some() {
                    errors.push(format!("line {}: duplicate key {key}", lineno + 1));
                }
            } else {
                errors.push(format!("line {}: unknown key {key}", lineno + 1));
            }
        }

        let mut cfg = Self::carlitz(2);
        cfg.rho_pi = rho_pi;
        cfg.exploratory_m = Vec::new();
        let mut take = |key: &str, required: bool, errors: &mut Vec<String>| -> Option<String> {
            let v = values.remove(key);
            if v.is_none() && required {
                errors.push(format!("missing key {key}"));
            }
            v
        };
        macro_rules! scalar {
            ($key:expr, $slot:expr, $required:expr) => {
                if let Some(v) = take($key, $required, &mut errors) {
                    match v.parse() {
                        Ok(x) => $slot = x,
                        Err(e) => errors.push(format!("{}: `{v}`: {e}", $key)),
                    }
                }
            };
        }
        macro_rules! list {
            ($key:expr, $slot:expr) => {
                if let Some(v) = take($key, false, &mut errors) {
                    match parse_list(&v) {
                        Ok(x) => $slot = x,
                        Err(e) => errors.push(format!("{}: {e}", $key)),
                    }
                }
            };
        }
        scalar!("field.p", cfg.p, true);
        scalar!("field.k", cfg.k, true);
        scalar!("field.d_h", cfg.d_h, true);
        scalar!("module.m0", cfg.m0, true);
        scalar!("prec.pi", cfg.pi_prec, false);
        scalar!("prec.tau", cfg.tau_trunc, false);
        scalar!("run.seed", cfg.seed, false);
        scalar!("run.samples", cfg.samples, false);
        list!("run.levels", cfg.levels);
        list!("run.exploratory_m", cfg.exploratory_m);
        if let Some(v) = take("module.unit_u", false, &mut errors) {
            match v.split(';').map(parse_coords).collect::<Result<Vec<_>, _>>() {
                Ok(digits) => cfg.unit_u = digits,
                Err(e) => errors.push(format!("module.unit_u: {e}")),
            }
        }
        if cfg.rho_pi.is_empty() {
            errors.push("missing rho_pi: no module.rho_pi[i][j] entries".into());
        }
        errors.extend(cfg.violations());
        if !errors.is_empty() {
            return Err(ConfigError::Schema(errors));
        }
        cfg.module(cfg.pi_prec)?;
        Ok(cfg)
    }

    /// Schema violations other than parse errors.
    pub fn violations(&self) -> Vec<String> {
        let mut errors = Vec::new();
        if self.k == 0 || self.d_h == 0 || self.m0 == 0 {
            errors.push("field.k, field.d_h and module.m0 must be positive".into());
        } else if !self.d_h.is_multiple_of(self.m0) {
            errors.push(format!("module.m0 = {} does not divide field.d_h = {}", self.m0, self.d_h));
        }
        if let Err(e) = crate::FieldSpec::new(self.p, self.k.max(1), self.d_h.max(1)) {
            errors.push(format!("field: {e}"));
        }
        let width = (self.k * self.d_h) as usize;
        let check = |what: String, c: &Coords, errors: &mut Vec<String>| {
            if c.len() > width {
                errors.push(format!("{what}: {} coordinates, at most {width} allowed", c.len()));
            }
            if let Some(bad) = c.iter().find(|&&x| x >= self.p) {
                errors.push(format!("{what}: coordinate {bad} is not below p = {}", self.p));
            }
        };
        for ((i, j), c) in &self.rho_pi {
            check(format!("module.rho_pi[{i}][{j}]"), c, &mut errors);
        }
        for (i, c) in self.unit_u.iter().enumerate() {
            check(format!("module.unit_u digit {i}"), c, &mut errors);
        }
        if self.pi_prec < MIN_PI_PREC {
            errors.push(format!("prec.pi = {} is below the floor {MIN_PI_PREC}", self.pi_prec));
        }
        if self.tau_trunc == 0 {
            errors.push("prec.tau must be positive".into());
        }
        if self.levels.is_empty() || self.levels.contains(&0) {
            errors.push("run.levels must list positive levels".into());
        }
        if self.samples == 0 {
            errors.push("run.samples must be positive".into());
        }
        errors
    }

    fn residue(&self, field: &LocalField, c: &Coords) -> Fe {
        let code = c.iter().rev().fold(0u32, |acc, &x| acc * self.p + x);
        field.residue().from_code(code).expect("coordinates checked against the field")
    }

    /// The field `H` with precision cap `cap`.
    pub fn field(&self, cap: i64) -> Result<Arc<LocalField>, ConfigError> {
        LocalField::new(self.p, self.k, self.d_h, cap).map_err(|e| ConfigError::InvalidModule(e.into()))
    }

    /// The module at precision cap `cap`.
    pub fn module(&self, cap: i64) -> Result<DrinfeldModule, ConfigError> {
        let field = self.field(cap)?;
        let degree = self.rho_pi.keys().map(|(i, _)| *i).max().unwrap_or(0);
        let coeffs = (0..=degree)
            .map(|i| {
                let top = self.rho_pi.range((i, 0)..(i + 1, 0)).map(|((_, j), _)| *j).max();
                let digits: Vec<Fe> = match top {
                    None => Vec::new(),
                    Some(top) => (0..=top)
                        .map(|j| self.rho_pi.get(&(i, j)).map_or(Fe::ZERO, |c| self.residue(&field, c)))
                        .collect(),
                };
                LaurentNum::from_digits(&field, &digits)
            })
            .collect();
        let rho = TwistedSeries::polynomial(&field, coeffs);
        let digits: Vec<Fe> = self.unit_u.iter().map(|c| self.residue(&field, c)).collect();
        let unit_u = LaurentNum::from_digits(&field, &digits);
        Ok(DrinfeldModule::validate(rho, self.m0, unit_u)?)
    }

    /// Canonical text form; `parse(to_text())` returns the same configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "field.p = {}", self.p);
        let _ = writeln!(out, "field.k = {}", self.k);
        let _ = writeln!(out, "field.d_h = {}", self.d_h);
        let _ = writeln!(out, "module.m0 = {}", self.m0);
        let unit: Vec<String> = self.unit_u.iter().map(|c| join(c)).collect();
        let _ = writeln!(out, "module.unit_u = {}", unit.join(";"));
        for ((i, j), c) in &self.rho_pi {
            let _ = writeln!(out, "module.rho_pi[{i}][{j}] = {}", join(c));
        }
        let _ = writeln!(out, "prec.pi = {}", self.pi_prec);
        let _ = writeln!(out, "prec.tau = {}", self.tau_trunc);
        let _ = writeln!(out, "run.levels = {}", join(&self.levels));
        let _ = writeln!(out, "run.seed = {}", self.seed);
        let _ = writeln!(out, "run.samples = {}", self.samples);
        let _ = writeln!(out, "run.exploratory_m = {}", join(&self.exploratory_m));
        out
    }

    /// SHA-256 of the canonical text, in hex.
    pub fn digest(&self) -> String {
        Sha256::digest(self.to_text().as_bytes()).iter().map(|b| format!("{b:02x}")).collect()
    }
}
