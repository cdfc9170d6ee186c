//! Seeded random elements for randomized checks.

use std::sync::Arc;

use num_rational::Ratio;
use rand::Rng;

use crate::residue::{Fe, LaurentNum, LocalField};
use crate::tower::{TowerElem, TowerLevel};

/// Number of `pi`-digits drawn for each random coordinate.
pub const SAMPLE_DIGITS: usize = 6;

fn residue_digit<R: Rng>(field: &LocalField, rng: &mut R, nonzero: bool) -> Fe {
    let res = field.residue();
    let lo = u32::from(nonzero);
    res.from_code(rng.gen_range(lo..res.size())).expect("code in range")
}

fn base_digit<R: Rng>(field: &LocalField, rng: &mut R, nonzero: bool) -> Fe {
    let base = field.residue().base_elements();
    let lo = usize::from(nonzero);
    base[rng.gen_range(lo..base.len())]
}

/// A random element of `O_H` with `digits` digits.
pub fn integral<R: Rng>(field: &Arc<LocalField>, rng: &mut R, digits: usize) -> LaurentNum {
    let d: Vec<Fe> = (0..digits).map(|_| residue_digit(field, rng, false)).collect();
    LaurentNum::from_digits(field, &d)
}

/// A random unit of `O_H`.
pub fn unit<R: Rng>(field: &Arc<LocalField>, rng: &mut R, digits: usize) -> LaurentNum {
    let mut d = vec![residue_digit(field, rng, true)];
    d.extend((1..digits).map(|_| residue_digit(field, rng, false)));
    LaurentNum::from_digits(field, &d)
}

/// A random element of `O = F_q[[pi]]`.
pub fn base_integral<R: Rng>(field: &Arc<LocalField>, rng: &mut R, digits: usize) -> LaurentNum {
    let d: Vec<Fe> = (0..digits).map(|_| base_digit(field, rng, false)).collect();
    LaurentNum::from_digits(field, &d)
}

/// A random unit of `O`.
pub fn base_unit<R: Rng>(field: &Arc<LocalField>, rng: &mut R, digits: usize) -> LaurentNum {
    let mut d = vec![base_digit(field, rng, true)];
    d.extend((1..digits).map(|_| base_digit(field, rng, false)));
    LaurentNum::from_digits(field, &d)
}

/// A random unit of the level: unit constant coordinate, integral others.
pub fn level_unit<R: Rng>(level: &Arc<TowerLevel>, rng: &mut R) -> TowerElem {
    let field = level.field();
    let mut coords = vec![unit(field, rng, SAMPLE_DIGITS)];
    coords.extend((1..level.degree()).map(|_| integral(field, rng, SAMPLE_DIGITS)));
    TowerElem::from_coords(level, coords).expect("degree-many coordinates")
}

/// `v_n^k` times a random unit, of valuation exactly `k / e_n`.
pub fn with_valuation<R: Rng>(level: &Arc<TowerLevel>, rng: &mut R, k: i64) -> TowerElem {
    level_unit(level, rng).mul(&TowerElem::v_pow(level, k))
}

/// Least `k` with `k / e_n >= bound`.
pub fn min_exponent(level: &TowerLevel, bound: Ratio<i64>) -> i64 {
    (bound * level.degree() as i64).ceil().to_integer()
}

/// Least `k` with `k / e_n > bound`.
pub fn min_exponent_above(level: &TowerLevel, bound: Ratio<i64>) -> i64 {
    (bound * level.degree() as i64).floor().to_integer() + 1
}
