//! Upward compatibility of `delta` under the embedding `E^1 -> E^2` for the Carlitz module at `q = 2`.

use std::sync::Arc;

use drl_core::reciprocity::{delta, in_different, in_ideal};
use drl_core::{DrinfeldModule, LaurentNum, LocalField, Tower, TowerElem};
use num_rational::Ratio;

fn carlitz_tower() -> Tower {
    let field = LocalField::new(2, 1, 1, 32).unwrap();
    Tower::new(Arc::new(DrinfeldModule::carlitz(&field).unwrap()))
}

/// `delta_2(beta) - eta delta_1(beta)` computed in `E^2`.
fn defect(tower: &Tower, beta: &TowerElem) -> TowerElem {
    let eta = tower.module().eta();
    let up = delta(tower, &tower.embed(beta, 2).unwrap()).unwrap();
    let down = tower.embed(delta(tower, beta).unwrap().representative(), 2).unwrap().scale(&eta);
    up.representative().sub(&down)
}

#[test]
fn prime_breaks_congruence_mod_the_different() {
    let tower = carlitz_tower();
    let lower = tower.level(1).unwrap();
    let upper = tower.level(2).unwrap();
    // v_1 = pi, and g_2 = X^2 + pi X + pi.
    let pi = TowerElem::constant(&lower, LaurentNum::pi_pow(lower.field(), 1));
    assert!(pi.eq_to_prec(&TowerElem::v(&lower)));
    assert_eq!(upper.different_valuation(), Ratio::from_integer(1));

    let d = defect(&tower, &pi);
    assert_eq!(d.valuation().unwrap(), Some(Ratio::new(1, 2)));
    assert!(!in_different(&d).unwrap());
    assert!(in_ideal(&d, upper.different_valuation() - lower.v_valuation()).unwrap());
}

#[test]
fn units_stay_congruent_mod_the_different() {
    let tower = carlitz_tower();
    let lower = tower.level(1).unwrap();
    let field = lower.field().clone();
    for digits in [&[1u16, 1][..], &[1, 0, 1], &[1, 1, 1, 1]] {
        let coeffs: Vec<_> = digits.iter().map(|&d| drl_core::Fe(d)).collect();
        let unit = TowerElem::constant(&lower, LaurentNum::from_digits(&field, &coeffs));
        assert!(in_different(&defect(&tower, &unit)).unwrap(), "unit {unit}");
    }
}
