//! The Coleman norm operator `N` of a module: `N(f) o rho_eta = prod_{w in W^1} f(X + w)`.
//!
//! For `f = X^j U(X)` with `U` a polynomial unit, `N(X) = r_1` because
//! `prod_w (X + w) = P_(m_0) = r_1 o rho_eta`, and `N(U)` is the polynomial `h` with
//! `h(rho_eta(X)) = prod_w U(X + w)`. The product over the roots of `P_(m_0)` is the norm
//! from `H[X][Y]/(P_(m_0)(Y))` to `H[X]`, taken as a division-free determinant.

use std::collections::HashMap;
use std::sync::Arc;

use crate::drinfeld::DrinfeldModule;
use crate::error::{Error, Result};
use crate::poly::XPoly;
use crate::residue::LaurentNum;
use crate::tower::{SeriesLift, TowerElem};
use crate::twisted::{TailBound, TwistedSeries};

/// `N(X^j U) = r_1(X)^j h(X)`.
#[derive(Clone, Debug)]
pub struct ColemanImage {
    pub shift: i64,
    pub r1: TwistedSeries,
    pub h: XPoly,
}

impl ColemanImage {
    /// Value at a point of positive valuation.
    pub fn eval(&self, x: &TowerElem) -> Result<TowerElem> {
        let hx = x.eval_poly(&self.h);
        if self.shift == 0 {
            return Ok(hx);
        }
        let rx = self.r1.evaluate(x)?;
        let power = rx.pow(self.shift.unsigned_abs());
        if self.shift > 0 {
            Ok(hx.mul(&power))
        } else {
            hx.div(&power)
        }
    }
}

/// Truncation used for `r_1`.
const R1_TERMS: usize = 16;

pub fn coleman_norm(module: &Arc<DrinfeldModule>, f: &SeriesLift) -> Result<ColemanImage> {
    if !module.theorem_condition() {
        return Err(Error::InvalidModule("the Coleman norm needs rho_eta = tau^m0 mod p_H".into()));
    }
    if !f.unit.is_integral() || !f.unit.coeff(0).is_unit() {
        return Err(Error::NotInvertible(format!("{} is not a unit polynomial over O_H", f.unit)));
    }
    let p = module.prepared(module.m0())?.additive.clone();
    let rho_eta = XPoly::from_additive(&*module.rho_eta_pow(1)?)?;
    let g = root_product(&p, &f.unit)?;
    let h = solve_composition(&g, &rho_eta)?;
    let r1 = if f.shift == 0 {
        TwistedSeries::one(module.field())
    } else {
        module.unit_part_r(1, R1_TERMS)?.with_tail(TailBound::Integral)
    };
    Ok(ColemanImage { shift: f.shift, r1, h })
}

/// A polynomial in `Y` of degree below `deg P`, with coefficients in `H[X]`.
type YPoly = Vec<XPoly>;

/// `Y s mod P(Y)` for monic `P`.
fn times_y(s: &YPoly, p: &XPoly) -> YPoly {
    let d = s.len();
    let field = p.field();
    let top = s[d - 1].clone();
    let mut out = Vec::with_capacity(d);
    out.push(XPoly::zero(field));
    out.extend(s[..d - 1].iter().cloned());
    for (i, slot) in out.iter_mut().enumerate() {
        let c = p.coeff(i);
        if !c.is_zero() {
            *slot = slot.sub(&top.scale(&c));
        }
    }
    out
}

/// `prod_{P(w) = 0} U(X + w)` for monic separable `P`.
pub fn root_product(p: &XPoly, u: &XPoly) -> Result<XPoly> {
    let field = p.field().clone();
    let d = p.degree().ok_or_else(|| Error::ConsistencyFailure("empty root set".into()))?;
    if !p.coeff(d).eq_to_prec(&LaurentNum::one(&field)).0 {
        return Err(Error::ConsistencyFailure("root polynomial is not monic".into()));
    }
    let x = XPoly::x(&field);
    // s = (X + Y)^i mod P, a = sum u_i (X + Y)^i.
    let mut s: YPoly = vec![XPoly::zero(&field); d];
    s[0] = XPoly::one(&field);
    let mut a: YPoly = vec![XPoly::zero(&field); d];
    for (i, ui) in u.coeffs().iter().enumerate() {
        if i > 0 {
            let shifted = times_y(&s, p);
            s = s.iter().zip(&shifted).map(|(si, yi)| si.mul(&x).add(yi)).collect();
        }
        for (slot, si) in a.iter_mut().zip(&s) {
            *slot = slot.add(&si.scale(ui));
        }
    }
    // Column j of the multiplication matrix is Y^j a mod P.
    let mut cols = vec![a];
    for _ in 1..d {
        let next = times_y(cols.last().expect("nonempty"), p);
        cols.push(next);
    }
    let matrix: Vec<Vec<XPoly>> = (0..d).map(|r| (0..d).map(|c| cols[c][r].clone()).collect()).collect();
    Ok(determinant_division_free(&matrix))
}

/// Determinant by expansion along rows, memoized on the set of used columns.
fn determinant_division_free(m: &[Vec<XPoly>]) -> XPoly {
    let d = m.len();
    let field = m[0][0].field().clone();
    let mut memo: HashMap<u32, XPoly> = HashMap::new();
    fn go(m: &[Vec<XPoly>], used: u32, memo: &mut HashMap<u32, XPoly>, field: &Arc<crate::LocalField>) -> XPoly {
        let row = used.count_ones() as usize;
        if row == m.len() {
            return XPoly::one(field);
        }
        if let Some(v) = memo.get(&used) {
            return v.clone();
        }
        let mut acc = XPoly::zero(field);
        for c in 0..m.len() {
            if used & (1 << c) != 0 || m[row][c].is_zero() {
                continue;
            }
            let inversions = (used >> (c + 1)).count_ones();
            let minor = go(m, used | (1 << c), memo, field);
            let term = m[row][c].mul(&minor);
            acc = if inversions.is_multiple_of(2) { acc.add(&term) } else { acc.sub(&term) };
        }
        memo.insert(used, acc.clone());
        acc
    }
    assert!(d < 32, "matrix too large for the subset expansion");
    go(m, 0, &mut memo, &field)
}

/// The polynomial `h` with `h(r(X)) = g(X)`, by `r`-adic expansion; `r` needs a unit
/// leading coefficient.
pub fn solve_composition(g: &XPoly, r: &XPoly) -> Result<XPoly> {
    let field = g.field().clone();
    let d = r.degree().ok_or_else(|| Error::NotSolvable("composition with zero".into()))?;
    let lead = r.coeff(d);
    if !lead.is_unit() {
        return Err(Error::NotSolvable(format!("leading coefficient {lead} is not a unit")));
    }
    let lead_inv = lead.inv()?;
    let monic = r.scale(&lead_inv);
    // g = sum c_k monic^k, then h = sum c_k lead^{-k} Y^k.
    let mut rest = g.clone();
    let mut coeffs = Vec::new();
    let mut lead_pow = LaurentNum::one(&field);
    while !rest.is_zero() {
        let (quot, rem) = rest.div_rem_monic(&monic)?;
        if let Some((i, c)) = rem.coeffs().iter().enumerate().skip(1).find(|(_, c)| !c.is_zero()) {
            return Err(Error::NotSolvable(format!("remainder has X^{i} coefficient {c}")));
        }
        coeffs.push(rem.coeff(0).mul(&lead_pow));
        lead_pow = lead_pow.mul(&lead_inv);
        rest = quot;
    }
    Ok(XPoly::new(&field, coeffs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::{Fe, LocalField};
    use crate::tower::Tower;

    fn num(f: &Arc<LocalField>, digits: &[u16]) -> LaurentNum {
        LaurentNum::from_digits(f, &digits.iter().map(|&d| Fe(d)).collect::<Vec<_>>())
    }

    fn carlitz(q: u32) -> Arc<DrinfeldModule> {
        let f = LocalField::new(q, 1, 1, 32).unwrap();
        Arc::new(DrinfeldModule::carlitz(&f).unwrap())
    }

    #[test]
    fn norm_of_x_is_x_for_carlitz() {
        let module = carlitz(2);
        let f = module.field().clone();
        let lift = SeriesLift { shift: 1, unit: XPoly::one(&f) };
        let image = coleman_norm(&module, &lift).unwrap();
        assert!(image.h.eq_to_prec(&XPoly::one(&f)));
        assert_eq!(image.shift, 1);
        // Direct product: (X + 0)(X + pi) = X^2 + pi X = rho_pi(X).
        let p = module.prepared(1).unwrap().additive.clone();
        assert!(root_product(&p, &XPoly::x(&f)).unwrap().eq_to_prec(&p));
    }

    #[test]
    fn norm_of_constant_is_its_q_power() {
        let module = carlitz(3);
        let f = module.field().clone();
        let c = num(&f, &[2, 1]);
        let lift = SeriesLift { shift: 0, unit: XPoly::constant(c.clone()) };
        let image = coleman_norm(&module, &lift).unwrap();
        assert!(image.h.eq_to_prec(&XPoly::constant(c.pow(3).unwrap())));
    }

    #[test]
    fn norm_is_multiplicative() {
        let module = carlitz(2);
        let f = module.field().clone();
        let u1 = XPoly::new(&f, vec![num(&f, &[1, 1]), num(&f, &[0, 1])]);
        let u2 = XPoly::new(&f, vec![num(&f, &[1]), num(&f, &[1]), num(&f, &[1, 0, 1])]);
        let n = |u: &XPoly| coleman_norm(&module, &SeriesLift { shift: 0, unit: u.clone() }).unwrap().h;
        assert!(n(&u1.mul(&u2)).eq_to_prec(&n(&u1).mul(&n(&u2))));
    }

    #[test]
    fn norm_contract_on_the_tower() {
        let f2 = LocalField::new(2, 1, 1, 32).unwrap();
        let variant = TwistedSeries::polynomial(&f2, vec![num(&f2, &[0, 1]), num(&f2, &[1, 1])]);
        let variant = Arc::new(DrinfeldModule::validate(variant, 1, LaurentNum::one(&f2)).unwrap());
        for module in [carlitz(2), carlitz(3), variant] {
            let tower = Tower::new(module.clone());
            let f = module.field().clone();
            let lift = SeriesLift {
                shift: 2,
                unit: XPoly::new(&f, vec![num(&f, &[1, 1]), num(&f, &[1]), num(&f, &[0, 0, 1])]),
            };
            let image = coleman_norm(&module, &lift).unwrap();
            let n = 1;
            let lower = tower.level(n).unwrap();
            let upper = tower.level(n + 1).unwrap();
            let direct = tower.norm_to_level(&lift.eval(&upper), n).unwrap();
            let via = image.eval(&TowerElem::v(&lower)).unwrap();
            assert!(direct.eq_to_prec(&via), "{direct} vs {via}");
        }
    }
}
