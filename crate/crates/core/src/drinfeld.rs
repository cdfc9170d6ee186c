//! Formal Drinfeld modules `rho` of stable height-one reduction.

use std::fmt;
use std::sync::{Arc, Mutex};

use crate::cache::Memo;
use crate::error::{Error, Result};
use crate::poly::XPoly;
use crate::residue::{Fe, LaurentNum, LocalField};
use crate::twisted::{InvertMode, TailBound, TwistedSeries};

/// Weierstrass data of `rho_{pi^j} = unit * distinguished`.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub unit: TwistedSeries,
    pub distinguished: TwistedSeries,
    /// The distinguished part as an additive `X`-polynomial of degree `q^j`.
    pub additive: XPoly,
}

/// A validated formal Drinfeld module over `O_H`, given by `rho_pi`, together with
/// `eta = u pi^{m_0}`.
pub struct DrinfeldModule {
    field: Arc<LocalField>,
    rho_pi: TwistedSeries,
    m0: u32,
    unit_u: LaurentNum,
    ht_reduction: usize,
    theorem_condition: bool,
    powers: Mutex<Vec<Arc<TwistedSeries>>>,
    prepared: Memo<u32, Prepared>,
    eta_powers: Memo<u32, TwistedSeries>,
}

impl fmt::Debug for DrinfeldModule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DrinfeldModule")
            .field("rho_pi", &self.rho_pi)
            .field("m0", &self.m0)
            .field("unit_u", &self.unit_u)
            .field("theorem_condition", &self.theorem_condition)
            .finish()
    }
}

impl DrinfeldModule {
    /// Checks the module axioms, stable height-one reduction and `m_0 | d_H`.
    pub fn validate(rho_pi: TwistedSeries, m0: u32, unit_u: LaurentNum) -> Result<Self> {
        let field = rho_pi.field().clone();
        let invalid = |msg: String| Err(Error::InvalidModule(msg));
        if !rho_pi.is_polynomial() {
            return invalid("rho_pi must be a twisted polynomial".into());
        }
        let pi = LaurentNum::pi_pow(&field, 1);
        if !rho_pi.constant_term().eq_to_prec(&pi).0 {
            return invalid(format!("D(rho_pi) = {} is not pi", rho_pi.constant_term()));
        }
        if rho_pi.degree().unwrap_or(0) == 0 {
            return invalid("rho_pi lies in the coefficient ring (no tau term)".into());
        }
        if !rho_pi.is_integral() {
            return invalid("rho_pi has non-integral coefficients (no stable reduction)".into());
        }
        let ht = match rho_pi.reduction_ord() {
            None => return invalid("reduction of rho_pi is zero: not a formal Drinfeld module".into()),
            Some(0) => return invalid("reduction of rho_pi has a unit constant term".into()),
            Some(h) => h,
        };
        if ht != 1 {
            return invalid(format!("reduction has height {ht}, expected 1"));
        }
        if m0 == 0 || !field.residue().d().is_multiple_of(m0) {
            return invalid(format!("m_0 = {m0} does not divide d_H = {}", field.residue().d()));
        }
        if !unit_u.is_unit() || !unit_u.is_exact() || !unit_u.in_base_field() {
            return invalid(format!("u = {unit_u} is not an exact unit of O"));
        }
        let mut module = DrinfeldModule {
            field,
            rho_pi,
            m0,
            unit_u,
            ht_reduction: ht,
            theorem_condition: false,
            powers: Mutex::new(Vec::new()),
            prepared: Memo::new(),
            eta_powers: Memo::new(),
        };
        let rho_eta = module.rho_eta_pow(1)?;
        module.theorem_condition = (0..=rho_eta.degree().unwrap_or(0)).all(|i| {
            let c = rho_eta.coeff(i).expect("polynomial");
            if i == m0 as usize {
                c.sub(&LaurentNum::one(&module.field)).val_bound() >= 1
            } else {
                c.val_bound() >= 1
            }
        });
        module.eta_powers = Memo::new();
        Ok(module)
    }

    /// Carlitz module `pi + tau` over `F_q((pi))` with `eta = pi`.
    pub fn carlitz(field: &Arc<LocalField>) -> Result<Self> {
        let rho = TwistedSeries::polynomial(field, vec![LaurentNum::pi_pow(field, 1), LaurentNum::one(field)]);
        Self::validate(rho, 1, LaurentNum::one(field))
    }

    pub fn field(&self) -> &Arc<LocalField> {
        &self.field
    }

    pub fn rho_pi(&self) -> &TwistedSeries {
        &self.rho_pi
    }

    pub fn m0(&self) -> u32 {
        self.m0
    }

    pub fn unit_u(&self) -> &LaurentNum {
        &self.unit_u
    }

    /// `eta = u pi^{m_0}`.
    pub fn eta(&self) -> LaurentNum {
        self.unit_u.shift(self.m0 as i64)
    }

    pub fn ht_reduction(&self) -> usize {
        self.ht_reduction
    }

    /// Whether `rho_eta = tau^{m_0}` modulo `p_H`.
    pub fn theorem_condition(&self) -> bool {
        self.theorem_condition
    }

    pub fn q(&self) -> u32 {
        self.field.q()
    }

    /// `rho_pi^i`, memoized.
    pub fn rho_pi_power(&self, i: usize) -> Result<Arc<TwistedSeries>> {
        let mut powers = self.powers.lock().expect("powers lock poisoned");
        if powers.is_empty() {
            powers.push(Arc::new(TwistedSeries::one(&self.field)));
        }
        while powers.len() <= i {
            let next = powers.last().expect("nonempty").mul(&self.rho_pi)?;
            powers.push(Arc::new(next));
        }
        Ok(powers[i].clone())
    }

    /// `rho_a = sum c_i rho_pi^i` for `a = sum c_i pi^i` with digits in `F_q`.
    pub fn rho_of_digits(&self, digits: &[Fe]) -> Result<TwistedSeries> {
        let res = self.field.residue();
        if let Some(c) = digits.iter().find(|c| !res.in_base(**c)) {
            return Err(Error::InvalidModule(format!("digit {} is not in F_q", c.code())));
        }
        let mut acc = TwistedSeries::zero(&self.field);
        for (i, &c) in digits.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let term = self.rho_pi_power(i)?.scale_left(&LaurentNum::constant(&self.field, c));
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// `rho_a` for an integral `a` of `K`; an inexact `a` known mod `pi^P` gives
    /// `tau^j` coefficients known mod `pi^{P-j}`.
    pub fn rho_of(&self, a: &LaurentNum) -> Result<TwistedSeries> {
        if !a.is_integral() || !a.in_base_field() {
            return Err(Error::InvalidModule(format!("{a} is not an element of O")));
        }
        if a.is_exact() {
            let top = a.v_min() + a.coeffs().len() as i64;
            return self.rho_of_digits(&a.digits(0, top.max(0)));
        }
        let p = a.abs_prec();
        let sum = self.rho_of_digits(&a.digits(0, p))?;
        let coeffs = sum.coeffs().iter().enumerate().map(|(j, c)| c.truncate(p - j as i64)).collect();
        Ok(TwistedSeries::polynomial(&self.field, coeffs))
    }

    /// `rho_{eta^n}`, memoized.
    pub fn rho_eta_pow(&self, n: u32) -> Result<Arc<TwistedSeries>> {
        self.eta_powers.get_or_build(n, || {
            let un = self.unit_u.pow(n as i64)?;
            let rho_un = self.rho_of(&un)?;
            rho_un.mul(&*self.rho_pi_power((n * self.m0) as usize)?)
        })
    }

    /// Weierstrass data of `rho_{pi^j}`, memoized. `P_(j)` has `tau`-degree `j`.
    pub fn prepared(&self, j: u32) -> Result<Arc<Prepared>> {
        self.prepared.get_or_build(j, || {
            let (unit, distinguished) = self.rho_pi_power(j as usize)?.weierstrass_prep()?;
            if distinguished.degree() != Some(j as usize) {
                return Err(Error::ConsistencyFailure(format!(
                    "P_({j}) has tau-degree {:?}",
                    distinguished.degree()
                )));
            }
            let additive = XPoly::from_additive(&distinguished)?;
            Ok(Prepared { unit, distinguished, additive })
        })
    }

    /// The logarithm `lambda = sum c_i tau^i` with `lambda rho_pi = pi lambda`, through `tau^t`.
    pub fn logarithm(&self, t: usize) -> Result<TwistedSeries> {
        let f = &self.field;
        let q = self.q();
        let mut c = vec![LaurentNum::one(f)];
        for n in 1..=t {
            let mut acc = LaurentNum::exact_zero(f);
            for (i, ci) in c.iter().enumerate() {
                let b = self.rho_pi.coeff(n - i).expect("polynomial");
                if b.is_zero() && b.is_exact() {
                    continue;
                }
                acc = acc.add(&ci.mul(&b.frob_pow(i as u32)?));
            }
            let denom = LaurentNum::pi_pow(f, 1).sub(&LaurentNum::pi_pow(f, (q as i64).pow(n as u32)));
            let cn = acc.div(&denom)?;
            if cn.val_bound() < -(n as i64) {
                return Err(Error::ConsistencyFailure(format!("logarithm coefficient c_{n} has valuation below -{n}")));
            }
            c.push(cn);
        }
        Ok(TwistedSeries::series(f, c, t, TailBound::Logarithmic))
    }

    /// The exponential `e = sum d_i tau^i` with `e pi = rho_pi e`, through `tau^t`.
    pub fn exponential(&self, t: usize) -> Result<TwistedSeries> {
        let f = &self.field;
        let q = self.q() as i64;
        let mut d = vec![LaurentNum::one(f)];
        for n in 1..=t {
            let mut acc = LaurentNum::exact_zero(f);
            for j in 1..=n {
                let b = self.rho_pi.coeff(j).expect("polynomial");
                if b.is_zero() && b.is_exact() {
                    continue;
                }
                acc = acc.add(&b.mul(&d[n - j].frob_pow(j as u32)?));
            }
            let qn = q.pow(n as u32);
            let denom = LaurentNum::pi_pow(f, qn).sub(&LaurentNum::pi_pow(f, 1));
            let dn = acc.div(&denom)?;
            let bound = -(qn - 1) / (q - 1);
            if dn.val_bound() < bound {
                return Err(Error::ConsistencyFailure(format!(
                    "exponential coefficient d_{n} has valuation below {bound}"
                )));
            }
            d.push(dn);
        }
        Ok(TwistedSeries::series(f, d, t, TailBound::Exponential))
    }

    /// The unit series `r_n` with `P_(n m_0) = r_n rho_{eta^n}`, computed as the inverse of
    /// the Weierstrass unit of `rho_{eta^n}` through `tau^t`.
    pub fn unit_part_r(&self, n: u32, t: usize) -> Result<TwistedSeries> {
        let prep = self.prepared(n * self.m0)?;
        let rho_un = self.rho_of(&self.unit_u.pow(n as i64)?)?;
        let weierstrass_unit = rho_un.mul(&prep.unit)?;
        let r = weierstrass_unit.invert(InvertMode::Unit, t)?;
        if !r.is_integral() || !r.constant_term().is_unit() {
            return Err(Error::ConsistencyFailure(format!("r_{n} = {r} is not a unit of O_H{{{{tau}}}}")));
        }
        let check = r.mul(&*self.rho_eta_pow(n)?)?;
        if !check.eq_to_prec(&prep.distinguished) {
            return Err(Error::ConsistencyFailure(format!("r_{n} rho_(eta^{n}) differs from P_({})", n * self.m0)));
        }
        Ok(r)
    }

    /// `r_n = P_(n m_0) o rho_{eta^n}^{-1}` through the compositional inverse, as an
    /// independent route to [`DrinfeldModule::unit_part_r`]. The inverse has poles of order
    /// about `n m_0 q^t`, so this route needs a correspondingly larger precision cap.
    pub fn unit_part_r_via_inverse(&self, n: u32, t: usize) -> Result<TwistedSeries> {
        let prep = self.prepared(n * self.m0)?;
        let inv = self.rho_eta_pow(n)?.invert(InvertMode::Compositional, t)?;
        prep.distinguished.mul(&inv)
    }

    /// The conjugate module `t^{-1} rho t` for a unit `t` of `O_H{{tau}}`.
    ///
    /// The conjugate of `rho_pi` is computed through `tau^window` and must vanish to
    /// precision on its top four coefficients; it is then treated as a polynomial.
    pub fn conjugate(&self, t: &TwistedSeries, window: usize) -> Result<DrinfeldModule> {
        let t_inv = t.invert(InvertMode::Unit, window)?;
        let conj = t_inv.mul(&self.rho_pi)?.mul(&t.truncate_tau(window))?.truncate_tau(window);
        let last = conj.coeffs().iter().rposition(|c| !c.is_zero()).unwrap_or(0);
        if conj.trunc().is_some() && last + 4 > window {
            return Err(Error::PrecisionExhausted(format!(
                "conjugated rho_pi has a nonzero tau^{last} coefficient inside the window {window}"
            )));
        }
        let poly = conj.to_polynomial(last)?;
        DrinfeldModule::validate(poly, self.m0, self.unit_u.clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k(q: u32, cap: i64) -> Arc<LocalField> {
        LocalField::new(q, 1, 1, cap).unwrap()
    }

    fn num(f: &Arc<LocalField>, digits: &[u16]) -> LaurentNum {
        LaurentNum::from_digits(f, &digits.iter().map(|&d| Fe(d)).collect::<Vec<_>>())
    }

    fn twisted_variant(f: &Arc<LocalField>) -> DrinfeldModule {
        let rho = TwistedSeries::polynomial(f, vec![num(f, &[0, 1]), num(f, &[1, 1])]);
        DrinfeldModule::validate(rho, 1, LaurentNum::one(f)).unwrap()
    }

    #[test]
    fn validation_examples() {
        let f = k(2, 32);
        let c = DrinfeldModule::carlitz(&f).unwrap();
        assert!(c.theorem_condition());
        assert_eq!(c.ht_reduction(), 1);
        assert!(twisted_variant(&f).theorem_condition());
        let bad = TwistedSeries::polynomial(&f, vec![num(&f, &[0, 1])]);
        assert!(matches!(DrinfeldModule::validate(bad, 1, LaurentNum::one(&f)), Err(Error::InvalidModule(_))));
        let ht2 = TwistedSeries::polynomial(&f, vec![num(&f, &[0, 1]), num(&f, &[0, 1]), num(&f, &[1])]);
        assert!(DrinfeldModule::validate(ht2, 1, LaurentNum::one(&f)).is_err());
        let rho = TwistedSeries::polynomial(&f, vec![num(&f, &[0, 1]), num(&f, &[1])]);
        assert!(DrinfeldModule::validate(rho, 2, LaurentNum::one(&f)).is_err());
    }

    #[test]
    fn rho_of_examples() {
        let f = k(2, 32);
        let c = DrinfeldModule::carlitz(&f).unwrap();
        let r2 = c.rho_of(&LaurentNum::pi_pow(&f, 2)).unwrap();
        let expected = TwistedSeries::polynomial(&f, vec![num(&f, &[0, 0, 1]), num(&f, &[0, 1, 1]), num(&f, &[1])]);
        assert!(r2.eq_to_prec(&expected));
        assert!(c.rho_of(&LaurentNum::one(&f)).unwrap().eq_to_prec(&TwistedSeries::one(&f)));
        let f3 = k(3, 32);
        let c3 = DrinfeldModule::carlitz(&f3).unwrap();
        let two = c3.rho_of(&num(&f3, &[2])).unwrap();
        assert!(two.eq_to_prec(&TwistedSeries::constant(num(&f3, &[2]))));
    }

    #[test]
    fn logarithm_and_exponential_coefficients() {
        let f = k(2, 32);
        let c = DrinfeldModule::carlitz(&f).unwrap();
        let lam = c.logarithm(4).unwrap();
        let c1 = lam.coeff(1).unwrap();
        let oracle = LaurentNum::one(&f).div(&num(&f, &[0, 1, 1])).unwrap();
        assert!(c1.eq_to_prec(&oracle).0);
        assert_eq!(c1.valuation(), Some(-1));
        for n in 1..=4 {
            assert_eq!(lam.coeff(n).unwrap().valuation(), Some(-(n as i64)));
        }
        let e = c.exponential(4).unwrap();
        assert_eq!(e.coeff(1).unwrap().valuation(), Some(-1));
        assert!(e.coeff(0).unwrap().eq_to_prec(&LaurentNum::one(&f)).0);
    }

    #[test]
    fn r_for_carlitz_is_one_and_variant_is_constant() {
        let f = k(2, 32);
        let c = DrinfeldModule::carlitz(&f).unwrap();
        for n in 1..=2 {
            let r = c.unit_part_r(n, 6).unwrap();
            assert!(r.eq_to_prec(&TwistedSeries::one(&f)), "r_{n} = {r}");
        }
        let v = twisted_variant(&f);
        let r = v.unit_part_r(2, 6).unwrap();
        assert_eq!(r.degree(), Some(0));
        // L = (1 + pi)^{1 + q}.
        let l = num(&f, &[1, 1]).pow(3).unwrap();
        assert!(r.constant_term().mul(&l).eq_to_prec(&LaurentNum::one(&f)).0);
    }

    #[test]
    fn r_routes_agree() {
        let f = k(2, 400);
        let v = twisted_variant(&f);
        let direct = v.unit_part_r(1, 3).unwrap();
        let via_inverse = v.unit_part_r_via_inverse(1, 3).unwrap();
        assert!(direct.truncate_tau(3).eq_to_prec(&via_inverse));
    }

    #[test]
    fn conjugation_by_one_plus_pi_tau_is_a_module() {
        let f = k(2, 32);
        let c = DrinfeldModule::carlitz(&f).unwrap();
        let t = TwistedSeries::polynomial(&f, vec![LaurentNum::one(&f), LaurentNum::pi_pow(&f, 1)]);
        let conj = c.conjugate(&t, 16).unwrap();
        assert!(conj.theorem_condition());
        let back = t.mul(&conj.rho_pi).unwrap();
        let fwd = c.rho_pi().mul(&t).unwrap();
        assert!(back.eq_to_prec(&fwd));
    }
}
