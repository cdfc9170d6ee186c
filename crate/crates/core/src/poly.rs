//! Dense polynomials in `X` over the Laurent field `H`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::residue::{LaurentNum, LocalField};
use crate::twisted::TwistedSeries;

#[derive(Clone)]
pub struct XPoly {
    field: Arc<LocalField>,
    coeffs: Vec<LaurentNum>,
}

impl XPoly {
    pub fn new(field: &Arc<LocalField>, mut coeffs: Vec<LaurentNum>) -> Self {
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        XPoly { field: field.clone(), coeffs }
    }

    pub fn zero(field: &Arc<LocalField>) -> Self {
        Self::new(field, Vec::new())
    }

    pub fn constant(c: LaurentNum) -> Self {
        let field = c.field().clone();
        Self::new(&field, vec![c])
    }

    pub fn one(field: &Arc<LocalField>) -> Self {
        Self::constant(LaurentNum::one(field))
    }

    /// `c X^k`.
    pub fn monomial(c: LaurentNum, k: usize) -> Self {
        let field = c.field().clone();
        let mut coeffs = vec![LaurentNum::exact_zero(&field); k];
        coeffs.push(c);
        Self::new(&field, coeffs)
    }

    pub fn x(field: &Arc<LocalField>) -> Self {
        Self::monomial(LaurentNum::one(field), 1)
    }

    /// The additive polynomial `sum b_i X^{q^i}` of a twisted polynomial.
    pub fn from_additive(f: &TwistedSeries) -> Result<Self> {
        let deg = f
            .degree()
            .ok_or_else(|| Error::PrecisionExhausted("additive form needs a twisted polynomial".into()))?;
        let field = f.field();
        let q = field.q() as usize;
        let top = q.checked_pow(deg as u32).ok_or_else(|| Error::PrecisionExhausted("degree overflow".into()))?;
        let mut coeffs = vec![LaurentNum::exact_zero(field); top + 1];
        for (i, b) in f.coeffs().iter().enumerate() {
            coeffs[q.pow(i as u32)] = b.clone();
        }
        Ok(Self::new(field, coeffs))
    }

    pub fn field(&self) -> &Arc<LocalField> {
        &self.field
    }

    pub fn coeffs(&self) -> &[LaurentNum] {
        &self.coeffs
    }

    pub fn coeff(&self, i: usize) -> LaurentNum {
        self.coeffs.get(i).cloned().unwrap_or_else(|| LaurentNum::exact_zero(&self.field))
    }

    /// Degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.len().checked_sub(1)
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn add(&self, other: &Self) -> Self {
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|i| self.coeff(i).add(&other.coeff(i))).collect();
        Self::new(&self.field, coeffs)
    }

    pub fn neg(&self) -> Self {
        Self::new(&self.field, self.coeffs.iter().map(|c| c.neg()).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: &LaurentNum) -> Self {
        Self::new(&self.field, self.coeffs.iter().map(|a| a.mul(c)).collect())
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.is_zero() || other.is_zero() {
            return Self::zero(&self.field);
        }
        let mut out = vec![LaurentNum::exact_zero(&self.field); self.coeffs.len() + other.coeffs.len() - 1];
        for (i, a) in self.coeffs.iter().enumerate() {
            if a.is_zero() && a.is_exact() {
                continue;
            }
            for (j, b) in other.coeffs.iter().enumerate() {
                if b.is_zero() && b.is_exact() {
                    continue;
                }
                out[i + j] = out[i + j].add(&a.mul(b));
            }
        }
        Self::new(&self.field, out)
    }

    pub fn derivative(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .map(|(i, c)| c.scale(self.field.residue().from_int(i as i64)))
            .collect();
        Self::new(&self.field, coeffs)
    }

    /// Quotient and remainder by a monic divisor.
    pub fn div_rem_monic(&self, divisor: &Self) -> Result<(Self, Self)> {
        let d = divisor.degree().ok_or_else(|| Error::NotInvertible("division by zero polynomial".into()))?;
        let lead = &divisor.coeffs[d];
        if !lead.eq_to_prec(&LaurentNum::one(&self.field)).0 {
            return Err(Error::NotInvertible(format!("divisor leading coefficient {lead} is not 1")));
        }
        let mut rem = self.coeffs.clone();
        if rem.len() <= d {
            return Ok((Self::zero(&self.field), self.clone()));
        }
        let mut quot = vec![LaurentNum::exact_zero(&self.field); rem.len() - d];
        for k in (0..quot.len()).rev() {
            let c = rem[k + d].clone();
            if c.is_zero() && c.is_exact() {
                continue;
            }
            for (i, b) in divisor.coeffs.iter().enumerate().take(d) {
                rem[k + i] = rem[k + i].sub(&c.mul(b));
            }
            rem[k + d] = LaurentNum::zero(&self.field, c.abs_prec());
            quot[k] = c;
        }
        rem.truncate(d);
        Ok((Self::new(&self.field, quot), Self::new(&self.field, rem)))
    }

    /// Quotient by a monic divisor that must divide exactly to precision.
    pub fn exact_div(&self, divisor: &Self) -> Result<Self> {
        let (q, r) = self.div_rem_monic(divisor)?;
        if let Some(c) = r.coeffs.iter().find(|c| !c.is_zero()) {
            return Err(Error::ConsistencyFailure(format!("nonzero remainder coefficient {c} in exact division")));
        }
        Ok(q)
    }

    /// Evaluation at a Laurent number by Horner's rule.
    pub fn eval(&self, x: &LaurentNum) -> LaurentNum {
        self.coeffs
            .iter()
            .rev()
            .fold(LaurentNum::exact_zero(&self.field), |acc, c| acc.mul(x).add(c))
    }

    /// `self(other(X))`.
    pub fn compose(&self, other: &Self) -> Self {
        self.coeffs.iter().rev().fold(Self::zero(&self.field), |acc, c| acc.mul(other).add(&Self::constant(c.clone())))
    }

    pub fn eq_to_prec(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }

    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integral())
    }

    pub fn min_abs_prec(&self) -> i64 {
        self.coeffs.iter().map(|c| c.abs_prec()).min().unwrap_or(crate::residue::EXACT)
    }
}

impl fmt::Debug for XPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for XPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate().rev() {
            if c.is_zero() {
                continue;
            }
            let x = match i {
                0 => String::new(),
                1 => "X".into(),
                _ => format!("X^{i}"),
            };
            let one = c.is_exact() && c.eq_to_prec(&LaurentNum::one(&self.field)).0;
            terms.push(match (one, x.is_empty()) {
                (true, false) => x,
                (_, true) => format!("({c})"),
                (false, false) => format!("({c}){x}"),
            });
        }
        if terms.is_empty() {
            terms.push("0".into());
        }
        write!(f, "{}", terms.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::Fe;

    fn k2() -> Arc<LocalField> {
        LocalField::new(2, 1, 1, 32).unwrap()
    }

    #[test]
    fn carlitz_quotient_at_level_two() {
        let f = k2();
        let pi = LaurentNum::pi_pow(&f, 1);
        let carlitz = TwistedSeries::polynomial(&f, vec![pi.clone(), LaurentNum::one(&f)]);
        let sq = carlitz.mul(&carlitz).unwrap();
        let p1 = XPoly::from_additive(&carlitz).unwrap();
        let p2 = XPoly::from_additive(&sq).unwrap();
        let g2 = p2.exact_div(&p1).unwrap();
        // X^2 + pi X + pi.
        let expected = XPoly::new(&f, vec![pi.clone(), pi.clone(), LaurentNum::one(&f)]);
        assert!(g2.eq_to_prec(&expected));
        assert!(g2.derivative().eq_to_prec(&XPoly::constant(pi)));
    }

    #[test]
    fn division_identity() {
        let f = LocalField::new(3, 1, 1, 32).unwrap();
        let n = |d: &[u16]| LaurentNum::from_digits(&f, &d.iter().map(|&x| Fe(x)).collect::<Vec<_>>());
        let a = XPoly::new(&f, vec![n(&[1, 2]), n(&[0, 1]), n(&[2]), n(&[1, 1]), n(&[1])]);
        let b = XPoly::new(&f, vec![n(&[0, 1]), n(&[2]), n(&[1])]);
        let (q, r) = a.div_rem_monic(&b).unwrap();
        assert!(q.mul(&b).add(&r).eq_to_prec(&a));
        assert!(r.degree().unwrap_or(0) < 2);
    }
}
