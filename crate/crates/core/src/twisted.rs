//! The twisted power series ring `B{{tau}}` with `tau x = x^q tau`.
//!
//! An element `sum b_i tau^i` acts on a point `x` as `sum b_i x^{q^i}`, so multiplication
//! is composition of the associated additive series.

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::residue::{LaurentNum, LocalField, EXACT};

/// Known lower bound for the valuations of the coefficients beyond the stored ones.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailBound {
    /// Nothing is known; evaluation refuses to drop the tail.
    Unknown,
    /// `mu(b_i) >= 0`.
    Integral,
    /// `mu(b_i) >= -i`, as for the logarithm.
    Logarithmic,
    /// `mu(b_i) >= -(q^i - 1)/(q - 1)`, as for the exponential.
    Exponential,
}

impl TailBound {
    fn at(self, i: u32, q: i128) -> Option<Ratio<i128>> {
        match self {
            TailBound::Unknown => None,
            TailBound::Integral => Some(Ratio::from_integer(0)),
            TailBound::Logarithmic => Some(Ratio::from_integer(-(i as i128))),
            TailBound::Exponential => Some(Ratio::new(-(q.pow(i) - 1), q - 1)),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum InvertMode {
    /// Inverse in `O_H{{tau}}`: requires `ord_tau = 0` and a unit constant term.
    Unit,
    /// Compositional inverse over the fraction field: requires a nonzero constant term.
    Compositional,
}

/// Points that twisted series can be evaluated at.
pub trait FrobeniusModule: Sized + Clone {
    /// `x -> x^q`.
    fn frob_q(&self) -> Result<Self>;
    fn scale(&self, c: &LaurentNum) -> Self;
    fn add(&self, other: &Self) -> Self;
    /// Valuation, or `None` when zero to precision.
    fn valuation(&self) -> Result<Option<Ratio<i64>>>;
    /// Forgets everything below valuation `bound`: the value is known modulo the
    /// fractional ideal `{mu >= bound}`.
    fn truncate_val(&self, bound: Ratio<i64>) -> Self;
}

impl FrobeniusModule for LaurentNum {
    fn frob_q(&self) -> Result<Self> {
        Ok(self.frob_pow(1)?)
    }

    fn scale(&self, c: &LaurentNum) -> Self {
        self.mul(c)
    }

    fn add(&self, other: &Self) -> Self {
        LaurentNum::add(self, other)
    }

    fn valuation(&self) -> Result<Option<Ratio<i64>>> {
        Ok(LaurentNum::valuation(self).map(Ratio::from_integer))
    }

    fn truncate_val(&self, bound: Ratio<i64>) -> Self {
        self.truncate(bound.ceil().to_integer())
    }
}

/// An element of `B{{tau}}`: either a polynomial in `tau` or a series known through `tau^trunc`.
#[derive(Clone)]
pub struct TwistedSeries {
    field: Arc<LocalField>,
    coeffs: Vec<LaurentNum>,
    trunc: Option<usize>,
    tail: TailBound,
}

impl TwistedSeries {
    /// A finite twisted polynomial.
    pub fn polynomial(field: &Arc<LocalField>, coeffs: Vec<LaurentNum>) -> Self {
        let mut s = TwistedSeries { field: field.clone(), coeffs, trunc: None, tail: TailBound::Integral };
        s.trim();
        s
    }

    /// A series whose coefficients are known for `tau^0 .. tau^trunc`.
    pub fn series(field: &Arc<LocalField>, mut coeffs: Vec<LaurentNum>, trunc: usize, tail: TailBound) -> Self {
        coeffs.truncate(trunc + 1);
        while coeffs.len() < trunc + 1 {
            coeffs.push(LaurentNum::exact_zero(field));
        }
        TwistedSeries { field: field.clone(), coeffs, trunc: Some(trunc), tail }
    }

    fn trim(&mut self) {
        if self.trunc.is_none() {
            while self.coeffs.last().is_some_and(|c| c.is_zero() && c.is_exact()) {
                self.coeffs.pop();
            }
        }
    }

    pub fn constant(c: LaurentNum) -> Self {
        let field = c.field().clone();
        Self::polynomial(&field, vec![c])
    }

    pub fn one(field: &Arc<LocalField>) -> Self {
        Self::constant(LaurentNum::one(field))
    }

    pub fn zero(field: &Arc<LocalField>) -> Self {
        Self::polynomial(field, Vec::new())
    }

    pub fn tau_pow(field: &Arc<LocalField>, k: usize) -> Self {
        let mut coeffs = vec![LaurentNum::exact_zero(field); k];
        coeffs.push(LaurentNum::one(field));
        Self::polynomial(field, coeffs)
    }

    pub fn field(&self) -> &Arc<LocalField> {
        &self.field
    }

    /// `None` for polynomials, otherwise the highest known `tau` index.
    pub fn trunc(&self) -> Option<usize> {
        self.trunc
    }

    pub fn tail(&self) -> TailBound {
        self.tail
    }

    pub fn with_tail(mut self, tail: TailBound) -> Self {
        self.tail = tail;
        self
    }

    pub fn is_polynomial(&self) -> bool {
        self.trunc.is_none()
    }

    /// Stored coefficients `b_0, b_1, ...`.
    pub fn coeffs(&self) -> &[LaurentNum] {
        &self.coeffs
    }

    /// Coefficient of `tau^i`; zero beyond the degree of a polynomial, `None` beyond the truncation.
    pub fn coeff(&self, i: usize) -> Option<LaurentNum> {
        match self.coeffs.get(i) {
            Some(c) => Some(c.clone()),
            None if self.trunc.is_none() => Some(LaurentNum::exact_zero(&self.field)),
            None => None,
        }
    }

    /// `tau`-degree of a polynomial.
    pub fn degree(&self) -> Option<usize> {
        if self.trunc.is_some() {
            return None;
        }
        self.coeffs.len().checked_sub(1)
    }

    /// The constant term `D(f) = b_0`.
    pub fn constant_term(&self) -> LaurentNum {
        self.coeff(0).unwrap_or_else(|| LaurentNum::exact_zero(&self.field))
    }

    /// Least `i` with `b_i` nonzero to precision.
    pub fn ord_tau(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn is_integral(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_integral())
    }

    /// `ord_tau` of the coefficientwise reduction mod the maximal ideal.
    pub fn reduction_ord(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| c.is_unit())
    }

    /// Series truncated to `tau^0 .. tau^t`.
    pub fn truncate_tau(&self, t: usize) -> Self {
        match self.trunc {
            Some(old) if old <= t => self.clone(),
            None if self.coeffs.len() <= t + 1 => self.clone(),
            _ => Self::series(&self.field, self.coeffs.clone(), t, self.tail),
        }
    }

    /// Reduces every coefficient to absolute precision at most `prec`.
    pub fn truncate_abs(&self, prec: i64) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.truncate(prec)).collect();
        TwistedSeries { field: self.field.clone(), coeffs, trunc: self.trunc, tail: self.tail }
    }

    /// Treats a series as a polynomial once every coefficient past `tau^keep` is zero to
    /// precision; fails otherwise.
    pub fn to_polynomial(&self, keep: usize) -> Result<Self> {
        if let Some((i, c)) = self.coeffs.iter().enumerate().skip(keep + 1).find(|(_, c)| !c.is_zero()) {
            return Err(Error::PrecisionExhausted(format!(
                "coefficient of tau^{i} is {c}, not zero to precision"
            )));
        }
        let coeffs = self.coeffs.iter().take(keep + 1).cloned().collect();
        Ok(Self::polynomial(&self.field, coeffs))
    }

    fn combine_trunc(a: Option<usize>, b: Option<usize>) -> Option<usize> {
        match (a, b) {
            (Some(x), Some(y)) => Some(x.min(y)),
            (x, None) | (None, x) => x,
        }
    }

    fn weaker_tail(a: &Self, b: &Self) -> TailBound {
        if a.tail == b.tail {
            a.tail
        } else if a.is_polynomial() {
            b.tail
        } else if b.is_polynomial() {
            a.tail
        } else {
            TailBound::Unknown
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        let trunc = Self::combine_trunc(self.trunc, other.trunc);
        let len = match trunc {
            Some(t) => t + 1,
            None => self.coeffs.len().max(other.coeffs.len()),
        };
        let coeffs = (0..len)
            .map(|i| {
                let a = self.coeff(i).expect("within truncation");
                let b = other.coeff(i).expect("within truncation");
                a.add(&b)
            })
            .collect();
        let tail = Self::weaker_tail(self, other);
        match trunc {
            Some(t) => Self::series(&self.field, coeffs, t, tail),
            None => Self::polynomial(&self.field, coeffs),
        }
    }

    pub fn neg(&self) -> Self {
        let coeffs = self.coeffs.iter().map(|c| c.neg()).collect();
        TwistedSeries { field: self.field.clone(), coeffs, trunc: self.trunc, tail: self.tail }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// `c * f`: scales every coefficient.
    pub fn scale_left(&self, c: &LaurentNum) -> Self {
        let coeffs = self.coeffs.iter().map(|b| c.mul(b)).collect();
        let mut s = TwistedSeries { field: self.field.clone(), coeffs, trunc: self.trunc, tail: self.tail };
        if !c.is_integral() {
            s.tail = TailBound::Unknown;
        }
        s.trim();
        s
    }

    /// Twisted product, which is composition of the additive series: `(f g)(x) = f(g(x))`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        let trunc = Self::combine_trunc(self.trunc, other.trunc);
        let len = match trunc {
            Some(t) => t + 1,
            None => {
                if self.coeffs.is_empty() || other.coeffs.is_empty() {
                    return Ok(Self::zero(&self.field));
                }
                self.coeffs.len() + other.coeffs.len() - 1
            }
        };
        let mut out = vec![LaurentNum::exact_zero(&self.field); len];
        for (i, fi) in self.coeffs.iter().enumerate().take(len) {
            if fi.is_zero() && fi.is_exact() {
                continue;
            }
            for (j, gj) in other.coeffs.iter().enumerate().take(len - i) {
                let twisted = gj.frob_pow(i as u32)?;
                out[i + j] = out[i + j].add(&fi.mul(&twisted));
            }
        }
        let tail = if self.tail == TailBound::Integral && other.tail == TailBound::Integral {
            TailBound::Integral
        } else {
            TailBound::Unknown
        };
        Ok(match trunc {
            Some(t) => Self::series(&self.field, out, t, tail),
            None => Self::polynomial(&self.field, out),
        })
    }

    /// Composition `f o g`, identical to the twisted product.
    pub fn compose(&self, other: &Self) -> Result<Self> {
        self.mul(other)
    }

    /// Two-sided inverse solved degree by degree through `tau^tau_trunc`.
    pub fn invert(&self, mode: InvertMode, tau_trunc: usize) -> Result<Self> {
        let f0 = self.constant_term();
        if f0.is_zero() {
            return Err(Error::NotInvertible("constant term is zero to precision".into()));
        }
        if mode == InvertMode::Unit && !f0.is_unit() {
            return Err(Error::NotInvertible(format!("constant term {f0} is not a unit")));
        }
        if mode == InvertMode::Unit && !self.is_integral() {
            return Err(Error::NotInvertible("series is not integral".into()));
        }
        let g0 = f0.inv()?;
        if self.degree() == Some(0) {
            return Ok(Self::constant(g0));
        }
        let t = match self.trunc {
            Some(tr) => tr.min(tau_trunc),
            None => tau_trunc,
        };
        let mut g = vec![g0.clone()];
        for n in 1..=t {
            let mut acc = LaurentNum::exact_zero(&self.field);
            for i in 1..=n {
                let fi = self.coeff(i).expect("within truncation");
                if fi.is_zero() && fi.is_exact() {
                    continue;
                }
                acc = acc.add(&fi.mul(&g[n - i].frob_pow(i as u32)?));
            }
            g.push(acc.mul(&g0).neg());
        }
        let tail = if mode == InvertMode::Unit { TailBound::Integral } else { TailBound::Unknown };
        Ok(Self::series(&self.field, g, t, tail))
    }

    /// Weierstrass preparation of an integral twisted polynomial: `f = u P` with `P` monic
    /// of `tau`-degree `ord_tau(f mod p_H)`, its lower coefficients in `p_H`, and `u` a unit.
    pub fn weierstrass_prep(&self) -> Result<(Self, Self)> {
        if !self.is_polynomial() {
            return Err(Error::PrecisionExhausted(
                "preparation needs a twisted polynomial; truncate the series first".into(),
            ));
        }
        if !self.is_integral() {
            return Err(Error::NotInvertible("series is not integral".into()));
        }
        let h = self.reduction_ord().ok_or(Error::NotPreparable)?;
        let d = self.coeffs.len() - 1;
        let field = &self.field;
        let zero = LaurentNum::exact_zero(field);
        let f = &self.coeffs;
        let mut p: Vec<LaurentNum> = vec![zero.clone(); h];
        let mut u: Vec<LaurentNum> = vec![zero.clone(); d - h + 1];
        let max_iter = 4 + 2 * field.cap().max(1).ilog2() as usize + field.cap() as usize;
        for iter in 0..max_iter {
            // Top-down solve for u given p: (uP)_n = u_{n-h} + sum_{j<h} u_{n-j} p_j^{q^{n-j}}.
            let mut new_u = vec![zero.clone(); d - h + 1];
            for n in (h..=d).rev() {
                let mut acc = f[n].clone();
                for (j, pj) in p.iter().enumerate() {
                    let idx = n - j;
                    if idx > d - h {
                        continue;
                    }
                    acc = acc.sub(&new_u[idx].mul(&pj.frob_pow((n - j) as u32)?));
                }
                new_u[n - h] = acc;
            }
            // Bottom-up solve for p: f_j = u_0 p_j + sum_{i=1..j} u_i p_{j-i}^{q^i}.
            let u0_inv = new_u[0].inv()?;
            let mut new_p = vec![zero.clone(); h];
            for j in 0..h {
                let mut acc = f[j].clone();
                for i in 1..=j {
                    if i > d - h {
                        break;
                    }
                    acc = acc.sub(&new_u[i].mul(&new_p[j - i].frob_pow(i as u32)?));
                }
                new_p[j] = acc.mul(&u0_inv);
            }
            let stable = iter > 0
                && new_p.iter().zip(&p).all(|(a, b)| a.eq_to_prec(b).0 && a.abs_prec() == b.abs_prec())
                && new_u.iter().zip(&u).all(|(a, b)| a.eq_to_prec(b).0 && a.abs_prec() == b.abs_prec());
            p = new_p;
            u = new_u;
            if stable {
                let mut pc = p;
                pc.push(LaurentNum::one(field));
                let pp = Self::polynomial(field, pc);
                let uu = Self::polynomial(field, u);
                if let Some(bad) = pp.coeffs[..h].iter().find(|c| !c.is_zero() && c.val_bound() < 1) {
                    return Err(Error::ConsistencyFailure(format!(
                        "prepared polynomial has non-distinguished coefficient {bad}"
                    )));
                }
                return Ok((uu, pp));
            }
        }
        Err(Error::PrecisionExhausted("Weierstrass iteration did not stabilize".into()))
    }

    /// `sum b_i x^{q^i}`.
    ///
    /// For a truncated series the dropped tail is bounded with [`TailBound`] and the
    /// result precision is lowered to that bound.
    pub fn evaluate<M: FrobeniusModule>(&self, x: &M) -> Result<M> {
        let tail_prec = match self.trunc {
            None => None,
            Some(t) => Some(self.tail_precision(x, t)?),
        };
        let mut power = x.clone();
        let mut acc: Option<M> = None;
        for (i, b) in self.coeffs.iter().enumerate() {
            if i > 0 {
                power = power.frob_q()?;
            }
            if b.is_zero() && b.is_exact() {
                continue;
            }
            let term = power.scale(b);
            acc = Some(match acc {
                None => term,
                Some(a) => a.add(&term),
            });
        }
        let result = acc.unwrap_or_else(|| x.scale(&LaurentNum::exact_zero(&self.field)));
        Ok(match tail_prec {
            Some(b) => result.truncate_val(b),
            None => result,
        })
    }

    /// Least valuation of a dropped term `b_i x^{q^i}`, `i > t`.
    fn tail_precision<M: FrobeniusModule>(&self, x: &M, t: usize) -> Result<Ratio<i64>> {
        let q = self.field.q() as i128;
        let v = match x.valuation()? {
            None => return Ok(Ratio::from_integer(EXACT)),
            Some(v) => Ratio::new(*v.numer() as i128, *v.denom() as i128),
        };
        if v <= Ratio::from_integer(0) {
            return Err(Error::Divergent(format!("point has valuation {v} <= 0")));
        }
        if self.tail == TailBound::Exponential && v <= Ratio::new(1, q - 1) {
            return Err(Error::Divergent(format!("exponential at valuation {v} <= 1/(q-1)")));
        }
        let cap = Ratio::from_integer(self.field.cap() as i128);
        let mut best: Option<Ratio<i128>> = None;
        let mut i = t as u32 + 1;
        loop {
            let bound = self
                .tail
                .at(i, q)
                .ok_or_else(|| Error::Divergent("tail of the series is unbounded".into()))?;
            let qi = q.checked_pow(i).ok_or_else(|| Error::Divergent("tail overflow".into()))?;
            let term = bound + v * qi;
            best = Some(match best {
                Some(b) if b <= term => b,
                _ => term,
            });
            let increasing = match self.tail {
                TailBound::Logarithmic => v * qi * (q - 1) >= Ratio::from_integer(1),
                _ => true,
            };
            if increasing && (term >= cap || i > t as u32 + 64) {
                break;
            }
            i += 1;
        }
        let b = best.expect("at least one tail term");
        let clamp = |x: i128| x.clamp(-(EXACT as i128), EXACT as i128) as i64;
        if b >= cap {
            return Ok(Ratio::from_integer(clamp(b.floor().to_integer())));
        }
        Ok(Ratio::new(clamp(*b.numer()), clamp(*b.denom())))
    }

    /// Equality of every known coefficient to the common precision.
    pub fn eq_to_prec(&self, other: &Self) -> bool {
        let len = match Self::combine_trunc(self.trunc, other.trunc) {
            Some(t) => t + 1,
            None => self.coeffs.len().max(other.coeffs.len()),
        };
        (0..len).all(|i| match (self.coeff(i), other.coeff(i)) {
            (Some(a), Some(b)) => a.eq_to_prec(&b).0,
            _ => true,
        })
    }

    /// Least absolute precision across stored coefficients.
    pub fn min_abs_prec(&self) -> i64 {
        self.coeffs.iter().map(|c| c.abs_prec()).min().unwrap_or(EXACT)
    }
}

impl fmt::Debug for TwistedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TwistedSeries {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let t = match i {
                0 => String::new(),
                1 => "tau".into(),
                _ => format!("tau^{i}"),
            };
            terms.push(if t.is_empty() { format!("({c})") } else { format!("({c}){t}") });
        }
        if terms.is_empty() {
            terms.push("0".into());
        }
        if let Some(t) = self.trunc {
            terms.push(format!("O(tau^{})", t + 1));
        }
        write!(f, "{}", terms.join(" + "))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::Fe;
    use proptest::prelude::*;

    fn k(q: u32) -> Arc<LocalField> {
        LocalField::new(q, 1, 1, 32).unwrap()
    }

    fn num(f: &Arc<LocalField>, digits: &[u16]) -> LaurentNum {
        LaurentNum::from_digits(f, &digits.iter().map(|&d| Fe(d)).collect::<Vec<_>>())
    }

    fn carlitz(f: &Arc<LocalField>) -> TwistedSeries {
        TwistedSeries::polynomial(f, vec![num(f, &[0, 1]), num(f, &[1])])
    }

    #[test]
    fn schoolbook_square_of_carlitz() {
        let f = k(2);
        let r = carlitz(&f);
        let sq = r.mul(&r).unwrap();
        let expected = TwistedSeries::polynomial(&f, vec![num(&f, &[0, 0, 1]), num(&f, &[0, 1, 1]), num(&f, &[1])]);
        assert!(sq.eq_to_prec(&expected));
        assert_eq!(sq.degree(), Some(2));
        assert!(sq.constant_term().eq_to_prec(&num(&f, &[0, 0, 1])).0);
        assert!(r.mul(&TwistedSeries::one(&f)).unwrap().eq_to_prec(&r));
    }

    #[test]
    fn unit_inverse_of_one_plus_pi_tau() {
        let f = k(2);
        let t = TwistedSeries::polynomial(&f, vec![num(&f, &[1]), num(&f, &[0, 1])]);
        let inv = t.invert(InvertMode::Unit, 6).unwrap();
        assert!(inv.coeff(1).unwrap().eq_to_prec(&num(&f, &[0, 1])).0);
        assert!(inv.coeff(2).unwrap().eq_to_prec(&LaurentNum::pi_pow(&f, 3)).0);
        let one = TwistedSeries::one(&f);
        assert!(t.mul(&inv).unwrap().eq_to_prec(&one));
        assert!(inv.mul(&t).unwrap().eq_to_prec(&one));
    }

    #[test]
    fn compositional_inverse() {
        let f = k(2);
        let id = TwistedSeries::one(&f);
        assert!(id.invert(InvertMode::Compositional, 4).unwrap().eq_to_prec(&id));
        let r = carlitz(&f);
        let inv = r.invert(InvertMode::Compositional, 5).unwrap();
        let c0 = inv.constant_term();
        assert!(c0.eq_to_prec(&LaurentNum::pi_pow(&f, -1)).0);
        assert!(r.mul(&inv).unwrap().eq_to_prec(&id));
        assert!(inv.mul(&r).unwrap().eq_to_prec(&id));
        assert!(r.invert(InvertMode::Unit, 3).is_err());
    }

    #[test]
    fn preparation_examples() {
        let f = k(2);
        let r = carlitz(&f);
        let (u, p) = r.weierstrass_prep().unwrap();
        assert!(u.eq_to_prec(&TwistedSeries::one(&f)));
        assert!(p.eq_to_prec(&r));

        let sq = r.mul(&r).unwrap();
        let (u2, p2) = sq.weierstrass_prep().unwrap();
        assert!(u2.eq_to_prec(&TwistedSeries::one(&f)));
        assert!(p2.eq_to_prec(&sq));

        let g = TwistedSeries::polynomial(&f, vec![num(&f, &[0, 1]), num(&f, &[1, 1])]);
        let (u, p) = g.weierstrass_prep().unwrap();
        assert_eq!(p.degree(), Some(1));
        assert!(p.coeff(1).unwrap().eq_to_prec(&LaurentNum::one(&f)).0);
        assert!(u.constant_term().eq_to_prec(&num(&f, &[1, 1])).0);
        assert!(u.mul(&p).unwrap().eq_to_prec(&g));
    }

    #[test]
    fn preparation_of_higher_degree() {
        // (pi + pi tau + tau^2)(1 + tau) style input with reduction order 2.
        let f = k(3);
        let g = TwistedSeries::polynomial(
            &f,
            vec![num(&f, &[0, 1]), num(&f, &[0, 2, 1]), num(&f, &[1, 1]), num(&f, &[0, 1]), num(&f, &[2])],
        );
        let (u, p) = g.weierstrass_prep().unwrap();
        assert_eq!(p.degree(), Some(2));
        assert!(u.mul(&p).unwrap().eq_to_prec(&g));
        assert!(u.constant_term().is_unit());
        assert_eq!(p.reduction_ord(), Some(2));
    }

    #[test]
    fn evaluation_examples() {
        let f = k(2);
        let r = carlitz(&f);
        // rho_pi(pi) = pi^2 + pi^2 = 0 in characteristic 2.
        assert!(r.evaluate(&LaurentNum::pi_pow(&f, 1)).unwrap().is_zero());
        let x = num(&f, &[0, 1, 1]);
        assert!(TwistedSeries::one(&f).evaluate(&x).unwrap().eq_to_prec(&x).0);
        // Compose-then-evaluate agrees with nested evaluation.
        let s = TwistedSeries::polynomial(&f, vec![num(&f, &[1, 1]), num(&f, &[0, 0, 1])]);
        let lhs = r.mul(&s).unwrap().evaluate(&x).unwrap();
        let rhs = r.evaluate(&s.evaluate(&x).unwrap()).unwrap();
        assert!(lhs.eq_to_prec(&rhs).0);
    }

    #[test]
    fn truncated_series_needs_positive_valuation() {
        let f = k(2);
        let s = TwistedSeries::series(&f, vec![LaurentNum::one(&f); 3], 2, TailBound::Logarithmic);
        assert!(matches!(s.evaluate(&LaurentNum::one(&f)), Err(Error::Divergent(_))));
        let y = s.evaluate(&LaurentNum::pi_pow(&f, 2)).unwrap();
        // Dropped tail: -i + 2^i * 2 >= 29 at i = 3.
        assert_eq!(y.abs_prec(), 13);
    }

    fn arb_poly(q: u32) -> impl Strategy<Value = Vec<Vec<u16>>> {
        prop::collection::vec(prop::collection::vec(0..q as u16, 1..5), 1..4)
    }

    proptest! {
        #[test]
        fn ring_laws(a in arb_poly(3), b in arb_poly(3), c in arb_poly(3)) {
            let f = k(3);
            let mk = |v: &Vec<Vec<u16>>| TwistedSeries::polynomial(&f, v.iter().map(|d| num(&f, d)).collect());
            let (a, b, c) = (mk(&a), mk(&b), mk(&c));
            let ab_c = a.mul(&b).unwrap().mul(&c).unwrap();
            let a_bc = a.mul(&b.mul(&c).unwrap()).unwrap();
            prop_assert!(ab_c.eq_to_prec(&a_bc));
            let dist = a.mul(&b.add(&c)).unwrap();
            let sum = a.mul(&b).unwrap().add(&a.mul(&c).unwrap());
            prop_assert!(dist.eq_to_prec(&sum));
            let d_ab = a.mul(&b).unwrap().constant_term();
            prop_assert!(d_ab.eq_to_prec(&a.constant_term().mul(&b.constant_term())).0);
            let d_sum = a.add(&b).constant_term();
            prop_assert!(d_sum.eq_to_prec(&a.constant_term().add(&b.constant_term())).0);
        }

        #[test]
        fn preparation_reproduces_input(v in prop::collection::vec(prop::collection::vec(0..2u16, 1..6), 1..4),
                                        h in 0usize..3) {
            let f = k(2);
            // Build f with reduction order h: lower coefficients in p, b_h a unit.
            let mut coeffs: Vec<LaurentNum> = v.iter().map(|d| num(&f, d).shift(1)).collect();
            while coeffs.len() <= h {
                coeffs.push(LaurentNum::pi_pow(&f, 1));
            }
            coeffs[h] = coeffs[h].add(&LaurentNum::one(&f));
            let g = TwistedSeries::polynomial(&f, coeffs);
            let (u, p) = g.weierstrass_prep().unwrap();
            prop_assert!(u.mul(&p).unwrap().eq_to_prec(&g));
            prop_assert_eq!(p.degree(), Some(h));
            prop_assert_eq!(p.reduction_ord(), g.reduction_ord());
        }
    }
}
