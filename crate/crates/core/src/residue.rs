//! Finite residue fields and absolute-precision Laurent series in one uniformizer.
//!
//! A [`FieldSpec`] is the residue field `F_{q^d}` with `q = p^k`, built from a primitive
//! modulus over `F_p`. A [`LocalField`] adds the working precision cap, and a
//! [`LaurentNum`] is an element of `F_{q^d}((pi))` known modulo `pi^abs_prec`.
//! Elements of the base field `F_q((pi))` are the series whose coefficients lie in the
//! subfield `F_q`.

use std::fmt;
use std::sync::Arc;

use thiserror::Error;

/// Absolute precision of a value whose stored expansion is exact.
pub const EXACT: i64 = i64::MAX / 4;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LaurentError {
    #[error("invalid field parameters: {0}")]
    InvalidField(String),
    #[error("precision exhausted: {0}")]
    PrecisionExhausted(String),
    #[error("division by a value that is zero to precision {0}")]
    DivisionByZeroToPrecision(i64),
}

/// Saturating precision addition: anything touching `EXACT` stays exact.
pub(crate) fn padd(a: i64, b: i64) -> i64 {
    if a >= EXACT || b >= EXACT {
        EXACT
    } else {
        (a + b).min(EXACT)
    }
}

/// A residue field element, encoded by the base-`p` digits of its coordinates in the
/// power basis of the field modulus.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug, Default)]
pub struct Fe(pub u16);

impl Fe {
    pub const ZERO: Fe = Fe(0);
    pub const ONE: Fe = Fe(1);

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }

    pub fn code(self) -> u32 {
        self.0 as u32
    }
}

/// The residue field `F_{q^d}`, `q = p^k`, with log/antilog tables.
#[derive(Debug)]
pub struct FieldSpec {
    p: u32,
    k: u32,
    d: u32,
    q: u32,
    size: u32,
    modulus: Vec<u32>,
    exp: Vec<u16>,
    log: Vec<u32>,
    add_table: Option<Vec<u16>>,
    base: Vec<Fe>,
}

fn is_prime(p: u32) -> bool {
    p >= 2 && (2..p).take_while(|d| d * d <= p).all(|d| !p.is_multiple_of(d))
}

fn digits_of(code: u32, p: u32, n: usize) -> Vec<u32> {
    let mut out = vec![0; n];
    let mut c = code;
    for slot in out.iter_mut() {
        *slot = c % p;
        c /= p;
    }
    out
}

fn code_of(digits: &[u32], p: u32) -> u32 {
    digits.iter().rev().fold(0, |acc, &d| acc * p + d)
}

impl FieldSpec {
    /// Builds `F_{p^{k d}}` from the smallest primitive monic modulus of degree `k d`.
    pub fn new(p: u32, k: u32, d: u32) -> Result<Self, LaurentError> {
        if !is_prime(p) {
            return Err(LaurentError::InvalidField(format!("p = {p} is not prime")));
        }
        if k == 0 || d == 0 {
            return Err(LaurentError::InvalidField("k and d must be positive".into()));
        }
        let n = (k * d) as usize;
        let size = (p as u64).checked_pow(k * d).filter(|&s| s <= 1 << 16).ok_or_else(|| {
            LaurentError::InvalidField(format!("field of order {p}^{} is too large", k * d))
        })? as u32;
        let q = p.pow(k);
        let order = size - 1;

        let mul_x = |digits: &[u32], modulus: &[u32]| -> Vec<u32> {
            let top = digits[n - 1];
            let mut out = vec![0u32; n];
            for i in (1..n).rev() {
                out[i] = digits[i - 1];
            }
            for i in 0..n {
                out[i] = (out[i] + (p - modulus[i]) * top) % p;
            }
            out
        };

        let mut found = None;
        for code in 0..size {
            let modulus = digits_of(code, p, n);
            if modulus[0] == 0 {
                continue;
            }
            let mut cur = digits_of(1, p, n);
            let mut powers = Vec::with_capacity(order as usize);
            let mut ok = true;
            for i in 0..order {
                let c = code_of(&cur, p);
                if i > 0 && c == 1 {
                    ok = false;
                    break;
                }
                powers.push(c as u16);
                cur = mul_x(&cur, &modulus);
            }
            if ok && code_of(&cur, p) == 1 {
                found = Some((modulus, powers));
                break;
            }
        }
        let (modulus, powers) = found.ok_or_else(|| {
            LaurentError::InvalidField(format!("no primitive modulus of degree {n} over F_{p}"))
        })?;

        let mut exp = powers.clone();
        exp.extend_from_slice(&powers);
        let mut log = vec![0u32; size as usize];
        for (i, &c) in powers.iter().enumerate() {
            log[c as usize] = i as u32;
        }

        let add_digits = |a: u32, b: u32| -> u32 {
            let da = digits_of(a, p, n);
            let db = digits_of(b, p, n);
            let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % p).collect();
            code_of(&s, p)
        };
        let add_table = if p != 2 && size <= 512 {
            let mut t = vec![0u16; (size * size) as usize];
            for a in 0..size {
                for b in 0..size {
                    t[(a * size + b) as usize] = add_digits(a, b) as u16;
                }
            }
            Some(t)
        } else {
            None
        };

        let mut spec = FieldSpec { p, k, d, q, size, modulus, exp, log, add_table, base: Vec::new() };
        let step = order / (q - 1);
        let mut base: Vec<Fe> = std::iter::once(Fe::ZERO)
            .chain((0..q - 1).map(|j| Fe(spec.exp[(j * step) as usize])))
            .collect();
        base.sort();
        spec.base = base;
        Ok(spec)
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    /// Degree of this residue field over `F_q`.
    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    pub fn size(&self) -> u32 {
        self.size
    }

    /// Coefficients `c_0 .. c_{n-1}` of the monic modulus `X^n + sum c_i X^i` over `F_p`.
    pub fn modulus(&self) -> &[u32] {
        &self.modulus
    }

    pub fn from_code(&self, code: u32) -> Option<Fe> {
        (code < self.size).then_some(Fe(code as u16))
    }

    /// Image of an integer in the prime field.
    pub fn from_int(&self, n: i64) -> Fe {
        Fe(n.rem_euclid(self.p as i64) as u16)
    }

    /// The primitive element (a root of the modulus).
    pub fn generator(&self) -> Fe {
        Fe(self.exp[1 % (self.size as usize - 1).max(1)])
    }

    pub fn elements(&self) -> impl Iterator<Item = Fe> {
        (0..self.size).map(|c| Fe(c as u16))
    }

    /// The `q` elements of the subfield `F_q`, sorted by code.
    pub fn base_elements(&self) -> &[Fe] {
        &self.base
    }

    pub fn in_base(&self, a: Fe) -> bool {
        self.base.binary_search(&a).is_ok()
    }

    #[inline]
    pub fn add(&self, a: Fe, b: Fe) -> Fe {
        if self.p == 2 {
            return Fe(a.0 ^ b.0);
        }
        if let Some(t) = &self.add_table {
            return Fe(t[a.0 as usize * self.size as usize + b.0 as usize]);
        }
        let n = (self.k * self.d) as usize;
        let da = digits_of(a.code(), self.p, n);
        let db = digits_of(b.code(), self.p, n);
        let s: Vec<u32> = da.iter().zip(&db).map(|(x, y)| (x + y) % self.p).collect();
        Fe(code_of(&s, self.p) as u16)
    }

    #[inline]
    pub fn neg(&self, a: Fe) -> Fe {
        if self.p == 2 || a.is_zero() {
            return a;
        }
        let n = (self.k * self.d) as usize;
        let da = digits_of(a.code(), self.p, n);
        let s: Vec<u32> = da.iter().map(|x| (self.p - x) % self.p).collect();
        Fe(code_of(&s, self.p) as u16)
    }

    #[inline]
    pub fn sub(&self, a: Fe, b: Fe) -> Fe {
        self.add(a, self.neg(b))
    }

    #[inline]
    pub fn mul(&self, a: Fe, b: Fe) -> Fe {
        if a.is_zero() || b.is_zero() {
            return Fe::ZERO;
        }
        if self.size == 2 {
            return Fe::ONE;
        }
        Fe(self.exp[(self.log[a.0 as usize] + self.log[b.0 as usize]) as usize])
    }

    pub fn inv(&self, a: Fe) -> Option<Fe> {
        if a.is_zero() {
            return None;
        }
        let order = self.size - 1;
        Some(Fe(self.exp[((order - self.log[a.0 as usize]) % order) as usize]))
    }

    pub fn pow(&self, a: Fe, e: u64) -> Fe {
        if e == 0 {
            return Fe::ONE;
        }
        if a.is_zero() {
            return Fe::ZERO;
        }
        let order = (self.size - 1) as u64;
        let l = (self.log[a.0 as usize] as u64 * (e % order)) % order;
        Fe(self.exp[l as usize])
    }

    /// Exponent `q^t mod (|F| - 1)`, for repeated use with [`FieldSpec::pow_reduced`].
    pub fn frob_exponent(&self, t: u64) -> u64 {
        let order = (self.size - 1) as u64;
        if order == 1 {
            return 1;
        }
        let mut result = 1u64;
        let mut base = self.q as u64 % order;
        let mut e = t;
        while e > 0 {
            if e & 1 == 1 {
                result = result * base % order;
            }
            base = base * base % order;
            e >>= 1;
        }
        if result == 0 {
            order
        } else {
            result
        }
    }

    #[inline]
    pub fn pow_reduced(&self, a: Fe, e: u64) -> Fe {
        if a.is_zero() {
            return Fe::ZERO;
        }
        let order = (self.size - 1) as u64;
        if order == 0 {
            return a;
        }
        Fe(self.exp[((self.log[a.0 as usize] as u64 * e) % order) as usize])
    }

    /// `a^{q^t}`.
    pub fn frob(&self, a: Fe, t: u64) -> Fe {
        if self.d == 1 {
            return a;
        }
        self.pow_reduced(a, self.frob_exponent(t))
    }

    /// Trace from `F_{q^d}` down to `F_q`.
    pub fn trace_to_base(&self, a: Fe) -> Fe {
        (0..self.d as u64).fold(Fe::ZERO, |acc, t| self.add(acc, self.frob(a, t)))
    }

    /// Norm from `F_{q^d}` down to `F_q`.
    pub fn norm_to_base(&self, a: Fe) -> Fe {
        (0..self.d as u64).fold(Fe::ONE, |acc, t| self.mul(acc, self.frob(a, t)))
    }
}

/// Residue field plus the working absolute precision cap.
#[derive(Debug)]
pub struct LocalField {
    residue: FieldSpec,
    cap: i64,
}

impl LocalField {
    pub fn new(p: u32, k: u32, d: u32, cap: i64) -> Result<Arc<Self>, LaurentError> {
        if cap <= 0 {
            return Err(LaurentError::InvalidField("precision cap must be positive".into()));
        }
        Ok(Arc::new(LocalField { residue: FieldSpec::new(p, k, d)?, cap }))
    }

    /// The same residue field with another precision cap.
    pub fn with_cap(&self, cap: i64) -> Result<Arc<Self>, LaurentError> {
        LocalField::new(self.residue.p, self.residue.k, self.residue.d, cap)
    }

    pub fn residue(&self) -> &FieldSpec {
        &self.residue
    }

    pub fn cap(&self) -> i64 {
        self.cap
    }

    pub fn q(&self) -> u32 {
        self.residue.q
    }

    pub fn p(&self) -> u32 {
        self.residue.p
    }
}

/// A Laurent series `sum a_i pi^i` over the residue field, known modulo `pi^abs_prec`.
///
/// Stored coefficients start at `v_min` and carry no leading or trailing zeros. An empty
/// coefficient vector is a value that is zero to precision; its `v_min` equals
/// `abs_prec`, which is then the only known lower bound for the valuation.
#[derive(Clone)]
pub struct LaurentNum {
    field: Arc<LocalField>,
    v_min: i64,
    coeffs: Vec<Fe>,
    abs_prec: i64,
}

impl LaurentNum {
    /// Builds a value from raw coefficients, normalizing zeros and applying the cap.
    pub fn from_coeffs(field: &Arc<LocalField>, v_min: i64, coeffs: Vec<Fe>, abs_prec: i64) -> Self {
        Self::normalize(field.clone(), v_min, coeffs, abs_prec)
    }

    fn normalize(field: Arc<LocalField>, v_min: i64, mut coeffs: Vec<Fe>, abs_prec: i64) -> Self {
        let cap = field.cap;
        let mut prec = abs_prec.min(EXACT);
        while coeffs.last().is_some_and(|c| c.is_zero()) {
            coeffs.pop();
        }
        if prec >= EXACT {
            if !coeffs.is_empty() && v_min + coeffs.len() as i64 > cap {
                prec = cap;
            }
        } else {
            prec = prec.min(cap);
        }
        if prec < EXACT {
            let keep = (prec - v_min).clamp(0, coeffs.len() as i64) as usize;
            coeffs.truncate(keep);
            while coeffs.last().is_some_and(|c| c.is_zero()) {
                coeffs.pop();
            }
        }
        let lead = coeffs.iter().position(|c| !c.is_zero());
        match lead {
            None => LaurentNum { field, v_min: prec, coeffs: Vec::new(), abs_prec: prec },
            Some(i) => {
                coeffs.drain(..i);
                LaurentNum { field, v_min: v_min + i as i64, coeffs, abs_prec: prec }
            }
        }
    }

    pub fn zero(field: &Arc<LocalField>, abs_prec: i64) -> Self {
        Self::normalize(field.clone(), abs_prec, Vec::new(), abs_prec)
    }

    pub fn exact_zero(field: &Arc<LocalField>) -> Self {
        Self::zero(field, EXACT)
    }

    pub fn one(field: &Arc<LocalField>) -> Self {
        Self::monomial(field, Fe::ONE, 0)
    }

    /// `c * pi^e`, exact.
    pub fn monomial(field: &Arc<LocalField>, c: Fe, e: i64) -> Self {
        Self::normalize(field.clone(), e, vec![c], EXACT)
    }

    pub fn pi_pow(field: &Arc<LocalField>, e: i64) -> Self {
        Self::monomial(field, Fe::ONE, e)
    }

    pub fn constant(field: &Arc<LocalField>, c: Fe) -> Self {
        Self::monomial(field, c, 0)
    }

    pub fn from_int(field: &Arc<LocalField>, n: i64) -> Self {
        Self::constant(field, field.residue.from_int(n))
    }

    /// Exact polynomial `sum digits[i] pi^i`.
    pub fn from_digits(field: &Arc<LocalField>, digits: &[Fe]) -> Self {
        Self::normalize(field.clone(), 0, digits.to_vec(), EXACT)
    }

    pub fn field(&self) -> &Arc<LocalField> {
        &self.field
    }

    pub fn res(&self) -> &FieldSpec {
        &self.field.residue
    }

    pub fn abs_prec(&self) -> i64 {
        self.abs_prec
    }

    pub fn is_exact(&self) -> bool {
        self.abs_prec >= EXACT
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Valuation, or `None` when the value is zero to precision.
    pub fn valuation(&self) -> Option<i64> {
        (!self.coeffs.is_empty()).then_some(self.v_min)
    }

    /// Lower bound for the valuation: the valuation itself, or the precision for zero.
    pub fn val_bound(&self) -> i64 {
        self.v_min
    }

    pub fn v_min(&self) -> i64 {
        self.v_min
    }

    pub fn coeffs(&self) -> &[Fe] {
        &self.coeffs
    }

    /// Coefficient of `pi^e` (zero outside the stored range).
    pub fn coeff(&self, e: i64) -> Fe {
        let i = e - self.v_min;
        if i < 0 || i >= self.coeffs.len() as i64 {
            Fe::ZERO
        } else {
            self.coeffs[i as usize]
        }
    }

    /// Coefficients of `pi^from .. pi^to` (exclusive).
    pub fn digits(&self, from: i64, to: i64) -> Vec<Fe> {
        (from..to).map(|e| self.coeff(e)).collect()
    }

    pub fn is_integral(&self) -> bool {
        self.v_min >= 0
    }

    /// Nonzero of valuation zero.
    pub fn is_unit(&self) -> bool {
        self.valuation() == Some(0)
    }

    /// All coefficients lie in the subfield `F_q`.
    pub fn in_base_field(&self) -> bool {
        self.coeffs.iter().all(|&c| self.res().in_base(c))
    }

    /// Number of nonzero stored coefficients.
    fn nnz(&self) -> usize {
        self.coeffs.iter().filter(|c| !c.is_zero()).count()
    }

    /// Reduces precision to at most `prec`.
    pub fn truncate(&self, prec: i64) -> Self {
        Self::normalize(self.field.clone(), self.v_min, self.coeffs.clone(), self.abs_prec.min(prec))
    }

    /// Same value over another field context with identical residue field.
    pub fn rebase(&self, field: &Arc<LocalField>) -> Self {
        Self::normalize(field.clone(), self.v_min, self.coeffs.clone(), self.abs_prec)
    }

    pub fn neg(&self) -> Self {
        let r = self.res();
        let coeffs = self.coeffs.iter().map(|&c| r.neg(c)).collect();
        LaurentNum { field: self.field.clone(), v_min: self.v_min, coeffs, abs_prec: self.abs_prec }
    }

    pub fn add(&self, other: &Self) -> Self {
        debug_assert!(Arc::ptr_eq(&self.field, &other.field) || self.field.cap == other.field.cap);
        let prec = self.abs_prec.min(other.abs_prec).min(EXACT);
        if self.coeffs.is_empty() {
            return other.truncate(prec);
        }
        if other.coeffs.is_empty() {
            return self.truncate(prec);
        }
        let lo = self.v_min.min(other.v_min);
        let end_a = self.v_min + self.coeffs.len() as i64;
        let end_b = other.v_min + other.coeffs.len() as i64;
        let mut hi = end_a.max(end_b);
        if prec < EXACT {
            hi = hi.min(prec).min(self.field.cap);
        } else {
            hi = hi.min(self.field.cap.max(lo));
        }
        if hi <= lo {
            return Self::zero(&self.field, prec);
        }
        let r = self.res();
        let mut out = vec![Fe::ZERO; (hi - lo) as usize];
        for (i, &c) in self.coeffs.iter().enumerate() {
            let e = self.v_min + i as i64;
            if e >= hi {
                break;
            }
            out[(e - lo) as usize] = c;
        }
        for (i, &c) in other.coeffs.iter().enumerate() {
            let e = other.v_min + i as i64;
            if e >= hi {
                break;
            }
            let slot = &mut out[(e - lo) as usize];
            *slot = r.add(*slot, c);
        }
        let p = if prec >= EXACT && end_a.max(end_b) > hi { hi } else { prec };
        Self::normalize(self.field.clone(), lo, out, p)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    pub fn scale(&self, c: Fe) -> Self {
        let r = self.res();
        if c.is_zero() {
            return Self::zero(&self.field, padd(self.abs_prec, 0));
        }
        let coeffs = self.coeffs.iter().map(|&a| r.mul(a, c)).collect();
        LaurentNum { field: self.field.clone(), v_min: self.v_min, coeffs, abs_prec: self.abs_prec }
    }

    /// Multiplication by `pi^k`.
    pub fn shift(&self, k: i64) -> Self {
        Self::normalize(self.field.clone(), self.v_min + k, self.coeffs.clone(), padd(self.abs_prec, k))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let prec = padd(self.abs_prec, other.v_min).min(padd(other.abs_prec, self.v_min));
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::zero(&self.field, prec);
        }
        let lo = self.v_min + other.v_min;
        let full_hi = lo + (self.coeffs.len() + other.coeffs.len()) as i64 - 1;
        let hi = if prec >= EXACT { full_hi.min(self.field.cap.max(lo)) } else { full_hi.min(prec.min(self.field.cap)) };
        if hi <= lo {
            return Self::zero(&self.field, prec.min(self.field.cap));
        }
        let len = (hi - lo) as usize;
        let r = self.res();
        let mut out = vec![Fe::ZERO; len];
        let (sparse, dense) = if self.nnz() <= other.nnz() { (self, other) } else { (other, self) };
        for (i, &a) in sparse.coeffs.iter().enumerate() {
            if a.is_zero() || i >= len {
                continue;
            }
            let lim = (len - i).min(dense.coeffs.len());
            if r.p == 2 && r.size == 2 {
                for (slot, &b) in out[i..i + lim].iter_mut().zip(&dense.coeffs[..lim]) {
                    slot.0 ^= b.0;
                }
            } else {
                for (slot, &b) in out[i..i + lim].iter_mut().zip(&dense.coeffs[..lim]) {
                    if !b.is_zero() {
                        *slot = r.add(*slot, r.mul(a, b));
                    }
                }
            }
        }
        let p = if prec >= EXACT && full_hi > hi { hi } else { prec };
        Self::normalize(self.field.clone(), lo, out, p)
    }

    pub fn inv(&self) -> Result<Self, LaurentError> {
        Self::one(&self.field).div(self)
    }

    pub fn div(&self, other: &Self) -> Result<Self, LaurentError> {
        if other.coeffs.is_empty() {
            return Err(LaurentError::DivisionByZeroToPrecision(other.abs_prec));
        }
        let vb = other.v_min;
        let rel_b = if other.is_exact() { EXACT } else { other.abs_prec - vb };
        let monomial_b = other.coeffs.len() == 1;
        if self.coeffs.is_empty() {
            let prec = padd(self.abs_prec, -vb);
            return Ok(Self::zero(&self.field, prec));
        }
        let va = self.v_min;
        let mut prec = padd(self.abs_prec, -vb).min(padd(rel_b, va - vb));
        let lo = va - vb;
        let cap = self.field.cap;
        let exact_result = prec >= EXACT && monomial_b;
        let hi = if exact_result {
            lo + self.coeffs.len() as i64
        } else {
            prec = prec.min(cap);
            prec
        };
        if hi <= lo {
            return Err(LaurentError::PrecisionExhausted(format!(
                "quotient has no representable coefficient (valuation {lo}, precision {prec})"
            )));
        }
        let r = self.res();
        let inv0 = r.inv(other.coeffs[0]).expect("leading coefficient is nonzero");
        let len = (hi - lo) as usize;
        let tail: Vec<(usize, Fe)> = other
            .coeffs
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, c)| !c.is_zero())
            .map(|(j, &c)| (j, c))
            .collect();
        let mut out = vec![Fe::ZERO; len];
        for kk in 0..len {
            let mut acc = if kk < self.coeffs.len() { self.coeffs[kk] } else { Fe::ZERO };
            for &(j, c) in &tail {
                if j > kk {
                    break;
                }
                let prev = out[kk - j];
                if !prev.is_zero() {
                    acc = r.sub(acc, r.mul(c, prev));
                }
            }
            out[kk] = r.mul(acc, inv0);
        }
        let p = if exact_result { EXACT } else { prec };
        Ok(Self::normalize(self.field.clone(), lo, out, p))
    }

    /// Integer power, negative exponents by inversion.
    pub fn pow(&self, n: i64) -> Result<Self, LaurentError> {
        if n < 0 {
            return self.inv()?.pow(-n);
        }
        let mut result = Self::one(&self.field);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        Ok(result)
    }

    /// The power map `x -> x^{q^t}`, which spreads exponents by `q^t`.
    pub fn frob_pow(&self, t: u32) -> Result<Self, LaurentError> {
        if t == 0 {
            return Ok(self.clone());
        }
        let q = self.field.q() as i128;
        let qt = q.checked_pow(t).unwrap_or(i128::MAX).min(EXACT as i128);
        let cap = self.field.cap as i128;
        let scale_prec = |p: i64| -> i64 {
            if p >= EXACT {
                EXACT
            } else {
                (p as i128 * qt).clamp(-(EXACT as i128), EXACT as i128) as i64
            }
        };
        let prec = scale_prec(self.abs_prec);
        if self.coeffs.is_empty() {
            return Ok(Self::zero(&self.field, prec));
        }
        let lo = self.v_min as i128 * qt;
        if lo >= cap {
            return Ok(Self::zero(&self.field, cap as i64));
        }
        if lo < -(1i128 << 40) {
            return Err(LaurentError::PrecisionExhausted(format!(
                "frobenius power q^{t} of a value of valuation {} is out of range",
                self.v_min
            )));
        }
        let r = self.res();
        let fe = r.frob_exponent(t as u64);
        let hi = (prec as i128).min(cap).min(lo + (self.coeffs.len() as i128 - 1) * qt + 1);
        let len = (hi - lo).max(0) as usize;
        let mut out = vec![Fe::ZERO; len];
        for (i, &c) in self.coeffs.iter().enumerate() {
            let pos = i as i128 * qt;
            if pos >= len as i128 {
                break;
            }
            out[pos as usize] = if r.d == 1 { c } else { r.pow_reduced(c, fe) };
        }
        let full_top = lo + (self.coeffs.len() as i128 - 1) * qt;
        let p = if prec >= EXACT && full_top >= hi { hi as i64 } else { prec };
        Ok(Self::normalize(self.field.clone(), lo as i64, out, p))
    }

    /// Coefficientwise `a -> a^{q^t}` (the arithmetic Frobenius of the unramified extension).
    pub fn galois(&self, t: u64) -> Self {
        let r = self.res();
        if r.d == 1 {
            return self.clone();
        }
        let e = r.frob_exponent(t);
        let coeffs = self.coeffs.iter().map(|&c| r.pow_reduced(c, e)).collect();
        LaurentNum { field: self.field.clone(), v_min: self.v_min, coeffs, abs_prec: self.abs_prec }
    }

    /// Coefficientwise residue trace to `F_q`: the trace of the unramified step.
    pub fn residue_trace_to_k(&self) -> Self {
        let r = self.res();
        let coeffs = self.coeffs.iter().map(|&c| r.trace_to_base(c)).collect();
        Self::normalize(self.field.clone(), self.v_min, coeffs, self.abs_prec)
    }

    /// Norm of the unramified step: the product of all Galois conjugates.
    pub fn residue_norm_to_k(&self) -> Self {
        let d = self.res().d as u64;
        (1..d).fold(self.clone(), |acc, t| acc.mul(&self.galois(t)))
    }

    /// Equality to the common precision; returns the precision of the comparison.
    pub fn eq_to_prec(&self, other: &Self) -> (bool, i64) {
        let diff = self.sub(other);
        (diff.is_zero(), diff.abs_prec)
    }
}

impl fmt::Debug for LaurentNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for LaurentNum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for (i, &c) in self.coeffs.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let e = self.v_min + i as i64;
            let mono = match e {
                0 => String::new(),
                1 => "pi".to_string(),
                _ => format!("pi^{e}"),
            };
            let term = match (c.0, mono.is_empty()) {
                (1, true) => "1".to_string(),
                (1, false) => mono,
                (code, true) => format!("[{code}]"),
                (code, false) => format!("[{code}]{mono}"),
            };
            terms.push(term);
        }
        if terms.is_empty() {
            terms.push("0".into());
        }
        if !self.is_exact() {
            terms.push(format!("O(pi^{})", self.abs_prec));
        }
        write!(f, "{}", terms.join(" + "))
    }
}

impl PartialEq for LaurentNum {
    /// Equality to common precision.
    fn eq(&self, other: &Self) -> bool {
        self.eq_to_prec(other).0
    }
}
