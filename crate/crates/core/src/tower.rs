//! The torsion tower `E^n = H(W^n)` of a Drinfeld module.
//!
//! Level `n` is `H[X]/(g_n)` with `g_n = P_(n m_0) / P_(n m_0 - 1)` Eisenstein of degree
//! `e_n = q^{n m_0 - 1}(q - 1)`; `v_n` is the class of `X`. Levels are linked by
//! `v_n -> rho_eta(v_{n+1})`, so `v_n` is a generator of `W^n` and `rho_pi^k(v_n)`
//! runs through the torsion chain.

use std::fmt;
use std::sync::Arc;

use num_rational::Ratio;

use crate::cache::Memo;
use crate::drinfeld::DrinfeldModule;
use crate::error::{Error, Result};
use crate::linalg::{self, Scalar};
use crate::poly::XPoly;
use crate::residue::{Fe, LaurentNum, LocalField, EXACT};
use crate::twisted::{FrobeniusModule, TwistedSeries};

/// One level `E^n = H[X]/(g_n)`.
pub struct TowerLevel {
    field: Arc<LocalField>,
    n: u32,
    e: usize,
    q: u32,
    m0: u32,
    g: XPoly,
    power_sums: Vec<LaurentNum>,
    v_inv: Vec<LaurentNum>,
}

impl fmt::Debug for TowerLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TowerLevel(n = {}, e = {}, g = {})", self.n, self.e, self.g)
    }
}

/// An element of a level in the power basis `1, v_n, ..., v_n^{e_n - 1}` over `H`.
#[derive(Clone)]
pub struct TowerElem {
    level: Arc<TowerLevel>,
    coords: Vec<LaurentNum>,
}

/// A lift `X^j U(X)` of a nonzero element, `U` a unit polynomial over `O_H`.
#[derive(Clone, Debug)]
pub struct SeriesLift {
    pub shift: i64,
    pub unit: XPoly,
}

impl TowerLevel {
    pub fn n(&self) -> u32 {
        self.n
    }

    /// Degree `e_n` over `H`.
    pub fn degree(&self) -> usize {
        self.e
    }

    pub fn field(&self) -> &Arc<LocalField> {
        &self.field
    }

    /// The Eisenstein minimal polynomial `g_n` of `v_n`.
    pub fn min_poly(&self) -> &XPoly {
        &self.g
    }

    /// `mu(v_n) = 1/e_n`.
    pub fn v_valuation(&self) -> Ratio<i64> {
        Ratio::new(1, self.e as i64)
    }

    /// `n m_0 - 1/(q - 1)`, the valuation of a generator of the different over `K`.
    pub fn different_valuation(&self) -> Ratio<i64> {
        Ratio::from_integer((self.n * self.m0) as i64) - Ratio::new(1, self.q as i64 - 1)
    }
}

fn level_elem(level: &Arc<TowerLevel>, mut coords: Vec<LaurentNum>) -> TowerElem {
    let zero = LaurentNum::exact_zero(&level.field);
    coords.resize(level.e, zero);
    TowerElem { level: level.clone(), coords }
}

impl TowerElem {
    pub fn from_coords(level: &Arc<TowerLevel>, coords: Vec<LaurentNum>) -> Result<Self> {
        if coords.len() > level.e {
            return Err(Error::ConsistencyFailure(format!(
                "{} coordinates for a level of degree {}",
                coords.len(),
                level.e
            )));
        }
        Ok(level_elem(level, coords))
    }

    pub fn constant(level: &Arc<TowerLevel>, c: LaurentNum) -> Self {
        level_elem(level, vec![c])
    }

    pub fn zero(level: &Arc<TowerLevel>) -> Self {
        level_elem(level, Vec::new())
    }

    pub fn one(level: &Arc<TowerLevel>) -> Self {
        Self::constant(level, LaurentNum::one(&level.field))
    }

    /// The generator `v_n`.
    pub fn v(level: &Arc<TowerLevel>) -> Self {
        if level.e == 1 {
            // X = -g_0 when g is linear.
            return Self::constant(level, level.g.coeff(0).neg());
        }
        let mut coords = vec![LaurentNum::exact_zero(&level.field), LaurentNum::one(&level.field)];
        coords.truncate(level.e);
        level_elem(level, coords)
    }

    /// `v_n^j` for any integer `j`.
    pub fn v_pow(level: &Arc<TowerLevel>, j: i64) -> Self {
        let base = if j >= 0 { Self::v(level) } else { level_elem(level, level.v_inv.clone()) };
        base.pow(j.unsigned_abs())
    }

    pub fn level(&self) -> &Arc<TowerLevel> {
        &self.level
    }

    pub fn coords(&self) -> &[LaurentNum] {
        &self.coords
    }

    pub fn field(&self) -> &Arc<LocalField> {
        &self.level.field
    }

    fn same_level(&self, other: &Self) {
        debug_assert!(Arc::ptr_eq(&self.level, &other.level), "operands at different levels");
    }

    pub fn add(&self, other: &Self) -> Self {
        self.same_level(other);
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a.add(b)).collect();
        TowerElem { level: self.level.clone(), coords }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.same_level(other);
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| a.sub(b)).collect();
        TowerElem { level: self.level.clone(), coords }
    }

    pub fn neg(&self) -> Self {
        TowerElem { level: self.level.clone(), coords: self.coords.iter().map(|c| c.neg()).collect() }
    }

    /// Multiplication by an element of `H`.
    pub fn scale(&self, c: &LaurentNum) -> Self {
        TowerElem { level: self.level.clone(), coords: self.coords.iter().map(|a| a.mul(c)).collect() }
    }

    pub fn mul(&self, other: &Self) -> Self {
        self.same_level(other);
        let e = self.level.e;
        let field = &self.level.field;
        if e == 1 {
            return level_elem(&self.level, vec![self.coords[0].mul(&other.coords[0])]);
        }
        let mut prod = vec![LaurentNum::exact_zero(field); 2 * e - 1];
        for (i, a) in self.coords.iter().enumerate() {
            if a.is_zero() && a.is_exact() {
                continue;
            }
            for (j, b) in other.coords.iter().enumerate() {
                if b.is_zero() && b.is_exact() {
                    continue;
                }
                prod[i + j] = prod[i + j].add(&a.mul(b));
            }
        }
        for k in (e..2 * e - 1).rev() {
            let c = std::mem::replace(&mut prod[k], LaurentNum::exact_zero(field));
            if c.is_zero() && c.is_exact() {
                continue;
            }
            for i in 0..e {
                let gi = &self.level.g.coeffs()[i];
                if gi.is_zero() && gi.is_exact() {
                    continue;
                }
                prod[k - e + i] = prod[k - e + i].sub(&c.mul(gi));
            }
        }
        prod.truncate(e);
        TowerElem { level: self.level.clone(), coords: prod }
    }

    pub fn pow(&self, k: u64) -> Self {
        let mut result = Self::one(&self.level);
        let mut base = self.clone();
        let mut e = k;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// `true` when every coordinate is zero to precision.
    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    /// Precision as a valuation: the element is known modulo `{mu >= prec_bound}`.
    pub fn prec_bound(&self) -> Ratio<i64> {
        let e = self.level.e as i64;
        self.coords
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_exact())
            .map(|(i, c)| Ratio::new(c.abs_prec() * e + i as i64, e))
            .min()
            .unwrap_or(Ratio::from_integer(EXACT))
    }

    /// Valuation normalized by `mu(pi) = 1`, or `None` when zero to precision.
    pub fn valuation(&self) -> Result<Option<Ratio<i64>>> {
        let e = self.level.e as i64;
        let mut nonzero: Option<Ratio<i64>> = None;
        for (i, c) in self.coords.iter().enumerate() {
            if let Some(v) = c.valuation() {
                let val = Ratio::new(v * e + i as i64, e);
                if nonzero.is_none_or(|b| val < b) {
                    nonzero = Some(val);
                }
            }
        }
        let bound = self.prec_bound();
        match nonzero {
            None => Ok(None),
            Some(v) if v < bound => Ok(Some(v)),
            Some(v) => Err(Error::PrecisionExhausted(format!(
                "valuation candidate {v} is not below the precision {bound}"
            ))),
        }
    }

    /// Valuation of an element that must be nonzero to precision.
    pub fn val(&self) -> Result<Ratio<i64>> {
        self.valuation()?.ok_or_else(|| Error::ZeroToPrecision(self.prec_bound().floor().to_integer()))
    }

    pub fn is_integral(&self) -> bool {
        self.coords.iter().all(|c| c.is_integral())
    }

    /// Equality to the common precision.
    pub fn eq_to_prec(&self, other: &Self) -> bool {
        self.sub(other).is_zero()
    }

    /// Drops information below valuation `bound`.
    pub fn truncate_val(&self, bound: Ratio<i64>) -> Self {
        let e = self.level.e as i64;
        let coords = self
            .coords
            .iter()
            .enumerate()
            .map(|(i, c)| {
                if bound >= Ratio::from_integer(EXACT / 2) {
                    c.clone()
                } else {
                    c.truncate((bound - Ratio::new(i as i64, e)).ceil().to_integer())
                }
            })
            .collect();
        TowerElem { level: self.level.clone(), coords }
    }

    /// Inverse: `x = v^j w` with `w` a unit inverted by Newton iteration.
    pub fn inv(&self) -> Result<Self> {
        let v = self.val()?;
        let j = (v * self.level.e as i64).to_integer();
        let w = self.mul(&Self::v_pow(&self.level, -j));
        let w0 = w.coords[0].clone();
        if !w0.is_unit() {
            return Err(Error::ConsistencyFailure(format!("unit part has constant coordinate {w0}")));
        }
        let one = Self::one(&self.level);
        let mut y = Self::constant(&self.level, w0.inv()?);
        let mut settled = false;
        for _ in 0..80 {
            let r = one.sub(&w.mul(&y));
            if r.is_zero() {
                settled = true;
                break;
            }
            y = y.add(&y.mul(&r));
        }
        if !settled {
            return Err(Error::PrecisionExhausted("Newton inversion did not settle".into()));
        }
        Ok(y.mul(&Self::v_pow(&self.level, -j)))
    }

    pub fn div(&self, other: &Self) -> Result<Self> {
        Ok(self.mul(&other.inv()?))
    }

    /// `T_{E^n|H}` through the Newton power sums of `g_n`.
    pub fn trace_to_h(&self) -> LaurentNum {
        self.coords
            .iter()
            .zip(&self.level.power_sums)
            .fold(LaurentNum::exact_zero(&self.level.field), |acc, (c, s)| acc.add(&c.mul(s)))
    }

    /// `T_{E^n|K} = T_{H|K} o T_{E^n|H}`.
    pub fn trace_to_k(&self) -> LaurentNum {
        self.trace_to_h().residue_trace_to_k()
    }

    /// Matrix of multiplication by `self` in the power basis (column `i` is `self v^i`).
    fn mult_matrix(&self) -> Vec<Vec<LaurentNum>> {
        let e = self.level.e;
        let v = Self::v(&self.level);
        let mut col = self.clone();
        let mut cols = Vec::with_capacity(e);
        for i in 0..e {
            if i > 0 {
                col = col.mul(&v);
            }
            cols.push(col.coords.clone());
        }
        (0..e).map(|r| (0..e).map(|c| cols[c][r].clone()).collect()).collect()
    }

    /// `N_{E^n|H}` as the determinant of multiplication.
    pub fn norm_to_h(&self) -> Result<LaurentNum> {
        if self.level.e == 1 {
            return Ok(self.coords[0].clone());
        }
        linalg::determinant(self.mult_matrix())
    }

    pub fn norm_to_k(&self) -> Result<LaurentNum> {
        Ok(self.norm_to_h()?.residue_norm_to_k())
    }

    /// Evaluates an `X`-polynomial at this element.
    pub fn eval_poly(&self, f: &XPoly) -> Self {
        f.coeffs()
            .iter()
            .rev()
            .fold(Self::zero(&self.level), |acc, c| acc.mul(self).add(&Self::constant(&self.level, c.clone())))
    }

    /// `T(self)` with the residue-field coordinate representation `[c]` used for display.
    fn fmt_coords(&self) -> String {
        let parts: Vec<String> = self
            .coords
            .iter()
            .enumerate()
            .filter(|(_, c)| !c.is_zero())
            .map(|(i, c)| match i {
                0 => format!("({c})"),
                1 => format!("({c})v"),
                _ => format!("({c})v^{i}"),
            })
            .collect();
        if parts.is_empty() {
            format!("0 [prec {}]", self.prec_bound())
        } else {
            parts.join(" + ")
        }
    }
}

impl fmt::Debug for TowerElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for TowerElem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.fmt_coords())
    }
}

impl FrobeniusModule for TowerElem {
    fn frob_q(&self) -> Result<Self> {
        Ok(self.pow(self.level.q as u64))
    }

    fn scale(&self, c: &LaurentNum) -> Self {
        TowerElem::scale(self, c)
    }

    fn add(&self, other: &Self) -> Self {
        TowerElem::add(self, other)
    }

    fn valuation(&self) -> Result<Option<Ratio<i64>>> {
        TowerElem::valuation(self)
    }

    fn truncate_val(&self, bound: Ratio<i64>) -> Self {
        TowerElem::truncate_val(self, bound)
    }
}

impl Scalar for TowerElem {
    fn add(&self, other: &Self) -> Self {
        TowerElem::add(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        TowerElem::sub(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        TowerElem::mul(self, other)
    }
    fn div(&self, other: &Self) -> Result<Self> {
        TowerElem::div(self, other)
    }
    fn neg(&self) -> Self {
        TowerElem::neg(self)
    }
    fn val(&self) -> Result<Option<Ratio<i64>>> {
        self.valuation()
    }
}

/// The basis `v_n^j w^k` of level `n` over level `m`, `w` the image of `v_m`.
struct RelativeBasis {
    rel_degree: usize,
    lower_degree: usize,
    /// Maps power-basis coordinates to basis coordinates, index `k * rel_degree + j`.
    to_basis: Vec<Vec<LaurentNum>>,
}

/// The tower of a fixed module, with levels built on demand and cached.
pub struct Tower {
    module: Arc<DrinfeldModule>,
    levels: Memo<u32, TowerLevel>,
    embeddings: Memo<(u32, u32), Vec<TowerElem>>,
    relative: Memo<(u32, u32), RelativeBasis>,
    torsion: Memo<u32, Vec<TowerElem>>,
}

impl fmt::Debug for Tower {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Tower({:?})", self.module)
    }
}

impl Tower {
    pub fn new(module: Arc<DrinfeldModule>) -> Self {
        Tower {
            module,
            levels: Memo::new(),
            embeddings: Memo::new(),
            relative: Memo::new(),
            torsion: Memo::new(),
        }
    }

    pub fn module(&self) -> &Arc<DrinfeldModule> {
        &self.module
    }

    pub fn field(&self) -> &Arc<LocalField> {
        self.module.field()
    }

    /// `e_n = q^{n m_0 - 1}(q - 1)`.
    pub fn expected_degree(&self, n: u32) -> usize {
        let q = self.module.q() as usize;
        q.pow(n * self.module.m0() - 1) * (q - 1)
    }

    /// Level `n >= 1`, built once.
    pub fn level(&self, n: u32) -> Result<Arc<TowerLevel>> {
        if n == 0 {
            return Err(Error::ConsistencyFailure("levels start at n = 1".into()));
        }
        self.levels.get_or_build(n, || self.build_level(n))
    }

    fn build_level(&self, n: u32) -> Result<TowerLevel> {
        let module = &self.module;
        let field = module.field().clone();
        let top = n * module.m0();
        let upper = module.prepared(top)?;
        let lower = module.prepared(top - 1)?;
        let g = upper.additive.exact_div(&lower.additive)?;
        let e = self.expected_degree(n);
        if g.degree() != Some(e) {
            return Err(Error::NotEisenstein(format!("g_{n} has degree {:?}, expected {e}", g.degree())));
        }
        if !g.coeff(e).eq_to_prec(&LaurentNum::one(&field)).0 {
            return Err(Error::NotEisenstein(format!("g_{n} is not monic")));
        }
        if let Some((i, c)) = g.coeffs()[..e].iter().enumerate().find(|(_, c)| c.val_bound() < 1) {
            return Err(Error::NotEisenstein(format!("coefficient {c} of X^{i} is not in p_H")));
        }
        if g.coeff(0).valuation() != Some(1) {
            return Err(Error::NotEisenstein(format!("constant term {} is not a prime of H", g.coeff(0))));
        }
        let level = Arc::new(finish_level(TowerLevel {
            field,
            n,
            e,
            q: module.q(),
            m0: module.m0(),
            g,
            power_sums: Vec::new(),
            v_inv: Vec::new(),
        }));
        different_generator(&level)?;
        Ok(Arc::try_unwrap(level).expect("no outstanding references"))
    }

    /// Images of `1, y, ..., y^{e_n - 1}` at level `m`, `y = rho_{eta^{m-n}}(v_m)`.
    fn embedding_powers(&self, n: u32, m: u32) -> Result<Arc<Vec<TowerElem>>> {
        self.embeddings.get_or_build((n, m), || {
            let lower = self.level(n)?;
            let upper = self.level(m)?;
            let rho = self.module.rho_eta_pow(m - n)?;
            let y = rho.evaluate(&TowerElem::v(&upper))?;
            let check = y.eval_poly(lower.min_poly());
            if !check.is_zero() {
                return Err(Error::ConsistencyFailure(format!(
                    "image of v_{n} at level {m} is not a root of g_{n}: residual {check}"
                )));
            }
            let mut powers = vec![TowerElem::one(&upper)];
            for _ in 1..lower.e {
                let next = powers.last().expect("nonempty").mul(&y);
                powers.push(next);
            }
            Ok(powers)
        })
    }

    /// Ring embedding of level `n` into level `m >= n`, `v_n -> rho_{eta^{m-n}}(v_m)`.
    pub fn embed(&self, x: &TowerElem, m: u32) -> Result<TowerElem> {
        let n = x.level.n;
        if m < n {
            return Err(Error::ConsistencyFailure(format!("cannot embed level {n} into level {m}")));
        }
        if m == n {
            return Ok(x.clone());
        }
        let powers = self.embedding_powers(n, m)?;
        let upper = self.level(m)?;
        Ok(x.coords
            .iter()
            .zip(powers.iter())
            .fold(TowerElem::zero(&upper), |acc, (c, p)| acc.add(&p.scale(c))))
    }

    /// Embeds an element of `H` at level `n`.
    pub fn constant(&self, c: LaurentNum, n: u32) -> Result<TowerElem> {
        Ok(TowerElem::constant(&self.level(n)?, c))
    }

    fn relative_basis(&self, n: u32, m: u32) -> Result<Arc<RelativeBasis>> {
        self.relative.get_or_build((n, m), || {
            let upper = self.level(n)?;
            let lower = self.level(m)?;
            let d = upper.e / lower.e;
            let w_pows = self.embedding_powers(m, n)?;
            let v = TowerElem::v(&upper);
            let mut v_pows = vec![TowerElem::one(&upper)];
            for _ in 1..d {
                let next = v_pows.last().expect("nonempty").mul(&v);
                v_pows.push(next);
            }
            let e = upper.e;
            let mut cols = Vec::with_capacity(e);
            for k in 0..lower.e {
                for vj in &v_pows {
                    cols.push(vj.mul(&w_pows[k]).coords);
                }
            }
            let matrix: Vec<Vec<LaurentNum>> = (0..e).map(|r| (0..e).map(|c| cols[c][r].clone()).collect()).collect();
            let field = upper.field.clone();
            let to_basis = linalg::inverse(&matrix, &LaurentNum::exact_zero(&field), &LaurentNum::one(&field))?;
            Ok(RelativeBasis { rel_degree: d, lower_degree: lower.e, to_basis })
        })
    }

    /// Coordinates of `x` over level `m`: `x = sum_j a_j v_n^j` with `a_j` at level `m`.
    pub fn relative_coords(&self, x: &TowerElem, m: u32) -> Result<Vec<TowerElem>> {
        let n = x.level.n;
        let basis = self.relative_basis(n, m)?;
        let lower = self.level(m)?;
        let field = x.field();
        let flat: Vec<LaurentNum> = basis
            .to_basis
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&x.coords)
                    .fold(LaurentNum::exact_zero(field), |acc, (a, b)| acc.add(&a.mul(b)))
            })
            .collect();
        (0..basis.rel_degree)
            .map(|j| {
                let coords = (0..basis.lower_degree).map(|k| flat[k * basis.rel_degree + j].clone()).collect();
                TowerElem::from_coords(&lower, coords)
            })
            .collect()
    }

    /// Matrix over level `m` of multiplication by `x` in the basis `v_n^j`.
    fn relative_matrix(&self, x: &TowerElem, m: u32) -> Result<Vec<Vec<TowerElem>>> {
        let n = x.level.n;
        let d = self.relative_basis(n, m)?.rel_degree;
        let v = TowerElem::v(&x.level);
        let mut col = x.clone();
        let mut cols = Vec::with_capacity(d);
        for j in 0..d {
            if j > 0 {
                col = col.mul(&v);
            }
            cols.push(self.relative_coords(&col, m)?);
        }
        Ok((0..d).map(|r| (0..d).map(|c| cols[c][r].clone()).collect()).collect())
    }

    /// `T_{E^n|E^m}` for `m <= n`.
    pub fn trace_to_level(&self, x: &TowerElem, m: u32) -> Result<TowerElem> {
        if m == x.level.n {
            return Ok(x.clone());
        }
        let mat = self.relative_matrix(x, m)?;
        let lower = self.level(m)?;
        Ok(mat.iter().enumerate().fold(TowerElem::zero(&lower), |acc, (i, row)| acc.add(&row[i])))
    }

    /// `N_{E^n|E^m}` for `m <= n`.
    pub fn norm_to_level(&self, x: &TowerElem, m: u32) -> Result<TowerElem> {
        if m == x.level.n {
            return Ok(x.clone());
        }
        let mat = self.relative_matrix(x, m)?;
        linalg::determinant(mat)
    }

    /// `t_k = rho_{pi^k}(v_n)` for `k < n m_0`.
    pub fn torsion_chain(&self, n: u32) -> Result<Arc<Vec<TowerElem>>> {
        self.torsion.get_or_build(n, || {
            let level = self.level(n)?;
            let big_n = (n * self.module.m0()) as usize;
            let mut chain = vec![TowerElem::v(&level)];
            for _ in 1..big_n {
                let next = self.module.rho_pi().evaluate(chain.last().expect("nonempty"))?;
                chain.push(next);
            }
            let last = self.module.rho_pi().evaluate(chain.last().expect("nonempty"))?;
            if !last.is_zero() {
                return Err(Error::ConsistencyFailure(format!("rho_pi^{big_n}(v_{n}) = {last} is not zero")));
            }
            Ok(chain)
        })
    }

    /// `rho_a(v_n) = sum a_k t_k` for `a = sum a_k pi^k` mod `eta^n`.
    pub fn realize(&self, n: u32, digits: &[Fe]) -> Result<TowerElem> {
        let chain = self.torsion_chain(n)?;
        let level = self.level(n)?;
        let mut acc = TowerElem::zero(&level);
        for (d, t) in digits.iter().zip(chain.iter()) {
            if !d.is_zero() {
                acc = acc.add(&t.scale(&LaurentNum::constant(level.field(), *d)));
            }
        }
        Ok(acc)
    }

    /// Checks `rho_{eta^n}(w) = 0`.
    pub fn check_torsion(&self, w: &TowerElem) -> Result<()> {
        let n = w.level.n;
        let kill = self.module.rho_pi_power((n * self.module.m0()) as usize)?;
        let img = kill.evaluate(w)?;
        if img.is_zero() {
            Ok(())
        } else {
            Err(Error::NotTorsion(format!("rho_(eta^{n}) of {w} is {img}")))
        }
    }

    /// `rho_a(w)` for torsion `w`, `a` given by its `pi`-digits.
    pub fn torsion_action(&self, digits: &[Fe], w: &TowerElem) -> Result<TowerElem> {
        self.check_torsion(w)?;
        let big_n = (w.level.n * self.module.m0()) as usize;
        let rho = self.module.rho_of_digits(&digits[..digits.len().min(big_n)])?;
        rho.evaluate(w)
    }

    /// The digits of the unique `a` mod `eta^n` with `rho_a(v_n) = w`.
    pub fn torsion_dlog(&self, w: &TowerElem) -> Result<Vec<Fe>> {
        let n = w.level.n;
        self.check_torsion(w)?;
        let chain = self.torsion_chain(n)?;
        let big_n = chain.len();
        let top = &chain[big_n - 1];
        let field = w.field().clone();
        let base = field.residue().base_elements().to_vec();
        let mut digits = Vec::with_capacity(big_n);
        let mut rest = w.clone();
        for k in 0..big_n {
            let y = self.module.rho_pi_power(big_n - 1 - k)?.evaluate(&rest)?;
            let matches: Vec<Fe> = base
                .iter()
                .copied()
                .filter(|&c| y.sub(&top.scale(&LaurentNum::constant(&field, c))).is_zero())
                .collect();
            let digit = match matches.as_slice() {
                [d] => *d,
                [] => return Err(Error::NotTorsion(format!("no digit matches at position {k}"))),
                _ => return Err(Error::AmbiguousDigit(k)),
            };
            if !digit.is_zero() {
                rest = rest.sub(&chain[k].scale(&LaurentNum::constant(&field, digit)));
            }
            digits.push(digit);
        }
        Ok(digits)
    }

    /// `rho_a(x)` for an arbitrary point `x` of positive valuation and integral `a` in `K`,
    /// summing `a_k rho_pi^k(x)` until the iterates vanish to precision.
    pub fn apply_rho(&self, a: &LaurentNum, x: &TowerElem) -> Result<TowerElem> {
        let field = x.field().clone();
        if !a.is_integral() || !a.in_base_field() {
            return Err(Error::InvalidModule(format!("{a} is not an element of O")));
        }
        let mut acc = TowerElem::zero(&x.level);
        let mut y = x.clone();
        let mut k: i64 = 0;
        loop {
            if y.is_zero() {
                return Ok(acc);
            }
            if k >= a.abs_prec() {
                return Ok(acc.truncate_val(y.val()?));
            }
            if a.is_exact() && k >= a.v_min() + a.coeffs().len() as i64 {
                return Ok(acc);
            }
            let c = a.coeff(k);
            if !c.is_zero() {
                acc = acc.add(&y.scale(&LaurentNum::constant(&field, c)));
            }
            y = self.module.rho_pi().evaluate(&y)?;
            k += 1;
            if k > 4 * field.cap() + 64 {
                return Err(Error::PrecisionExhausted("iterates of rho_pi do not vanish".into()));
            }
        }
    }

    /// Canonical lift `X^j U(X)` of a nonzero `beta`, `U` read from the coordinates of
    /// `beta v_n^{-j}`.
    pub fn lift_to_series(&self, beta: &TowerElem) -> Result<SeriesLift> {
        let level = &beta.level;
        let v = beta.val()?;
        let j = (v * level.e as i64).to_integer();
        let unit = beta.mul(&TowerElem::v_pow(level, -j));
        if !unit.is_integral() {
            return Err(Error::NonIntegralUnitPart);
        }
        Ok(SeriesLift { shift: j, unit: XPoly::new(level.field(), unit.coords) })
    }
}

fn finish_level(mut level: TowerLevel) -> TowerLevel {
    let e = level.e;
    let field = level.field.clone();
    let res = field.residue();
    let g = &level.g;
    let a = |i: usize| g.coeff(i);
    let mut power_sums = vec![LaurentNum::constant(&field, res.from_int(e as i64))];
    for k in 1..e {
        let mut acc = a(e - k).scale(res.from_int(k as i64));
        for j in 1..k {
            acc = acc.add(&a(e - j).mul(&power_sums[k - j]));
        }
        power_sums.push(acc.neg());
    }
    let g0_inv = g.coeff(0).inv().expect("Eisenstein constant term is nonzero");
    let v_inv = (1..=e).map(|i| g.coeff(i).mul(&g0_inv).neg()).collect();
    level.power_sums = power_sums;
    level.v_inv = v_inv;
    level
}

/// `g_n'(v_n)` and its valuation, which must equal `n m_0 - 1/(q-1)`.
pub fn different_generator(level: &Arc<TowerLevel>) -> Result<(TowerElem, Ratio<i64>)> {
    let d = TowerElem::v(level).eval_poly(&level.g.derivative());
    let val = d.val()?;
    let expected = level.different_valuation();
    if val != expected {
        return Err(Error::ConsistencyFailure(format!(
            "different generator of level {} has valuation {val}, expected {expected}",
            level.n
        )));
    }
    Ok((d, val))
}

impl SeriesLift {
    /// `f(v_n)`.
    pub fn eval(&self, level: &Arc<TowerLevel>) -> TowerElem {
        TowerElem::v(level).eval_poly(&self.unit).mul(&TowerElem::v_pow(level, self.shift))
    }

    /// Logarithmic derivative `f'/f` at `v_n`: `j v^{-1} + U'(v) / U(v)`.
    pub fn log_derivative(&self, level: &Arc<TowerLevel>) -> Result<TowerElem> {
        let v = TowerElem::v(level);
        let u_val = v.eval_poly(&self.unit);
        let du = v.eval_poly(&self.unit.derivative());
        let mut out = du.div(&u_val)?;
        if self.shift != 0 {
            let j = LaurentNum::from_int(level.field(), self.shift);
            out = out.add(&TowerElem::v_pow(level, -1).scale(&j));
        }
        Ok(out)
    }

    /// The perturbed lift `X^j (U + g_n t)`, another lift of the same element.
    pub fn perturbed(&self, level: &Arc<TowerLevel>, t: &XPoly) -> SeriesLift {
        SeriesLift { shift: self.shift, unit: self.unit.add(&level.g.mul(t)) }
    }
}

/// Evaluates a twisted series at a point, with the `TowerElem` instance made explicit.
pub fn tw_evaluate(f: &TwistedSeries, x: &TowerElem) -> Result<TowerElem> {
    f.evaluate(x)
}
