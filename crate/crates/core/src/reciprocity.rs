//! The explicit pairing `[alpha, beta]_n = eta^{-n} T_{L|K}(lambda(alpha) delta_n(beta)) . v_n`
//! on a tower level `L = E^n`, and the independent routes it is checked against.
//!
//! A value of `W^n` is stored through its coordinate `a mod eta^n` with respect to `v_n`,
//! as `n m_0` digits of `a` in `pi`.

use std::sync::Arc;

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::linalg::{self, SmithSolution};
use crate::residue::{Fe, LaurentNum};
use crate::tower::{different_generator, SeriesLift, Tower, TowerElem, TowerLevel};
use crate::twisted::{InvertMode, TailBound, TwistedSeries};
use crate::DrinfeldModule;

/// `2/(q-1)`: the log form of the pairing is defined from this valuation on.
pub fn log_threshold(q: u32) -> Ratio<i64> {
    Ratio::new(2, q as i64 - 1)
}

/// `n m_0 / q + 1/(q-1) + 1/(q^{n m_0}(q-1))`: the log-free form and the main theorem
/// apply from this valuation on.
pub fn theorem_threshold(q: u32, n: u32, m0: u32) -> Ratio<i64> {
    let q = q as i64;
    let big_n = n * m0;
    Ratio::new(big_n as i64, q) + Ratio::new(1, q - 1) + Ratio::new(1, q.pow(big_n) * (q - 1))
}

/// `n m_0 + 1/(q-1)`: the pairing vanishes strictly above this valuation.
pub fn vanishing_bound(q: u32, n: u32, m0: u32) -> Ratio<i64> {
    Ratio::from_integer((n * m0) as i64) + Ratio::new(1, q as i64 - 1)
}

/// `q/(q-1) (2n + 1/(2 m_0))`: the level `m` from which the prime-case route is asserted.
pub fn lhs_threshold(q: u32, n: u32, m0: u32) -> Ratio<i64> {
    let q = q as i64;
    Ratio::new(q, q - 1) * (Ratio::from_integer(2 * n as i64) + Ratio::new(1, 2 * m0 as i64))
}

/// Whether `x` lies in the fractional ideal `{mu >= bound}` of its level.
pub fn in_ideal(x: &TowerElem, bound: Ratio<i64>) -> Result<bool> {
    if x.prec_bound() < bound {
        return Err(Error::PrecisionExhausted(format!(
            "element known only modulo valuation {}, membership at {bound} undecided",
            x.prec_bound()
        )));
    }
    Ok(x.truncate_val(bound).is_zero())
}

/// Membership in the different `D_n` of `E^n | K`.
pub fn in_different(x: &TowerElem) -> Result<bool> {
    in_ideal(x, x.level().different_valuation())
}

/// `delta_n(beta)`, a class of `p^{-1} / D_n`.
#[derive(Clone, Debug)]
pub struct DeltaValue {
    representative: TowerElem,
    modulus: TowerElem,
}

impl DeltaValue {
    pub fn n(&self) -> u32 {
        self.representative.level().n()
    }

    pub fn representative(&self) -> &TowerElem {
        &self.representative
    }

    /// The generator `g_n'(v_n)` of `D_n`.
    pub fn modulus(&self) -> &TowerElem {
        &self.modulus
    }

    /// Congruence with a representative mod `D_n`.
    pub fn congruent_to(&self, x: &TowerElem) -> Result<bool> {
        in_different(&self.representative.sub(x))
    }

    pub fn congruent(&self, other: &DeltaValue) -> Result<bool> {
        self.congruent_to(&other.representative)
    }
}

/// `delta_n(beta) = f'(v_n) / beta mod D_n` through the canonical lift `f` of `beta`.
pub fn delta(tower: &Tower, beta: &TowerElem) -> Result<DeltaValue> {
    let lift = tower.lift_to_series(beta)?;
    delta_of_lift(beta.level(), &lift)
}

/// `f'/f (v_n) mod D_n` for a given lift `f`.
pub fn delta_of_lift(level: &Arc<TowerLevel>, lift: &SeriesLift) -> Result<DeltaValue> {
    let representative = lift.log_derivative(level)?;
    if let Some(v) = representative.valuation()? {
        if v < -level.v_valuation() {
            return Err(Error::ConsistencyFailure(format!("delta has valuation {v} below -1/e_n")));
        }
    }
    let (modulus, _) = different_generator(level)?;
    Ok(DeltaValue { representative, modulus })
}

/// A value `a . v_n` of `W^n`, stored through `a mod eta^n`.
#[derive(Clone, Debug)]
pub struct PairingValue {
    n: u32,
    coord: Vec<Fe>,
    realization: TowerElem,
}

impl PairingValue {
    /// The value with coordinate `digits` (padded or cut to `n m_0` digits).
    pub fn from_coord(tower: &Tower, n: u32, digits: &[Fe]) -> Result<Self> {
        let big_n = (n * tower.module().m0()) as usize;
        let mut coord: Vec<Fe> = digits.iter().copied().take(big_n).collect();
        coord.resize(big_n, Fe::ZERO);
        let realization = tower.realize(n, &coord)?;
        Ok(PairingValue { n, coord, realization })
    }

    /// The value `a . v_n` for `a` in `O`, known at least mod `pi^{n m_0}`.
    pub fn from_scalar(tower: &Tower, n: u32, a: &LaurentNum) -> Result<Self> {
        let big_n = (n * tower.module().m0()) as i64;
        if !a.is_integral() || !a.in_base_field() {
            return Err(Error::ConsistencyFailure(format!("coordinate {a} is not an element of O")));
        }
        if a.abs_prec() < big_n {
            return Err(Error::PrecisionExhausted(format!(
                "coordinate {a} is needed mod pi^{big_n}"
            )));
        }
        Self::from_coord(tower, n, &a.digits(0, big_n))
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// The `pi`-digits of the coordinate.
    pub fn coord(&self) -> &[Fe] {
        &self.coord
    }

    /// `a . v_n` as a point of the level.
    pub fn realization(&self) -> &TowerElem {
        &self.realization
    }

    pub fn is_zero(&self) -> bool {
        self.coord.iter().all(|d| d.is_zero())
    }

    /// The coordinate as an element of `O`, known mod `pi^{n m_0}`.
    pub fn scalar(&self) -> LaurentNum {
        let field = self.realization.field();
        let exact = LaurentNum::from_digits(field, &self.coord);
        exact.truncate(self.coord.len() as i64)
    }

    /// The same point seen in `W^m`, `m >= n`: coordinate `a eta^{m-n}`.
    pub fn at_level(&self, tower: &Tower, m: u32) -> Result<PairingValue> {
        if m < self.n {
            return Err(Error::ConsistencyFailure(format!("cannot lower a value of W^{} to W^{m}", self.n)));
        }
        let shift = tower.module().eta().pow((m - self.n) as i64)?;
        let a = LaurentNum::from_digits(self.realization.field(), &self.coord).mul(&shift);
        let big_m = (m * tower.module().m0()) as i64;
        Self::from_scalar(tower, m, &a.truncate(big_m))
    }

    /// Equality as points of `W^max(n, n')`.
    pub fn same_point(&self, other: &PairingValue, tower: &Tower) -> Result<bool> {
        let m = self.n.max(other.n);
        Ok(self.at_level(tower, m)?.coord == other.at_level(tower, m)?.coord)
    }

    /// Sum in `W^n`.
    pub fn add(&self, other: &PairingValue, tower: &Tower) -> Result<PairingValue> {
        if self.n != other.n {
            return Err(Error::ConsistencyFailure("adding values of different levels".into()));
        }
        Self::from_scalar(tower, self.n, &self.scalar().add(&other.scalar()))
    }

    /// `b . (a . v_n)` for `b` in `O`.
    pub fn act(&self, b: &LaurentNum, tower: &Tower) -> Result<PairingValue> {
        let big_n = (self.n * tower.module().m0()) as i64;
        Self::from_scalar(tower, self.n, &self.scalar().mul(b).truncate(big_n))
    }

    /// Recovers the coordinate from the realization with `torsion_dlog`.
    pub fn dlog_consistent(&self, tower: &Tower) -> Result<bool> {
        Ok(tower.torsion_dlog(&self.realization)? == self.coord)
    }
}

/// `lambda(x)` known at least modulo `{mu >= target}`.
pub fn log_value(module: &DrinfeldModule, x: &TowerElem, target: Ratio<i64>) -> Result<TowerElem> {
    let v = match x.valuation()? {
        None => return Ok(x.clone()),
        Some(v) => v,
    };
    if v <= Ratio::from_integer(0) {
        return Err(Error::Divergent(format!("logarithm at valuation {v}")));
    }
    let q = module.q() as i128;
    let v128 = Ratio::new(*v.numer() as i128, *v.denom() as i128);
    let target = Ratio::new(*target.numer() as i128, *target.denom() as i128);
    let tail_min = |t: usize| -> Ratio<i128> {
        let mut best: Option<Ratio<i128>> = None;
        for i in t + 1..t + 64 {
            let Some(qi) = q.checked_pow(i as u32) else { break };
            let term = v128 * qi - Ratio::from_integer(i as i128);
            best = Some(best.map_or(term, |b| b.min(term)));
            if v128 * qi * (q - 1) >= Ratio::from_integer(1) && term >= target {
                break;
            }
        }
        best.expect("at least one term")
    };
    let mut t = 1;
    while tail_min(t) < target {
        t += 1;
        if t > 40 {
            return Err(Error::PrecisionExhausted(format!("logarithm at valuation {v} needs too many terms")));
        }
    }
    module.logarithm(t)?.evaluate(x)
}

/// Which closed formula to evaluate.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PairingForm {
    /// `eta^{-n} T(lambda(alpha) delta(beta))`.
    Log,
    /// `eta^{-n} T(alpha delta(beta))`.
    LogFree,
}

impl PairingForm {
    pub fn threshold(self, q: u32, n: u32, m0: u32) -> Ratio<i64> {
        match self {
            PairingForm::Log => log_threshold(q),
            PairingForm::LogFree => theorem_threshold(q, n, m0),
        }
    }
}

/// `[alpha, beta]_n` with both arguments at the same level.
pub fn pairing_rhs(tower: &Tower, alpha: &TowerElem, beta: &TowerElem, form: PairingForm) -> Result<PairingValue> {
    if alpha.level().n() != beta.level().n() {
        return Err(Error::ConsistencyFailure(format!(
            "alpha at level {} and beta at level {}",
            alpha.level().n(),
            beta.level().n()
        )));
    }
    let d = delta(tower, beta)?;
    pairing_with_delta(tower, alpha, d.representative(), form)
}

/// The pairing formula with an explicit representative of `delta_n(beta)`.
pub fn pairing_with_delta(
    tower: &Tower,
    alpha: &TowerElem,
    delta_rep: &TowerElem,
    form: PairingForm,
) -> Result<PairingValue> {
    let module = tower.module();
    let n = alpha.level().n();
    let required = form.threshold(module.q(), n, module.m0());
    if let Some(v) = alpha.valuation()? {
        if v < required {
            return Err(Error::ValuationTooSmall { got: v.to_string(), required: required.to_string() });
        }
    }
    let first = match form {
        PairingForm::Log => {
            let target = Ratio::from_integer(2 * (n * module.m0()) as i64 + 2);
            log_value(module, alpha, target)?
        }
        PairingForm::LogFree => alpha.clone(),
    };
    trace_value(tower, &first.mul(delta_rep))
}

/// `eta^{-n} T_{E^n|K}(x) . v_n`; the trace must lie in `eta^n O`.
pub fn trace_value(tower: &Tower, x: &TowerElem) -> Result<PairingValue> {
    let n = x.level().n();
    let big_n = (n * tower.module().m0()) as i64;
    let tr = x.trace_to_k();
    if tr.abs_prec() < 2 * big_n {
        return Err(Error::PrecisionExhausted(format!(
            "trace known mod pi^{}, needed mod pi^{}",
            tr.abs_prec(),
            2 * big_n
        )));
    }
    let a = tr.div(&tower.module().eta().pow(n as i64)?)?;
    if !a.is_integral() {
        return Err(Error::ConsistencyFailure(format!("trace {tr} is not divisible by eta^{n}")));
    }
    PairingValue::from_scalar(tower, n, &a)
}

/// `Phi_K(u)` on torsion, modelled as `w -> rho_{u^{-1}}(w)`.
pub fn artin_unit_on_torsion(tower: &Tower, u: &LaurentNum, w: &TowerElem) -> Result<TowerElem> {
    if !u.is_unit() || !u.in_base_field() {
        return Err(Error::InvalidModule(format!("{u} is not a unit of O")));
    }
    let big_n = (w.level().n() * tower.module().m0()) as i64;
    let inv = u.inv()?;
    if inv.abs_prec() < big_n {
        return Err(Error::PrecisionExhausted(format!("u^-1 known only mod pi^{}", inv.abs_prec())));
    }
    tower.torsion_action(&inv.digits(0, big_n), w)
}

/// Whether a run is asserted or only reported.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Asserted,
    Exploratory,
}

/// Output of the prime-case route for the Kummer pairing.
#[derive(Clone, Debug)]
pub struct KummerLhs {
    /// `pi_n = N_{m,n}(v_m)`.
    pub pi_n: TowerElem,
    /// `v_{2m} - rho_{u^{-1}}(v_{2m})` read at level `n`, `u = N_{E^m|K}(1 + b_m)`.
    pub value: PairingValue,
    /// Valuation of `u^{-1} - (1 - T_m(b_m))`, `None` when zero to precision.
    pub norm_congruence_residual: Option<i64>,
    /// Whether the residual has valuation at least `2 m m_0`.
    pub norm_congruence_holds: bool,
    pub threshold_met: bool,
}

/// Whether `r_m = 1` to precision.
pub fn unit_part_is_one(module: &DrinfeldModule, m: u32) -> Result<bool> {
    let r = module.unit_part_r(m, 6)?;
    let one = LaurentNum::one(module.field());
    Ok(r.coeffs().iter().enumerate().all(|(i, c)| if i == 0 { c.eq_to_prec(&one).0 } else { c.is_zero() }))
}

/// The Kummer pairing `(alpha, pi_n)_n` computed through norms at level `m`, without the
/// pairing formula: `(alpha, pi_n) = v_{2m} - rho_{u^{-1}}(v_{2m})` with
/// `u = N_{E^m|K}(1 + rho_{eta^{m-n}}(alpha) / v_m)`.
///
/// The coordinate `1 - u^{-1}` with respect to `v_{2m}` must be divisible by
/// `eta^{2m-n}`, and the quotient is the coordinate at level `n`; level `2m` itself is
/// never built.
pub fn kummer_lhs_prime_case(tower: &Tower, alpha: &TowerElem, m: u32, mode: RunMode) -> Result<KummerLhs> {
    let module = tower.module();
    let (q, m0) = (module.q(), module.m0());
    let n = alpha.level().n();
    if !module.theorem_condition() {
        return Err(Error::InvalidModule("the prime-case route needs rho_eta = tau^m0 mod p_H".into()));
    }
    if m < n {
        return Err(Error::ConsistencyFailure(format!("level m = {m} below n = {n}")));
    }
    let threshold = lhs_threshold(q, n, m0);
    let threshold_met = Ratio::from_integer(m as i64) >= threshold;
    if !threshold_met && mode == RunMode::Asserted {
        return Err(Error::ThresholdNotMet { m, threshold: threshold.to_string() });
    }
    if !unit_part_is_one(module, m)? {
        return Err(Error::InvalidModule(format!(
            "r_{m} is not 1; conjugate the module by r_{m} before using the prime-case route"
        )));
    }
    let upper = tower.level(m)?;
    let alpha_m = module.rho_eta_pow(m - n)?.evaluate(&tower.embed(alpha, m)?)?;
    let v_m = TowerElem::v(&upper);
    let b_m = alpha_m.div(&v_m)?;
    let u = TowerElem::one(&upper).add(&b_m).norm_to_k()?;
    let two_m = (2 * m * m0) as i64;
    let u_inv = u.inv()?;
    if u_inv.abs_prec() < two_m {
        return Err(Error::PrecisionExhausted(format!("norm known only mod pi^{}", u_inv.abs_prec())));
    }
    let one = LaurentNum::one(module.field());
    let residual = u_inv.sub(&one.sub(&b_m.trace_to_k())).truncate(two_m);
    let norm_congruence_residual = residual.valuation();
    let norm_congruence_holds = norm_congruence_residual.is_none();
    let c = one.sub(&u_inv).truncate(two_m);
    let drop = ((2 * m - n) * m0) as i64;
    if !c.is_zero() && c.val_bound() < drop {
        return Err(Error::ConsistencyFailure(format!(
            "coordinate 1 - u^-1 = {c} is not divisible by eta^{}",
            2 * m - n
        )));
    }
    let a = c.div(&module.eta().pow((2 * m - n) as i64)?)?;
    let value = PairingValue::from_scalar(tower, n, &a)?;
    let pi_n = tower.norm_to_level(&v_m, n)?;
    Ok(KummerLhs { pi_n, value, norm_congruence_residual, norm_congruence_holds, threshold_met })
}

/// Both sides of the level-shift identity.
#[derive(Clone, Debug)]
pub struct LevelShift {
    /// `[rho_{eta^{m-n}}(alpha), beta']_m`.
    pub upper: PairingValue,
    /// `[alpha, N_{m,n}(beta')]_n`.
    pub lower: PairingValue,
    pub agree: bool,
    /// `T_{m,n}(delta_m(beta')) = eta^{m-n} delta_n(N_{m,n} beta') mod D_n`.
    pub trace_identity: bool,
}

pub fn level_shift_check(tower: &Tower, alpha: &TowerElem, beta_upper: &TowerElem) -> Result<LevelShift> {
    let module = tower.module();
    let n = alpha.level().n();
    let m = beta_upper.level().n();
    if m < n {
        return Err(Error::ConsistencyFailure(format!("beta' at level {m} below alpha at level {n}")));
    }
    let alpha_m = module.rho_eta_pow(m - n)?.evaluate(&tower.embed(alpha, m)?)?;
    let upper = pairing_rhs(tower, &alpha_m, beta_upper, PairingForm::Log)?;
    let beta = tower.norm_to_level(beta_upper, n)?;
    let lower = pairing_rhs(tower, alpha, &beta, PairingForm::Log)?;
    let agree = upper.same_point(&lower, tower)?;
    let delta_upper = delta(tower, beta_upper)?;
    let traced = tower.trace_to_level(delta_upper.representative(), n)?;
    let eta_shift = module.eta().pow((m - n) as i64)?;
    let delta_lower = delta(tower, &beta)?;
    let trace_identity = in_different(&traced.sub(&delta_lower.representative().scale(&eta_shift)))?;
    Ok(LevelShift { upper, lower, agree, trace_identity })
}

/// `(c, 1 - b)` and `(bc/(1-b), b^{-1})` through the pairing formula.
pub fn one_minus_b_sides(tower: &Tower, b: &TowerElem, c: &TowerElem) -> Result<(PairingValue, PairingValue)> {
    let level = b.level();
    let one = TowerElem::one(level);
    let one_minus_b = one.sub(b);
    let left = pairing_rhs(tower, c, &one_minus_b, PairingForm::Log)?;
    let shifted = b.mul(c).div(&one_minus_b)?;
    let right = pairing_rhs(tower, &shifted, &b.inv()?, PairingForm::Log)?;
    Ok((left, right))
}

/// The constant `c(alpha) = j - 1/(q-1)`, where `j` locates the roots of
/// `rho_{eta^n}(X) = alpha` of largest valuation.
pub fn majoration_constant(q: u32, n: u32, m0: u32, alpha_valuation: Ratio<i64>) -> Ratio<i64> {
    let qq = q as i64;
    let big_n = (n * m0) as i64;
    let shift = Ratio::new(1, qq - 1);
    let j = if alpha_valuation > Ratio::from_integer(big_n) + shift {
        0
    } else if alpha_valuation > shift {
        // n m_0 - j + 1/(q-1) < mu <= n m_0 - j + 1 + 1/(q-1).
        big_n - (alpha_valuation - shift).ceil().to_integer() + 1
    } else {
        // 1/(q^{j - N}(q-1)) < mu <= 1/(q^{j - N - 1}(q-1)).
        let mut k = 1i64;
        while Ratio::new(1, qq.pow(k as u32) * (qq - 1)) >= alpha_valuation {
            k += 1;
        }
        big_n + k
    };
    Ratio::from_integer(j) - shift
}

/// The bounds `-1/(q-1) <= c(alpha) <= 2 n m_0 + log_q(e) - 1/(q-1)` with `e = [L : E^n]`.
pub fn majoration_bounds(q: u32, n: u32, m0: u32, e: u32) -> (f64, f64) {
    let shift = 1.0 / (q as f64 - 1.0);
    (-shift, 2.0 * (n * m0) as f64 + (e as f64).ln() / (q as f64).ln() - shift)
}

/// The truncated Iwasawa functional of `beta`: `psi` with
/// `T(lambda(alpha) psi) = [alpha, beta]` mod `eta^n` for all `alpha` in `p_L^k`.
#[derive(Clone, Debug)]
pub struct IwasawaSolution {
    /// Exponent of the sublattice `p_L^k`.
    pub k: i64,
    pub psi: TowerElem,
    pub smith: SmithSolution,
    /// Whether `psi - delta(beta)/eta^n` lies in `eta^n (p_L^k)^*`.
    pub matches_explicit: bool,
}

/// Dual basis data for the sublattice `p_L^k` of level `n`.
struct Sublattice {
    k: i64,
    alphas: Vec<TowerElem>,
    dual: Vec<TowerElem>,
    /// `mu` bound of `eta^n (p_L^k)^*`.
    dual_bound: Ratio<i64>,
}

fn sublattice(tower: &Tower, n: u32) -> Result<Sublattice> {
    let module = tower.module();
    let level = tower.level(n)?;
    let e = level.degree();
    let k = crate::sample::min_exponent(&level, theorem_threshold(module.q(), n, module.m0()));
    let field = level.field();
    let res = field.residue();
    let d_h = res.d() as usize;
    let zeta = res.generator();
    let h_basis: Vec<LaurentNum> =
        (0..d_h).map(|l| LaurentNum::constant(field, res.pow(zeta, l as u64))).collect();
    let (g_prime, _) = different_generator(&level)?;
    let g_inv = g_prime.inv()?;
    let mut alphas = Vec::with_capacity(e * d_h);
    let mut dual = Vec::with_capacity(e * d_h);
    for j in 0..e as i64 {
        for h in &h_basis {
            alphas.push(TowerElem::v_pow(&level, k + j).scale(h));
            dual.push(TowerElem::v_pow(&level, j - k).mul(&g_inv).scale(h));
        }
    }
    let dual_bound = Ratio::new(1, module.q() as i64 - 1) - Ratio::new(k, e as i64);
    Ok(Sublattice { k, alphas, dual, dual_bound })
}

/// Solves for the truncated Iwasawa functional of `beta` by Smith reduction over `O`.
pub fn iwasawa_functional(tower: &Tower, beta: &TowerElem) -> Result<IwasawaSolution> {
    let module = tower.module();
    let n = beta.level().n();
    let big_n = (n * module.m0()) as i64;
    let lattice = sublattice(tower, n)?;
    let target = Ratio::from_integer(2 * big_n + 2);
    let delta_beta = delta(tower, beta)?;
    let mut rows = Vec::with_capacity(lattice.alphas.len());
    let mut rhs = Vec::with_capacity(lattice.alphas.len());
    for alpha in &lattice.alphas {
        let lam = log_value(module, alpha, target)?;
        let row: Vec<LaurentNum> = lattice.dual.iter().map(|b| lam.mul(b).trace_to_k().truncate(big_n)).collect();
        rows.push(row);
        let value = pairing_with_delta(tower, alpha, delta_beta.representative(), PairingForm::Log)?;
        rhs.push(value.scalar());
    }
    let smith = linalg::smith_solve(&rows, &rhs, big_n)?;
    let level = beta.level();
    let psi = lattice
        .dual
        .iter()
        .zip(&smith.solution)
        .fold(TowerElem::zero(level), |acc, (b, c)| acc.add(&b.scale(c)));
    let explicit = delta_beta.representative().scale(&module.eta().pow(n as i64)?.inv()?);
    let matches_explicit = in_ideal(&psi.sub(&explicit), lattice.dual_bound)?;
    Ok(IwasawaSolution { k: lattice.k, psi, smith, matches_explicit })
}

impl IwasawaSolution {
    /// `T(lambda(alpha) psi) . v_n`.
    pub fn apply(&self, tower: &Tower, alpha: &TowerElem) -> Result<PairingValue> {
        let module = tower.module();
        let n = alpha.level().n();
        let big_n = (n * module.m0()) as i64;
        let lam = log_value(module, alpha, Ratio::from_integer(2 * big_n + 2))?;
        let a = lam.mul(&self.psi).trace_to_k().truncate(big_n);
        PairingValue::from_scalar(tower, n, &a)
    }

    /// `psi - other` lies in `eta^n (p_L^k)^*`.
    pub fn congruent(&self, tower: &Tower, other: &TowerElem) -> Result<bool> {
        let n = self.psi.level().n();
        let lattice = sublattice(tower, n)?;
        in_ideal(&self.psi.sub(other), lattice.dual_bound)
    }
}

/// A module `rho' = t^{-1} rho t` with its own tower, and the field isomorphism
/// `E^n_rho -> E^n_rho'` sending `v_n` to `t(v'_n)`.
pub struct Conjugation {
    t: TwistedSeries,
    t_inv: TwistedSeries,
    tower: Tower,
}

/// Both sides of `[alpha', beta]_{rho'} = t^{-1}([t(alpha'), beta]_rho)` in coordinates.
#[derive(Clone, Debug)]
pub struct ConjugationReport {
    pub base: PairingValue,
    pub conjugate: PairingValue,
    pub agree: bool,
}

impl Conjugation {
    /// `window` bounds the `tau`-degree kept in `t^{-1}` and in the conjugate of `rho_pi`.
    pub fn new(base: &Tower, t: &TwistedSeries, window: usize) -> Result<Self> {
        if !t.is_integral() || !t.constant_term().is_unit() {
            return Err(Error::NotInvertible(format!("{t} is not a unit of O_H{{{{tau}}}}")));
        }
        let module = base.module().conjugate(t, window)?;
        let t_inv = t.invert(InvertMode::Unit, window)?;
        let t = if t.is_polynomial() { t.clone() } else { t.clone().with_tail(TailBound::Integral) };
        Ok(Conjugation { t, t_inv, tower: Tower::new(Arc::new(module)) })
    }

    pub fn tower(&self) -> &Tower {
        &self.tower
    }

    /// Image of an element of `E^n_rho` in `E^n_rho'`.
    pub fn transport(&self, base: &Tower, x: &TowerElem) -> Result<TowerElem> {
        let n = x.level().n();
        let target = self.tower.level(n)?;
        let image = self.t.evaluate(&TowerElem::v(&target))?;
        let residual = image.eval_poly(base.level(n)?.min_poly());
        if !residual.is_zero() {
            return Err(Error::ConsistencyFailure(format!("t(v'_{n}) is not a root of g_{n}: {residual}")));
        }
        let mut power = TowerElem::one(&target);
        let mut acc = TowerElem::zero(&target);
        for (i, c) in x.coords().iter().enumerate() {
            if i > 0 {
                power = power.mul(&image);
            }
            acc = acc.add(&power.scale(c));
        }
        Ok(acc)
    }

    /// Compares `[t^{-1}(phi(alpha)), phi(beta)]_{rho'}` with `[alpha, beta]_rho`.
    pub fn check(&self, base: &Tower, alpha: &TowerElem, beta: &TowerElem, form: PairingForm) -> Result<ConjugationReport> {
        let base_value = pairing_rhs(base, alpha, beta, form)?;
        let alpha_t = self.t_inv.evaluate(&self.transport(base, alpha)?)?;
        let beta_t = self.transport(base, beta)?;
        let conjugate = pairing_rhs(&self.tower, &alpha_t, &beta_t, form)?;
        let agree = conjugate.coord() == base_value.coord();
        Ok(ConjugationReport { base: base_value, conjugate, agree })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::LocalField;
    use crate::sample;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn tower(q: u32) -> Tower {
        let f = LocalField::new(q, 1, 1, 32).unwrap();
        Tower::new(Arc::new(DrinfeldModule::carlitz(&f).unwrap()))
    }

    fn variant() -> Tower {
        let f = LocalField::new(2, 1, 1, 32).unwrap();
        let b1 = LaurentNum::from_digits(&f, &[Fe(1), Fe(1)]);
        let rho = TwistedSeries::polynomial(&f, vec![LaurentNum::pi_pow(&f, 1), b1]);
        Tower::new(Arc::new(DrinfeldModule::validate(rho, 1, LaurentNum::one(&f)).unwrap()))
    }

    #[test]
    fn thresholds() {
        assert_eq!(theorem_threshold(2, 1, 1), Ratio::from_integer(2));
        assert_eq!(vanishing_bound(2, 2, 1), Ratio::from_integer(3));
        assert_eq!(lhs_threshold(2, 1, 1), Ratio::from_integer(5));
        assert_eq!(log_threshold(3), Ratio::from_integer(1));
    }

    #[test]
    fn delta_of_generator_is_its_inverse() {
        let t = tower(2);
        let level = t.level(2).unwrap();
        let v = TowerElem::v(&level);
        let d = delta(&t, &v).unwrap();
        assert!(d.congruent_to(&TowerElem::v_pow(&level, -1)).unwrap());
    }

    #[test]
    fn delta_is_a_homomorphism_and_lift_independent() {
        let t = tower(2);
        let level = t.level(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10 {
            let (k1, k2) = (rng_exp(&mut rng), rng_exp(&mut rng));
            let b1 = sample::with_valuation(&level, &mut rng, k1);
            let b2 = sample::with_valuation(&level, &mut rng, k2);
            let sum = delta(&t, &b1).unwrap().representative().add(delta(&t, &b2).unwrap().representative());
            assert!(delta(&t, &b1.mul(&b2)).unwrap().congruent_to(&sum).unwrap());
            let lift = t.lift_to_series(&b1).unwrap();
            let perturbation = crate::XPoly::new(level.field(), vec![sample::integral(level.field(), &mut rng, 4)]);
            let other = delta_of_lift(&level, &lift.perturbed(&level, &perturbation)).unwrap();
            assert!(other.congruent(&delta(&t, &b1).unwrap()).unwrap());
        }
    }

    fn rng_exp(rng: &mut ChaCha8Rng) -> i64 {
        use rand::Rng;
        rng.gen_range(-2..4)
    }

    #[test]
    fn pairing_vanishes_above_the_bound() {
        let t = tower(2);
        let level = t.level(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let k = sample::min_exponent_above(&level, vanishing_bound(2, 2, 1));
        for _ in 0..5 {
            let alpha = sample::with_valuation(&level, &mut rng, k);
            let beta = sample::with_valuation(&level, &mut rng, 1);
            assert!(pairing_rhs(&t, &alpha, &beta, PairingForm::Log).unwrap().is_zero());
        }
    }

    #[test]
    fn carlitz_self_pairing_is_zero_and_forms_agree() {
        let t = tower(2);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=2 {
            let level = t.level(n).unwrap();
            let k = sample::min_exponent(&level, theorem_threshold(2, n, 1));
            for _ in 0..5 {
                let alpha = sample::with_valuation(&level, &mut rng, k);
                assert!(pairing_rhs(&t, &alpha, &alpha, PairingForm::Log).unwrap().is_zero());
                let beta = sample::with_valuation(&level, &mut rng, 1);
                let log = pairing_rhs(&t, &alpha, &beta, PairingForm::Log).unwrap();
                let free = pairing_rhs(&t, &alpha, &beta, PairingForm::LogFree).unwrap();
                assert_eq!(log.coord(), free.coord());
                assert!(log.dlog_consistent(&t).unwrap());
            }
        }
    }

    #[test]
    fn small_valuation_is_rejected() {
        let t = tower(2);
        let level = t.level(2).unwrap();
        let v = TowerElem::v(&level);
        let err = pairing_rhs(&t, &v, &v, PairingForm::Log).unwrap_err();
        assert!(matches!(err, Error::ValuationTooSmall { .. }));
    }

    #[test]
    fn artin_action_examples() {
        let t = tower(2);
        let level = t.level(2).unwrap();
        let f = level.field().clone();
        let v = TowerElem::v(&level);
        assert!(artin_unit_on_torsion(&t, &LaurentNum::one(&f), &v).unwrap().eq_to_prec(&v));
        // u = 1 + pi^2 is 1 mod eta^2.
        let u = LaurentNum::from_digits(&f, &[Fe(1), Fe(0), Fe(1)]);
        assert!(artin_unit_on_torsion(&t, &u, &v).unwrap().eq_to_prec(&v));
        let u1 = LaurentNum::from_digits(&f, &[Fe(1), Fe(1)]);
        let u2 = LaurentNum::from_digits(&f, &[Fe(1), Fe(1), Fe(1)]);
        let both = artin_unit_on_torsion(&t, &u1.mul(&u2), &v).unwrap();
        let composed =
            artin_unit_on_torsion(&t, &u1, &artin_unit_on_torsion(&t, &u2, &v).unwrap()).unwrap();
        assert!(both.eq_to_prec(&composed));
    }

    #[test]
    fn kummer_route_at_zero_and_threshold_flag() {
        let t = tower(2);
        let level = t.level(1).unwrap();
        let zero = TowerElem::zero(&level);
        let out = kummer_lhs_prime_case(&t, &zero, 5, RunMode::Asserted).unwrap();
        assert!(out.value.is_zero());
        assert!(out.norm_congruence_holds);
        let err = kummer_lhs_prime_case(&t, &zero, 3, RunMode::Asserted).unwrap_err();
        assert!(matches!(err, Error::ThresholdNotMet { .. }));
        assert!(!kummer_lhs_prime_case(&t, &zero, 3, RunMode::Exploratory).unwrap().threshold_met);
    }

    #[test]
    fn kummer_route_needs_trivial_r() {
        let t = variant();
        let level = t.level(1).unwrap();
        let zero = TowerElem::zero(&level);
        assert!(matches!(
            kummer_lhs_prime_case(&t, &zero, 5, RunMode::Asserted).unwrap_err(),
            Error::InvalidModule(_)
        ));
    }

    #[test]
    fn majoration_constant_examples() {
        // q = 2, n = 1: mu(alpha) in (1, 2] gives j = 1.
        assert_eq!(majoration_constant(2, 1, 1, Ratio::from_integer(2)), Ratio::from_integer(0));
        assert_eq!(majoration_constant(2, 1, 1, Ratio::from_integer(3)), Ratio::from_integer(-1));
        // mu(alpha) = 1 in (1/2, 1] gives j = N + 1 = 2; 1/2 in (1/4, 1/2] gives j = 3.
        assert_eq!(majoration_constant(2, 1, 1, Ratio::from_integer(1)), Ratio::from_integer(1));
        assert_eq!(majoration_constant(2, 1, 1, Ratio::new(1, 2)), Ratio::from_integer(2));
    }

    #[test]
    fn kummer_route_matches_formula() {
        let t = tower(2);
        let level = t.level(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let k = sample::min_exponent(&level, theorem_threshold(2, 1, 1));
        for _ in 0..4 {
            let alpha = sample::with_valuation(&level, &mut rng, k);
            let lhs = kummer_lhs_prime_case(&t, &alpha, 5, RunMode::Asserted).unwrap();
            assert!(lhs.norm_congruence_holds);
            let rhs = pairing_rhs(&t, &alpha, &lhs.pi_n, PairingForm::Log).unwrap();
            assert_eq!(lhs.value.coord(), rhs.coord());
        }
    }

    #[test]
    fn level_shift_agrees() {
        let t = tower(2);
        let lower = t.level(1).unwrap();
        let upper = t.level(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let k = sample::min_exponent(&lower, theorem_threshold(2, 1, 1));
        for _ in 0..4 {
            let alpha = sample::with_valuation(&lower, &mut rng, k);
            let beta = sample::with_valuation(&upper, &mut rng, 1);
            let out = level_shift_check(&t, &alpha, &beta).unwrap();
            assert!(out.agree, "{:?}", out);
            assert!(out.trace_identity);
        }
    }

    #[test]
    fn iwasawa_solution_reproduces_pairing() {
        let t = tower(2);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for n in 1..=2 {
            let level = t.level(n).unwrap();
            let beta = sample::with_valuation(&level, &mut rng, 1);
            let sol = iwasawa_functional(&t, &beta).unwrap();
            assert!(sol.smith.unique());
            assert!(sol.matches_explicit);
            let alpha = sample::with_valuation(&level, &mut rng, sol.k + 1);
            let direct = pairing_rhs(&t, &alpha, &beta, PairingForm::Log).unwrap();
            assert_eq!(sol.apply(&t, &alpha).unwrap().coord(), direct.coord());
        }
    }

    #[test]
    fn r_annihilates_for_the_variant() {
        let t = variant();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for n in 1..=2 {
            let r = t.module().unit_part_r(n, 12).unwrap();
            let level = t.level(n).unwrap();
            let k = sample::min_exponent(&level, theorem_threshold(2, n, 1));
            for _ in 0..3 {
                let alpha = sample::with_valuation(&level, &mut rng, k);
                let beta = r.evaluate(&alpha).unwrap();
                assert!(pairing_rhs(&t, &alpha, &beta, PairingForm::Log).unwrap().is_zero());
            }
        }
    }

    #[test]
    fn conjugation_by_one_plus_pi_tau() {
        let t = tower(2);
        let f = t.field().clone();
        let conj_t = TwistedSeries::polynomial(&f, vec![LaurentNum::one(&f), LaurentNum::pi_pow(&f, 1)]);
        let conj = Conjugation::new(&t, &conj_t, 12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        for n in 1..=2 {
            let level = t.level(n).unwrap();
            let k = sample::min_exponent(&level, theorem_threshold(2, n, 1));
            let alpha = sample::with_valuation(&level, &mut rng, k);
            let beta = sample::with_valuation(&level, &mut rng, 1);
            let report = conj.check(&t, &alpha, &beta, PairingForm::Log).unwrap();
            assert!(report.agree, "{report:?}");
        }
    }
}
