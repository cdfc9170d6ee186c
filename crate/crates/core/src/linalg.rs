//! Dense linear algebra over precision-tracked fields, pivoting on least valuation.

#![allow(clippy::needless_range_loop)]

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::residue::LaurentNum;

/// Field operations needed for elimination.
pub trait Scalar: Clone {
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn div(&self, other: &Self) -> Result<Self>;
    fn neg(&self) -> Self;
    /// Valuation, or `None` when zero to precision.
    fn val(&self) -> Result<Option<Ratio<i64>>>;
}

impl Scalar for LaurentNum {
    fn add(&self, other: &Self) -> Self {
        LaurentNum::add(self, other)
    }
    fn sub(&self, other: &Self) -> Self {
        LaurentNum::sub(self, other)
    }
    fn mul(&self, other: &Self) -> Self {
        LaurentNum::mul(self, other)
    }
    fn div(&self, other: &Self) -> Result<Self> {
        Ok(LaurentNum::div(self, other)?)
    }
    fn neg(&self) -> Self {
        LaurentNum::neg(self)
    }
    fn val(&self) -> Result<Option<Ratio<i64>>> {
        Ok(self.valuation().map(Ratio::from_integer))
    }
}

/// Index of the least-valuation nonzero entry of column `col` among rows `from..`.
fn pivot_row<T: Scalar>(m: &[Vec<T>], col: usize, from: usize) -> Result<Option<usize>> {
    let mut best: Option<(Ratio<i64>, usize)> = None;
    for (r, row) in m.iter().enumerate().skip(from) {
        if let Some(v) = row[col].val()? {
            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                best = Some((v, r));
            }
        }
    }
    Ok(best.map(|(_, r)| r))
}

/// Determinant by elimination; an all-zero pivot column gives `ZeroToPrecision`.
pub fn determinant<T: Scalar>(mut m: Vec<Vec<T>>) -> Result<T> {
    let n = m.len();
    if n == 0 {
        return Err(Error::ConsistencyFailure("determinant of an empty matrix".into()));
    }
    let mut det: Option<T> = None;
    let mut negate = false;
    for k in 0..n {
        let p = pivot_row(&m, k, k)?.ok_or(Error::ZeroToPrecision(k as i64))?;
        if p != k {
            m.swap(p, k);
            negate = !negate;
        }
        let pivot = m[k][k].clone();
        for r in k + 1..n {
            if m[r][k].val()?.is_none() {
                continue;
            }
            let factor = m[r][k].div(&pivot)?;
            for c in k..n {
                let t = factor.mul(&m[k][c]);
                m[r][c] = m[r][c].sub(&t);
            }
        }
        det = Some(match det {
            None => pivot,
            Some(d) => d.mul(&pivot),
        });
    }
    let d = det.expect("nonempty");
    Ok(if negate { d.neg() } else { d })
}

/// Inverse of a square matrix by Gauss-Jordan elimination.
pub fn inverse<T: Scalar>(m: &[Vec<T>], zero: &T, one: &T) -> Result<Vec<Vec<T>>> {
    let n = m.len();
    let mut a: Vec<Vec<T>> = m
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { one.clone() } else { zero.clone() }));
            r
        })
        .collect();
    for k in 0..n {
        let p = pivot_row(&a, k, k)?.ok_or_else(|| Error::SingularSystem(format!("column {k} vanishes")))?;
        a.swap(p, k);
        let pivot = a[k][k].clone();
        for c in 0..2 * n {
            a[k][c] = a[k][c].div(&pivot)?;
        }
        for r in 0..n {
            if r == k || a[r][k].val()?.is_none() {
                continue;
            }
            let factor = a[r][k].clone();
            for c in 0..2 * n {
                let t = factor.mul(&a[k][c]);
                a[r][c] = a[r][c].sub(&t);
            }
        }
    }
    Ok(a.into_iter().map(|row| row[n..].to_vec()).collect())
}

/// Solution of `M x = b` over `O` modulo `pi^N`, found by Smith reduction.
#[derive(Clone, Debug)]
pub struct SmithSolution {
    /// Valuations of the diagonal invariants; `None` for a pivot that is zero mod `pi^N`.
    pub invariants: Vec<Option<i64>>,
    /// One solution, each entry known mod `pi^N`.
    pub solution: Vec<LaurentNum>,
}

impl SmithSolution {
    /// The solution is unique mod `pi^N` exactly when every invariant is a unit.
    pub fn unique(&self) -> bool {
        self.invariants.iter().all(|v| *v == Some(0))
    }
}

/// Solves `M x = b (mod pi^N)` for an integral matrix with at least as many rows as
/// columns, by full-pivot elimination over the valuation ring.
pub fn smith_solve(m: &[Vec<LaurentNum>], rhs: &[LaurentNum], modulus: i64) -> Result<SmithSolution> {
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    if rows < cols || rhs.len() != rows {
        return Err(Error::SingularSystem(format!("{rows} x {cols} system with {} right-hand sides", rhs.len())));
    }
    if let Some(bad) = m.iter().flatten().find(|a| !a.is_integral()) {
        return Err(Error::SingularSystem(format!("entry {bad} is not integral")));
    }
    let field = rhs[0].field().clone();
    let reduce = |x: &LaurentNum| x.truncate(modulus);
    let mut a: Vec<Vec<LaurentNum>> = m.iter().map(|r| r.iter().map(reduce).collect()).collect();
    let mut b: Vec<LaurentNum> = rhs.iter().map(reduce).collect();
    // Column operations: x = c x'.
    let mut c: Vec<Vec<LaurentNum>> = (0..cols)
        .map(|i| {
            (0..cols)
                .map(|j| if i == j { LaurentNum::one(&field) } else { LaurentNum::exact_zero(&field) })
                .collect()
        })
        .collect();
    let mut invariants = Vec::with_capacity(cols);
    for k in 0..cols {
        let mut best: Option<(i64, usize, usize)> = None;
        for (i, row) in a.iter().enumerate().skip(k) {
            for (j, x) in row.iter().enumerate().skip(k) {
                if let Some(v) = x.valuation() {
                    if best.is_none_or(|(bv, _, _)| v < bv) {
                        best = Some((v, i, j));
                    }
                }
            }
        }
        let Some((v, pi, pj)) = best else {
            invariants.extend((k..cols).map(|_| None));
            break;
        };
        a.swap(k, pi);
        b.swap(k, pi);
        for row in a.iter_mut() {
            row.swap(k, pj);
        }
        for row in c.iter_mut() {
            row.swap(k, pj);
        }
        let pivot = a[k][k].clone();
        for i in k + 1..rows {
            if a[i][k].is_zero() {
                continue;
            }
            let f = reduce(&a[i][k].div(&pivot)?);
            for j in k..cols {
                a[i][j] = reduce(&a[i][j].sub(&f.mul(&a[k][j])));
            }
            b[i] = reduce(&b[i].sub(&f.mul(&b[k])));
        }
        for j in k + 1..cols {
            if a[k][j].is_zero() {
                continue;
            }
            let f = reduce(&a[k][j].div(&pivot)?);
            for i in k..rows {
                a[i][j] = reduce(&a[i][j].sub(&f.mul(&a[i][k])));
            }
            for row in c.iter_mut() {
                row[j] = reduce(&row[j].sub(&f.mul(&row[k])));
            }
        }
        invariants.push(Some(v));
    }
    let mut x_prime = Vec::with_capacity(cols);
    for (k, inv) in invariants.iter().enumerate() {
        match inv {
            Some(v) => {
                if b[k].val_bound() < *v && !b[k].is_zero() {
                    return Err(Error::NotSolvable(format!("right-hand side {} not divisible by pivot {}", b[k], a[k][k])));
                }
                x_prime.push(b[k].div(&a[k][k])?.truncate(modulus - v));
            }
            None => {
                if !b[k].is_zero() {
                    return Err(Error::NotSolvable(format!("right-hand side {} against a zero pivot", b[k])));
                }
                x_prime.push(LaurentNum::zero(&field, 0));
            }
        }
    }
    if let Some(extra) = b.iter().skip(cols).find(|x| !x.is_zero()) {
        return Err(Error::NotSolvable(format!("inconsistent extra equation with residual {extra}")));
    }
    let solution = (0..cols)
        .map(|i| {
            let s = c[i].iter().zip(&x_prime).fold(LaurentNum::exact_zero(&field), |acc, (cij, xj)| acc.add(&cij.mul(xj)));
            reduce(&s)
        })
        .collect();
    Ok(SmithSolution { invariants, solution })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::residue::{Fe, LocalField};

    #[test]
    fn determinant_and_inverse_of_small_matrix() {
        let f = LocalField::new(3, 1, 1, 32).unwrap();
        let n = |d: &[u16]| LaurentNum::from_digits(&f, &d.iter().map(|&x| Fe(x)).collect::<Vec<_>>());
        // [[pi, 1], [1, 2]]: det = 2 pi - 1.
        let m = vec![vec![n(&[0, 1]), n(&[1])], vec![n(&[1]), n(&[2])]];
        let d = determinant(m.clone()).unwrap();
        assert!(d.eq_to_prec(&n(&[2, 2])).0);
        let inv = inverse(&m, &LaurentNum::exact_zero(&f), &LaurentNum::one(&f)).unwrap();
        for i in 0..2 {
            for j in 0..2 {
                let s = (0..2).fold(LaurentNum::exact_zero(&f), |acc, k| acc.add(&m[i][k].mul(&inv[k][j])));
                let expected = if i == j { LaurentNum::one(&f) } else { LaurentNum::exact_zero(&f) };
                assert!(s.eq_to_prec(&expected).0);
            }
        }
    }

    #[test]
    fn smith_solve_recovers_solution_mod_pi_power() {
        let f = LocalField::new(2, 1, 1, 32).unwrap();
        let n = |d: &[u16]| LaurentNum::from_digits(&f, &d.iter().map(|&x| Fe(x)).collect::<Vec<_>>());
        // Unimodular: [[pi, 1], [1, 1 + pi]] has determinant pi + pi^2 - 1, a unit.
        let m = vec![vec![n(&[0, 1]), n(&[1])], vec![n(&[1]), n(&[1, 1])]];
        let x = [n(&[1, 0, 1]), n(&[0, 1, 1])];
        let b: Vec<LaurentNum> = m.iter().map(|row| row[0].mul(&x[0]).add(&row[1].mul(&x[1]))).collect();
        let sol = smith_solve(&m, &b, 5).unwrap();
        assert!(sol.unique());
        for (s, e) in sol.solution.iter().zip(&x) {
            assert!(s.eq_to_prec(&e.truncate(5)).0);
            assert!(s.abs_prec() >= 5);
        }
        // A non-unit invariant leaves the solution ambiguous.
        let m2 = vec![vec![n(&[0, 1]), n(&[0])], vec![n(&[0]), n(&[1])]];
        let b2 = vec![n(&[0, 1]), n(&[1])];
        let sol2 = smith_solve(&m2, &b2, 5).unwrap();
        assert_eq!(sol2.invariants.iter().filter(|v| **v == Some(1)).count(), 1);
        assert!(!sol2.unique());
        assert!(smith_solve(&m2, &[n(&[1]), n(&[1])], 5).is_err());
    }
}
