//! Dense tableau simplex for `max c·x  s.t.  A x <= b, x >= 0` with `b >= 0`.
//!
//! The origin is feasible, so no phase one is needed. The solver is generic
//! over the scalar: `f64` (with a small pivot tolerance) or exact
//! `BigRational`. Pivoting uses the largest reduced cost and switches to
//! Bland's smallest-index rule after a run of degenerate pivots, which rules
//! out cycling.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, Num, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Scalar field the tableau runs over.
pub trait LpScalar: Clone + Debug + PartialOrd + Num + Signed {
    fn from_f64(x: f64) -> Self;
    fn to_f64(&self) -> f64;
    /// Magnitudes at or below this are treated as zero.
    fn eps() -> Self;
}

impl LpScalar for f64 {
    fn from_f64(x: f64) -> Self {
        x
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn eps() -> Self {
        1e-11
    }
}

impl LpScalar for BigRational {
    fn from_f64(x: f64) -> Self {
        <BigRational as FromPrimitive>::from_f64(x).expect("finite coefficient")
    }
    fn to_f64(&self) -> f64 {
        let n = self.numer().to_f64().unwrap_or(f64::NAN);
        let d = self.denom().to_f64().unwrap_or(f64::NAN);
        if n.is_finite() && d.is_finite() && d != 0.0 {
            n / d
        } else {
            // Huge numerators/denominators: shift both down before dividing.
            let bits = self.numer().bits().max(self.denom().bits()) as i64 - 900;
            let shift = bits.max(0) as usize;
            let n: BigInt = self.numer() >> shift;
            let d: BigInt = self.denom() >> shift;
            n.to_f64().unwrap_or(f64::NAN) / d.to_f64().unwrap_or(f64::NAN)
        }
    }
    fn eps() -> Self {
        BigRational::zero()
    }
}

/// A linear program in inequality form with nonnegative variables.
#[derive(Clone, Debug)]
pub struct Lp<T> {
    pub objective: Vec<T>,
    pub rows: Vec<Vec<T>>,
    pub rhs: Vec<T>,
}

#[derive(Clone, Debug)]
pub struct LpSolution<T> {
    pub x: Vec<T>,
    pub value: T,
    pub pivots: usize,
}

const DEGENERATE_RUN: usize = 50;

impl<T: LpScalar> Lp<T> {
    pub fn new(objective: Vec<T>) -> Self {
        Lp {
            objective,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    pub fn vars(&self) -> usize {
        self.objective.len()
    }

    /// Adds `row · x <= rhs`; `rhs` must be nonnegative.
    pub fn add_row(&mut self, row: Vec<T>, rhs: T) {
        debug_assert_eq!(row.len(), self.objective.len());
        debug_assert!(!rhs.is_negative());
        self.rows.push(row);
        self.rhs.push(rhs);
    }

    pub fn solve(&self, max_pivots: usize) -> Result<LpSolution<T>> {
        let nv = self.vars();
        let m = self.rows.len();
        let width = nv + m + 1;
        let eps = T::eps();
        let mut tab: Vec<Vec<T>> = Vec::with_capacity(m + 1);
        for (i, row) in self.rows.iter().enumerate() {
            let mut r = row.clone();
            r.resize(width, T::zero());
            r[nv + i] = T::one();
            r[width - 1] = self.rhs[i].clone();
            tab.push(r);
        }
        let mut z: Vec<T> = self.objective.iter().map(|c| -c.clone()).collect();
        z.resize(width, T::zero());
        tab.push(z);
        let mut basis: Vec<usize> = (nv..nv + m).collect();

        let mut bland = false;
        let mut degenerate = 0usize;
        let mut pivots = 0usize;
        loop {
            let zrow = &tab[m];
            let neg_eps = -eps.clone();
            let entering = if bland {
                (0..width - 1).find(|&j| zrow[j] < neg_eps)
            } else {
                let mut best: Option<usize> = None;
                for j in 0..width - 1 {
                    if zrow[j] < neg_eps && best.is_none_or(|b| zrow[j] < zrow[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(col) = entering else { break };

            let mut leave: Option<(usize, T)> = None;
            for i in 0..m {
                let a = &tab[i][col];
                if *a > eps {
                    let ratio = tab[i][width - 1].clone() / a.clone();
                    let better = match &leave {
                        None => true,
                        Some((r, best)) => ratio < *best || (ratio == *best && basis[i] < basis[*r]),
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, ratio)) = leave else {
                return Err(Error::Failed("linear program is unbounded".into()));
            };
            if ratio.is_zero() {
                degenerate += 1;
                if degenerate > DEGENERATE_RUN {
                    bland = true;
                }
            } else {
                degenerate = 0;
            }
            pivot(&mut tab, row, col);
            basis[row] = col;
            pivots += 1;
            if pivots > max_pivots {
                return Err(Error::Failed(format!("simplex exceeded {max_pivots} pivots")));
            }
        }

        let mut x = vec![T::zero(); nv];
        for (i, &b) in basis.iter().enumerate() {
            if b < nv {
                x[b] = tab[i][width - 1].clone();
            }
        }
        Ok(LpSolution {
            x,
            value: tab[m][width - 1].clone(),
            pivots,
        })
    }
}

fn pivot<T: LpScalar>(tab: &mut [Vec<T>], row: usize, col: usize) {
    let width = tab[row].len();
    let p = tab[row][col].clone();
    for j in 0..width {
        if !tab[row][j].is_zero() {
            tab[row][j] = tab[row][j].clone() / p.clone();
        }
    }
    let prow = tab[row].clone();
    let eps = T::eps();
    for (i, r) in tab.iter_mut().enumerate() {
        if i == row {
            continue;
        }
        let factor = r[col].clone();
        if factor.is_zero() {
            continue;
        }
        for j in 0..width {
            if prow[j].is_zero() {
                continue;
            }
            let mut v = r[j].clone() - factor.clone() * prow[j].clone();
            if v.abs() <= eps {
                v = T::zero();
            }
            r[j] = v;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn textbook<T: LpScalar>() -> Lp<T> {
        // max 3x + 5y  s.t. x <= 4, 2y <= 12, 3x + 2y <= 18  -> (2, 6), 36
        let f = T::from_f64;
        let mut lp = Lp::new(vec![f(3.0), f(5.0)]);
        lp.add_row(vec![f(1.0), f(0.0)], f(4.0));
        lp.add_row(vec![f(0.0), f(2.0)], f(12.0));
        lp.add_row(vec![f(3.0), f(2.0)], f(18.0));
        lp
    }

    #[test]
    fn float_textbook() {
        let sol = textbook::<f64>().solve(100).unwrap();
        assert!((sol.value - 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn rational_textbook() {
        let sol = textbook::<BigRational>().solve(100).unwrap();
        assert_eq!(sol.value, BigRational::from_integer(36.into()));
        assert_eq!(sol.x[0], BigRational::from_integer(2.into()));
    }

    #[test]
    fn unbounded_is_reported() {
        let mut lp = Lp::new(vec![1.0, 0.0]);
        lp.add_row(vec![0.0, 1.0], 1.0);
        assert!(lp.solve(100).is_err());
    }

    #[test]
    fn degenerate_program_terminates() {
        // Beale's cycling example under the largest-coefficient rule.
        let mut lp = Lp::new(vec![0.75, -150.0, 0.02, -6.0]);
        lp.add_row(vec![0.25, -60.0, -0.04, 9.0], 0.0);
        lp.add_row(vec![0.5, -90.0, -0.02, 3.0], 0.0);
        lp.add_row(vec![0.0, 0.0, 1.0, 0.0], 1.0);
        let sol = lp.solve(1000).unwrap();
        assert!((sol.value - 0.05).abs() < 1e-9);
    }
}
