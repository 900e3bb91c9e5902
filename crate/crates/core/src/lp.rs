//! Optimal buy-one mechanism of a finite type distribution.
//!
//! One lottery per atom: weights `x_v(S) >= 0` on the nonempty sets with
//! `Σ_S x_v(S) <= 1` (leftover mass allocates nothing) and a price
//! `p_v >= 0`. The program maximizes `Σ_v f(v)·p_v` subject to incentive
//! compatibility between every ordered pair of atoms and individual
//! rationality. Every constraint has a zero or unit right-hand side, so the
//! all-zero mechanism is a feasible starting basis.

use num_rational::BigRational;

use crate::error::{Error, Result};
use crate::model::{ItemSet, Lottery, Menu, Semantics, TypeDistribution};
use crate::pricing::best_bundle_price;
use crate::simplex::{Lp, LpScalar};
use crate::TOL;

pub const MAX_LP_ATOMS: usize = 64;
pub const MAX_LP_ITEMS: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct OptBuyOne {
    pub menu: Menu,
    pub revenue: f64,
    pub pivots: usize,
    /// Solved in exact rational arithmetic.
    pub exact: bool,
}

/// Distinct nonzero valuations as value tables with their merged weights.
fn merged_types(dist: &TypeDistribution) -> Vec<(f64, Vec<f64>)> {
    let mut types: Vec<(f64, Vec<f64>)> = Vec::new();
    for a in dist.atoms() {
        if a.prob <= 0.0 || a.valuation.is_zero() {
            continue;
        }
        let table = a.valuation.to_table();
        match types.iter_mut().find(|(_, t)| *t == table) {
            Some((p, _)) => *p += a.prob,
            None => types.push((a.prob, table)),
        }
    }
    types
}

fn check_capacity(dist: &TypeDistribution) -> Result<()> {
    if dist.n() > MAX_LP_ITEMS {
        return Err(Error::capacity("items for the buy-one linear program", MAX_LP_ITEMS as u64, dist.n() as u64));
    }
    if dist.len() > MAX_LP_ATOMS {
        return Err(Error::capacity("atoms for the buy-one linear program", MAX_LP_ATOMS as u64, dist.len() as u64));
    }
    Ok(())
}

fn build<T: LpScalar>(types: &[(f64, Vec<f64>)], n: usize) -> Lp<T> {
    let sets = (1usize << n) - 1;
    let block = sets + 1;
    let m = types.len();
    let nv = m * block;
    let x = |v: usize, s: usize| v * block + (s - 1);
    let p = |v: usize| v * block + sets;
    let zero = || vec![T::zero(); nv];

    let mut objective = zero();
    for (v, (f, _)) in types.iter().enumerate() {
        objective[p(v)] = T::from_f64(*f);
    }
    let mut lp = Lp::new(objective);
    for (v, (_, val)) in types.iter().enumerate() {
        // IR: p_v - Σ x_v(S) v(S) <= 0
        let mut row = zero();
        for s in 1..=sets {
            row[x(v, s)] = -T::from_f64(val[s]);
        }
        row[p(v)] = T::one();
        lp.add_row(row, T::zero());

        let mut row = zero();
        for s in 1..=sets {
            row[x(v, s)] = T::one();
        }
        lp.add_row(row, T::one());

        for w in 0..m {
            if w == v {
                continue;
            }
            // IC: Σ x_w(S) v(S) - p_w - Σ x_v(S) v(S) + p_v <= 0
            let mut row = zero();
            for s in 1..=sets {
                row[x(w, s)] = T::from_f64(val[s]);
                row[x(v, s)] = -T::from_f64(val[s]);
            }
            row[p(w)] = -T::one();
            row[p(v)] = T::one();
            lp.add_row(row, T::zero());
        }
    }
    lp
}

fn solve<T: LpScalar>(dist: &TypeDistribution, exact: bool) -> Result<OptBuyOne> {
    check_capacity(dist)?;
    let n = dist.n();
    let types = merged_types(dist);
    if types.is_empty() {
        return Ok(OptBuyOne {
            menu: Menu::empty(n, Semantics::BuyOne),
            revenue: 0.0,
            pivots: 0,
            exact,
        });
    }
    let lp = build::<T>(&types, n);
    let limit = 100 * (lp.vars() + lp.rows.len());
    let sol = lp.solve(limit)?;
    let block = 1usize << n;
    let mut entries = Vec::with_capacity(types.len());
    for v in 0..types.len() {
        let mut alloc = Vec::new();
        let mut mass = 0.0;
        for s in 1..block {
            let w = sol.x[v * block + s - 1].to_f64().max(0.0);
            if w > 0.0 {
                alloc.push((ItemSet::from_mask(s as u32), w));
                mass += w;
            }
        }
        if mass > 1.0 {
            for a in &mut alloc {
                a.1 /= mass;
            }
        }
        let price = sol.x[v * block + block - 1].to_f64().max(0.0);
        if alloc.is_empty() && price <= TOL {
            continue;
        }
        entries.push(Lottery::with_residual(alloc, price)?);
    }
    Ok(OptBuyOne {
        menu: Menu::new(n, entries, Semantics::BuyOne)?,
        revenue: sol.value.to_f64(),
        pivots: sol.pivots,
        exact,
    })
}

/// Optimal buy-one mechanism in double precision.
pub fn opt_buy_one(dist: &TypeDistribution) -> Result<OptBuyOne> {
    solve::<f64>(dist, false)
}

/// Optimal buy-one mechanism in exact rational arithmetic.
pub fn opt_buy_one_exact(dist: &TypeDistribution) -> Result<OptBuyOne> {
    solve::<BigRational>(dist, true)
}

/// Optimal deterministic grand-bundle price for a single-parameter
/// distribution, where every atom values all nonempty sets equally.
pub fn opt_single_parameter(dist: &TypeDistribution) -> Result<(f64, f64)> {
    let full = ItemSet::full(dist.n());
    for (k, a) in dist.atoms().iter().enumerate() {
        let top = a.valuation.value(full);
        if let Some(s) = ItemSet::all(dist.n())
            .skip(1)
            .find(|&s| (a.valuation.value(s) - top).abs() > TOL)
        {
            return Err(Error::input(
                format!("distribution[{k}]"),
                format!("not single-parameter: v({s}) differs from v(full set) = {top}"),
            ));
        }
    }
    Ok(best_bundle_price(dist))
}
