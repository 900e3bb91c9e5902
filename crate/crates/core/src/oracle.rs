//! Slow reference implementations used to cross-check the fast paths, plus
//! random instance builders shared by the tests and the self-check.

use rand::Rng;

use crate::dominance;
use crate::error::{Error, Result};
use crate::generators::rng_from_seed;
use crate::model::{ItemSet, Lottery, Menu, Semantics, TypeDistribution, Valuation};
use crate::pricing::{item_pricing_revenue, AlphaDistribution};
use crate::TOL;

/// Largest instance the exhaustive oracles accept.
pub const MAX_ORACLE_ITEMS: usize = 3;

fn check_small(n: usize) -> Result<()> {
    if n > MAX_ORACLE_ITEMS {
        return Err(Error::capacity("items for brute-force oracles", MAX_ORACLE_ITEMS as u64, n as u64));
    }
    Ok(())
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
pub fn solve_linear(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Utility and expected payment of a stationary policy, from the linear
/// system of the absorbing chain. `actions[s]` is `None` for stop.
pub fn policy_value(v: &Valuation, menu: &Menu, actions: &[Option<usize>]) -> Option<(f64, f64)> {
    let size = 1usize << menu.n();
    let mut a = vec![vec![0.0; size]; size];
    let mut bu = vec![0.0; size];
    let mut bp = vec![0.0; size];
    for s in 0..size {
        a[s][s] = 1.0;
        match actions[s] {
            None => bu[s] = v.value(ItemSet::from_mask(s as u32)),
            Some(e) => {
                let l = &menu.entries()[e];
                bu[s] = -l.price();
                bp[s] = l.price();
                for &(t, p) in l.allocation() {
                    a[s][s | t.mask() as usize] -= p;
                }
            }
        }
    }
    let u = solve_linear(a.clone(), bu)?;
    let p = solve_linear(a, bp)?;
    Some((u[0], p[0]))
}

/// Best utility and, among policies within [`TOL`] of it, the largest
/// payment, over every stationary policy. Buying an entry that can never
/// change the held set is excluded (it never terminates).
pub fn brute_force_buy_many(v: &Valuation, menu: &Menu) -> Result<(f64, f64)> {
    let n = menu.n();
    check_small(n)?;
    let size = 1usize << n;
    let full = size - 1;
    let options: Vec<Vec<Option<usize>>> = (0..size)
        .map(|s| {
            let mut o = vec![None];
            if s != full {
                for (e, l) in menu.entries().iter().enumerate() {
                    let stay: f64 = l
                        .allocation()
                        .iter()
                        .filter(|(t, _)| t.mask() as usize & !s == 0)
                        .map(|&(_, p)| p)
                        .sum();
                    if stay < 1.0 - 1e-12 && l.price().is_finite() {
                        o.push(Some(e));
                    }
                }
            }
            o
        })
        .collect();
    let mut idx = vec![0usize; size];
    let mut actions = vec![None; size];
    let mut results: Vec<(f64, f64)> = Vec::new();
    loop {
        for s in 0..size {
            actions[s] = options[s][idx[s]];
        }
        if let Some(r) = policy_value(v, menu, &actions) {
            results.push(r);
        }
        let mut d = 0;
        loop {
            if d == size {
                let best = results.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
                let pay = results
                    .iter()
                    .filter(|r| r.0 >= best - TOL)
                    .map(|r| r.1)
                    .fold(f64::NEG_INFINITY, f64::max);
                return Ok((best, pay));
            }
            idx[d] += 1;
            if idx[d] < options[d].len() {
                break;
            }
            idx[d] = 0;
            d += 1;
        }
    }
}

/// Deterministic menus: buying a set of entries yields their union, so the
/// best strategy is the best subset of entries.
pub fn brute_force_deterministic(v: &Valuation, menu: &Menu) -> Result<(f64, f64)> {
    let m = menu.len();
    if m > 16 {
        return Err(Error::capacity("entries for the subset oracle", 16, m as u64));
    }
    let mut sets = Vec::with_capacity(m);
    for (k, l) in menu.entries().iter().enumerate() {
        if !l.is_deterministic() {
            return Err(Error::input(format!("menu.entries[{k}]"), "entry is not deterministic"));
        }
        sets.push(l.allocation().iter().find(|(_, p)| *p > 0.5).map_or(ItemSet::EMPTY, |x| x.0));
    }
    let mut results = Vec::with_capacity(1 << m);
    for pick in 0u32..(1 << m) {
        let mut got = ItemSet::EMPTY;
        let mut pay = 0.0;
        let mut useful = true;
        for k in 0..m {
            if pick & (1 << k) != 0 {
                // A purchase that adds nothing is never made twice or for free.
                if sets[k].is_subset(got) {
                    useful = false;
                }
                got = got.union(sets[k]);
                pay += menu.entries()[k].price();
            }
        }
        if useful {
            results.push((v.value(got) - pay, pay));
        }
    }
    let best = results.iter().map(|r| r.0).fold(0.0, f64::max);
    let pay = results
        .iter()
        .filter(|r| r.0 >= best - TOL)
        .map(|r| r.1)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((best, pay))
}

/// Dominance through the up-set characterization: `P` dominates `Q` iff
/// `P(U) >= Q(U)` for every up-closed family `U` of sets.
pub fn brute_force_dominates(n: usize, p: &[(ItemSet, f64)], q: &[(ItemSet, f64)]) -> Result<bool> {
    check_small(n)?;
    let size = 1usize << n;
    let mass = |d: &[(ItemSet, f64)], fam: u32| -> f64 {
        d.iter().filter(|(s, _)| fam & (1 << s.index()) != 0).map(|&(_, w)| w).sum()
    };
    for fam in 0u32..(1u32 << size) {
        let up = (0..size).all(|s| {
            fam & (1 << s) == 0 || (0..n).all(|i| fam & (1 << (s | (1 << i))) != 0)
        });
        if up && mass(p, fam) < mass(q, fam) - TOL {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Monte-Carlo estimate of `E_α[rev(α·q)]` with its standard error.
pub fn monte_carlo_scaled_pricing(
    q: &[f64],
    dist: &TypeDistribution,
    alpha: &AlphaDistribution,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = rng_from_seed(seed);
    let mut sum = 0.0;
    let mut sq = 0.0;
    for _ in 0..samples {
        let a = alpha.sample(rng.gen());
        let prices: Vec<f64> = q.iter().map(|&x| a * x).collect();
        let r = item_pricing_revenue(&prices, dist)?;
        sum += r;
        sq += r * r;
    }
    let k = samples as f64;
    let mean = sum / k;
    let var = (sq / k - mean * mean).max(0.0) * k / (k - 1.0).max(1.0);
    Ok((mean, (var / k).sqrt()))
}

/// Exhaustive dominance check of every stationary policy outcome against
/// the menu entries, using the up-set oracle.
pub fn dominance_agrees(n: usize, p: &[(ItemSet, f64)], q: &[(ItemSet, f64)]) -> Result<bool> {
    Ok(brute_force_dominates(n, p, q)? == dominance::dominates(p, q))
}

/// Monotone table valuation with values in `[0, max]`: each set adds a
/// random increment on top of its best proper subset.
pub fn random_valuation<R: Rng + ?Sized>(rng: &mut R, n: usize, max: f64) -> Valuation {
    let size = 1usize << n;
    let step = max / n.max(1) as f64;
    let mut t = vec![0.0; size];
    for s in 1..size {
        let base = (0..n).filter(|i| s & (1 << i) != 0).map(|i| t[s & !(1 << i)]).fold(0.0, f64::max);
        t[s] = (base + rng.gen_range(0.0..step)).min(max);
    }
    Valuation::table(n, t).expect("monotone by construction")
}

pub fn random_additive<R: Rng + ?Sized>(rng: &mut R, n: usize, max: f64) -> Valuation {
    Valuation::additive((0..n).map(|_| rng.gen_range(0.0..max)).collect()).expect("nonnegative weights")
}

/// A lottery on up to three random nonempty sets, leftover mass on `∅`.
pub fn random_lottery<R: Rng + ?Sized>(rng: &mut R, n: usize, max_price: f64) -> Lottery {
    let size = 1u32 << n;
    let k = rng.gen_range(1..=3usize);
    let mut alloc = Vec::with_capacity(k);
    let mut left = 1.0;
    for j in 0..k {
        let s = ItemSet::from_mask(rng.gen_range(1..size));
        let p = if j + 1 == k && rng.gen_bool(0.5) { left } else { rng.gen_range(0.0..=left) };
        left -= p;
        alloc.push((s, p));
    }
    Lottery::with_residual(alloc, rng.gen_range(0.0..max_price)).expect("valid by construction")
}

pub fn random_menu<R: Rng + ?Sized>(rng: &mut R, n: usize, entries: usize, max_price: f64) -> Menu {
    let e = (0..entries).map(|_| random_lottery(rng, n, max_price)).collect();
    Menu::new(n, e, Semantics::BuyMany).expect("valid by construction")
}

pub fn random_deterministic_menu<R: Rng + ?Sized>(rng: &mut R, n: usize, entries: usize, max_price: f64) -> Menu {
    let size = 1u32 << n;
    let e = (0..entries)
        .map(|_| Lottery::deterministic(ItemSet::from_mask(rng.gen_range(1..size)), rng.gen_range(0.0..max_price)))
        .collect();
    Menu::new(n, e, Semantics::BuyMany).expect("valid by construction")
}

/// Random distribution over the support sets, for dominance tests.
pub fn random_set_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<(ItemSet, f64)> {
    let size = 1u32 << n;
    let k = rng.gen_range(1..=4usize);
    let w: Vec<f64> = (0..k).map(|_| rng.gen_range(0.01..1.0)).collect();
    let total: f64 = w.iter().sum();
    w.into_iter().map(|x| (ItemSet::from_mask(rng.gen_range(0..size)), x / total)).collect()
}

pub fn random_distribution<R: Rng + ?Sized>(rng: &mut R, n: usize, atoms: usize, max: f64) -> TypeDistribution {
    let w: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.05..1.0)).collect();
    let total: f64 = w.iter().sum();
    TypeDistribution::new(w.iter().map(|&x| (x / total, random_valuation(rng, n, max))).collect())
        .expect("valid by construction")
}
