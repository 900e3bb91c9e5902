//! Explicit instance families: the continuity counterexample, bounded
//! intersection set systems, the unit-demand and XOS hard families and the
//! truncated geometric value law.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{ItemSet, Lottery, Menu, Semantics, TypeDistribution, Valuation, MAX_ITEMS};
use crate::verify::expand_item_pricing;

pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Equal-size item sets with bounded pairwise intersections.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BasicSetSystem {
    pub n: usize,
    pub s: usize,
    pub b: usize,
    /// Sorted item lists.
    pub sets: Vec<Vec<usize>>,
    /// Candidate draws used, rejected ones included.
    pub attempts: u64,
}

fn overlap(a: &[usize], b: &[usize]) -> usize {
    let (mut i, mut j, mut k) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                k += 1;
                i += 1;
                j += 1;
            }
        }
    }
    k
}

impl BasicSetSystem {
    /// Builds a system from explicit sets and checks it.
    pub fn from_sets(n: usize, s: usize, b: usize, mut sets: Vec<Vec<usize>>) -> Result<Self> {
        for set in &mut sets {
            set.sort_unstable();
        }
        let sys = BasicSetSystem {
            n,
            s,
            b,
            sets,
            attempts: 0,
        };
        sys.check()?;
        Ok(sys)
    }

    pub fn count(&self) -> usize {
        self.sets.len()
    }

    /// Exhaustive check of sizes, ranges, distinctness and pairwise overlaps.
    pub fn check(&self) -> Result<()> {
        for (i, set) in self.sets.iter().enumerate() {
            if set.len() != self.s {
                return Err(Error::invariant(format!("sets[{i}]"), format!("size {} != {}", set.len(), self.s)));
            }
            if set.windows(2).any(|w| w[0] >= w[1]) || set.last().is_some_and(|&x| x >= self.n) {
                return Err(Error::invariant(format!("sets[{i}]"), "items must be distinct and below n"));
            }
        }
        for i in 0..self.sets.len() {
            for j in i + 1..self.sets.len() {
                let k = overlap(&self.sets[i], &self.sets[j]);
                if k > self.b || self.sets[i] == self.sets[j] {
                    return Err(Error::invariant(
                        format!("sets[{i}], sets[{j}]"),
                        format!("intersection {k} exceeds bound {}", self.b),
                    ));
                }
            }
        }
        Ok(())
    }

    /// Largest pairwise intersection actually present.
    pub fn max_overlap(&self) -> usize {
        let mut best = 0;
        for i in 0..self.sets.len() {
            for j in i + 1..self.sets.len() {
                best = best.max(overlap(&self.sets[i], &self.sets[j]));
            }
        }
        best
    }

    pub fn item_sets(&self) -> Result<Vec<ItemSet>> {
        self.sets.iter().map(|s| ItemSet::from_items(s.iter().copied(), self.n)).collect()
    }
}

/// Rejection sampler: draws uniform `s`-subsets and keeps those meeting every
/// earlier set in at most `b` items, until `count` sets are kept.
pub fn sample_basic_sets(n: usize, s: usize, b: usize, count: usize, seed: u64, retry_budget: u64) -> Result<BasicSetSystem> {
    if s > n || s == 0 {
        return Err(Error::input("s", format!("set size {s} must be in 1..={n}")));
    }
    if count == 0 {
        return Err(Error::input("count", "need at least one set"));
    }
    let mut rng = rng_from_seed(seed);
    let mut sets: Vec<Vec<usize>> = Vec::with_capacity(count);
    let mut attempts = 0u64;
    while sets.len() < count {
        if attempts >= retry_budget {
            return Err(Error::Failed(format!(
                "set-system sampler found {} of {count} sets after {attempts} attempts",
                sets.len()
            )));
        }
        attempts += 1;
        let mut cand = index::sample(&mut rng, n, s).into_vec();
        cand.sort_unstable();
        if sets.iter().all(|t| overlap(t, &cand) <= b && *t != cand) {
            sets.push(cand);
        }
    }
    let sys = BasicSetSystem { n, s, b, sets, attempts };
    sys.check()?;
    Ok(sys)
}

/// Parameters the lower-bound proofs use at full scale, for display.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PaperScale {
    pub s: f64,
    pub b: f64,
    pub count: f64,
    pub h: f64,
}

pub fn paper_scale(n: usize) -> PaperScale {
    let q = (n as f64).powf(0.25);
    PaperScale {
        s: (n as f64).sqrt(),
        b: q,
        count: 2f64.powf(q),
        h: q / 3.0,
    }
}

/// `Pr[t = 2^a] ∝ 2^{-a}` for `1 <= a <= floor(log2 H)`.
pub fn truncated_geometric_pmf(h: f64) -> Result<Vec<(f64, f64)>> {
    if !(h >= 2.0) || !h.is_finite() {
        return Err(Error::input("H", format!("value cap {h} must be at least 2")));
    }
    let levels = h.log2().floor() as i32;
    let norm = 1.0 - 2f64.powi(-levels);
    Ok((1..=levels).map(|a| (2f64.powi(a), 2f64.powi(-a) / norm)).collect())
}

pub fn truncated_geometric_mean(h: f64) -> Result<f64> {
    Ok(truncated_geometric_pmf(h)?.iter().map(|&(t, p)| t * p).sum())
}

pub fn truncated_geometric<R: Rng + ?Sized>(h: f64, rng: &mut R) -> Result<f64> {
    let pmf = truncated_geometric_pmf(h)?;
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for &(t, p) in &pmf {
        acc += p;
        if u < acc {
            return Ok(t);
        }
    }
    Ok(pmf.last().unwrap().0)
}

/// Unit-demand family whose continuity fails for large `ε`.
#[derive(Clone, Debug, PartialEq)]
pub struct Counterexample {
    pub n: usize,
    pub eps: f64,
    pub delta: f64,
    pub c: f64,
    pub dist: TypeDistribution,
    pub perturbed: TypeDistribution,
    pub prices: Vec<f64>,
}

impl Counterexample {
    /// The item pricing as an explicit buy-many menu.
    pub fn menu(&self) -> Result<Menu> {
        expand_item_pricing(&self.prices)
    }
}

/// Atom `k` (1-based) has probability `c^{-k}`, value `((1+ε)/ε)c^k` for item
/// `k` and `(1/ε)c^k` for every other item; the leftover mass is an explicit
/// zero valuation. The perturbed atom values every item at `(1/ε)c^k`, and
/// item `i` (0-based) is priced at `c^{i+1}`.
pub fn gen_counterexample(n: usize, eps: f64, delta: f64) -> Result<Counterexample> {
    if n == 0 || n > MAX_ITEMS {
        return Err(Error::input("n", format!("item count {n} must be in 1..={MAX_ITEMS}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::input("eps", format!("ε = {eps} must lie in (0,1)")));
    }
    if eps * n as f64 <= 1.0 {
        return Err(Error::input("eps", format!("need ε·n > 1, got {}", eps * n as f64)));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::input("delta", format!("δ = {delta} must lie in (0,1]")));
    }
    let c = (1.0 + delta) / delta;
    let mut atoms = Vec::with_capacity(n + 1);
    let mut perturbed = Vec::with_capacity(n + 1);
    let mut mass = 0.0;
    for k in 1..=n {
        let ck = c.powi(k as i32);
        let prob = c.powi(-(k as i32));
        mass += prob;
        let mut w = vec![ck / eps; n];
        w[k - 1] = (1.0 + eps) / eps * ck;
        atoms.push((prob, Valuation::unit_demand(w)?));
        perturbed.push((prob, Valuation::unit_demand(vec![ck / eps; n])?));
    }
    let rest = (1.0 - mass).max(0.0);
    atoms.push((rest, Valuation::zero(n)));
    perturbed.push((rest, Valuation::zero(n)));
    Ok(Counterexample {
        n,
        eps,
        delta,
        c,
        dist: TypeDistribution::new(atoms)?,
        perturbed: TypeDistribution::new(perturbed)?,
        prices: (1..=n).map(|i| c.powi(i as i32)).collect(),
    })
}

/// A hard instance together with the menu each atom is meant to buy from.
#[derive(Clone, Debug, PartialEq)]
pub struct HardInstance {
    pub dist: TypeDistribution,
    pub menu: Menu,
    pub t: Vec<f64>,
    /// `(1/2N)·Σ t_i`, the revenue the construction predicts.
    pub predicted_revenue: f64,
}

fn draw_values(count: usize, h: f64, t: Option<Vec<f64>>, seed: u64) -> Result<Vec<f64>> {
    match t {
        Some(t) => {
            if t.len() != count {
                return Err(Error::input("t", format!("expected {count} values, got {}", t.len())));
            }
            for (i, &x) in t.iter().enumerate() {
                if !(x >= 1.0 && x <= h) {
                    return Err(Error::input(format!("t[{i}]"), format!("value {x} must lie in [1, H = {h}]")));
                }
            }
            Ok(t)
        }
        None => {
            let mut rng = rng_from_seed(seed);
            (0..count).map(|_| truncated_geometric(h, &mut rng)).collect()
        }
    }
}

fn check_cap(h: f64) -> Result<()> {
    if !(h >= 1.0) {
        return Err(Error::input("H", format!("value cap {h} must be at least 1")));
    }
    Ok(())
}

/// `H·b/s < 1/2`: every cross purchase has negative utility.
pub fn unit_demand_validity(h: f64, b: usize, s: usize) -> f64 {
    h * b as f64 / s as f64
}

/// Unit-demand atoms over the basic sets with a lottery per set.
///
/// Atom `i` has value `t_i` for any item of `S_i`; entry `i` hands out one
/// uniform item of `S_i` at price `t_i / 2`. Values are drawn from the
/// truncated geometric law unless supplied.
pub fn gen_hard_unit_demand(sys: &BasicSetSystem, h: f64, t: Option<Vec<f64>>, seed: u64) -> Result<HardInstance> {
    check_cap(h)?;
    let lhs = unit_demand_validity(h, sys.b, sys.s);
    if lhs >= 0.5 {
        return Err(Error::input("params", format!("validity H·b/s < 1/2 fails: {lhs}")));
    }
    if sys.n > MAX_ITEMS {
        return Err(Error::capacity("items in a hard instance", MAX_ITEMS as u64, sys.n as u64));
    }
    let t = draw_values(sys.count(), h, t, seed)?;
    let w = 1.0 / sys.count() as f64;
    let mut atoms = Vec::new();
    let mut entries = Vec::new();
    for (set, &ti) in sys.sets.iter().zip(&t) {
        let mut weights = vec![0.0; sys.n];
        for &j in set {
            weights[j] = ti;
        }
        atoms.push((w, Valuation::unit_demand(weights)?));
        let alloc = set.iter().map(|&j| (ItemSet::singleton(j), 1.0 / sys.s as f64)).collect();
        entries.push(Lottery::new(alloc, ti / 2.0)?);
    }
    Ok(HardInstance {
        dist: TypeDistribution::new(atoms)?,
        menu: Menu::new(sys.n, entries, Semantics::BuyMany)?,
        predicted_revenue: t.iter().sum::<f64>() * w / 2.0,
        t,
    })
}

/// Largest number of basic sets two collections share.
pub fn collection_overlap(collections: &[Vec<usize>]) -> usize {
    let mut best = 0;
    for i in 0..collections.len() {
        for j in i + 1..collections.len() {
            best = best.max(collections[i].iter().filter(|x| collections[j].contains(x)).count());
        }
    }
    best
}

/// `H·(b'/m + (1 - b'/m)·b/s) < 1/2` with `b'` the collection overlap.
pub fn xos_validity(h: f64, b: usize, s: usize, shared: usize, m: usize) -> f64 {
    let hit = shared as f64 / m as f64;
    h * (hit + (1.0 - hit) * b as f64 / s as f64)
}

/// Groups consecutive basic sets into disjoint collections of size `m`.
pub fn disjoint_collections(sys: &BasicSetSystem, m: usize) -> Result<Vec<Vec<usize>>> {
    if m == 0 || !sys.count().is_multiple_of(m) {
        return Err(Error::input("m", format!("{} sets do not split into collections of {m}", sys.count())));
    }
    Ok((0..sys.count() / m).map(|c| (c * m..(c + 1) * m).collect()).collect())
}

/// XOS atoms over collections of basic sets.
///
/// Atom `i` has one clause per set `S' ∈ C_i`, weight `t_i/s` on each item of
/// `S'`, so it values a member of `C_i` at `t_i`. Entry `i` hands out a
/// uniform member of `C_i` at price `t_i / 2`.
pub fn gen_hard_xos(
    sys: &BasicSetSystem,
    collections: &[Vec<usize>],
    h: f64,
    t: Option<Vec<f64>>,
    seed: u64,
) -> Result<HardInstance> {
    check_cap(h)?;
    let Some(m) = collections.first().map(Vec::len) else {
        return Err(Error::input("collections", "need at least one collection"));
    };
    for (i, c) in collections.iter().enumerate() {
        if c.len() != m || m == 0 {
            return Err(Error::input(format!("collections[{i}]"), format!("every collection needs {m} sets")));
        }
        if let Some(&bad) = c.iter().find(|&&k| k >= sys.count()) {
            return Err(Error::input(format!("collections[{i}]"), format!("set index {bad} out of range")));
        }
    }
    let lhs = xos_validity(h, sys.b, sys.s, collection_overlap(collections), m);
    if lhs >= 0.5 {
        return Err(Error::input("params", format!("validity H·(b'/m + (1-b'/m)·b/s) < 1/2 fails: {lhs}")));
    }
    if sys.n > MAX_ITEMS {
        return Err(Error::capacity("items in a hard instance", MAX_ITEMS as u64, sys.n as u64));
    }
    let t = draw_values(collections.len(), h, t, seed)?;
    let w = 1.0 / collections.len() as f64;
    let mut atoms = Vec::new();
    let mut entries = Vec::new();
    for (c, &ti) in collections.iter().zip(&t) {
        let clauses = c
            .iter()
            .map(|&k| {
                let mut cl = vec![0.0; sys.n];
                for &j in &sys.sets[k] {
                    cl[j] = ti / sys.s as f64;
                }
                cl
            })
            .collect();
        atoms.push((w, Valuation::xos(sys.n, clauses)?));
        let alloc = c
            .iter()
            .map(|&k| Ok((ItemSet::from_items(sys.sets[k].iter().copied(), sys.n)?, 1.0 / m as f64)))
            .collect::<Result<Vec<_>>>()?;
        entries.push(Lottery::new(alloc, ti / 2.0)?);
    }
    Ok(HardInstance {
        dist: TypeDistribution::new(atoms)?,
        menu: Menu::new(sys.n, entries, Semantics::BuyMany)?,
        predicted_revenue: t.iter().sum::<f64>() * w / 2.0,
        t,
    })
}

/// The four disjoint quartiles of 16 items.
pub fn quartiles() -> BasicSetSystem {
    BasicSetSystem::from_sets(16, 4, 0, (0..4).map(|q| (4 * q..4 * q + 4).collect()).collect())
        .expect("quartiles are a valid system")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pricing::revenue;

    #[test]
    fn quartiles_are_valid() {
        let q = quartiles();
        assert_eq!(q.count(), 4);
        assert_eq!(q.max_overlap(), 0);
    }

    #[test]
    fn impossible_system_fails() {
        let err = sample_basic_sets(4, 3, 1, 2, 7, 10_000).unwrap_err();
        assert!(matches!(err, Error::Failed(_)));
    }

    #[test]
    fn sampled_system_is_valid_and_reproducible() {
        let a = sample_basic_sets(16, 4, 2, 8, 42, 100_000).unwrap();
        a.check().unwrap();
        assert!(a.max_overlap() <= 2);
        assert_eq!(a, sample_basic_sets(16, 4, 2, 8, 42, 100_000).unwrap());
    }

    #[test]
    fn pmf_examples() {
        assert_eq!(truncated_geometric_pmf(2.0).unwrap(), vec![(2.0, 1.0)]);
        let p = truncated_geometric_pmf(4.0).unwrap();
        assert!((p[0].1 - 2.0 / 3.0).abs() < 1e-15 && (p[1].1 - 1.0 / 3.0).abs() < 1e-15);
        for h in [2.0, 4.0, 8.0, 64.0] {
            let mean = truncated_geometric_mean(h).unwrap();
            assert!((mean - h.log2() / (1.0 - 1.0 / h)).abs() < 1e-12);
        }
        assert!(truncated_geometric_pmf(1.5).unwrap_err().is_validation());
    }

    #[test]
    fn counterexample_revenue() {
        let cx = gen_counterexample(4, 0.5, 1.0).unwrap();
        assert_eq!(cx.prices, vec![2.0, 4.0, 8.0, 16.0]);
        let rev = revenue(&cx.menu().unwrap(), &cx.dist, Semantics::BuyMany).unwrap();
        assert!((rev - 4.0).abs() < 1e-9);
        assert!(gen_counterexample(2, 0.5, 1.0).is_err());
    }

    #[test]
    fn hard_unit_demand_single_set() {
        let sys = BasicSetSystem::from_sets(4, 2, 0, vec![vec![0, 1]]).unwrap();
        let hi = gen_hard_unit_demand(&sys, 2.0, Some(vec![2.0]), 0).unwrap();
        let rev = revenue(&hi.menu, &hi.dist, Semantics::BuyMany).unwrap();
        assert!((rev - 1.0).abs() < 1e-12);
    }

    #[test]
    fn invalid_hard_params_are_refused() {
        let sys = BasicSetSystem::from_sets(6, 3, 1, vec![vec![0, 1, 2], vec![2, 3, 4]]).unwrap();
        assert!(gen_hard_unit_demand(&sys, 2.0, None, 0).unwrap_err().is_validation());
    }

    #[test]
    fn xos_values_on_basic_sets() {
        let sys = quartiles();
        let cols = disjoint_collections(&sys, 2).unwrap();
        let hi = gen_hard_xos(&sys, &cols, 4.0, Some(vec![4.0, 2.0]), 0).unwrap();
        let v = &hi.dist.atoms()[0].valuation;
        let sets = sys.item_sets().unwrap();
        assert!((v.value(sets[0]) - 4.0).abs() < 1e-12);
        assert!((v.value(sets[1]) - 4.0).abs() < 1e-12);
        assert_eq!(v.value(sets[2]), 0.0);
    }
}
