//! Domain types: item sets, valuations, lotteries, menus and type distributions.

use std::fmt;

use crate::error::{Error, Result};
use crate::TOL;

/// Largest item count a table valuation may be built for.
pub const MAX_TABLE_ITEMS: usize = 20;

/// Largest item count an [`ItemSet`] bitmask can represent.
pub const MAX_ITEMS: usize = 32;

/// A subset of the items `{0, .., n-1}`, stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct ItemSet(u32);

impl ItemSet {
    pub const EMPTY: ItemSet = ItemSet(0);

    pub fn from_mask(mask: u32) -> Self {
        ItemSet(mask)
    }

    /// The grand bundle `{0, .., n-1}`.
    pub fn full(n: usize) -> Self {
        debug_assert!(n <= MAX_ITEMS);
        if n >= 32 {
            ItemSet(u32::MAX)
        } else {
            ItemSet((1u32 << n) - 1)
        }
    }

    pub fn singleton(item: usize) -> Self {
        debug_assert!(item < MAX_ITEMS);
        ItemSet(1 << item)
    }

    /// Builds a set from item indices, rejecting indices `>= n`.
    pub fn from_items<I: IntoIterator<Item = usize>>(items: I, n: usize) -> Result<Self> {
        let mut mask = 0u32;
        for item in items {
            if item >= n || item >= MAX_ITEMS {
                return Err(Error::input(
                    "set",
                    format!("item index {item} out of range for n = {n}"),
                ));
            }
            mask |= 1 << item;
        }
        Ok(ItemSet(mask))
    }

    pub fn mask(self) -> u32 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn contains(self, item: usize) -> bool {
        item < MAX_ITEMS && self.0 & (1 << item) != 0
    }

    pub fn union(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 | other.0)
    }

    pub fn intersection(self, other: ItemSet) -> ItemSet {
        ItemSet(self.0 & other.0)
    }

    pub fn is_subset(self, other: ItemSet) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn is_superset(self, other: ItemSet) -> bool {
        other.is_subset(self)
    }

    /// True when every member is `< n`.
    pub fn fits(self, n: usize) -> bool {
        self.is_subset(ItemSet::full(n))
    }

    pub fn items(self) -> impl Iterator<Item = usize> {
        let mask = self.0;
        (0..MAX_ITEMS).filter(move |&i| mask & (1 << i) != 0)
    }

    /// Every subset of `{0, .., n-1}` in increasing bitmask order.
    pub fn all(n: usize) -> impl Iterator<Item = ItemSet> {
        (0..(1u64 << n)).map(|m| ItemSet(m as u32))
    }
}

impl fmt::Debug for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.items()).finish()
    }
}

impl fmt::Display for ItemSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.items().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValuationKind {
    Table,
    Additive,
    UnitDemand,
    Xos,
}

impl ValuationKind {
    pub fn name(self) -> &'static str {
        match self {
            ValuationKind::Table => "table",
            ValuationKind::Additive => "additive",
            ValuationKind::UnitDemand => "unitdemand",
            ValuationKind::Xos => "xos",
        }
    }
}

/// A monotone set function with `v(∅) = 0`.
#[derive(Clone, Debug, PartialEq)]
pub enum Valuation {
    /// Explicit values for all `2^n` sets, indexed by bitmask.
    Table { n: usize, values: Vec<f64> },
    /// `v(S) = Σ_{i∈S} w_i`.
    Additive(Vec<f64>),
    /// `v(S) = max_{i∈S} w_i`.
    UnitDemand(Vec<f64>),
    /// `v(S) = max_c Σ_{i∈S} c_i` over additive clauses.
    Xos { n: usize, clauses: Vec<Vec<f64>> },
}

fn check_nonneg(values: &[f64], path: &str) -> Result<()> {
    for (i, &x) in values.iter().enumerate() {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::invariant(
                format!("{path}[{i}]"),
                format!("value {x} must be finite and nonnegative"),
            ));
        }
    }
    Ok(())
}

impl Valuation {
    pub fn table(n: usize, values: Vec<f64>) -> Result<Self> {
        if n > MAX_TABLE_ITEMS {
            return Err(Error::capacity(
                "items for a table valuation",
                MAX_TABLE_ITEMS as u64,
                n as u64,
            ));
        }
        if values.len() != 1 << n {
            return Err(Error::input(
                "values",
                format!("table valuation over {n} items needs {} values, got {}", 1 << n, values.len()),
            ));
        }
        check_nonneg(&values, "values")?;
        if values[0] != 0.0 {
            return Err(Error::invariant("values[0]", "v(∅) must be 0"));
        }
        let v = Valuation::Table { n, values };
        v.check_monotone()?;
        Ok(v)
    }

    pub fn additive(weights: Vec<f64>) -> Result<Self> {
        check_nonneg(&weights, "values")?;
        check_item_count(weights.len())?;
        Ok(Valuation::Additive(weights))
    }

    pub fn unit_demand(weights: Vec<f64>) -> Result<Self> {
        check_nonneg(&weights, "values")?;
        check_item_count(weights.len())?;
        Ok(Valuation::UnitDemand(weights))
    }

    pub fn xos(n: usize, clauses: Vec<Vec<f64>>) -> Result<Self> {
        check_item_count(n)?;
        for (c, clause) in clauses.iter().enumerate() {
            if clause.len() != n {
                return Err(Error::input(
                    format!("values[{c}]"),
                    format!("XOS clause has {} weights, expected {n}", clause.len()),
                ));
            }
            check_nonneg(clause, &format!("values[{c}]"))?;
        }
        Ok(Valuation::Xos { n, clauses })
    }

    /// The zero valuation over `n` items.
    pub fn zero(n: usize) -> Self {
        Valuation::Additive(vec![0.0; n])
    }

    pub fn n(&self) -> usize {
        match self {
            Valuation::Table { n, .. } | Valuation::Xos { n, .. } => *n,
            Valuation::Additive(w) | Valuation::UnitDemand(w) => w.len(),
        }
    }

    pub fn kind(&self) -> ValuationKind {
        match self {
            Valuation::Table { .. } => ValuationKind::Table,
            Valuation::Additive(_) => ValuationKind::Additive,
            Valuation::UnitDemand(_) => ValuationKind::UnitDemand,
            Valuation::Xos { .. } => ValuationKind::Xos,
        }
    }

    /// `v(S)`, rejecting sets with items outside `{0, .., n-1}`.
    pub fn evaluate(&self, set: ItemSet) -> Result<f64> {
        if !set.fits(self.n()) {
            return Err(Error::input(
                "set",
                format!("set {set} has items outside 0..{}", self.n()),
            ));
        }
        Ok(self.value(set))
    }

    /// `v(S)` without the range check; items `>= n` are ignored.
    pub fn value(&self, set: ItemSet) -> f64 {
        match self {
            Valuation::Table { n, values } => values[set.intersection(ItemSet::full(*n)).index()],
            Valuation::Additive(w) => set.items().take_while(|&i| i < w.len()).map(|i| w[i]).sum(),
            Valuation::UnitDemand(w) => set
                .items()
                .take_while(|&i| i < w.len())
                .map(|i| w[i])
                .fold(0.0, f64::max),
            Valuation::Xos { clauses, n } => clauses
                .iter()
                .map(|c| set.items().take_while(|&i| i < *n).map(|i| c[i]).sum::<f64>())
                .fold(0.0, f64::max),
        }
    }

    /// Values of all `2^n` sets, indexed by bitmask.
    pub fn to_table(&self) -> Vec<f64> {
        match self {
            Valuation::Table { values, .. } => values.clone(),
            _ => ItemSet::all(self.n()).map(|s| self.value(s)).collect(),
        }
    }

    /// Value of a single item, `v({i})`.
    pub fn item_value(&self, item: usize) -> f64 {
        self.value(ItemSet::singleton(item))
    }

    /// The same valuation with every value multiplied by `factor >= 0`.
    pub fn scaled(&self, factor: f64) -> Valuation {
        let scale = |w: &Vec<f64>| w.iter().map(|x| x * factor).collect::<Vec<_>>();
        match self {
            Valuation::Table { n, values } => Valuation::Table {
                n: *n,
                values: scale(values),
            },
            Valuation::Additive(w) => Valuation::Additive(scale(w)),
            Valuation::UnitDemand(w) => Valuation::UnitDemand(scale(w)),
            Valuation::Xos { n, clauses } => Valuation::Xos {
                n: *n,
                clauses: clauses.iter().map(scale).collect(),
            },
        }
    }

    /// Exhaustive `S ⊆ T ⇒ v(S) <= v(T)` check over single-item extensions.
    pub fn check_monotone(&self) -> Result<()> {
        let n = self.n();
        let table = self.to_table();
        for s in 0..table.len() {
            for i in 0..n {
                let t = s | (1 << i);
                if t != s && table[s] > table[t] + TOL {
                    return Err(Error::invariant(
                        format!("values[{t}]"),
                        format!(
                            "not monotone: v({}) = {} exceeds v({}) = {}",
                            ItemSet(s as u32),
                            table[s],
                            ItemSet(t as u32),
                            table[t]
                        ),
                    ));
                }
            }
        }
        Ok(())
    }

    /// True when `v(S) = max_{i∈S} v({i})` for every set (within [`TOL`]).
    pub fn is_unit_demand(&self) -> bool {
        match self {
            Valuation::UnitDemand(_) => true,
            _ => {
                let n = self.n();
                ItemSet::all(n).all(|s| {
                    let best = s.items().map(|i| self.item_value(i)).fold(0.0, f64::max);
                    (self.value(s) - best).abs() <= TOL
                })
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.value(ItemSet::full(self.n())) == 0.0
    }
}

fn check_item_count(n: usize) -> Result<()> {
    if n > MAX_ITEMS {
        return Err(Error::capacity("items", MAX_ITEMS as u64, n as u64));
    }
    Ok(())
}

/// A probability distribution over item sets together with a price.
#[derive(Clone, Debug, PartialEq)]
pub struct Lottery {
    allocation: Vec<(ItemSet, f64)>,
    price: f64,
}

/// Merges repeated sets, sorts by bitmask and drops zero-probability sets.
fn normalize(mut allocation: Vec<(ItemSet, f64)>) -> Vec<(ItemSet, f64)> {
    allocation.sort_by_key(|(s, _)| *s);
    let mut merged: Vec<(ItemSet, f64)> = Vec::with_capacity(allocation.len());
    for (s, p) in allocation {
        match merged.last_mut() {
            Some((last, q)) if *last == s => *q += p,
            _ => merged.push((s, p)),
        }
    }
    merged.retain(|&(_, p)| p > 0.0);
    merged
}

impl Lottery {
    /// Validates probabilities (nonnegative, summing to one within [`TOL`])
    /// and the price (finite, nonnegative).
    pub fn new(allocation: Vec<(ItemSet, f64)>, price: f64) -> Result<Self> {
        if !(price >= 0.0) || price.is_nan() || price == f64::NEG_INFINITY {
            return Err(Error::invariant("price", format!("price {price} must be nonnegative")));
        }
        for (k, &(_, p)) in allocation.iter().enumerate() {
            if !p.is_finite() || p < -TOL {
                return Err(Error::invariant(
                    format!("allocation[{k}].prob"),
                    format!("probability {p} must be nonnegative"),
                ));
            }
        }
        let total: f64 = allocation.iter().map(|&(_, p)| p.max(0.0)).sum();
        if (total - 1.0).abs() > TOL {
            return Err(Error::invariant(
                "allocation",
                format!("probabilities sum to {total}, expected 1"),
            ));
        }
        let allocation = normalize(allocation.into_iter().map(|(s, p)| (s, p.max(0.0))).collect());
        Ok(Lottery { allocation, price })
    }

    /// Builds a lottery from the probabilities of nonempty sets; the
    /// remaining mass goes to the empty set.
    pub fn with_residual(allocation: Vec<(ItemSet, f64)>, price: f64) -> Result<Self> {
        let mass: f64 = allocation.iter().filter(|(s, _)| !s.is_empty()).map(|&(_, p)| p.max(0.0)).sum();
        if mass > 1.0 + TOL {
            return Err(Error::invariant(
                "allocation",
                format!("nonempty-set probabilities sum to {mass} > 1"),
            ));
        }
        let mut full: Vec<(ItemSet, f64)> = allocation
            .into_iter()
            .filter(|(s, _)| !s.is_empty())
            .map(|(s, p)| (s, p.clamp(0.0, 1.0)))
            .collect();
        let mass: f64 = full.iter().map(|&(_, p)| p).sum();
        if mass > 1.0 {
            for entry in &mut full {
                entry.1 /= mass;
            }
        } else if mass < 1.0 {
            full.push((ItemSet::EMPTY, 1.0 - mass));
        }
        Lottery::new(full, price)
    }

    pub fn deterministic(set: ItemSet, price: f64) -> Self {
        Lottery {
            allocation: vec![(set, 1.0)],
            price,
        }
    }

    /// The free null option: nothing, at price zero.
    pub fn null() -> Self {
        Lottery::deterministic(ItemSet::EMPTY, 0.0)
    }

    pub fn allocation(&self) -> &[(ItemSet, f64)] {
        &self.allocation
    }

    pub fn price(&self) -> f64 {
        self.price
    }

    pub fn with_price(&self, price: f64) -> Lottery {
        Lottery {
            allocation: self.allocation.clone(),
            price,
        }
    }

    /// `E_{S∼x} v(S)`.
    pub fn value(&self, v: &Valuation) -> f64 {
        self.allocation.iter().map(|&(s, p)| p * v.value(s)).sum()
    }

    /// Quasi-linear utility `E v(S) − price`.
    pub fn utility(&self, v: &Valuation) -> f64 {
        self.value(v) - self.price
    }

    /// `Pr_{S∼x}[i ∈ S]`.
    pub fn prob_contains(&self, item: usize) -> f64 {
        self.allocation.iter().filter(|(s, _)| s.contains(item)).map(|&(_, p)| p).sum()
    }

    /// Probability of the set `s` (zero when absent from the support).
    pub fn prob_of(&self, s: ItemSet) -> f64 {
        self.allocation.iter().find(|(t, _)| *t == s).map_or(0.0, |&(_, p)| p)
    }

    /// Union of all sets in the support.
    pub fn support_union(&self) -> ItemSet {
        self.allocation.iter().fold(ItemSet::EMPTY, |acc, &(s, _)| acc.union(s))
    }

    pub fn is_deterministic(&self) -> bool {
        self.allocation.len() == 1
    }

    /// True when the allocation never hands out any item.
    pub fn allocates_nothing(&self) -> bool {
        self.allocation.iter().all(|(s, _)| s.is_empty())
    }

    /// Same support, probabilities equal within `tol`.
    pub fn same_allocation(&self, other: &Lottery, tol: f64) -> bool {
        same_distribution(&self.allocation, &other.allocation, tol)
    }
}

/// Compares two normalized distributions over item sets.
pub fn same_distribution(a: &[(ItemSet, f64)], b: &[(ItemSet, f64)], tol: f64) -> bool {
    let mut i = 0;
    let mut j = 0;
    while i < a.len() || j < b.len() {
        match (a.get(i), b.get(j)) {
            (Some(&(s, p)), Some(&(t, q))) if s == t => {
                if (p - q).abs() > tol {
                    return false;
                }
                i += 1;
                j += 1;
            }
            (Some(&(s, p)), Some(&(t, _))) if s < t => {
                if p > tol {
                    return false;
                }
                i += 1;
            }
            (Some(_), Some(&(_, q))) => {
                if q > tol {
                    return false;
                }
                j += 1;
            }
            (Some(&(_, p)), None) => {
                if p > tol {
                    return false;
                }
                i += 1;
            }
            (None, Some(&(_, q))) => {
                if q > tol {
                    return false;
                }
                j += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    true
}

/// How the buyer may interact with a menu.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Semantics {
    BuyOne,
    BuyMany,
}

impl Semantics {
    pub fn name(self) -> &'static str {
        match self {
            Semantics::BuyOne => "buyone",
            Semantics::BuyMany => "buymany",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "buyone" => Ok(Semantics::BuyOne),
            "buymany" => Ok(Semantics::BuyMany),
            other => Err(Error::input("semantics", format!("unknown semantics {other:?}"))),
        }
    }
}

/// A finite list of lotteries over `n` items. The null lottery is always
/// implicitly available and is not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Menu {
    n: usize,
    entries: Vec<Lottery>,
    semantics: Semantics,
}

impl Menu {
    /// Validates item ranges and collapses entries with identical
    /// allocations to the cheapest one (keeping the first position).
    pub fn new(n: usize, entries: Vec<Lottery>, semantics: Semantics) -> Result<Self> {
        check_item_count(n)?;
        let full = ItemSet::full(n);
        let mut kept: Vec<Lottery> = Vec::with_capacity(entries.len());
        for (k, entry) in entries.into_iter().enumerate() {
            if !entry.support_union().is_subset(full) {
                return Err(Error::input(
                    format!("menu.entries[{k}].allocation"),
                    format!("allocation uses items outside 0..{n}"),
                ));
            }
            match kept.iter_mut().find(|e| e.same_allocation(&entry, TOL)) {
                Some(existing) => {
                    if entry.price < existing.price {
                        existing.price = entry.price;
                    }
                }
                None => kept.push(entry),
            }
        }
        Ok(Menu {
            n,
            entries: kept,
            semantics,
        })
    }

    pub fn empty(n: usize, semantics: Semantics) -> Self {
        Menu {
            n,
            entries: Vec::new(),
            semantics,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn entries(&self) -> &[Lottery] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    pub fn with_semantics(mut self, semantics: Semantics) -> Self {
        self.semantics = semantics;
        self
    }

    /// Multiplies every price by `factor`.
    pub fn scale_prices(&self, factor: f64) -> Menu {
        Menu {
            n: self.n,
            entries: self.entries.iter().map(|e| e.with_price(e.price * factor)).collect(),
            semantics: self.semantics,
        }
    }
}

/// One support point of a [`TypeDistribution`].
#[derive(Clone, Debug, PartialEq)]
pub struct Atom {
    pub prob: f64,
    pub valuation: Valuation,
}

/// A finite distribution over valuations sharing the same item count.
#[derive(Clone, Debug, PartialEq)]
pub struct TypeDistribution {
    n: usize,
    atoms: Vec<Atom>,
}

impl TypeDistribution {
    pub fn new(atoms: Vec<(f64, Valuation)>) -> Result<Self> {
        let Some(first) = atoms.first() else {
            return Err(Error::input("distribution", "distribution has no atoms"));
        };
        let n = first.1.n();
        let mut total = 0.0;
        for (k, (p, v)) in atoms.iter().enumerate() {
            if v.n() != n {
                return Err(Error::input(
                    format!("distribution[{k}].valuation"),
                    format!("valuation over {} items, expected {n}", v.n()),
                ));
            }
            if !p.is_finite() || *p < 0.0 {
                return Err(Error::invariant(
                    format!("distribution[{k}].prob"),
                    format!("probability {p} must be nonnegative"),
                ));
            }
            total += p;
        }
        if (total - 1.0).abs() > TOL {
            return Err(Error::invariant(
                "distribution",
                format!("atom probabilities sum to {total}, expected 1"),
            ));
        }
        Ok(TypeDistribution {
            n,
            atoms: atoms
                .into_iter()
                .map(|(prob, valuation)| Atom { prob, valuation })
                .collect(),
        })
    }

    pub fn point_mass(v: Valuation) -> Self {
        TypeDistribution {
            n: v.n(),
            atoms: vec![Atom {
                prob: 1.0,
                valuation: v,
            }],
        }
    }

    /// Equal weight on every valuation.
    pub fn uniform(valuations: Vec<Valuation>) -> Result<Self> {
        let w = 1.0 / valuations.len() as f64;
        TypeDistribution::new(valuations.into_iter().map(|v| (w, v)).collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `D_{|A}`: atoms outside `keep` become the zero valuation.
    pub fn restrict(&self, keep: impl Fn(usize) -> bool) -> TypeDistribution {
        TypeDistribution {
            n: self.n,
            atoms: self
                .atoms
                .iter()
                .enumerate()
                .map(|(k, a)| Atom {
                    prob: a.prob,
                    valuation: if keep(k) { a.valuation.clone() } else { Valuation::zero(self.n) },
                })
                .collect(),
        }
    }

    /// Replaces the valuations atom-by-atom, keeping the probabilities.
    pub fn with_valuations(&self, valuations: Vec<Valuation>) -> Result<TypeDistribution> {
        if valuations.len() != self.atoms.len() {
            return Err(Error::input(
                "distribution",
                format!("expected {} valuations, got {}", self.atoms.len(), valuations.len()),
            ));
        }
        TypeDistribution::new(self.atoms.iter().map(|a| a.prob).zip(valuations).collect())
    }

    pub fn scaled(&self, factor: f64) -> TypeDistribution {
        TypeDistribution {
            n: self.n,
            atoms: self
                .atoms
                .iter()
                .map(|a| Atom {
                    prob: a.prob,
                    valuation: a.valuation.scaled(factor),
                })
                .collect(),
        }
    }
}

/// Unit-demand view of an allocation: probability of receiving each item.
#[derive(Clone, Debug, PartialEq)]
pub struct MarginalAllocation(Vec<f64>);

impl MarginalAllocation {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() || p < 0.0 {
                return Err(Error::invariant(format!("x[{i}]"), format!("probability {p} must be nonnegative")));
            }
        }
        let total: f64 = probs.iter().sum();
        if total > 1.0 + TOL {
            return Err(Error::invariant("x", format!("marginals sum to {total} > 1")));
        }
        Ok(MarginalAllocation(probs))
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn n(&self) -> usize {
        self.0.len()
    }

    /// Lottery over singletons, with the leftover mass on the empty set.
    pub fn to_lottery(&self, price: f64) -> Result<Lottery> {
        Lottery::with_residual(
            self.0.iter().enumerate().map(|(i, &p)| (ItemSet::singleton(i), p)).collect(),
            price,
        )
    }

    /// Reads back a lottery whose support is singletons plus `∅`.
    pub fn from_lottery(lottery: &Lottery, n: usize) -> Result<Self> {
        let mut probs = vec![0.0; n];
        for &(s, p) in lottery.allocation() {
            match s.len() {
                0 => {}
                1 => {
                    let i = s.items().next().expect("singleton");
                    if i >= n {
                        return Err(Error::input("allocation", format!("item {i} out of range")));
                    }
                    probs[i] += p;
                }
                _ => {
                    return Err(Error::input(
                        "allocation",
                        format!("set {s} is not a singleton; no marginal form"),
                    ))
                }
            }
        }
        MarginalAllocation::new(probs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(items: &[usize]) -> ItemSet {
        ItemSet::from_items(items.iter().copied(), 8).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let s01 = set(&[0, 1]);
        assert_eq!(Valuation::additive(vec![3.0, 4.0]).unwrap().evaluate(s01).unwrap(), 7.0);
        assert_eq!(Valuation::unit_demand(vec![3.0, 4.0]).unwrap().evaluate(s01).unwrap(), 4.0);
        let xos = Valuation::xos(2, vec![vec![1.0, 0.0], vec![0.0, 2.0]]).unwrap();
        assert_eq!(xos.evaluate(s01).unwrap(), 2.0);
    }

    #[test]
    fn evaluate_rejects_out_of_range() {
        let v = Valuation::additive(vec![1.0, 1.0]).unwrap();
        assert!(matches!(v.evaluate(ItemSet::singleton(2)), Err(Error::Input { .. })));
    }

    #[test]
    fn lottery_value_examples() {
        let v = Valuation::additive(vec![10.0, 10.0]).unwrap();
        let l = Lottery::new(vec![(set(&[0]), 0.5), (set(&[1]), 0.5)], 1.0).unwrap();
        assert_eq!(l.value(&v), 10.0);
        assert_eq!(l.utility(&v), 9.0);
        assert_eq!(Lottery::null().value(&v), 0.0);
        assert_eq!(Lottery::null().utility(&v), 0.0);

        let t = Valuation::table(2, vec![0.0, 2.0, 0.0, 5.0]).unwrap();
        let l = Lottery::new(vec![(set(&[0]), 0.5), (set(&[0, 1]), 0.5)], 0.0).unwrap();
        assert!((l.value(&t) - 3.5).abs() < 1e-12);

        let ud = Valuation::unit_demand(vec![3.0, 4.0]).unwrap();
        assert_eq!(Lottery::deterministic(set(&[1]), 4.0).utility(&ud), 0.0);
    }

    #[test]
    fn table_monotonicity_is_enforced() {
        let err = Valuation::table(2, vec![0.0, 3.0, 0.0, 2.0]).unwrap_err();
        assert!(matches!(err, Error::Invariant { .. }));
        assert!(Valuation::table(1, vec![1.0, 2.0]).is_err());
    }

    #[test]
    fn lottery_probability_sum_is_enforced() {
        let err = Lottery::new(vec![(set(&[0]), 0.8)], 1.0).unwrap_err();
        assert!(matches!(err, Error::Invariant { .. }));
    }

    #[test]
    fn menu_dedups_identical_allocations() {
        let a = Lottery::deterministic(set(&[0]), 3.0);
        let b = Lottery::deterministic(set(&[0]), 2.0);
        let c = Lottery::deterministic(set(&[1]), 1.0);
        let m = Menu::new(2, vec![a, c, b], Semantics::BuyOne).unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.entries()[0].price(), 2.0);
        assert_eq!(m.entries()[1].price(), 1.0);
    }

    #[test]
    fn kinds_agree_with_tables_and_are_monotone() {
        let w = vec![0.5, 3.0, 1.25, 2.0];
        for v in [
            Valuation::additive(w.clone()).unwrap(),
            Valuation::unit_demand(w.clone()).unwrap(),
            Valuation::xos(4, vec![w.clone(), vec![4.0, 0.0, 0.0, 1.0]]).unwrap(),
        ] {
            let t = Valuation::table(4, v.to_table()).unwrap();
            for s in ItemSet::all(4) {
                assert_eq!(v.value(s), t.value(s));
            }
            v.check_monotone().unwrap();
        }
    }

    #[test]
    fn marginal_round_trip() {
        let x = MarginalAllocation::new(vec![0.25, 0.5]).unwrap();
        let l = x.to_lottery(1.0).unwrap();
        assert!((l.prob_of(ItemSet::EMPTY) - 0.25).abs() < 1e-12);
        assert_eq!(MarginalAllocation::from_lottery(&l, 2).unwrap(), x);
        let bundle = Lottery::deterministic(set(&[0, 1]), 1.0);
        assert!(MarginalAllocation::from_lottery(&bundle, 2).is_err());
    }

    #[test]
    fn restrict_zeroes_atoms() {
        let d = TypeDistribution::new(vec![
            (0.5, Valuation::additive(vec![1.0]).unwrap()),
            (0.5, Valuation::additive(vec![2.0]).unwrap()),
        ])
        .unwrap();
        let r = d.restrict(|k| k == 1);
        assert!(r.atoms()[0].valuation.is_zero());
        assert_eq!(r.atoms()[1].valuation.item_value(0), 2.0);
    }
}
