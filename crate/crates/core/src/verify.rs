//! The buy-many constraint and the induced buy-one menu ("closure").
//!
//! Strategies are enumerated as stationary deterministic policies. Only
//! states reachable from `∅` get a decision, and only entries that can grow
//! the current state are offered, so policies that differ on irrelevant
//! states are never generated twice.

use serde::Serialize;

use crate::buyer::{buy_many_best_response, buy_one_best_response, evaluate_policy, Action, CompiledMenu, Outcome, Policy, LOOP_EPS};
use crate::dominance::{dominates, expected_size};
use crate::error::{Error, Result};
use crate::model::{ItemSet, Lottery, Menu, Semantics, TypeDistribution, MAX_TABLE_ITEMS};
use crate::TOL;

/// Largest item count for policy enumeration.
pub const MAX_ENUM_ITEMS: usize = 4;

/// Largest number of policies enumerated before giving up.
pub const MAX_POLICIES: u64 = 2_000_000;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureEntry {
    pub outcome: Outcome,
    pub policy: Policy,
}

/// Pareto-filtered outcomes of all strategies against a menu.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ClosureMenu {
    pub n: usize,
    pub policies_enumerated: u64,
    pub entries: Vec<ClosureEntry>,
}

impl ClosureMenu {
    /// The closure as a buy-one menu of lotteries.
    pub fn to_menu(&self) -> Result<Menu> {
        let lotteries = self
            .entries
            .iter()
            .map(|e| Lottery::new(e.outcome.allocation.clone(), e.outcome.payment))
            .collect::<Result<Vec<_>>>()?;
        Menu::new(self.n, lotteries, Semantics::BuyOne)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub policy: Policy,
    pub outcome: Outcome,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerifyReport {
    pub holds: bool,
    pub policies_enumerated: u64,
    pub witness: Option<Violation>,
}

struct Enumerator<'a> {
    menu: &'a Menu,
    compiled: CompiledMenu,
    full: usize,
    policy: Policy,
    reach: Vec<u32>,
    count: u64,
    budget: u64,
}

impl<'a> Enumerator<'a> {
    fn new(menu: &'a Menu, budget: u64) -> Result<Self> {
        let n = menu.n();
        if n > MAX_ENUM_ITEMS {
            return Err(Error::capacity("items for policy enumeration", MAX_ENUM_ITEMS as u64, n as u64));
        }
        let mut reach = vec![0; 1 << n];
        reach[0] = 1;
        Ok(Enumerator {
            menu,
            compiled: CompiledMenu::new(menu),
            full: (1 << n) - 1,
            policy: Policy::stop_everywhere(n),
            reach,
            count: 0,
            budget,
        })
    }

    /// Calls `visit` once per distinct reachable-state policy. `visit`
    /// returns `false` to stop early.
    fn run(&mut self, visit: &mut dyn FnMut(&Policy, Outcome) -> bool) -> Result<bool> {
        self.walk(0, visit)
    }

    fn walk(&mut self, from: usize, visit: &mut dyn FnMut(&Policy, Outcome) -> bool) -> Result<bool> {
        let Some(s) = (from..self.full).find(|&s| self.reach[s] > 0) else {
            self.count += 1;
            if self.count > self.budget {
                return Err(Error::capacity("policies enumerated", self.budget, self.count));
            }
            let outcome = evaluate_policy(&self.policy, self.menu)?;
            return Ok(visit(&self.policy, outcome));
        };
        let state = ItemSet::from_mask(s as u32);
        self.policy.set(state, Action::Stop);
        if !self.walk(s + 1, visit)? {
            return Ok(false);
        }
        for e in 0..self.menu.len() {
            if !self.compiled.prices[e].is_finite() || 1.0 - self.compiled.stay_prob(e, s as u32) <= LOOP_EPS {
                continue;
            }
            let targets: Vec<usize> = self.compiled.supports[e]
                .iter()
                .map(|&(t, _)| s | t as usize)
                .filter(|&t| t != s)
                .collect();
            for &t in &targets {
                self.reach[t] += 1;
            }
            self.policy.set(state, Action::Buy(e));
            let keep_going = self.walk(s + 1, visit);
            for &t in &targets {
                self.reach[t] -= 1;
            }
            if !keep_going? {
                self.policy.set(state, Action::Stop);
                return Ok(false);
            }
        }
        self.policy.set(state, Action::Stop);
        Ok(true)
    }
}

fn same_outcome(a: &Outcome, b: &Outcome) -> bool {
    (a.payment - b.payment).abs() <= TOL && crate::model::same_distribution(&a.allocation, &b.allocation, TOL)
}

/// All strategy outcomes, Pareto-filtered: an outcome is dropped when a
/// different one is no more expensive and dominates its allocation.
pub fn closure(menu: &Menu) -> Result<ClosureMenu> {
    closure_with_budget(menu, MAX_POLICIES)
}

pub fn closure_with_budget(menu: &Menu, budget: u64) -> Result<ClosureMenu> {
    let mut found: Vec<ClosureEntry> = Vec::new();
    let mut en = Enumerator::new(menu, budget)?;
    en.run(&mut |policy, outcome| {
        found.push(ClosureEntry {
            outcome,
            policy: policy.clone(),
        });
        true
    })?;
    let count = en.count;

    // Cheapest first; at equal price, larger expected size first, so any
    // dominator is seen before what it dominates.
    found.sort_by(|a, b| {
        a.outcome
            .payment
            .partial_cmp(&b.outcome.payment)
            .expect("finite payments")
            .then_with(|| {
                expected_size(&b.outcome.allocation)
                    .partial_cmp(&expected_size(&a.outcome.allocation))
                    .expect("finite sizes")
            })
    });
    let mut front: Vec<ClosureEntry> = Vec::new();
    for cand in found {
        let dominated = front.iter().any(|kept| {
            same_outcome(&kept.outcome, &cand.outcome)
                || (kept.outcome.payment <= cand.outcome.payment + TOL
                    && dominates(&kept.outcome.allocation, &cand.outcome.allocation))
        });
        if !dominated {
            front.push(cand);
        }
    }
    Ok(ClosureMenu {
        n: menu.n(),
        policies_enumerated: count,
        entries: front,
    })
}

/// Does every strategy have a single entry (or the null option) that is no
/// more expensive and dominates it?
pub fn verify_buy_many(menu: &Menu) -> Result<VerifyReport> {
    verify_buy_many_with_budget(menu, MAX_POLICIES)
}

pub fn verify_buy_many_with_budget(menu: &Menu, budget: u64) -> Result<VerifyReport> {
    let null = Lottery::null();
    let options: Vec<&Lottery> = std::iter::once(&null).chain(menu.entries()).collect();
    let mut witness = None;
    let mut en = Enumerator::new(menu, budget)?;
    en.run(&mut |policy, outcome| {
        let covered = options
            .iter()
            .any(|l| l.price() <= outcome.payment + TOL && dominates(l.allocation(), &outcome.allocation));
        if !covered {
            witness = Some(Violation {
                policy: policy.clone(),
                outcome,
            });
        }
        covered
    })?;
    Ok(VerifyReport {
        holds: witness.is_none(),
        policies_enumerated: en.count,
        witness,
    })
}

/// Item pricing as an explicit menu: one deterministic entry per subset,
/// priced at the sum of its item prices. Subsets with an infinite price are
/// left out.
pub fn expand_item_pricing(prices: &[f64]) -> Result<Menu> {
    let n = prices.len();
    if n > MAX_TABLE_ITEMS {
        return Err(Error::capacity("items for expanded item pricing", MAX_TABLE_ITEMS as u64, n as u64));
    }
    for (i, &q) in prices.iter().enumerate() {
        if q.is_nan() || q < 0.0 {
            return Err(Error::input(format!("q[{i}]"), format!("item price {q} must be nonnegative")));
        }
    }
    let entries = ItemSet::all(n)
        .map(|s| (s, s.items().map(|i| prices[i]).sum::<f64>()))
        .filter(|(_, p)| p.is_finite())
        .map(|(s, p)| Lottery::deterministic(s, p))
        .collect();
    Menu::new(n, entries, Semantics::BuyMany)
}

/// Revenue-relevant surrogate for verification: every atom gets the same
/// utility and payment whether it may buy once or many times.
pub fn valuation_level_check(menu: &Menu, dist: &TypeDistribution) -> Result<bool> {
    for atom in dist.atoms() {
        let one = buy_one_best_response(&atom.valuation, menu);
        let many = buy_many_best_response(&atom.valuation, menu)?;
        if (one.utility - many.utility).abs() > TOL || (one.payment() - many.payment()).abs() > TOL {
            return Ok(false);
        }
    }
    Ok(true)
}
