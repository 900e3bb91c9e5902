//! Buyer best response under buy-one and buy-many semantics.
//!
//! Under buy-many semantics the buyer's problem is an optimal stopping
//! problem on the subset lattice: the state is the set of items held, and
//! buying entry `λ = (x, p)` at state `S` moves to `S ∪ T` with `T ~ x`.
//! Every transition either keeps the state (probability `q`) or strictly grows
//! it, so the Bellman equation
//!
//! ```text
//! U(S) = max( v(S), max_λ (Σ_{T: S∪T ⊋ S} x_T U(S∪T) − p) / (1 − q) )
//! ```
//!
//! is solved exactly by one sweep from the grand bundle down to `∅`
//! (supersets have larger bitmasks). The self-loop is folded into the
//! `1/(1−q)` factor, so no iteration to convergence is needed.

use serde::ser::{SerializeSeq, Serializer};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{allocation_to_doc, SetProbDoc};
use crate::model::{ItemSet, Lottery, Menu, Valuation};
use crate::TOL;

/// Largest item count for the buy-many dynamic program (`2^n` states).
pub const MAX_DP_ITEMS: usize = 16;

/// Entries whose stay-probability is this close to one make no progress.
pub(crate) const LOOP_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Action {
    Stop,
    Buy(usize),
}

/// A stationary buying strategy: one action per held set. The grand bundle
/// always stops.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Policy {
    n: usize,
    actions: Vec<Action>,
}

impl Policy {
    pub fn stop_everywhere(n: usize) -> Self {
        Policy {
            n,
            actions: vec![Action::Stop; 1 << n],
        }
    }

    /// `actions[S.index()]` is the action at held set `S`.
    pub fn from_actions(n: usize, mut actions: Vec<Action>) -> Result<Self> {
        if actions.len() != 1 << n {
            return Err(Error::input(
                "policy",
                format!("policy over {n} items needs {} actions, got {}", 1 << n, actions.len()),
            ));
        }
        actions[(1 << n) - 1] = Action::Stop;
        Ok(Policy { n, actions })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn action(&self, state: ItemSet) -> Action {
        self.actions[state.index()]
    }

    pub fn set(&mut self, state: ItemSet, action: Action) {
        if state != ItemSet::full(self.n) {
            self.actions[state.index()] = action;
        }
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }
}

#[derive(Serialize)]
struct PolicyStep {
    state: Vec<usize>,
    buy: usize,
}

impl Serialize for Policy {
    /// Only buying states are listed; every other state stops.
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let steps: Vec<PolicyStep> = self
            .actions
            .iter()
            .enumerate()
            .filter_map(|(s, a)| match a {
                Action::Buy(e) => Some(PolicyStep {
                    state: ItemSet::from_mask(s as u32).items().collect(),
                    buy: *e,
                }),
                Action::Stop => None,
            })
            .collect();
        let mut seq = serializer.serialize_seq(Some(steps.len()))?;
        for step in &steps {
            seq.serialize_element(step)?;
        }
        seq.end()
    }
}

/// The single lottery equivalent to a purchasing strategy.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub allocation: Vec<(ItemSet, f64)>,
    pub payment: f64,
}

impl Outcome {
    pub fn null() -> Self {
        Outcome {
            allocation: vec![(ItemSet::EMPTY, 1.0)],
            payment: 0.0,
        }
    }

    pub fn from_lottery(l: &Lottery) -> Self {
        Outcome {
            allocation: l.allocation().to_vec(),
            payment: l.price(),
        }
    }

    pub fn value(&self, v: &Valuation) -> f64 {
        self.allocation.iter().map(|&(s, p)| p * v.value(s)).sum()
    }

    pub fn utility(&self, v: &Valuation) -> f64 {
        self.value(v) - self.payment
    }

    pub fn prob_of(&self, s: ItemSet) -> f64 {
        self.allocation.iter().find(|(t, _)| *t == s).map_or(0.0, |&(_, p)| p)
    }
}

#[derive(Serialize)]
struct OutcomeDoc {
    allocation: Vec<SetProbDoc>,
    payment: f64,
}

impl Serialize for Outcome {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        OutcomeDoc {
            allocation: allocation_to_doc(&self.allocation),
            payment: self.payment,
        }
        .serialize(serializer)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Choice {
    /// Buy-one: index of the chosen entry, `None` for the null option.
    Entry(Option<usize>),
    Policy(Policy),
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BestResponse {
    pub utility: f64,
    pub outcome: Outcome,
    pub choice: Choice,
}

impl BestResponse {
    pub fn payment(&self) -> f64 {
        self.outcome.payment
    }

    /// Buy-one chosen entry, if any.
    pub fn entry(&self) -> Option<usize> {
        match &self.choice {
            Choice::Entry(e) => *e,
            Choice::Policy(p) => match p.action(ItemSet::EMPTY) {
                Action::Buy(e) => Some(e),
                Action::Stop => None,
            },
        }
    }
}

/// Buy-one: the utility-maximizing entry, or the null option.
///
/// Entries within [`TOL`] of the best utility are tied; ties go to the
/// highest price, then to the lowest index. The null option only wins when no
/// entry ties it.
pub fn buy_one_best_response(v: &Valuation, menu: &Menu) -> BestResponse {
    let utils: Vec<f64> = menu.entries().iter().map(|e| e.utility(v)).collect();
    let best = utils.iter().copied().fold(0.0, f64::max);
    let mut chosen: Option<usize> = None;
    for (k, &u) in utils.iter().enumerate() {
        if u >= best - TOL {
            let better = match chosen {
                None => true,
                Some(c) => menu.entries()[k].price() > menu.entries()[c].price(),
            };
            if better {
                chosen = Some(k);
            }
        }
    }
    match chosen {
        Some(k) => BestResponse {
            utility: best,
            outcome: Outcome::from_lottery(&menu.entries()[k]),
            choice: Choice::Entry(Some(k)),
        },
        None => BestResponse {
            utility: 0.0,
            outcome: Outcome::null(),
            choice: Choice::Entry(None),
        },
    }
}

/// Per-entry support as raw bitmasks, the hot-loop representation.
pub(crate) struct CompiledMenu {
    pub prices: Vec<f64>,
    pub supports: Vec<Vec<(u32, f64)>>,
}

impl CompiledMenu {
    pub fn new(menu: &Menu) -> Self {
        CompiledMenu {
            prices: menu.entries().iter().map(|e| e.price()).collect(),
            supports: menu
                .entries()
                .iter()
                .map(|e| e.allocation().iter().map(|&(s, p)| (s.mask(), p)).collect())
                .collect(),
        }
    }

    /// Probability that buying `entry` at `state` leaves the state unchanged.
    pub fn stay_prob(&self, entry: usize, state: u32) -> f64 {
        self.supports[entry]
            .iter()
            .filter(|&&(t, _)| t & !state == 0)
            .map(|&(_, p)| p)
            .sum()
    }
}

fn check_dp_capacity(n: usize) -> Result<()> {
    if n > MAX_DP_ITEMS {
        return Err(Error::capacity("items for the buy-many dynamic program", MAX_DP_ITEMS as u64, n as u64));
    }
    Ok(())
}

/// Buy-many: optimal adaptive strategy by the descending sweep described in
/// the module docs.
///
/// Ties (actions within [`TOL`] of `U(S)`) favour the seller: buying beats
/// stopping, then the action with the larger expected payment wins, then the
/// lower entry index.
pub fn buy_many_best_response(v: &Valuation, menu: &Menu) -> Result<BestResponse> {
    let n = menu.n();
    check_dp_capacity(n)?;
    if v.n() != n {
        return Err(Error::input("valuation", format!("valuation has {} items, menu has {n}", v.n())));
    }
    let values = v.to_table();
    let compiled = CompiledMenu::new(menu);
    let size = 1usize << n;
    let full = size - 1;
    let mut best = vec![0.0f64; size];
    let mut pay = vec![0.0f64; size];
    let mut actions = vec![Action::Stop; size];
    let mut candidates: Vec<(Action, f64, f64)> = Vec::with_capacity(menu.len() + 1);

    for s in (0..size).rev() {
        if s == full {
            best[s] = values[s];
            continue;
        }
        let state = s as u32;
        candidates.clear();
        candidates.push((Action::Stop, values[s], 0.0));
        for (e, support) in compiled.supports.iter().enumerate() {
            let price = compiled.prices[e];
            if !price.is_finite() {
                continue;
            }
            let mut stay = 0.0;
            let mut cont = 0.0;
            let mut cont_pay = 0.0;
            for &(t, x) in support {
                let next = (state | t) as usize;
                if next == s {
                    stay += x;
                } else {
                    cont += x * best[next];
                    cont_pay += x * pay[next];
                }
            }
            let go = 1.0 - stay;
            if go <= LOOP_EPS {
                continue;
            }
            candidates.push((Action::Buy(e), (cont - price) / go, (price + cont_pay) / go));
        }
        let top = candidates.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
        let mut pick: Option<usize> = None;
        for (k, c) in candidates.iter().enumerate() {
            if c.1 < top - TOL {
                continue;
            }
            let better = match pick.map(|p| &candidates[p]) {
                None => true,
                Some(cur) => match (cur.0, c.0) {
                    (Action::Stop, Action::Buy(_)) => true,
                    (Action::Buy(_), Action::Buy(_)) => c.2 > cur.2,
                    _ => false,
                },
            };
            if better {
                pick = Some(k);
            }
        }
        let pick = pick.expect("maximum is attained");
        best[s] = top;
        actions[s] = candidates[pick].0;
        pay[s] = candidates[pick].2;
    }

    let policy = Policy { n, actions };
    let outcome = evaluate_policy(&policy, menu)?;
    Ok(BestResponse {
        utility: best[0],
        outcome,
        choice: Choice::Policy(policy),
    })
}

/// Absorption distribution and expected payment of a stationary policy,
/// starting from `∅`.
///
/// Probability mass is pushed forward in increasing bitmask order; a state
/// that buys entry `λ` passes its mass to the strictly larger states with
/// weights `x_T / (1 − q)` and pays `p / (1 − q)` per unit of mass.
pub fn evaluate_policy(policy: &Policy, menu: &Menu) -> Result<Outcome> {
    let n = menu.n();
    check_dp_capacity(n)?;
    if policy.n() != n {
        return Err(Error::input("policy", format!("policy over {} items, menu over {n}", policy.n())));
    }
    let compiled = CompiledMenu::new(menu);
    let size = 1usize << n;
    let mut mass = vec![0.0f64; size];
    mass[0] = 1.0;
    let mut payment = 0.0;
    let mut allocation = Vec::new();
    for s in 0..size {
        let m = mass[s];
        if m <= 0.0 {
            continue;
        }
        match policy.actions[s] {
            Action::Stop => allocation.push((ItemSet::from_mask(s as u32), m)),
            Action::Buy(e) => {
                if e >= menu.len() {
                    return Err(Error::input("policy", format!("entry {e} does not exist")));
                }
                let state = s as u32;
                let go = 1.0 - compiled.stay_prob(e, state);
                if go <= LOOP_EPS {
                    return Err(Error::NonTerminating {
                        state: ItemSet::from_mask(state).to_string(),
                        entry: e,
                    });
                }
                payment += m * compiled.prices[e] / go;
                for &(t, x) in &compiled.supports[e] {
                    let next = (state | t) as usize;
                    if next != s {
                        mass[next] += m * x / go;
                    }
                }
            }
        }
    }
    Ok(Outcome { allocation, payment })
}

/// Best response under the given semantics.
pub fn best_response(v: &Valuation, menu: &Menu, semantics: crate::model::Semantics) -> Result<BestResponse> {
    match semantics {
        crate::model::Semantics::BuyOne => Ok(buy_one_best_response(v, menu)),
        crate::model::Semantics::BuyMany => buy_many_best_response(v, menu),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Semantics;

    fn s(items: &[usize]) -> ItemSet {
        ItemSet::from_items(items.iter().copied(), 4).unwrap()
    }

    fn additive(w: &[f64]) -> Valuation {
        Valuation::additive(w.to_vec()).unwrap()
    }

    fn split_menu() -> Menu {
        let l = Lottery::new(vec![(s(&[0]), 0.5), (s(&[1]), 0.5)], 1.0).unwrap();
        Menu::new(2, vec![l], Semantics::BuyMany).unwrap()
    }

    #[test]
    fn buy_one_empty_menu_is_null() {
        let m = Menu::empty(2, Semantics::BuyOne);
        let br = buy_one_best_response(&additive(&[5.0, 5.0]), &m);
        assert_eq!(br.utility, 0.0);
        assert_eq!(br.choice, Choice::Entry(None));
        assert_eq!(br.outcome, Outcome::null());
    }

    #[test]
    fn buy_one_picks_bundle() {
        let m = Menu::new(
            2,
            vec![Lottery::deterministic(s(&[0]), 3.0), Lottery::deterministic(s(&[0, 1]), 5.0)],
            Semantics::BuyOne,
        )
        .unwrap();
        let br = buy_one_best_response(&additive(&[4.0, 3.0]), &m);
        assert_eq!(br.entry(), Some(1));
        assert!((br.utility - 2.0).abs() < 1e-12);
    }

    #[test]
    fn buy_one_tie_goes_to_higher_price() {
        let m = Menu::new(
            2,
            vec![Lottery::deterministic(s(&[0]), 3.0), Lottery::deterministic(s(&[0, 1]), 5.0)],
            Semantics::BuyOne,
        )
        .unwrap();
        let br = buy_one_best_response(&additive(&[4.0, 2.0]), &m);
        assert_eq!(br.entry(), Some(1));
        assert!((br.utility - 1.0).abs() < 1e-12);
    }

    #[test]
    fn buy_many_repeats_split_lottery() {
        let br = buy_many_best_response(&additive(&[10.0, 10.0]), &split_menu()).unwrap();
        assert!((br.utility - 17.0).abs() < 1e-12);
        assert!((br.payment() - 3.0).abs() < 1e-12);
        assert_eq!(br.outcome.allocation, vec![(s(&[0, 1]), 1.0)]);
    }

    #[test]
    fn buy_many_low_values_stop() {
        let br = buy_many_best_response(&additive(&[0.4, 0.4]), &split_menu()).unwrap();
        assert_eq!(br.utility, 0.0);
        assert_eq!(br.outcome, Outcome::null());
    }

    #[test]
    fn buy_many_deterministic_items() {
        let m = Menu::new(
            2,
            vec![Lottery::deterministic(s(&[0]), 1.0), Lottery::deterministic(s(&[1]), 1.0)],
            Semantics::BuyMany,
        )
        .unwrap();
        let br = buy_many_best_response(&additive(&[10.0, 10.0]), &m).unwrap();
        assert!((br.utility - 18.0).abs() < 1e-12);
        assert!((br.payment() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_policy_examples() {
        let m = split_menu();
        let stop = Policy::stop_everywhere(2);
        assert_eq!(evaluate_policy(&stop, &m).unwrap(), Outcome::null());

        let mut repeat = Policy::stop_everywhere(2);
        for st in [s(&[]), s(&[0]), s(&[1])] {
            repeat.set(st, Action::Buy(0));
        }
        let out = evaluate_policy(&repeat, &m).unwrap();
        assert!((out.payment - 3.0).abs() < 1e-12);
        assert_eq!(out.allocation.len(), 1);
        assert!((out.prob_of(s(&[0, 1])) - 1.0).abs() < 1e-12);

        let items = Menu::new(2, vec![Lottery::deterministic(s(&[0]), 1.0)], Semantics::BuyMany).unwrap();
        let mut once = Policy::stop_everywhere(2);
        once.set(ItemSet::EMPTY, Action::Buy(0));
        let out = evaluate_policy(&once, &items).unwrap();
        assert_eq!(out.allocation, vec![(s(&[0]), 1.0)]);
        assert_eq!(out.payment, 1.0);
    }

    #[test]
    fn looping_policy_is_rejected() {
        let items = Menu::new(2, vec![Lottery::deterministic(s(&[0]), 1.0)], Semantics::BuyMany).unwrap();
        let mut lp = Policy::stop_everywhere(2);
        lp.set(ItemSet::EMPTY, Action::Buy(0));
        lp.set(s(&[0]), Action::Buy(0));
        match evaluate_policy(&lp, &items) {
            Err(Error::NonTerminating { state, entry }) => {
                assert_eq!(state, "{0}");
                assert_eq!(entry, 0);
            }
            other => panic!("expected non-termination, got {other:?}"),
        }
    }

    #[test]
    fn capacity_limit() {
        let m = Menu::empty(17, Semantics::BuyMany);
        let v = Valuation::zero(17);
        assert!(matches!(buy_many_best_response(&v, &m), Err(Error::Capacity { .. })));
    }
}
