//! Multiplicative perturbations of type distributions and the discounted
//! menu construction used to compare revenue before and after.

use log::warn;
use rand::Rng;
use serde::Serialize;

use crate::buyer::buy_many_best_response;
use crate::error::{Error, Result};
use crate::generators::rng_from_seed;
use crate::model::{ItemSet, Menu, TypeDistribution, Valuation, MAX_TABLE_ITEMS};
use crate::pricing::{item_pricing_choice, q_vector, AlphaDistribution};
use crate::verify::{verify_buy_many, MAX_ENUM_ITEMS};
use crate::TOL;

#[derive(Clone, Debug, PartialEq)]
pub enum PerturbMode {
    /// Every valuation multiplied by the same factor.
    Scalar(f64),
    /// One uniform factor in `[1-ε, 1+ε]` per atom.
    RandomScalar,
    /// Independent factor per atom and set, followed by a monotone closure.
    RandomPerSet,
    /// Caller-supplied coupled distribution (atom `k` maps to atom `k`).
    Explicit(TypeDistribution),
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbationSpec {
    pub eps: f64,
    pub mode: PerturbMode,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Perturbation {
    pub perturbed: TypeDistribution,
    /// `coupling[k]` is the perturbed atom coupled with atom `k`.
    pub coupling: Vec<usize>,
}

/// Checks `(1-ε)v(S) <= v'(S) <= (1+ε)v(S)` for every coupled pair and set.
pub fn check_perturbation(dist: &TypeDistribution, perturbed: &TypeDistribution, eps: f64) -> Result<()> {
    if dist.len() != perturbed.len() || dist.n() != perturbed.n() {
        return Err(Error::input("perturbed", "perturbed distribution must have the same atoms and items"));
    }
    let n = dist.n();
    if n > MAX_TABLE_ITEMS {
        return Err(Error::capacity("items for the perturbation check", MAX_TABLE_ITEMS as u64, n as u64));
    }
    for (k, (a, b)) in dist.atoms().iter().zip(perturbed.atoms()).enumerate() {
        if (a.prob - b.prob).abs() > TOL {
            return Err(Error::input(format!("perturbed[{k}].prob"), "coupled atoms must have equal probability"));
        }
        for s in ItemSet::all(n) {
            let v = a.valuation.value(s);
            let w = b.valuation.value(s);
            let slack = TOL * v.max(1.0);
            if w < (1.0 - eps) * v - slack || w > (1.0 + eps) * v + slack {
                return Err(Error::input(
                    format!("perturbed[{k}]"),
                    format!("v'({s}) = {w} outside [(1-ε)·{v}, (1+ε)·{v}] for ε = {eps}"),
                ));
            }
        }
    }
    Ok(())
}

/// `v'(S) = max_{T ⊆ S} f_T·v(T)`: monotone and still within the sandwich.
fn monotone_closure(n: usize, scaled: &[f64]) -> Vec<f64> {
    let mut out = scaled.to_vec();
    for s in 0..out.len() {
        for i in 0..n {
            if s & (1 << i) != 0 {
                out[s] = out[s].max(out[s & !(1 << i)]);
            }
        }
    }
    out
}

pub fn perturb(dist: &TypeDistribution, spec: &PerturbationSpec) -> Result<Perturbation> {
    let eps = spec.eps;
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::input("eps", format!("ε = {eps} must lie in (0,1)")));
    }
    let mut rng = rng_from_seed(spec.seed);
    let perturbed = match &spec.mode {
        PerturbMode::Scalar(f) => {
            if *f < 1.0 - eps - TOL || *f > 1.0 + eps + TOL {
                return Err(Error::input("factor", format!("multiplier {f} outside [1-ε, 1+ε]")));
            }
            dist.scaled(*f)
        }
        PerturbMode::RandomScalar => {
            let vals = dist
                .atoms()
                .iter()
                .map(|a| a.valuation.scaled(rng.gen_range(1.0 - eps..=1.0 + eps)))
                .collect();
            dist.with_valuations(vals)?
        }
        PerturbMode::RandomPerSet => {
            let n = dist.n();
            if n > MAX_TABLE_ITEMS {
                return Err(Error::capacity("items for per-set perturbation", MAX_TABLE_ITEMS as u64, n as u64));
            }
            let mut vals = Vec::with_capacity(dist.len());
            for a in dist.atoms() {
                let scaled: Vec<f64> = a
                    .valuation
                    .to_table()
                    .iter()
                    .map(|&v| v * rng.gen_range(1.0 - eps..=1.0 + eps))
                    .collect();
                vals.push(Valuation::table(n, monotone_closure(n, &scaled))?);
            }
            dist.with_valuations(vals)?
        }
        PerturbMode::Explicit(d) => d.clone(),
    };
    check_perturbation(dist, &perturbed, eps)?;
    Ok(Perturbation {
        coupling: (0..dist.len()).collect(),
        perturbed,
    })
}

/// Every price multiplied by `1 - ε'`.
pub fn discount_menu(menu: &Menu, eps_prime: f64) -> Result<Menu> {
    if !(0.0..1.0).contains(&eps_prime) {
        return Err(Error::input("eps_prime", format!("discount {eps_prime} must lie in [0,1)")));
    }
    Ok(menu.scale_prices(1.0 - eps_prime))
}

fn log_factor(n: usize) -> f64 {
    let l = (n as f64).log2();
    if l > 0.0 {
        l
    } else {
        1.0
    }
}

/// `ε' = ε^{1/6}·n^{1/2}·(log₂ n)^{1/6}`; the log factor is 1 when `n = 1`.
pub fn eps_prime(eps: f64, n: usize) -> f64 {
    eps.powf(1.0 / 6.0) * (n as f64).sqrt() * log_factor(n).powf(1.0 / 6.0)
}

/// `2n·√(8εn log₂ 2n)/ε'`, the revenue share the switching atoms can hold.
fn switching_share(eps: f64, ep: f64, n: usize) -> f64 {
    let nf = n as f64;
    2.0 * nf * (8.0 * eps * nf * (2.0 * nf).log2()).sqrt() / ep
}

/// `(1-ε'²)(1 - 2n√(8εn log₂ 2n)/ε')`, the closing expression of the
/// continuity argument.
pub fn proof_bound(eps: f64, n: usize) -> f64 {
    let ep = eps_prime(eps, n);
    (1.0 - ep * ep) * (1.0 - switching_share(eps, ep, n))
}

/// The same expression with the non-switching loss factor `(1-ε')²`.
pub fn corrected_bound(eps: f64, n: usize) -> f64 {
    let ep = eps_prime(eps, n);
    (1.0 - ep).powi(2) * (1.0 - switching_share(eps, ep, n))
}

/// Which case of the switching-atom argument an atom falls in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SwitchClass {
    /// Most expensive item ever bought under scaled pricing is priced above the threshold.
    HighItem,
    /// ... at or below the threshold.
    LowItem,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AtomRecord {
    pub atom: usize,
    pub prob: f64,
    pub entry_before: Option<usize>,
    pub entry_after: Option<usize>,
    /// Payment under the original menu.
    pub price_before: f64,
    /// Undiscounted price of what is bought under the discounted menu.
    pub price_after: f64,
    pub payment_after: f64,
    pub in_a: bool,
    /// `v([n])` and `ε'²/(2ε)·p` for atoms in `A`.
    pub large_value_lhs: Option<f64>,
    pub large_value_rhs: Option<f64>,
    pub large_value_holds: Option<bool>,
    /// Most expensive item (by `q`) bought at some scale `α`.
    pub top_item: Option<usize>,
    pub class: Option<SwitchClass>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContinuityReport {
    pub n: usize,
    pub eps: f64,
    pub eps_prime: f64,
    /// `false` when `ε' >= 1` and the menu was used undiscounted.
    pub discounted: bool,
    pub menu_verified: Option<bool>,
    pub revenue_before: f64,
    pub revenue_after: f64,
    pub ratio: f64,
    pub proof_bound: f64,
    pub corrected_bound: f64,
    pub a_mass: f64,
    pub a_revenue_before: f64,
    pub large_value_all_hold: bool,
    pub warnings: Vec<String>,
    pub atoms: Vec<AtomRecord>,
}

/// Most expensive item bought (ordering by `q`, then index) over the scale grid.
fn top_item(v: &Valuation, q: &[f64], alpha: &AlphaDistribution) -> Result<Option<usize>> {
    let key = |i: usize| (q[i], i);
    let mut top: Option<usize> = None;
    for (a, _) in alpha.nodes() {
        let prices: Vec<f64> = q.iter().map(|&x| a * x).collect();
        let (set, _, _) = item_pricing_choice(v, &prices)?;
        if let Some(j) = set.items().max_by(|&x, &y| key(x).partial_cmp(&key(y)).unwrap()) {
            if top.is_none_or(|t| key(j) > key(t)) {
                top = Some(j);
            }
        }
    }
    Ok(top)
}

/// Per-atom purchases before and after, the set `A` of atoms that switch to
/// a much cheaper entry, and the diagnostics the argument attaches to `A`.
///
/// `menu_after` must be `menu` with prices scaled by `1 - eps_prime` (or
/// `menu` itself when `eps_prime >= 1`).
pub fn classify_a(
    menu: &Menu,
    menu_after: &Menu,
    dist: &TypeDistribution,
    perturbed: &TypeDistribution,
    coupling: &[usize],
    eps: f64,
    eps_prime: f64,
) -> Result<Vec<AtomRecord>> {
    let n = menu.n();
    let factor = if eps_prime < 1.0 { 1.0 - eps_prime } else { 1.0 };
    let q = q_vector(menu);
    let alpha = AlphaDistribution::standard(n);
    let threshold_scale = (n as f64 * eps_prime * eps_prime / (2.0 * eps * (2.0 * n as f64).log2())).sqrt();
    let full = ItemSet::full(n);
    let mut out = Vec::with_capacity(dist.len());
    for (k, a) in dist.atoms().iter().enumerate() {
        let b = &perturbed.atoms()[coupling[k]];
        let before = buy_many_best_response(&a.valuation, menu)?;
        let after = buy_many_best_response(&b.valuation, menu_after)?;
        let p = before.payment();
        let p_after = after.payment() / factor;
        let in_a = p_after < (1.0 - eps_prime) * p - TOL;
        let mut rec = AtomRecord {
            atom: k,
            prob: a.prob,
            entry_before: before.entry(),
            entry_after: after.entry(),
            price_before: p,
            price_after: p_after,
            payment_after: after.payment(),
            in_a,
            large_value_lhs: None,
            large_value_rhs: None,
            large_value_holds: None,
            top_item: None,
            class: None,
        };
        if in_a {
            let lhs = a.valuation.value(full);
            let rhs = eps_prime * eps_prime / (2.0 * eps) * p;
            rec.large_value_lhs = Some(lhs);
            rec.large_value_rhs = Some(rhs);
            rec.large_value_holds = Some(lhs >= rhs - TOL * rhs.max(1.0));
            rec.top_item = top_item(&a.valuation, &q, &alpha)?;
            rec.class = rec.top_item.map(|j| {
                if q[j] > threshold_scale * p {
                    SwitchClass::HighItem
                } else {
                    SwitchClass::LowItem
                }
            });
        }
        out.push(rec);
    }
    Ok(out)
}

/// Discounts `menu`, evaluates both revenues under buy-many semantics and
/// assembles the report for an explicit coupled pair of distributions.
pub fn continuity_report(menu: &Menu, dist: &TypeDistribution, perturbed: &TypeDistribution, eps: f64) -> Result<ContinuityReport> {
    let n = menu.n();
    let coupling: Vec<usize> = (0..dist.len()).collect();
    let ep = eps_prime(eps, n);
    let mut warnings = Vec::new();
    let discounted = ep < 1.0;
    let menu_after = if discounted {
        discount_menu(menu, ep)?
    } else {
        let msg = format!("ε' = {ep} is at least 1; the menu is evaluated undiscounted");
        warn!("{msg}");
        warnings.push(msg);
        menu.clone()
    };
    let menu_verified = if n <= MAX_ENUM_ITEMS {
        match verify_buy_many(menu) {
            Ok(r) => Some(r.holds),
            Err(Error::Capacity { .. }) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    match menu_verified {
        Some(false) => warnings.push("menu does not satisfy the buy-many constraint".into()),
        None => warnings.push("menu was not verified (too large)".into()),
        Some(true) => {}
    }
    let atoms = classify_a(menu, &menu_after, dist, perturbed, &coupling, eps, ep)?;
    let revenue_before: f64 = atoms.iter().map(|r| r.prob * r.price_before).sum();
    let revenue_after: f64 = atoms.iter().map(|r| r.prob * r.payment_after).sum();
    let a_mass = atoms.iter().filter(|r| r.in_a).map(|r| r.prob).sum();
    let a_revenue_before = atoms.iter().filter(|r| r.in_a).map(|r| r.prob * r.price_before).sum();
    let large_value_all_hold = atoms.iter().all(|r| r.large_value_holds != Some(false));
    Ok(ContinuityReport {
        n,
        eps,
        eps_prime: ep,
        discounted,
        menu_verified,
        revenue_before,
        revenue_after,
        ratio: if revenue_before > 0.0 { revenue_after / revenue_before } else { f64::NAN },
        proof_bound: proof_bound(eps, n),
        corrected_bound: corrected_bound(eps, n),
        a_mass,
        a_revenue_before,
        large_value_all_hold,
        warnings,
        atoms,
    })
}

pub fn run_continuity_experiment(menu: &Menu, dist: &TypeDistribution, spec: &PerturbationSpec) -> Result<ContinuityReport> {
    let p = perturb(dist, spec)?;
    continuity_report(menu, dist, &p.perturbed, spec.eps)
}
