//! Finite-menu approximation: drop lotteries with tiny coordinates, round
//! the rest down to a grid and discount prices.
//!
//! A lottery's coordinates are its probabilities on the nonempty sets of its
//! support. For menus over singletons these are the item marginals; the
//! general case treats every nonempty set as a meta-item.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{Lottery, Menu, Semantics, TypeDistribution};
use crate::pricing::revenue;

/// Largest item count for the meta-item encoding (16 meta-items).
pub const MAX_META_ITEMS: usize = 4;

const ROUND_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressionParams {
    pub eps: f64,
    /// Number of coordinates the constants are computed for.
    pub coords: usize,
    pub delta: f64,
    pub grid: f64,
    /// Price factor applied when dropping small coordinates.
    pub drop_discount: f64,
    /// Price factor applied when rounding.
    pub round_discount: f64,
}

impl CompressionParams {
    /// `δ = ε³/k³` for `k` coordinates, grid step `δ²`, discounts `1-√ε`
    /// and `1-√δ`.
    pub fn new(eps: f64, coords: usize) -> Result<Self> {
        if !(eps > 0.0 && eps < 1.0) {
            return Err(Error::input("eps", format!("ε = {eps} must lie in (0,1)")));
        }
        if coords == 0 {
            return Err(Error::input("coords", "need at least one coordinate"));
        }
        let delta = eps.powi(3) / (coords as f64).powi(3);
        Ok(CompressionParams {
            eps,
            coords,
            delta,
            grid: delta * delta,
            drop_discount: 1.0 - eps.sqrt(),
            round_discount: 1.0 - delta.sqrt(),
        })
    }

    /// Largest grid multiple not above `δ`; coordinates below it are dropped,
    /// so rounded survivors never fall under the threshold on a second pass.
    pub fn threshold(&self) -> f64 {
        grid_steps(self.delta, self.grid) * self.grid
    }

    /// `(1 + 1/δ²)^k`, the number of distinct grid allocations.
    pub fn size_bound(&self) -> f64 {
        (1.0 + 1.0 / self.grid).powf(self.coords as f64)
    }

    pub fn log10_size_bound(&self) -> f64 {
        self.coords as f64 * (1.0 + 1.0 / self.grid).log10()
    }
}

fn coordinates(l: &Lottery) -> impl Iterator<Item = f64> + '_ {
    l.allocation().iter().filter(|(s, _)| !s.is_empty()).map(|&(_, p)| p)
}

/// Removes entries with a coordinate in `(0, δ)` and discounts the rest.
pub fn drop_small(menu: &Menu, params: &CompressionParams) -> Result<Menu> {
    let t = grid_steps(params.threshold(), params.grid);
    let kept = menu
        .entries()
        .iter()
        .filter(|l| coordinates(l).all(|x| x <= 0.0 || grid_steps(x, params.grid) >= t))
        .map(|l| l.with_price(l.price() * params.drop_discount))
        .collect();
    Menu::new(menu.n(), kept, menu.semantics())
}

/// Number of whole grid steps in `x`, snapping ratios within float noise of
/// an integer up to it.
fn grid_steps(x: f64, grid: f64) -> f64 {
    let r = x / grid;
    let k = r.round();
    if (r - k).abs() <= ROUND_EPS + 8.0 * f64::EPSILON * r.abs() {
        k
    } else {
        r.floor()
    }
}

fn round_down(x: f64, grid: f64) -> f64 {
    grid_steps(x, grid) * grid
}

/// Rounds every coordinate down to a multiple of `δ²` (leftover mass moves to
/// `∅`) and discounts prices. Entries that round to nothing are dropped and
/// equal allocations keep the lowest price.
pub fn grid_round(menu: &Menu, params: &CompressionParams) -> Result<Menu> {
    let mut out = Vec::with_capacity(menu.len());
    for l in menu.entries() {
        let alloc: Vec<_> = l
            .allocation()
            .iter()
            .filter(|(s, _)| !s.is_empty())
            .map(|&(s, p)| (s, round_down(p, params.grid)))
            .filter(|&(_, p)| p > 0.0)
            .collect();
        if alloc.is_empty() {
            continue;
        }
        out.push(Lottery::with_residual(alloc, l.price() * params.round_discount)?);
    }
    Menu::new(menu.n(), out, menu.semantics())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CompressionPath {
    UnitDemand,
    MetaItem,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CompressionReport {
    pub path: CompressionPath,
    pub params: CompressionParams,
    pub entries_in: usize,
    pub entries_after_drop: usize,
    pub entries_out: usize,
    pub log10_size_bound: f64,
    pub within_size_bound: bool,
    pub revenue_in: f64,
    pub revenue_out: f64,
    /// `(1 - 4√ε)·revenue_in`.
    pub target: f64,
    pub meets_target: bool,
}

fn is_marginal_form(menu: &Menu) -> bool {
    menu.entries().iter().all(|l| l.allocation().iter().all(|(s, _)| s.len() <= 1))
}

fn run(menu: &Menu, dist: &TypeDistribution, params: CompressionParams, path: CompressionPath) -> Result<(Menu, CompressionReport)> {
    let dropped = drop_small(menu, &params)?;
    let out = grid_round(&dropped, &params)?;
    let within = (out.len() as f64).log10() <= params.log10_size_bound() || out.is_empty();
    if !within {
        return Err(Error::invariant("compress", "compressed menu exceeds the grid-size bound"));
    }
    let revenue_in = revenue(menu, dist, Semantics::BuyMany)?;
    let revenue_out = revenue(&out, dist, Semantics::BuyMany)?;
    let target = (1.0 - 4.0 * params.eps.sqrt()) * revenue_in;
    let report = CompressionReport {
        path,
        entries_in: menu.len(),
        entries_after_drop: dropped.len(),
        entries_out: out.len(),
        log10_size_bound: params.log10_size_bound(),
        within_size_bound: within,
        revenue_in,
        revenue_out,
        target,
        meets_target: revenue_out >= target - crate::TOL,
        params,
    };
    Ok((out, report))
}

/// Compresses a menu for a distribution.
///
/// Unit-demand distributions with menus over singletons use the `n` item
/// marginals as coordinates; everything else goes through
/// [`meta_item_compress`].
pub fn compress(menu: &Menu, dist: &TypeDistribution, eps: f64) -> Result<(Menu, CompressionReport)> {
    let unit = dist.atoms().iter().all(|a| a.valuation.is_unit_demand());
    if unit && is_marginal_form(menu) {
        let params = CompressionParams::new(eps, menu.n())?;
        run(menu, dist, params, CompressionPath::UnitDemand)
    } else {
        meta_item_compress(menu, dist, eps)
    }
}

/// Compression with one coordinate per subset of items (`2^n` meta-items,
/// `∅` included in the count).
pub fn meta_item_compress(menu: &Menu, dist: &TypeDistribution, eps: f64) -> Result<(Menu, CompressionReport)> {
    if menu.n() > MAX_META_ITEMS {
        return Err(Error::capacity("items for meta-item compression", MAX_META_ITEMS as u64, menu.n() as u64));
    }
    let params = CompressionParams::new(eps, 1 << menu.n())?;
    run(menu, dist, params, CompressionPath::MetaItem)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ItemSet, MarginalAllocation, Valuation};
    use crate::verify::expand_item_pricing;

    fn marginal_menu(entries: &[(&[f64], f64)]) -> Menu {
        let n = entries[0].0.len();
        Menu::new(
            n,
            entries
                .iter()
                .map(|(x, p)| MarginalAllocation::new(x.to_vec()).unwrap().to_lottery(*p).unwrap())
                .collect(),
            Semantics::BuyMany,
        )
        .unwrap()
    }

    fn marginals(l: &Lottery, n: usize) -> Vec<f64> {
        MarginalAllocation::from_lottery(l, n).unwrap().probs().to_vec()
    }

    #[test]
    fn params_for_half() {
        let p = CompressionParams::new(0.5, 2).unwrap();
        assert_eq!(p.delta, 0.015625);
        assert_eq!(p.grid, 0.000244140625);
        assert_eq!(p.threshold(), p.delta);
    }

    #[test]
    fn drop_small_examples() {
        let p = CompressionParams::new(0.5, 2).unwrap();
        let m = marginal_menu(&[(&[0.01, 0.99], 1.0)]);
        assert!(drop_small(&m, &p).unwrap().is_empty());
        let m = marginal_menu(&[(&[0.0, 1.0], 1.0), (&[0.5, 0.5], 2.0)]);
        let d = drop_small(&m, &p).unwrap();
        assert_eq!(d.len(), 2);
        assert!((d.entries()[0].price() - (1.0 - 0.5f64.sqrt())).abs() < 1e-15);
    }

    #[test]
    fn grid_round_examples() {
        let p = CompressionParams::new(0.5, 2).unwrap();
        let m = marginal_menu(&[(&[0.5, 0.5], 1.0), (&[0.3333, 0.0], 1.0)]);
        let r = grid_round(&m, &p).unwrap();
        assert_eq!(marginals(&r.entries()[0], 2), vec![0.5, 0.5]);
        assert_eq!(marginals(&r.entries()[1], 2), vec![0.333251953125, 0.0]);
        assert!(grid_round(&Menu::empty(2, Semantics::BuyMany), &p).unwrap().is_empty());
    }

    #[test]
    fn item_pricing_survives_intact() {
        let menu = expand_item_pricing(&[1.0, 2.0]).unwrap();
        let d = TypeDistribution::point_mass(Valuation::additive(vec![3.0, 3.0]).unwrap());
        let (out, rep) = compress(&menu, &d, 0.25).unwrap();
        assert_eq!(rep.path, CompressionPath::MetaItem);
        let sold: Vec<_> = menu.entries().iter().filter(|l| !l.allocates_nothing()).collect();
        assert_eq!(out.len(), sold.len());
        let f = rep.params.drop_discount * rep.params.round_discount;
        for (a, b) in sold.into_iter().zip(out.entries()) {
            assert!(a.same_allocation(b, 0.0));
            assert!((b.price() - a.price() * f).abs() < 1e-12);
        }
    }

    #[test]
    fn unit_demand_path_and_fixpoint() {
        let menu = marginal_menu(&[(&[0.5, 0.25], 1.0), (&[0.0, 0.7001], 0.6), (&[0.001, 0.9], 0.7)]);
        let d = TypeDistribution::point_mass(Valuation::unit_demand(vec![2.0, 1.5]).unwrap());
        let (once, rep) = compress(&menu, &d, 0.5).unwrap();
        assert_eq!(rep.path, CompressionPath::UnitDemand);
        assert_eq!(rep.entries_after_drop, 2);
        let (twice, _) = compress(&once, &d, 0.5).unwrap();
        assert_eq!(once.len(), twice.len());
        for (a, b) in once.entries().iter().zip(twice.entries()) {
            assert!(a.same_allocation(b, 0.0));
        }
    }

    #[test]
    fn grid_round_is_stable_for_fine_grids() {
        let p = CompressionParams::new(0.3231572455266557, 8).unwrap();
        for x in [0.5589102277239643, 0.7374854054701148, 0.9999999, p.delta] {
            let once = round_down(x, p.grid);
            assert_eq!(round_down(once, p.grid), once);
        }
    }

    #[test]
    fn meta_item_capacity() {
        let menu = Menu::new(5, vec![Lottery::deterministic(ItemSet::singleton(0), 1.0)], Semantics::BuyMany).unwrap();
        let d = TypeDistribution::point_mass(Valuation::additive(vec![1.0; 5]).unwrap());
        assert!(matches!(meta_item_compress(&menu, &d, 0.5), Err(Error::Capacity { .. })));
    }
}
