//! The closed-form optimal two-item menu for an additive buyer with i.i.d.
//! Beta(1,2) values (density `2 - 2v` on `[0,1]`).

use serde::Serialize;

/// Region threshold `x₀ = y₀`, at the printed four-decimal precision.
pub const X0: f64 = 0.0618;
/// Grand-bundle price, at the printed precision.
pub const P_STAR: f64 = 0.5535;
/// Upper bound on the fractional allocation of the cheap item.
pub const A_BOUND: f64 = 0.147;
/// Price of the entry that allocates the second item surely.
pub const SURE_ITEM_PRICE: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BetaRegion {
    Z,
    A,
    B,
    W,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BetaOutcome {
    pub region: BetaRegion,
    pub allocation: [f64; 2],
    pub price: f64,
}

pub fn density(v: f64) -> f64 {
    2.0 - 2.0 * v
}

/// `(2 - 3t)/(4 - 5t)`, the lower edge of region A in the other coordinate.
pub fn boundary(t: f64) -> f64 {
    (2.0 - 3.0 * t) / (4.0 - 5.0 * t)
}

/// `2/(4 - 5t)²`.
pub fn fractional_allocation(t: f64) -> f64 {
    2.0 / (4.0 - 5.0 * t).powi(2)
}

/// `(15t² - 20t + 8)/(4 - 5t)²`.
pub fn fractional_price(t: f64) -> f64 {
    (15.0 * t * t - 20.0 * t + 8.0) / (4.0 - 5.0 * t).powi(2)
}

pub fn in_a(v1: f64, v2: f64) -> bool {
    (0.0..X0).contains(&v1) && v2 >= boundary(v1) && v2 <= 1.0
}

pub fn in_b(v1: f64, v2: f64) -> bool {
    in_a(v2, v1)
}

pub fn in_w(v1: f64, v2: f64) -> bool {
    (X0..=1.0).contains(&v1) && (X0..=1.0).contains(&v2) && v1 + v2 >= P_STAR
}

pub fn region(v1: f64, v2: f64) -> BetaRegion {
    if in_a(v1, v2) {
        BetaRegion::A
    } else if in_b(v1, v2) {
        BetaRegion::B
    } else if in_w(v1, v2) {
        BetaRegion::W
    } else {
        BetaRegion::Z
    }
}

pub fn beta_outcome(v1: f64, v2: f64) -> BetaOutcome {
    let region = region(v1, v2);
    let (allocation, price) = match region {
        BetaRegion::Z => ([0.0, 0.0], 0.0),
        BetaRegion::A => ([fractional_allocation(v1), 1.0], fractional_price(v1)),
        BetaRegion::B => ([1.0, fractional_allocation(v2)], fractional_price(v2)),
        BetaRegion::W => ([1.0, 1.0], P_STAR),
    };
    BetaOutcome {
        region,
        allocation,
        price,
    }
}

fn grid(step: f64) -> impl Iterator<Item = f64> {
    let k = (1.0 / step).round() as usize;
    (0..=k).map(move |i| i as f64 / k as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PartitionReport {
    pub points: usize,
    pub counts: [usize; 4],
    /// Grid points claimed by more than one of A, B, W.
    pub overlaps: usize,
}

/// Counts grid points per region and checks that A, B and W never overlap.
pub fn partition_check(step: f64) -> PartitionReport {
    let mut counts = [0usize; 4];
    let mut overlaps = 0;
    let mut points = 0;
    for v1 in grid(step) {
        for v2 in grid(step) {
            points += 1;
            let hits = [in_a(v1, v2), in_b(v1, v2), in_w(v1, v2)];
            let k = hits.iter().filter(|&&h| h).count();
            if k > 1 {
                overlaps += 1;
            }
            let idx = match region(v1, v2) {
                BetaRegion::Z => 0,
                BetaRegion::A => 1,
                BetaRegion::B => 2,
                BetaRegion::W => 3,
            };
            counts[idx] += 1;
        }
    }
    PartitionReport { points, counts, overlaps }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BetaVerifyReport {
    pub grid_points: usize,
    /// Smallest `p + (1-a)·0.5 - p*` over the A-entries on the grid.
    pub min_margin: f64,
    pub argmin: f64,
    /// Largest fractional allocation `a` on the grid.
    pub max_a: f64,
    pub all_pass: bool,
    /// `0.5 + (1 - 0.147)·0.5`, the worst case of the two-purchase strategy.
    pub worst_case: f64,
    pub worst_case_holds: bool,
    /// Margin for the mirrored B-entries.
    pub b_min_margin: f64,
}

/// Checks that buying an A-entry and then, if needed, the sure second item
/// never beats buying the grand bundle at `p*`.
pub fn verify_beta_buy_many(step: f64) -> BetaVerifyReport {
    let mut min_margin = f64::INFINITY;
    let mut argmin = 0.0;
    let mut max_a: f64 = 0.0;
    let mut all_pass = true;
    let mut points = 0;
    let mut b_min: f64 = f64::INFINITY;
    for t in grid(step).filter(|&t| t < X0) {
        points += 1;
        let a = fractional_allocation(t);
        let p = fractional_price(t);
        let margin = p + (1.0 - a) * SURE_ITEM_PRICE - P_STAR;
        max_a = max_a.max(a);
        all_pass &= margin >= 0.0 && a < A_BOUND;
        if margin < min_margin {
            min_margin = margin;
            argmin = t;
        }
        let o = beta_outcome(1.0, t);
        b_min = b_min.min(o.price + (1.0 - o.allocation[1]) * SURE_ITEM_PRICE - P_STAR);
    }
    let worst_case = SURE_ITEM_PRICE + (1.0 - A_BOUND) * SURE_ITEM_PRICE;
    BetaVerifyReport {
        grid_points: points,
        min_margin,
        argmin,
        max_a,
        all_pass,
        worst_case,
        worst_case_holds: worst_case > P_STAR,
        b_min_margin: b_min,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IcReport {
    pub types: usize,
    pub entries: usize,
    /// Largest utility gain of any grid type from another type's entry.
    pub max_violation: f64,
    pub worst_type: [f64; 2],
    /// Mismatch of the rounded constants where regions A and W meet.
    pub rounding_slack: f64,
}

/// Mismatch between `p*` and the price that makes a type at `v₁ = x₀`
/// indifferent between its A-entry and the grand bundle.
pub fn rounding_slack() -> f64 {
    let a = fractional_allocation(X0);
    (P_STAR - (fractional_price(X0) + (1.0 - a) * X0)).abs()
}

/// Incentive compatibility among the designated entries of grid types.
pub fn ic_grid_check(step: f64) -> IcReport {
    let mut entries: Vec<([f64; 2], f64)> = vec![([0.0, 0.0], 0.0), ([1.0, 1.0], P_STAR)];
    for t in grid(step).filter(|&t| t < X0) {
        let (a, p) = (fractional_allocation(t), fractional_price(t));
        entries.push(([a, 1.0], p));
        entries.push(([1.0, a], p));
    }
    let mut max_violation: f64 = 0.0;
    let mut worst_type = [0.0, 0.0];
    let mut types = 0;
    for v1 in grid(step) {
        for v2 in grid(step) {
            types += 1;
            let own = beta_outcome(v1, v2);
            let u_own = own.allocation[0] * v1 + own.allocation[1] * v2 - own.price;
            let best = entries
                .iter()
                .map(|(x, p)| x[0] * v1 + x[1] * v2 - p)
                .fold(f64::NEG_INFINITY, f64::max);
            if best - u_own > max_violation {
                max_violation = best - u_own;
                worst_type = [v1, v2];
            }
        }
    }
    IcReport {
        types,
        entries: entries.len(),
        max_violation,
        worst_type,
        rounding_slack: rounding_slack(),
    }
}

/// Midpoint rule with `k` nodes on `[a, b]`.
fn midpoint(a: f64, b: f64, k: usize, f: impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / k as f64;
    (0..k).map(|i| f(a + (i as f64 + 0.5) * h)).sum::<f64>() * h
}

/// `∫_lo^1 (2 - 2v) dv = (1 - lo)²`, clamped to `[0, 1]`.
fn tail(lo: f64) -> f64 {
    let lo = lo.clamp(0.0, 1.0);
    (1.0 - lo) * (1.0 - lo)
}

/// Expected payment of the closed-form menu.
///
/// Iterated quadrature: the outer integral over `v₁` is split at `x₀`; for
/// each `v₁` the inner integral over `v₂` is exact on the constant-price
/// pieces and uses the midpoint rule on the B piece. `points` is split as
/// `√points` nodes per dimension.
pub fn beta_revenue(points: usize) -> f64 {
    let k = ((points as f64).sqrt().round() as usize).max(2);
    // v1 < x0: A above the boundary curve, Z below.
    let left = midpoint(0.0, X0, k, |v1| density(v1) * fractional_price(v1) * tail(boundary(v1)));
    let right = midpoint(X0, 1.0, k, |v1| {
        // v2 < y0: B when v2 is above the inverse boundary.
        let inv = (2.0 - 4.0 * v1) / (3.0 - 5.0 * v1);
        let lo = if v1 >= 0.5 { 0.0 } else { inv.max(0.0) };
        let b = midpoint(lo.min(X0), X0, k, |v2| density(v2) * fractional_price(v2));
        let w = P_STAR * tail((P_STAR - v1).max(X0));
        density(v1) * (b + w)
    });
    left + right
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RevenueReport {
    pub coarse_points: usize,
    pub fine_points: usize,
    pub coarse: f64,
    pub fine: f64,
    pub stable_4dp: bool,
    pub bundle_price: f64,
    pub bundle_revenue: f64,
}

/// Revenue of a posted grand-bundle price under the same density.
pub fn bundle_revenue(price: f64, points: usize) -> f64 {
    let k = ((points as f64).sqrt().round() as usize).max(2);
    // Pr[v2 >= price - v1], split where the inner bound crosses 0 and 1.
    let lo = (price - 1.0).clamp(0.0, 1.0);
    let hi = price.clamp(0.0, 1.0);
    let mid = midpoint(lo, hi, k, |v1| density(v1) * tail(price - v1));
    price * (mid + tail(hi))
}

/// Grid search over bundle prices in `[0, 2]`.
pub fn best_bundle_price(step: f64, points: usize) -> (f64, f64) {
    let k = (2.0 / step).round() as usize;
    let mut best = (0.0, 0.0);
    for i in 0..=k {
        let p = i as f64 * step;
        let r = bundle_revenue(p, points);
        if r > best.1 {
            best = (p, r);
        }
    }
    best
}

pub fn revenue_report(coarse_points: usize, fine_points: usize) -> RevenueReport {
    let coarse = beta_revenue(coarse_points);
    let fine = beta_revenue(fine_points);
    let (bundle_price, bundle_revenue) = best_bundle_price(1e-3, fine_points);
    RevenueReport {
        coarse_points,
        fine_points,
        coarse,
        fine,
        stable_4dp: (coarse - fine).abs() < 5e-5,
        bundle_price,
        bundle_revenue,
    }
}
