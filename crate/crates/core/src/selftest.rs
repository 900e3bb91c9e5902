//! Oracle-equivalence suite: each check compares a fast path with its slow
//! reference on seeded random instances.

use rand::Rng;
use serde::Serialize;

use crate::buyer::{buy_many_best_response, evaluate_policy, Choice};
use crate::dominance::dominates;
use crate::error::Result;
use crate::generators::rng_from_seed;
use crate::lp::{opt_buy_one, opt_buy_one_exact};
use crate::oracle::*;
use crate::pricing::{item_pricing_revenue, revenue, scaled_pricing_revenue, AlphaDistribution};
use crate::verify::{expand_item_pricing, verify_buy_many};
use crate::Semantics;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckResult {
    pub name: String,
    pub cases: usize,
    pub failures: usize,
    pub first_failure: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SelftestReport {
    pub seed: u64,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
}

struct Check {
    result: CheckResult,
}

impl Check {
    fn new(name: &str) -> Self {
        Check {
            result: CheckResult {
                name: name.into(),
                cases: 0,
                failures: 0,
                first_failure: None,
            },
        }
    }

    fn record(&mut self, ok: bool, detail: impl FnOnce() -> String) {
        self.result.cases += 1;
        if !ok {
            self.result.failures += 1;
            if self.result.first_failure.is_none() {
                self.result.first_failure = Some(detail());
            }
        }
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

/// Runs every check with `cases` random instances each.
pub fn run_selftest(seed: u64, cases: usize, tol: f64) -> Result<SelftestReport> {
    let mut rng = rng_from_seed(seed);
    let mut checks = Vec::new();

    let mut c = Check::new("buy-many dynamic program vs stationary-policy enumeration");
    let mut e = Check::new("optimal policy re-evaluated by forward propagation");
    for _ in 0..cases {
        let n = rng.gen_range(1..=3);
        let v = random_valuation(&mut rng, n, 10.0);
        let k = rng.gen_range(1..=3);
        let m = random_menu(&mut rng, n, k, 10.0);
        let br = buy_many_best_response(&v, &m)?;
        let (u, p) = brute_force_buy_many(&v, &m)?;
        c.record(close(u, br.utility, tol) && close(p, br.payment(), tol), || {
            format!("utility {} vs {u}, payment {} vs {p}", br.utility, br.payment())
        });
        if let Choice::Policy(pol) = &br.choice {
            let out = evaluate_policy(pol, &m)?;
            e.record(close(out.payment, br.payment(), 1e-9) && close(out.utility(&v), br.utility, 1e-9), || {
                format!("forward payment {} vs {}", out.payment, br.payment())
            });
        }
    }
    checks.push(c.result);
    checks.push(e.result);

    let mut c = Check::new("deterministic menus vs best subset of entries");
    for _ in 0..cases {
        let n = rng.gen_range(1..=3);
        let v = random_valuation(&mut rng, n, 10.0);
        let k = rng.gen_range(1..=4);
        let m = random_deterministic_menu(&mut rng, n, k, 10.0);
        let br = buy_many_best_response(&v, &m)?;
        let (u, p) = brute_force_deterministic(&v, &m)?;
        c.record(close(u, br.utility, tol) && close(p, br.payment(), tol), || {
            format!("utility {} vs {u}, payment {} vs {p}", br.utility, br.payment())
        });
    }
    checks.push(c.result);

    let mut c = Check::new("max-flow dominance vs up-set condition");
    for _ in 0..cases {
        let n = rng.gen_range(1..=3);
        let p = random_set_distribution(&mut rng, n);
        let q = random_set_distribution(&mut rng, n);
        let fast = dominates(&p, &q);
        let slow = brute_force_dominates(n, &p, &q)?;
        c.record(fast == slow, || format!("{p:?} vs {q:?}: flow {fast}, up-sets {slow}"));
    }
    checks.push(c.result);

    let mut c = Check::new("posted item prices: direct vs expanded menu");
    let mut vc = Check::new("expanded item pricing satisfies the buy-many constraint");
    for _ in 0..cases {
        let n = rng.gen_range(1..=3);
        let d = random_distribution(&mut rng, n, 3, 10.0);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..6.0)).collect();
        let menu = expand_item_pricing(&q)?;
        let a = item_pricing_revenue(&q, &d)?;
        let b = revenue(&menu, &d, Semantics::BuyMany)?;
        c.record(close(a, b, tol), || format!("q = {q:?}: {a} vs {b}"));
        let r = verify_buy_many(&menu)?;
        vc.record(r.holds, || format!("q = {q:?} fails"));
    }
    checks.push(c.result);
    checks.push(vc.result);

    let mut c = Check::new("buy-one program: double precision vs exact rationals");
    let mut r = Check::new("buy-one program menu reproduces its objective");
    for _ in 0..cases.min(40) {
        let n = rng.gen_range(1..=2);
        let k = rng.gen_range(1..=3);
        let d = random_distribution(&mut rng, n, k, 10.0);
        let f = opt_buy_one(&d)?;
        let x = opt_buy_one_exact(&d)?;
        c.record(close(f.revenue, x.revenue, 1e-6), || format!("{} vs {}", f.revenue, x.revenue));
        let menu_rev = revenue(&f.menu, &d, Semantics::BuyOne)?;
        r.record(close(menu_rev, f.revenue, 1e-6), || format!("menu {menu_rev} vs objective {}", f.revenue));
    }
    checks.push(c.result);
    checks.push(r.result);

    let mut c = Check::new("scaled pricing quadrature vs Monte Carlo (3 standard errors)");
    for k in 0..cases.min(10) {
        let n = rng.gen_range(1..=3);
        let d = random_distribution(&mut rng, n, 3, 10.0);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..8.0)).collect();
        let alpha = AlphaDistribution::standard(n);
        let quad = scaled_pricing_revenue(&q, &d, &alpha)?;
        let (mean, se) = monte_carlo_scaled_pricing(&q, &d, &alpha, 2000, seed ^ k as u64)?;
        c.record((quad - mean).abs() <= 3.0 * se, || format!("quadrature {quad}, Monte Carlo {mean} ± {se}"));
    }
    checks.push(c.result);

    let passed = checks.iter().all(|c| c.failures == 0);
    Ok(SelftestReport { seed, checks, passed })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selftest_passes() {
        let r = run_selftest(11, 60, 1e-9).unwrap();
        for c in &r.checks {
            assert_eq!(c.failures, 0, "{}: {:?}", c.name, c.first_failure);
        }
        assert!(r.passed);
    }
}
