//! End-to-end acceptance criteria. Each test writes one PASS/FAIL line to
//! stderr (bypassing the test harness capture) and then asserts.

use std::io::Write;
use std::time::Instant;

use buymany::beta;
use buymany::buyer::{buy_many_best_response, Action, Choice};
use buymany::compress::compress;
use buymany::generators::{
    disjoint_collections, gen_counterexample, gen_hard_unit_demand, gen_hard_xos, quartiles, rng_from_seed,
    sample_basic_sets, BasicSetSystem, HardInstance,
};
use buymany::lp::{opt_buy_one, opt_single_parameter};
use buymany::oracle::{brute_force_buy_many, random_distribution, random_menu, random_valuation};
use buymany::perturb::{check_perturbation, corrected_bound, continuity_report, perturb, PerturbMode, PerturbationSpec};
use buymany::pricing::revenue;
use buymany::verify::{expand_item_pricing, verify_buy_many};
use buymany::{ItemSet, Lottery, Menu, Semantics, TypeDistribution};
use rand::Rng;

fn report(criterion: u32, ok: bool, detail: &str) {
    let line = format!("criterion {criterion}: {}  {detail}\n", if ok { "PASS" } else { "FAIL" });
    let _ = std::io::stderr().write_all(line.as_bytes());
}

#[test]
fn criterion_1_counterexample() {
    let start = Instant::now();
    let cx = gen_counterexample(4, 0.5, 1.0).unwrap();
    let rev = revenue(&cx.menu().unwrap(), &cx.dist, Semantics::BuyMany).unwrap();
    let (price, single) = opt_single_parameter(&cx.perturbed).unwrap();
    let lp = opt_buy_one(&cx.perturbed).unwrap();
    let coupling = check_perturbation(&cx.dist, &cx.perturbed, cx.eps).is_ok();
    let elapsed = start.elapsed().as_secs_f64();
    let ok = (rev - 4.0).abs() <= 1e-9
        && (single - 3.75).abs() <= 1e-6
        && (lp.revenue - 3.75).abs() <= 1e-6
        && coupling
        && elapsed < 1.0;
    report(
        1,
        ok,
        &format!(
            "pricing revenue {rev:?}, single-parameter optimum {single:?} at price {price:?}, \
             buy-one optimum {:?}, coupling valid {coupling}, {elapsed:.3}s",
            lp.revenue
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_2_dp_vs_brute_force() {
    let start = Instant::now();
    let mut rng = rng_from_seed(2024);
    let mut worst_u: f64 = 0.0;
    let mut worst_p: f64 = 0.0;
    let cases = 600;
    for _ in 0..cases {
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=3);
        let v = random_valuation(&mut rng, n, 10.0);
        let m = random_menu(&mut rng, n, k, 10.0);
        let br = buy_many_best_response(&v, &m).unwrap();
        let (u, p) = brute_force_buy_many(&v, &m).unwrap();
        worst_u = worst_u.max((u - br.utility).abs());
        worst_p = worst_p.max((p - br.payment()).abs());
    }
    let elapsed = start.elapsed().as_secs_f64();
    let ok = worst_u <= 1e-9 && worst_p <= 1e-9 && elapsed < 60.0;
    report(
        2,
        ok,
        &format!("{cases} instances, max utility gap {worst_u:e}, max payment gap {worst_p:e}, {elapsed:.2}s"),
    );
    assert!(ok);
}

#[test]
fn criterion_3_verification() {
    let mut rng = rng_from_seed(33);
    let mut pricing_ok = 0;
    for _ in 0..100 {
        let n = rng.gen_range(1..=3);
        let q: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..10.0)).collect();
        if verify_buy_many(&expand_item_pricing(&q).unwrap()).unwrap().holds {
            pricing_ok += 1;
        }
    }

    let s = |m: u32| ItemSet::from_mask(m);
    let bad = Menu::new(
        2,
        vec![
            Lottery::deterministic(s(1), 1.0),
            Lottery::deterministic(s(2), 1.0),
            Lottery::deterministic(s(3), 3.0),
        ],
        Semantics::BuyMany,
    )
    .unwrap();
    let r = verify_buy_many(&bad).unwrap();
    let witness_payment = r.witness.as_ref().map(|w| w.outcome.payment);
    let bad_ok = !r.holds && witness_payment.is_some_and(|p| (p - 2.0).abs() <= 1e-9);

    let mut verified = Vec::new();
    let mut drawn = 0;
    while verified.len() < 100 {
        drawn += 1;
        let n = rng.gen_range(1..=3);
        let k = rng.gen_range(1..=3);
        let m = random_menu(&mut rng, n, k, 10.0);
        if verify_buy_many(&m).unwrap().holds {
            verified.push(m);
        }
    }
    let mut scaled_ok = 0;
    for m in &verified {
        if [0.5, 0.9].iter().all(|&g| verify_buy_many(&m.scale_prices(g)).unwrap().holds) {
            scaled_ok += 1;
        }
    }
    let ok = pricing_ok == 100 && bad_ok && scaled_ok == verified.len();
    report(
        3,
        ok,
        &format!(
            "item pricings verified {pricing_ok}/100, counterexample menu holds={} witness payment {witness_payment:?}, \
             scaled menus verified {scaled_ok}/{} (drawn {drawn})",
            r.holds,
            verified.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_4_compression() {
    let mut rng = rng_from_seed(44);
    let mut instances = 0;
    let mut drawn = 0;
    let mut failures = Vec::new();
    while instances < 50 {
        drawn += 1;
        let atoms = rng.gen_range(2..=4);
        let d = random_distribution(&mut rng, 2, atoms, 10.0);
        let m = opt_buy_one(&d).unwrap().menu.with_semantics(Semantics::BuyMany);
        if !verify_buy_many(&m).unwrap().holds {
            continue;
        }
        instances += 1;
        for eps in [0.25, 0.5] {
            let (once, rep) = compress(&m, &d, eps).unwrap();
            let (twice, _) = compress(&once, &d, eps).unwrap();
            let fixpoint = once.len() == twice.len()
                && once.entries().iter().zip(twice.entries()).all(|(a, b)| a.same_allocation(b, 0.0));
            if !(rep.within_size_bound && fixpoint && rep.meets_target) {
                failures.push(format!("eps {eps}: {rep:?}, fixpoint {fixpoint}"));
            }
        }
    }
    let ok = failures.is_empty();
    report(
        4,
        ok,
        &format!(
            "{instances} verified instances (drawn {drawn}), eps in {{0.25, 0.5}}, failures {}",
            failures.len()
        ),
    );
    assert!(ok, "{failures:?}");
}

fn hard_instance_holds(h: &HardInstance) -> Result<(), String> {
    for (i, atom) in h.dist.atoms().iter().enumerate() {
        let br = buy_many_best_response(&atom.valuation, &h.menu).map_err(|e| e.to_string())?;
        let Choice::Policy(p) = &br.choice else {
            return Err("not a policy".into());
        };
        if p.action(ItemSet::EMPTY) != Action::Buy(i) {
            return Err(format!("atom {i} starts with {:?}", p.action(ItemSet::EMPTY)));
        }
        for &(s, _) in h.menu.entries()[i].allocation() {
            if p.action(s) != Action::Stop {
                return Err(format!("atom {i} keeps buying at {s}"));
            }
        }
        if (br.payment() - h.t[i] / 2.0).abs() > 1e-9 {
            return Err(format!("atom {i} pays {}", br.payment()));
        }
    }
    let rev = revenue(&h.menu, &h.dist, Semantics::BuyMany).map_err(|e| e.to_string())?;
    if (rev - h.predicted_revenue).abs() > 1e-9 {
        return Err(format!("revenue {rev} vs {}", h.predicted_revenue));
    }
    Ok(())
}

#[test]
fn criterion_5_hard_families() {
    let mut rng = rng_from_seed(55);
    let mut checked = 0;
    let mut failures = Vec::new();
    let mut run = |name: String, h: buymany::Result<HardInstance>| {
        checked += 1;
        match h {
            Ok(h) => {
                if let Err(e) = hard_instance_holds(&h) {
                    failures.push(format!("{name}: {e}"));
                }
            }
            Err(e) => failures.push(format!("{name}: {e}")),
        }
    };

    for seed in 0..4 {
        // Overlapping sets: H·b/s < 1/2 forces H < 2, so values are supplied.
        let sys = sample_basic_sets(12, 4, 1, 6, seed, 1_000_000).unwrap();
        let t: Vec<f64> = (0..6).map(|_| rng.gen_range(1.0..1.9)).collect();
        run(format!("unit-demand n=12 s=4 b=1 seed {seed}"), gen_hard_unit_demand(&sys, 1.9, Some(t), seed));
        // Disjoint pairs: any cap is valid; values from the truncated geometric law.
        let sys = sample_basic_sets(16, 2, 0, 6, seed, 1_000_000).unwrap();
        run(format!("unit-demand n=16 s=2 b=0 seed {seed}"), gen_hard_unit_demand(&sys, 8.0, None, seed));
    }

    let q = quartiles();
    let cols = disjoint_collections(&q, 2).unwrap();
    for seed in 0..2 {
        run(format!("xos quartiles seed {seed}"), gen_hard_xos(&q, &cols, 8.0, None, seed));
    }
    let pairs = BasicSetSystem::from_sets(12, 2, 0, (0..6).map(|k| vec![2 * k, 2 * k + 1]).collect()).unwrap();
    let cols = disjoint_collections(&pairs, 2).unwrap();
    run("xos pairs".into(), gen_hard_xos(&pairs, &cols, 4.0, None, 9));

    let ok = failures.is_empty();
    report(5, ok, &format!("{checked} hard instances, failures {failures:?}"));
    assert!(ok);
}

#[test]
fn criterion_6_continuity() {
    let epsilons = [1e-8, 1e-10, 1e-12];
    let mut rng = rng_from_seed(66);
    let mut instances = Vec::new();
    let mut drawn = 0;
    while instances.len() < 20 {
        drawn += 1;
        let atoms = rng.gen_range(2..=4);
        let d: TypeDistribution = random_distribution(&mut rng, 2, atoms, 10.0);
        let m = opt_buy_one(&d).unwrap().menu.with_semantics(Semantics::BuyMany);
        if verify_buy_many(&m).unwrap().holds && revenue(&m, &d, Semantics::BuyMany).unwrap() > 0.0 {
            instances.push((d, m));
        }
    }

    let mut bound_ok = 0;
    let mut corrected_ok = 0;
    let mut monotone_ok = 0;
    let mut large_value_ok = true;
    let mut a_atoms = 0;
    let mut worst_gap = f64::INFINITY;
    for (k, (d, m)) in instances.iter().enumerate() {
        let mut ratios = Vec::new();
        for &eps in &epsilons {
            let spec = PerturbationSpec {
                eps,
                mode: PerturbMode::RandomPerSet,
                seed: k as u64,
            };
            let p = perturb(d, &spec).unwrap();
            let r = continuity_report(m, d, &p.perturbed, eps).unwrap();
            a_atoms += r.atoms.iter().filter(|a| a.in_a).count();
            large_value_ok &= r.large_value_all_hold;
            if r.ratio >= r.proof_bound {
                bound_ok += 1;
            }
            if r.ratio >= corrected_bound(eps, 2) {
                corrected_ok += 1;
            }
            worst_gap = worst_gap.min(r.ratio - r.proof_bound);
            ratios.push(r.ratio);
        }
        if ratios.windows(2).all(|w| w[1] >= w[0] - 1e-9) {
            monotone_ok += 1;
        }
    }
    let total = instances.len() * epsilons.len();
    let ok = bound_ok == total && monotone_ok == instances.len() && large_value_ok;
    report(
        6,
        ok,
        &format!(
            "{} instances (drawn {drawn}): ratio >= (1-e'^2)(...) bound in {bound_ok}/{total} runs \
             (smallest ratio - bound {worst_gap:.6}); ratio >= (1-e')^2(...) in {corrected_ok}/{total}; \
             monotone in eps {monotone_ok}/{}; switching atoms {a_atoms}, large-value inequality holds {large_value_ok}",
            instances.len(),
            instances.len()
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_7_beta() {
    let part = beta::partition_check(1e-3);
    let part_ok = part.overlaps == 0 && part.counts.iter().sum::<usize>() == part.points;
    let v = beta::verify_beta_buy_many(1e-3);
    let margin_ok = v.all_pass && v.min_margin >= 0.37 && (v.worst_case - 0.9265).abs() < 1e-12 && v.worst_case_holds;
    let r = beta::revenue_report(10_000, 1_000_000);
    let ok = part_ok && margin_ok && r.stable_4dp;
    report(
        7,
        ok,
        &format!(
            "partition of {} points, overlaps {}; min margin {:.6} at v1 = {}; worst case {} > {}; \
             revenue {:.6} (1e4 points) vs {:.6} (1e6 points)",
            part.points,
            part.overlaps,
            v.min_margin,
            v.argmin,
            v.worst_case,
            beta::P_STAR,
            r.coarse,
            r.fine
        ),
    );
    assert!(ok);
}

#[test]
fn criterion_8_set_system() {
    let start = Instant::now();
    let res = sample_basic_sets(256, 16, 4, 16, 8, 1_000_000);
    let elapsed = start.elapsed().as_secs_f64();
    let (ok, detail) = match &res {
        Ok(sys) => {
            let valid = sys.check().is_ok();
            (
                valid && elapsed < 30.0,
                format!(
                    "{} sets after {} attempts, max overlap {}, invariants {valid}, {elapsed:.3}s",
                    sys.count(),
                    sys.attempts,
                    sys.max_overlap()
                ),
            )
        }
        Err(e) => (false, e.to_string()),
    };
    report(8, ok, &detail);
    assert!(ok);
}
