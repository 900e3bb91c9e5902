use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use buymany::beta;
use buymany::buyer::{best_response, BestResponse};
use buymany::compress::compress;
use buymany::generators::{
    disjoint_collections, gen_counterexample, gen_hard_unit_demand, gen_hard_xos, quartiles, sample_basic_sets,
    BasicSetSystem, HardInstance,
};
use buymany::io::{format_g17, load_instance, menu_to_doc, save_instance, to_json_string, Instance};
use buymany::lp::{opt_buy_one, opt_buy_one_exact};
use buymany::perturb::{perturb, run_continuity_experiment, PerturbMode, PerturbationSpec, SwitchClass};
use buymany::pricing::{
    atom_rows, best_bundle_price, best_item_pricing, best_single_item_price, item_pricing_choice,
    item_pricing_revenue, q_vector, revenue, scaled_pricing_guarantee, scaled_pricing_revenue, AlphaDistribution,
    AtomRow, GuaranteeRow, ItemPricingResult,
};
use buymany::selftest::run_selftest;
use buymany::verify::{closure_with_budget, verify_buy_many_with_budget, MAX_POLICIES};
use buymany::{Error, Menu, Semantics};

const CSV_HELP: &str = "\
CSV output (--format csv):
  revenue, bestresponse   atom,prob,entry,payment,utility
  pricing                 atom,prob,set,payment,utility
  continuity              atom,prob,entry_before,entry_after,price_before,price_after,payment_after,
                          in_a,class,top_item,large_value_lhs,large_value_rhs,large_value_holds
Empty cells mean \"none\" (null option, not in A). Item sets are space-separated item indices.

Exit codes: 0 success, 1 usage or runtime failure, 2 invalid input, 3 capacity limit exceeded.";

#[derive(Parser)]
#[command(name = "buymany", version, about = "Revenue, verification and experiments for buy-many mechanisms")]
#[command(after_help = CSV_HELP)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Instance document (JSON)
    #[arg(long, global = true)]
    instance: Option<PathBuf>,
    /// Output file (default: stdout)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tolerance: f64,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum SemanticsArg {
    Buyone,
    Buymany,
}

impl From<SemanticsArg> for Semantics {
    fn from(s: SemanticsArg) -> Self {
        match s {
            SemanticsArg::Buyone => Semantics::BuyOne,
            SemanticsArg::Buymany => Semantics::BuyMany,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    /// Every value times --factor
    Scalar,
    /// One random factor per atom
    RandomScalar,
    /// Independent factor per atom and set
    RandomPerSet,
    /// Coupled distribution read from --perturbed
    Explicit,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long)]
    eps: f64,
    #[arg(long, value_enum, default_value = "random-per-set")]
    mode: ModeArg,
    /// Factor for --mode scalar
    #[arg(long)]
    factor: Option<f64>,
    /// Instance whose distribution is the coupled one, for --mode explicit
    #[arg(long)]
    perturbed: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Expected revenue of the instance menu (bare number unless --format is given)
    Revenue {
        /// Defaults to the menu's own semantics
        #[arg(long, value_enum)]
        semantics: Option<SemanticsArg>,
    },
    /// Best response of each atom to the menu
    Bestresponse {
        #[arg(long, value_enum)]
        semantics: Option<SemanticsArg>,
        /// Only this atom
        #[arg(long)]
        atom: Option<usize>,
    },
    /// Check the buy-many constraint by enumerating purchasing strategies
    Verify {
        #[arg(long, default_value_t = MAX_POLICIES)]
        budget: u64,
    },
    /// Outcomes of all purchasing strategies, Pareto filtered
    Closure {
        #[arg(long, default_value_t = MAX_POLICIES)]
        budget: u64,
    },
    /// Optimal buy-one mechanism by linear programming; emits an instance document
    LpOpt {
        /// Solve in exact rational arithmetic
        #[arg(long)]
        exact: bool,
        /// Semantics tag of the emitted menu
        #[arg(long, value_enum, default_value = "buyone")]
        semantics: SemanticsArg,
    },
    /// Posted-price benchmarks and the scaled item pricing read from the menu
    Pricing {
        /// Comma-separated item prices (default: the menu's q vector)
        #[arg(long, value_delimiter = ',')]
        prices: Option<Vec<f64>>,
    },
    /// Drop small coordinates, round to the grid and discount prices
    Compress {
        #[arg(long)]
        eps: f64,
    },
    /// Emit a multiplicatively perturbed copy of the instance
    Perturb {
        #[command(flatten)]
        args: PerturbArgs,
    },
    /// Discounted-menu revenue on a perturbed distribution
    Continuity {
        #[command(flatten)]
        args: PerturbArgs,
    },
    /// Instance generators
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Two-item beta example: partition, buy-many check, IC grid and revenue
    Beta {
        #[arg(long, default_value_t = 1e-3)]
        step: f64,
        #[arg(long, default_value_t = 10_000)]
        coarse: usize,
        #[arg(long, default_value_t = 1_000_000)]
        fine: usize,
    },
    /// Compare fast paths against brute-force oracles on random instances
    Selftest {
        #[arg(long, default_value_t = 200)]
        cases: usize,
    },
}

#[derive(Args)]
struct SetArgs {
    /// Basic-set document from `gen basic-sets` (otherwise sampled)
    #[arg(long)]
    sets: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    b: Option<usize>,
    #[arg(long)]
    count: Option<usize>,
    #[arg(long, default_value_t = 1_000_000)]
    budget: u64,
}

#[derive(Subcommand)]
enum GenKind {
    /// Item pricing whose revenue collapses under a small perturbation
    Counterexample {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        eps: f64,
        #[arg(long, default_value_t = 1.0)]
        delta: f64,
        /// Also write the perturbed instance here
        #[arg(long)]
        perturbed_out: Option<PathBuf>,
    },
    /// Random set system with bounded pairwise intersections
    BasicSets {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        s: usize,
        #[arg(long)]
        b: usize,
        #[arg(long)]
        count: usize,
        #[arg(long, default_value_t = 1_000_000)]
        budget: u64,
    },
    /// Unit-demand atoms, one lottery per basic set
    HardUnitdemand {
        #[command(flatten)]
        sets: SetArgs,
        #[arg(long)]
        h: f64,
        /// Comma-separated atom values (default: truncated geometric draws)
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
    /// XOS atoms over disjoint collections of basic sets
    HardXos {
        #[command(flatten)]
        sets: SetArgs,
        /// Use the four quartiles of 16 items
        #[arg(long)]
        quartiles: bool,
        /// Sets per collection
        #[arg(long)]
        m: usize,
        #[arg(long)]
        h: f64,
        #[arg(long, value_delimiter = ',')]
        values: Option<Vec<f64>>,
    },
}

enum Failure {
    Usage(String),
    Core(Error),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

fn read_file(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| Failure::Core(Error::input(path.display().to_string(), e.to_string())))
}

fn load(common: &Common) -> Outcome<Instance> {
    let path = common.instance.as_ref().ok_or_else(|| Failure::Usage("--instance is required".into()))?;
    Ok(load_instance(&read_file(path)?)?)
}

fn emit(common: &Common, text: &str) -> Outcome<()> {
    match &common.out {
        Some(p) => fs::write(p, text).map_err(|e| Failure::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn write_aux(path: &Path, text: &str) -> Outcome<()> {
    fs::write(path, text).map_err(|e| Failure::Io(format!("{}: {e}", path.display())))
}

fn json_only(common: &Common, what: &str) -> Outcome<()> {
    if common.format == Some(Format::Csv) {
        return Err(Failure::Usage(format!("{what} has no CSV output")));
    }
    Ok(())
}

fn opt_usize(x: Option<usize>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(format_g17).unwrap_or_default()
}

fn csv_table(header: &[&str], rows: Vec<Vec<String>>) -> Outcome<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let io = |e: csv::Error| Failure::Io(e.to_string());
    w.write_record(header).map_err(io)?;
    for r in rows {
        w.write_record(&r).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| Failure::Io(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("utf-8 CSV"))
}

fn atom_csv(rows: &[AtomRow]) -> Outcome<String> {
    csv_table(
        &["atom", "prob", "entry", "payment", "utility"],
        rows.iter()
            .map(|r| {
                vec![
                    r.atom.to_string(),
                    format_g17(r.prob),
                    opt_usize(r.entry),
                    format_g17(r.payment),
                    format_g17(r.utility),
                ]
            })
            .collect(),
    )
}

fn semantics_of(arg: Option<SemanticsArg>, menu: &Menu) -> Semantics {
    arg.map(Semantics::from).unwrap_or(menu.semantics())
}

#[derive(Serialize)]
struct RevenueDoc<'a> {
    semantics: &'static str,
    revenue: f64,
    atoms: &'a [AtomRow],
}

#[derive(Serialize)]
struct ResponseDoc {
    atom: usize,
    prob: f64,
    response: BestResponse,
}

#[derive(Serialize)]
struct PostedDoc {
    prices: Vec<f64>,
    revenue: f64,
    scaled_revenue: f64,
}

#[derive(Serialize)]
struct SingleItemDoc {
    item: usize,
    price: f64,
    revenue: f64,
}

#[derive(Serialize)]
struct PriceRevenue {
    price: f64,
    revenue: f64,
}

#[derive(Serialize)]
struct PricingDoc {
    q: Option<Vec<f64>>,
    posted: Option<PostedDoc>,
    bundle: PriceRevenue,
    single_items: Vec<SingleItemDoc>,
    best_item_pricing: ItemPricingResult,
    guarantee: Option<Vec<GuaranteeRow>>,
}

#[derive(Serialize)]
struct CompressDoc {
    report: buymany::compress::CompressionReport,
    menu: buymany::io::MenuDoc,
}

#[derive(Serialize)]
struct BetaDoc {
    partition: beta::PartitionReport,
    verify: beta::BetaVerifyReport,
    ic: beta::IcReport,
    revenue: beta::RevenueReport,
}

#[derive(Deserialize)]
struct SetsDoc {
    n: usize,
    s: usize,
    b: usize,
    sets: Vec<Vec<usize>>,
}

fn set_system(args: &SetArgs, seed: u64) -> Outcome<BasicSetSystem> {
    if let Some(path) = &args.sets {
        let doc: SetsDoc = serde_json::from_str(&read_file(path)?)
            .map_err(|e| Failure::Core(Error::input(path.display().to_string(), e.to_string())))?;
        return Ok(BasicSetSystem::from_sets(doc.n, doc.s, doc.b, doc.sets)?);
    }
    match (args.n, args.s, args.b, args.count) {
        (Some(n), Some(s), Some(b), Some(count)) => Ok(sample_basic_sets(n, s, b, count, seed, args.budget)?),
        _ => Err(Failure::Usage("give --sets or all of --n, --s, --b, --count".into())),
    }
}

fn perturbation_spec(args: &PerturbArgs, seed: u64) -> Outcome<PerturbationSpec> {
    let mode = match args.mode {
        ModeArg::Scalar => PerturbMode::Scalar(
            args.factor.ok_or_else(|| Failure::Usage("--mode scalar needs --factor".into()))?,
        ),
        ModeArg::RandomScalar => PerturbMode::RandomScalar,
        ModeArg::RandomPerSet => PerturbMode::RandomPerSet,
        ModeArg::Explicit => {
            let path = args.perturbed.as_ref().ok_or_else(|| Failure::Usage("--mode explicit needs --perturbed".into()))?;
            PerturbMode::Explicit(load_instance(&read_file(path)?)?.distribution)
        }
    };
    Ok(PerturbationSpec {
        eps: args.eps,
        mode,
        seed,
    })
}

fn hard_output(common: &Common, h: HardInstance) -> Outcome<()> {
    let measured = revenue(&h.menu, &h.dist, Semantics::BuyMany)?;
    let agrees = (measured - h.predicted_revenue).abs() <= common.tolerance;
    eprintln!(
        "predicted revenue {:?}, measured buy-many revenue {measured:?}, agree within {}: {agrees}",
        h.predicted_revenue, common.tolerance
    );
    let inst = Instance {
        distribution: h.dist,
        menu: h.menu,
    };
    emit(common, &save_instance(&inst))
}

fn run(cli: Cli) -> Outcome<bool> {
    let common = &cli.common;
    match cli.command {
        Command::Revenue { semantics } => {
            let inst = load(common)?;
            let sem = semantics_of(semantics, &inst.menu);
            let rows = atom_rows(&inst.menu, &inst.distribution, sem)?;
            let total: f64 = rows.iter().map(|r| r.prob * r.payment).sum();
            let text = match common.format {
                None => format!("{total:?}\n"),
                Some(Format::Json) => to_json_string(&RevenueDoc {
                    semantics: sem.name(),
                    revenue: total,
                    atoms: &rows,
                }),
                Some(Format::Csv) => atom_csv(&rows)?,
            };
            emit(common, &text)?;
        }
        Command::Bestresponse { semantics, atom } => {
            let inst = load(common)?;
            let sem = semantics_of(semantics, &inst.menu);
            let atoms = inst.distribution.atoms();
            if let Some(k) = atom {
                if k >= atoms.len() {
                    return Err(Failure::Core(Error::input("atom", format!("atom {k} out of range ({} atoms)", atoms.len()))));
                }
            }
            let chosen: Vec<usize> = (0..atoms.len()).filter(|&k| atom.is_none_or(|a| a == k)).collect();
            if common.format == Some(Format::Csv) {
                let rows = atom_rows(&inst.menu, &inst.distribution, sem)?;
                let rows: Vec<AtomRow> = rows.into_iter().filter(|r| chosen.contains(&r.atom)).collect();
                emit(common, &atom_csv(&rows)?)?;
            } else {
                let docs = chosen
                    .iter()
                    .map(|&k| {
                        Ok(ResponseDoc {
                            atom: k,
                            prob: atoms[k].prob,
                            response: best_response(&atoms[k].valuation, &inst.menu, sem)?,
                        })
                    })
                    .collect::<Outcome<Vec<_>>>()?;
                emit(common, &to_json_string(&docs))?;
            }
        }
        Command::Verify { budget } => {
            json_only(common, "verify")?;
            let inst = load(common)?;
            emit(common, &to_json_string(&verify_buy_many_with_budget(&inst.menu, budget)?))?;
        }
        Command::Closure { budget } => {
            json_only(common, "closure")?;
            let inst = load(common)?;
            emit(common, &to_json_string(&closure_with_budget(&inst.menu, budget)?))?;
        }
        Command::LpOpt { exact, semantics } => {
            json_only(common, "lp-opt")?;
            let inst = load(common)?;
            let opt = if exact { opt_buy_one_exact(&inst.distribution)? } else { opt_buy_one(&inst.distribution)? };
            eprintln!("optimal buy-one revenue {:?} after {} pivots", opt.revenue, opt.pivots);
            let out = Instance {
                distribution: inst.distribution,
                menu: opt.menu.with_semantics(semantics.into()),
            };
            emit(common, &save_instance(&out))?;
        }
        Command::Pricing { prices } => {
            let inst = load(common)?;
            let d = &inst.distribution;
            let n = d.n();
            let has_menu = !inst.menu.is_empty();
            let q = has_menu.then(|| q_vector(&inst.menu));
            let posted_prices = prices.or_else(|| q.clone());
            if common.format == Some(Format::Csv) {
                let p = posted_prices.ok_or_else(|| Failure::Usage("CSV pricing needs --prices or a menu".into()))?;
                let mut rows = Vec::new();
                for (k, a) in d.atoms().iter().enumerate() {
                    let (set, utility, payment) = item_pricing_choice(&a.valuation, &p)?;
                    let items: Vec<String> = set.items().map(|i| i.to_string()).collect();
                    rows.push(vec![k.to_string(), format_g17(a.prob), items.join(" "), format_g17(payment), format_g17(utility)]);
                }
                emit(common, &csv_table(&["atom", "prob", "set", "payment", "utility"], rows)?)?;
                return Ok(true);
            }
            let alpha = AlphaDistribution::standard(n);
            let posted = match posted_prices {
                Some(p) => Some(PostedDoc {
                    revenue: item_pricing_revenue(&p, d)?,
                    scaled_revenue: scaled_pricing_revenue(&p, d, &alpha)?,
                    prices: p,
                }),
                None => None,
            };
            let (bp, br) = best_bundle_price(d);
            let single_items = (0..n)
                .map(|i| {
                    let (price, revenue) = best_single_item_price(d, i)?;
                    Ok(SingleItemDoc { item: i, price, revenue })
                })
                .collect::<Outcome<Vec<_>>>()?;
            let guarantee = if has_menu && inst.menu.semantics() == Semantics::BuyMany {
                Some(scaled_pricing_guarantee(&inst.menu, d, &alpha)?)
            } else {
                None
            };
            let doc = PricingDoc {
                q,
                posted,
                bundle: PriceRevenue { price: bp, revenue: br },
                single_items,
                best_item_pricing: best_item_pricing(d)?,
                guarantee,
            };
            emit(common, &to_json_string(&doc))?;
        }
        Command::Compress { eps } => {
            json_only(common, "compress")?;
            let inst = load(common)?;
            let (menu, report) = compress(&inst.menu, &inst.distribution, eps)?;
            emit(common, &to_json_string(&CompressDoc { report, menu: menu_to_doc(&menu) }))?;
        }
        Command::Perturb { args } => {
            json_only(common, "perturb")?;
            let inst = load(common)?;
            let p = perturb(&inst.distribution, &perturbation_spec(&args, common.seed)?)?;
            let out = Instance {
                distribution: p.perturbed,
                menu: inst.menu,
            };
            emit(common, &save_instance(&out))?;
        }
        Command::Continuity { args } => {
            let inst = load(common)?;
            let spec = perturbation_spec(&args, common.seed)?;
            let r = run_continuity_experiment(&inst.menu, &inst.distribution, &spec)?;
            for w in &r.warnings {
                eprintln!("warning: {w}");
            }
            if common.format == Some(Format::Csv) {
                let rows = r
                    .atoms
                    .iter()
                    .map(|a| {
                        vec![
                            a.atom.to_string(),
                            format_g17(a.prob),
                            opt_usize(a.entry_before),
                            opt_usize(a.entry_after),
                            format_g17(a.price_before),
                            format_g17(a.price_after),
                            format_g17(a.payment_after),
                            a.in_a.to_string(),
                            match a.class {
                                Some(SwitchClass::HighItem) => "high_item".into(),
                                Some(SwitchClass::LowItem) => "low_item".into(),
                                None => String::new(),
                            },
                            opt_usize(a.top_item),
                            opt_f64(a.large_value_lhs),
                            opt_f64(a.large_value_rhs),
                            a.large_value_holds.map(|b| b.to_string()).unwrap_or_default(),
                        ]
                    })
                    .collect();
                let header = [
                    "atom",
                    "prob",
                    "entry_before",
                    "entry_after",
                    "price_before",
                    "price_after",
                    "payment_after",
                    "in_a",
                    "class",
                    "top_item",
                    "large_value_lhs",
                    "large_value_rhs",
                    "large_value_holds",
                ];
                emit(common, &csv_table(&header, rows)?)?;
            } else {
                emit(common, &to_json_string(&r))?;
            }
        }
        Command::Gen { kind } => {
            json_only(common, "gen")?;
            match kind {
                GenKind::Counterexample { n, eps, delta, perturbed_out } => {
                    let cx = gen_counterexample(n, eps, delta)?;
                    let menu = cx.menu()?;
                    if let Some(path) = perturbed_out {
                        let p = Instance {
                            distribution: cx.perturbed.clone(),
                            menu: menu.clone(),
                        };
                        write_aux(&path, &save_instance(&p))?;
                    }
                    let inst = Instance {
                        distribution: cx.dist,
                        menu,
                    };
                    emit(common, &save_instance(&inst))?;
                }
                GenKind::BasicSets { n, s, b, count, budget } => {
                    let sys = sample_basic_sets(n, s, b, count, common.seed, budget)?;
                    emit(common, &to_json_string(&sys))?;
                }
                GenKind::HardUnitdemand { sets, h, values } => {
                    let sys = set_system(&sets, common.seed)?;
                    hard_output(common, gen_hard_unit_demand(&sys, h, values, common.seed)?)?;
                }
                GenKind::HardXos { sets, quartiles: q, m, h, values } => {
                    let sys = if q { quartiles() } else { set_system(&sets, common.seed)? };
                    let cols = disjoint_collections(&sys, m)?;
                    hard_output(common, gen_hard_xos(&sys, &cols, h, values, common.seed)?)?;
                }
            }
        }
        Command::Beta { step, coarse, fine } => {
            json_only(common, "beta")?;
            if !(step > 0.0 && step <= 0.5) || coarse == 0 || fine == 0 {
                return Err(Failure::Core(Error::input("step", "need 0 < step <= 0.5 and positive point counts")));
            }
            let doc = BetaDoc {
                partition: beta::partition_check(step),
                verify: beta::verify_beta_buy_many(step),
                ic: beta::ic_grid_check(step),
                revenue: beta::revenue_report(coarse, fine),
            };
            emit(common, &to_json_string(&doc))?;
        }
        Command::Selftest { cases } => {
            json_only(common, "selftest")?;
            let r = run_selftest(common.seed, cases, common.tolerance)?;
            emit(common, &to_json_string(&r))?;
            return Ok(r.passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => {
            eprintln!("self-test failed");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Io(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Core(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Input { .. } | Error::Invariant { .. } => 2,
                Error::Capacity { .. } => 3,
                _ => 1,
            })
        }
    }
}
