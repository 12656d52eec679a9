//! Command-line surface: tree analysis, interval-model pricing,
//! calibration and backtesting with flat-file I/O.
//!
//! Exit codes: 0 success, 2 invalid input, 3 AIP violation,
//! 4 insufficient data.

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use superhedge::backtest::{episodes_tsv, histogram_tsv};
use superhedge::calibrate::{EstimatorKind, WindowConfig};
use superhedge::tree::RandomTreeConfig;
use superhedge::{
    bs_reference_price, price_recursive, random_tree, run_rolling, Config, Error, PiecewisePayoff,
    RollingConfig, ScenarioTree, VolCurve,
};

/// Environment variable holding the default config path.
const CONFIG_ENV: &str = "SUPERHEDGE_CONFIG";

#[derive(Parser)]
#[command(
    name = "superhedge",
    version,
    about = "Super-hedging prices, arbitrage analysis and hedging backtests on finite market models"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Analyze a scenario-tree file: NA/AIP verdicts, martingale-measure
    /// search and the super-hedging price process of a payoff.
    AnalyzeTree {
        /// Tree file (`node <id> parent=<id|-> t=<depth> S=<price> p=<prob>`).
        tree: PathBuf,
        /// Payoff spec: call:K, put:K, linear:a,b or zero.
        #[arg(long, default_value = "zero")]
        payoff: String,
    },
    /// Price a convex payoff in the interval model from a config file.
    Price {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Compare against the closed-form reference (needs `sigma` and a
        /// call payoff).
        #[arg(long)]
        bs_check: bool,
        /// Lattice TSV destination (overrides `out_lattice` in the config).
        #[arg(long)]
        out_lattice: Option<PathBuf>,
    },
    /// Rolling calibrate-then-hedge evaluation over a close-price CSV.
    Backtest {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input CSV (`date,close`), overrides `csv` in the config.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// symmetric | asymmetric (overrides the config).
        #[arg(long)]
        estimator: Option<String>,
        /// Worker threads for the episode loop.
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        out_episodes: Option<PathBuf>,
        #[arg(long)]
        out_histogram: Option<PathBuf>,
    },
    /// Estimate multipliers on the most recent window of a CSV.
    Calibrate {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        estimator: Option<String>,
    },
    /// Randomized cross-checks of the pricing routes against LP oracles.
    Selftest {
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e}");
        std::process::exit(exit_code(&e));
    }
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::AipViolated { .. } => 3,
        Error::InsufficientData(_) | Error::WindowTooLarge { .. } => 4,
        _ => 2,
    }
}

fn run(command: Command) -> Result<(), Error> {
    match command {
        Command::AnalyzeTree { tree, payoff } => analyze_tree(&tree, &payoff),
        Command::Price {
            config,
            bs_check,
            out_lattice,
        } => price(config, bs_check, out_lattice),
        Command::Backtest {
            config,
            csv,
            estimator,
            jobs,
            out_episodes,
            out_histogram,
        } => backtest(config, csv, estimator, jobs, out_episodes, out_histogram),
        Command::Calibrate {
            config,
            csv,
            estimator,
        } => calibrate(config, csv, estimator),
        Command::Selftest { seed } => selftest(seed),
    }
}

fn load_config(flag: Option<PathBuf>) -> Result<Config, Error> {
    let path = flag.or_else(|| std::env::var_os(CONFIG_ENV).map(PathBuf::from));
    match path {
        Some(p) => Config::from_path(p),
        None => Err(Error::Config(format!(
            "no config file: pass --config or set {CONFIG_ENV}"
        ))),
    }
}

fn parse_estimator(flag: Option<String>, cfg: &Config) -> Result<EstimatorKind, Error> {
    match flag.as_deref() {
        None => cfg.estimator(),
        Some("symmetric") => Ok(EstimatorKind::Symmetric),
        Some("asymmetric") => Ok(EstimatorKind::Asymmetric),
        Some(v) => Err(Error::Config(format!(
            "estimator must be symmetric or asymmetric, got `{v}`"
        ))),
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn analyze_tree(path: &Path, payoff_spec: &str) -> Result<(), Error> {
    let text = std::fs::read_to_string(path)?;
    let tree = ScenarioTree::from_text(&text)?;
    let payoff = PiecewisePayoff::parse(payoff_spec)?;

    let aip = tree.check_aip()?;
    let na = tree.check_na()?;
    let acmm = tree.find_acmm();
    let prices = tree.multi_period_price(|s| payoff.value(s));

    println!("payoff: {}", payoff.label());
    println!("nodes: {}", tree.len());
    println!("horizon: {}", tree.horizon());
    println!("aip: {}", yes_no(aip.holds));
    if let Some(node) = aip.offending {
        println!("aip_offending_node: {node} (immediate profit at node {node})");
    }
    println!("na: {}", yes_no(na.holds));
    if let Some(w) = na.witness {
        println!("na_witness: node={} theta={}", w.node, w.theta);
    }
    match &acmm {
        Some(_) => println!("acmm: feasible"),
        None => println!("acmm: infeasible"),
    }
    println!("root_price: {}", prices.root_price());
    for id in tree.node_ids() {
        let node = tree.node(id);
        let (aip_str, na_str) = if tree.is_leaf(id) {
            ("-".to_string(), "-".to_string())
        } else {
            (
                yes_no(tree.aip_holds_at(id)?).to_string(),
                yes_no(tree.na_violation_at(id)?.is_none()).to_string(),
            )
        };
        let rho = acmm
            .as_ref()
            .map(|q| q.node_weights[id].to_string())
            .unwrap_or_else(|| "-".to_string());
        println!(
            "node {id}: t={} S={} aip={aip_str} na={na_str} price={} theta={} rho={rho}",
            node.depth, node.price, prices.values[id], prices.thetas[id]
        );
    }
    Ok(())
}

fn price(
    config: Option<PathBuf>,
    bs_check: bool,
    out_lattice: Option<PathBuf>,
) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let params = cfg.model_params()?;
    let payoff = cfg.payoff()?;
    let lattice = price_recursive(params, payoff.clone())?;

    println!("payoff: {}", payoff.label());
    println!("steps: {}", lattice.steps());
    println!("s0: {}", lattice.params().s0);
    println!("dt: {}", lattice.params().dt);
    println!("price: {}", lattice.root_price());
    if lattice.steps() > 0 {
        println!("theta0: {}", lattice.levels()[0].theta[0]);
    }
    println!(
        "ratio_v0_s0: {}",
        lattice.root_price() / lattice.params().s0
    );

    if bs_check {
        let sigmas = cfg
            .get("sigma")
            .ok_or_else(|| Error::Config("--bs-check needs `sigma` in the config".to_string()))?;
        let strike = payoff
            .label()
            .strip_prefix("call:")
            .and_then(|k| k.parse::<f64>().ok())
            .ok_or_else(|| {
                Error::Config("--bs-check compares call prices; use payoff=call:K".to_string())
            })?;
        let sigmas: Vec<f64> = sigmas
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("bad sigma `{s}`")))
            })
            .collect::<Result<_, _>>()?;
        let dt = cfg.dt()?;
        let maturity = dt * lattice.steps() as f64;
        let curve = if sigmas.len() == 1 {
            VolCurve::Constant(sigmas[0])
        } else {
            VolCurve::PiecewiseConstant { dt, sigmas }
        };
        let reference = bs_reference_price(lattice.params().s0, strike, maturity, &curve);
        println!("bs_price: {reference}");
        println!("bs_abs_error: {}", (lattice.root_price() - reference).abs());
    }

    let dest = out_lattice.or_else(|| cfg.get("out_lattice").map(PathBuf::from));
    if let Some(dest) = dest {
        std::fs::write(&dest, lattice.to_tsv())?;
        println!("lattice_tsv: {}", dest.display());
    }
    Ok(())
}

fn load_series(
    cfg: &Config,
    csv: Option<PathBuf>,
) -> Result<superhedge::PriceSeries, Error> {
    let path = csv
        .or_else(|| cfg.get("csv").map(PathBuf::from))
        .ok_or_else(|| Error::Config("no CSV input: pass --csv or set csv= in the config".to_string()))?;
    superhedge::PriceSeries::from_csv_path(path)
}

fn backtest(
    config: Option<PathBuf>,
    csv: Option<PathBuf>,
    estimator: Option<String>,
    jobs: Option<usize>,
    out_episodes: Option<PathBuf>,
    out_histogram: Option<PathBuf>,
) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let series = load_series(&cfg, csv)?;
    let estimator = parse_estimator(estimator, &cfg)?;
    let rolling = RollingConfig {
        window: cfg.window_config()?,
        strike: cfg.strike_rule()?,
        estimator,
        jobs: jobs.unwrap_or(cfg.jobs()?),
    };
    let result = run_rolling(&series, &rolling)?;

    println!("observations: {}", series.len());
    println!("episodes: {}", result.episodes.len());
    println!(
        "estimator: {}",
        match estimator {
            EstimatorKind::Symmetric => "symmetric",
            EstimatorKind::Asymmetric => "asymmetric",
        }
    );
    match rolling.strike {
        superhedge::StrikeRule::Fixed(k) => println!("strike_rule: fixed {k}"),
        superhedge::StrikeRule::AtTheMoney => println!("strike_rule: atm"),
    }
    println!("mean_eps: {}", result.mean_eps);
    println!("std_eps: {}", result.std_eps);
    println!("p_neg: {}", result.p_neg);
    println!("var95: {}", result.var95);
    println!("mean_ratio_v0_s0: {}", result.mean_ratio);
    println!("std_ratio_v0_s0: {}", result.std_ratio);
    println!("out_of_bounds_episodes: {}", result.out_of_bounds);
    println!("clamped_models: {}", result.clamped_models);

    let eps: Vec<f64> = result.episodes.iter().map(|e| e.epsilon).collect();
    let ep_dest = out_episodes
        .or_else(|| cfg.get("out_episodes").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("episodes.tsv"));
    std::fs::write(&ep_dest, episodes_tsv(&result))?;
    println!("episodes_tsv: {}", ep_dest.display());
    let hist_dest = out_histogram
        .or_else(|| cfg.get("out_histogram").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("epsilon_hist.tsv"));
    std::fs::write(&hist_dest, histogram_tsv(&eps, 20))?;
    println!("histogram_tsv: {}", hist_dest.display());
    Ok(())
}

fn calibrate(
    config: Option<PathBuf>,
    csv: Option<PathBuf>,
    estimator: Option<String>,
) -> Result<(), Error> {
    let cfg = load_config(config)?;
    let series = load_series(&cfg, csv)?;
    let estimator = parse_estimator(estimator, &cfg)?;
    let window_cfg: WindowConfig = cfg.window_config()?;
    let episodes = superhedge::weekly_episodes(&series, window_cfg.steps_per_episode)?;
    if episodes.len() < window_cfg.window_episodes {
        return Err(Error::WindowTooLarge {
            window: window_cfg.window_episodes,
            available: episodes.len(),
        });
    }
    let window = &episodes[episodes.len() - window_cfg.window_episodes..];

    println!("observations: {}", series.len());
    println!("episodes_available: {}", episodes.len());
    println!("window_episodes: {}", window_cfg.window_episodes);
    println!("steps_per_episode: {}", window_cfg.steps_per_episode);
    println!("dt: {}", window_cfg.dt);
    println!("window_start: {}", window[0].start);
    match estimator {
        EstimatorKind::Symmetric => {
            println!("estimator: symmetric");
            let est = superhedge::symmetric_estimate(window, &window_cfg)?;
            let superhedge::Estimate::Symmetric { sigma, dt } = &est else {
                unreachable!()
            };
            for (i, s) in sigma.iter().enumerate() {
                println!("sigma[{i}]: {s}");
            }
            println!(
                "coverage: {}",
                superhedge::coverage_ratio(window, sigma, *dt)
            );
            let model = est.to_params(window.last().unwrap().terminal(), window_cfg.dt)?;
            print_multipliers(&model);
        }
        EstimatorKind::Asymmetric => {
            println!("estimator: asymmetric");
            let est = superhedge::asymmetric_estimate(window, &window_cfg)?;
            let model = est.to_params(window.last().unwrap().terminal(), window_cfg.dt)?;
            print_multipliers(&model);
        }
    }
    Ok(())
}

fn print_multipliers(model: &superhedge::CalibratedModel) {
    for (i, (kd, ku)) in model
        .params
        .k_down
        .iter()
        .zip(&model.params.k_up)
         .enumerate()
    {
        println!("k_d[{i}]: {kd}");
        println!("k_u[{i}]: {ku}");
    }
    if model.clamped_steps.is_empty() {
        println!("clamped_steps: none");
    } else {
        let list: Vec<String> = model.clamped_steps.iter().map(|s| s.to_string()).collect();
        println!("clamped_steps: {}", list.join(","));
    }
}

/// Seeded cross-checks of the independent pricing routes.
fn selftest(seed: u64) -> Result<(), Error> {
    use rand::Rng;
    use superhedge::simplex::{LpBuilder, LpOutcome, Relation};

    let tol = 1e-9;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    println!("seed: {seed}");

    // Hull-based biconjugate vs the one-step super-hedging LP.
    let cases = 100;
    for case in 0..cases {
        let k = rng.gen_range(2..=8);
        let mut pts: Vec<f64> = (0..k).map(|_| rng.gen_range(10.0..200.0)).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let vals: Vec<f64> = pts.iter().map(|_| rng.gen_range(0.0..100.0)).collect();
        let y = rng.gen_range(0.0..220.0);
        let hull = superhedge::biconjugate_price_sampled(&pts, &vals, y);
        let mut lp = LpBuilder::new();
        let x = lp.free(1.0);
        let theta = lp.free(0.0);
        for (&z, &v) in pts.iter().zip(&vals) {
            lp.constraint(&[(x, 1.0), (theta, z - y)], Relation::Ge, v);
        }
        let agree = match lp.solve() {
            LpOutcome::Optimal { objective, .. } => (objective - hull).abs() <= tol,
            LpOutcome::Unbounded => hull == f64::NEG_INFINITY,
            LpOutcome::Infeasible => false,
        };
        if !agree {
            eprintln!("selftest: one-step mismatch in case {case}");
            std::process::exit(1);
        }
    }
    println!("one_step_vs_lp: ok ({cases} cases)");

    // Tree dynamic programming vs the brute-force LP, every node.
    let tree_cases = 40;
    let cfg = RandomTreeConfig {
        max_depth: 4,
        max_branching: 3,
        ..RandomTreeConfig::default()
    };
    for case in 0..tree_cases {
        let tree = random_tree(&mut rng, &cfg);
        let strike = rng.gen_range(50.0..200.0);
        let payoff = PiecewisePayoff::call(strike);
        let pp = tree.multi_period_price(|s| payoff.value(s));
        for id in tree.node_ids() {
            let lp = tree.brute_force_superhedge(|s| payoff.value(s), id)?;
            let v = pp.values[id];
            let agree = if lp == f64::NEG_INFINITY || v == f64::NEG_INFINITY {
                lp == v
            } else {
                (lp - v).abs() <= tol
            };
            if !agree {
                eprintln!("selftest: tree mismatch in case {case} node {id}: lp={lp} dp={v}");
                std::process::exit(1);
            }
        }
    }
    println!("tree_dp_vs_lp: ok ({tree_cases} trees)");

    // Interval scheme vs the induced binomial tree.
    let interval_cases = 20;
    for case in 0..interval_cases {
        let n = rng.gen_range(1..=5);
        let k_down: Vec<f64> = (0..n).map(|_| rng.gen_range(0.5..1.0)).collect();
        let k_up: Vec<f64> = (0..n).map(|_| rng.gen_range(1.0..2.0)).collect();
        let s0 = rng.gen_range(50.0..150.0);
        let strike = rng.gen_range(0.5 * s0..1.5 * s0);
        let params = superhedge::IntervalModelParams::new(k_down.clone(), k_up.clone(), s0, 1.0)?;
        let lattice = price_recursive(params, PiecewisePayoff::call(strike))?;
        let tree = ScenarioTree::binomial(s0, &k_down, &k_up)?;
        let lp = tree.brute_force_superhedge(|s| (s - strike).max(0.0), 0)?;
        if (lattice.root_price() - lp).abs() > tol {
            eprintln!(
                "selftest: interval mismatch in case {case}: lattice={} lp={lp}",
                lattice.root_price()
            );
            std::process::exit(1);
        }
    }
    println!("interval_vs_lp: ok ({interval_cases} models)");

    // AIP equals acmm feasibility at every node.
    let acmm_cases = 50;
    for case in 0..acmm_cases {
        let tree = random_tree(&mut rng, &cfg);
        let aip = tree.check_aip()?.holds;
        let feasible = tree
            .node_ids()
            .filter(|&v| !tree.is_leaf(v))
            .all(|v| tree.find_acmm_at(v).is_some());
        if aip != feasible {
            eprintln!("selftest: AIP/acmm disagreement in case {case}");
            std::process::exit(1);
        }
    }
    println!("aip_vs_acmm: ok ({acmm_cases} trees)");
    println!("selftest: ok");
    Ok(())
}
