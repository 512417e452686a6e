//! `bsmd`: simulation runs, security demos and calculators for the mobility data market.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use bsmd_core::contract::FeeRate;
use bsmd_core::demos::{self, DemoReport};
use bsmd_core::econ::{capacity_table, ledger_growth, max_users, solve_game, CapacityParams, GameParams};
use bsmd_core::workload::{ledger_fingerprint, run_scenario, ScenarioConfig};
use clap::{Args, Parser, Subcommand};

use config::RunConfig;
use output::{num, OutDir};

#[derive(Parser, Debug)]
#[command(name = "bsmd", version, about = "Mobility data-market simulator")]
struct Cli {
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true, default_value = "out")]
    out_dir: PathBuf,
    /// TOML file with optional [scenario], [capacity] and [game] sections.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(flatten)]
    consensus: ConsensusFlags,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct ConsensusFlags {
    #[arg(long, global = true)]
    active_nodes: Option<usize>,
    #[arg(long, global = true)]
    faulty: Option<usize>,
    #[arg(long, global = true)]
    timeout_ms: Option<u64>,
}

#[derive(Args, Debug)]
struct ScenarioFlags {
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    time_compression: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulates one day of mobility sharing and writes per-minute metrics.
    RunSim {
        #[command(flatten)]
        scenario: ScenarioFlags,
        /// Also render throughput and latency charts as SVG.
        #[arg(long)]
        plot: bool,
    },
    /// Connection attempts without, and with forged, identity credentials.
    DemoSpoofing,
    /// Taps encrypted channel traffic and tries to read it.
    DemoInterception {
        #[arg(long, default_value_t = 1000)]
        frames: usize,
    },
    /// Walks a contract through signing, its window, revocation and expiry.
    DemoRevocation,
    /// Samples both obfuscation mechanisms against their analytic laws.
    DemoPrivacy {
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        #[arg(long, value_delimiter = ',', default_value = "0.005,0.01,0.05")]
        epsilons: Vec<f64>,
        #[arg(long, default_value_t = 100.0)]
        inner: f64,
        #[arg(long, default_value_t = 200.0)]
        outer: f64,
    },
    /// Maximum real-time users and ledger growth for a committee capacity.
    CalcScale {
        #[arg(long, allow_negative_numbers = true)]
        tps: Option<f64>,
        /// Fraction of users sharing in real time.
        #[arg(long, allow_negative_numbers = true)]
        lbs: Option<f64>,
        #[arg(long)]
        tx_size: Option<u64>,
        #[arg(long, allow_negative_numbers = true)]
        throughput: Option<f64>,
    },
    /// Equilibrium of the company/user sharing game.
    SolveGame {
        /// TOML file with the game parameters at top level.
        #[arg(long)]
        params: Option<PathBuf>,
        #[command(flatten)]
        overrides: GameFlags,
    },
    /// Runs the scenario and exports its ledger as NDJSON.
    ExportLedger {
        #[command(flatten)]
        scenario: ScenarioFlags,
    },
    /// A brokered contract between a university and an individual.
    RunBroker {
        #[arg(long, default_value_t = 0.10)]
        fee: f64,
        #[arg(long, default_value_t = 10)]
        reward: u64,
        #[arg(long, default_value_t = 122)]
        nights: u64,
    },
}

#[derive(Args, Debug, Default)]
struct GameFlags {
    #[arg(long, allow_negative_numbers = true)]
    r_n: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    r_m: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c_d: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c_i: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c_r: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    c_f: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    b: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    d: Option<f64>,
}

/// A run either completes its assertions or reports a failed one.
enum Outcome {
    Pass,
    Fail,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn scenario(cli: &Cli, cfg: &RunConfig, flags: &ScenarioFlags) -> Result<ScenarioConfig> {
    let mut s = cfg.scenario.clone();
    if let Some(v) = cli.seed {
        s.seed = v;
    }
    if let Some(v) = cli.consensus.active_nodes {
        s.active_nodes = v;
    }
    if let Some(v) = cli.consensus.faulty {
        s.faulty = v;
    }
    if let Some(v) = cli.consensus.timeout_ms {
        s.timeout_ms = v;
    }
    if let Some(v) = flags.population {
        s.population = v;
    }
    if let Some(v) = flags.time_compression {
        s.time_compression = v;
    }
    s.validate().context("scenario")?;
    Ok(s)
}

fn run(cli: &Cli) -> Result<Outcome> {
    let cfg = RunConfig::load(cli.config.as_deref())?;
    let seed = cli.seed.unwrap_or(cfg.scenario.seed);
    let out = || OutDir::create(&cli.out_dir);
    match &cli.command {
        Command::RunSim { scenario: flags, plot } => {
            let s = scenario(cli, &cfg, flags)?;
            let r = run_scenario(&s)?;
            let out = out()?;
            output::write_metrics(&out, &r.series)?;
            output::write_snapshots(&out, r.day_start, &r.snapshots)?;
            out.write("ledger.ndjson", r.ledger.export_ndjson())?;
            if *plot {
                let thr: Vec<_> = r.series.minutes.iter().map(|m| m.throughput).collect();
                let lat: Vec<_> = r.series.minutes.iter().map(|m| m.mean_latency_s).collect();
                output::plot_series(&out, "throughput.svg", "Throughput per minute", &thr)?;
                output::plot_series(&out, "latency.svg", "Mean latency per minute (s)", &lat)?;
            }
            let sm = &r.series.summary;
            println!("population           {}", sm.population);
            println!("active nodes         {} ({} faulty)", s.active_nodes, s.faulty);
            println!("messages             {}", sm.total_messages);
            println!("served / dropped     {} / {}", sm.served, sm.dropped);
            println!("latency (s)          {} ± {}", num(sm.avg_latency_s), num(sm.sd_latency_s));
            println!("throughput           {} ± {}", num(sm.avg_throughput), num(sm.sd_throughput));
            println!("max sent per minute  {}", sm.max_sent_per_minute);
            println!("ledger height        {}", r.ledger.next_height());
            Ok(if r.ledger.verify_chain() { Outcome::Pass } else { Outcome::Fail })
        }
        Command::DemoSpoofing => report(&out()?, demos::spoofing(seed)),
        Command::DemoInterception { frames } => report(&out()?, demos::interception(seed, *frames)),
        Command::DemoRevocation => report(&out()?, demos::revocation(seed)),
        Command::DemoPrivacy { samples, epsilons, inner, outer } => {
            if epsilons.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
                bail!("epsilons must be positive");
            }
            if !(*inner > 0.0 && inner < outer && outer.is_finite()) {
                bail!("radii must satisfy 0 < inner < outer");
            }
            report(&out()?, demos::privacy(seed, *samples, epsilons, *inner, *outer))
        }
        Command::CalcScale { tps, lbs, tx_size, throughput } => {
            let base = CapacityParams {
                tps_capacity: tps.unwrap_or(cfg.capacity.tps_capacity),
                tx_size: tx_size.unwrap_or(cfg.capacity.tx_size),
                lbs_fraction: lbs.unwrap_or(cfg.capacity.lbs_fraction),
                target_throughput: throughput.unwrap_or(cfg.capacity.target_throughput),
                ..cfg.capacity.clone()
            };
            calc_scale(&out()?, &base)
        }
        Command::SolveGame { params, overrides } => {
            let p = game_params(params.as_deref(), cfg.game, overrides)?;
            let e = solve_game(&p)?;
            let out = out()?;
            out.write("game.json", serde_json::to_string_pretty(&serde_json::json!({ "params": p, "equilibrium": e }))? + "\n")?;
            println!("company  {}", serde_json::to_value(e.company)?.as_str().unwrap_or_default());
            println!("user     {}", serde_json::to_value(e.user)?.as_str().unwrap_or_default());
            println!("utility  company {} user {}", num(e.company_utility), num(e.user_utility));
            Ok(Outcome::Pass)
        }
        Command::ExportLedger { scenario: flags } => {
            let s = scenario(cli, &cfg, flags)?;
            let r = run_scenario(&s)?;
            let path = out()?.write("ledger.ndjson", r.ledger.export_ndjson())?;
            println!("{} blocks, tip {}", r.ledger.next_height(), ledger_fingerprint(&r.ledger));
            println!("{}", path.display());
            Ok(if r.ledger.verify_chain() { Outcome::Pass } else { Outcome::Fail })
        }
        Command::RunBroker { fee, reward, nights } => {
            let fee = FeeRate::from_fraction(*fee)?;
            let (rep, outcome) = demos::brokered_example(seed, fee, *reward, *nights);
            let out = out()?;
            out.write("broker.json", serde_json::to_string_pretty(&outcome)? + "\n")?;
            println!("transfers {}  owner {}  broker {}  requester paid {}", outcome.transfers, outcome.owner_credit, outcome.broker_credit, outcome.requester_debit);
            report(&out, rep)
        }
    }
}

fn report(out: &OutDir, r: DemoReport) -> Result<Outcome> {
    output::write_report(out, &r)?;
    output::print_report(&r);
    Ok(if r.passed() { Outcome::Pass } else { Outcome::Fail })
}

fn calc_scale(out: &OutDir, base: &CapacityParams) -> Result<Outcome> {
    base.validate()?;
    let users = max_users(base)?;
    let g = ledger_growth(base.tps_capacity, base.tx_size);
    println!(
        "{} tps x {} B: {} MB/s, {} TB/yr ({} TiB/yr), {} users at {}% LBS and {}% throughput",
        base.tps_capacity,
        base.tx_size,
        num(g.mb_per_s()),
        num(g.tb_per_year()),
        num(g.tib_per_year()),
        users,
        base.lbs_fraction * 100.0,
        base.target_throughput * 100.0
    );
    out.csv(
        "scale.csv",
        &["tps", "tx_size", "lbs_fraction", "target_throughput", "users", "mb_per_s", "tb_per_year", "tib_per_year"],
        [vec![
            num(base.tps_capacity),
            base.tx_size.to_string(),
            num(base.lbs_fraction),
            num(base.target_throughput),
            users.to_string(),
            num(g.mb_per_s()),
            num(g.tb_per_year()),
            num(g.tib_per_year()),
        ]],
    )?;
    let t = capacity_table(&CapacityParams { tps_capacity: 3500.0, ..base.clone() })?;
    println!("\nlbs   users@90%  users@100%  (reference)");
    for r in &t.users {
        println!("{:>4.0}%  {:>9}  {:>10}  ({} / {})", r.lbs_fraction * 100.0, r.users_at_90, r.users_at_100, r.reference_at_90, r.reference_at_100);
    }
    println!("\ntps     MB/s      TB/yr     TiB/yr   users  (reference TB/yr, users)");
    for r in &t.growth {
        println!(
            "{:>6}  {:.4}  {:>8.3}  {:>8.3}  {:>6}  ({}, {})",
            r.tps, r.mb_per_s, r.tb_per_year, r.tib_per_year, r.users, r.reference_tb_per_year, r.reference_users
        );
    }
    out.csv(
        "scale_users.csv",
        &["lbs_fraction", "users_at_90", "users_at_100", "reference_at_90", "reference_at_100"],
        t.users.iter().map(|r| {
            vec![num(r.lbs_fraction), r.users_at_90.to_string(), r.users_at_100.to_string(), r.reference_at_90.to_string(), r.reference_at_100.to_string()]
        }),
    )?;
    out.csv(
        "scale_growth.csv",
        &["tps", "tx_size", "mb_per_s", "tb_per_year", "tib_per_year", "users", "reference_tb_per_year", "reference_users"],
        t.growth.iter().map(|r| {
            vec![
                num(r.tps),
                r.tx_size.to_string(),
                num(r.mb_per_s),
                num(r.tb_per_year),
                num(r.tib_per_year),
                r.users.to_string(),
                num(r.reference_tb_per_year),
                r.reference_users.to_string(),
            ]
        }),
    )?;
    Ok(Outcome::Pass)
}

fn game_params(file: Option<&Path>, configured: Option<GameParams>, f: &GameFlags) -> Result<GameParams> {
    let from_file = match file {
        Some(path) => {
            if !path.is_file() {
                bail!("params file not found: {}", path.display());
            }
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(toml::from_str::<GameParams>(&text).with_context(|| format!("invalid params {}", path.display()))?)
        }
        None => configured,
    };
    let pick = |name: &str, flag: Option<f64>, base: Option<f64>| {
        flag.or(base).with_context(|| format!("missing game parameter {name} (use --params or --{})", name.replace('_', "-")))
    };
    let b = from_file.as_ref();
    let p = GameParams {
        r_n: pick("r_n", f.r_n, b.map(|p| p.r_n))?,
        r_m: pick("r_m", f.r_m, b.map(|p| p.r_m))?,
        c_d: pick("c_d", f.c_d, b.map(|p| p.c_d))?,
        c_i: pick("c_i", f.c_i, b.map(|p| p.c_i))?,
        c_r: pick("c_r", f.c_r, b.map(|p| p.c_r))?,
        c_f: pick("c_f", f.c_f, b.map(|p| p.c_f))?,
        b: pick("b", f.b, b.map(|p| p.b))?,
        d: pick("d", f.d, b.map(|p| p.d))?,
    };
    p.validate()?;
    Ok(p)
}
