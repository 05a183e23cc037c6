use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use anyhow::{anyhow, bail, Context, Result};
use axum::extract::State;
use axum::routing::{get, post};
use axum::{Json, Router};
use clap::{Args, Parser, Subcommand};
use permchain_cli::{
    key_from_seed, parse_reports, render_csv, render_text, run_scenario_file, seed_u64, KeyInfo,
};
use permchain_core::crypto::random_keypair;
use permchain_core::workload::Workload;
use permchain_core::{Chain, ChainConfig, Difficulty, MineParams, Transaction};
use permchain_netsim::{run_simulation_with_series, run_sweep_with, series_csv, Mode, SimConfig};
use permchain_resource::{
    router, ChainClient, DocumentStore, InProcessChain, ResourceServer, ServerConfig, SharedChain,
    ValidationMode,
};

#[derive(Parser)]
#[command(
    name = "permchain",
    version,
    about = "Chain-backed access control for clinical data"
)]
struct Cli {
    /// Seed for every random choice; numeric or any string.
    #[arg(long, global = true)]
    seed: Option<String>,
    /// Machine-readable output.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a keypair as JSON (deterministic with --seed).
    Keygen,
    /// Scripted end-to-end scenarios.
    Scenario {
        #[command(subcommand)]
        command: ScenarioCommand,
    },
    /// Run the network simulator and print its report.
    Simulate(SimulateArgs),
    /// Compare simulation reports in a table.
    Report {
        /// Report files (single report or array of reports each).
        files: Vec<PathBuf>,
        #[arg(long)]
        csv: bool,
    },
    /// Chain utilities.
    Chain {
        #[command(subcommand)]
        command: ChainCommand,
    },
    /// Run the resource server over HTTP with an in-process chain.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum ScenarioCommand {
    Run {
        file: PathBuf,
        /// Also write the transcript here.
        #[arg(long)]
        transcript: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ChainCommand {
    /// Write every block as one JSON line.
    Export {
        /// Chain produced by running this scenario.
        #[arg(long, conflicts_with = "random_blocks")]
        scenario: Option<PathBuf>,
        /// Chain of this many blocks of randomized workload.
        #[arg(long)]
        random_blocks: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<Mode>,
    #[arg(long)]
    nodes: Option<usize>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    rate: Option<f64>,
    #[arg(long)]
    clients: Option<usize>,
    #[arg(long)]
    duration: Option<f64>,
    #[arg(long)]
    buffer: Option<usize>,
    #[arg(long)]
    service_rate: Option<f64>,
    #[arg(long)]
    timeout: Option<f64>,
    #[arg(long)]
    difficulty: Option<u32>,
    #[arg(long)]
    block_interval: Option<f64>,
    #[arg(long)]
    max_txs: Option<usize>,
    #[arg(long)]
    warmup_fraction: Option<f64>,
    #[arg(long)]
    settle_limit: Option<f64>,
    /// Nodes accept blocks without waiting for resource-server answers.
    #[arg(long)]
    no_validation_wait: bool,
    #[arg(long)]
    reject_on_rs_failure: bool,
    /// Sweep one axis: `--sweep n_nodes 4,8,16,32`.
    #[arg(long, num_args = 2, value_names = ["AXIS", "VALUES"])]
    sweep: Option<Vec<String>>,
    /// Keep the base seed for every sweep cell instead of deriving one per cell.
    #[arg(long)]
    same_seed: bool,
    /// Write a CSV: the time series for a single run, the summary table for a sweep.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[arg(long, default_value_t = 1.0)]
    series_interval: f64,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    listen: Option<std::net::SocketAddr>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    validation_mode: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Keygen => {
            let key = match &cli.seed {
                Some(s) => key_from_seed(s),
                None => random_keypair(),
            };
            println!("{}", serde_json::to_string_pretty(&KeyInfo::new(&key))?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenario {
            command: ScenarioCommand::Run { file, transcript },
        } => {
            let seed = cli.seed.as_deref().map_or(0, seed_u64);
            let run = run_scenario_file(&file, seed)?;
            let t = &run.transcript;
            let text = serde_json::to_string_pretty(t)?;
            if let Some(path) = transcript {
                std::fs::write(&path, &text)
                    .with_context(|| format!("writing {}", path.display()))?;
            }
            if cli.json {
                println!("{text}");
            } else {
                for s in &t.steps {
                    let height = s.block_height.map_or("-".to_string(), |h| h.to_string());
                    let status = s.status.map_or(String::new(), |c| format!(" status={c}"));
                    println!(
                        "{:<4} {:<24} {:<14} height={height}{status}",
                        if s.passed { "ok" } else { "FAIL" },
                        s.id,
                        s.action
                    );
                    for f in &s.failures {
                        println!("       {f}");
                    }
                }
                println!(
                    "{}: {} steps, final height {}, tip {}",
                    t.scenario,
                    t.steps.len(),
                    t.final_height,
                    t.tip_hash
                );
            }
            if t.passed {
                Ok(ExitCode::SUCCESS)
            } else {
                eprintln!(
                    "first failing step: {}",
                    t.first_failure.as_deref().unwrap_or("?")
                );
                Ok(ExitCode::FAILURE)
            }
        }
        Command::Simulate(args) => simulate(args, cli.seed.as_deref()),
        Command::Report { files, csv } => {
            if files.is_empty() {
                bail!("usage: permchain report <REPORT.json>...");
            }
            let mut docs = Vec::new();
            for f in &files {
                let text = std::fs::read_to_string(f)
                    .with_context(|| format!("reading {}", f.display()))?;
                docs.push(
                    serde_json::from_str(&text)
                        .with_context(|| format!("parsing {}", f.display()))?,
                );
            }
            let rows = parse_reports(&docs).map_err(|e| anyhow!(e))?;
            if cli.json {
                let out =
                    serde_json::json!({ "rows": rows, "ratios": permchain_cli::ratios(&rows) });
                println!("{}", serde_json::to_string_pretty(&out)?);
            } else if csv {
                print!("{}", render_csv(&rows));
            } else {
                print!("{}", render_text(&rows));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Chain {
            command:
                ChainCommand::Export {
                    scenario,
                    random_blocks,
                    out,
                },
        } => {
            let seed = cli.seed.as_deref().map_or(0, seed_u64);
            let chain = match (scenario, random_blocks) {
                (Some(path), _) => {
                    let run = run_scenario_file(&path, seed)?;
                    let c = run.chain.lock().expect("chain lock");
                    c.chain().clone()
                }
                (None, Some(n)) => random_chain(seed, n)?,
                (None, None) => bail!("give --scenario or --random-blocks"),
            };
            match out {
                Some(path) => chain.export_jsonl(std::fs::File::create(&path)?)?,
                None => chain.export_jsonl(std::io::stdout().lock())?,
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Serve(args) => serve(args, cli.seed.as_deref()),
    }
}

fn simulate(a: SimulateArgs, seed: Option<&str>) -> Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(p) => serde_json::from_str(&std::fs::read_to_string(p)?)
            .with_context(|| format!("parsing {}", p.display()))?,
        None => SimConfig::default(),
    };
    macro_rules! set {
        ($($flag:ident => $field:ident),*) => {
            $(if let Some(v) = a.$flag { cfg.$field = v; })*
        };
    }
    set!(mode => mode, nodes => n_nodes, delta => delta_seconds, rate => client_rate,
         clients => n_clients, duration => duration, buffer => rs_buffer,
         service_rate => rs_service_rate, timeout => rs_timeout, difficulty => difficulty,
         block_interval => block_interval_target, max_txs => max_txs_per_block,
         warmup_fraction => warmup_fraction, settle_limit => settle_limit);
    if a.no_validation_wait {
        cfg.validation_waits_for_rs = false;
    }
    if a.reject_on_rs_failure {
        cfg.reject_on_rs_failure = true;
    }
    if let Some(s) = seed {
        cfg.seed = seed_u64(s);
    }
    if let Some(sweep) = &a.sweep {
        let values: Vec<f64> = sweep[1]
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .with_context(|| format!("bad sweep value `{v}`"))
            })
            .collect::<Result<_>>()?;
        let reports = run_sweep_with(&cfg, &sweep[0], &values, !a.same_seed)?;
        println!("{}", serde_json::to_string_pretty(&reports)?);
        if let Some(path) = &a.csv {
            let docs = vec![serde_json::to_value(&reports)?];
            let rows = parse_reports(&docs).map_err(|e| anyhow!(e))?;
            std::fs::write(path, render_csv(&rows))?;
        }
    } else {
        let interval = a.csv.as_ref().map(|_| a.series_interval);
        let (report, series) = run_simulation_with_series(&cfg, interval)?;
        println!("{}", report.to_json());
        if let Some(path) = &a.csv {
            std::fs::write(path, series_csv(&series))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn random_chain(seed: u64, blocks: usize) -> Result<Chain> {
    use rand_chacha::rand_core::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let cfg = ChainConfig {
        difficulty: Difficulty::leading_zero_bits(8),
        ..ChainConfig::default()
    };
    let mut chain = Chain::new(cfg);
    let mut w = Workload::new(seed, 3, cfg.chain_id);
    let miner = key_from_seed("miner").address;
    for tx in w.registrations() {
        chain.submit(tx)?;
    }
    for h in 0..blocks as u64 {
        if h > 0 {
            for tx in w.batch(&mut rng, chain.state(), 5) {
                chain.submit(tx)?;
            }
        }
        let params = MineParams {
            allow_empty: true,
            ..MineParams::new(miner, 10 * (h + 1))
        };
        let b = chain.mine_block(&params, &mut rng)?;
        chain.try_append(&b)?;
    }
    Ok(chain)
}

async fn submit_tx(
    State(chain): State<SharedChain>,
    Json(tx): Json<Transaction>,
) -> Json<serde_json::Value> {
    let result =
        tokio::task::spawn_blocking(move || chain.lock().expect("chain lock").commit(tx)).await;
    Json(match result {
        Ok(Ok(receipt)) => serde_json::to_value(receipt).expect("receipt serializes"),
        Ok(Err(e)) => serde_json::json!({ "error": e.to_string() }),
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    })
}

async fn chain_tip(State(chain): State<SharedChain>) -> Json<serde_json::Value> {
    let c = chain.lock().expect("chain lock");
    Json(serde_json::json!({
        "height": c.chain().height(),
        "tip": c.chain().tip().hash,
        "chain_id": c.chain().config().chain_id,
    }))
}

fn serve(a: ServeArgs, seed: Option<&str>) -> Result<ExitCode> {
    let mut cfg = match &a.config {
        Some(p) => ServerConfig::load(p).map_err(|e| anyhow!("{}: {e}", p.display()))?,
        None => ServerConfig::default(),
    };
    if let Some(l) = a.listen {
        cfg.listen = l;
    }
    if let Some(d) = a.dataset {
        cfg.dataset = Some(d);
    }
    if let Some(m) = a.validation_mode {
        cfg.validation_mode =
            serde_json::from_value::<ValidationMode>(serde_json::Value::String(m))
                .context("validation mode is `committed` or `dry_run`")?;
    }
    if cfg.chain_endpoint != "in-process" {
        bail!("unsupported chain endpoint `{}`", cfg.chain_endpoint);
    }
    let mut store = match &cfg.journal_path {
        Some(p) => DocumentStore::open(p)?,
        None => DocumentStore::new(),
    };
    if let Some(d) = &cfg.dataset {
        let ingested = store.ingest_dataset(d)?;
        for (id, h) in ingested {
            eprintln!("ingested {id} data_hash={h}");
        }
    }
    let seed = seed.map_or(0, seed_u64);
    let rs_key = key_from_seed(cfg.key_seed.as_deref().unwrap_or("resource-server"));
    let chain: SharedChain = Arc::new(Mutex::new(InProcessChain::new(
        ChainConfig::default(),
        key_from_seed("miner").address,
        seed,
    )));
    let server = ResourceServer::new(store, chain.clone(), rs_key, cfg.validation_mode)?;
    eprintln!(
        "resource server {} listening on {}",
        server.address(),
        cfg.listen
    );
    let chain_routes = Router::new()
        .route("/chain/tx", post(submit_tx))
        .route("/chain/tip", get(chain_tip))
        .with_state(chain.clone());
    let app = router(Arc::new(Mutex::new(server))).merge(chain_routes);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(cfg.listen).await?;
        axum::serve(listener, app).await
    })?;
    Ok(ExitCode::SUCCESS)
}
