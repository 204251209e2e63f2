use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use invmgmt_bench::grid::{grid_by_name, CORE_GRID};
use invmgmt_bench::registry::{agent_tier, parse_roster};
use invmgmt_bench::report::{mean_profit, pct_of_oracle, render_pct_table};
use invmgmt_bench::runner::{read_csv, results_csv, run_episode, run_matrix};
use invmgmt_bench::wire::{serve_tcp, Server};
use invmgmt_bench::Scenario;
use invmgmt_core::topology::{builtin, Builtin};
use invmgmt_core::InfoTier;

#[derive(Parser)]
#[command(name = "invbench", version, about = "Multi-echelon inventory benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run agents over a scenario grid and write the results CSV.
    Run {
        /// Comma-separated agent ids, or `all`.
        #[arg(long, default_value = "all")]
        agents: String,
        #[arg(long, default_value = CORE_GRID)]
        grid: String,
        /// Restrict to these scenario ids (comma-separated).
        #[arg(long)]
        scenarios: Option<String>,
        /// `a..b` (inclusive) or a comma-separated list.
        #[arg(long, default_value = "0..9")]
        seeds: String,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Fill the wall_time_s column. Timed output is not reproducible.
        #[arg(long)]
        timing: bool,
        /// Worker threads; defaults to the number of cores.
        #[arg(long)]
        threads: Option<usize>,
        #[arg(long)]
        quiet: bool,
    },
    /// Inspect the scenario grid.
    Grid {
        #[command(subcommand)]
        action: GridAction,
    },
    /// Aggregate a results CSV.
    Report {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = Metric::PctOracle)]
        metric: Metric,
        #[arg(long)]
        json: bool,
    },
    /// Write the per-period audit ledger of one episode.
    Ledger {
        #[arg(long)]
        agent: String,
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve episodes of one scenario over the line-delimited JSON protocol.
    Serve {
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum, default_value_t = Tier::Blind)]
        tier: Tier,
        /// Listen on this address instead of stdio, e.g. 127.0.0.1:7070.
        #[arg(long)]
        tcp: Option<String>,
        /// Seconds to wait for a client message before giving up.
        #[arg(long, default_value_t = 300.0)]
        timeout: f64,
    },
    /// Print a built-in topology.
    Topology {
        name: String,
        #[arg(long, value_enum, default_value_t = Format::Yaml)]
        format: Format,
    },
}

#[derive(Subcommand)]
enum GridAction {
    List {
        #[arg(long, default_value = CORE_GRID)]
        grid: String,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Metric {
    PctOracle,
    Profit,
}

#[derive(Clone, Copy, ValueEnum)]
enum Tier {
    Blind,
    Informed,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Yaml,
    Json,
}

fn parse_seeds(spec: &str) -> Result<Vec<u64>> {
    if let Some((a, b)) = spec.split_once("..") {
        let a: u64 = a.trim().parse().context("seed range start")?;
        let b: u64 = b.trim().parse().context("seed range end")?;
        if b < a {
            bail!("empty seed range {spec}");
        }
        return Ok((a..=b).collect());
    }
    spec.split(',')
        .map(|s| s.trim().parse().with_context(|| format!("bad seed `{s}`")))
        .collect()
}

fn output(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("creating {}", p.display()))?,
        )),
        None => Box::new(io::stdout().lock()),
    })
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            agents,
            grid,
            scenarios,
            seeds,
            out,
            timing,
            threads,
            quiet,
        } => {
            let roster = parse_roster(&agents)?;
            let mut grid = grid_by_name(&grid)?;
            if let Some(only) = scenarios {
                let wanted: Vec<&str> = only.split(',').map(str::trim).collect();
                for w in &wanted {
                    w.parse::<Scenario>()?;
                }
                grid.retain(|s| wanted.contains(&s.id.as_str()));
            }
            let seeds = parse_seeds(&seeds)?;
            if let Some(n) = threads {
                rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
            }
            let total = roster.len() * grid.len() * seeds.len();
            let finished = AtomicUsize::new(0);
            let progress = |r: &invmgmt_bench::RunResult| {
                let n = finished.fetch_add(1, Ordering::Relaxed) + 1;
                if let Err(e) = &r.outcome {
                    eprintln!("failed: {} / {} / seed {}: {e}", r.agent, r.scenario, r.seed);
                }
                if !quiet {
                    eprint!("\r{n}/{total} episodes");
                }
            };
            let results = run_matrix(&roster, &grid, &seeds, &progress);
            if !quiet {
                eprintln!();
            }
            let failed = results.iter().filter(|r| r.is_failed()).count();
            let mut w = output(out.as_ref())?;
            w.write_all(results_csv(&results, timing).as_bytes())?;
            w.flush()?;
            if failed > 0 {
                eprintln!("{failed} of {total} episodes failed");
            }
        }
        Command::Grid {
            action: GridAction::List { grid, json },
        } => {
            let grid = grid_by_name(&grid)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&grid)?);
            } else {
                for s in &grid {
                    println!("{:<40} {}", s.id, s.group());
                }
            }
        }
        Command::Report { input, metric, json } => {
            let rows = read_csv(File::open(&input).with_context(|| format!("opening {}", input.display()))?)?;
            match metric {
                Metric::PctOracle => {
                    let table = pct_of_oracle(&rows)?;
                    if json {
                        println!("{}", serde_json::to_string_pretty(&table)?);
                    } else {
                        print!("{}", render_pct_table(&table));
                    }
                }
                Metric::Profit => {
                    let means = mean_profit(&rows);
                    if json {
                        let list: Vec<_> = means
                            .iter()
                            .map(|((a, s), (m, n))| serde_json::json!({"agent": a, "scenario": s, "mean_profit": m, "n": n}))
                            .collect();
                        println!("{}", serde_json::to_string_pretty(&list)?);
                    } else {
                        for ((a, s), (m, n)) in &means {
                            println!("{a:<14} {s:<40} {m:>12.2} (n={n})");
                        }
                    }
                }
            }
        }
        Command::Ledger {
            agent,
            scenario,
            seed,
            out,
        } => {
            agent_tier(&agent)?;
            let sc: Scenario = scenario.parse()?;
            let record = run_episode(&agent, &sc, seed)?;
            let mut w = output(out.as_ref())?;
            w.write_all(record.ledger_csv().as_bytes())?;
            w.flush()?;
        }
        Command::Serve {
            scenario,
            tier,
            tcp,
            timeout,
        } => {
            let sc: Scenario = scenario.parse()?;
            let tier = match tier {
                Tier::Blind => InfoTier::Blind,
                Tier::Informed => InfoTier::Informed,
            };
            let server = Server::for_scenario(&sc, tier)?.with_timeout(Duration::from_secs_f64(timeout));
            match tcp {
                Some(addr) => {
                    let listener = TcpListener::bind(&addr).with_context(|| format!("binding {addr}"))?;
                    eprintln!("listening on {}", listener.local_addr()?);
                    serve_tcp(Arc::new(server), listener, None)?;
                }
                None => {
                    server.serve(BufReader::new(io::stdin()), io::stdout())?;
                }
            }
        }
        Command::Topology { name, format } => {
            let topo = builtin(name.parse::<Builtin>()?);
            match format {
                Format::Yaml => print!("{}", topo.to_yaml()),
                Format::Json => println!("{}", topo.to_json()),
            }
        }
    }
    Ok(())
}
