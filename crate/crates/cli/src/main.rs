use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use drivesim_cli::{bench, effective_seed, generate, load_config, rollout, serve, Policy, ServeOptions};

#[derive(Parser)]
#[command(name = "drivesim", version, about = "Procedural driving scenario simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(clap::Args)]
struct Scenario {
    /// Named scenario (SingleAgentPG, PGMap, Roundabout, ...).
    #[arg(long, conflicts_with = "config")]
    env: Option<String>,
    /// Scenario config as JSON.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate procedural maps as scenario documents.
    Generate {
        /// Blocks per map, not counting the first block.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        n: u64,
        /// Sampling attempts per block before backtracking.
        #[arg(short = 'T', long = "T", visible_alias = "tries", default_value_t = 40, value_parser = clap::value_parser!(u64).range(1..))]
        tries: u64,
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        count: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run episodes and print one record per line, then a summary.
    Rollout {
        #[command(flatten)]
        scenario: Scenario,
        /// idm, zero or replay-demo.
        #[arg(long, default_value = "idm")]
        policy: String,
        /// Recording to replay with --policy replay-demo.
        #[arg(long)]
        demo: Option<PathBuf>,
        #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
        episodes: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Measure headless steps per second.
    Benchmark {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        steps: u64,
        /// Exact number of rule-based traffic vehicles.
        #[arg(long)]
        traffic: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Serve the teleoperation socket and the current map.
    Serve {
        #[command(flatten)]
        scenario: Scenario,
        #[arg(long, default_value_t = 8765)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        /// Decision steps per second.
        #[arg(long, default_value_t = 10.0)]
        hz: f64,
        /// Where finished demonstrations are written.
        #[arg(long)]
        record_dir: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.cmd {
        Cmd::Generate { n, tries, count, seed, out } => {
            let s = generate(n as usize, tries as usize, count as usize, effective_seed(seed)?, &out)?;
            println!("wrote {} documents and {}", s.files.len(), s.manifest.display());
        }
        Cmd::Rollout {
            scenario,
            policy,
            demo,
            episodes,
            seed,
        } => {
            let policy = Policy::parse(&policy, demo.as_deref())?;
            let config = load_config(scenario.env.as_deref(), scenario.config.as_deref())?;
            let out = rollout(&config, &policy, episodes, effective_seed(seed)?)?;
            for line in out.lines() {
                println!("{line}");
            }
        }
        Cmd::Benchmark {
            scenario,
            steps,
            traffic,
            seed,
        } => {
            let mut config = load_config(scenario.env.as_deref(), scenario.config.as_deref())?;
            if let Some(n) = traffic {
                config = bench::with_traffic(config, n);
            }
            let r = bench::run_benchmark(&config, steps, effective_seed(seed)?)?;
            println!("{:.1} steps/s over {} steps ({} episodes, {:.1} agents)", r.steps_per_second, r.steps, r.episodes, r.agents_mean);
            let p = r.phases;
            for (name, secs) in [
                ("engine", p.engine),
                ("sensing", p.sensing),
                ("reward", p.reward),
                ("policy", p.policy),
                ("reset", p.reset),
                ("streaming", p.streaming),
            ] {
                println!("  {name:<10} {secs:>9.3} s  {:>5.1}%", 100.0 * secs / r.seconds);
            }
            println!("{}", serde_json::to_string(&r)?);
        }
        Cmd::Serve {
            scenario,
            port,
            host,
            hz,
            record_dir,
            seed,
        } => {
            let config = load_config(scenario.env.as_deref(), scenario.config.as_deref())?;
            let opts = ServeOptions {
                config,
                seed: effective_seed(seed)?,
                hz,
                record_dir,
                addr: SocketAddr::new(host, port),
            };
            tokio::runtime::Runtime::new()?.block_on(serve(opts))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
