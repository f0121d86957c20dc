use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use svramd::harness::{compare, parse_config, run_experiment, ExperimentConfig};
use svramd::verify;

#[derive(Parser)]
#[command(
    name = "svramd",
    version,
    about = "Variance-reduced adaptive mirror descent experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every seed of one configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Threshold on ‖g_X‖² for SFO-to-eps (defaults to hyper.eps).
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Run several configurations on a shared problem and tabulate SFO-to-eps.
    Compare {
        #[arg(required = true, num_args = 2..)]
        configs: Vec<PathBuf>,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        eps: f64,
    },
    /// Run the property and oracle checks.
    Verify {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Seeds run concurrently.
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    checkpoint_every: Option<u64>,
}

impl Common {
    fn apply(&self, c: &mut ExperimentConfig) {
        if let Some(d) = &self.out_dir {
            c.run.out_dir = d.clone();
        }
        if let Some(p) = self.parallelism {
            c.run.parallelism = p.max(1);
        }
        if let Some(k) = self.checkpoint_every {
            c.run.checkpoint_every = k.max(1);
        }
    }
}

fn load(path: &Path, common: &Common) -> Result<ExperimentConfig, String> {
    let mut c = parse_config(path).map_err(|e| format!("{}: {e}", path.display()))?;
    common.apply(&mut c);
    Ok(c)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, String> {
    match cli.command {
        Command::Run {
            config,
            common,
            eps,
        } => {
            let mut c = load(&config, &common)?;
            c.run.report_eps = eps;
            let out = run_experiment(&c).map_err(|e| e.to_string())?;
            let hp = &out.hp;
            println!(
                "{}: alpha={:.6e} B={} b={} K={} T={}",
                out.label, hp.alpha, hp.outer_batch, hp.batch, hp.inner_steps, hp.rounds
            );
            for r in &out.runs {
                match (&r.result, &r.trace_path) {
                    (Ok(_), Some(p)) => println!("  seed {}: {}", r.seed, p.display()),
                    (Err(e), _) => println!("  seed {}: FAILED {e}", r.seed),
                    _ => {}
                }
            }
            println!("summary: {}", out.summary_path.display());
            Ok(if out.all_succeeded() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Compare {
            configs,
            common,
            eps,
        } => {
            let loaded = configs
                .iter()
                .map(|p| load(p, &common))
                .collect::<Result<Vec<_>, _>>()?;
            let table = compare(&loaded, eps).map_err(|e| e.to_string())?;
            print!("{}", table.table());
            let dir = common
                .out_dir
                .unwrap_or_else(|| loaded[0].run.out_dir.clone());
            let path = dir.join("comparison.csv");
            std::fs::write(&path, table.csv()).map_err(|e| format!("{}: {e}", path.display()))?;
            println!("comparison: {}", path.display());
            let ok = table.outcomes.iter().all(|o| o.all_succeeded());
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        Command::Verify { seed } => {
            let mut ok = true;
            for c in verify::run_all(seed) {
                ok &= c.passed;
                println!(
                    "{} {:<28} {:>7.2}s  {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.seconds,
                    c.detail
                );
            }
            Ok(if ok {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}
