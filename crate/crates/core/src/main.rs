use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use pia3c::env::replay::Replay;
use pia3c::env::BoardConfig;
use pia3c::harness::{run_eval, run_training, write_eval, AgentSpec, ExperimentConfig};
use pia3c::opponents::OpponentKind;
use pia3c::selftest;

#[derive(Parser)]
#[command(name = "pia3c", version, about = "Planner-imitation A3C on two-player Mini-Pommerman")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run per configured seed.
    Train {
        /// TOML experiment configuration.
        #[arg(long)]
        config: PathBuf,
        /// Override a config key, e.g. `--set num_workers=8`. Repeatable.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Train this single seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "runs/train")]
        out_dir: PathBuf,
    },
    /// Play a tournament and report wins, losses, ties and mean reward.
    Eval {
        /// mcts75, mcts:150, static, rule_based or checkpoint:PATH
        #[arg(long)]
        agent: AgentSpec,
        #[arg(long, default_value = "static")]
        opponent: OpponentKind,
        #[arg(long, default_value_t = 200)]
        games: u64,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        board_size: usize,
        /// Also write one replay file per game.
        #[arg(long)]
        save_replays: bool,
        #[arg(long, default_value = "runs/eval")]
        out_dir: PathBuf,
    },
    /// Rebuild a stored episode and print every state.
    Replay {
        file: PathBuf,
        /// Print only every n-th state (the final state is always shown).
        #[arg(long, default_value_t = 1)]
        every: usize,
    },
    /// Run the environment invariant and gradient checks.
    Selftest,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Train { config, overrides, seed, out_dir } => {
            let mut cfg = ExperimentConfig::load(&config, &overrides)?;
            if let Some(s) = seed {
                cfg.seeds = vec![s];
            }
            let summaries = run_training(&cfg, &out_dir)?;
            for s in &summaries {
                println!("{}", serde_json::to_string(s)?);
            }
            Ok(true)
        }
        Command::Eval { agent, opponent, games, seed, board_size, save_replays, out_dir } => {
            let board = BoardConfig::new(board_size);
            let (report, records) = run_eval(&agent, opponent, games, seed, &board, save_replays)?;
            write_eval(&out_dir, &report, &records).with_context(|| format!("writing {}", out_dir.display()))?;
            println!("{}", serde_json::to_string(&report)?);
            Ok(true)
        }
        Command::Replay { file, every } => {
            if every == 0 {
                bail!("--every must be at least 1");
            }
            let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
            let replay = Replay::parse(&text)?;
            let states = replay.states()?;
            let last = states.len() - 1;
            for (t, s) in states.iter().enumerate() {
                if t % every == 0 || t == last {
                    let actions = replay.steps.get(t).map(|a| format!("  next: {:?} {:?}", a[0], a[1])).unwrap_or_default();
                    println!("t={t}{actions}\n{}", s.render());
                }
            }
            if let Some(o) = states[last].outcome() {
                println!("outcome: {o:?}");
            }
            Ok(true)
        }
        Command::Selftest => {
            let results = selftest::run_all();
            for r in &results {
                println!("{r}");
            }
            Ok(results.iter().all(|r| r.passed))
        }
    }
}
