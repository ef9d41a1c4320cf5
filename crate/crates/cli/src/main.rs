use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use quiver_cli::manifest::{parse_reward_mode, parse_seeds, RunManifest, WarmStartOpt};
use quiver_cli::{commands, exit};

/// Contextual-bandit decision engine: learn which agent strategy, tool,
/// or domain specialist fits each query, from feedback alone.
#[derive(Parser)]
#[command(name = "quiver", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one policy over seeded simulations; write trace CSV/JSONL
    /// series and a summary.
    Simulate(SimulateArgs),
    /// Compare policies on one environment (success, convergence,
    /// regret).
    Compare(CompareArgs),
    /// Run the standing ablation set (context features, policy, warm
    /// start).
    Ablate(AblateArgs),
    /// Pretty-print a saved posterior state.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Builtin environment (strategy|tool|domain) or a path to an
    /// environment JSON file.
    #[arg(long, default_value = "strategy")]
    env: String,
    /// Interactions per run.
    #[arg(long = "T", default_value_t = 30)]
    t: u64,
    /// Seeds: a count (`50` = 0..50), a range (`5..15`), or a comma list.
    #[arg(long, default_value = "50")]
    seeds: String,
    /// Warm-start gate: auto|on|off (auto = on for strategy mode).
    #[arg(long, default_value = "auto")]
    warm_start: String,
    /// Sliding-window adaptation: rebuild from the last W interactions.
    #[arg(long)]
    window: Option<usize>,
    /// Forgetting factor in (0, 1]; decays evidence once per step.
    #[arg(long)]
    gamma: Option<f64>,
    /// Reward signal: binary|composite|multi_objective.
    #[arg(long, default_value = "binary")]
    reward_mode: String,
    /// Rolling window for success-rate series.
    #[arg(long, default_value_t = 10)]
    rolling_window: usize,
    /// Rolling-success threshold for convergence time.
    #[arg(long, default_value_t = 0.7)]
    threshold: f64,
    /// Probability the simulated user returns an explicit rating.
    #[arg(long, default_value_t = 1.0)]
    feedback_rate: f64,
    /// Exploration rate for epsilon_greedy.
    #[arg(long, default_value_t = 0.1)]
    epsilon: f64,
    /// Exploration strength for ucb.
    #[arg(long, default_value_t = 1.0)]
    ucb_c: f64,
    /// Prior pseudo-success mass per component.
    #[arg(long, default_value_t = 1.0)]
    alpha0: f64,
    /// Prior pseudo-failure mass per component.
    #[arg(long, default_value_t = 1.0)]
    beta0: f64,
    /// Lexicon file (defaults to the builtin lexicon).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Policy: thompson|random|epsilon_greedy|ucb|fixed:<action>.
    #[arg(long, default_value = "thompson")]
    policy: String,
    /// Load a saved posterior as the starting state.
    #[arg(long)]
    init_state: Option<PathBuf>,
    /// Save each seed's final posterior+history as state_seed<N>.json.
    #[arg(long, default_value_t = false)]
    save_state: bool,
    /// Exit 1 unless the mean success rate reaches this value.
    #[arg(long)]
    assert_min_success: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Comma-separated policy labels (two or more).
    #[arg(long, default_value = "thompson,random")]
    policies: String,
    /// Exit 1 unless every learner beats random's mean success by this
    /// much (fraction, e.g. 0.15).
    #[arg(long)]
    assert_min_gap: Option<f64>,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct InspectArgs {
    /// Saved state file.
    #[arg(long)]
    state: PathBuf,
    /// Optional environment for per-archetype expected rewards.
    #[arg(long)]
    env: Option<String>,
    /// Lexicon used to featurize archetype templates.
    #[arg(long)]
    lexicon: Option<PathBuf>,
}

fn manifest_from(common: &CommonArgs, policies: Vec<String>) -> anyhow::Result<RunManifest> {
    Ok(RunManifest {
        env: common.env.clone(),
        policies,
        t_steps: common.t,
        seeds: parse_seeds(&common.seeds)?,
        warm_start: common.warm_start.parse::<WarmStartOpt>()?,
        window: common.window,
        gamma: common.gamma,
        reward_mode: parse_reward_mode(&common.reward_mode)?,
        rolling_window: common.rolling_window,
        threshold: common.threshold,
        feedback_rate: common.feedback_rate,
        epsilon: common.epsilon,
        ucb_c: common.ucb_c,
        alpha0: common.alpha0,
        beta0: common.beta0,
        lexicon: common.lexicon.clone(),
        init_state: None,
        save_state: false,
        out: common.out.clone(),
    })
}

fn dispatch(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Simulate(args) => {
            let mut manifest = manifest_from(&args.common, vec![args.policy.clone()])?;
            manifest.init_state = args.init_state.clone();
            manifest.save_state = args.save_state;
            commands::cmd_simulate(&manifest, args.assert_min_success)
        }
        Command::Compare(args) => {
            let policies: Vec<String> = args
                .policies
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
            let manifest = manifest_from(&args.common, policies)?;
            commands::cmd_compare(&manifest, args.assert_min_gap)
        }
        Command::Ablate(args) => {
            let manifest = manifest_from(&args.common, vec!["thompson".into()])?;
            commands::cmd_ablate(&manifest)
        }
        Command::Inspect(args) => {
            commands::cmd_inspect(&args.state, args.env.as_deref(), args.lexicon.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit::CONFIG_ERROR as u8)
        }
    }
}
