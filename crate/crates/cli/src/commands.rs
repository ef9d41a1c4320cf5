//! The four experiment commands behind the binary's subcommands.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Result};
use quiver_core::action::ActionMode;
use quiver_core::bandit::PolicyConfig;
use quiver_core::features::{extract, FeatureSpec, Lexicon, Query};
use quiver_core::metrics::{cumulative_regret, queries_to_threshold, rolling_success};
use quiver_core::sim::{
    archetype_action_frequencies, compare_policies, instantiate_template, run_experiment,
    EnvironmentSpec, RunOptions, RunOutput,
};
use rayon::prelude::*;

use crate::data::{load_env, load_lexicon};
use crate::manifest::{RunManifest, WarmStartOpt};
use crate::output::{
    ensure_dir, render_pattern_table, tee, write_comparison_csv, write_seed_summary_csv,
    write_text, write_trace_csv, write_trace_jsonl, SeedSummary,
};
use crate::state::{load_state, save_state, SavedState};
use crate::{exit, state::StateError};

/// Resolve the warm-start switch against the environment mode.
fn resolve_warm_start(opt: WarmStartOpt, env: &EnvironmentSpec) -> Result<bool> {
    match opt {
        WarmStartOpt::Auto => Ok(env.mode == ActionMode::Strategy),
        WarmStartOpt::On => {
            if env.mode != ActionMode::Strategy {
                bail!("--warm-start on requires a strategy-mode environment");
            }
            Ok(true)
        }
        WarmStartOpt::Off => Ok(false),
    }
}

fn build_options<'a>(
    manifest: &RunManifest,
    lexicon: &'a Lexicon,
    env: &EnvironmentSpec,
) -> Result<RunOptions<'a>> {
    let mut options = RunOptions::new(lexicon);
    options.warm_start = resolve_warm_start(manifest.warm_start, env)?;
    options.window = manifest.window;
    options.gamma = manifest.gamma;
    options.reward_mode = manifest.reward_mode;
    options.feedback_rate = manifest.feedback_rate;
    options.alpha0 = manifest.alpha0;
    options.beta0 = manifest.beta0;
    Ok(options)
}

fn run_seeds(
    env: &EnvironmentSpec,
    policy: &PolicyConfig,
    manifest: &RunManifest,
    options: &RunOptions<'_>,
) -> Result<Vec<(u64, RunOutput)>> {
    manifest
        .seeds
        .par_iter()
        .map(|&seed| {
            run_experiment(env, policy, manifest.t_steps, seed, options)
                .map(|out| (seed, out))
                .map_err(|e| anyhow::anyhow!("seed {seed}: {e}"))
        })
        .collect()
}

fn summarize_seed(out: &RunOutput, seed: u64, manifest: &RunManifest) -> Result<SeedSummary> {
    let rolling =
        rolling_success(&out.trace, manifest.rolling_window).map_err(|e| anyhow::anyhow!("{e}"))?;
    let regret = cumulative_regret(&out.trace).map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(SeedSummary {
        seed,
        success_rate: out.trace.success_rate(),
        final_rolling: rolling.last().copied().unwrap_or(0.0),
        queries_to_threshold: queries_to_threshold(
            &out.trace,
            manifest.threshold,
            manifest.rolling_window,
        )
        .map_err(|e| anyhow::anyhow!("{e}"))?,
        final_regret: regret.last().copied().unwrap_or(0.0),
    })
}

/// Run one policy over all seeds; write per-seed CSV/JSONL series and an
/// aggregate summary.
pub fn cmd_simulate(manifest: &RunManifest, assert_min_success: Option<f64>) -> Result<i32> {
    manifest.validate()?;
    let env = load_env(&manifest.env)?;
    let lexicon = load_lexicon(manifest.lexicon.as_deref())?;
    let mut options = build_options(manifest, &lexicon, &env)?;

    if let Some(path) = &manifest.init_state {
        let loaded = load_state(path, Some(FeatureSpec::standard().dim()))?;
        let space = env.action_space().map_err(|e| anyhow::anyhow!("{e}"))?;
        if loaded.mode != env.mode || loaded.actions != space.ids() {
            bail!(
                "state file {} was trained for mode '{}' with actions {:?}",
                path.display(),
                loaded.mode.as_str(),
                loaded.actions
            );
        }
        if loaded.lexicon_hash != lexicon.fingerprint() {
            eprintln!(
                "warning: state file {} was trained under a different lexicon",
                path.display()
            );
        }
        options.initial_posterior = Some(loaded.posterior);
    }

    let policy = manifest.policy_config(&manifest.policies[0])?;
    ensure_dir(&manifest.out)?;
    let results = run_seeds(&env, &policy, manifest, &options)?;

    let mut rows = Vec::with_capacity(results.len());
    for (seed, out) in &results {
        write_trace_csv(
            &manifest.out.join(format!("trace_seed{seed}.csv")),
            &out.trace,
            manifest.rolling_window,
        )?;
        write_trace_jsonl(&manifest.out.join(format!("trace_seed{seed}.jsonl")), out)?;
        if manifest.save_state {
            let space = env.action_space().map_err(|e| anyhow::anyhow!("{e}"))?;
            save_state(
                &manifest.out.join(format!("state_seed{seed}.json")),
                &SavedState {
                    mode: env.mode,
                    actions: space.ids().to_vec(),
                    posterior: out.posterior.clone(),
                    history: out.history.records(),
                    lexicon_hash: lexicon.fingerprint(),
                },
            )?;
        }
        rows.push(summarize_seed(out, *seed, manifest)?);
    }
    write_seed_summary_csv(&manifest.out.join("summary.csv"), &rows)?;

    let mean_success = rows.iter().map(|r| r.success_rate).sum::<f64>() / rows.len().max(1) as f64;
    let mean_final = rows.iter().map(|r| r.final_rolling).sum::<f64>() / rows.len().max(1) as f64;
    println!(
        "{} on '{}': {} seeds x T={}, mean success {:.3}, mean final rolling {:.3}",
        manifest.policies[0],
        manifest.env,
        rows.len(),
        manifest.t_steps,
        mean_success,
        mean_final
    );
    println!("wrote {}", manifest.out.display());

    if let Some(min) = assert_min_success {
        if mean_success < min {
            eprintln!("assert failed: mean success {mean_success:.3} < {min:.3}");
            return Ok(exit::ASSERT_FAILED);
        }
    }
    Ok(exit::OK)
}

/// Compare two or more policies on a common environment and seed list.
pub fn cmd_compare(manifest: &RunManifest, assert_min_gap: Option<f64>) -> Result<i32> {
    manifest.validate()?;
    if manifest.policies.len() < 2 {
        bail!("compare needs at least two --policies");
    }
    let env = load_env(&manifest.env)?;
    let lexicon = load_lexicon(manifest.lexicon.as_deref())?;
    let options = build_options(manifest, &lexicon, &env)?;
    let policies: Vec<(String, PolicyConfig)> = manifest
        .policies
        .iter()
        .map(|label| Ok((label.clone(), manifest.policy_config(label)?)))
        .collect::<Result<_>>()?;

    let summary = compare_policies(
        &env,
        &policies,
        manifest.t_steps,
        &manifest.seeds,
        manifest.threshold,
        manifest.rolling_window,
        &options,
    )
    .map_err(|e| anyhow::anyhow!("{e}"))?;

    ensure_dir(&manifest.out)?;
    write_comparison_csv(&manifest.out.join("report.csv"), &summary)?;

    let mut report = String::new();
    tee(&mut report, &format!("environment: {}", manifest.env));
    for line in summary.render_text().lines() {
        tee(&mut report, line);
    }
    let random = summary.rows.iter().find(|r| r.policy == "random");
    let mut worst_gap = f64::INFINITY;
    if let Some(base) = random {
        for r in &summary.rows {
            if r.policy != "random" {
                let gap = r.mean_success - base.mean_success;
                worst_gap = worst_gap.min(gap);
                tee(
                    &mut report,
                    &format!(
                        "{} improvement vs random: {:+.1} percentage points",
                        r.policy,
                        gap * 100.0
                    ),
                );
            }
        }
    }
    write_text(&manifest.out.join("report.txt"), &report)?;

    if let Some(min_gap) = assert_min_gap {
        if random.is_none() {
            bail!("--assert-min-gap requires 'random' among the policies");
        }
        if worst_gap < min_gap {
            eprintln!("assert failed: worst gap {worst_gap:.3} < {min_gap:.3}");
            return Ok(exit::ASSERT_FAILED);
        }
    }
    Ok(exit::OK)
}

/// The four standing ablation configurations.
pub fn ablation_configs(manifest: &RunManifest) -> Vec<(&'static str, PolicyConfig, bool, bool)> {
    // (label, policy, all_ones_context, warm_start_allowed)
    vec![
        ("full", PolicyConfig::thompson(), false, true),
        ("no_context_features", PolicyConfig::thompson(), true, true),
        (
            "epsilon_greedy_policy",
            PolicyConfig::epsilon_greedy(manifest.epsilon),
            false,
            true,
        ),
        ("no_warm_start", PolicyConfig::thompson(), false, false),
    ]
}

/// Ablation study: full system vs context-feature, policy, and
/// warm-start ablations.
pub fn cmd_ablate(manifest: &RunManifest) -> Result<i32> {
    manifest.validate()?;
    let env = load_env(&manifest.env)?;
    let lexicon = load_lexicon(manifest.lexicon.as_deref())?;
    ensure_dir(&manifest.out)?;

    let mut report = String::new();
    tee(
        &mut report,
        &format!(
            "ablation on '{}': {} seeds x T={}",
            manifest.env,
            manifest.seeds.len(),
            manifest.t_steps
        ),
    );
    tee(
        &mut report,
        &format!(
            "{:<24} {:>14} {:>8} {:>14}",
            "configuration", "final_rolling", "sd", "success_rate"
        ),
    );

    let mut csv =
        String::from("configuration,mean_final_rolling,std_final_rolling,mean_success_rate\n");
    let mut results: BTreeMap<String, f64> = BTreeMap::new();
    for (label, policy, all_ones, warm_allowed) in ablation_configs(manifest) {
        let mut options = build_options(manifest, &lexicon, &env)?;
        options.all_ones_context = all_ones;
        if !warm_allowed {
            options.warm_start = false;
        }
        let runs = run_seeds(&env, &policy, manifest, &options)?;
        let mut finals = Vec::with_capacity(runs.len());
        let mut successes = Vec::with_capacity(runs.len());
        for (_, out) in &runs {
            let rolling = rolling_success(&out.trace, manifest.rolling_window)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            finals.push(rolling.last().copied().unwrap_or(0.0));
            successes.push(out.trace.success_rate());
        }
        let n = finals.len().max(1) as f64;
        let mean_final = finals.iter().sum::<f64>() / n;
        let mean_success = successes.iter().sum::<f64>() / n;
        let var = finals
            .iter()
            .map(|v| (v - mean_final) * (v - mean_final))
            .sum::<f64>()
            / (n - 1.0).max(1.0);
        tee(
            &mut report,
            &format!(
                "{label:<24} {mean_final:>14.3} {:>8.3} {mean_success:>14.3}",
                var.sqrt()
            ),
        );
        csv.push_str(&format!(
            "{label},{mean_final},{},{mean_success}\n",
            var.sqrt()
        ));
        results.insert(label.to_string(), mean_final);
    }
    tee(
        &mut report,
        "context-dimension sweep skipped: shipped environments use the fixed d=5 featurization",
    );
    write_text(&manifest.out.join("ablation.txt"), &report)?;
    write_text(&manifest.out.join("ablation.csv"), &csv)?;
    Ok(exit::OK)
}

/// Human-readable posterior dump, with per-archetype expected rewards
/// when an environment is supplied.
pub fn cmd_inspect(
    state_path: &Path,
    env_name: Option<&str>,
    lexicon_path: Option<&Path>,
) -> Result<i32> {
    let state = match load_state(state_path, None) {
        Ok(s) => s,
        Err(
            e @ (StateError::Io { .. }
            | StateError::Schema { .. }
            | StateError::Incompatible { .. }),
        ) => {
            bail!("{e}");
        }
    };
    let feature_names = FeatureSpec::standard();

    println!(
        "state: mode={} d={} actions={:?} lexicon_hash={:016x}",
        state.mode.as_str(),
        state.posterior.dim(),
        state.actions,
        state.lexicon_hash
    );
    println!("history: {} interactions", state.history.len());
    for (index, action) in state.actions.iter().enumerate() {
        println!("action '{action}':");
        println!("  alpha      {:?}", state.posterior.alpha(index));
        println!("  beta       {:?}", state.posterior.beta(index));
        let importance = state
            .posterior
            .feature_importance(index)
            .map_err(|e| anyhow::anyhow!("{e}"))?;
        let named: Vec<String> = feature_names
            .names()
            .iter()
            .zip(importance.iter())
            .map(|(n, w)| format!("{n}={w:+.3}"))
            .collect();
        println!("  importance {}", named.join(" "));
    }

    if let Some(name) = env_name {
        let env = load_env(name)?;
        let space = env.action_space().map_err(|e| anyhow::anyhow!("{e}"))?;
        if space.ids() != state.actions {
            bail!(
                "environment '{name}' actions {:?} do not match the state file",
                space.ids()
            );
        }
        let lexicon = load_lexicon(lexicon_path)?;
        if lexicon.fingerprint() != state.lexicon_hash {
            eprintln!("warning: lexicon fingerprint differs from the state file");
        }
        println!("\nexpected reward by archetype (under current posterior):");
        for archetype in &env.archetypes {
            let mut mean_context = vec![0.0; feature_names.dim()];
            for t in 0..archetype.templates.len() {
                let text =
                    instantiate_template(archetype, t).map_err(|e| anyhow::anyhow!("{e}"))?;
                let q = Query::new(text, "inspect").map_err(|e| anyhow::anyhow!("{e}"))?;
                let x =
                    extract(&q, &lexicon, &feature_names).map_err(|e| anyhow::anyhow!("{e}"))?;
                for (acc, v) in mean_context.iter_mut().zip(x.values()) {
                    *acc += v / archetype.templates.len() as f64;
                }
            }
            let x = quiver_core::context::ContextVector::new(mean_context)
                .map_err(|e| anyhow::anyhow!("{e}"))?;
            let mut parts = Vec::with_capacity(state.actions.len());
            let mut best = (0usize, f64::NEG_INFINITY);
            for (index, action) in state.actions.iter().enumerate() {
                let e = state
                    .posterior
                    .expected_reward(index, &x)
                    .map_err(|e| anyhow::anyhow!("{e}"))?;
                if e > best.1 {
                    best = (index, e);
                }
                parts.push(format!("{action}={e:.3}"));
            }
            parts[best.0] = format!("*{}", parts[best.0]);
            println!("  {:<22} {}", archetype.name, parts.join(" "));
        }
    }
    Ok(exit::OK)
}

/// Selection-pattern table for a finished run (used by tests and the
/// simulate summary).
pub fn pattern_table(out: &RunOutput, env: &EnvironmentSpec, last_n: usize) -> Result<String> {
    let freq = archetype_action_frequencies(&out.steps, last_n);
    let space = env.action_space().map_err(|e| anyhow::anyhow!("{e}"))?;
    Ok(render_pattern_table(&freq, space.ids()))
}
