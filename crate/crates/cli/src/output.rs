//! CSV series, JSONL interaction logs, and text reports.
//!
//! Outputs are byte-deterministic for a fixed manifest: floats print in
//! Rust's shortest round-trip form and all timestamps are logical steps.

use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use quiver_core::metrics::{
    cumulative_regret, cumulative_reward, entropy_series, rolling_success, ExperimentTrace,
};
use quiver_core::sim::{ComparisonSummary, RunOutput};
use serde::Serialize;

/// Per-seed metric series: step, reward, cum_reward, rolling_success,
/// cum_regret, entropy.
pub fn write_trace_csv(path: &Path, trace: &ExperimentTrace, rolling_window: usize) -> Result<()> {
    let cum = cumulative_reward(trace);
    let rolling = rolling_success(trace, rolling_window)
        .map_err(|e| anyhow::anyhow!("rolling success: {e}"))?;
    let regret = cumulative_regret(trace).map_err(|e| anyhow::anyhow!("regret: {e}"))?;
    let entropy = entropy_series(trace);

    let mut out = String::from("step,reward,cum_reward,rolling_success,cum_regret,entropy\n");
    for (i, record) in trace.records.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            record.step, record.reward, cum[i], rolling[i], regret[i], entropy[i]
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

#[derive(Serialize)]
struct ResponseMetaLine {
    latency: f64,
    tokens: u32,
}

#[derive(Serialize)]
struct JsonlLine<'a> {
    id: &'a str,
    step: u64,
    query: &'a str,
    context: &'a [f64],
    action: &'a str,
    policy: &'a str,
    selected_by: &'a str,
    sampled_scores: &'a [f64],
    propensity: f64,
    response_meta: ResponseMetaLine,
    reward_explicit: Option<f64>,
    reward_implicit: Option<f64>,
    reward_quality: Option<f64>,
    reward_composite: Option<f64>,
    reward_z: Option<f64>,
    reward_final: Option<f64>,
    reward_corrected_raw: Option<f64>,
    updated: bool,
}

/// One JSON object per interaction, reward components included.
pub fn write_trace_jsonl(path: &Path, output: &RunOutput) -> Result<()> {
    let mut buf = Vec::new();
    for step in &output.steps {
        let line = JsonlLine {
            id: &step.query_id,
            step: step.step,
            query: &step.query_text,
            context: &step.context,
            action: &step.action,
            policy: &output.trace.policy,
            selected_by: step.selected_by.as_str(),
            sampled_scores: &step.sampled_scores,
            propensity: step.breakdown.propensity,
            response_meta: ResponseMetaLine {
                latency: step.response_latency,
                tokens: step.response_tokens,
            },
            reward_explicit: step.breakdown.reward_explicit,
            reward_implicit: step.breakdown.reward_implicit,
            reward_quality: step.breakdown.reward_quality,
            reward_composite: step.breakdown.reward_composite,
            reward_z: step.breakdown.reward_z,
            reward_final: step.breakdown.reward_final,
            reward_corrected_raw: step.breakdown.reward_corrected_raw,
            updated: step.updated,
        };
        serde_json::to_writer(&mut buf, &line)?;
        buf.push(b'\n');
    }
    std::fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

/// Per-seed summary rows plus mean/std aggregate rows.
pub struct SeedSummary {
    pub seed: u64,
    pub success_rate: f64,
    pub final_rolling: f64,
    pub queries_to_threshold: Option<usize>,
    pub final_regret: f64,
}

pub fn write_seed_summary_csv(path: &Path, rows: &[SeedSummary]) -> Result<()> {
    let mut out =
        String::from("seed,success_rate,final_rolling_success,queries_to_threshold,final_regret\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.seed,
            r.success_rate,
            r.final_rolling,
            r.queries_to_threshold
                .map(|q| q.to_string())
                .unwrap_or_else(|| "never".into()),
            r.final_regret
        ));
    }
    let mean = |f: &dyn Fn(&SeedSummary) -> f64| {
        rows.iter().map(f).sum::<f64>() / rows.len().max(1) as f64
    };
    out.push_str(&format!(
        "mean,{},{},,{}\n",
        mean(&|r| r.success_rate),
        mean(&|r| r.final_rolling),
        mean(&|r| r.final_regret)
    ));
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

/// Comparison report CSV; adds an improvement column against the
/// `random` row when one is present.
pub fn write_comparison_csv(path: &Path, summary: &ComparisonSummary) -> Result<()> {
    let random_success = summary
        .rows
        .iter()
        .find(|r| r.policy == "random")
        .map(|r| r.mean_success);
    let mut out = String::from(
        "policy,mean_success,std_success,improvement_vs_random,\
         mean_queries_to_threshold,std_queries_to_threshold,reach_fraction,\
         mean_final_regret,std_final_regret\n",
    );
    for r in &summary.rows {
        let improvement = random_success
            .map(|base| format!("{}", r.mean_success - base))
            .unwrap_or_default();
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.policy,
            r.mean_success,
            r.std_success,
            improvement,
            r.mean_queries_to_threshold,
            r.std_queries_to_threshold,
            r.reach_fraction,
            r.mean_final_regret,
            r.std_final_regret
        ));
    }
    std::fs::write(path, out).with_context(|| format!("writing {}", path.display()))
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).with_context(|| format!("writing {}", path.display()))
}

/// Echo to stdout and append to a report buffer.
pub fn tee(report: &mut String, line: &str) {
    println!("{line}");
    report.push_str(line);
    report.push('\n');
}

/// Render per-archetype action frequencies (selection-pattern tables).
pub fn render_pattern_table(
    freq: &std::collections::BTreeMap<String, std::collections::BTreeMap<String, u64>>,
    actions: &[String],
) -> String {
    let mut out = String::new();
    out.push_str(&format!("{:<22}", "archetype"));
    for a in actions {
        out.push_str(&format!(" {a:>14}"));
    }
    out.push('\n');
    for (archetype, counts) in freq {
        let total: u64 = counts.values().sum();
        out.push_str(&format!("{archetype:<22}"));
        for a in actions {
            let f = counts.get(a).copied().unwrap_or(0) as f64 / total.max(1) as f64;
            out.push_str(&format!(" {:>13.1}%", f * 100.0));
        }
        out.push('\n');
    }
    out
}

/// Ensure the output directory exists.
pub fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).with_context(|| format!("creating {}", path.display()))
}

/// Write a small text file atomically enough for test use.
pub fn write_lines(path: &Path, lines: &[String]) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    for line in lines {
        writeln!(f, "{line}")?;
    }
    Ok(())
}

#[allow(unused_imports)]
pub use quiver_core::sim::SelectedBy;
