//! Benchmark harness: run method combinations over instance sets and write
//! reproducible machine-readable reports.
//!
//! Every row is re-verified by the feasibility checker before it is
//! reported; infeasible rows are flagged and excluded from the aggregates.
//! Reported time is monotone wall clock around the solve call only (no file
//! I/O); with timing suppressed the time column reads zero and report bytes
//! depend only on seeds and inputs.

use std::fmt::Write as _;
use std::time::Instant;

use num_traits::ToPrimitive;

use crate::episode::{classical_solve, SolveOptions};
use crate::error::Error;
use crate::model::{check_schedule, lower_bound, Instance, Verdict};
use crate::ordering::OrderingPolicy;
use crate::qnet::QNetworkParams;
use crate::seeds;
use crate::selection::{SelectionPolicy, SelectorParams};

/// Ordering policy factory for one bench method.
#[derive(Clone)]
pub enum PolicySpec {
    Ccpm,
    Mrrr,
    Dum,
    Rand,
    Rl(QNetworkParams),
}

impl PolicySpec {
    pub fn parse(name: &str, qnet: Option<&QNetworkParams>) -> Result<Self, Error> {
        match name {
            "ccpm" => Ok(PolicySpec::Ccpm),
            "mrrr" => Ok(PolicySpec::Mrrr),
            "dum" => Ok(PolicySpec::Dum),
            "rand" => Ok(PolicySpec::Rand),
            "rl" => qnet.cloned().map(PolicySpec::Rl).ok_or(Error::InvalidConfig {
                reason: "policy rl needs a Q-network checkpoint".to_string(),
            }),
            other => Err(Error::InvalidConfig {
                reason: format!("unknown policy {other}"),
            }),
        }
    }

    fn instantiate(&self, seed: u64) -> OrderingPolicy {
        match self {
            PolicySpec::Ccpm => OrderingPolicy::Ccpm,
            PolicySpec::Mrrr => OrderingPolicy::Mrrr,
            PolicySpec::Dum => OrderingPolicy::Dum,
            PolicySpec::Rand => OrderingPolicy::rand(seed),
            PolicySpec::Rl(params) => OrderingPolicy::Rl(params.clone()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            PolicySpec::Ccpm => "ccpm",
            PolicySpec::Mrrr => "mrrr",
            PolicySpec::Dum => "dum",
            PolicySpec::Rand => "rand",
            PolicySpec::Rl(_) => "rl",
        }
    }
}

/// Selector factory for one bench method.
#[derive(Clone)]
pub enum SelectorSpec {
    Mad,
    Tv,
    Mct,
    RandLs,
    Learned(SelectorParams),
}

impl SelectorSpec {
    pub fn parse(name: &str, selector: Option<&SelectorParams>) -> Result<Self, Error> {
        match name {
            "mad" => Ok(SelectorSpec::Mad),
            "tv" => Ok(SelectorSpec::Tv),
            "mct" => Ok(SelectorSpec::Mct),
            "rand" | "rand-ls" => Ok(SelectorSpec::RandLs),
            "learned" => selector
                .cloned()
                .map(SelectorSpec::Learned)
                .ok_or(Error::InvalidConfig {
                    reason: "selector learned needs a checkpoint".to_string(),
                }),
            other => Err(Error::InvalidConfig {
                reason: format!("unknown selector {other}"),
            }),
        }
    }

    fn instantiate(&self, seed: u64) -> SelectionPolicy {
        match self {
            SelectorSpec::Mad => SelectionPolicy::Mad,
            SelectorSpec::Tv => SelectionPolicy::Tv,
            SelectorSpec::Mct => SelectionPolicy::Mct,
            SelectorSpec::RandLs => SelectionPolicy::rand(seed),
            SelectorSpec::Learned(params) => SelectionPolicy::Learned(params.clone()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SelectorSpec::Mad => "mad",
            SelectorSpec::Tv => "tv",
            SelectorSpec::Mct => "mct",
            SelectorSpec::RandLs => "rand",
            SelectorSpec::Learned(_) => "learned",
        }
    }
}

/// One method column of the report: an ordering policy plus a selector.
#[derive(Clone)]
pub struct Method {
    pub policy: PolicySpec,
    pub selector: SelectorSpec,
}

impl Method {
    pub fn name(&self) -> String {
        format!("{}+{}", self.policy.name(), self.selector.name())
    }

    /// Parse "policy+selector" (e.g. "ccpm+mct").
    pub fn parse(
        spec: &str,
        qnet: Option<&QNetworkParams>,
        selector: Option<&SelectorParams>,
    ) -> Result<Self, Error> {
        let (p, s) = spec.split_once('+').ok_or_else(|| Error::InvalidConfig {
            reason: format!("method {spec} must look like policy+selector"),
        })?;
        Ok(Method {
            policy: PolicySpec::parse(p.trim(), qnet)?,
            selector: SelectorSpec::parse(s.trim(), selector)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimingMode {
    /// Measure wall clock around each solve call.
    Wall,
    /// Write zeros; report bytes become input-deterministic.
    Suppressed,
}

#[derive(Clone)]
pub struct BenchOptions {
    pub seed: u64,
    /// Per-instance budget in seconds; `None` applies the default rule of
    /// 0.1 seconds per task.
    pub time_limit_override: Option<f64>,
    pub timing: TimingMode,
    pub solve: SolveOptions,
}

impl Default for BenchOptions {
    fn default() -> Self {
        BenchOptions {
            seed: 0,
            time_limit_override: None,
            timing: TimingMode::Wall,
            solve: SolveOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub instance: String,
    pub method: String,
    pub objective: f64,
    pub seconds: f64,
    pub feasible: bool,
    /// Objective over the analytic lower bound; absent when the bound is 0.
    pub ratio: Option<f64>,
    pub iterations: usize,
    pub over_budget: bool,
}

#[derive(Debug, Clone)]
pub struct MethodSummary {
    pub method: String,
    pub rows: usize,
    pub mean_objective: f64,
    pub std_objective: f64,
    pub mean_seconds: f64,
    pub std_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub header: Vec<String>,
    pub rows: Vec<BenchRow>,
    pub summaries: Vec<MethodSummary>,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>()
        / (values.len() - 1) as f64;
    (mean, var.sqrt())
}

/// Run every method over every instance. A solve that exceeds its budget is
/// flagged and kept: the run stays active until its first (and only)
/// feasible result, whose time is what gets recorded.
pub fn run_bench(
    inputs: &[(String, Instance)],
    methods: &[Method],
    opts: &BenchOptions,
) -> Result<BenchReport, Error> {
    let mut rows = Vec::with_capacity(inputs.len() * methods.len());
    for (inst_idx, (id, inst)) in inputs.iter().enumerate() {
        let bound = lower_bound(inst).total;
        let budget = opts
            .time_limit_override
            .unwrap_or(0.1 * inst.n_tasks() as f64);
        for (m_idx, method) in methods.iter().enumerate() {
            let stream = seeds::derive(opts.seed, (inst_idx as u64) << 16 | m_idx as u64);
            let mut policy = method.policy.instantiate(seeds::derive(stream, 1));
            let mut selector = method.selector.instantiate(seeds::derive(stream, 2));
            let solve = SolveOptions {
                heuristic_seed: seeds::derive(stream, 3),
                ..opts.solve.clone()
            };

            let t0 = Instant::now();
            let outcome = classical_solve(inst, &mut policy, &mut selector, solve)?;
            let elapsed = t0.elapsed().as_secs_f64();
            let seconds = match opts.timing {
                TimingMode::Wall => elapsed,
                TimingMode::Suppressed => 0.0,
            };

            let feasible = matches!(
                check_schedule(inst, &outcome.schedule)?,
                Verdict::Feasible
            );
            let objective = outcome.objective.to_f64().unwrap_or(f64::NAN);
            let ratio = (bound > crate::model::Cost::from_integer(0))
                .then(|| (&outcome.objective / &bound).to_f64().unwrap_or(f64::NAN));
            rows.push(BenchRow {
                instance: id.clone(),
                method: method.name(),
                objective,
                seconds,
                feasible,
                ratio,
                iterations: outcome.iterations,
                over_budget: matches!(opts.timing, TimingMode::Wall) && elapsed > budget,
            });
        }
    }

    let mut summaries = Vec::with_capacity(methods.len());
    for method in methods {
        let name = method.name();
        let kept: Vec<&BenchRow> = rows
            .iter()
            .filter(|r| r.method == name && r.feasible)
            .collect();
        let objectives: Vec<f64> = kept.iter().map(|r| r.objective).collect();
        let seconds: Vec<f64> = kept.iter().map(|r| r.seconds).collect();
        let (mean_objective, std_objective) = mean_std(&objectives);
        let (mean_seconds, std_seconds) = mean_std(&seconds);
        summaries.push(MethodSummary {
            method: name,
            rows: kept.len(),
            mean_objective,
            std_objective,
            mean_seconds,
            std_seconds,
        });
    }

    let header = vec![
        format!(
            "budget_rule: {} seconds per instance",
            match opts.time_limit_override {
                Some(limit) => format!("{limit}"),
                None => "0.1 x |T|".to_string(),
            }
        ),
        "timing: monotone wall clock around the solve call only; I/O excluded".to_string(),
        format!(
            "time_source: {}",
            match opts.timing {
                TimingMode::Wall => "wall",
                TimingMode::Suppressed => "suppressed (time columns read 0)",
            }
        ),
        format!("seed: {}", opts.seed),
    ];

    Ok(BenchReport {
        header,
        rows,
        summaries,
    })
}

impl BenchReport {
    /// Tab-separated table plus a summary block.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        for line in &self.header {
            writeln!(out, "# {line}").unwrap();
        }
        writeln!(
            out,
            "instance\tmethod\tobjective\tseconds\tfeasible\tobj_over_bound\titerations\tover_budget"
        )
        .unwrap();
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{}\t{}\t{}\t{}",
                r.instance,
                r.method,
                r.objective,
                r.seconds,
                r.feasible,
                r.ratio.map_or("-".to_string(), |x| format!("{x:.6}")),
                r.iterations,
                r.over_budget
            )
            .unwrap();
        }
        writeln!(out, "== summary ==").unwrap();
        writeln!(
            out,
            "method\trows\tmean_objective\tstd_objective\tmean_seconds\tstd_seconds"
        )
        .unwrap();
        for s in &self.summaries {
            writeln!(
                out,
                "{}\t{}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                s.method, s.rows, s.mean_objective, s.std_objective, s.mean_seconds, s.std_seconds
            )
            .unwrap();
        }
        out
    }
}
