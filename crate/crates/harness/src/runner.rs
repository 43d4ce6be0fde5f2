//! Executes an [`ExperimentSpec`]: every (optimizer, horizon, seed) replica
//! is one independent run, scheduled on a bounded worker pool.
//!
//! Determinism: replica `k` of a seed index `i` always uses seed
//! `seed_base + i`, all optimizers share those seeds (so they see the same
//! samples and noise draws), and a request budget is split over replicas in
//! plan order before anything runs, so truncation does not depend on
//! scheduling.

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Instant;

use anyhow::Context;
use banco_core::baselines::grid_tune_observed;
use banco_core::{
    Banco, EvalSet, LedgerReport, OnlineOptimizer, PrivacyLedger, Problem, SanitizedOracle, Sgd,
    SharedLedger, StepSchedule, Trace,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentSpec, OptimizerSpec};
use crate::rate::{fit_rate_slope, RateFit};

/// Seed offset of the frozen evaluation sample used for reported risks.
const EVAL_SEED_SALT: u64 = 0xe7a1_0000_0000_0001;
/// Seed offset of the held-out sample used to select a grid learning rate.
const SELECT_SEED_SALT: u64 = 0x5e1e_c700_0000_0002;

pub const STATUS_COMPLETE: &str = "complete";

/// One evaluation of a run's running average.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub optimizer: String,
    pub problem: String,
    pub d: usize,
    pub epsilon: f64,
    pub w_star_norm: f64,
    pub horizon: u64,
    pub seed: u64,
    pub checkpoint: u64,
    pub risk: f64,
    pub risk_se: f64,
    pub requests: u64,
    pub wall_time_s: f64,
    /// `risk − risk(w*)` on the same evaluation sample.
    pub suboptimality: f64,
    pub suboptimality_se: f64,
    /// `complete`, or `truncated: <reason>` on the last row of a run that
    /// stopped early.
    pub status: String,
}

impl ResultRow {
    pub const HEADER: [&'static str; 15] = [
        "optimizer",
        "problem",
        "d",
        "epsilon",
        "w_star_norm",
        "horizon",
        "seed",
        "checkpoint",
        "risk",
        "risk_se",
        "requests",
        "wall_time_s",
        "suboptimality",
        "suboptimality_se",
        "status",
    ];

    pub fn is_complete(&self) -> bool {
        self.status == STATUS_COMPLETE
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunOptions {
    /// Worker threads; 0 means one per available core.
    pub workers: usize,
    /// Keep per-step traces of BANCO runs.
    pub trace: bool,
    /// Record zero wall time so output files are byte-identical across runs.
    pub no_timing: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSummary {
    pub optimizer: String,
    pub horizon: u64,
    pub runs: u64,
    pub completed: u64,
    /// Over completed runs, at their final step.
    pub mean_suboptimality: f64,
    pub std_suboptimality: f64,
    pub mean_risk: f64,
    pub std_risk: f64,
    pub requests: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFitSummary {
    pub optimizer: String,
    pub points: Vec<(u64, f64)>,
    pub fit: Option<RateFit>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridChoice {
    pub optimizer: String,
    pub horizon: u64,
    pub seed: u64,
    pub best_eta: f64,
    /// Held-out selection risk per grid entry.
    pub selection_risk: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub groups: Vec<GroupSummary>,
    pub rate_fits: Vec<RateFitSummary>,
    pub grid_choices: Vec<GridChoice>,
    pub truncated_runs: u64,
}

#[derive(Debug, Clone)]
pub struct TraceRecord {
    pub optimizer: String,
    pub horizon: u64,
    pub seed: u64,
    pub trace: Trace,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub spec: ExperimentSpec,
    pub rows: Vec<ResultRow>,
    pub summary: Summary,
    pub ledger: LedgerReport,
    pub traces: Vec<TraceRecord>,
}

impl ExperimentOutput {
    pub fn all_complete(&self) -> bool {
        self.summary.truncated_runs == 0
    }
}

#[derive(Debug, Clone)]
struct Replica {
    optimizer: usize,
    horizon: u64,
    seed: u64,
    allocation: Option<u64>,
}

struct Outcome {
    rows: Vec<ResultRow>,
    shard: PrivacyLedger,
    grid_choice: Option<GridChoice>,
    trace: Option<Trace>,
    truncated: bool,
}

/// Shared, read-only inputs of every replica.
struct Shared {
    spec: ExperimentSpec,
    problem: Arc<Problem>,
    eval: EvalSet,
    select: EvalSet,
    options: RunOptions,
}

pub fn run_experiment(spec: &ExperimentSpec, options: RunOptions) -> anyhow::Result<ExperimentOutput> {
    spec.validate()?;
    let problem = Arc::new(spec.problem.build().context("building problem")?);
    let eval = problem.eval_set(spec.eval_samples, spec.seed_base ^ EVAL_SEED_SALT)?;
    let select = problem.eval_set(spec.eval_samples, spec.seed_base ^ SELECT_SEED_SALT)?;

    let mut plan = Vec::new();
    let mut remaining = spec.budget;
    for (oi, opt) in spec.optimizers.iter().enumerate() {
        for &horizon in &spec.horizons {
            for i in 0..spec.n_seeds {
                let allocation = remaining.map(|r| {
                    let want = opt.planned_requests(horizon);
                    let give = want.min(r);
                    remaining = Some(r - give);
                    give
                });
                plan.push(Replica {
                    optimizer: oi,
                    horizon,
                    seed: spec.seed_base + i,
                    allocation,
                });
            }
        }
    }

    let ctx = Shared {
        spec: spec.clone(),
        problem,
        eval,
        select,
        options,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.workers)
        .build()
        .context("starting worker pool")?;
    let outcomes: Vec<Outcome> = pool.install(|| plan.par_iter().map(|r| run_replica(&ctx, r)).collect());

    // merge shards single-threaded, in plan order
    let epsilon = spec.noise.epsilon();
    let mut ledger = match spec.budget {
        Some(b) => PrivacyLedger::with_budget(epsilon, b),
        None => PrivacyLedger::new(epsilon),
    };
    let mut rows = Vec::new();
    let mut grid_choices = Vec::new();
    let mut traces = Vec::new();
    let mut truncated_runs = 0;
    for (replica, outcome) in plan.iter().zip(outcomes) {
        for run in outcome.shard.report().runs {
            ledger.charge(&run.label, run.requests).context("merging ledger shard")?;
        }
        rows.extend(outcome.rows);
        grid_choices.extend(outcome.grid_choice);
        if let Some(trace) = outcome.trace {
            traces.push(TraceRecord {
                optimizer: spec.optimizers[replica.optimizer].label(),
                horizon: replica.horizon,
                seed: replica.seed,
                trace,
            });
        }
        truncated_runs += outcome.truncated as u64;
    }
    let summary = summarize(spec, &rows, grid_choices, truncated_runs);
    Ok(ExperimentOutput {
        spec: spec.clone(),
        rows,
        summary,
        ledger: ledger.report(),
        traces,
    })
}

fn shard_for(replica: &Replica, epsilon: f64) -> SharedLedger {
    SharedLedger::new(match replica.allocation {
        Some(b) => PrivacyLedger::with_budget(epsilon, b),
        None => PrivacyLedger::new(epsilon),
    })
}

fn run_label(opt: &str, horizon: u64, seed: u64) -> String {
    format!("{opt}/T={horizon}/seed={seed}")
}

struct RowMaker<'a> {
    ctx: &'a Shared,
    optimizer: String,
    horizon: u64,
    seed: u64,
    started: Instant,
}

impl RowMaker<'_> {
    fn row(&self, average: &[f64], checkpoint: u64, requests: u64, status: String) -> anyhow::Result<ResultRow> {
        let p = &self.ctx.problem;
        let risk = p.risk_on(average, &self.ctx.eval)?;
        let sub = p.suboptimality(average, &self.ctx.eval)?;
        Ok(ResultRow {
            optimizer: self.optimizer.clone(),
            problem: p.kind().name().to_string(),
            d: p.dim(),
            epsilon: self.ctx.spec.noise.epsilon(),
            w_star_norm: self.ctx.spec.problem.w_star_norm(),
            horizon: self.horizon,
            seed: self.seed,
            checkpoint,
            risk: risk.value,
            risk_se: risk.std_error,
            requests,
            wall_time_s: if self.ctx.options.no_timing {
                0.0
            } else {
                self.started.elapsed().as_secs_f64()
            },
            suboptimality: sub.value,
            suboptimality_se: sub.std_error,
            status,
        })
    }
}

fn run_replica(ctx: &Shared, replica: &Replica) -> Outcome {
    let opt = &ctx.spec.optimizers[replica.optimizer];
    let epsilon = ctx.spec.noise.epsilon();
    let shard = shard_for(replica, epsilon);
    let maker = RowMaker {
        ctx,
        optimizer: opt.label(),
        horizon: replica.horizon,
        seed: replica.seed,
        started: Instant::now(),
    };
    let result = match opt {
        OptimizerSpec::SgdGrid { grid } => run_grid(ctx, replica, &maker, grid, &shard),
        _ => run_single(ctx, replica, &maker, opt, &shard),
    };
    let (rows, grid_choice, trace, truncated) = match result {
        Ok(r) => r,
        Err(e) => {
            // evaluation itself failed; surface it as a truncated run
            let zero = vec![0.0; ctx.problem.dim()];
            let row = maker
                .row(&zero, 0, shard.request_count(), format!("truncated: {e:#}"))
                .unwrap_or_else(|_| panic!("evaluating the origin cannot fail: {e:#}"));
            (vec![row], None, None, true)
        }
    };
    Outcome {
        rows,
        shard: shard.snapshot(),
        grid_choice,
        trace,
        truncated,
    }
}

type ReplicaResult = anyhow::Result<(Vec<ResultRow>, Option<GridChoice>, Option<Trace>, bool)>;

fn run_single(ctx: &Shared, replica: &Replica, maker: &RowMaker<'_>, opt: &OptimizerSpec, shard: &SharedLedger) -> ReplicaResult {
    let dim = ctx.problem.dim();
    let noise = ctx.spec.noise.model(dim)?;
    let label = run_label(&maker.optimizer, replica.horizon, replica.seed);
    let mut oracle = SanitizedOracle::new(ctx.problem.clone(), noise, shard.clone(), label, replica.seed)?;
    let checkpoints = ctx.spec.checkpoints_for(replica.horizon);
    match opt {
        OptimizerSpec::Banco => {
            let b = Banco::new(dim, ctx.problem.g_bound(), &noise)?;
            let mut b = if ctx.options.trace { b.with_trace() } else { b };
            let (rows, truncated) = drive(&mut b, &mut oracle, replica.horizon, &checkpoints, maker)?;
            Ok((rows, None, b.take_trace(), truncated))
        }
        OptimizerSpec::Sgd { eta } => {
            let mut s = Sgd::new(StepSchedule::Constant { eta: *eta }, dim)?;
            let (rows, truncated) = drive(&mut s, &mut oracle, replica.horizon, &checkpoints, maker)?;
            Ok((rows, None, None, truncated))
        }
        OptimizerSpec::SgdAdaptive { radius } => {
            let mut s = Sgd::new(StepSchedule::ScaleFree { radius: *radius }, dim)?;
            let (rows, truncated) = drive(&mut s, &mut oracle, replica.horizon, &checkpoints, maker)?;
            Ok((rows, None, None, truncated))
        }
        OptimizerSpec::SgdGrid { .. } => unreachable!("grid runs are handled separately"),
    }
}

/// Runs one pass, evaluating the running average at each checkpoint. A
/// failed request or update ends the run with a `truncated` row.
fn drive<O: OnlineOptimizer>(
    learner: &mut O,
    oracle: &mut SanitizedOracle,
    horizon: u64,
    checkpoints: &[u64],
    maker: &RowMaker<'_>,
) -> anyhow::Result<(Vec<ResultRow>, bool)> {
    let mut rows = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    for _ in 0..horizon {
        let step = oracle.query(learner.iterate()).and_then(|g| learner.observe(&g));
        if let Err(e) = step {
            rows.push(maker.row(&learner.average(), learner.steps(), oracle.requests(), format!("truncated: {e}"))?);
            return Ok((rows, true));
        }
        let t = learner.steps();
        if next < checkpoints.len() && checkpoints[next] == t {
            rows.push(maker.row(&learner.average(), t, oracle.requests(), STATUS_COMPLETE.into())?);
            next += 1;
        }
    }
    Ok((rows, false))
}

fn run_grid(ctx: &Shared, replica: &Replica, maker: &RowMaker<'_>, grid: &[f64], shard: &SharedLedger) -> ReplicaResult {
    let dim = ctx.problem.dim();
    let noise = ctx.spec.noise.model(dim)?;
    let checkpoints = ctx.spec.checkpoints_for(replica.horizon);
    let mut snapshots: Vec<Vec<(u64, Vec<f64>)>> = vec![Vec::new(); grid.len()];
    let mut progress = (0usize, 0u64);
    let problem = &ctx.problem;
    let result = grid_tune_observed(
        grid,
        dim,
        replica.horizon,
        |_, eta| {
            let label = format!("{}/eta={eta:e}", run_label(&maker.optimizer, replica.horizon, replica.seed));
            SanitizedOracle::new(problem.clone(), noise, shard.clone(), label, replica.seed)
        },
        |w| problem.risk_on(w, &ctx.select).map(|r| r.value).unwrap_or(f64::INFINITY),
        |i, t, sgd| {
            progress = (i, t);
            if checkpoints.binary_search(&t).is_ok() {
                snapshots[i].push((t, sgd.average()));
            }
        },
    );
    let k = grid.len() as u64;
    match result {
        Ok(tuned) => {
            let mut rows = Vec::with_capacity(checkpoints.len());
            for (t, avg) in &snapshots[tuned.best_index] {
                rows.push(maker.row(avg, *t, k * t, STATUS_COMPLETE.into())?);
            }
            let choice = GridChoice {
                optimizer: maker.optimizer.clone(),
                horizon: replica.horizon,
                seed: replica.seed,
                best_eta: tuned.best_eta,
                selection_risk: tuned.per_eta_risk,
            };
            Ok((rows, Some(choice), None, false))
        }
        Err(e) => {
            // no learning rate can be selected from an incomplete grid
            let zero = vec![0.0; dim];
            let status = format!("truncated at grid entry {} step {}: {e}", progress.0, progress.1);
            let row = maker.row(&zero, 0, shard.request_count(), status)?;
            Ok((vec![row], None, None, true))
        }
    }
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let std = if values.len() > 1 {
        (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, std)
}

fn summarize(spec: &ExperimentSpec, rows: &[ResultRow], grid_choices: Vec<GridChoice>, truncated_runs: u64) -> Summary {
    // last row of each run, keyed by (optimizer index, horizon)
    let mut finals: BTreeMap<(usize, u64), Vec<&ResultRow>> = BTreeMap::new();
    let mut last: BTreeMap<(String, u64, u64), &ResultRow> = BTreeMap::new();
    for r in rows {
        last.insert((r.optimizer.clone(), r.horizon, r.seed), r);
    }
    let order: BTreeMap<String, usize> = spec.optimizers.iter().enumerate().map(|(i, o)| (o.label(), i)).collect();
    for ((opt, horizon, _), r) in &last {
        finals.entry((order[opt], *horizon)).or_default().push(r);
    }
    let mut groups = Vec::new();
    for ((oi, horizon), runs) in &finals {
        let done: Vec<&&ResultRow> = runs.iter().filter(|r| r.is_complete() && r.checkpoint == *horizon).collect();
        let subs: Vec<f64> = done.iter().map(|r| r.suboptimality).collect();
        let risks: Vec<f64> = done.iter().map(|r| r.risk).collect();
        let (ms, ss) = mean_std(&subs);
        let (mr, sr) = mean_std(&risks);
        groups.push(GroupSummary {
            optimizer: spec.optimizers[*oi].label(),
            horizon: *horizon,
            runs: runs.len() as u64,
            completed: done.len() as u64,
            mean_suboptimality: ms,
            std_suboptimality: ss,
            mean_risk: mr,
            std_risk: sr,
            requests: runs.iter().map(|r| r.requests).sum(),
        });
    }
    let mut rate_fits = Vec::new();
    if spec.horizons.len() >= 3 {
        for opt in &spec.optimizers {
            let label = opt.label();
            let points: Vec<(u64, f64)> = groups
                .iter()
                .filter(|g| g.optimizer == label && g.completed > 0)
                .map(|g| (g.horizon, g.mean_suboptimality))
                .collect();
            let fit = fit_rate_slope(&points.iter().map(|&(t, s)| (t as f64, s)).collect::<Vec<_>>());
            rate_fits.push(RateFitSummary {
                optimizer: label,
                points,
                error: fit.as_ref().err().map(|e| format!("{e:#}")),
                fit: fit.ok(),
            });
        }
    }
    Summary {
        groups,
        rate_fits,
        grid_choices,
        truncated_runs,
    }
}
