use banco_harness::output::{csv_bytes, json_bytes};
use banco_harness::{run_experiment, ExperimentSpec, JsonReport, RunOptions};

fn spec(extra: serde_json::Value) -> ExperimentSpec {
    let mut v = serde_json::json!({
        "name": "small",
        "problem": {"kind": "noisy_abs", "dim": 3, "w_star_norm": 2.0, "spread": 0.5},
        "noise": {"kind": "laplace", "epsilon": 1.0},
        "optimizers": [
            {"kind": "banco"},
            {"kind": "sgd", "eta": 0.01},
            {"kind": "sgd_adaptive", "radius": 1.0},
            {"kind": "sgd_grid", "grid": [0.001, 0.01, 0.1]}
        ],
        "horizons": [200, 500, 1000],
        "n_seeds": 3,
        "seed_base": 40,
        "checkpoints": [50, 400],
        "eval_samples": 2000
    });
    for (k, val) in extra.as_object().unwrap() {
        v[k] = val.clone();
    }
    ExperimentSpec::from_json(&v.to_string()).unwrap()
}

fn quiet(workers: usize) -> RunOptions {
    RunOptions { workers, trace: false, no_timing: true }
}

#[test]
fn output_bytes_do_not_depend_on_worker_count() {
    let s = spec(serde_json::json!({}));
    let a = run_experiment(&s, quiet(1)).unwrap();
    let b = run_experiment(&s, quiet(3)).unwrap();
    assert_eq!(csv_bytes(&a.rows).unwrap(), csv_bytes(&b.rows).unwrap());
    assert_eq!(json_bytes(&a).unwrap(), json_bytes(&b).unwrap());
}

#[test]
fn json_report_round_trips() {
    let out = run_experiment(&spec(serde_json::json!({})), quiet(0)).unwrap();
    let bytes = json_bytes(&out).unwrap();
    let back: JsonReport = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(back.rows, out.rows);
    assert_eq!(back.summary, out.summary);
    assert_eq!(back.ledger, out.ledger);
    assert_eq!(back.spec, out.spec);
}

#[test]
fn ledger_matches_the_final_rows() {
    let out = run_experiment(&spec(serde_json::json!({})), quiet(0)).unwrap();
    assert!(out.all_complete());
    let finals: u64 = out.rows.iter().filter(|r| r.checkpoint == r.horizon).map(|r| r.requests).sum();
    assert_eq!(finals, out.ledger.total_requests);
    // 3 seeds × (200 + 500 + 1000) × (1 + 1 + 1 + 3 grid entries)
    assert_eq!(out.ledger.total_requests, 3 * 1700 * 6);
    let grid: u64 = out.ledger.runs.iter().filter(|r| r.label.starts_with("sgd_grid")).map(|r| r.requests).sum();
    let banco: u64 = out.ledger.runs.iter().filter(|r| r.label.starts_with("banco")).map(|r| r.requests).sum();
    assert_eq!(grid, 3 * banco);
}

#[test]
fn checkpoints_are_increasing_and_end_at_the_horizon() {
    let out = run_experiment(&spec(serde_json::json!({})), quiet(0)).unwrap();
    let mut runs: std::collections::BTreeMap<(String, u64, u64), Vec<u64>> = Default::default();
    for r in &out.rows {
        assert!(r.is_complete());
        assert!(r.checkpoint <= r.horizon);
        runs.entry((r.optimizer.clone(), r.horizon, r.seed)).or_default().push(r.checkpoint);
    }
    assert_eq!(runs.len(), 4 * 3 * 3);
    for ((_, horizon, _), cps) in runs {
        assert!(cps.windows(2).all(|w| w[0] < w[1]), "{cps:?}");
        assert_eq!(*cps.last().unwrap(), horizon);
        assert_eq!(cps, spec(serde_json::json!({})).checkpoints_for(horizon));
    }
}

#[test]
fn rate_fits_need_three_horizons() {
    let out = run_experiment(&spec(serde_json::json!({})), quiet(0)).unwrap();
    assert_eq!(out.summary.rate_fits.len(), 4);
    assert!(out.summary.rate_fits.iter().all(|f| f.fit.is_some()));
    let two = run_experiment(&spec(serde_json::json!({"horizons": [200, 500]})), quiet(0)).unwrap();
    assert!(two.summary.rate_fits.is_empty());
}

#[test]
fn a_small_budget_truncates_runs_in_plan_order() {
    // banco takes 3×200, the first sgd run 200 more, then 50 is left
    let s = spec(serde_json::json!({"horizons": [200], "checkpoints": [50], "budget": 850}));
    let out = run_experiment(&s, quiet(2)).unwrap();
    assert!(!out.all_complete());
    assert_eq!(out.ledger.total_requests, 850);
    assert_eq!(out.ledger.budget, Some(850));
    let truncated: Vec<_> = out.rows.iter().filter(|r| !r.is_complete()).collect();
    assert_eq!(out.summary.truncated_runs as usize, truncated.len());
    assert!(truncated.iter().all(|r| r.status.starts_with("truncated")));
    let partial = out.rows.iter().find(|r| r.optimizer.starts_with("sgd(") && r.seed == 41 && !r.is_complete()).unwrap();
    assert_eq!(partial.checkpoint, 50);
    assert_eq!(partial.requests, 50);
    // every banco run completed
    assert!(out.rows.iter().filter(|r| r.optimizer == "banco").all(|r| r.is_complete()));
    let banco = &out.summary.groups[0];
    assert_eq!((banco.runs, banco.completed), (3, 3));
}

#[test]
fn traces_cover_every_banco_step() {
    let s = spec(serde_json::json!({"horizons": [200], "checkpoints": [50], "optimizers": [{"kind": "banco"}]}));
    let out = run_experiment(&s, RunOptions { workers: 0, trace: true, no_timing: true }).unwrap();
    assert_eq!(out.traces.len(), 3);
    for t in &out.traces {
        assert_eq!(t.trace.len(), 200);
        assert_eq!(t.trace.magnitudes[0], 0.0);
    }
    let dir = tempfile::tempdir().unwrap();
    let files = banco_harness::emit_traces(&out.traces, dir.path()).unwrap();
    assert_eq!(files.len(), 3);
    let text = std::fs::read_to_string(&files[0]).unwrap();
    assert_eq!(text.lines().count(), 201);
    assert!(text.starts_with("t,magnitude,coin,q0,q1,q2,g0,g1,g2\n"));
}

#[test]
fn timing_is_recorded_unless_disabled() {
    let s = spec(serde_json::json!({"horizons": [1000], "optimizers": [{"kind": "banco"}], "n_seeds": 1}));
    let timed = run_experiment(&s, RunOptions::default()).unwrap();
    assert!(timed.rows.iter().any(|r| r.wall_time_s > 0.0));
    let untimed = run_experiment(&s, quiet(0)).unwrap();
    assert!(untimed.rows.iter().all(|r| r.wall_time_s == 0.0));
}
