//! Brute-force oracles and property checks shared by the integration tests
//! and the acceptance runner.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed, TestCaseError, TestRunner};

use transferscope_core::interference::{
    marginal_projection, pattern_counts, project_counts, PatternOptions,
};
use transferscope_core::ledger::{
    load_ledger_dir, synth_iso, synth_ledger, write_ledger_dir, BaselineRecord, InteractionRecord,
    LanguageInfo, LedgerFormat, RunRecord, SynthConfig,
};
use transferscope_core::stats::{spearman, PMethod};
use transferscope_core::transfer::{
    aggregated_target, aggregated_transfer, max_min_recipient_counts, positive_pct, transfer_matrix,
    transfer_score,
};
use transferscope_core::{
    Axis, Combo, InterferenceCounts, Iso, Ledger, LoadOptions, Registry, Sign, StepSelector, TaskId,
    TaskScope, TieRule,
};

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn iso(s: &str) -> Iso {
    Iso::new(s).unwrap()
}

// ---------------------------------------------------------------------------
// Oracles

/// Synthetic ledger shape for oracle case `seed`: up to 10 transfers,
/// 20 targets and 2 tasks, with some cells missing.
pub fn oracle_config(seed: u64) -> SynthConfig {
    SynthConfig {
        seed,
        n_transfer: 2 + (seed % 9) as usize,
        n_target: 2 + (seed * 7 % 19) as usize,
        tasks: 1 + (seed % 2) as usize,
        rep_count: 1 + (seed % 4) as usize,
        missing_rate: [0.0, 0.1, 0.3][(seed % 3) as usize],
        ..SynthConfig::default()
    }
}

type CellKey = (String, Iso, Iso, u32);

struct Raw {
    baselines: BTreeMap<(String, Iso), f64>,
    runs: BTreeMap<CellKey, Vec<(u32, f64)>>,
    interactions: Vec<InteractionRecord>,
    grid: Vec<u32>,
}

impl Raw {
    fn from(ledger: &Ledger) -> Self {
        let mut baselines = BTreeMap::new();
        for b in ledger.baseline_records() {
            baselines.insert((b.task.to_string(), b.target), b.score);
        }
        let mut runs: BTreeMap<CellKey, Vec<(u32, f64)>> = BTreeMap::new();
        let mut grid = BTreeSet::new();
        for r in ledger.run_records() {
            grid.insert(r.steps);
            runs.entry((r.task.to_string(), r.transfer, r.target, r.steps))
                .or_default()
                .push((r.rep, r.score));
        }
        for v in runs.values_mut() {
            v.sort_by_key(|(rep, _)| *rep);
        }
        Raw {
            baselines,
            runs,
            interactions: ledger.interaction_records().collect(),
            grid: grid.into_iter().collect(),
        }
    }

    fn ts(&self, task: &str, transfer: Iso, target: Iso, step: u32) -> Option<f64> {
        let base = *self.baselines.get(&(task.to_string(), target))?;
        if base == 0.0 {
            return None;
        }
        let reps = self.runs.get(&(task.to_string(), transfer, target, step))?;
        let first = reps[0].1;
        let mut shifted = 0.0;
        for (_, s) in reps {
            shifted += s - first;
        }
        Some((first + shifted / reps.len() as f64 - base) / base)
    }

    /// Mean over steps <= 100; absent unless every such step is present.
    fn short_ts(&self, task: &str, transfer: Iso, target: Iso) -> Option<f64> {
        let steps: Vec<u32> = self.grid.iter().copied().filter(|s| *s <= 100).collect();
        let mut sum = 0.0;
        for s in &steps {
            sum += self.ts(task, transfer, target, *s)?;
        }
        Some(sum / steps.len() as f64)
    }

    fn langs(&self, task: &str) -> (Vec<Iso>, Vec<Iso>) {
        let mut transfers = BTreeSet::new();
        let mut targets = BTreeSet::new();
        for (t, a, b, _) in self.runs.keys() {
            if t == task {
                transfers.insert(*a);
                targets.insert(*b);
            }
        }
        (transfers.into_iter().collect(), targets.into_iter().collect())
    }

    fn interaction(&self, task: &str, combo: &Combo, eval: Iso) -> Option<f64> {
        self.interactions
            .iter()
            .find(|r| r.task.as_str() == task && &r.combo == combo && r.eval == eval)
            .map(|r| r.score)
    }

    fn pattern(&self, tasks: &[String], lang: Iso, arity: usize, partner: Option<Iso>, tie: TieRule) -> Vec<usize> {
        let mut counts = vec![0usize; 1 << arity];
        for task in tasks {
            let combos: BTreeSet<&Combo> = self
                .interactions
                .iter()
                .filter(|r| r.task.as_str() == task && r.combo.arity() == arity)
                .map(|r| &r.combo)
                .collect();
            for combo in combos {
                let members = combo.langs();
                if !members.contains(&lang) {
                    continue;
                }
                let mut order = vec![lang];
                if let Some(b) = partner {
                    if !members.contains(&b) || b == lang {
                        continue;
                    }
                    order.push(b);
                }
                for m in members {
                    if !order.contains(m) {
                        order.push(*m);
                    }
                }
                let mut index = 0usize;
                let mut complete = true;
                for m in &order {
                    let joint = self.interaction(task, combo, *m);
                    let mono = self.interaction(task, &Combo::new(vec![*m]).unwrap(), *m);
                    match (joint, mono) {
                        (Some(j), Some(s)) => {
                            let d = j - s;
                            let positive = d > 0.0 || (d == 0.0 && tie == TieRule::Positive);
                            index = index * 2 + usize::from(positive);
                        }
                        _ => complete = false,
                    }
                }
                if complete {
                    counts[index] += 1;
                }
            }
        }
        counts
    }
}

fn check(cond: bool, what: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(what())
    }
}

/// Compares every engine metric on the ledger of `seed` with the oracle.
/// Returns the number of values compared.
pub fn oracle_case(seed: u64) -> Result<usize, String> {
    let config = oracle_config(seed);
    let (ledger, _) = synth_ledger(&config).map_err(|e| e.to_string())?;
    let raw = Raw::from(&ledger);
    let model = config.model.as_str();
    let tasks: Vec<String> = ledger.tasks(model).map(|t| t.to_string()).collect();
    let mut compared = 0;
    let ctx = |what: &str| format!("seed {seed}: {what}");

    for task in &tasks {
        let (transfers, targets) = raw.langs(task);

        for &a in &transfers {
            for &b in &targets {
                for &s in &raw.grid {
                    let engine = transfer_score(&ledger, model, task, a, b, s).ok().map(|t| t.value);
                    let oracle = raw.ts(task, a, b, s);
                    check(engine == oracle, || ctx(&format!("ts {task} {a}->{b}@{s}: {engine:?} vs {oracle:?}")))?;
                    compared += 1;
                }
            }
        }

        let oracle_cells: BTreeMap<(Iso, Iso), f64> = transfers
            .iter()
            .flat_map(|&a| targets.iter().map(move |&b| (a, b)))
            .filter_map(|(a, b)| raw.short_ts(task, a, b).map(|v| ((a, b), v)))
            .collect();
        let Ok(matrix) = transfer_matrix(&ledger, model, task, &StepSelector::Short) else {
            check(oracle_cells.is_empty(), || ctx("matrix failed with populated oracle cells"))?;
            continue;
        };
        let engine_cells: BTreeMap<(Iso, Iso), f64> = matrix.cells().map(|(a, b, v)| ((a, b), v)).collect();
        check(engine_cells == oracle_cells, || ctx(&format!("matrix cells differ for {task}")))?;
        compared += engine_cells.len();

        for &a in &transfers {
            let row: Vec<f64> = targets.iter().filter_map(|b| oracle_cells.get(&(a, *b)).copied()).collect();
            let engine_agg = aggregated_transfer(&matrix, a).ok();
            let engine_pct = positive_pct(&matrix, a, Axis::Transfer).ok();
            let (agg, pct) = mean_and_pct(&row);
            check(engine_agg == agg && engine_pct == pct, || {
                ctx(&format!("transfer {a}: {engine_agg:?}/{engine_pct:?} vs {agg:?}/{pct:?}"))
            })?;
            compared += 2;
        }
        for &b in &targets {
            let col: Vec<f64> = transfers.iter().filter_map(|a| oracle_cells.get(&(*a, b)).copied()).collect();
            let engine_agg = aggregated_target(&matrix, b).ok();
            let engine_pct = positive_pct(&matrix, b, Axis::Target).ok();
            let (agg, pct) = mean_and_pct(&col);
            check(engine_agg == agg && engine_pct == pct, || {
                ctx(&format!("target {b}: {engine_agg:?}/{engine_pct:?} vs {agg:?}/{pct:?}"))
            })?;
            compared += 2;
        }

        let populated: Vec<Iso> = transfers
            .iter()
            .copied()
            .filter(|a| targets.iter().any(|b| oracle_cells.contains_key(&(*a, *b))))
            .collect();
        let mut oracle_counts: BTreeMap<Iso, (usize, usize)> = populated.iter().map(|a| (*a, (0, 0))).collect();
        for &b in &targets {
            let col: Vec<(Iso, f64)> = populated
                .iter()
                .filter_map(|a| oracle_cells.get(&(*a, b)).map(|v| (*a, *v)))
                .collect();
            for &(a, v) in &col {
                if col.iter().all(|(_, w)| v >= *w) {
                    oracle_counts.get_mut(&a).unwrap().0 += 1;
                }
                if col.iter().all(|(_, w)| v <= *w) {
                    oracle_counts.get_mut(&a).unwrap().1 += 1;
                }
            }
        }
        match max_min_recipient_counts(&matrix) {
            Ok(engine) => {
                let engine: BTreeMap<Iso, (usize, usize)> =
                    engine.into_iter().map(|(k, c)| (k, (c.max_count, c.min_count))).collect();
                check(engine == oracle_counts, || ctx(&format!("max/min counts differ for {task}")))?;
                compared += engine.len() * 2;
            }
            Err(_) => check(populated.len() < 2, || ctx("max/min counts failed with 2+ transfers"))?,
        }
    }

    let all_langs: BTreeSet<Iso> = raw.interactions.iter().map(|r| r.eval).collect();
    for (k, &lang) in all_langs.iter().enumerate() {
        let tie = if (seed + k as u64) % 2 == 0 { TieRule::Negative } else { TieRule::Positive };
        for arity in [2, 3] {
            let scopes: Vec<(TaskScope, Vec<String>)> = tasks
                .iter()
                .map(|t| (TaskScope::Single(TaskId::new(t.as_str()).unwrap()), vec![t.clone()]))
                .chain([(TaskScope::Pooled, tasks.clone())])
                .collect();
            let partner = all_langs.iter().copied().find(|l| *l != lang);
            for (scope, scope_tasks) in &scopes {
                for partner in [None, partner] {
                    let opts = PatternOptions { partner, tie };
                    let oracle = raw.pattern(scope_tasks, lang, arity, partner, tie);
                    let engine = pattern_counts(&ledger, model, scope, lang, arity, &opts);
                    match engine {
                        Ok(c) => check(c.counts == oracle, || {
                            ctx(&format!("pattern {lang} arity {arity} {partner:?}: {:?} vs {oracle:?}", c.counts))
                        })?,
                        Err(_) => check(oracle.iter().sum::<usize>() == 0, || {
                            ctx(&format!("pattern {lang} arity {arity} failed with oracle {oracle:?}"))
                        })?,
                    }
                    compared += 1 << arity;
                }
            }
        }
    }
    Ok(compared)
}

fn mean_and_pct(values: &[f64]) -> (Option<f64>, Option<f64>) {
    if values.is_empty() {
        return (None, None);
    }
    let mut sum = 0.0;
    for v in values {
        sum += v;
    }
    let positive = values.iter().filter(|v| **v > 0.0).count();
    (
        Some(sum / values.len() as f64),
        Some(100.0 * positive as f64 / values.len() as f64),
    )
}

// ---------------------------------------------------------------------------
// Small hand-built ledgers

pub fn registry(langs: &[Iso]) -> Registry {
    Registry::new(langs.iter().map(|l| LanguageInfo {
        iso: *l,
        family: "F".into(),
        genus: "G".into(),
        script: "Latn".into(),
        seen: true,
    }))
    .unwrap()
}

/// One task, `langs` as both transfers and targets, a single step and the
/// given baselines and per-cell repetitions.
pub fn grid_ledger(langs: &[Iso], baselines: &[f64], reps: &[Vec<f64>]) -> Ledger {
    let task = TaskId::new("dep").unwrap();
    let base = langs.iter().zip(baselines).map(|(l, s)| BaselineRecord {
        model: "m".into(),
        task: task.clone(),
        target: *l,
        score: *s,
    });
    let mut runs = Vec::new();
    let n = langs.len();
    for (i, a) in langs.iter().enumerate() {
        for (j, b) in langs.iter().enumerate() {
            for (r, score) in reps[i * n + j].iter().enumerate() {
                runs.push(RunRecord {
                    model: "m".into(),
                    task: task.clone(),
                    transfer: *a,
                    target: *b,
                    steps: 10,
                    rep: r as u32,
                    score: *score,
                });
            }
        }
    }
    Ledger::from_records(registry(langs), base, runs, Vec::new(), &LoadOptions::default()).unwrap()
}

// ---------------------------------------------------------------------------
// Property checks

fn ensure(cond: bool, msg: impl Into<String>) -> Result<(), TestCaseError> {
    if cond {
        Ok(())
    } else {
        Err(TestCaseError::fail(msg.into()))
    }
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs()))
}

const LANGS: [&str; 3] = ["aaa", "bbb", "ccc"];

fn langs3() -> Vec<Iso> {
    LANGS.iter().map(|s| iso(s)).collect()
}

/// Baselines in (1, 50], nine cells of 1..=3 repetitions in (1, 50].
pub fn ledger_values() -> impl Strategy<Value = (Vec<f64>, Vec<Vec<f64>>)> {
    (
        prop::collection::vec(1.0f64..50.0, 3),
        prop::collection::vec(prop::collection::vec(1.0f64..50.0, 1..=3), 9),
    )
}

pub fn check_ts_scale_invariance(baselines: &[f64], reps: &[Vec<f64>], c: f64) -> Result<(), TestCaseError> {
    let langs = langs3();
    let a = grid_ledger(&langs, baselines, reps);
    let scaled_base: Vec<f64> = baselines.iter().map(|b| b * c).collect();
    let scaled_reps: Vec<Vec<f64>> = reps.iter().map(|r| r.iter().map(|s| s * c).collect()).collect();
    let b = grid_ledger(&langs, &scaled_base, &scaled_reps);
    for &x in &langs {
        for &y in &langs {
            let u = transfer_score(&a, "m", "dep", x, y, 10).unwrap().value;
            let v = transfer_score(&b, "m", "dep", x, y, 10).unwrap().value;
            ensure(close(u, v, 1e-12), format!("ts {x}->{y}: {u} vs {v} at c={c}"))?;
        }
    }
    Ok(())
}

pub fn check_identity_ledger(baselines: &[f64], reps: usize) -> Result<(), TestCaseError> {
    let langs = langs3();
    let cells: Vec<Vec<f64>> = (0..9).map(|k| vec![baselines[k % 3]; reps]).collect();
    let l = grid_ledger(&langs, baselines, &cells);
    for &x in &langs {
        for &y in &langs {
            let v = transfer_score(&l, "m", "dep", x, y, 10).unwrap().value;
            ensure(v == 0.0, format!("identity ts {x}->{y} = {v}"))?;
        }
    }
    Ok(())
}

pub fn check_projection(arity: usize, counts: &[usize], k: usize) -> Result<(), TestCaseError> {
    let p = project_counts(arity, counts).map_err(|e| TestCaseError::fail(e.to_string()))?;
    ensure(
        (-1.0..=1.0).contains(&p.x) && (-1.0..=1.0).contains(&p.y),
        format!("out of bounds: {p:?}"),
    )?;
    let scaled: Vec<usize> = counts.iter().map(|c| c * k).collect();
    let q = project_counts(arity, &scaled).unwrap();
    ensure(
        close(p.x, q.x, 1e-12) && close(p.y, q.y, 1e-12),
        format!("scaling by {k}: {p:?} vs {q:?}"),
    )?;
    let c = InterferenceCounts::new(iso("und"), arity, counts.to_vec()).unwrap();
    let m = marginal_projection(&c).unwrap();
    ensure(
        (p.x - m.x).abs() <= 1e-12 && (p.y - m.y).abs() <= 1e-12,
        format!("dot {p:?} vs marginal {m:?}"),
    )
}

pub fn check_spearman(x: &[f64], y: &[f64]) -> Result<(), TestCaseError> {
    let distinct = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<BTreeSet<_>>().len() == v.len();
    let identical = spearman(x, x).unwrap();
    let reversed: Vec<f64> = x.iter().map(|v| -v).collect();
    let rev = spearman(x, &reversed).unwrap();
    ensure(identical.rho().is_some_and(|r| close(r, 1.0, 1e-12)), format!("identical: {identical:?}"))?;
    ensure(rev.rho().is_some_and(|r| close(r, -1.0, 1e-12)), format!("reversed: {rev:?}"))?;

    let xy = spearman(x, y).unwrap();
    let yx = spearman(y, x).unwrap();
    ensure(xy.rho() == yx.rho() || close(xy.rho().unwrap(), yx.rho().unwrap(), 1e-12), "symmetry")?;
    // Strictly increasing transform leaves ranks unchanged.
    let warped: Vec<f64> = y.iter().map(|v| v * v * v + 3.0 * v).collect();
    let w = spearman(x, &warped).unwrap();
    if distinct(y) && distinct(&warped) {
        ensure(
            close(w.rho().unwrap(), xy.rho().unwrap(), 1e-12),
            format!("monotone transform changed rho: {w:?} vs {xy:?}"),
        )?;
    }
    Ok(())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for i in 0..=p.len() {
            let mut q = p.clone();
            q.insert(i, n - 1);
            out.push(q);
        }
    }
    out
}

/// Two-sided exact p for a distinct-valued pair at N=5, by listing all 120
/// orderings of the second ranking.
pub fn check_exact_p5(perm: &[usize]) -> Result<(), TestCaseError> {
    let x: Vec<f64> = (1..=5).map(f64::from).collect();
    let y: Vec<f64> = perm.iter().map(|p| *p as f64 + 1.0).collect();
    let observed = pearson(&x, &y);
    let all = permutations(5);
    let extreme = all
        .iter()
        .filter(|p| {
            let py: Vec<f64> = p.iter().map(|v| *v as f64 + 1.0).collect();
            pearson(&x, &py).abs() >= observed.abs() - 1e-12
        })
        .count();
    let expected = extreme as f64 / all.len() as f64;
    let fit = spearman(&x, &y).unwrap();
    let Some(f) = fit.fit() else {
        return Err(TestCaseError::fail("degenerate"));
    };
    ensure(f.method == PMethod::Exact, "N=5 must use the exact permutation test")?;
    ensure(close(f.rho, observed, 1e-12), format!("rho {} vs {observed}", f.rho))?;
    ensure(close(f.p_value, expected, 1e-12), format!("p {} vs {expected} for {perm:?}", f.p_value))
}

/// Writes, reloads and compares a synthetic ledger.
pub fn check_roundtrip(seed: u64, format: LedgerFormat) -> Result<(), TestCaseError> {
    let config = SynthConfig {
        seed,
        n_transfer: 3,
        n_target: 4,
        rep_count: 2,
        missing_rate: 0.2,
        ..SynthConfig::default()
    };
    let (ledger, _) = synth_ledger(&config).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_ledger_dir(&ledger, dir.path(), format).unwrap();
    let back = load_ledger_dir(dir.path(), &LoadOptions::default()).unwrap();
    ensure(
        back.baseline_records().collect::<Vec<_>>() == ledger.baseline_records().collect::<Vec<_>>(),
        "baselines differ",
    )?;
    ensure(
        back.run_records().collect::<Vec<_>>() == ledger.run_records().collect::<Vec<_>>(),
        "runs differ",
    )?;
    ensure(
        back.interaction_records().collect::<Vec<_>>() == ledger.interaction_records().collect::<Vec<_>>(),
        "interactions differ",
    )?;
    ensure(
        back.registry().iter().collect::<Vec<_>>() == ledger.registry().iter().collect::<Vec<_>>(),
        "registry differs",
    )
}

/// Every member scores exactly its monolingual score: with ties negative
/// every combination lands on the all-negative pattern.
pub fn check_all_tie(n_langs: usize, score: f64, arity: usize) -> Result<(), TestCaseError> {
    let langs: Vec<Iso> = (0..n_langs).map(synth_iso).collect();
    let task = TaskId::new("pos").unwrap();
    let mut inter = Vec::new();
    let rec = |combo: Combo, eval: Iso| InteractionRecord {
        model: "m".into(),
        task: task.clone(),
        combo,
        eval,
        score,
    };
    for l in &langs {
        inter.push(rec(Combo::single(*l), *l));
    }
    let combos: Vec<Vec<Iso>> = match arity {
        2 => (0..n_langs)
            .flat_map(|i| (i + 1..n_langs).map(move |j| vec![i, j]))
            .map(|v| v.into_iter().map(|k| langs[k]).collect())
            .collect(),
        _ => (0..n_langs)
            .flat_map(|i| (i + 1..n_langs).flat_map(move |j| (j + 1..n_langs).map(move |k| vec![i, j, k])))
            .map(|v| v.into_iter().map(|k| langs[k]).collect())
            .collect(),
    };
    for c in &combos {
        for l in c {
            inter.push(rec(Combo::new(c.clone()).unwrap(), *l));
        }
    }
    let ledger = Ledger::from_records(registry(&langs), Vec::new(), Vec::new(), inter, &LoadOptions::default()).unwrap();
    for l in &langs {
        let c = pattern_counts(&ledger, "m", &TaskScope::Pooled, *l, arity, &PatternOptions::default()).unwrap();
        let total = c.total();
        ensure(c.counts[0] == total && total > 0, format!("{l}: {:?}", c.counts))?;
        ensure(
            c.pattern(0).iter().all(|s| *s == Sign::Negative),
            "index 0 must be all negative",
        )?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Deterministic runner for the acceptance binary

pub fn runner(cases: u32) -> TestRunner {
    TestRunner::new(Config {
        cases,
        failure_persistence: None,
        rng_seed: RngSeed::Fixed(0x7a5f),
        ..Config::default()
    })
}

pub fn counts_strategy() -> impl Strategy<Value = (usize, Vec<usize>)> {
    prop_oneof![Just(2usize), Just(3usize)].prop_flat_map(|arity| {
        (Just(arity), prop::collection::vec(0usize..50, 1 << arity))
            .prop_filter("non-empty", |(_, c)| c.iter().sum::<usize>() > 0)
    })
}

pub fn spearman_pair() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (3usize..15).prop_flat_map(|n| {
        (
            prop::collection::btree_set(-1000i32..1000, n)
                .prop_map(|s| s.into_iter().map(f64::from).collect::<Vec<_>>())
                .prop_shuffle(),
            prop::collection::vec(-50.0f64..50.0, n),
        )
    })
}

/// Runs every property with a fixed seed; `(name, error)` per failure.
pub fn run_properties(cases: u32) -> Vec<(&'static str, Result<(), String>)> {
    let mut out = Vec::new();
    let mut push = |name, r: Result<(), String>| out.push((name, r));
    push(
        "ts_scale_invariance",
        runner(cases)
            .run(&(ledger_values(), 0.1f64..2.0), |((b, r), c)| check_ts_scale_invariance(&b, &r, c))
            .map_err(|e| e.to_string()),
    );
    push(
        "ts_identity_zero",
        runner(cases)
            .run(&(prop::collection::vec(0.5f64..100.0, 3), 1usize..5), |(b, r)| {
                check_identity_ledger(&b, r)
            })
            .map_err(|e| e.to_string()),
    );
    push(
        "projection",
        runner(cases)
            .run(&(counts_strategy(), 1usize..20), |((a, c), k)| check_projection(a, &c, k))
            .map_err(|e| e.to_string()),
    );
    push(
        "spearman",
        runner(cases)
            .run(&spearman_pair(), |(x, y)| check_spearman(&x, &y))
            .map_err(|e| e.to_string()),
    );
    push(
        "exact_p_n5",
        runner(cases)
            .run(&Just((0..5).collect::<Vec<usize>>()).prop_shuffle(), |p| check_exact_p5(&p))
            .map_err(|e| e.to_string()),
    );
    out
}
