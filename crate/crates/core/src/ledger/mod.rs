//! Immutable score ledger: language registry, zero-shot baselines,
//! continued-training runs and adapter-fusion interactions.
//!
//! A [`Ledger`] is validated once on construction and never mutated
//! afterwards. Records are indexed per model and task so that every
//! analysis can look up a cell without scanning.

mod io;
mod synth;
mod types;

use std::collections::{BTreeMap, BTreeSet};

pub use io::{
    load_language_registry, load_ledger, load_ledger_dir, write_ledger_dir, LedgerFiles,
    LedgerFormat, LedgerPaths,
};
pub use synth::{synth_iso, synth_ledger, SynthConfig, SynthTruth, TruthRecord};
pub use types::{
    BaselineRecord, Combo, InteractionRecord, Iso, LanguageInfo, RunRecord, TaskId,
};

use crate::error::{Error, Result};

/// Language registry keyed by iso code.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Registry {
    langs: BTreeMap<Iso, LanguageInfo>,
}

impl Registry {
    pub fn new(entries: impl IntoIterator<Item = LanguageInfo>) -> Result<Self> {
        let mut langs = BTreeMap::new();
        for entry in entries {
            for (name, value) in [
                ("family", &entry.family),
                ("genus", &entry.genus),
                ("script", &entry.script),
            ] {
                if value.trim().is_empty() {
                    return Err(Error::InvalidArgument(format!(
                        "language {} has an empty {name}",
                        entry.iso
                    )));
                }
            }
            let iso = entry.iso;
            if langs.insert(iso, entry).is_some() {
                return Err(Error::Duplicate {
                    kind: "language",
                    key: iso.to_string(),
                });
            }
        }
        Ok(Registry { langs })
    }

    pub fn get(&self, iso: Iso) -> Option<&LanguageInfo> {
        self.langs.get(&iso)
    }

    pub fn contains(&self, iso: Iso) -> bool {
        self.langs.contains_key(&iso)
    }

    /// Unknown languages are treated as seen.
    pub fn is_seen(&self, iso: Iso) -> bool {
        self.langs.get(&iso).is_none_or(|l| l.seen)
    }

    pub fn iter(&self) -> impl Iterator<Item = &LanguageInfo> {
        self.langs.values()
    }

    pub fn len(&self) -> usize {
        self.langs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.langs.is_empty()
    }

    fn require(&self, iso: Iso) -> Result<()> {
        if self.contains(iso) {
            Ok(())
        } else {
            Err(Error::UnknownLanguage(iso.to_string()))
        }
    }
}

/// Repetition scores of one (cell, steps) entry, ordered by repetition index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RepVector {
    reps: Vec<u32>,
    scores: Vec<f64>,
}

impl RepVector {
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn rep_ids(&self) -> &[u32] {
        &self.reps
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }

    /// Mean shifted by the first score, so identical repetitions average to
    /// exactly that score.
    pub fn mean(&self) -> f64 {
        let first = self.scores[0];
        first + self.scores.iter().map(|s| s - first).sum::<f64>() / self.scores.len() as f64
    }

    fn insert(&mut self, rep: u32, score: f64) -> bool {
        match self.reps.binary_search(&rep) {
            Ok(_) => false,
            Err(pos) => {
                self.reps.insert(pos, rep);
                self.scores.insert(pos, score);
                true
            }
        }
    }

    fn is_dense(&self) -> bool {
        self.reps.iter().enumerate().all(|(i, r)| *r as usize == i)
    }
}

/// All records of one (model, task).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TaskLedger {
    baselines: BTreeMap<Iso, f64>,
    runs: BTreeMap<(Iso, Iso), BTreeMap<u32, RepVector>>,
    interactions: BTreeMap<(Combo, Iso), f64>,
    rep_count: usize,
}

impl TaskLedger {
    pub fn baseline(&self, target: Iso) -> Option<f64> {
        self.baselines.get(&target).copied()
    }

    pub fn baselines(&self) -> impl Iterator<Item = (Iso, f64)> + '_ {
        self.baselines.iter().map(|(k, v)| (*k, *v))
    }

    pub fn reps(&self, transfer: Iso, target: Iso, steps: u32) -> Option<&RepVector> {
        self.runs.get(&(transfer, target))?.get(&steps)
    }

    /// Step entries of one (transfer, target) cell.
    pub fn cell(&self, transfer: Iso, target: Iso) -> Option<&BTreeMap<u32, RepVector>> {
        self.runs.get(&(transfer, target))
    }

    pub fn cells(&self) -> impl Iterator<Item = ((Iso, Iso), &BTreeMap<u32, RepVector>)> + '_ {
        self.runs.iter().map(|(k, v)| (*k, v))
    }

    pub fn interaction(&self, combo: &Combo, eval: Iso) -> Option<f64> {
        self.interactions.get(&(combo.clone(), eval)).copied()
    }

    pub fn interactions(&self) -> impl Iterator<Item = (&Combo, Iso, f64)> + '_ {
        self.interactions.iter().map(|((c, e), s)| (c, *e, *s))
    }

    /// Transfer languages with at least one run, sorted.
    pub fn transfer_langs(&self) -> Vec<Iso> {
        let set: BTreeSet<Iso> = self.runs.keys().map(|(t, _)| *t).collect();
        set.into_iter().collect()
    }

    /// Target languages with a baseline or at least one run, sorted.
    pub fn target_langs(&self) -> Vec<Iso> {
        let mut set: BTreeSet<Iso> = self.runs.keys().map(|(_, t)| *t).collect();
        set.extend(self.baselines.keys().copied());
        set.into_iter().collect()
    }

    /// Inferred number of repetitions per (cell, steps).
    pub fn rep_count(&self) -> usize {
        self.rep_count
    }
}

/// Knobs applied while constructing a ledger.
#[derive(Clone, Debug, Default)]
pub struct LoadOptions {
    /// Promote repetition-count irregularities from warnings to errors, and
    /// require exactly `rep_count` repetitions when averaging.
    pub strict: bool,
    /// Declared step grid. When absent the grid is inferred from the runs.
    pub step_grid: Option<Vec<u32>>,
}

impl LoadOptions {
    pub fn strict() -> Self {
        LoadOptions {
            strict: true,
            step_grid: None,
        }
    }

    /// Reads `TRANSFERSCOPE_STRICT=1` from the environment.
    pub fn from_env() -> Self {
        let strict = std::env::var("TRANSFERSCOPE_STRICT").is_ok_and(|v| v.trim() == "1");
        LoadOptions {
            strict,
            step_grid: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Ledger {
    registry: Registry,
    models: BTreeMap<String, BTreeMap<TaskId, TaskLedger>>,
    step_grid: Vec<u32>,
    strict: bool,
    warnings: Vec<String>,
}

impl Ledger {
    /// Validates and indexes raw records.
    pub fn from_records(
        registry: Registry,
        baselines: impl IntoIterator<Item = BaselineRecord>,
        runs: impl IntoIterator<Item = RunRecord>,
        interactions: impl IntoIterator<Item = InteractionRecord>,
        options: &LoadOptions,
    ) -> Result<Self> {
        let mut models: BTreeMap<String, BTreeMap<TaskId, TaskLedger>> = BTreeMap::new();

        for rec in baselines {
            validate_model(&rec.model)?;
            registry.require(rec.target)?;
            let key = || format!("baseline {}/{}/{}", rec.model, rec.task, rec.target);
            types::check_score(rec.score, key)?;
            let task = task_entry(&mut models, &rec.model, &rec.task);
            if task.baselines.insert(rec.target, rec.score).is_some() {
                return Err(Error::Duplicate {
                    kind: "baseline",
                    key: format!("{}/{}/{}", rec.model, rec.task, rec.target),
                });
            }
        }

        let declared: Option<BTreeSet<u32>> =
            options.step_grid.as_ref().map(|g| g.iter().copied().collect());
        let mut grid = BTreeSet::new();
        for rec in runs {
            validate_model(&rec.model)?;
            registry.require(rec.transfer)?;
            registry.require(rec.target)?;
            let key = || {
                format!(
                    "{}/{}/{}->{}@{}#{}",
                    rec.model, rec.task, rec.transfer, rec.target, rec.steps, rec.rep
                )
            };
            types::check_score(rec.score, key)?;
            if rec.steps == 0 {
                return Err(Error::InvalidArgument(format!(
                    "run {}: steps must be positive",
                    key()
                )));
            }
            if let Some(declared) = &declared {
                if !declared.contains(&rec.steps) {
                    return Err(Error::StepNotInGrid {
                        key: key(),
                        steps: rec.steps,
                    });
                }
            }
            grid.insert(rec.steps);
            let task = task_entry(&mut models, &rec.model, &rec.task);
            let inserted = task
                .runs
                .entry((rec.transfer, rec.target))
                .or_default()
                .entry(rec.steps)
                .or_default()
                .insert(rec.rep, rec.score);
            if !inserted {
                return Err(Error::Duplicate {
                    kind: "run",
                    key: key(),
                });
            }
        }

        for rec in interactions {
            validate_model(&rec.model)?;
            for lang in rec.combo.langs() {
                registry.require(*lang)?;
            }
            if !rec.combo.contains(rec.eval) {
                return Err(Error::EvalNotInCombo {
                    eval: rec.eval.to_string(),
                    combo: rec.combo.to_string(),
                });
            }
            let key = || {
                format!(
                    "interaction {}/{}/{}@{}",
                    rec.model, rec.task, rec.combo, rec.eval
                )
            };
            types::check_score(rec.score, key)?;
            let task = task_entry(&mut models, &rec.model, &rec.task);
            if task
                .interactions
                .insert((rec.combo.clone(), rec.eval), rec.score)
                .is_some()
            {
                return Err(Error::Duplicate {
                    kind: "interaction",
                    key: format!("{}/{}/{}@{}", rec.model, rec.task, rec.combo, rec.eval),
                });
            }
        }

        let mut warnings = Vec::new();
        for (model, tasks) in &mut models {
            for (task, data) in tasks.iter_mut() {
                data.rep_count = infer_rep_count(model, task, data, options.strict, &mut warnings)?;
            }
        }

        let step_grid = match &options.step_grid {
            Some(declared) => {
                let mut g = declared.clone();
                g.sort_unstable();
                g.dedup();
                g
            }
            None => grid.into_iter().collect(),
        };

        Ok(Ledger {
            registry,
            models,
            step_grid,
            strict: options.strict,
            warnings,
        })
    }

    pub fn registry(&self) -> &Registry {
        &self.registry
    }

    pub fn step_grid(&self) -> &[u32] {
        &self.step_grid
    }

    pub fn is_strict(&self) -> bool {
        self.strict
    }

    /// Non-fatal irregularities found on load.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn models(&self) -> impl Iterator<Item = &str> {
        self.models.keys().map(String::as_str)
    }

    pub fn tasks(&self, model: &str) -> impl Iterator<Item = &TaskId> {
        self.models.get(model).into_iter().flat_map(|t| t.keys())
    }

    pub fn task(&self, model: &str, task: &str) -> Option<&TaskLedger> {
        self.models.get(model)?.get(task)
    }

    pub(crate) fn task_or_err(&self, model: &str, task: &str) -> Result<&TaskLedger> {
        self.task(model, task).ok_or_else(|| {
            Error::EmptySelection(format!("no records for model {model:?} task {task:?}"))
        })
    }

    /// Zero-shot score, `None` when the ledger has no such record.
    pub fn baseline(&self, model: &str, task: &str, target: Iso) -> Option<f64> {
        self.task(model, task)?.baseline(target)
    }

    /// Repetition vector of one cell at one step, ordered by repetition.
    pub fn reps(
        &self,
        model: &str,
        task: &str,
        transfer: Iso,
        target: Iso,
        steps: u32,
    ) -> Option<&RepVector> {
        self.task(model, task)?.reps(transfer, target, steps)
    }

    pub fn interaction(&self, model: &str, task: &str, combo: &Combo, eval: Iso) -> Option<f64> {
        self.task(model, task)?.interaction(combo, eval)
    }

    pub fn rep_count(&self, model: &str, task: &str) -> Option<usize> {
        self.task(model, task).map(TaskLedger::rep_count)
    }

    pub fn baseline_records(&self) -> impl Iterator<Item = BaselineRecord> + '_ {
        self.models.iter().flat_map(|(model, tasks)| {
            tasks.iter().flat_map(move |(task, data)| {
                data.baselines.iter().map(move |(target, score)| BaselineRecord {
                    model: model.clone(),
                    task: task.clone(),
                    target: *target,
                    score: *score,
                })
            })
        })
    }

    pub fn run_records(&self) -> impl Iterator<Item = RunRecord> + '_ {
        self.models.iter().flat_map(|(model, tasks)| {
            tasks.iter().flat_map(move |(task, data)| {
                data.runs.iter().flat_map(move |((transfer, target), steps)| {
                    steps.iter().flat_map(move |(step, reps)| {
                        reps.reps
                            .iter()
                            .zip(&reps.scores)
                            .map(move |(rep, score)| RunRecord {
                                model: model.clone(),
                                task: task.clone(),
                                transfer: *transfer,
                                target: *target,
                                steps: *step,
                                rep: *rep,
                                score: *score,
                            })
                    })
                })
            })
        })
    }

    pub fn interaction_records(&self) -> impl Iterator<Item = InteractionRecord> + '_ {
        self.models.iter().flat_map(|(model, tasks)| {
            tasks.iter().flat_map(move |(task, data)| {
                data.interactions
                    .iter()
                    .map(move |((combo, eval), score)| InteractionRecord {
                        model: model.clone(),
                        task: task.clone(),
                        combo: combo.clone(),
                        eval: *eval,
                        score: *score,
                    })
            })
        })
    }

    pub fn record_counts(&self) -> (usize, usize, usize) {
        let mut counts = (0, 0, 0);
        for data in self.models.values().flat_map(BTreeMap::values) {
            counts.0 += data.baselines.len();
            counts.1 += data
                .runs
                .values()
                .flat_map(BTreeMap::values)
                .map(RepVector::len)
                .sum::<usize>();
            counts.2 += data.interactions.len();
        }
        counts
    }
}

fn validate_model(model: &str) -> Result<()> {
    if model.is_empty() || model.contains(',') || model.chars().any(char::is_whitespace) {
        return Err(Error::InvalidArgument(format!("invalid model name {model:?}")));
    }
    Ok(())
}

fn task_entry<'a>(
    models: &'a mut BTreeMap<String, BTreeMap<TaskId, TaskLedger>>,
    model: &str,
    task: &TaskId,
) -> &'a mut TaskLedger {
    models
        .entry(model.to_string())
        .or_default()
        .entry(task.clone())
        .or_default()
}

/// Picks the most common repetition count of a (model, task) and reports
/// every (cell, steps) that deviates from it or has gaps in its rep ids.
fn infer_rep_count(
    model: &str,
    task: &TaskId,
    data: &TaskLedger,
    strict: bool,
    warnings: &mut Vec<String>,
) -> Result<usize> {
    let mut histogram: BTreeMap<usize, usize> = BTreeMap::new();
    for reps in data.runs.values().flat_map(BTreeMap::values) {
        *histogram.entry(reps.len()).or_default() += 1;
    }
    let Some(rep_count) = histogram
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(a.0.cmp(b.0)))
        .map(|(n, _)| *n)
    else {
        return Ok(0);
    };

    let mut problems = Vec::new();
    for ((transfer, target), steps) in &data.runs {
        for (step, reps) in steps {
            if reps.len() != rep_count {
                problems.push(format!(
                    "{transfer}->{target}@{step} has {} repetitions, expected {rep_count}",
                    reps.len()
                ));
            } else if !reps.is_dense() {
                problems.push(format!(
                    "{transfer}->{target}@{step} repetition ids are not 0..{rep_count}"
                ));
            }
        }
    }
    if problems.is_empty() {
        return Ok(rep_count);
    }
    let detail = if problems.len() > 3 {
        format!("{}; and {} more", problems[..3].join("; "), problems.len() - 3)
    } else {
        problems.join("; ")
    };
    if strict {
        return Err(Error::RepCount {
            model: model.to_string(),
            task: task.to_string(),
            detail,
        });
    }
    warnings.push(format!(
        "repetition count is not constant for {model}/{task}: {detail}"
    ));
    Ok(rep_count)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn lang(code: &str, seen: bool) -> LanguageInfo {
        LanguageInfo {
            iso: Iso::new(code).unwrap(),
            family: "fam".into(),
            genus: "gen".into(),
            script: "Latn".into(),
            seen,
        }
    }

    fn iso(code: &str) -> Iso {
        Iso::new(code).unwrap()
    }

    fn run(transfer: &str, target: &str, steps: u32, rep: u32, score: f64) -> RunRecord {
        RunRecord {
            model: "mbert".into(),
            task: TaskId::new("dep").unwrap(),
            transfer: iso(transfer),
            target: iso(target),
            steps,
            rep,
            score,
        }
    }

    fn registry() -> Registry {
        Registry::new([lang("ara", true), lang("ben", true), lang("mya", true)]).unwrap()
    }

    #[test]
    fn duplicate_language_rejected() {
        let err = Registry::new([lang("ara", true), lang("ara", false)]).unwrap_err();
        assert!(matches!(err, Error::Duplicate { kind: "language", .. }));
    }

    #[test]
    fn rep_count_inferred_from_dense_reps() {
        let runs = (0..10).map(|r| run("ara", "ben", 1, r, 50.0));
        let ledger =
            Ledger::from_records(registry(), [], runs, [], &LoadOptions::default()).unwrap();
        assert_eq!(ledger.rep_count("mbert", "dep"), Some(10));
        assert!(ledger.warnings().is_empty());
        assert_eq!(ledger.step_grid(), &[1]);
    }

    #[test]
    fn unknown_language_is_named() {
        let reg = Registry::new([lang("ara", true)]).unwrap();
        let mut r = run("ara", "ara", 1, 0, 50.0);
        r.transfer = iso("xxx");
        let err = Ledger::from_records(reg, [], [r], [], &LoadOptions::default()).unwrap_err();
        assert!(err.to_string().contains("xxx"), "{err}");
    }

    #[test]
    fn duplicate_run_rejected() {
        let runs = [run("ara", "ben", 1, 0, 50.0), run("ara", "ben", 1, 0, 51.0)];
        let err =
            Ledger::from_records(registry(), [], runs, [], &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Duplicate { kind: "run", .. }));
    }

    #[test]
    fn uneven_reps_warn_or_fail() {
        let runs: Vec<_> = (0..3)
            .map(|r| run("ara", "ben", 1, r, 50.0))
            .chain((0..2).map(|r| run("ara", "mya", 1, r, 50.0)))
            .chain((0..3).map(|r| run("ben", "mya", 1, r, 50.0)))
            .collect();
        let lenient =
            Ledger::from_records(registry(), [], runs.clone(), [], &LoadOptions::default())
                .unwrap();
        assert_eq!(lenient.rep_count("mbert", "dep"), Some(3));
        assert_eq!(lenient.warnings().len(), 1);

        let err = Ledger::from_records(registry(), [], runs, [], &LoadOptions::strict())
            .unwrap_err();
        assert!(matches!(err, Error::RepCount { .. }));
    }

    #[test]
    fn eval_must_be_in_combo() {
        let rec = InteractionRecord {
            model: "mbert".into(),
            task: TaskId::new("dep").unwrap(),
            combo: "ara+ben".parse().unwrap(),
            eval: iso("mya"),
            score: 50.0,
        };
        let err =
            Ledger::from_records(registry(), [], [], [rec], &LoadOptions::default()).unwrap_err();
        assert!(matches!(err, Error::EvalNotInCombo { .. }));
    }

    #[test]
    fn scores_outside_range_rejected() {
        let rec = BaselineRecord {
            model: "mbert".into(),
            task: TaskId::new("dep").unwrap(),
            target: iso("ara"),
            score: 100.5,
        };
        assert!(Ledger::from_records(registry(), [rec], [], [], &LoadOptions::default()).is_err());
    }

    #[test]
    fn declared_grid_enforced() {
        let opts = LoadOptions {
            strict: false,
            step_grid: Some(vec![1, 10]),
        };
        let err =
            Ledger::from_records(registry(), [], [run("ara", "ben", 100, 0, 1.0)], [], &opts)
                .unwrap_err();
        assert!(matches!(err, Error::StepNotInGrid { steps: 100, .. }));
    }

    #[test]
    fn query_distinguishes_absent_from_values() {
        let base = BaselineRecord {
            model: "mbert".into(),
            task: TaskId::new("dep").unwrap(),
            target: iso("ben"),
            score: 0.0,
        };
        let runs = [run("ara", "ben", 1, 1, 60.0), run("ara", "ben", 1, 0, 40.0)];
        let ledger =
            Ledger::from_records(registry(), [base], runs, [], &LoadOptions::default()).unwrap();
        assert_eq!(ledger.baseline("mbert", "dep", iso("ben")), Some(0.0));
        assert_eq!(ledger.baseline("mbert", "dep", iso("ara")), None);
        assert_eq!(ledger.baseline("xlmr", "dep", iso("ben")), None);
        let reps = ledger.reps("mbert", "dep", iso("ara"), iso("ben"), 1).unwrap();
        assert_eq!(reps.scores(), &[40.0, 60.0]);
        assert_eq!(reps.rep_ids(), &[0, 1]);
        assert!(ledger.reps("mbert", "dep", iso("ara"), iso("ben"), 10).is_none());
    }
}
