//! Transfer scores and everything aggregated from them.
//!
//! A transfer score is the relative change of the mean repetition score of
//! a (transfer, target) cell against the zero-shot baseline of the target:
//! `(mean(reps) - baseline) / baseline`. It is a unit-free ratio; reports
//! multiply by 100 only where a table asks for percent.
//!
//! Every sign test in this module is strict: a score equal to its
//! reference counts as non-positive.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::{Iso, Ledger, Registry, RepVector, TaskId, TaskLedger};

/// Which continued-training steps a matrix is computed from.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub enum StepSelector {
    Single(u32),
    /// Mean of the per-step transfer scores over these steps.
    Mean(Vec<u32>),
    /// Mean over every grid step up to 100 (the few-step setting).
    #[default]
    Short,
}

impl StepSelector {
    pub const SHORT_LIMIT: u32 = 100;

    pub fn resolve(&self, grid: &[u32]) -> Result<Vec<u32>> {
        let steps: Vec<u32> = match self {
            StepSelector::Single(s) => vec![*s],
            StepSelector::Mean(steps) => {
                let mut s = steps.clone();
                s.sort_unstable();
                s.dedup();
                s
            }
            StepSelector::Short => grid
                .iter()
                .copied()
                .filter(|s| *s <= Self::SHORT_LIMIT)
                .collect(),
        };
        if steps.is_empty() {
            return Err(Error::EmptySelection(format!(
                "step selector {self} selects nothing from grid {grid:?}"
            )));
        }
        Ok(steps)
    }
}

impl fmt::Display for StepSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StepSelector::Single(s) => write!(f, "{s}"),
            StepSelector::Mean(steps) => {
                let parts: Vec<String> = steps.iter().map(u32::to_string).collect();
                write!(f, "{}", parts.join(","))
            }
            StepSelector::Short => f.write_str("short"),
        }
    }
}

impl FromStr for StepSelector {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s.eq_ignore_ascii_case("short") || s.eq_ignore_ascii_case("default") {
            return Ok(StepSelector::Short);
        }
        let steps = s
            .split(',')
            .map(|p| {
                p.trim()
                    .parse::<u32>()
                    .ok()
                    .filter(|v| *v > 0)
                    .ok_or_else(|| Error::InvalidArgument(format!("invalid step {p:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(match steps.as_slice() {
            [single] => StepSelector::Single(*single),
            _ => StepSelector::Mean(steps),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TransferScore {
    pub value: f64,
    pub model: String,
    pub task: TaskId,
    pub transfer: Iso,
    pub target: Iso,
    pub steps: u32,
}

fn baseline_for(task: &TaskLedger, model: &str, task_id: &str, target: Iso) -> Result<f64> {
    let base = task.baseline(target).ok_or_else(|| Error::MissingBaseline {
        model: model.to_string(),
        task: task_id.to_string(),
        target: target.to_string(),
    })?;
    if base == 0.0 {
        return Err(Error::ZeroBaseline {
            model: model.to_string(),
            task: task_id.to_string(),
            target: target.to_string(),
        });
    }
    Ok(base)
}

fn check_reps(
    ledger: &Ledger,
    data: &TaskLedger,
    (model, task): (&str, &str),
    reps: &RepVector,
    cell: impl Fn() -> String,
) -> Result<()> {
    if ledger.is_strict() && reps.len() != data.rep_count() {
        return Err(Error::RepCount {
            model: model.to_string(),
            task: task.to_string(),
            detail: format!(
                "{} has {} repetitions, strict mode requires {}",
                cell(),
                reps.len(),
                data.rep_count()
            ),
        });
    }
    Ok(())
}

fn relative(score: f64, base: f64) -> f64 {
    (score - base) / base
}

/// Transfer score of one cell at one step.
pub fn transfer_score(
    ledger: &Ledger,
    model: &str,
    task: &str,
    transfer: Iso,
    target: Iso,
    steps: u32,
) -> Result<TransferScore> {
    let data = ledger.task_or_err(model, task)?;
    let base = baseline_for(data, model, task, target)?;
    let cell = || format!("{model}/{task}/{transfer}->{target}@{steps}");
    let reps = data
        .reps(transfer, target, steps)
        .ok_or_else(|| Error::MissingCell(cell()))?;
    check_reps(ledger, data, (model, task), reps, cell)?;
    Ok(TransferScore {
        value: relative(reps.mean(), base),
        model: model.to_string(),
        task: TaskId::new(task)?,
        transfer,
        target,
        steps,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AbsentReason {
    MissingBaseline,
    ZeroBaseline,
    MissingRuns,
    /// Runs exist but not for every selected step.
    PartialSteps,
}

impl fmt::Display for AbsentReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AbsentReason::MissingBaseline => "missing_baseline",
            AbsentReason::ZeroBaseline => "zero_baseline",
            AbsentReason::MissingRuns => "missing_runs",
            AbsentReason::PartialSteps => "partial_steps",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Coverage {
    pub transfers: usize,
    pub targets: usize,
    pub populated: usize,
    pub missing_baseline: usize,
    pub zero_baseline: usize,
    pub missing_runs: usize,
    pub partial_steps: usize,
}

/// Transfer scores of one (model, task) over transfer × target.
#[derive(Clone, Debug, PartialEq)]
pub struct TransferMatrix {
    model: String,
    task: TaskId,
    steps: Vec<u32>,
    transfers: Vec<Iso>,
    targets: Vec<Iso>,
    cells: BTreeMap<(Iso, Iso), f64>,
    absent: BTreeMap<(Iso, Iso), AbsentReason>,
}

impl TransferMatrix {
    /// Builds a matrix directly from populated cells.
    pub fn from_cells(
        model: impl Into<String>,
        task: TaskId,
        steps: Vec<u32>,
        cells: impl IntoIterator<Item = ((Iso, Iso), f64)>,
    ) -> Self {
        let cells: BTreeMap<(Iso, Iso), f64> = cells.into_iter().collect();
        let mut transfers: Vec<Iso> = cells.keys().map(|(t, _)| *t).collect();
        transfers.sort();
        transfers.dedup();
        let mut targets: Vec<Iso> = cells.keys().map(|(_, t)| *t).collect();
        targets.sort();
        targets.dedup();
        TransferMatrix {
            model: model.into(),
            task,
            steps,
            transfers,
            targets,
            cells,
            absent: BTreeMap::new(),
        }
    }

    pub fn model(&self) -> &str {
        &self.model
    }

    pub fn task(&self) -> &TaskId {
        &self.task
    }

    /// Steps averaged into each cell.
    pub fn steps(&self) -> &[u32] {
        &self.steps
    }

    pub fn transfers(&self) -> &[Iso] {
        &self.transfers
    }

    pub fn targets(&self) -> &[Iso] {
        &self.targets
    }

    pub fn get(&self, transfer: Iso, target: Iso) -> Option<f64> {
        self.cells.get(&(transfer, target)).copied()
    }

    pub fn absent_reason(&self, transfer: Iso, target: Iso) -> Option<AbsentReason> {
        self.absent.get(&(transfer, target)).copied()
    }

    pub fn cells(&self) -> impl Iterator<Item = (Iso, Iso, f64)> + '_ {
        self.cells.iter().map(|((a, b), v)| (*a, *b, *v))
    }

    pub fn absent(&self) -> impl Iterator<Item = (Iso, Iso, AbsentReason)> + '_ {
        self.absent.iter().map(|((a, b), r)| (*a, *b, *r))
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Populated cells of one transfer language, by target.
    pub fn row(&self, transfer: Iso) -> impl Iterator<Item = (Iso, f64)> + '_ {
        self.cells
            .range((transfer, Iso::new("aaa").expect("valid"))..)
            .take_while(move |((t, _), _)| *t == transfer)
            .map(|((_, g), v)| (*g, *v))
    }

    /// Populated cells of one target language, by transfer.
    pub fn column(&self, target: Iso) -> impl Iterator<Item = (Iso, f64)> + '_ {
        self.transfers
            .iter()
            .filter_map(move |t| self.get(*t, target).map(|v| (*t, v)))
    }

    pub fn line(&self, lang: Iso, axis: Axis) -> Vec<(Iso, f64)> {
        match axis {
            Axis::Transfer => self.row(lang).collect(),
            Axis::Target => self.column(lang).collect(),
        }
    }

    /// Languages on `axis` with at least one populated cell.
    pub fn populated(&self, axis: Axis) -> Vec<Iso> {
        let langs = match axis {
            Axis::Transfer => &self.transfers,
            Axis::Target => &self.targets,
        };
        langs
            .iter()
            .copied()
            .filter(|l| !self.line(*l, axis).is_empty())
            .collect()
    }

    pub fn coverage(&self) -> Coverage {
        let mut c = Coverage {
            transfers: self.transfers.len(),
            targets: self.targets.len(),
            populated: self.cells.len(),
            ..Coverage::default()
        };
        for reason in self.absent.values() {
            match reason {
                AbsentReason::MissingBaseline => c.missing_baseline += 1,
                AbsentReason::ZeroBaseline => c.zero_baseline += 1,
                AbsentReason::MissingRuns => c.missing_runs += 1,
                AbsentReason::PartialSteps => c.partial_steps += 1,
            }
        }
        c
    }
}

/// Transfer-score matrix of a (model, task).
///
/// A cell is populated when its target has a non-zero baseline and runs
/// exist at every selected step; its value is the mean of the per-step
/// transfer scores. Every other (transfer, target) pair is recorded as
/// absent with a reason.
pub fn transfer_matrix(
    ledger: &Ledger,
    model: &str,
    task: &str,
    selector: &StepSelector,
) -> Result<TransferMatrix> {
    let data = ledger.task_or_err(model, task)?;
    let steps = selector.resolve(ledger.step_grid())?;
    let transfers = data.transfer_langs();
    let targets = data.target_langs();
    let mut cells = BTreeMap::new();
    let mut absent = BTreeMap::new();

    for &transfer in &transfers {
        for &target in &targets {
            let key = (transfer, target);
            let Some(cell) = data.cell(transfer, target) else {
                absent.insert(key, AbsentReason::MissingRuns);
                continue;
            };
            let base = match data.baseline(target) {
                None => {
                    absent.insert(key, AbsentReason::MissingBaseline);
                    continue;
                }
                Some(0.0) => {
                    absent.insert(key, AbsentReason::ZeroBaseline);
                    continue;
                }
                Some(b) => b,
            };
            let mut sum = 0.0;
            let mut complete = true;
            for step in &steps {
                match cell.get(step) {
                    Some(reps) => {
                        check_reps(ledger, data, (model, task), reps, || {
                            format!("{model}/{task}/{transfer}->{target}@{step}")
                        })?;
                        sum += relative(reps.mean(), base);
                    }
                    None => {
                        complete = false;
                        break;
                    }
                }
            }
            if complete {
                cells.insert(key, sum / steps.len() as f64);
            } else {
                absent.insert(key, AbsentReason::PartialSteps);
            }
        }
    }
    if cells.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no populated cells for {model}/{task} at steps {steps:?}"
        )));
    }

    Ok(TransferMatrix {
        model: model.to_string(),
        task: TaskId::new(task)?,
        steps,
        transfers,
        targets,
        cells,
        absent,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Transfer,
    Target,
}

impl Axis {
    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Transfer => "transfer",
            Axis::Target => "target",
        }
    }
}

impl FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "transfer" | "donor" => Ok(Axis::Transfer),
            "target" | "recipient" => Ok(Axis::Target),
            other => Err(Error::InvalidArgument(format!("unknown axis {other:?}"))),
        }
    }
}

fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values {
        n += 1;
        sum += v;
    }
    (n > 0).then(|| sum / n as f64)
}

fn aggregate(matrix: &TransferMatrix, lang: Iso, axis: Axis) -> Result<f64> {
    mean(matrix.line(lang, axis).into_iter().map(|(_, v)| v)).ok_or_else(|| {
        Error::EmptySelection(format!(
            "{} language {lang} has no populated cells",
            axis.as_str()
        ))
    })
}

/// Mean transfer score a transfer language gives over its populated targets.
pub fn aggregated_transfer(matrix: &TransferMatrix, transfer: Iso) -> Result<f64> {
    aggregate(matrix, transfer, Axis::Transfer)
}

/// Mean transfer score a target language receives over its populated transfers.
pub fn aggregated_target(matrix: &TransferMatrix, target: Iso) -> Result<f64> {
    aggregate(matrix, target, Axis::Target)
}

fn positive_count(line: &[(Iso, f64)]) -> usize {
    line.iter().filter(|(_, v)| *v > 0.0).count()
}

/// Percentage of counterpart languages with a strictly positive transfer score.
pub fn positive_pct(matrix: &TransferMatrix, lang: Iso, axis: Axis) -> Result<f64> {
    let line = matrix.line(lang, axis);
    if line.is_empty() {
        return Err(Error::EmptySelection(format!(
            "{} language {lang} has no populated cells",
            axis.as_str()
        )));
    }
    Ok(100.0 * positive_count(&line) as f64 / line.len() as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankEntry {
    pub lang: Iso,
    pub agg_ts: f64,
    pub positive_pct: f64,
    pub rank: usize,
}

/// Orders `(lang, agg_ts, positive_pct)` by score descending, iso ascending
/// on ties, and assigns ranks 1..=N.
pub fn rank_scores(scores: impl IntoIterator<Item = (Iso, f64, f64)>) -> Vec<RankEntry> {
    let mut scores: Vec<(Iso, f64, f64)> = scores.into_iter().collect();
    scores.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    scores
        .into_iter()
        .enumerate()
        .map(|(i, (lang, agg_ts, positive_pct))| RankEntry {
            lang,
            agg_ts,
            positive_pct,
            rank: i + 1,
        })
        .collect()
}

/// Ranks transfer languages (donors) or target languages (recipients) by
/// their aggregated score.
pub fn rank_languages(matrix: &TransferMatrix, axis: Axis) -> Vec<RankEntry> {
    let scores = matrix.populated(axis).into_iter().map(|lang| {
        let line = matrix.line(lang, axis);
        let agg = mean(line.iter().map(|(_, v)| *v)).expect("populated");
        let pct = 100.0 * positive_count(&line) as f64 / line.len() as f64;
        (lang, agg, pct)
    });
    rank_scores(scores)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct RecipientCounts {
    /// Targets for which this transfer language gives the highest score.
    pub max_count: usize,
    /// Targets for which this transfer language gives the lowest score.
    pub min_count: usize,
}

/// For every target, credits each transfer language attaining the maximum
/// (minimum) transfer score with one max (min) count. Ties credit every
/// attainer.
pub fn max_min_recipient_counts(matrix: &TransferMatrix) -> Result<BTreeMap<Iso, RecipientCounts>> {
    let transfers = matrix.populated(Axis::Transfer);
    if transfers.len() < 2 {
        return Err(Error::Insufficient(format!(
            "recipient counts need at least 2 transfer languages, found {}",
            transfers.len()
        )));
    }
    let mut counts: BTreeMap<Iso, RecipientCounts> =
        transfers.iter().map(|t| (*t, RecipientCounts::default())).collect();
    for target in matrix.targets() {
        let column: Vec<(Iso, f64)> = matrix.column(*target).collect();
        if column.is_empty() {
            continue;
        }
        let max = column.iter().map(|(_, v)| *v).fold(f64::NEG_INFINITY, f64::max);
        let min = column.iter().map(|(_, v)| *v).fold(f64::INFINITY, f64::min);
        for (transfer, v) in column {
            let entry = counts.get_mut(&transfer).expect("populated transfer");
            if v == max {
                entry.max_count += 1;
            }
            if v == min {
                entry.min_count += 1;
            }
        }
    }
    Ok(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceStats {
    pub transfer: Iso,
    pub mean_ts: f64,
    /// Population variance of the per-target transfer scores in percent
    /// units (ts × 100).
    pub variance: f64,
    pub max_count: usize,
    pub min_count: usize,
}

fn population_variance(values: &[f64]) -> f64 {
    let m = values.iter().sum::<f64>() / values.len() as f64;
    values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / values.len() as f64
}

fn stats_for(
    matrix: &TransferMatrix,
    transfer: Iso,
    counts: &BTreeMap<Iso, RecipientCounts>,
) -> Result<VarianceStats> {
    let row: Vec<f64> = matrix.row(transfer).map(|(_, v)| v).collect();
    if row.len() < 2 {
        return Err(Error::Insufficient(format!(
            "variance of {transfer} needs at least 2 targets, found {}",
            row.len()
        )));
    }
    let pct: Vec<f64> = row.iter().map(|v| v * 100.0).collect();
    let c = counts.get(&transfer).copied().unwrap_or_default();
    Ok(VarianceStats {
        transfer,
        mean_ts: row.iter().sum::<f64>() / row.len() as f64,
        variance: population_variance(&pct),
        max_count: c.max_count,
        min_count: c.min_count,
    })
}

pub fn variance_stats(matrix: &TransferMatrix, transfer: Iso) -> Result<VarianceStats> {
    let counts = max_min_recipient_counts(matrix)?;
    stats_for(matrix, transfer, &counts)
}

/// Variance statistics of every transfer language with at least two
/// targets, sorted by variance descending (iso ascending on ties).
pub fn variance_table(matrix: &TransferMatrix) -> Result<Vec<VarianceStats>> {
    let counts = max_min_recipient_counts(matrix)?;
    let mut table = matrix
        .populated(Axis::Transfer)
        .into_iter()
        .filter(|t| matrix.row(*t).nth(1).is_some())
        .map(|t| stats_for(matrix, t, &counts))
        .collect::<Result<Vec<_>>>()?;
    table.sort_by(|a, b| b.variance.total_cmp(&a.variance).then(a.transfer.cmp(&b.transfer)));
    Ok(table)
}

/// Character of a transfer language judged by how many targets it gives
/// the maximum and the minimum transfer score.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceProfile {
    /// Boosts some targets and strongly hurts others.
    PlusAndMinus,
    /// Mostly helps, strongly hurts only a few.
    MostlyPlus,
    /// Mostly hurts, strongly helps only a few.
    MostlyMinus,
    Neutral,
}

impl VarianceProfile {
    pub const DEFAULT_THRESHOLD: usize = 3;

    pub fn classify(max_count: usize, min_count: usize, threshold: usize) -> Self {
        match (max_count >= threshold, min_count >= threshold) {
            (true, true) => VarianceProfile::PlusAndMinus,
            (true, false) => VarianceProfile::MostlyPlus,
            (false, true) => VarianceProfile::MostlyMinus,
            (false, false) => VarianceProfile::Neutral,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            VarianceProfile::PlusAndMinus => "+ and -",
            VarianceProfile::MostlyPlus => "+",
            VarianceProfile::MostlyMinus => "-",
            VarianceProfile::Neutral => "neutral",
        }
    }
}

impl fmt::Display for VarianceProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

pub fn variance_profile(stats: &VarianceStats, threshold: usize) -> VarianceProfile {
    VarianceProfile::classify(stats.max_count, stats.min_count, threshold)
}

/// Whether continued training or language interaction beat the baseline.
/// `None` when the compared score is absent.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ImprovementFlags {
    /// Smallest step beats the baseline.
    pub first_step: Option<bool>,
    /// Largest step beats the baseline.
    pub last_step: Option<bool>,
    /// Any of the 1-, 2- or 3-adapter interaction scores beats the baseline.
    pub interaction: Option<bool>,
}

pub fn improvement_flags(
    base: f64,
    first_step: Option<f64>,
    last_step: Option<f64>,
    interactions: [Option<f64>; 3],
) -> ImprovementFlags {
    let beats = |s: Option<f64>| s.map(|s| s > base);
    let present: Vec<f64> = interactions.iter().flatten().copied().collect();
    ImprovementFlags {
        first_step: beats(first_step),
        last_step: beats(last_step),
        interaction: (!present.is_empty()).then(|| present.iter().any(|s| *s > base)),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProgressionPoint {
    pub steps: u32,
    pub mean_ts: f64,
    /// Population standard deviation of the per-repetition relative improvements.
    pub sd_ts: f64,
}

/// Per-step mean and spread of the per-repetition relative improvements of
/// one cell, in grid order.
pub fn progression_series(
    ledger: &Ledger,
    model: &str,
    task: &str,
    transfer: Iso,
    target: Iso,
) -> Result<Vec<ProgressionPoint>> {
    let data = ledger.task_or_err(model, task)?;
    let base = baseline_for(data, model, task, target)?;
    let cell = data
        .cell(transfer, target)
        .ok_or_else(|| Error::MissingCell(format!("{model}/{task}/{transfer}->{target}")))?;
    let mut points = Vec::with_capacity(cell.len());
    for step in ledger.step_grid() {
        let Some(reps) = cell.get(step) else { continue };
        let rel: Vec<f64> = reps.scores().iter().map(|s| relative(*s, base)).collect();
        let mean_ts = rel.iter().sum::<f64>() / rel.len() as f64;
        let sd_ts = population_variance(&rel).sqrt();
        points.push(ProgressionPoint {
            steps: *step,
            mean_ts,
            sd_ts,
        });
    }
    if points.is_empty() {
        return Err(Error::MissingCell(format!(
            "{model}/{task}/{transfer}->{target} has no steps in the grid"
        )));
    }
    Ok(points)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TaskImprovement {
    pub task: TaskId,
    pub improved: usize,
    pub evaluated: usize,
    pub pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SustainedImprovement {
    pub steps: u32,
    pub per_task: Vec<TaskImprovement>,
    /// Macro average of the per-task percentages.
    pub mean_pct: f64,
}

/// Percentage of transfer languages whose self-evaluation (transfer ==
/// target) has a positive transfer score at `steps`. Computed per task,
/// then macro-averaged over tasks that have self-evaluation cells.
pub fn sustained_improvement_pct(
    ledger: &Ledger,
    model: &str,
    tasks: &[TaskId],
    steps: u32,
) -> Result<SustainedImprovement> {
    let mut per_task = Vec::new();
    for task in tasks {
        let Some(data) = ledger.task(model, task.as_str()) else {
            continue;
        };
        let mut improved = 0;
        let mut evaluated = 0;
        for lang in data.transfer_langs() {
            let Some(reps) = data.reps(lang, lang, steps) else {
                continue;
            };
            let Some(base) = data.baseline(lang).filter(|b| *b != 0.0) else {
                continue;
            };
            evaluated += 1;
            if relative(reps.mean(), base) > 0.0 {
                improved += 1;
            }
        }
        if evaluated > 0 {
            per_task.push(TaskImprovement {
                task: task.clone(),
                improved,
                evaluated,
                pct: 100.0 * improved as f64 / evaluated as f64,
            });
        }
    }
    if per_task.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no self-evaluation cells for {model} at step {steps}"
        )));
    }
    let mean_pct = per_task.iter().map(|t| t.pct).sum::<f64>() / per_task.len() as f64;
    Ok(SustainedImprovement {
        steps,
        per_task,
        mean_pct,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GroupMean {
    pub mean: f64,
    pub count: usize,
}

/// Mean transfer score grouped by whether the transfer and the target
/// language were seen in pretraining.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct SeenUnseenTable {
    /// Indexed `[transfer_seen][target_seen]`, `false` = 0.
    pub cells: [[Option<GroupMean>; 2]; 2],
}

impl SeenUnseenTable {
    pub fn get(&self, transfer_seen: bool, target_seen: bool) -> Option<GroupMean> {
        self.cells[transfer_seen as usize][target_seen as usize]
    }
}

pub fn seen_unseen_matrix(matrix: &TransferMatrix, registry: &Registry) -> SeenUnseenTable {
    let mut sums = [[(0.0f64, 0usize); 2]; 2];
    for (transfer, target, v) in matrix.cells() {
        let slot = &mut sums[registry.is_seen(transfer) as usize][registry.is_seen(target) as usize];
        slot.0 += v;
        slot.1 += 1;
    }
    let mut table = SeenUnseenTable::default();
    for (i, row) in sums.iter().enumerate() {
        for (j, (sum, count)) in row.iter().enumerate() {
            if *count > 0 {
                table.cells[i][j] = Some(GroupMean {
                    mean: sum / *count as f64,
                    count: *count,
                });
            }
        }
    }
    table
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RecipientBucket {
    /// No transfer language helps.
    Never,
    /// Up to 90% of transfer languages help.
    Low,
    /// More than 90% but not all help.
    High,
    /// Every transfer language helps.
    Universal,
}

impl RecipientBucket {
    pub fn from_counts(positive: usize, total: usize) -> Self {
        if positive == 0 {
            RecipientBucket::Never
        } else if positive == total {
            RecipientBucket::Universal
        } else if 10 * positive <= 9 * total {
            RecipientBucket::Low
        } else {
            RecipientBucket::High
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RecipientBucket::Never => "never",
            RecipientBucket::Low => "low",
            RecipientBucket::High => "high",
            RecipientBucket::Universal => "universal",
        }
    }
}

impl fmt::Display for RecipientBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecipientSummary {
    pub target: Iso,
    pub agg_ts: f64,
    pub positive_pct: f64,
    pub positive: usize,
    pub total: usize,
    pub bucket: RecipientBucket,
}

pub fn recipient_summary(matrix: &TransferMatrix, target: Iso) -> Result<RecipientSummary> {
    let column: Vec<(Iso, f64)> = matrix.column(target).collect();
    if column.is_empty() {
        return Err(Error::EmptySelection(format!("target {target} has no populated cells")));
    }
    let positive = positive_count(&column);
    let total = column.len();
    Ok(RecipientSummary {
        target,
        agg_ts: column.iter().map(|(_, v)| v).sum::<f64>() / total as f64,
        positive_pct: 100.0 * positive as f64 / total as f64,
        positive,
        total,
        bucket: RecipientBucket::from_counts(positive, total),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxRecipient {
    pub steps: u32,
    pub target: Iso,
    pub ts: f64,
}

/// Target receiving the highest transfer score from `transfer` at each grid
/// step (iso ascending on ties).
pub fn max_recipients(
    ledger: &Ledger,
    model: &str,
    task: &str,
    transfer: Iso,
) -> Result<Vec<MaxRecipient>> {
    let data = ledger.task_or_err(model, task)?;
    let mut out = Vec::new();
    for &step in ledger.step_grid() {
        let mut best: Option<MaxRecipient> = None;
        for ((t, target), cell) in data.cells() {
            if t != transfer {
                continue;
            }
            let (Some(reps), Some(base)) = (cell.get(&step), data.baseline(target)) else {
                continue;
            };
            if base == 0.0 {
                continue;
            }
            let ts = relative(reps.mean(), base);
            if best.as_ref().is_none_or(|b| ts > b.ts) {
                best = Some(MaxRecipient {
                    steps: step,
                    target,
                    ts,
                });
            }
        }
        out.extend(best);
    }
    if out.is_empty() {
        return Err(Error::EmptySelection(format!(
            "transfer language {transfer} has no scored cells for {model}/{task}"
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ledger::{BaselineRecord, LanguageInfo, LoadOptions, RunRecord};

    fn iso(s: &str) -> Iso {
        Iso::new(s).unwrap()
    }

    fn task() -> TaskId {
        TaskId::new("dep").unwrap()
    }

    fn registry(codes: &[(&str, bool)]) -> Registry {
        Registry::new(codes.iter().map(|(c, seen)| LanguageInfo {
            iso: iso(c),
            family: "f".into(),
            genus: "g".into(),
            script: "Latn".into(),
            seen: *seen,
        }))
        .unwrap()
    }

    fn ledger_with(base: f64, reps: &[(u32, &[f64])]) -> Ledger {
        let reg = registry(&[("aaa", true), ("bbb", true)]);
        let baselines = [BaselineRecord {
            model: "mbert".into(),
            task: task(),
            target: iso("bbb"),
            score: base,
        }];
        let runs: Vec<RunRecord> = reps
            .iter()
            .flat_map(|(steps, scores)| {
                scores.iter().enumerate().map(move |(rep, score)| RunRecord {
                    model: "mbert".into(),
                    task: task(),
                    transfer: iso("aaa"),
                    target: iso("bbb"),
                    steps: *steps,
                    rep: rep as u32,
                    score: *score,
                })
            })
            .collect();
        Ledger::from_records(reg, baselines, runs, [], &LoadOptions::default()).unwrap()
    }

    fn ts(ledger: &Ledger, steps: u32) -> f64 {
        transfer_score(ledger, "mbert", "dep", iso("aaa"), iso("bbb"), steps)
            .unwrap()
            .value
    }

    fn matrix(cells: &[(&str, &str, f64)]) -> TransferMatrix {
        TransferMatrix::from_cells(
            "mbert",
            task(),
            vec![1],
            cells.iter().map(|(a, b, v)| ((iso(a), iso(b)), *v)),
        )
    }

    #[test]
    fn ts_no_change_is_zero() {
        let l = ledger_with(75.0, &[(1, &[75.0; 10])]);
        assert_eq!(ts(&l, 1), 0.0);
    }

    #[test]
    fn ts_mean_over_reps() {
        let reps = [82.0, 78.0, 84.0, 80.0, 81.0, 79.0, 83.0, 77.0, 85.0, 81.0];
        let oracle_mean = reps.iter().sum::<f64>() / 10.0;
        assert_eq!(oracle_mean, 81.0);
        let l = ledger_with(80.0, &[(1, &reps)]);
        assert!((ts(&l, 1) - 0.0125).abs() < 1e-12);
    }

    #[test]
    fn ts_negative_transfer() {
        let l = ledger_with(50.0, &[(1, &[40.0; 10])]);
        assert!((ts(&l, 1) + 0.20).abs() < 1e-12);
    }

    #[test]
    fn ts_errors() {
        let l = ledger_with(0.0, &[(1, &[40.0])]);
        let err = transfer_score(&l, "mbert", "dep", iso("aaa"), iso("bbb"), 1).unwrap_err();
        assert!(matches!(err, Error::ZeroBaseline { .. }));
        let err = transfer_score(&l, "mbert", "dep", iso("bbb"), iso("aaa"), 1).unwrap_err();
        assert!(matches!(err, Error::MissingBaseline { .. }));
        let l = ledger_with(50.0, &[(1, &[40.0])]);
        let err = transfer_score(&l, "mbert", "dep", iso("aaa"), iso("bbb"), 10).unwrap_err();
        assert!(matches!(err, Error::MissingCell(_)));
    }

    #[test]
    fn matrix_step_selection() {
        // per-step ts 0.3, 0.0, -0.3 at base 50
        let l = ledger_with(50.0, &[(1, &[65.0]), (10, &[50.0]), (100, &[35.0]), (1000, &[60.0])]);
        let m = transfer_matrix(&l, "mbert", "dep", &StepSelector::Short).unwrap();
        assert_eq!(m.steps(), &[1, 10, 100]);
        let v = m.get(iso("aaa"), iso("bbb")).unwrap();
        assert!(v.abs() < 1e-12, "{v}");

        let m = transfer_matrix(&l, "mbert", "dep", &StepSelector::Single(1000)).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.get(iso("aaa"), iso("bbb")).unwrap(), ts(&l, 1000));
    }

    #[test]
    fn matrix_flags_absent_cells() {
        let l = ledger_with(50.0, &[(1, &[55.0])]);
        let m = transfer_matrix(&l, "mbert", "dep", &StepSelector::Single(1)).unwrap();
        assert_eq!(m.absent_reason(iso("aaa"), iso("bbb")), None);
        assert!(transfer_matrix(&l, "mbert", "dep", &StepSelector::Single(10)).is_err());
        assert!(transfer_matrix(&l, "mbert", "dep", &StepSelector::Mean(vec![1, 10])).is_err());
        let c = m.coverage();
        assert_eq!((c.populated, c.transfers, c.targets), (1, 1, 1));
    }

    #[test]
    fn selector_parsing() {
        assert_eq!("1000".parse::<StepSelector>().unwrap(), StepSelector::Single(1000));
        assert_eq!(
            "1,10,100".parse::<StepSelector>().unwrap(),
            StepSelector::Mean(vec![1, 10, 100])
        );
        assert_eq!("short".parse::<StepSelector>().unwrap(), StepSelector::Short);
        assert!("0".parse::<StepSelector>().is_err());
        assert!("x".parse::<StepSelector>().is_err());
        assert!(StepSelector::Short.resolve(&[1000]).is_err());
    }

    #[test]
    fn aggregation_examples() {
        let m = matrix(&[("aaa", "xxa", 0.33)]);
        assert_eq!(aggregated_transfer(&m, iso("aaa")).unwrap(), 0.33);

        let m = matrix(&[("aaa", "xxa", 0.2), ("aaa", "xxb", -0.4)]);
        assert!((aggregated_transfer(&m, iso("aaa")).unwrap() + 0.1).abs() < 1e-12);

        let m = matrix(&[("aaa", "xxa", 0.37), ("aaa", "xxb", -0.37)]);
        assert_eq!(aggregated_transfer(&m, iso("aaa")).unwrap(), 0.0);

        let m = matrix(&[("aaa", "ttt", 0.1), ("bbb", "ttt", 0.1), ("ccc", "ttt", 0.1)]);
        assert!((aggregated_target(&m, iso("ttt")).unwrap() - 0.1).abs() < 1e-12);

        let m = matrix(&[("aaa", "ttt", 0.5), ("bbb", "ttt", -0.1)]);
        assert!((aggregated_target(&m, iso("ttt")).unwrap() - 0.2).abs() < 1e-12);
        assert!(aggregated_target(&m, iso("zzz")).is_err());
    }

    #[test]
    fn positive_pct_is_strict() {
        let m = matrix(&[
            ("aaa", "xxa", 0.1),
            ("aaa", "xxb", 0.2),
            ("aaa", "xxc", 0.0),
            ("aaa", "xxd", -0.1),
            ("aaa", "xxe", -0.3),
        ]);
        assert_eq!(positive_pct(&m, iso("aaa"), Axis::Transfer).unwrap(), 40.0);
        let all = matrix(&[("aaa", "xxa", 0.1), ("aaa", "xxb", 0.2)]);
        assert_eq!(positive_pct(&all, iso("aaa"), Axis::Transfer).unwrap(), 100.0);
        let none = matrix(&[("aaa", "xxa", -0.3), ("aaa", "xxb", -0.4)]);
        assert_eq!(positive_pct(&none, iso("aaa"), Axis::Transfer).unwrap(), 0.0);
        assert!(positive_pct(&none, iso("xxa"), Axis::Transfer).is_err());
    }

    #[test]
    fn ranking_order_and_ties() {
        let ranked = rank_scores([
            (iso("pcm"), 0.13, 31.6),
            (iso("mya"), 0.33, 40.4),
            (iso("ell"), 0.15, 31.6),
        ]);
        let order: Vec<_> = ranked.iter().map(|e| e.lang.to_string()).collect();
        assert_eq!(order, ["mya", "ell", "pcm"]);
        assert_eq!(ranked.iter().map(|e| e.rank).collect::<Vec<_>>(), [1, 2, 3]);

        let m = matrix(&[("bbb", "xxa", 0.1), ("aaa", "xxa", 0.1)]);
        let ranked = rank_languages(&m, Axis::Transfer);
        assert_eq!(ranked[0].lang, iso("aaa"));
        assert_eq!(ranked[1].lang, iso("bbb"));

        let m = matrix(&[("aaa", "xxa", -0.1)]);
        assert_eq!(rank_languages(&m, Axis::Transfer)[0].rank, 1);
    }

    #[test]
    fn recipient_counts() {
        let m = matrix(&[("aaa", "ttt", 0.2), ("bbb", "ttt", -0.1)]);
        let c = max_min_recipient_counts(&m).unwrap();
        assert_eq!(c[&iso("aaa")], RecipientCounts { max_count: 1, min_count: 0 });
        assert_eq!(c[&iso("bbb")], RecipientCounts { max_count: 0, min_count: 1 });

        let tie = matrix(&[("aaa", "ttt", 0.2), ("bbb", "ttt", 0.2), ("ccc", "ttt", 0.0)]);
        let c = max_min_recipient_counts(&tie).unwrap();
        assert_eq!(c[&iso("aaa")].max_count, 1);
        assert_eq!(c[&iso("bbb")].max_count, 1);
        assert_eq!(c[&iso("ccc")].min_count, 1);

        let single = matrix(&[("aaa", "ttt", 0.2)]);
        assert!(max_min_recipient_counts(&single).is_err());
    }

    #[test]
    fn variance_examples() {
        let constant = matrix(&[
            ("aaa", "xxa", 0.05),
            ("aaa", "xxb", 0.05),
            ("bbb", "xxa", 0.0),
        ]);
        assert_eq!(variance_stats(&constant, iso("aaa")).unwrap().variance, 0.0);

        let m = matrix(&[("aaa", "xxa", 0.10), ("aaa", "xxb", -0.10), ("bbb", "xxa", 0.0)]);
        assert!((variance_stats(&m, iso("aaa")).unwrap().variance - 100.0).abs() < 1e-9);

        let m = matrix(&[
            ("aaa", "xxa", 0.01),
            ("aaa", "xxb", 0.02),
            ("aaa", "xxc", 0.03),
            ("bbb", "xxa", 0.0),
        ]);
        assert!((variance_stats(&m, iso("aaa")).unwrap().variance - 2.0 / 3.0).abs() < 1e-9);
        assert!(variance_stats(&m, iso("bbb")).is_err());
    }

    #[test]
    fn variance_profiles() {
        use VarianceProfile::*;
        let t = VarianceProfile::DEFAULT_THRESHOLD;
        assert_eq!(VarianceProfile::classify(10, 10, t), PlusAndMinus);
        assert_eq!(VarianceProfile::classify(13, 2, t), MostlyPlus);
        assert_eq!(VarianceProfile::classify(1, 11, t), MostlyMinus);
        assert_eq!(VarianceProfile::classify(0, 0, t), Neutral);
        assert_eq!(VarianceProfile::classify(3, 2, t), MostlyPlus);
        assert_eq!(VarianceProfile::classify(2, 2, t), Neutral);
    }

    #[test]
    fn flags_examples() {
        let ell = improvement_flags(92.82, Some(92.73), Some(91.46), [Some(91.97), Some(91.91), Some(91.98)]);
        assert_eq!(
            (ell.first_step, ell.last_step, ell.interaction),
            (Some(false), Some(false), Some(false))
        );
        let kmr = improvement_flags(31.94, Some(32.44), Some(45.30), [Some(32.54), None, None]);
        assert_eq!(
            (kmr.first_step, kmr.last_step, kmr.interaction),
            (Some(true), Some(true), Some(true))
        );
        let eq = improvement_flags(50.0, Some(50.0), Some(50.0), [Some(50.0); 3]);
        assert_eq!(
            (eq.first_step, eq.last_step, eq.interaction),
            (Some(false), Some(false), Some(false))
        );
        let none = improvement_flags(50.0, None, None, [None; 3]);
        assert_eq!(none, ImprovementFlags::default());
    }

    #[test]
    fn progression_examples() {
        let l = ledger_with(80.0, &[(1, &[82.0, 82.0]), (10, &[81.0, 79.0])]);
        let series = progression_series(&l, "mbert", "dep", iso("aaa"), iso("bbb")).unwrap();
        assert_eq!(series.len(), 2);
        assert_eq!(series[0].sd_ts, 0.0);
        assert!((series[0].mean_ts - 0.025).abs() < 1e-12);
        assert_eq!(series[1].steps, 10);
        assert!(series[1].mean_ts.abs() < 1e-12);
        assert!((series[1].sd_ts - 0.0125).abs() < 1e-12);

        let l = ledger_with(80.0, &[(1, &[90.0])]);
        let series = progression_series(&l, "mbert", "dep", iso("aaa"), iso("bbb")).unwrap();
        assert_eq!(series[0].sd_ts, 0.0);
        assert!(progression_series(&l, "mbert", "dep", iso("bbb"), iso("aaa")).is_err());
    }

    #[test]
    fn recipient_buckets() {
        assert_eq!(RecipientBucket::from_counts(38, 38), RecipientBucket::Universal);
        assert_eq!(RecipientBucket::from_counts(0, 38), RecipientBucket::Never);
        assert_eq!(RecipientBucket::from_counts(35, 38), RecipientBucket::High);
        assert_eq!(RecipientBucket::from_counts(9, 10), RecipientBucket::Low);
        assert_eq!(RecipientBucket::from_counts(1, 38), RecipientBucket::Low);

        let cells: Vec<(String, &str, f64)> = (0..38)
            .map(|i| (format!("a{}{}", (b'a' + i / 26) as char, (b'a' + i % 26) as char), "ttt", if i < 35 { 0.1 } else { -0.1 }))
            .collect();
        let m = TransferMatrix::from_cells(
            "mbert",
            task(),
            vec![1],
            cells.iter().map(|(a, b, v)| ((iso(a), iso(b)), *v)),
        );
        let s = recipient_summary(&m, iso("ttt")).unwrap();
        assert_eq!(s.bucket, RecipientBucket::High);
        assert_eq!(format!("{:.1}", s.positive_pct), "92.1");
    }

    #[test]
    fn seen_unseen_groups() {
        let reg = registry(&[("aaa", true), ("bbb", false), ("ccc", true), ("ddd", false)]);
        let m = matrix(&[
            ("aaa", "ccc", 0.2),
            ("aaa", "ddd", 0.1),
            ("bbb", "ddd", 0.1),
            ("bbb", "ccc", -0.2),
            ("bbb", "bbb", 0.3),
        ]);
        let t = seen_unseen_matrix(&m, &reg);
        assert_eq!(t.get(true, true).unwrap().count, 1);
        let uu = t.get(false, false).unwrap();
        assert_eq!(uu.count, 2);
        assert!((uu.mean - 0.2).abs() < 1e-12);

        let all_seen = matrix(&[("aaa", "ccc", 0.2)]);
        let t = seen_unseen_matrix(&all_seen, &reg);
        assert!(t.get(true, true).is_some());
        assert!(t.get(false, true).is_none() && t.get(true, false).is_none() && t.get(false, false).is_none());
    }

    #[test]
    fn sustained_counts_self_cells() {
        let reg = registry(&[("aaa", true), ("bbb", true)]);
        let mk = |lang: &str, base: f64, score: f64| {
            (
                BaselineRecord { model: "m".into(), task: task(), target: iso(lang), score: base },
                RunRecord {
                    model: "m".into(),
                    task: task(),
                    transfer: iso(lang),
                    target: iso(lang),
                    steps: 1000,
                    rep: 0,
                    score,
                },
            )
        };
        let (b1, r1) = mk("aaa", 50.0, 51.0);
        let (b2, r2) = mk("bbb", 50.0, 50.0);
        let l = Ledger::from_records(reg, [b1, b2], [r1, r2], [], &LoadOptions::default()).unwrap();
        let s = sustained_improvement_pct(&l, "m", &[task()], 1000).unwrap();
        assert_eq!(s.mean_pct, 50.0);
        assert!(sustained_improvement_pct(&l, "m", &[task()], 1).is_err());
    }
}
