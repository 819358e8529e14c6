use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use super::figures::{HeatmapReport, ProgressionReport, ScatterReport, ViolinReport};
use super::tables::{
    comparison_table, CorrelationReport, CoverageReport, MaxRecipientReport, MaxRecipientRow,
    RankReport, RecipientReport, SustainedReport, VarianceReport,
};
use super::{render, OutputFormat, Report};
use crate::error::{Error, Result};
use crate::interference::{scatter_points, TaskScope, TieRule};
use crate::ledger::{Iso, Ledger, TaskId};
use crate::stats::task_correlation_matrix;
use crate::transfer::{
    aggregated_transfer, max_recipients, rank_languages, seen_unseen_matrix,
    sustained_improvement_pct, transfer_matrix, variance_table, Axis, StepSelector,
    TransferMatrix, VarianceProfile,
};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportAllOptions {
    pub selector: StepSelector,
    /// Worker threads; 0 uses the rayon default.
    pub threads: usize,
    pub tie: TieRule,
    pub threshold: usize,
}

impl Default for ReportAllOptions {
    fn default() -> Self {
        ReportAllOptions {
            selector: StepSelector::Short,
            threads: 0,
            tie: TieRule::Negative,
            threshold: VarianceProfile::DEFAULT_THRESHOLD,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ReportSummary {
    /// Written files relative to the output directory, sorted.
    pub written: Vec<PathBuf>,
    /// `(report, reason)` for reports the data did not support.
    pub skipped: Vec<(String, String)>,
}

type Output = (String, std::result::Result<String, String>);

fn emit(out: &mut Vec<Output>, stem: String, report: std::result::Result<&dyn Report, String>, formats: &[OutputFormat]) {
    match report {
        Ok(r) => {
            for f in formats {
                out.push((format!("{stem}.{}", f.extension()), render(r, *f).map_err(|e| e.to_string())));
            }
        }
        Err(e) => out.push((stem, Err(e))),
    }
}

fn dyn_report<R: Report>(r: &Result<R>) -> std::result::Result<&dyn Report, String> {
    r.as_ref().map(|r| r as &dyn Report).map_err(|e| e.to_string())
}

fn task_outputs(ledger: &Ledger, model: &str, task: &TaskId, opts: &ReportAllOptions) -> Vec<Output> {
    use OutputFormat::*;
    let dir = format!("{model}/{task}");
    let t = task.as_str();
    let registry = ledger.registry();
    let mut out = Vec::new();

    emit(
        &mut out,
        format!("{dir}/comparison"),
        dyn_report(&comparison_table(ledger, model, t)),
        &[Csv, Md],
    );
    emit(
        &mut out,
        format!("{dir}/progression"),
        dyn_report(&ProgressionReport::new(ledger, model, t, &[])),
        &[Csv, Svg],
    );
    for arity in [2, 3] {
        let report = scatter_points(ledger, model, &TaskScope::Single(task.clone()), arity, opts.tie)
            .map(|points| ScatterReport { arity, points });
        emit(
            &mut out,
            format!("{dir}/interference_{arity}"),
            dyn_report(&report),
            &[Csv, Svg],
        );
    }

    let matrix = match transfer_matrix(ledger, model, t, &opts.selector) {
        Ok(m) => m,
        Err(e) => {
            out.push((format!("{dir}/matrix"), Err(e.to_string())));
            return out;
        }
    };
    emit(&mut out, format!("{dir}/coverage"), Ok(&CoverageReport::new(&matrix)), &[Csv, Md]);
    for axis in [Axis::Transfer, Axis::Target] {
        let ranks = RankReport::new(&rank_languages(&matrix, axis), registry, axis);
        emit(&mut out, format!("{dir}/rank_{}", axis.as_str()), Ok(&ranks), &[Csv, Md]);
    }
    emit(
        &mut out,
        format!("{dir}/recipients"),
        dyn_report(&RecipientReport::new(&matrix, registry)),
        &[Csv, Md],
    );
    let variance = variance_table(&matrix).map(|s| VarianceReport::new(&s, registry, opts.threshold));
    emit(
        &mut out,
        format!("{dir}/variance"),
        dyn_report(&variance),
        &[Csv, Md],
    );
    emit(
        &mut out,
        format!("{dir}/violin"),
        dyn_report(&ViolinReport::new(&matrix, registry)),
        &[Csv, Svg],
    );
    let heatmap = HeatmapReport {
        table: seen_unseen_matrix(&matrix, registry),
    };
    emit(&mut out, format!("{dir}/seen_unseen"), Ok(&heatmap), &[Csv, Svg]);

    let max_rows: Result<Vec<MaxRecipientRow>> = matrix
        .populated(Axis::Transfer)
        .into_iter()
        .map(|transfer| {
            max_recipients(ledger, model, t, transfer)
                .map(|best| best.into_iter().map(|b| MaxRecipientRow { transfer, best: b }).collect::<Vec<_>>())
        })
        .collect::<Result<Vec<_>>>()
        .map(|v| v.into_iter().flatten().collect());
    let max_report = max_rows.map(|rows| MaxRecipientReport { rows });
    emit(
        &mut out,
        format!("{dir}/max_recipients"),
        dyn_report(&max_report),
        &[Csv],
    );
    out
}

fn model_outputs(ledger: &Ledger, model: &str, matrices: &[(TaskId, Option<TransferMatrix>)]) -> Vec<Output> {
    use OutputFormat::*;
    let mut out = Vec::new();
    let tasks: Vec<TaskId> = ledger.tasks(model).cloned().collect();

    let grid = ledger.step_grid();
    let sustained: Result<Vec<_>> = [grid.first(), grid.last()]
        .into_iter()
        .flatten()
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .map(|s| sustained_improvement_pct(ledger, model, &tasks, *s))
        .collect();
    let sustained = sustained.map(|results| SustainedReport { results });
    emit(
        &mut out,
        format!("{model}/sustained"),
        dyn_report(&sustained),
        &[Csv, Json],
    );

    let scores: Vec<(TaskId, BTreeMap<Iso, f64>)> = matrices
        .iter()
        .filter_map(|(t, m)| {
            let m = m.as_ref()?;
            let s = m
                .populated(Axis::Transfer)
                .into_iter()
                .map(|l| (l, aggregated_transfer(m, l).expect("populated")))
                .collect();
            Some((t.clone(), s))
        })
        .collect();
    let corr = task_correlation_matrix(&scores).map(|matrix| CorrelationReport { matrix });
    emit(
        &mut out,
        format!("{model}/correlation"),
        dyn_report(&corr),
        &[Csv, Md],
    );
    out
}

/// Renders every report for every (model, task) of the ledger into `out`.
///
/// Reports are computed in parallel; results are collected in a fixed
/// order and written serially, so the directory contents do not depend on
/// the thread count. `index.csv` lists every file and every skipped report.
pub fn report_all(ledger: &Ledger, out: &Path, opts: &ReportAllOptions) -> Result<ReportSummary> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.threads)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;

    let jobs: Vec<(String, TaskId)> = ledger
        .models()
        .flat_map(|m| ledger.tasks(m).map(move |t| (m.to_string(), t.clone())))
        .collect();
    if jobs.is_empty() {
        return Err(Error::EmptySelection("ledger has no model/task records".into()));
    }

    let outputs: Vec<Output> = pool.install(|| {
        let mut outputs: Vec<Output> = jobs
            .par_iter()
            .map(|(m, t)| task_outputs(ledger, m, t, opts))
            .collect::<Vec<_>>()
            .into_iter()
            .flatten()
            .collect();
        let models: Vec<&str> = ledger.models().collect();
        let per_model: Vec<Vec<Output>> = models
            .par_iter()
            .map(|m| {
                let matrices: Vec<(TaskId, Option<TransferMatrix>)> = ledger
                    .tasks(m)
                    .map(|t| (t.clone(), transfer_matrix(ledger, m, t.as_str(), &opts.selector).ok()))
                    .collect();
                model_outputs(ledger, m, &matrices)
            })
            .collect();
        outputs.extend(per_model.into_iter().flatten());
        outputs
    });

    let mut sorted: BTreeMap<String, std::result::Result<String, String>> = BTreeMap::new();
    for (name, content) in outputs {
        sorted.insert(name, content);
    }

    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;
    let mut summary = ReportSummary::default();
    let mut index = String::from("file,status\n");
    for (name, content) in sorted {
        match content {
            Ok(text) => {
                let path = out.join(&name);
                if let Some(parent) = path.parent() {
                    fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                }
                fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
                index.push_str(&format!("{name},ok\n"));
                summary.written.push(PathBuf::from(name));
            }
            Err(e) => {
                let reason = e.replace(['\n', ','], " ");
                index.push_str(&format!("{name},skipped: {reason}\n"));
                summary.skipped.push((name, e));
            }
        }
    }
    let index_path = out.join("index.csv");
    fs::write(&index_path, index).map_err(|e| Error::io(&index_path, e))?;
    summary.written.push(PathBuf::from("index.csv"));
    Ok(summary)
}
