use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use transferscope_core::interference::{
    pattern_counts, project_bilingual, project_counts, project_trilingual, scatter_points,
    InterferenceCounts, PatternOptions,
};
use transferscope_core::ledger::{load_ledger_dir, synth_ledger, write_ledger_dir, LedgerFormat, SynthConfig};
use transferscope_core::report::{
    comparison_table, parse_comparison_csv, render, report_all, ComparisonRow, ComparisonTable,
    CorrelationReport, HeatmapReport, ProgressionReport, RankReport, RecipientReport, Report,
    ReportAllOptions, ScatterReport, Table, VarianceReport,
};
use transferscope_core::stats::task_correlation_matrix;
use transferscope_core::transfer::{
    aggregated_transfer, rank_languages, seen_unseen_matrix, transfer_matrix, transfer_score, variance_table,
};
use transferscope_core::{
    Axis, Error, Iso, Ledger, LoadOptions, OutputFormat, StepSelector, TaskId, TaskScope, TieRule, VarianceProfile,
};

/// Cross-lingual transfer analysis over experiment score ledgers.
#[derive(Parser, Debug)]
#[command(name = "transferscope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct LedgerArgs {
    /// Ledger directory holding languages, baselines, runs and interactions files.
    #[arg(long, env = "TRANSFERSCOPE_LEDGER")]
    ledger: PathBuf,
    /// Treat repetition-count irregularities as errors (also TRANSFERSCOPE_STRICT=1).
    #[arg(long)]
    strict: bool,
}

impl LedgerArgs {
    fn load(&self) -> Result<Ledger, Error> {
        let mut options = LoadOptions::from_env();
        options.strict |= self.strict;
        let ledger = load_ledger_dir(&self.ledger, &options)?;
        for w in ledger.warnings() {
            eprintln!("warning: {w}");
        }
        Ok(ledger)
    }
}

#[derive(Args, Debug, Clone)]
struct Cell {
    #[arg(long)]
    model: String,
    #[arg(long)]
    task: TaskId,
}

#[derive(Args, Debug, Clone)]
struct Output {
    #[arg(long, default_value = "csv")]
    format: OutputFormat,
    /// Write to this file instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum SynthFormat {
    Csv,
    Jsonl,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check a ledger against the schemas and report record counts.
    Validate {
        #[command(flatten)]
        ledger: LedgerArgs,
    },
    /// Write a deterministic synthetic ledger and its planted truth table.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 6)]
        transfers: usize,
        #[arg(long, default_value_t = 12)]
        targets: usize,
        #[arg(long, default_value_t = 2)]
        tasks: usize,
        #[arg(long, default_value_t = 10)]
        reps: usize,
        #[arg(long, default_value = "1,10,100,1000", value_delimiter = ',')]
        steps: Vec<u32>,
        #[arg(long, default_value_t = 0.0)]
        missing_rate: f64,
        #[arg(long, default_value_t = 3)]
        interaction_arity: usize,
        #[arg(long, value_enum, default_value = "csv")]
        format: SynthFormat,
    },
    /// Transfer score of one cell.
    Ts {
        #[command(flatten)]
        ledger: LedgerArgs,
        #[command(flatten)]
        cell: Cell,
        #[arg(long)]
        transfer: Iso,
        #[arg(long)]
        target: Iso,
        /// A step, a comma-separated list to average over, or `short`.
        #[arg(long, default_value = "short")]
        steps: StepSelector,
    },
    /// Rank transfer (donor) or target (recipient) languages.
    Rank {
        #[command(flatten)]
        ledger: LedgerArgs,
        #[command(flatten)]
        cell: Cell,
        #[arg(long, default_value = "transfer")]
        axis: Axis,
        #[arg(long, default_value = "short")]
        steps: StepSelector,
        #[command(flatten)]
        out: Output,
    },
    /// Transfer-score variance, max/min recipient counts and profiles.
    Variance {
        #[command(flatten)]
        ledger: LedgerArgs,
        #[command(flatten)]
        cell: Cell,
        #[arg(long, default_value = "short")]
        steps: StepSelector,
        #[arg(long, default_value_t = VarianceProfile::DEFAULT_THRESHOLD)]
        threshold: usize,
        #[command(flatten)]
        out: Output,
    },
    /// Base / continued-steps / interaction comparison with improvement flags.
    Flags {
        #[command(flatten)]
        ledger: Option<LedgerArgs>,
        #[arg(long, requires = "ledger")]
        model: Option<String>,
        #[arg(long, requires = "ledger")]
        task: Option<TaskId>,
        /// Recompute the flags of a comparison table CSV instead of a ledger.
        #[arg(long, conflicts_with = "ledger")]
        table: Option<PathBuf>,
        #[command(flatten)]
        out: Output,
    },
    /// Per-step mean and spread of relative improvements.
    Progression {
        #[command(flatten)]
        ledger: LedgerArgs,
        #[command(flatten)]
        cell: Cell,
        #[arg(long, requires = "target")]
        transfer: Option<Iso>,
        #[arg(long, requires = "transfer")]
        target: Option<Iso>,
        #[command(flatten)]
        out: Output,
    },
    /// Recipient summary with never / low / high / universal buckets.
    Recipients {
        #[command(flatten)]
        ledger: LedgerArgs,
        #[command(flatten)]
        cell: Cell,
        #[arg(long, default_value = "short")]
        steps: StepSelector,
        #[command(flatten)]
        out: Output,
    },
    /// Interference pattern counts of one language, or the scatter of all.
    Interference {
        #[command(flatten)]
        ledger: LedgerArgs,
        #[arg(long)]
        model: String,
        #[arg(long, required_unless_present = "pooled")]
        task: Option<TaskId>,
        /// Pool counts over every task of the model.
        #[arg(long, conflicts_with = "task")]
        pooled: bool,
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
        arity: u8,
        #[arg(long)]
        lang: Option<Iso>,
        #[arg(long, requires = "lang")]
        partner: Option<Iso>,
        #[arg(long, default_value = "negative")]
        tie: TieRule,
        #[command(flatten)]
        out: Output,
    },
    /// Project raw sign-pattern counts into interference space.
    Project {
        #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(2..=3))]
        arity: u8,
        /// Pattern counts in index order, e.g. `1,1,3,2` for (-A-B, -A+B, +A-B, +A+B).
        #[arg(long, value_delimiter = ',', required = true)]
        counts: Vec<usize>,
    },
    /// Spearman correlation of transfer-language rankings across tasks.
    Correlate {
        #[command(flatten)]
        ledger: LedgerArgs,
        #[arg(long)]
        model: String,
        /// Tasks to compare; all tasks of the model by default.
        #[arg(long, value_delimiter = ',')]
        tasks: Vec<TaskId>,
        #[arg(long, default_value = "short")]
        steps: StepSelector,
        #[command(flatten)]
        out: Output,
    },
    /// Mean transfer score by seen / unseen transfer and target.
    Heatmap {
        #[command(flatten)]
        ledger: LedgerArgs,
        #[command(flatten)]
        cell: Cell,
        #[arg(long, default_value = "short")]
        steps: StepSelector,
        #[command(flatten)]
        out: Output,
    },
    /// Render every report for every model and task into a directory.
    ReportAll {
        #[command(flatten)]
        ledger: LedgerArgs,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads, 0 for one per core.
        #[arg(long, default_value_t = 0)]
        threads: usize,
        #[arg(long, default_value = "short")]
        steps: StepSelector,
    },
}

struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::IncompatibleFormat { .. } => 2,
            _ => 1,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

fn emit(report: &dyn Report, out: &Output) -> Result<(), Failure> {
    let text = render(report, out.format)?;
    write_out(&text, out.output.as_deref())
}

fn write_out(text: &str, path: Option<&Path>) -> Result<(), Failure> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Failure::from(Error::Io {
            path: p.to_path_buf(),
            source: e,
        })),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Validate { ledger } => {
            let l = ledger.load()?;
            let (b, r, i) = l.record_counts();
            let models: Vec<&str> = l.models().collect();
            println!(
                "ok: {b} baselines, {r} runs, {i} interactions; models: {}; steps: {:?}; warnings: {}",
                models.join(","),
                l.step_grid(),
                l.warnings().len()
            );
        }
        Command::Synth {
            seed,
            out,
            transfers,
            targets,
            tasks,
            reps,
            steps,
            missing_rate,
            interaction_arity,
            format,
        } => {
            let config = SynthConfig {
                seed,
                n_transfer: transfers,
                n_target: targets,
                tasks,
                step_grid: steps,
                rep_count: reps,
                missing_rate,
                interaction_arity,
                ..SynthConfig::default()
            };
            let (ledger, truth) = synth_ledger(&config).map_err(|e| usage(e.to_string()))?;
            let format = match format {
                SynthFormat::Csv => LedgerFormat::Csv,
                SynthFormat::Jsonl => LedgerFormat::JsonLines,
            };
            write_ledger_dir(&ledger, &out, format)?;
            let truth_path = out.join("truth.csv");
            write_out(&truth.to_csv(), Some(&truth_path))?;
        }
        Command::Ts {
            ledger,
            cell,
            transfer,
            target,
            steps,
        } => {
            let l = ledger.load()?;
            let value = match steps {
                StepSelector::Single(s) => transfer_score(&l, &cell.model, cell.task.as_str(), transfer, target, s)?.value,
                selector => {
                    let m = transfer_matrix(&l, &cell.model, cell.task.as_str(), &selector)?;
                    match m.get(transfer, target) {
                        Some(v) => v,
                        None => {
                            let reason = m
                                .absent_reason(transfer, target)
                                .map_or("no runs".to_string(), |r| r.to_string());
                            return Err(Failure::from(Error::MissingCell(format!(
                                "{}/{}/{transfer}->{target} ({reason})",
                                cell.model, cell.task
                            ))));
                        }
                    }
                }
            };
            println!("{}", transferscope_core::report::fixed(value, 4));
        }
        Command::Rank {
            ledger,
            cell,
            axis,
            steps,
            out,
        } => {
            let l = ledger.load()?;
            let m = transfer_matrix(&l, &cell.model, cell.task.as_str(), &steps)?;
            emit(&RankReport::new(&rank_languages(&m, axis), l.registry(), axis), &out)?;
        }
        Command::Variance {
            ledger,
            cell,
            steps,
            threshold,
            out,
        } => {
            let l = ledger.load()?;
            let m = transfer_matrix(&l, &cell.model, cell.task.as_str(), &steps)?;
            let stats = variance_table(&m)?;
            emit(&VarianceReport::new(&stats, l.registry(), threshold), &out)?;
        }
        Command::Flags {
            ledger,
            model,
            task,
            table,
            out,
        } => {
            let report = match (table, ledger) {
                (Some(path), _) => {
                    let text = fs::read_to_string(&path).map_err(|e| Failure::from(Error::Io { path: path.clone(), source: e }))?;
                    let parsed = parse_comparison_csv(&text).map_err(|e| Failure {
                        code: 1,
                        message: format!("{}: {e}", path.display()),
                    })?;
                    ComparisonTable {
                        rows: parsed
                            .rows
                            .into_iter()
                            .map(|r| ComparisonRow::new(r.lang, r.base, r.scores, r.interactions))
                            .collect(),
                        steps: parsed.steps,
                    }
                }
                (None, Some(ledger)) => {
                    let (Some(model), Some(task)) = (model, task) else {
                        return Err(usage("--model and --task are required with --ledger"));
                    };
                    comparison_table(&ledger.load()?, &model, task.as_str())?
                }
                (None, None) => return Err(usage("either --ledger or --table is required")),
            };
            emit(&report, &out)?;
        }
        Command::Progression {
            ledger,
            cell,
            transfer,
            target,
            out,
        } => {
            let l = ledger.load()?;
            let cells: Vec<(Iso, Iso)> = transfer.zip(target).into_iter().collect();
            emit(&ProgressionReport::new(&l, &cell.model, cell.task.as_str(), &cells)?, &out)?;
        }
        Command::Recipients {
            ledger,
            cell,
            steps,
            out,
        } => {
            let l = ledger.load()?;
            let m = transfer_matrix(&l, &cell.model, cell.task.as_str(), &steps)?;
            emit(&RecipientReport::new(&m, l.registry())?, &out)?;
        }
        Command::Interference {
            ledger,
            model,
            task,
            pooled,
            arity,
            lang,
            partner,
            tie,
            out,
        } => {
            let l = ledger.load()?;
            let scope = match (task, pooled) {
                (Some(t), false) => TaskScope::Single(t),
                _ => TaskScope::Pooled,
            };
            let arity = usize::from(arity);
            match lang {
                Some(lang) => {
                    let counts = pattern_counts(&l, &model, &scope, lang, arity, &PatternOptions { partner, tie })?;
                    emit(&CountsReport(counts), &out)?;
                }
                None => {
                    let points = scatter_points(&l, &model, &scope, arity, tie)?;
                    emit(&ScatterReport { arity, points }, &out)?;
                }
            }
        }
        Command::Project { arity, counts } => {
            let arity = usize::from(arity);
            if counts.len() != 1 << arity {
                return Err(usage(format!(
                    "arity {arity} needs {} counts, got {}",
                    1 << arity,
                    counts.len()
                )));
            }
            let p = project_counts(arity, &counts)?;
            let f = |v| transferscope_core::report::fixed(v, 4);
            if arity == 3 {
                let c = InterferenceCounts::new(Iso::new("und").expect("valid"), 3, counts)?;
                let t = project_trilingual(&c)?;
                println!("{},{},{}", f(p.x), f(p.y), t.third.sign.word());
            } else {
                println!("{},{}", f(p.x), f(p.y));
            }
        }
        Command::Correlate {
            ledger,
            model,
            tasks,
            steps,
            out,
        } => {
            let l = ledger.load()?;
            let tasks: Vec<TaskId> = if tasks.is_empty() {
                l.tasks(&model).cloned().collect()
            } else {
                tasks
            };
            let scores = tasks
                .iter()
                .map(|t| {
                    let m = transfer_matrix(&l, &model, t.as_str(), &steps)?;
                    let s = m
                        .populated(Axis::Transfer)
                        .into_iter()
                        .map(|lang| aggregated_transfer(&m, lang).map(|v| (lang, v)))
                        .collect::<Result<_, Error>>()?;
                    Ok((t.clone(), s))
                })
                .collect::<Result<Vec<_>, Error>>()?;
            emit(
                &CorrelationReport {
                    matrix: task_correlation_matrix(&scores)?,
                },
                &out,
            )?;
        }
        Command::Heatmap {
            ledger,
            cell,
            steps,
            out,
        } => {
            let l = ledger.load()?;
            let m = transfer_matrix(&l, &cell.model, cell.task.as_str(), &steps)?;
            emit(
                &HeatmapReport {
                    table: seen_unseen_matrix(&m, l.registry()),
                },
                &out,
            )?;
        }
        Command::ReportAll {
            ledger,
            out,
            threads,
            steps,
        } => {
            let l = ledger.load()?;
            let opts = ReportAllOptions {
                selector: steps,
                threads,
                ..ReportAllOptions::default()
            };
            let summary = report_all(&l, &out, &opts)?;
            for (name, reason) in &summary.skipped {
                eprintln!("skipped {name}: {reason}");
            }
            println!("wrote {} files to {}", summary.written.len(), out.display());
        }
    }
    Ok(())
}

/// Pattern counts of one language with its projection.
struct CountsReport(InterferenceCounts);

impl Report for CountsReport {
    fn kind(&self) -> transferscope_core::ReportKind {
        transferscope_core::ReportKind::InterferenceScatter
    }

    fn table(&self) -> Table {
        let c = &self.0;
        let mut t = Table::new(&["lang", "pattern", "count"]);
        for (i, n) in c.counts.iter().enumerate() {
            t.push(vec![c.lang.to_string(), c.label(i), n.to_string()]);
        }
        t
    }

    fn to_json(&self) -> String {
        let c = &self.0;
        let point = if c.arity == 2 {
            project_bilingual(c).ok()
        } else {
            project_trilingual(c).ok().map(|t| t.point)
        };
        let value = serde_json::json!({ "counts": c, "total": c.total(), "projection": point });
        format!("{}\n", serde_json::to_string_pretty(&value).expect("serializable"))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
