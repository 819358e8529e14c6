use serde::Serialize;

use super::{fixed, json, markdown, opt_fixed, Report, ReportKind, Table};
use crate::error::{Error, Result};
use crate::interference::averaged_interaction_score;
use crate::ledger::{Combo, Iso, Ledger, Registry};
use crate::stats::{CorrelationMatrix, Spearman};
use crate::transfer::{
    improvement_flags, recipient_summary, variance_profile, AbsentReason, Axis, Coverage,
    ImprovementFlags, MaxRecipient, RankEntry, RecipientBucket, SustainedImprovement,
    TransferMatrix, VarianceProfile, VarianceStats,
};

fn bad(message: impl Into<String>) -> Error {
    Error::InvalidArgument(message.into())
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().from_reader(text.as_bytes())
}

fn check_header(r: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let header = r.headers().map_err(|e| bad(e.to_string()))?;
    if header.iter().ne(expected.iter().copied()) {
        return Err(bad(format!(
            "unexpected header {:?}, expected {:?}",
            header.iter().collect::<Vec<_>>(),
            expected
        )));
    }
    Ok(())
}

fn records(text: &str, expected: &[&str]) -> Result<Vec<csv::StringRecord>> {
    let mut r = reader(text);
    check_header(&mut r, expected)?;
    r.records().map(|rec| rec.map_err(|e| bad(e.to_string()))).collect()
}

fn num<T: std::str::FromStr>(field: &str) -> Result<T> {
    field
        .trim()
        .parse()
        .map_err(|_| bad(format!("invalid number {field:?}")))
}

fn opt_num(field: &str) -> Result<Option<f64>> {
    if field.trim().is_empty() {
        Ok(None)
    } else {
        num(field).map(Some)
    }
}

fn boolean(field: &str) -> Result<bool> {
    match field {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(bad(format!("invalid boolean {other:?}"))),
    }
}

fn starred(lang: Iso, unseen: bool) -> String {
    if unseen {
        format!("{lang}*")
    } else {
        lang.to_string()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankRow {
    pub rank: usize,
    pub lang: Iso,
    pub unseen: bool,
    pub agg_ts: f64,
    pub positive_pct: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RankReport {
    pub axis: Axis,
    pub rows: Vec<RankRow>,
}

impl RankReport {
    pub const HEADER: [&'static str; 5] = ["rank", "lang", "unseen", "agg_ts", "positive_pct"];

    pub fn new(entries: &[RankEntry], registry: &Registry, axis: Axis) -> Self {
        RankReport {
            axis,
            rows: entries
                .iter()
                .map(|e| RankRow {
                    rank: e.rank,
                    lang: e.lang,
                    unseen: !registry.is_seen(e.lang),
                    agg_ts: e.agg_ts,
                    positive_pct: e.positive_pct,
                })
                .collect(),
        }
    }
}

impl Report for RankReport {
    fn kind(&self) -> ReportKind {
        ReportKind::RankTable
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&Self::HEADER);
        for r in &self.rows {
            t.push(vec![
                r.rank.to_string(),
                r.lang.to_string(),
                r.unseen.to_string(),
                fixed(r.agg_ts, 4),
                fixed(r.positive_pct, 1),
            ]);
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_markdown(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.rank.to_string(),
                    starred(r.lang, r.unseen),
                    fixed(r.agg_ts, 2),
                    fixed(r.positive_pct, 1),
                ]
            })
            .collect();
        markdown(&["Rank", "Lang", "ts", "+(%)"], &rows)
    }
}

pub fn parse_rank_csv(text: &str) -> Result<Vec<RankRow>> {
    records(text, &RankReport::HEADER)?
        .iter()
        .map(|r| {
            Ok(RankRow {
                rank: num(&r[0])?,
                lang: Iso::new(&r[1])?,
                unseen: boolean(&r[2])?,
                agg_ts: num(&r[3])?,
                positive_pct: num(&r[4])?,
            })
        })
        .collect()
}

/// One language of a base / continued-steps / interaction comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub lang: Iso,
    pub base: f64,
    /// Self-evaluation score per step of the table's step list.
    pub scores: Vec<Option<f64>>,
    /// `[1A]`, `[2A]`, `[3A]`.
    pub interactions: [Option<f64>; 3],
    pub flags: ImprovementFlags,
}

impl ComparisonRow {
    /// Computes the improvement flags from the first and last step scores.
    pub fn new(lang: Iso, base: f64, scores: Vec<Option<f64>>, interactions: [Option<f64>; 3]) -> Self {
        let first = scores.first().copied().flatten();
        let last = scores.last().copied().flatten();
        ComparisonRow {
            lang,
            base,
            flags: improvement_flags(base, first, last, interactions),
            scores,
            interactions,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub steps: Vec<u32>,
    pub rows: Vec<ComparisonRow>,
}

fn yes_no(flag: Option<bool>) -> String {
    match flag {
        Some(true) => "yes".into(),
        Some(false) => "no".into(),
        None => String::new(),
    }
}

fn parse_flag(field: &str) -> Result<Option<bool>> {
    match field.trim() {
        "yes" => Ok(Some(true)),
        "no" => Ok(Some(false)),
        "" => Ok(None),
        other => Err(bad(format!("invalid flag {other:?}"))),
    }
}

impl ComparisonTable {
    fn header(&self) -> Vec<String> {
        let mut h = vec!["lang".to_string(), "base".to_string()];
        h.extend(self.steps.iter().map(u32::to_string));
        h.extend(["1A", "2A", "3A"].map(String::from));
        let first = self.steps.first().copied().unwrap_or_default();
        let last = self.steps.last().copied().unwrap_or_default();
        h.push(format!("imp_c{first}"));
        h.push(format!("imp_c{last}"));
        h.push("imp_i".into());
        h
    }

    fn cells(&self, places: usize) -> Vec<Vec<String>> {
        self.rows
            .iter()
            .map(|r| {
                let mut row = vec![r.lang.to_string(), fixed(r.base, places)];
                row.extend(r.scores.iter().map(|s| opt_fixed(*s, places)));
                row.extend(r.interactions.iter().map(|s| opt_fixed(*s, places)));
                row.push(yes_no(r.flags.first_step));
                row.push(yes_no(r.flags.last_step));
                row.push(yes_no(r.flags.interaction));
                row
            })
            .collect()
    }
}

impl Report for ComparisonTable {
    fn kind(&self) -> ReportKind {
        ReportKind::ComparisonTable
    }

    fn table(&self) -> Table {
        Table {
            header: self.header(),
            rows: self.cells(2),
        }
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_markdown(&self) -> String {
        let mut header = self.header();
        for h in header.iter_mut() {
            if h.ends_with('A') {
                *h = format!("[{h}]");
            } else if let Some(rest) = h.strip_prefix("imp_") {
                *h = format!("Imp_{rest}");
            }
        }
        markdown(&header, &self.cells(2))
    }
}

/// Reads a comparison table from CSV; the flag columns are taken as written.
pub fn parse_comparison_csv(text: &str) -> Result<ComparisonTable> {
    let mut r = reader(text);
    let header: Vec<String> = r
        .headers()
        .map_err(|e| bad(e.to_string()))?
        .iter()
        .map(String::from)
        .collect();
    let n = header.len();
    if n < 8 || header[0] != "lang" || header[1] != "base" || header[n - 6..n - 3] != ["1A", "2A", "3A"] {
        return Err(bad(format!("not a comparison table header: {header:?}")));
    }
    let steps = header[2..n - 6]
        .iter()
        .map(|s| num::<u32>(s))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let scores = (2..n - 6).map(|i| opt_num(&rec[i])).collect::<Result<Vec<_>>>()?;
        rows.push(ComparisonRow {
            lang: Iso::new(&rec[0])?,
            base: num(&rec[1])?,
            scores,
            interactions: [opt_num(&rec[n - 6])?, opt_num(&rec[n - 5])?, opt_num(&rec[n - 4])?],
            flags: ImprovementFlags {
                first_step: parse_flag(&rec[n - 3])?,
                last_step: parse_flag(&rec[n - 2])?,
                interaction: parse_flag(&rec[n - 1])?,
            },
        });
    }
    Ok(ComparisonTable { steps, rows })
}

/// Base score, self-evaluation score per grid step and `[1A]/[2A]/[3A]`
/// interaction scores of every language with a baseline and either
/// self-evaluation runs or a monolingual interaction score. Rows are ordered
/// by base descending.
pub fn comparison_table(ledger: &Ledger, model: &str, task: &str) -> Result<ComparisonTable> {
    let data = ledger.task_or_err(model, task)?;
    let steps = ledger.step_grid().to_vec();
    let mut rows = Vec::new();
    for (lang, base) in data.baselines() {
        let cell = data.cell(lang, lang);
        let mono = data.interaction(&Combo::single(lang), lang);
        if cell.is_none() && mono.is_none() {
            continue;
        }
        let scores = steps
            .iter()
            .map(|s| cell.and_then(|c| c.get(s)).map(|r| r.mean()))
            .collect();
        let interactions = [
            mono,
            averaged_interaction_score(ledger, model, task, lang, 2).ok(),
            averaged_interaction_score(ledger, model, task, lang, 3).ok(),
        ];
        rows.push(ComparisonRow::new(lang, base, scores, interactions));
    }
    if rows.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no languages with self-evaluation or interaction scores for {model}/{task}"
        )));
    }
    rows.sort_by(|a, b| b.base.total_cmp(&a.base).then(a.lang.cmp(&b.lang)));
    Ok(ComparisonTable { steps, rows })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecipientRow {
    pub target: Iso,
    pub unseen: bool,
    pub agg_ts: f64,
    pub positive_pct: f64,
    pub positive: usize,
    pub total: usize,
    pub bucket: RecipientBucket,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RecipientReport {
    pub rows: Vec<RecipientRow>,
}

impl RecipientReport {
    pub const HEADER: [&'static str; 7] =
        ["target", "unseen", "agg_ts", "positive_pct", "positive", "total", "bucket"];

    pub fn new(matrix: &TransferMatrix, registry: &Registry) -> Result<Self> {
        let rows = matrix
            .populated(Axis::Target)
            .into_iter()
            .map(|t| {
                let s = recipient_summary(matrix, t)?;
                Ok(RecipientRow {
                    target: t,
                    unseen: !registry.is_seen(t),
                    agg_ts: s.agg_ts,
                    positive_pct: s.positive_pct,
                    positive: s.positive,
                    total: s.total,
                    bucket: s.bucket,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RecipientReport { rows })
    }
}

impl Report for RecipientReport {
    fn kind(&self) -> ReportKind {
        ReportKind::RecipientMap
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&Self::HEADER);
        for r in &self.rows {
            t.push(vec![
                r.target.to_string(),
                r.unseen.to_string(),
                fixed(r.agg_ts, 4),
                fixed(r.positive_pct, 1),
                r.positive.to_string(),
                r.total.to_string(),
                r.bucket.to_string(),
            ]);
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_markdown(&self) -> String {
        let buckets = [
            (RecipientBucket::Never, "Never receives"),
            (RecipientBucket::Low, "Positive transfer (0-90]"),
            (RecipientBucket::High, "Positive transfer (90-100)"),
            (RecipientBucket::Universal, "Universal recipient"),
        ];
        let rows: Vec<Vec<String>> = buckets
            .iter()
            .map(|(bucket, label)| {
                let langs: Vec<String> = self
                    .rows
                    .iter()
                    .filter(|r| r.bucket == *bucket)
                    .map(|r| starred(r.target, r.unseen))
                    .collect();
                vec![label.to_string(), langs.len().to_string(), langs.join(", ")]
            })
            .collect();
        markdown(&["Bucket", "Count", "Languages"], &rows)
    }
}

fn bucket(field: &str) -> Result<RecipientBucket> {
    [
        RecipientBucket::Never,
        RecipientBucket::Low,
        RecipientBucket::High,
        RecipientBucket::Universal,
    ]
    .into_iter()
    .find(|b| b.as_str() == field)
    .ok_or_else(|| bad(format!("invalid bucket {field:?}")))
}

impl RecipientReport {
    pub fn parse_csv(text: &str) -> Result<Vec<RecipientRow>> {
        records(text, &Self::HEADER)?
            .iter()
            .map(|r| {
                Ok(RecipientRow {
                    target: Iso::new(&r[0])?,
                    unseen: boolean(&r[1])?,
                    agg_ts: num(&r[2])?,
                    positive_pct: num(&r[3])?,
                    positive: num(&r[4])?,
                    total: num(&r[5])?,
                    bucket: bucket(&r[6])?,
                })
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceRow {
    pub rank: usize,
    pub transfer: Iso,
    pub unseen: bool,
    pub mean_ts: f64,
    pub variance: f64,
    pub max_count: usize,
    pub min_count: usize,
    pub profile: VarianceProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceReport {
    pub threshold: usize,
    pub rows: Vec<VarianceRow>,
}

fn profile_name(p: VarianceProfile) -> &'static str {
    match p {
        VarianceProfile::PlusAndMinus => "plus_and_minus",
        VarianceProfile::MostlyPlus => "mostly_plus",
        VarianceProfile::MostlyMinus => "mostly_minus",
        VarianceProfile::Neutral => "neutral",
    }
}

impl VarianceReport {
    pub const HEADER: [&'static str; 8] = [
        "rank",
        "transfer",
        "unseen",
        "mean_ts",
        "variance",
        "max_count",
        "min_count",
        "profile",
    ];

    /// `stats` in variance order, as produced by `variance_table`.
    pub fn new(stats: &[VarianceStats], registry: &Registry, threshold: usize) -> Self {
        VarianceReport {
            threshold,
            rows: stats
                .iter()
                .enumerate()
                .map(|(i, s)| VarianceRow {
                    rank: i + 1,
                    transfer: s.transfer,
                    unseen: !registry.is_seen(s.transfer),
                    mean_ts: s.mean_ts,
                    variance: s.variance,
                    max_count: s.max_count,
                    min_count: s.min_count,
                    profile: variance_profile(s, threshold),
                })
                .collect(),
        }
    }

    pub fn parse_csv(text: &str) -> Result<Vec<VarianceRow>> {
        records(text, &Self::HEADER)?
            .iter()
            .map(|r| {
                let profile = [
                    VarianceProfile::PlusAndMinus,
                    VarianceProfile::MostlyPlus,
                    VarianceProfile::MostlyMinus,
                    VarianceProfile::Neutral,
                ]
                .into_iter()
                .find(|p| profile_name(*p) == &r[7])
                .ok_or_else(|| bad(format!("invalid profile {:?}", &r[7])))?;
                Ok(VarianceRow {
                    rank: num(&r[0])?,
                    transfer: Iso::new(&r[1])?,
                    unseen: boolean(&r[2])?,
                    mean_ts: num(&r[3])?,
                    variance: num(&r[4])?,
                    max_count: num(&r[5])?,
                    min_count: num(&r[6])?,
                    profile,
                })
            })
            .collect()
    }
}

impl Report for VarianceReport {
    fn kind(&self) -> ReportKind {
        ReportKind::VarianceTable
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&Self::HEADER);
        for r in &self.rows {
            t.push(vec![
                r.rank.to_string(),
                r.transfer.to_string(),
                r.unseen.to_string(),
                fixed(r.mean_ts, 4),
                fixed(r.variance, 4),
                r.max_count.to_string(),
                r.min_count.to_string(),
                profile_name(r.profile).to_string(),
            ]);
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_markdown(&self) -> String {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.rank.to_string(),
                    starred(r.transfer, r.unseen),
                    format!("{} ({})", fixed(r.mean_ts, 2), fixed(r.variance, 1)),
                    format!("({}, {})", r.max_count, r.min_count),
                    r.profile.label().to_string(),
                ]
            })
            .collect();
        markdown(&["Rank", "Lang", "Transfer (Var.)", "(Max, Min)", "Profile"], &rows)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CorrelationReport {
    pub matrix: CorrelationMatrix,
}

fn pair_text(s: &Spearman) -> String {
    match s.fit() {
        Some(f) => {
            let text = format!("({}, {})", fixed(f.rho, 2), fixed(f.p_value, 2));
            if s.is_significant() {
                format!("**{text}**")
            } else {
                text
            }
        }
        None => "n/a".to_string(),
    }
}

impl Report for CorrelationReport {
    fn kind(&self) -> ReportKind {
        ReportKind::CorrelationTable
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["task_a", "task_b", "n", "rho", "p_value", "significant"]);
        let m = &self.matrix;
        for i in 0..m.tasks.len() {
            for j in i + 1..m.tasks.len() {
                let s = &m.cells[i][j];
                t.push(vec![
                    m.tasks[i].to_string(),
                    m.tasks[j].to_string(),
                    m.labels.len().to_string(),
                    opt_fixed(s.rho(), 4),
                    opt_fixed(s.p_value(), 4),
                    s.is_significant().to_string(),
                ]);
            }
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_markdown(&self) -> String {
        let m = &self.matrix;
        let mut header = vec![String::new()];
        header.extend(m.tasks.iter().map(|t| t.as_str().to_uppercase()));
        let rows: Vec<Vec<String>> = m
            .tasks
            .iter()
            .enumerate()
            .map(|(i, t)| {
                let mut row = vec![t.as_str().to_uppercase()];
                row.extend((0..m.tasks.len()).map(|j| {
                    if i == j {
                        "-".to_string()
                    } else {
                        pair_text(&m.cells[i][j])
                    }
                }));
                row
            })
            .collect();
        markdown(&header, &rows)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbsentCell {
    pub transfer: Iso,
    pub target: Iso,
    pub reason: AbsentReason,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CoverageReport {
    pub steps: Vec<u32>,
    pub coverage: Coverage,
    pub absent: Vec<AbsentCell>,
}

impl CoverageReport {
    pub fn new(matrix: &TransferMatrix) -> Self {
        CoverageReport {
            steps: matrix.steps().to_vec(),
            coverage: matrix.coverage(),
            absent: matrix
                .absent()
                .map(|(transfer, target, reason)| AbsentCell {
                    transfer,
                    target,
                    reason,
                })
                .collect(),
        }
    }
}

impl Report for CoverageReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Coverage
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["transfer", "target", "reason"]);
        for a in &self.absent {
            t.push(vec![a.transfer.to_string(), a.target.to_string(), a.reason.to_string()]);
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_markdown(&self) -> String {
        let c = &self.coverage;
        let rows = vec![vec![
            c.transfers.to_string(),
            c.targets.to_string(),
            c.populated.to_string(),
            c.missing_baseline.to_string(),
            c.zero_baseline.to_string(),
            c.missing_runs.to_string(),
            c.partial_steps.to_string(),
        ]];
        markdown(
            &[
                "transfers",
                "targets",
                "populated",
                "missing_baseline",
                "zero_baseline",
                "missing_runs",
                "partial_steps",
            ],
            &rows,
        )
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SustainedReport {
    pub results: Vec<SustainedImprovement>,
}

impl Report for SustainedReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Sustained
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["steps", "task", "improved", "evaluated", "pct"]);
        for r in &self.results {
            for task in &r.per_task {
                t.push(vec![
                    r.steps.to_string(),
                    task.task.to_string(),
                    task.improved.to_string(),
                    task.evaluated.to_string(),
                    fixed(task.pct, 1),
                ]);
            }
            t.push(vec![
                r.steps.to_string(),
                "mean".into(),
                String::new(),
                String::new(),
                fixed(r.mean_pct, 1),
            ]);
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxRecipientRow {
    pub transfer: Iso,
    #[serde(flatten)]
    pub best: MaxRecipient,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxRecipientReport {
    pub rows: Vec<MaxRecipientRow>,
}

impl Report for MaxRecipientReport {
    fn kind(&self) -> ReportKind {
        ReportKind::MaxRecipients
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["transfer", "steps", "target", "ts"]);
        for r in &self.rows {
            t.push(vec![
                r.transfer.to_string(),
                r.best.steps.to_string(),
                r.best.target.to_string(),
                fixed(r.best.ts, 4),
            ]);
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }
}
