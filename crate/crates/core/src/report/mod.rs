//! Table and figure-data renderers.
//!
//! Every report is a value implementing [`Report`]; [`render`] turns it
//! into CSV, Markdown, JSON or (for figure kinds) a static SVG. Machine CSV
//! carries 4 decimals for transfer scores and 1 for percentages; the
//! Markdown tables follow the paper's display precision.

mod all;
mod figures;
mod svg;
mod tables;

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

pub use all::{report_all, ReportAllOptions, ReportSummary};
pub use figures::{
    HeatmapReport, ProgressionReport, ProgressionRow, ScatterReport, ViolinReport,
};
pub use tables::{
    comparison_table, parse_comparison_csv, parse_rank_csv, ComparisonRow, ComparisonTable,
    CorrelationReport, CoverageReport, MaxRecipientReport, RankReport, RankRow, RecipientReport,
    RecipientRow, SustainedReport, VarianceReport, VarianceRow,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    RankTable,
    ComparisonTable,
    RecipientMap,
    VarianceTable,
    ViolinData,
    Progression,
    InterferenceScatter,
    SeenUnseenHeatmap,
    CorrelationTable,
    Coverage,
    Sustained,
    MaxRecipients,
}

impl ReportKind {
    pub const ALL: [ReportKind; 12] = [
        ReportKind::RankTable,
        ReportKind::ComparisonTable,
        ReportKind::RecipientMap,
        ReportKind::VarianceTable,
        ReportKind::ViolinData,
        ReportKind::Progression,
        ReportKind::InterferenceScatter,
        ReportKind::SeenUnseenHeatmap,
        ReportKind::CorrelationTable,
        ReportKind::Coverage,
        ReportKind::Sustained,
        ReportKind::MaxRecipients,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ReportKind::RankTable => "rank_table",
            ReportKind::ComparisonTable => "comparison_table",
            ReportKind::RecipientMap => "recipient_map",
            ReportKind::VarianceTable => "variance_table",
            ReportKind::ViolinData => "violin_data",
            ReportKind::Progression => "progression",
            ReportKind::InterferenceScatter => "interference_scatter",
            ReportKind::SeenUnseenHeatmap => "seen_unseen_heatmap",
            ReportKind::CorrelationTable => "correlation_table",
            ReportKind::Coverage => "coverage",
            ReportKind::Sustained => "sustained",
            ReportKind::MaxRecipients => "max_recipients",
        }
    }

    /// Figure kinds are the only ones with an SVG rendering.
    pub fn supports(self, format: OutputFormat) -> bool {
        match format {
            OutputFormat::Svg => matches!(
                self,
                ReportKind::ViolinData
                    | ReportKind::Progression
                    | ReportKind::InterferenceScatter
                    | ReportKind::SeenUnseenHeatmap
            ),
            _ => true,
        }
    }
}

impl fmt::Display for ReportKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ReportKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.replace('-', "_");
        ReportKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown report kind {s:?}")))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Md,
    Json,
    Svg,
}

impl OutputFormat {
    pub fn extension(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Md => "md",
            OutputFormat::Json => "json",
            OutputFormat::Svg => "svg",
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.extension())
    }
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "md" | "markdown" => Ok(OutputFormat::Md),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            other => Err(Error::InvalidArgument(format!("unknown output format {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportSpec {
    pub kind: ReportKind,
    pub model: Option<String>,
    pub task: Option<String>,
    pub format: OutputFormat,
}

impl ReportSpec {
    pub fn new(kind: ReportKind, format: OutputFormat) -> Result<Self> {
        let spec = ReportSpec {
            kind,
            model: None,
            task: None,
            format,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.kind.supports(self.format) {
            Ok(())
        } else {
            Err(Error::IncompatibleFormat {
                kind: self.kind.to_string(),
                format: self.format.to_string(),
            })
        }
    }
}

/// A CSV-shaped table of already formatted cells.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
    }

    pub fn to_markdown(&self) -> String {
        markdown(&self.header, &self.rows)
    }
}

pub(crate) fn markdown<S: AsRef<str>>(header: &[S], rows: &[Vec<String>]) -> String {
    let mut out = String::new();
    let line = |cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<&str> = cells.collect();
        format!("| {} |\n", parts.join(" | "))
    };
    out.push_str(&line(&mut header.iter().map(|h| h.as_ref())));
    out.push_str(&format!("|{}\n", "---|".repeat(header.len())));
    for row in rows {
        out.push_str(&line(&mut row.iter().map(String::as_str)));
    }
    out
}

/// Fixed-point formatting that never prints a negative zero.
pub fn fixed(value: f64, places: usize) -> String {
    let s = format!("{value:.places$}");
    match s.strip_prefix('-') {
        Some(rest) if rest.bytes().all(|b| b == b'0' || b == b'.') => rest.to_string(),
        _ => s,
    }
}

pub(crate) fn opt_fixed(value: Option<f64>, places: usize) -> String {
    value.map(|v| fixed(v, places)).unwrap_or_default()
}

pub(crate) fn json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report values serialize");
    s.push('\n');
    s
}

/// Something renderable in several output formats.
pub trait Report {
    fn kind(&self) -> ReportKind;

    fn table(&self) -> Table;

    fn to_json(&self) -> String;

    fn to_markdown(&self) -> String {
        self.table().to_markdown()
    }

    fn to_svg(&self) -> Option<String> {
        None
    }
}

pub fn render(report: &dyn Report, format: OutputFormat) -> Result<String> {
    let incompatible = || Error::IncompatibleFormat {
        kind: report.kind().to_string(),
        format: format.to_string(),
    };
    if !report.kind().supports(format) {
        return Err(incompatible());
    }
    Ok(match format {
        OutputFormat::Csv => report.table().to_csv(),
        OutputFormat::Md => report.to_markdown(),
        OutputFormat::Json => report.to_json(),
        OutputFormat::Svg => report.to_svg().ok_or_else(incompatible)?,
    })
}
