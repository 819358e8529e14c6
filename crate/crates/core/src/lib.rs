//! Cross-lingual transfer analytics over experiment score ledgers.
//!
//! The crate ingests zero-shot baselines, few-step continued-training runs
//! and adapter-fusion interaction scores, then derives transfer scores,
//! donor and recipient rankings, variance profiles, negative-interference
//! pattern counts with their 2-D projections, and rank correlations
//! between tasks. The [`report`] module renders all of it as CSV,
//! Markdown, JSON or static SVG.

pub mod error;
pub mod interference;
pub mod ledger;
pub mod report;
pub mod stats;
pub mod transfer;

pub use error::{Error, Result};
pub use interference::{InterferenceCounts, ProjectionPoint, Sign, TaskScope, TieRule};
pub use ledger::{Combo, Iso, Ledger, LoadOptions, Registry, TaskId};
pub use report::{OutputFormat, ReportKind, ReportSpec};
pub use stats::Spearman;
pub use transfer::{
    Axis, ImprovementFlags, RankEntry, StepSelector, TransferMatrix, TransferScore, VarianceProfile,
    VarianceStats,
};
