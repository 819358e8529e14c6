use serde::Serialize;

use super::svg::{diverging, range, ticks, Frame, Svg};
use super::{fixed, json, opt_fixed, Report, ReportKind, Table};
use crate::error::{Error, Result};
use crate::interference::ScatterPoint;
use crate::ledger::{Iso, Ledger, Registry};
use crate::transfer::{progression_series, variance_table, SeenUnseenTable, TransferMatrix};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolinSeries {
    pub transfer: Iso,
    pub unseen: bool,
    pub variance: f64,
    pub values: Vec<(Iso, f64)>,
}

/// Raw per-target transfer scores of each transfer language, ordered by
/// variance descending.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ViolinReport {
    pub series: Vec<ViolinSeries>,
}

impl ViolinReport {
    pub fn new(matrix: &TransferMatrix, registry: &Registry) -> Result<Self> {
        let series = variance_table(matrix)?
            .into_iter()
            .map(|s| ViolinSeries {
                transfer: s.transfer,
                unseen: !registry.is_seen(s.transfer),
                variance: s.variance,
                values: matrix.row(s.transfer).collect(),
            })
            .collect();
        Ok(ViolinReport { series })
    }
}

impl Report for ViolinReport {
    fn kind(&self) -> ReportKind {
        ReportKind::ViolinData
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["transfer", "variance", "target", "ts"]);
        for s in &self.series {
            for (target, ts) in &s.values {
                t.push(vec![
                    s.transfer.to_string(),
                    fixed(s.variance, 4),
                    target.to_string(),
                    fixed(*ts, 4),
                ]);
            }
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_svg(&self) -> Option<String> {
        let column = 28.0;
        let frame = Frame {
            left: 70.0,
            top: 20.0,
            width: column * self.series.len().max(1) as f64,
            height: 300.0,
            x: (0.0, self.series.len().max(1) as f64),
            y: range(self.series.iter().flat_map(|s| s.values.iter().map(|(_, v)| *v))),
        };
        let mut svg = Svg::new(frame.left + frame.width + 20.0, frame.top + frame.height + 70.0);
        frame.axes(&mut svg, &[], &ticks(frame.y.0, frame.y.1, 5, 2), "transfer language", "ts");
        let zero = frame.py(0.0);
        if (frame.top..=frame.top + frame.height).contains(&zero) {
            svg.line(frame.left, zero, frame.left + frame.width, zero, "#999999", 0.5);
        }
        for (i, s) in self.series.iter().enumerate() {
            let cx = frame.px(i as f64 + 0.5);
            let color = if s.unseen { "#cc0000" } else { "#1f4e9c" };
            let (lo, hi) = s
                .values
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (_, v)| (lo.min(*v), hi.max(*v)));
            svg.line(cx, frame.py(lo), cx, frame.py(hi), color, 1.0);
            for (_, v) in &s.values {
                svg.circle(cx, frame.py(*v), 2.0, color);
            }
            svg.text(cx, frame.top + frame.height + 16.0, "middle", 9.0, s.transfer.as_str());
        }
        Some(svg.finish())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProgressionRow {
    pub transfer: Iso,
    pub target: Iso,
    pub steps: u32,
    pub mean_ts: f64,
    pub sd_ts: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProgressionReport {
    pub rows: Vec<ProgressionRow>,
}

impl ProgressionReport {
    /// Progression of the given cells, or of every cell of the task with a
    /// baseline when `cells` is empty.
    pub fn new(ledger: &Ledger, model: &str, task: &str, cells: &[(Iso, Iso)]) -> Result<Self> {
        let data = ledger.task_or_err(model, task)?;
        let all: Vec<(Iso, Iso)>;
        let cells = if cells.is_empty() {
            all = data
                .cells()
                .map(|(k, _)| k)
                .filter(|(_, target)| data.baseline(*target).is_some_and(|b| b != 0.0))
                .collect();
            &all
        } else {
            cells
        };
        let mut rows = Vec::new();
        for &(transfer, target) in cells {
            for p in progression_series(ledger, model, task, transfer, target)? {
                rows.push(ProgressionRow {
                    transfer,
                    target,
                    steps: p.steps,
                    mean_ts: p.mean_ts,
                    sd_ts: p.sd_ts,
                });
            }
        }
        if rows.is_empty() {
            return Err(Error::EmptySelection(format!("no progression cells for {model}/{task}")));
        }
        Ok(ProgressionReport { rows })
    }
}

impl Report for ProgressionReport {
    fn kind(&self) -> ReportKind {
        ReportKind::Progression
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["transfer", "target", "steps", "mean_ts", "sd_ts"]);
        for r in &self.rows {
            t.push(vec![
                r.transfer.to_string(),
                r.target.to_string(),
                r.steps.to_string(),
                fixed(r.mean_ts, 4),
                fixed(r.sd_ts, 4),
            ]);
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_svg(&self) -> Option<String> {
        let lx = |s: u32| f64::from(s).log10();
        let frame = Frame {
            left: 70.0,
            top: 20.0,
            width: 420.0,
            height: 300.0,
            x: range(self.rows.iter().map(|r| lx(r.steps))),
            y: range(
                self.rows
                    .iter()
                    .flat_map(|r| [r.mean_ts - r.sd_ts, r.mean_ts + r.sd_ts]),
            ),
        };
        let mut steps: Vec<u32> = self.rows.iter().map(|r| r.steps).collect();
        steps.sort_unstable();
        steps.dedup();
        let xticks: Vec<(f64, String)> = steps.iter().map(|s| (lx(*s), s.to_string())).collect();
        let mut svg = Svg::new(frame.left + frame.width + 20.0, frame.top + frame.height + 60.0);
        frame.axes(&mut svg, &xticks, &ticks(frame.y.0, frame.y.1, 5, 2), "steps", "ts");
        for cell in self.rows.chunk_by(|a, b| a.transfer == b.transfer && a.target == b.target) {
            let upper = cell.iter().map(|r| (frame.px(lx(r.steps)), frame.py(r.mean_ts + r.sd_ts)));
            let lower = cell.iter().rev().map(|r| (frame.px(lx(r.steps)), frame.py(r.mean_ts - r.sd_ts)));
            let band: Vec<(f64, f64)> = upper.chain(lower).collect();
            svg.polygon(&band, "#1f4e9c", 0.15);
            let line: Vec<(f64, f64)> = cell
                .iter()
                .map(|r| (frame.px(lx(r.steps)), frame.py(r.mean_ts)))
                .collect();
            svg.polyline(&line, "#1f4e9c");
        }
        Some(svg.finish())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatterReport {
    pub arity: usize,
    pub points: Vec<ScatterPoint>,
}

impl Report for ScatterReport {
    fn kind(&self) -> ReportKind {
        ReportKind::InterferenceScatter
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["lang", "task", "arity", "x", "y", "annotation"]);
        for p in &self.points {
            t.push(vec![
                p.lang.to_string(),
                p.task.clone(),
                p.arity.to_string(),
                fixed(p.x, 4),
                fixed(p.y, 4),
                p.annotation.clone(),
            ]);
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_svg(&self) -> Option<String> {
        let frame = Frame {
            left: 70.0,
            top: 20.0,
            width: 360.0,
            height: 360.0,
            x: (-1.05, 1.05),
            y: (-1.05, 1.05),
        };
        let mut svg = Svg::new(frame.left + frame.width + 30.0, frame.top + frame.height + 60.0);
        let t = ticks(-1.0, 1.0, 5, 1);
        frame.axes(&mut svg, &t, &t, "x: interference received", "y: interference provided");
        svg.line(frame.px(0.0), frame.top, frame.px(0.0), frame.top + frame.height, "#999999", 0.5);
        svg.line(frame.left, frame.py(0.0), frame.left + frame.width, frame.py(0.0), "#999999", 0.5);
        for p in &self.points {
            let color = if p.annotation.ends_with("pos") {
                "#1f4e9c"
            } else if p.annotation.ends_with("neg") {
                "#cc0000"
            } else {
                "#333333"
            };
            let (x, y) = (frame.px(p.x), frame.py(p.y));
            svg.circle(x, y, 3.0, color);
            svg.text(x + 4.0, y - 4.0, "start", 9.0, p.lang.as_str());
        }
        Some(svg.finish())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HeatmapReport {
    pub table: SeenUnseenTable,
}

fn seen_label(seen: bool) -> &'static str {
    if seen {
        "seen"
    } else {
        "unseen"
    }
}

impl Report for HeatmapReport {
    fn kind(&self) -> ReportKind {
        ReportKind::SeenUnseenHeatmap
    }

    fn table(&self) -> Table {
        let mut t = Table::new(&["transfer_seen", "target_seen", "mean_ts", "count"]);
        for a in [true, false] {
            for b in [true, false] {
                let g = self.table.get(a, b);
                t.push(vec![
                    a.to_string(),
                    b.to_string(),
                    opt_fixed(g.map(|g| g.mean), 4),
                    g.map_or(0, |g| g.count).to_string(),
                ]);
            }
        }
        t
    }

    fn to_json(&self) -> String {
        json(self)
    }

    fn to_svg(&self) -> Option<String> {
        let cell = 120.0;
        let (left, top) = (110.0, 40.0);
        let max_abs = [true, false]
            .iter()
            .flat_map(|a| [true, false].map(|b| self.table.get(*a, b)))
            .flatten()
            .map(|g| g.mean.abs())
            .fold(0.0, f64::max);
        let mut svg = Svg::new(left + 2.0 * cell + 20.0, top + 2.0 * cell + 50.0);
        for (i, a) in [true, false].into_iter().enumerate() {
            svg.text(left - 8.0, top + cell * (i as f64 + 0.5), "end", 11.0, &format!("transfer {}", seen_label(a)));
            for (j, b) in [true, false].into_iter().enumerate() {
                let (x, y) = (left + cell * j as f64, top + cell * i as f64);
                match self.table.get(a, b) {
                    Some(g) => {
                        svg.rect(x, y, cell, cell, &diverging(g.mean, max_abs));
                        svg.text(x + cell / 2.0, y + cell / 2.0, "middle", 13.0, &fixed(g.mean, 2));
                        svg.text(x + cell / 2.0, y + cell / 2.0 + 16.0, "middle", 10.0, &format!("n={}", g.count));
                    }
                    None => {
                        svg.rect(x, y, cell, cell, "#eeeeee");
                        svg.text(x + cell / 2.0, y + cell / 2.0, "middle", 11.0, "n/a");
                    }
                }
            }
        }
        for (j, b) in [true, false].into_iter().enumerate() {
            svg.text(left + cell * (j as f64 + 0.5), top - 10.0, "middle", 11.0, &format!("target {}", seen_label(b)));
        }
        Some(svg.finish())
    }
}
