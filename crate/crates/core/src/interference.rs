//! Negative interference between fused language adapters.
//!
//! A language's sign inside a combination is `+` when its score under the
//! combination beats its monolingual `[A]` score, `-` otherwise. Counting
//! sign patterns over all combinations that contain a language A gives the
//! `|±A,±B(,±C)|` tallies, and the dot product of those tallies with the
//! quadrant identifiers places A in `[-1,1]²`: x is the interference A
//! receives, y the interference it provides.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ledger::{Combo, Iso, Ledger, TaskId, TaskLedger};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum Sign {
    #[serde(rename = "-")]
    Negative,
    #[serde(rename = "+")]
    Positive,
}

impl Sign {
    pub fn classify(delta: f64, tie: TieRule) -> Sign {
        if delta > 0.0 || (delta == 0.0 && tie == TieRule::Positive) {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Sign::Positive
    }

    fn bit(self) -> usize {
        self as usize
    }

    fn unit(self) -> f64 {
        match self {
            Sign::Positive => 1.0,
            Sign::Negative => -1.0,
        }
    }

    pub fn symbol(self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Negative => '-',
        }
    }

    pub fn word(self) -> &'static str {
        match self {
            Sign::Positive => "pos",
            Sign::Negative => "neg",
        }
    }
}

impl fmt::Display for Sign {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.symbol())
    }
}

/// How a delta of exactly zero is classified.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    /// Only strict improvement is positive.
    #[default]
    Negative,
    Positive,
}

impl FromStr for TieRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "negative" | "neg" => Ok(TieRule::Negative),
            "positive" | "pos" => Ok(TieRule::Positive),
            other => Err(Error::InvalidArgument(format!("unknown tie rule {other:?}"))),
        }
    }
}

fn delta_in(data: &TaskLedger, combo: &Combo, lang: Iso) -> Result<f64> {
    if !combo.contains(lang) {
        return Err(Error::EvalNotInCombo {
            eval: lang.to_string(),
            combo: combo.to_string(),
        });
    }
    let missing = |c: &Combo| Error::MissingInteraction {
        combo: c.to_string(),
        eval: lang.to_string(),
    };
    let score = data.interaction(combo, lang).ok_or_else(|| missing(combo))?;
    let mono_combo = Combo::single(lang);
    let mono = data
        .interaction(&mono_combo, lang)
        .ok_or_else(|| missing(&mono_combo))?;
    Ok(score - mono)
}

/// `score(combo, lang) - score([lang], lang)`.
pub fn interaction_delta(ledger: &Ledger, model: &str, task: &str, combo: &Combo, lang: Iso) -> Result<f64> {
    delta_in(ledger.task_or_err(model, task)?, combo, lang)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct InterferenceSign {
    pub lang: Iso,
    pub combo: String,
    pub delta: f64,
    pub sign: Sign,
}

pub fn interference_sign(
    ledger: &Ledger,
    model: &str,
    task: &str,
    combo: &Combo,
    lang: Iso,
    tie: TieRule,
) -> Result<InterferenceSign> {
    let delta = interaction_delta(ledger, model, task, combo, lang)?;
    Ok(InterferenceSign {
        lang,
        combo: combo.to_string(),
        delta,
        sign: Sign::classify(delta, tie),
    })
}

/// Which tasks pattern counts are pooled over.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum TaskScope {
    Single(TaskId),
    /// Every task of the model.
    Pooled,
}

impl TaskScope {
    pub fn label(&self) -> &str {
        match self {
            TaskScope::Single(t) => t.as_str(),
            TaskScope::Pooled => "all",
        }
    }

    fn tasks<'a>(&self, ledger: &'a Ledger, model: &str) -> Result<Vec<&'a TaskLedger>> {
        match self {
            TaskScope::Single(t) => Ok(vec![ledger.task_or_err(model, t.as_str())?]),
            TaskScope::Pooled => {
                let tasks: Vec<_> = ledger
                    .tasks(model)
                    .filter_map(|t| ledger.task(model, t.as_str()))
                    .collect();
                if tasks.is_empty() {
                    return Err(Error::EmptySelection(format!("no tasks for model {model:?}")));
                }
                Ok(tasks)
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PatternOptions {
    /// Restrict to combinations containing this partner and put it in the
    /// B position; C is the remaining member.
    pub partner: Option<Iso>,
    pub tie: TieRule,
}

/// Sign-pattern tallies of one language A over combinations of one arity.
///
/// Pattern index bits run from A (most significant) to the last partner,
/// with `+` = 1: at arity 2 the order is `|-A,-B|, |-A,+B|, |+A,-B|, |+A,+B|`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct InterferenceCounts {
    pub lang: Iso,
    pub arity: usize,
    pub partner: Option<Iso>,
    pub counts: Vec<usize>,
}

impl InterferenceCounts {
    pub fn new(lang: Iso, arity: usize, counts: Vec<usize>) -> Result<Self> {
        if !(2..=Combo::MAX_ARITY).contains(&arity) {
            return Err(Error::InvalidArgument(format!("interference arity must be 2 or 3, got {arity}")));
        }
        if counts.len() != 1 << arity {
            return Err(Error::InvalidArgument(format!(
                "arity {arity} needs {} pattern counts, got {}",
                1 << arity,
                counts.len()
            )));
        }
        Ok(InterferenceCounts {
            lang,
            arity,
            partner: None,
            counts,
        })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn index(signs: &[Sign]) -> usize {
        signs.iter().fold(0, |acc, s| acc * 2 + s.bit())
    }

    pub fn pattern(&self, index: usize) -> Vec<Sign> {
        (0..self.arity)
            .rev()
            .map(|bit| {
                if index >> bit & 1 == 1 {
                    Sign::Positive
                } else {
                    Sign::Negative
                }
            })
            .collect()
    }

    pub fn get(&self, signs: &[Sign]) -> usize {
        self.counts[Self::index(signs)]
    }

    /// Pattern in table notation, e.g. `+A,-B,+C`.
    pub fn label(&self, index: usize) -> String {
        self.pattern(index)
            .iter()
            .zip(["A", "B", "C"])
            .map(|(s, n)| format!("{s}{n}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    /// Count mass whose sign at `position` (0 = A) is positive and negative.
    pub fn marginal(&self, position: usize) -> (usize, usize) {
        let bit = self.arity - 1 - position;
        let mut pos = 0;
        let mut neg = 0;
        for (i, c) in self.counts.iter().enumerate() {
            if i >> bit & 1 == 1 {
                pos += c;
            } else {
                neg += c;
            }
        }
        (pos, neg)
    }
}

/// Combinations of `arity` present in a task, in canonical order.
fn combos_of(data: &TaskLedger, arity: usize) -> Vec<&Combo> {
    let mut seen: BTreeSet<&Combo> = BTreeSet::new();
    for (combo, _, _) in data.interactions() {
        if combo.arity() == arity {
            seen.insert(combo);
        }
    }
    seen.into_iter().collect()
}

fn member_order(combo: &Combo, lang: Iso, partner: Option<Iso>) -> Option<Vec<Iso>> {
    if !combo.contains(lang) {
        return None;
    }
    let mut order = vec![lang];
    match partner {
        Some(b) => {
            if b == lang || !combo.contains(b) {
                return None;
            }
            order.push(b);
            order.extend(combo.partners(lang).filter(|l| *l != b));
        }
        None => order.extend(combo.partners(lang)),
    }
    Some(order)
}

/// Tallies sign patterns of `lang` over every combination of `arity` that
/// contains it and has complete sign information (each member has both a
/// combination score and a monolingual score). Partners appear in canonical
/// iso order unless `options.partner` fixes the B position.
pub fn pattern_counts(
    ledger: &Ledger,
    model: &str,
    scope: &TaskScope,
    lang: Iso,
    arity: usize,
    options: &PatternOptions,
) -> Result<InterferenceCounts> {
    let mut counts = InterferenceCounts::new(lang, arity, vec![0; 1 << arity])?;
    counts.partner = options.partner;
    for data in scope.tasks(ledger, model)? {
        for combo in combos_of(data, arity) {
            let Some(order) = member_order(combo, lang, options.partner) else {
                continue;
            };
            let signs: Option<Vec<Sign>> = order
                .iter()
                .map(|m| delta_in(data, combo, *m).ok().map(|d| Sign::classify(d, options.tie)))
                .collect();
            if let Some(signs) = signs {
                counts.counts[InterferenceCounts::index(&signs)] += 1;
            }
        }
    }
    if counts.total() == 0 {
        return Err(Error::EmptySelection(format!(
            "no arity-{arity} combinations with complete scores contain {lang} ({model}, {})",
            scope.label()
        )));
    }
    Ok(counts)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProjectionPoint {
    /// Interference received, in [-1, 1].
    pub x: f64,
    /// Interference provided, in [-1, 1].
    pub y: f64,
}

fn require_mass(counts: &InterferenceCounts) -> Result<f64> {
    match counts.total() {
        0 => Err(Error::Insufficient(format!(
            "projection of {} needs at least one counted combination",
            counts.lang
        ))),
        c => Ok(c as f64),
    }
}

/// Dot product of the counts with the quadrant identifiers of A and B,
/// divided by the total.
fn dot_projection(counts: &InterferenceCounts) -> Result<ProjectionPoint> {
    let total = require_mass(counts)?;
    let mut x = 0.0;
    let mut y = 0.0;
    for (i, c) in counts.counts.iter().enumerate() {
        let pattern = counts.pattern(i);
        x += *c as f64 * pattern[0].unit();
        y += *c as f64 * pattern[1].unit();
    }
    Ok(ProjectionPoint {
        x: x / total,
        y: y / total,
    })
}

/// `x = (|+A,·| - |-A,·|)/C`, `y = (|·,+B| - |·,-B|)/C`. Algebraically equal
/// to the dot-product form.
pub fn marginal_projection(counts: &InterferenceCounts) -> Result<ProjectionPoint> {
    let total = require_mass(counts)?;
    let (ap, an) = counts.marginal(0);
    let (bp, bn) = counts.marginal(1);
    Ok(ProjectionPoint {
        x: (ap as f64 - an as f64) / total,
        y: (bp as f64 - bn as f64) / total,
    })
}

pub fn project_bilingual(counts: &InterferenceCounts) -> Result<ProjectionPoint> {
    if counts.arity != 2 {
        return Err(Error::InvalidArgument(format!(
            "bilingual projection needs arity-2 counts, got arity {}",
            counts.arity
        )));
    }
    dot_projection(counts)
}

/// Majority sign of the third language over the counted combinations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ThirdSign {
    pub positive: usize,
    pub negative: usize,
    /// Positive only on a strict majority.
    pub sign: Sign,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct TrilingualPoint {
    pub point: ProjectionPoint,
    pub partner: Option<Iso>,
    pub third: ThirdSign,
}

impl TrilingualPoint {
    /// Scatter annotation such as `ben:neg` (partner, then the third
    /// language's majority sign).
    pub fn annotation(&self) -> String {
        match self.partner {
            Some(p) => format!("{p}:{}", self.third.sign.word()),
            None => self.third.sign.word().to_string(),
        }
    }
}

/// Collapses the eight patterns pairwise over C's sign and projects on
/// (A, B); C's majority sign is kept as the annotation.
pub fn project_trilingual(counts: &InterferenceCounts) -> Result<TrilingualPoint> {
    if counts.arity != 3 {
        return Err(Error::InvalidArgument(format!(
            "trilingual projection needs arity-3 counts, got arity {}",
            counts.arity
        )));
    }
    let point = dot_projection(counts)?;
    let (positive, negative) = counts.marginal(2);
    Ok(TrilingualPoint {
        point,
        partner: counts.partner,
        third: ThirdSign {
            positive,
            negative,
            sign: if positive > negative {
                Sign::Positive
            } else {
                Sign::Negative
            },
        },
    })
}

/// Projection of raw pattern counts given in index order.
pub fn project_counts(arity: usize, counts: &[usize]) -> Result<ProjectionPoint> {
    let counts = InterferenceCounts::new(Iso::new("und").expect("valid"), arity, counts.to_vec())?;
    dot_projection(&counts)
}

/// Mean of `score(combo, lang)` over combinations of `arity` containing
/// `lang`, evaluated on `lang`.
pub fn averaged_interaction_score(ledger: &Ledger, model: &str, task: &str, lang: Iso, arity: usize) -> Result<f64> {
    let data = ledger.task_or_err(model, task)?;
    let scores: Vec<f64> = data
        .interactions()
        .filter(|(c, eval, _)| c.arity() == arity && *eval == lang)
        .map(|(_, _, s)| s)
        .collect();
    if scores.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no arity-{arity} combinations evaluated on {lang} for {model}/{task}"
        )));
    }
    Ok(scores.iter().sum::<f64>() / scores.len() as f64)
}

/// One row of the interference scatter export.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ScatterPoint {
    pub lang: Iso,
    pub task: String,
    pub arity: usize,
    pub x: f64,
    pub y: f64,
    pub annotation: String,
}

fn interference_langs(ledger: &Ledger, model: &str, scope: &TaskScope, arity: usize) -> Result<Vec<Iso>> {
    let mut langs = BTreeSet::new();
    for data in scope.tasks(ledger, model)? {
        for combo in combos_of(data, arity) {
            langs.extend(combo.langs().iter().copied());
        }
    }
    Ok(langs.into_iter().collect())
}

/// Scatter points for every language with qualifying combinations. At arity
/// 3 there is one point per (A, B) pair. Languages are processed in
/// parallel; output order is canonical.
pub fn scatter_points(
    ledger: &Ledger,
    model: &str,
    scope: &TaskScope,
    arity: usize,
    tie: TieRule,
) -> Result<Vec<ScatterPoint>> {
    if !(2..=Combo::MAX_ARITY).contains(&arity) {
        return Err(Error::InvalidArgument(format!("interference arity must be 2 or 3, got {arity}")));
    }
    let langs = interference_langs(ledger, model, scope, arity)?;
    let per_lang: Vec<Vec<ScatterPoint>> = langs
        .par_iter()
        .map(|&lang| {
            let row = |x: f64, y: f64, annotation: String| ScatterPoint {
                lang,
                task: scope.label().to_string(),
                arity,
                x,
                y,
                annotation,
            };
            if arity == 2 {
                let opts = PatternOptions { partner: None, tie };
                return match pattern_counts(ledger, model, scope, lang, 2, &opts) {
                    Ok(c) => {
                        let p = project_bilingual(&c).expect("non-empty counts");
                        vec![row(p.x, p.y, String::new())]
                    }
                    Err(_) => Vec::new(),
                };
            }
            langs
                .iter()
                .filter(|b| **b != lang)
                .filter_map(|&b| {
                    let opts = PatternOptions { partner: Some(b), tie };
                    let counts = pattern_counts(ledger, model, scope, lang, 3, &opts).ok()?;
                    let t = project_trilingual(&counts).expect("non-empty counts");
                    Some(row(t.point.x, t.point.y, t.annotation()))
                })
                .collect()
        })
        .collect();
    let points: Vec<ScatterPoint> = per_lang.into_iter().flatten().collect();
    if points.is_empty() {
        return Err(Error::EmptySelection(format!(
            "no arity-{arity} interference data for {model} ({})",
            scope.label()
        )));
    }
    Ok(points)
}
