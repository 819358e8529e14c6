//! Deterministic synthetic ledgers with a planted-effect truth table.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::types::{BaselineRecord, Combo, InteractionRecord, Iso, LanguageInfo, RunRecord, TaskId};
use super::{Ledger, LoadOptions, Registry};
use crate::error::{Error, Result};

const TASK_NAMES: [&str; 6] = ["dep", "pos", "ner", "xnli", "anli", "tydiqa"];
/// ISO 639 reserves `qaa`..`qtz` for local use: 20 × 26 codes.
const MAX_LANGUAGES: usize = 520;

#[derive(Clone, Debug, PartialEq)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_transfer: usize,
    pub n_target: usize,
    pub tasks: usize,
    pub step_grid: Vec<u32>,
    pub rep_count: usize,
    /// Per-repetition Gaussian noise, score points.
    pub noise_sd: f64,
    /// Spread of the planted per-cell effect, score points.
    pub effect_sd: f64,
    /// Spread of the planted change per decade of steps, score points.
    pub trend_sd: f64,
    /// Probability that a (transfer, target) cell has no runs.
    pub missing_rate: f64,
    /// Largest interaction arity to generate (0 disables interactions).
    pub interaction_arity: usize,
    pub model: String,
    /// `(transfer index, target index, delta)` overriding the drawn effect
    /// of a cell for every task and step.
    pub planted: Vec<(usize, usize, f64)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 7,
            n_transfer: 6,
            n_target: 12,
            tasks: 2,
            step_grid: vec![1, 10, 100, 1000],
            rep_count: 10,
            noise_sd: 1.0,
            effect_sd: 2.0,
            trend_sd: 0.5,
            missing_rate: 0.0,
            interaction_arity: 3,
            model: "mbert".to_string(),
            planted: Vec::new(),
        }
    }
}

/// Planted score delta of one (cell, steps), in score points.
#[derive(Clone, Debug, PartialEq)]
pub struct TruthRecord {
    pub model: String,
    pub task: TaskId,
    pub transfer: Iso,
    pub target: Iso,
    pub steps: u32,
    pub delta: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SynthTruth {
    pub records: Vec<TruthRecord>,
}

impl SynthTruth {
    pub fn delta(&self, task: &str, transfer: Iso, target: Iso, steps: u32) -> Option<f64> {
        self.records
            .iter()
            .find(|r| {
                r.task.as_str() == task && r.transfer == transfer && r.target == target && r.steps == steps
            })
            .map(|r| r.delta)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,task,transfer,target,steps,delta\n");
        for r in &self.records {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                r.model, r.task, r.transfer, r.target, r.steps, r.delta
            ));
        }
        out
    }
}

pub fn synth_iso(index: usize) -> Iso {
    assert!(index < MAX_LANGUAGES, "synthetic language index out of range");
    let code = [b'q', b'a' + (index / 26) as u8, b'a' + (index % 26) as u8];
    Iso::new(std::str::from_utf8(&code).expect("ascii")).expect("valid code")
}

fn round_to(x: f64, places: i32) -> f64 {
    let scale = 10f64.powi(places);
    (x * scale).round() / scale
}

fn clamp_score(x: f64) -> f64 {
    round_to(x, 2).clamp(0.0, 100.0)
}

fn task_name(i: usize) -> String {
    TASK_NAMES
        .get(i)
        .map_or_else(|| format!("task{i}"), |s| s.to_string())
}

/// Generates a ledger whose run scores are `baseline + planted delta + noise`.
///
/// Transfer languages are the first `n_transfer` synthetic codes and targets
/// the first `n_target`, so the two sets overlap and self-evaluation cells
/// exist. Output is a pure function of `config`.
pub fn synth_ledger(config: &SynthConfig) -> Result<(Ledger, SynthTruth)> {
    if config.n_transfer == 0 || config.n_target == 0 || config.tasks == 0 || config.rep_count == 0 {
        return Err(Error::InvalidArgument(
            "synthetic dimensions must all be at least 1".into(),
        ));
    }
    if config.step_grid.is_empty() || config.step_grid.contains(&0) {
        return Err(Error::InvalidArgument("step grid must be non-empty and positive".into()));
    }
    for (name, sd) in [
        ("noise_sd", config.noise_sd),
        ("effect_sd", config.effect_sd),
        ("trend_sd", config.trend_sd),
    ] {
        if !(sd.is_finite() && sd >= 0.0) {
            return Err(Error::InvalidArgument(format!("{name} must be finite and >= 0")));
        }
    }
    if !(0.0..1.0).contains(&config.missing_rate) {
        return Err(Error::InvalidArgument("missing_rate must be in [0, 1)".into()));
    }
    let pool = config.n_transfer.max(config.n_target);
    if pool > MAX_LANGUAGES {
        return Err(Error::InvalidArgument(format!(
            "at most {MAX_LANGUAGES} synthetic languages are supported"
        )));
    }
    for &(i, j, _) in &config.planted {
        if i >= config.n_transfer || j >= config.n_target {
            return Err(Error::InvalidArgument(format!("planted cell ({i}, {j}) out of range")));
        }
    }

    let mut grid = config.step_grid.clone();
    grid.sort_unstable();
    grid.dedup();

    let normal = |sd: f64| Normal::new(0.0, sd).expect("validated sd");
    let noise = normal(config.noise_sd);
    let effect = normal(config.effect_sd);
    let trend = normal(config.trend_sd);
    let interaction_noise = normal(1.0);

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let langs: Vec<LanguageInfo> = (0..pool)
        .map(|i| LanguageInfo {
            iso: synth_iso(i),
            family: "Synthetic".to_string(),
            genus: format!("Group{}", i % 5),
            script: "Latn".to_string(),
            seen: rng.random_bool(0.7),
        })
        .collect();
    let registry = Registry::new(langs)?;

    let mut baselines = Vec::new();
    let mut runs = Vec::new();
    let mut interactions = Vec::new();
    let mut truth = SynthTruth::default();

    for t in 0..config.tasks {
        let task = TaskId::new(task_name(t))?;
        let base: Vec<f64> = (0..config.n_target)
            .map(|_| round_to(rng.random_range(20.0..=95.0), 2))
            .collect();
        for (j, score) in base.iter().enumerate() {
            baselines.push(BaselineRecord {
                model: config.model.clone(),
                task: task.clone(),
                target: synth_iso(j),
                score: *score,
            });
        }

        for i in 0..config.n_transfer {
            for (j, baseline) in base.iter().enumerate() {
                let missing = rng.random::<f64>() < config.missing_rate;
                let mut cell_effect = effect.sample(&mut rng);
                let mut cell_trend = trend.sample(&mut rng);
                if let Some(&(_, _, delta)) =
                    config.planted.iter().find(|(pi, pj, _)| *pi == i && *pj == j)
                {
                    cell_effect = delta;
                    cell_trend = 0.0;
                }
                if missing {
                    continue;
                }
                for &steps in &grid {
                    let delta = round_to(cell_effect + cell_trend * f64::from(steps).log10(), 2);
                    truth.records.push(TruthRecord {
                        model: config.model.clone(),
                        task: task.clone(),
                        transfer: synth_iso(i),
                        target: synth_iso(j),
                        steps,
                        delta,
                    });
                    for rep in 0..config.rep_count {
                        let score = clamp_score(baseline + delta + noise.sample(&mut rng));
                        runs.push(RunRecord {
                            model: config.model.clone(),
                            task: task.clone(),
                            transfer: synth_iso(i),
                            target: synth_iso(j),
                            steps,
                            rep: rep as u32,
                            score,
                        });
                    }
                }
            }
        }

        if config.interaction_arity == 0 {
            continue;
        }
        let mono: Vec<f64> = (0..config.n_transfer)
            .map(|_| round_to(rng.random_range(30.0..=90.0), 2))
            .collect();
        for combo in index_combos(config.n_transfer, config.interaction_arity.min(Combo::MAX_ARITY)) {
            let members: Vec<Iso> = combo.iter().map(|i| synth_iso(*i)).collect();
            let canonical = Combo::new(members)?;
            for &i in &combo {
                let score = if combo.len() == 1 {
                    mono[i]
                } else {
                    // rounding to 0.1 makes exact ties with the monolingual score common
                    clamp_score(mono[i] + round_to(interaction_noise.sample(&mut rng), 1))
                };
                interactions.push(InteractionRecord {
                    model: config.model.clone(),
                    task: task.clone(),
                    combo: canonical.clone(),
                    eval: synth_iso(i),
                    score,
                });
            }
        }
    }

    let options = LoadOptions {
        strict: false,
        step_grid: Some(grid),
    };
    let ledger = Ledger::from_records(registry, baselines, runs, interactions, &options)?;
    Ok((ledger, truth))
}

/// All index subsets of size 1..=max_arity, by size then lexicographically.
fn index_combos(n: usize, max_arity: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if max_arity >= 1 {
        out.extend((0..n).map(|i| vec![i]));
    }
    if max_arity >= 2 {
        for i in 0..n {
            for j in i + 1..n {
                out.push(vec![i, j]);
            }
        }
    }
    if max_arity >= 3 {
        for i in 0..n {
            for j in i + 1..n {
                for k in j + 1..n {
                    out.push(vec![i, j, k]);
                }
            }
        }
    }
    out
}
