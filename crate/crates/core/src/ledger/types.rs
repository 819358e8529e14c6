use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Three-letter lowercase ISO 639-3 language code.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Iso([u8; 3]);

impl Iso {
    pub fn new(code: &str) -> Result<Self> {
        let bytes = code.as_bytes();
        if bytes.len() != 3 || !bytes.iter().all(u8::is_ascii_lowercase) {
            return Err(Error::InvalidIso(code.to_string()));
        }
        Ok(Iso([bytes[0], bytes[1], bytes[2]]))
    }

    pub fn as_str(&self) -> &str {
        // validated ASCII on construction
        std::str::from_utf8(&self.0).expect("iso codes are ASCII")
    }
}

impl FromStr for Iso {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Iso::new(s)
    }
}

impl fmt::Display for Iso {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Debug for Iso {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Iso({})", self.as_str())
    }
}

impl Serialize for Iso {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for Iso {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Iso::new(&s).map_err(serde::de::Error::custom)
    }
}

/// Task identifier such as `dep`, `pos`, `ner`, `xnli`, `anli` or `tydiqa`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TaskId(String);

impl TaskId {
    pub fn new(id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() || id.contains(',') || id.chars().any(char::is_whitespace) {
            return Err(Error::InvalidArgument(format!("invalid task id {id:?}")));
        }
        Ok(TaskId(id))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// Name of the metric the task is scored with. All metrics share the
    /// 0-100 scale, higher is better.
    pub fn metric_name(&self) -> &'static str {
        match self.0.as_str() {
            "dep" | "udp" | "parsing" => "LAS",
            "pos" => "accuracy",
            "ner" => "F1",
            "xnli" | "anli" | "nli" => "accuracy",
            "tydiqa" | "qa" => "span-F1",
            _ => "score",
        }
    }
}

impl Borrow<str> for TaskId {
    fn borrow(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for TaskId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl FromStr for TaskId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        TaskId::new(s)
    }
}

/// Canonically sorted set of one to three languages fused in an interaction.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Combo(Vec<Iso>);

impl Combo {
    pub const MAX_ARITY: usize = 3;

    pub fn new(mut langs: Vec<Iso>) -> Result<Self> {
        if langs.is_empty() || langs.len() > Self::MAX_ARITY {
            return Err(Error::InvalidCombo(format!(
                "expected 1 to {} languages, got {}",
                Self::MAX_ARITY,
                langs.len()
            )));
        }
        langs.sort();
        if langs.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::InvalidCombo(format!(
                "duplicate language in {}",
                join_isos(&langs)
            )));
        }
        Ok(Combo(langs))
    }

    pub fn single(lang: Iso) -> Self {
        Combo(vec![lang])
    }

    pub fn langs(&self) -> &[Iso] {
        &self.0
    }

    pub fn arity(&self) -> usize {
        self.0.len()
    }

    pub fn contains(&self, lang: Iso) -> bool {
        self.0.binary_search(&lang).is_ok()
    }

    /// Members other than `lang`, in canonical order.
    pub fn partners(&self, lang: Iso) -> impl Iterator<Item = Iso> + '_ {
        self.0.iter().copied().filter(move |l| *l != lang)
    }
}

fn join_isos(langs: &[Iso]) -> String {
    langs
        .iter()
        .map(Iso::as_str)
        .collect::<Vec<_>>()
        .join("+")
}

impl fmt::Display for Combo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&join_isos(&self.0))
    }
}

impl FromStr for Combo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let langs = s
            .split('+')
            .map(|part| Iso::new(part.trim()))
            .collect::<Result<Vec<_>>>()?;
        Combo::new(langs)
    }
}

/// Registry entry for one language.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LanguageInfo {
    pub iso: Iso,
    pub family: String,
    pub genus: String,
    pub script: String,
    /// Present in the base model's pretraining data.
    pub seen: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BaselineRecord {
    pub model: String,
    pub task: TaskId,
    pub target: Iso,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: String,
    pub task: TaskId,
    pub transfer: Iso,
    pub target: Iso,
    pub steps: u32,
    pub rep: u32,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct InteractionRecord {
    pub model: String,
    pub task: TaskId,
    pub combo: Combo,
    pub eval: Iso,
    pub score: f64,
}

pub(crate) fn check_score(score: f64, key: impl FnOnce() -> String) -> Result<()> {
    if score.is_finite() && (0.0..=100.0).contains(&score) {
        Ok(())
    } else {
        Err(Error::ScoreOutOfRange { key: key(), score })
    }
}
