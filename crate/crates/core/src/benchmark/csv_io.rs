//! CSV schema for experiment results.
//!
//! Header: `trial,T,lambda,gamma_label,regularizer,seed,tau,regret,
//! relative_regret,maxmin_fairness,avg_reward,realized_objective,
//! fluid_per_period,regret_ci95,relative_regret_ci95,maxmin_fairness_ci95,
//! avg_reward_ci95`.
//!
//! Data rows carry a numeric `trial` and empty `*_ci95` columns. Aggregate
//! rows carry `trial = aggregate`, trial means in the metric columns and the
//! 95% half-widths in the `*_ci95` columns.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub const AGGREGATE: &str = "aggregate";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Trial {
    Index(usize),
    Aggregate,
}

impl Serialize for Trial {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Trial::Index(i) => s.serialize_str(&i.to_string()),
            Trial::Aggregate => s.serialize_str(AGGREGATE),
        }
    }
}

impl<'de> Deserialize<'de> for Trial {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        if s == AGGREGATE {
            return Ok(Trial::Aggregate);
        }
        s.parse()
            .map(Trial::Index)
            .map_err(|_| serde::de::Error::custom(format!("trial must be an index or `{AGGREGATE}`, got `{s}`")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub trial: Trial,
    #[serde(rename = "T")]
    pub horizon: usize,
    pub lambda: f64,
    pub gamma_label: String,
    pub regularizer: String,
    pub seed: u64,
    /// Stopping time; the trial mean on aggregate rows.
    pub tau: f64,
    pub regret: f64,
    pub relative_regret: f64,
    pub maxmin_fairness: f64,
    pub avg_reward: f64,
    pub realized_objective: f64,
    pub fluid_per_period: f64,
    pub regret_ci95: Option<f64>,
    pub relative_regret_ci95: Option<f64>,
    pub maxmin_fairness_ci95: Option<f64>,
    pub avg_reward_ci95: Option<f64>,
}

impl ExperimentRow {
    pub fn is_aggregate(&self) -> bool {
        self.trial == Trial::Aggregate
    }
}

pub const HEADER: [&str; 17] = [
    "trial",
    "T",
    "lambda",
    "gamma_label",
    "regularizer",
    "seed",
    "tau",
    "regret",
    "relative_regret",
    "maxmin_fairness",
    "avg_reward",
    "realized_objective",
    "fluid_per_period",
    "regret_ci95",
    "relative_regret_ci95",
    "maxmin_fairness_ci95",
    "avg_reward_ci95",
];

pub fn write_rows<W: Write>(w: W, rows: &[ExperimentRow]) -> Result<()> {
    let mut writer = csv::Writer::from_writer(w);
    if rows.is_empty() {
        writer.write_record(HEADER)?;
    }
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_rows<R: Read>(r: R) -> Result<Vec<ExperimentRow>> {
    let mut reader = csv::Reader::from_reader(r);
    let header = reader.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        let missing: Vec<&str> = HEADER.iter().copied().filter(|h| !header.iter().any(|x| x == *h)).collect();
        return Err(Error::Contract(format!("unexpected CSV header; missing columns: {missing:?}")));
    }
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

pub fn write_csv(path: &Path, rows: &[ExperimentRow]) -> Result<()> {
    let io = |source| Error::Io {
        path: path.to_path_buf(),
        source,
    };
    let file = std::fs::File::create(path).map_err(io)?;
    write_rows(std::io::BufWriter::new(file), rows)
}

pub fn read_csv(path: &Path) -> Result<Vec<ExperimentRow>> {
    let file = std::fs::File::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    read_rows(std::io::BufReader::new(file))
}
