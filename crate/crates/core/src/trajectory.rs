//! Observed trajectories and their JSON-lines representation.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::driving_world::{Action, Cell};
use crate::error::{Error, Result};
use crate::oomdp::Construal;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Step<S, A> {
    pub s: S,
    pub a: A,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<S, A> {
    pub scenario_id: String,
    pub agent_id: u64,
    pub steps: Vec<Step<S, A>>,
    #[serde(rename = "return")]
    pub ret: f64,
    /// The construal that generated the trajectory, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub latent_construal: Option<Construal>,
    #[serde(default, skip_serializing_if = "is_false")]
    pub truncated: bool,
}

pub type GridTrajectory = Trajectory<Cell, Action>;

/// Trajectories to fit, plus the ids of the scenarios they may refer to.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<S, A> {
    pub trajectories: Vec<Trajectory<S, A>>,
}

impl<S, A> Dataset<S, A> {
    pub fn new(trajectories: Vec<Trajectory<S, A>>) -> Self {
        Dataset { trajectories }
    }

    pub fn validate<'a>(&self, scenario_ids: impl IntoIterator<Item = &'a str>) -> Result<()> {
        if self.trajectories.is_empty() {
            return Err(Error::Data("dataset has no trajectories".into()));
        }
        let known: BTreeSet<&str> = scenario_ids.into_iter().collect();
        for (i, t) in self.trajectories.iter().enumerate() {
            if !known.contains(t.scenario_id.as_str()) {
                return Err(Error::Data(format!(
                    "trajectory {i} refers to unknown scenario {:?}",
                    t.scenario_id
                )));
            }
            if t.steps.is_empty() {
                return Err(Error::Data(format!("trajectory {i} has no steps")));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }
}

pub fn write_jsonl<T: Serialize>(mut w: impl Write, items: &[T]) -> Result<()> {
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n")?;
    }
    Ok(())
}

pub fn save_jsonl<T: Serialize>(path: impl AsRef<Path>, items: &[T]) -> Result<()> {
    let mut buf = Vec::new();
    write_jsonl(&mut buf, items)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(r: impl BufRead, source: &str) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source_err| Error::Parse {
            path: format!("{source}:{}", i + 1),
            source: source_err,
        })?);
    }
    Ok(out)
}

pub fn load_jsonl<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<Vec<T>> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_jsonl(std::io::BufReader::new(file), &path.display().to_string())
}
