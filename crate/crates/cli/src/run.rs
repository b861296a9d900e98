//! Run directories: manifests, scenario files, config snapshots and exit
//! codes.

use std::fs;
use std::path::{Path, PathBuf};

use aaip_core::continuous::{builtin_scenes, load_scene, save_scene, ContinuousConfig, ContinuousScene};
use aaip_core::driving_world::{fig1_scenario, fig3_scenario, load_scenario, save_scenario, GridScenario};
use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use crate::{Cli, Domain};

pub const MANIFEST: &str = "manifest.json";
pub const DATASET: &str = "dataset.jsonl";
pub const CONFIG: &str = "config.json";

/// A numerical failure (non-finite objective and the like), reported with
/// exit code 3.
#[derive(Debug)]
pub struct Numerical(pub String);

impl std::fmt::Display for Numerical {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "numerical failure: {}", self.0)
    }
}

impl std::error::Error for Numerical {}

pub fn exit_code(e: &anyhow::Error) -> u8 {
    if e.downcast_ref::<Numerical>().is_some() {
        return 3;
    }
    match e.downcast_ref::<aaip_core::Error>() {
        Some(core) if !core.is_validation() => 3,
        _ => 2,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub id: u64,
    pub lambda: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub domain: Domain,
    pub seed: u64,
    pub beta: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub continuous: Option<ContinuousConfig>,
    /// Scenario files relative to the run directory.
    pub scenarios: Vec<String>,
    pub feature_names: Vec<String>,
    pub agents: Vec<AgentRecord>,
    pub trajectories: usize,
    pub dataset: String,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Manifest> {
        let path = dir.join(MANIFEST);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    pub fn agent(&self, id: Option<u64>) -> Result<&AgentRecord> {
        match id {
            None => self.agents.first().context("manifest lists no agents"),
            Some(id) => self
                .agents
                .iter()
                .find(|a| a.id == id)
                .with_context(|| format!("no agent {id} in the manifest")),
        }
    }

    pub fn grid_scenarios(&self, dir: &Path) -> Result<Vec<GridScenario>> {
        self.scenarios
            .iter()
            .map(|f| Ok(load_scenario(dir.join(f))?))
            .collect()
    }

    pub fn scenes(&self, dir: &Path) -> Result<Vec<ContinuousScene>> {
        self.scenarios.iter().map(|f| Ok(load_scene(dir.join(f))?)).collect()
    }
}

pub fn create_out(cli: &Cli) -> Result<&Path> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    Ok(&cli.out)
}

/// Writes the full invocation so the run can be repeated exactly.
pub fn write_config(cli: &Cli) -> Result<()> {
    #[derive(Serialize)]
    struct Snapshot<'a> {
        version: &'a str,
        #[serde(flatten)]
        cli: &'a Cli,
    }
    let snap = Snapshot {
        version: env!("CARGO_PKG_VERSION"),
        cli,
    };
    write_json(&cli.out.join(CONFIG), &snap)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Resolves a tabular scenario name or path.
pub fn grid_scenario(spec: &str) -> Result<GridScenario> {
    match spec {
        "fig1" => Ok(fig1_scenario()),
        "fig3" => Ok(fig3_scenario()),
        path => Ok(load_scenario(path)?),
    }
}

/// Resolves a continuous scene id or path.
pub fn scene(spec: &str) -> Result<ContinuousScene> {
    if let Some(s) = builtin_scenes().into_iter().find(|s| s.id == spec) {
        return Ok(s);
    }
    if !Path::new(spec).exists() {
        bail!("{spec:?} is neither a built-in scene nor an existing file");
    }
    Ok(load_scene(spec)?)
}

fn unique_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            bail!("scenario id {id:?} appears twice");
        }
    }
    Ok(())
}

/// Copies the scenarios into `dir/scenarios` and returns relative paths.
pub fn save_grid_scenarios(dir: &Path, scenarios: &[GridScenario]) -> Result<Vec<String>> {
    unique_ids(scenarios.iter().map(|s| s.id.as_str()))?;
    fs::create_dir_all(dir.join("scenarios"))?;
    scenarios
        .iter()
        .map(|s| {
            let rel = format!("scenarios/{}.json", s.id);
            save_scenario(dir.join(&rel), s)?;
            Ok(rel)
        })
        .collect()
}

pub fn save_scenes(dir: &Path, scenes: &[ContinuousScene]) -> Result<Vec<String>> {
    unique_ids(scenes.iter().map(|s| s.id.as_str()))?;
    fs::create_dir_all(dir.join("scenarios"))?;
    scenes
        .iter()
        .map(|s| {
            let rel = format!("scenarios/{}.json", s.id);
            save_scene(dir.join(&rel), s)?;
            Ok(rel)
        })
        .collect()
}

/// `lo,hi` from a two-element argument.
pub fn range(v: &[f64], what: &str) -> Result<(f64, f64)> {
    match *v {
        [lo, hi] if lo.is_finite() && hi.is_finite() && lo <= hi => Ok((lo, hi)),
        _ => bail!("{what} must be two finite numbers lo,hi with lo <= hi"),
    }
}

pub fn existing_dir(p: &Path) -> Result<PathBuf> {
    if !p.is_dir() {
        bail!("{} is not a directory", p.display());
    }
    Ok(p.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_separate_bad_input_from_numerical_failure() {
        let div = aaip_core::Error::Divergence {
            iterations: 10,
            residual: 1.0,
        };
        assert_eq!(exit_code(&div.into()), 3);
        assert_eq!(exit_code(&Numerical("nan".into()).into()), 3);
        assert_eq!(exit_code(&aaip_core::Error::Validation(vec!["x".into()]).into()), 2);
        assert_eq!(exit_code(&anyhow::anyhow!("missing file")), 2);
    }

    #[test]
    fn ranges_must_be_ordered_pairs() {
        assert_eq!(range(&[-1.0, 2.0], "r").unwrap(), (-1.0, 2.0));
        assert!(range(&[2.0, -1.0], "r").is_err());
        assert!(range(&[1.0], "r").is_err());
        assert!(range(&[f64::NAN, 1.0], "r").is_err());
    }
}
