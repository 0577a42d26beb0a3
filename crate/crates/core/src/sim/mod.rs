//! Scenario runner: truth motion, synthetic perception, the V2X channel and
//! the ego's awareness engine, plus the run artifacts.
//!
//! Output directory layout:
//!
//! | file             | content                                                   |
//! |------------------|-----------------------------------------------------------|
//! | `scenario.toml`  | the scenario exactly as loaded                            |
//! | `truth.ndjson`   | one [`TruthRecord`] per actor and tick                    |
//! | `messages.ndjson`| one [`MessageRecord`] per sent CPM, with hex payload      |
//! | `scenes.ndjson`  | one [`SceneRecord`] per tick                              |
//! | `metrics.csv`    | RMSE and mean area per actor and provenance               |
//! | `outlines.csv`   | closed outline rings of every set, global and ego frame   |
//! | `report.txt`     | snapshot table and metrics summary                        |
//! | `manifest.json`  | seed, version and SHA-256 of the scenario and every file  |
//!
//! [`MessageRecord`]: crate::wire::MessageRecord

mod config;
mod report;
mod run;
mod truth;

use std::collections::BTreeMap;
use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub use config::{
    ActorConfig, ChannelSection, ConfigError, PoseConfig, ResolvedSensor, ScenarioConfig, SensorConfig, Vec2Config,
    Waypoint,
};
pub use report::{build_report, track_zonotope, Report};
pub use run::{run, FusionRecord, PoseRecord, RunOutput, RunSummary, SceneRecord, TickObservation};
pub use truth::{advance, ActorState, TruthRecord};

use crate::awareness::AwarenessError;
use crate::wire::{ChannelError, WireError};
use crate::zonoset::ZonoError;

pub const OCCLUDED_PEDESTRIAN: &str = include_str!("../../scenarios/occluded_pedestrian.toml");
pub const ZERO_NOISE: &str = include_str!("../../scenarios/zero_noise.toml");

/// Bundled scenario text by name.
pub fn bundled(name: &str) -> Option<&'static str> {
    match name {
        "occluded_pedestrian" => Some(OCCLUDED_PEDESTRIAN),
        "zero_noise" => Some(ZERO_NOISE),
        _ => None,
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Awareness(#[from] AwarenessError),
    #[error(transparent)]
    Zono(#[from] ZonoError),
    #[error(transparent)]
    Wire(#[from] WireError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("malformed artifact: {0}")]
    Artifact(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SimError + '_ {
    move |source| SimError::Io {
        path: path.display().to_string(),
        source,
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub seed: u64,
    pub scenario_file: String,
    pub scenario_sha256: String,
    pub files: BTreeMap<String, String>,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn write_file(dir: &Path, name: &str, bytes: &[u8], files: &mut BTreeMap<String, String>) -> Result<(), SimError> {
    let path = dir.join(name);
    std::fs::write(&path, bytes).map_err(io_err(&path))?;
    files.insert(name.to_owned(), sha256_hex(bytes));
    Ok(())
}

fn ndjson<T: Serialize>(items: &[T]) -> Vec<u8> {
    let mut w = BufWriter::new(Vec::new());
    for item in items {
        serde_json::to_writer(&mut w, item).expect("records serialize");
        w.write_all(b"\n").expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn read_ndjson<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, SimError> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut out = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line.map_err(io_err(path))?;
        if line.is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|source| SimError::Json {
            path: path.display().to_string(),
            source,
        })?);
    }
    Ok(out)
}

fn write_report(dir: &Path, report: &Report, files: &mut BTreeMap<String, String>) -> Result<(), SimError> {
    write_file(dir, "metrics.csv", report.metrics_csv.as_bytes(), files)?;
    write_file(dir, "outlines.csv", report.outlines_csv.as_bytes(), files)?;
    write_file(dir, "report.txt", report.text.as_bytes(), files)
}

/// Writes every artifact of `output` into `dir`. `scenario_text` is stored
/// verbatim and hashed into the manifest.
pub fn write_artifacts(
    dir: &Path,
    scenario_text: &str,
    cfg: &ScenarioConfig,
    output: &RunOutput,
) -> Result<Manifest, SimError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut files = BTreeMap::new();
    write_file(dir, "scenario.toml", scenario_text.as_bytes(), &mut files)?;
    write_file(dir, "truth.ndjson", &ndjson(&output.truth), &mut files)?;
    write_file(dir, "messages.ndjson", &ndjson(&output.messages), &mut files)?;
    write_file(dir, "scenes.ndjson", &ndjson(&output.scenes), &mut files)?;
    write_report(dir, &output.report, &mut files)?;
    let manifest = Manifest {
        version: env!("CARGO_PKG_VERSION").to_owned(),
        seed: cfg.seed,
        scenario_file: "scenario.toml".into(),
        scenario_sha256: sha256_hex(scenario_text.as_bytes()),
        files,
    };
    let path = dir.join("manifest.json");
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
    bytes.push(b'\n');
    std::fs::write(&path, bytes).map_err(io_err(&path))?;
    Ok(manifest)
}

/// Rebuilds the report files of a finished run from its scene stream and
/// truth log.
pub fn regenerate_report(dir: &Path) -> Result<Report, SimError> {
    let path = dir.join("manifest.json");
    let text = std::fs::read_to_string(&path).map_err(io_err(&path))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|source| SimError::Json {
        path: path.display().to_string(),
        source,
    })?;
    let (mut cfg, _) = ScenarioConfig::load(&dir.join(&manifest.scenario_file))?;
    cfg.seed = manifest.seed;
    let truth: Vec<TruthRecord> = read_ndjson(&dir.join("truth.ndjson"))?;
    let scenes: Vec<SceneRecord> = read_ndjson(&dir.join("scenes.ndjson"))?;
    let report = build_report(&cfg, &scenes, &truth)?;
    let mut files = BTreeMap::new();
    write_report(dir, &report, &mut files)?;
    Ok(report)
}
