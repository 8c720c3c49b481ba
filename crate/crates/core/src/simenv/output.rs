use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::experiment::ExperimentResult;
use super::scenario::Scenario;
use crate::autoscaler::Policy;
use crate::{Error, Result};

/// Summary written to `meta.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub policy: Policy,
    pub seed: u64,
    pub aborted: bool,
    pub total_cost: f64,
    pub vm_count: usize,
    pub scale_ups: usize,
    pub first_selection: Option<String>,
    pub duration_seconds: f64,
    pub duration_wall_seconds: f64,
    pub scenario: Scenario,
}

impl RunMeta {
    pub fn of(r: &ExperimentResult) -> Self {
        RunMeta {
            policy: r.policy.clone(),
            seed: r.seed,
            aborted: r.aborted,
            total_cost: r.ledger.total_cost,
            vm_count: r.ledger.vm_count(),
            scale_ups: r.scale_ups().count(),
            first_selection: r.scale_ups().next().map(|e| e.chosen_type.clone()),
            duration_seconds: r.scenario.duration_seconds,
            duration_wall_seconds: r.scenario.wall_clock(r.scenario.duration_seconds),
            scenario: r.scenario.clone(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| Error::io(path, e))?,
    ))
}

fn write_lines<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)
            .map_err(|e| Error::json(path.display().to_string(), e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn write_pretty<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::json(path.display().to_string(), e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes every artefact of a run into `dir` (created if missing).
///
/// Files: `meta.json`, `events.jsonl`, `samples.jsonl`, `capacity.jsonl`,
/// `training.jsonl`, `timeline.jsonl`, `ledger.json` and, for learning
/// policies, `ann.json` and `htm.cbor`. Output depends only on the result, so
/// equal runs give byte-identical files.
pub fn write_result(r: &ExperimentResult, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_pretty(&dir.join("meta.json"), &RunMeta::of(r))?;
    write_lines(&dir.join("events.jsonl"), &r.events)?;
    write_lines(&dir.join("samples.jsonl"), &r.samples)?;
    write_lines(&dir.join("capacity.jsonl"), &r.capacity)?;
    write_lines(&dir.join("training.jsonl"), &r.training)?;
    write_lines(&dir.join("timeline.jsonl"), &r.timeline)?;
    write_pretty(&dir.join("ledger.json"), &r.ledger)?;
    if let Some(ann) = &r.ann {
        let path = dir.join("ann.json");
        let mut w = create(&path)?;
        ann.write_snapshot(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    if let Some(htm) = &r.htm {
        let path = dir.join("htm.cbor");
        let mut w = create(&path)?;
        htm.write_snapshot(&mut w)?;
        w.flush().map_err(|e| Error::io(&path, e))?;
    }
    Ok(())
}
