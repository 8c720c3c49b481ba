//! VM capacity repository and per-type capacity estimation.
//!
//! Every monitoring sample yields a measured, fleet-normalised CPU capacity
//! for the reporting instance. The repository keeps those measurements per
//! VM type; estimates for a type average its most recent measurements, and
//! types never seen are extrapolated from the measured ones via the
//! provider's declared compute units.

use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::metrics::{FleetConstants, VmId};
use crate::{Error, Result};

/// Number of most recent records averaged for a measured estimate.
pub const MEASURED_WINDOW: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapacityRecord {
    pub time: f64,
    pub vm_type: String,
    pub vm_id: VmId,
    pub cpu_capacity_norm: f64,
}

/// A provider-declared VM type.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VmTypeSpec {
    pub name: String,
    /// Declared compute units (ECU, GCEU, ...).
    pub cpu_spec: f64,
    pub ram_bytes: u64,
    pub cost_per_hour: f64,
}

impl VmTypeSpec {
    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() {
            return Err(Error::InvalidConfig("VM type with empty name".into()));
        }
        if !(self.cpu_spec > 0.0) || self.ram_bytes == 0 || !(self.cost_per_hour > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "VM type `{}` needs positive cpu_spec, ram and cost",
                self.name
            )));
        }
        Ok(())
    }
}

/// The set of VM types a provider offers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Catalog {
    types: Vec<VmTypeSpec>,
}

impl Catalog {
    pub fn new(types: Vec<VmTypeSpec>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::InvalidConfig("catalog is empty".into()));
        }
        for (i, t) in types.iter().enumerate() {
            t.validate()?;
            if types[..i].iter().any(|o| o.name == t.name) {
                return Err(Error::InvalidConfig(format!(
                    "duplicate VM type `{}`",
                    t.name
                )));
            }
        }
        Ok(Catalog { types })
    }

    /// The three AWS types used in the reference experiment (Sydney region).
    pub fn aws_reference() -> Self {
        use crate::gib;
        Catalog::new(vec![
            VmTypeSpec {
                name: "m1.small".into(),
                cpu_spec: 1.0,
                ram_bytes: gib(1.7),
                cost_per_hour: 0.058,
            },
            VmTypeSpec {
                name: "m1.medium".into(),
                cpu_spec: 2.0,
                ram_bytes: gib(3.75),
                cost_per_hour: 0.117,
            },
            VmTypeSpec {
                name: "m3.medium".into(),
                cpu_spec: 3.0,
                ram_bytes: gib(3.75),
                cost_per_hour: 0.098,
            },
        ])
        .expect("reference catalog is valid")
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let types: Vec<VmTypeSpec> =
            serde_json::from_str(&text).map_err(|e| Error::json(path.display().to_string(), e))?;
        Catalog::new(types)
    }

    pub fn get(&self, name: &str) -> Result<&VmTypeSpec> {
        self.types
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::UnknownVmType(name.to_string()))
    }

    pub fn types(&self) -> &[VmTypeSpec] {
        &self.types
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.types.iter().map(|t| t.name.as_str())
    }

    /// Largest RAM size in the catalog.
    pub fn ram_max(&self) -> u64 {
        self.types.iter().map(|t| t.ram_bytes).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapacitySource {
    Measured,
    Extrapolated,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacityEstimate {
    pub cpu_capacity: f64,
    pub ram_capacity: f64,
    pub source: CapacitySource,
}

/// How capacities of never-measured types are extrapolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Extrapolation {
    /// Average measured capacity per declared compute unit, scaled by the
    /// target type's compute units.
    #[default]
    PerUnit,
    /// The printed form: `mean_i(cap_i * spec_i) / spec(target)`. Kept for
    /// comparison runs; it assigns lower capacity to larger types.
    Literal,
}

/// Time-ordered store of capacity measurements, indexed by VM type.
///
/// Optionally mirrors every appended record to a JSON-lines file.
#[derive(Debug, Default)]
pub struct CapacityRepository {
    by_type: BTreeMap<String, Vec<f64>>,
    len: usize,
    log: Option<(PathBuf, BufWriter<File>)>,
}

impl Clone for CapacityRepository {
    /// Clones the in-memory index only; the clone never writes to the log.
    fn clone(&self) -> Self {
        CapacityRepository {
            by_type: self.by_type.clone(),
            len: self.len,
            log: None,
        }
    }
}

impl CapacityRepository {
    pub fn new() -> Self {
        Self::default()
    }

    /// Loads every record of a JSON-lines repository file.
    pub fn load(path: &Path) -> Result<Self> {
        let mut repo = CapacityRepository::new();
        let f = File::open(path).map_err(|e| Error::io(path, e))?;
        for (n, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let r: CapacityRecord = serde_json::from_str(&line)
                .map_err(|e| Error::json(format!("{}:{}", path.display(), n + 1), e))?;
            repo.record(r)?;
        }
        Ok(repo)
    }

    /// Opens (or creates) `path`, loads existing records and appends every
    /// subsequent record to it.
    pub fn open_logged(path: &Path) -> Result<Self> {
        let mut repo = if path.exists() {
            Self::load(path)?
        } else {
            Self::new()
        };
        let f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        repo.log = Some((path.to_path_buf(), BufWriter::new(f)));
        Ok(repo)
    }

    pub fn record(&mut self, r: CapacityRecord) -> Result<()> {
        if !(r.cpu_capacity_norm > 0.0 && r.cpu_capacity_norm <= 1.0) {
            return Err(Error::InvalidSample {
                vm_id: r.vm_id.0.clone(),
                reason: format!("capacity {} outside (0, 1]", r.cpu_capacity_norm),
            });
        }
        if let Some((path, w)) = self.log.as_mut() {
            serde_json::to_writer(&mut *w, &r).map_err(|e| Error::json("capacity record", e))?;
            w.write_all(b"\n").map_err(|e| Error::io(path.clone(), e))?;
        }
        self.by_type
            .entry(r.vm_type)
            .or_default()
            .push(r.cpu_capacity_norm);
        self.len += 1;
        Ok(())
    }

    pub fn flush(&mut self) -> Result<()> {
        if let Some((path, w)) = self.log.as_mut() {
            w.flush().map_err(|e| Error::io(path.clone(), e))?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn record_count(&self, vm_type: &str) -> usize {
        self.by_type.get(vm_type).map_or(0, Vec::len)
    }

    /// Types with at least one measurement, in name order.
    pub fn measured_types(&self) -> impl Iterator<Item = &str> {
        self.by_type
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, _)| k.as_str())
    }

    /// Mean of the most recent `MEASURED_WINDOW` records of a type.
    pub fn measured_mean(&self, vm_type: &str) -> Option<f64> {
        let values = self.by_type.get(vm_type)?;
        if values.is_empty() {
            return None;
        }
        let tail = &values[values.len().saturating_sub(MEASURED_WINDOW)..];
        Some(tail.iter().sum::<f64>() / tail.len() as f64)
    }

    /// Normalised CPU capacity of `vm_type`, measured or extrapolated.
    pub fn estimate_cpu_capacity(
        &self,
        vm_type: &str,
        catalog: &Catalog,
        mode: Extrapolation,
    ) -> Result<(f64, CapacitySource)> {
        let target = catalog.get(vm_type)?;
        if let Some(mean) = self.measured_mean(vm_type) {
            return Ok((mean, CapacitySource::Measured));
        }
        let mut acc = 0.0;
        let mut count = 0usize;
        for name in self.measured_types() {
            // Types missing from the catalog have no declared units to scale by.
            let Ok(spec) = catalog.get(name) else {
                continue;
            };
            let cap = self.measured_mean(name).expect("measured type has records");
            acc += match mode {
                Extrapolation::PerUnit => cap / spec.cpu_spec,
                Extrapolation::Literal => cap * spec.cpu_spec,
            };
            count += 1;
        }
        if count == 0 {
            return Err(Error::NoCapacityData);
        }
        let mean = acc / count as f64;
        let cap = match mode {
            Extrapolation::PerUnit => mean * target.cpu_spec,
            Extrapolation::Literal => mean / target.cpu_spec,
        };
        Ok((cap.min(1.0), CapacitySource::Extrapolated))
    }

    /// Full CPU + RAM estimate for a type.
    pub fn estimate(
        &self,
        vm_type: &str,
        catalog: &Catalog,
        constants: &FleetConstants,
        mode: Extrapolation,
    ) -> Result<CapacityEstimate> {
        let (cpu_capacity, source) = self.estimate_cpu_capacity(vm_type, catalog, mode)?;
        Ok(CapacityEstimate {
            cpu_capacity,
            ram_capacity: estimate_ram_capacity(catalog.get(vm_type)?, constants),
            source,
        })
    }
}

/// Declared RAM of a type on the fleet-normalised scale.
pub fn estimate_ram_capacity(spec: &VmTypeSpec, constants: &FleetConstants) -> f64 {
    spec.ram_bytes as f64 / constants.ram_max_bytes as f64
}
