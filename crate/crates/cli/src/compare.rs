use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::Serialize;

use dvts_core::autoscaler::Policy;
use dvts_core::simenv::{CostLedger, RunMeta};

use crate::report::{scenario_digest, vm_rows, write_csv, SummaryRow};

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Run directories (each holding `meta.json`) or parents of such directories.
    #[arg(required = true)]
    pub runs: Vec<PathBuf>,
    /// Output directory for `comparison.csv`, `timeline.csv` and `comparison.json`.
    #[arg(long, default_value = "comparison")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct Saving {
    policy: String,
    cost: f64,
    reference_policy: String,
    reference_cost: f64,
    saving_percent: f64,
}

fn collect_runs(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.join("meta.json").is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let mut found = false;
    let mut entries: Vec<PathBuf> = std::fs::read_dir(path)
        .with_context(|| format!("reading {}", path.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .collect();
    entries.sort();
    for e in entries {
        if e.join("meta.json").is_file() {
            out.push(e);
            found = true;
        }
    }
    if !found {
        bail!("{} holds no run outputs (meta.json)", path.display());
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

/// Saving of `policy`'s median cost against the cheapest other policy. A run
/// set with a single policy is compared with itself.
fn saving(costs: &BTreeMap<String, Vec<f64>>, policy: &str) -> Saving {
    let cost = median(costs[policy].clone());
    let (reference_policy, reference_cost) = costs
        .iter()
        .filter(|(p, _)| p.as_str() != policy)
        .map(|(p, c)| (p.clone(), median(c.clone())))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap_or((policy.to_string(), cost));
    Saving {
        policy: policy.to_string(),
        cost,
        reference_policy,
        reference_cost,
        saving_percent: (reference_cost - cost) / reference_cost * 100.0,
    }
}

pub fn compare(args: CompareArgs) -> Result<()> {
    let mut dirs = Vec::new();
    for p in &args.runs {
        collect_runs(p, &mut dirs)?;
    }
    if dirs.len() < 2 {
        bail!("need at least two runs to compare, found {}", dirs.len());
    }

    let mut metas = Vec::new();
    let mut vms = Vec::new();
    let mut digest: Option<(String, PathBuf)> = None;
    for d in &dirs {
        let meta = RunMeta::load(&d.join("meta.json"))?;
        let dg = scenario_digest(&meta.scenario)?;
        match &digest {
            None => digest = Some((dg, d.clone())),
            Some((first, first_dir)) if *first != dg => bail!(
                "scenario of {} differs from {} (digest {} vs {})",
                d.display(),
                first_dir.display(),
                &dg[..12],
                &first[..12]
            ),
            _ => {}
        }
        let ledger_path = d.join("ledger.json");
        let text = std::fs::read_to_string(&ledger_path)
            .with_context(|| format!("reading {}", ledger_path.display()))?;
        let ledger: CostLedger = serde_json::from_str(&text)
            .with_context(|| format!("parsing {}", ledger_path.display()))?;
        vms.extend(vm_rows(&meta.policy.to_string(), meta.seed, &ledger));
        metas.push(meta);
    }

    let mut costs: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for m in &metas {
        costs
            .entry(m.policy.to_string())
            .or_default()
            .push(m.total_cost);
    }
    let dvts = Policy::Dvts.to_string();
    let focus = if costs.contains_key(&dvts) {
        dvts
    } else {
        metas[0].policy.to_string()
    };
    let s = saving(&costs, &focus);

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let rows: Vec<SummaryRow> = metas.iter().map(SummaryRow::of).collect();
    write_csv(&args.out.join("comparison.csv"), &rows)?;
    write_csv(&args.out.join("timeline.csv"), &vms)?;
    let json_path = args.out.join("comparison.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&s)? + "\n")
        .with_context(|| format!("writing {}", json_path.display()))?;

    for (p, c) in &costs {
        println!(
            "{:<20} median cost {:.3} over {} run(s)",
            p,
            median(c.clone()),
            c.len()
        );
    }
    println!(
        "{} saves {:.1}% against {} ({:.3} vs {:.3})",
        s.policy, s.saving_percent, s.reference_policy, s.cost, s.reference_cost
    );
    Ok(())
}
