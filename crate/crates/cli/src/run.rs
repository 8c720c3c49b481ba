use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::Args;
use log::info;
use rayon::prelude::*;

use dvts_core::autoscaler::Policy;
use dvts_core::par::Execution;
use dvts_core::simenv::{run_experiment_with, write_result, ExperimentEvent, RunMeta, Scenario};

use crate::report::{policy_slug, vm_rows, write_csv, SummaryRow};

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Scenario JSON file. The built-in default scenario is used when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Policy to run: `dvts` or `static:<vm type>`. Repeatable.
    #[arg(long = "policy", conflicts_with = "all_policies")]
    pub policies: Vec<Policy>,
    /// Run DVTS and a static baseline for every catalog type.
    #[arg(long)]
    pub all_policies: bool,
    /// Experiment seed (defaults to the scenario's).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
    /// Simulated seconds per reported wall-clock second.
    #[arg(long)]
    pub time_compression: Option<f64>,
}

pub fn run(args: RunArgs) -> Result<()> {
    let mut scenario = match &args.scenario {
        Some(path) => {
            Scenario::load(path).with_context(|| format!("loading scenario {}", path.display()))?
        }
        None => Scenario::default(),
    };
    if let Some(tc) = args.time_compression {
        scenario.time_compression = tc;
    }
    scenario.validate()?;
    let seed = args.seed.unwrap_or(scenario.seed);

    let policies: Vec<Policy> = if args.all_policies {
        std::iter::once(Policy::Dvts)
            .chain(
                scenario
                    .catalog
                    .names()
                    .map(|t| Policy::Static(t.to_string())),
            )
            .collect()
    } else if args.policies.is_empty() {
        vec![Policy::Dvts]
    } else {
        args.policies.clone()
    };

    std::fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    let exec = if policies.len() > 1 {
        Execution::Sequential
    } else {
        Execution::default()
    };
    let results: Vec<Result<RunMeta>> = policies
        .par_iter()
        .map(|p| {
            info!("running {p} with seed {seed}");
            let r = run_experiment_with(&scenario, p, seed, exec)?;
            let dir = args.out.join(policy_slug(&p.to_string()));
            write_result(&r, &dir)?;
            for e in &r.events {
                if let ExperimentEvent::Aborted { time, error } = e {
                    log::error!("{p} aborted at t={time}: {error}");
                }
            }
            Ok(RunMeta::of(&r))
        })
        .collect();

    let mut metas = Vec::with_capacity(results.len());
    for r in results {
        metas.push(r?);
    }

    let summary: Vec<SummaryRow> = metas.iter().map(SummaryRow::of).collect();
    write_csv(&args.out.join("summary.csv"), &summary)?;
    let mut vms = Vec::new();
    for (m, p) in metas.iter().zip(&policies) {
        let ledger_path = args
            .out
            .join(policy_slug(&p.to_string()))
            .join("ledger.json");
        let text = std::fs::read_to_string(&ledger_path)
            .with_context(|| format!("reading {}", ledger_path.display()))?;
        let ledger = serde_json::from_str(&text)?;
        vms.extend(vm_rows(&m.policy.to_string(), m.seed, &ledger));
    }
    write_csv(&args.out.join("timeline.csv"), &vms)?;

    println!(
        "{:<20} {:>6} {:>10} {:>4} {:>10}  first",
        "policy", "seed", "cost", "vms", "scale-ups"
    );
    for s in &summary {
        println!(
            "{:<20} {:>6} {:>10.3} {:>4} {:>10}  {}",
            s.policy, s.seed, s.total_cost, s.vm_count, s.scale_ups, s.first_selection
        );
    }

    let aborted: Vec<&str> = summary
        .iter()
        .filter(|s| s.aborted)
        .map(|s| s.policy.as_str())
        .collect();
    if !aborted.is_empty() {
        bail!("run aborted for: {} (see events.jsonl)", aborted.join(", "));
    }
    Ok(())
}
