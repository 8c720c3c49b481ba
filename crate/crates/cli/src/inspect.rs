use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::{bail, Context, Result};

use dvts_core::ann::AnnModel;
use dvts_core::capacity::CapacityRepository;
use dvts_core::htm::HtmRegion;

const TRACE_TAIL: usize = 10;

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(
        File::open(path).with_context(|| format!("opening {}", path.display()))?,
    ))
}

fn print_ann(m: &AnnModel) {
    let (i, h, o) = m.network().dims();
    let st = m.state();
    println!("ANN {i}-{h}-{o}, {} parameters", m.network().params().len());
    println!("accepted samples (k): {}", st.k);
    match st.user_range() {
        Some((lo, hi)) => println!("trained user range: {lo}..={hi}"),
        None => println!("trained user range: none"),
    }
    println!("recent anomaly scores: {:?}", st.anomalies);
    println!("recent errors: {:?}", st.errors);
    let skip = st.trace.len().saturating_sub(TRACE_TAIL);
    if st.trace.is_empty() {
        return;
    }
    println!(
        "{:>8} {:>10} {:>10} {:>8} {:>6} {:>10}",
        "k", "lr1", "lr", "momentum", "epochs", "rmse_pre"
    );
    for r in st.trace.iter().skip(skip) {
        println!(
            "{:>8} {:>10.6} {:>10.6} {:>8.4} {:>6} {:>10.6}",
            r.k, r.base_lr, r.lr, r.momentum, r.epochs, r.rmse_pre
        );
    }
}

fn print_htm(r: &HtmRegion) {
    let c = r.config();
    println!(
        "HTM region: {} columns x {} cells, {} active columns",
        c.column_count,
        c.cells_per_column,
        c.active_column_count()
    );
    println!("samples seen: {}", r.samples_seen());
    println!("last anomaly score: {:.4}", r.last_score());
}

fn print_repository(repo: &CapacityRepository) {
    println!("capacity repository: {} records", repo.len());
    for t in repo.measured_types() {
        println!(
            "  {:<12} {:>7} records, mean of latest {:.4}",
            t,
            repo.record_count(t),
            repo.measured_mean(t).unwrap_or(f64::NAN)
        );
    }
}

pub fn inspect(path: &Path) -> Result<()> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    match ext {
        "cbor" => print_htm(&HtmRegion::read_snapshot(open(path)?)?),
        "jsonl" => print_repository(&CapacityRepository::load(path)?),
        _ => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let kind = serde_json::from_str::<serde_json::Value>(&text)
                .with_context(|| format!("{} is not JSON", path.display()))?
                .get("kind")
                .and_then(|k| k.as_str().map(str::to_string));
            match kind.as_deref() {
                Some("ann") => print_ann(&AnnModel::read_snapshot(text.as_bytes())?),
                Some(k) => bail!("unsupported snapshot kind `{k}`"),
                None => bail!("{} is not a snapshot", path.display()),
            }
        }
    }
    if ext != "jsonl" {
        if let Some(repo) = path
            .parent()
            .map(|d| d.join("capacity.jsonl"))
            .filter(|p| p.is_file())
        {
            print_repository(&CapacityRepository::load(&repo)?);
        }
    }
    Ok(())
}
