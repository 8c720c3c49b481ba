//! Choosing the VM type with the lowest hourly cost per servable user.

use serde::{Deserialize, Serialize};

use crate::ann::AnnModel;
use crate::capacity::{CapacityRepository, CapacitySource, Catalog, Extrapolation};
use crate::metrics::FleetConstants;
use crate::{Error, Result};

pub const DEFAULT_DELTA: u32 = 5;
pub const DEFAULT_PROBE_LIMIT: u32 = 100_000;

/// Anything that maps a user count to normalised `(cpu, ram)` load.
pub trait UtilisationModel {
    fn predict(&self, users: f64) -> (f64, f64);
}

impl UtilisationModel for AnnModel {
    fn predict(&self, users: f64) -> (f64, f64) {
        AnnModel::predict(self, users)
    }
}

impl<F: Fn(f64) -> (f64, f64)> UtilisationModel for F {
    fn predict(&self, users: f64) -> (f64, f64) {
        self(users)
    }
}

/// Predicted load for `n` users, clamped to `[0, 1]`.
///
/// Inside the observed range the model is queried directly. From `max_users`
/// on, the load grows linearly along the chord between the model's outputs at
/// `min_users` and `max_users`, since the model has never seen such counts.
pub fn predict_utilisation<M: UtilisationModel + ?Sized>(
    model: &M,
    n: u32,
    min_users: u32,
    max_users: u32,
) -> (f64, f64) {
    let clamp = |(c, r): (f64, f64)| (c.clamp(0.0, 1.0), r.clamp(0.0, 1.0));
    if n < max_users {
        return clamp(model.predict(n as f64));
    }
    let (max_cpu, max_ram) = model.predict(max_users as f64);
    if max_users <= min_users {
        return clamp((max_cpu, max_ram));
    }
    let (min_cpu, min_ram) = model.predict(min_users as f64);
    let span = (max_users - min_users) as f64;
    let extra = (n - max_users) as f64;
    clamp((
        max_cpu + (max_cpu - min_cpu) / span * extra,
        max_ram + (max_ram - min_ram) / span * extra,
    ))
}

/// Capacity of one candidate type on the fleet-normalised scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub vm_type: String,
    pub cost_per_hour: f64,
    pub cpu_capacity: f64,
    pub ram_capacity: f64,
    pub source: CapacitySource,
}

/// Estimates every catalog type's capacity from the repository.
pub fn candidates(
    catalog: &Catalog,
    repo: &CapacityRepository,
    constants: &FleetConstants,
    mode: Extrapolation,
) -> Result<Vec<Candidate>> {
    catalog
        .types()
        .iter()
        .map(|t| {
            let est = repo.estimate(&t.name, catalog, constants, mode)?;
            Ok(Candidate {
                vm_type: t.name.clone(),
                cost_per_hour: t.cost_per_hour,
                cpu_capacity: est.cpu_capacity,
                ram_capacity: est.ram_capacity,
                source: est.source,
            })
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct SelectionInput<'a, M: ?Sized> {
    pub candidates: &'a [Candidate],
    pub model: &'a M,
    pub delta: u32,
    pub min_users: u32,
    pub max_users: u32,
    /// Probing stops at this user count.
    pub probe_limit: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeEvaluation {
    pub vm_type: String,
    pub cost_per_hour: f64,
    pub cpu_capacity: f64,
    pub ram_capacity: f64,
    pub source: CapacitySource,
    pub user_capacity: u32,
    /// `None` when the type cannot serve even `min_users`.
    pub cost_per_user: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    pub chosen_type: String,
    pub table: Vec<TypeEvaluation>,
}

fn fits(load: (f64, f64), c: &Candidate) -> bool {
    load.0 < c.cpu_capacity && load.1 < c.ram_capacity
}

fn validate<M: ?Sized>(input: &SelectionInput<'_, M>) -> Result<()> {
    if input.delta == 0 {
        return Err(Error::InvalidConfig("user step must be at least 1".into()));
    }
    if input.min_users > input.max_users {
        return Err(Error::InvalidConfig(format!(
            "min_users {} exceeds max_users {}",
            input.min_users, input.max_users
        )));
    }
    if input.candidates.is_empty() {
        return Err(Error::InvalidConfig("no candidate VM types".into()));
    }
    Ok(())
}

/// Users a type can serve, probing upward from `min_users` in steps of
/// `delta` until the predicted load no longer fits. 0 if even `min_users`
/// does not fit.
pub fn user_capacity<M: UtilisationModel + ?Sized>(
    c: &Candidate,
    model: &M,
    delta: u32,
    min_users: u32,
    max_users: u32,
    probe_limit: u32,
) -> u32 {
    let mut served = 0;
    let mut n = min_users;
    while n <= probe_limit && fits(predict_utilisation(model, n, min_users, max_users), c) {
        served = n;
        n = match n.checked_add(delta) {
            Some(next) => next,
            None => break,
        };
    }
    served
}

fn choose(table: Vec<TypeEvaluation>) -> Result<SelectionResult> {
    let mut best: Option<&TypeEvaluation> = None;
    for t in &table {
        let Some(cost) = t.cost_per_user else {
            continue;
        };
        let better = match best {
            None => true,
            Some(b) => {
                let bc = b.cost_per_user.expect("best has a cost");
                cost < bc
                    || (cost == bc
                        && (t.cost_per_hour < b.cost_per_hour
                            || (t.cost_per_hour == b.cost_per_hour && t.vm_type < b.vm_type)))
            }
        };
        if better {
            best = Some(t);
        }
    }
    let chosen_type = best.ok_or(Error::SelectionInfeasible)?.vm_type.clone();
    Ok(SelectionResult { chosen_type, table })
}

fn evaluate(c: &Candidate, served: u32) -> TypeEvaluation {
    TypeEvaluation {
        vm_type: c.vm_type.clone(),
        cost_per_hour: c.cost_per_hour,
        cpu_capacity: c.cpu_capacity,
        ram_capacity: c.ram_capacity,
        source: c.source,
        user_capacity: served,
        cost_per_user: (served > 0).then(|| c.cost_per_hour / served as f64),
    }
}

/// Picks the candidate with the lowest cost per servable user.
///
/// Ties go to the lower hourly price, then to the lexicographically smaller
/// name. Types that cannot serve `min_users` are excluded.
pub fn select_vm_type<M: UtilisationModel + ?Sized>(
    input: &SelectionInput<'_, M>,
) -> Result<SelectionResult> {
    validate(input)?;
    let table = input
        .candidates
        .iter()
        .map(|c| {
            let served = user_capacity(
                c,
                input.model,
                input.delta,
                input.min_users,
                input.max_users,
                input.probe_limit,
            );
            evaluate(c, served)
        })
        .collect();
    choose(table)
}

/// Reference implementation: checks every user count from `min_users` to
/// `probe_limit` and keeps the largest one that fits, provided `min_users`
/// itself fits. Ignores `delta`.
pub fn select_vm_type_bruteforce<M: UtilisationModel + ?Sized>(
    input: &SelectionInput<'_, M>,
) -> Result<SelectionResult> {
    validate(input)?;
    let table = input
        .candidates
        .iter()
        .map(|c| {
            let mut served = 0;
            let mut first_fits = false;
            for n in input.min_users..=input.probe_limit.max(input.min_users) {
                let ok = fits(
                    predict_utilisation(input.model, n, input.min_users, input.max_users),
                    c,
                );
                if n == input.min_users {
                    first_fits = ok;
                }
                if ok && first_fits {
                    served = n;
                }
            }
            evaluate(c, served)
        })
        .collect();
    choose(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::CapacityRecord;
    use crate::metrics::VmId;
    use crate::{gib, GIB};

    fn cand(name: &str, cost: f64, cpu: f64, ram: f64) -> Candidate {
        Candidate {
            vm_type: name.into(),
            cost_per_hour: cost,
            cpu_capacity: cpu,
            ram_capacity: ram,
            source: CapacitySource::Extrapolated,
        }
    }

    fn input<'a, M: ?Sized>(
        c: &'a [Candidate],
        m: &'a M,
        lo: u32,
        hi: u32,
    ) -> SelectionInput<'a, M> {
        SelectionInput {
            candidates: c,
            model: m,
            delta: DEFAULT_DELTA,
            min_users: lo,
            max_users: hi,
            probe_limit: 5_000,
        }
    }

    #[test]
    fn in_range_and_boundary() {
        let m = |u: f64| (0.001 * u + 0.05, 0.0002 * u);
        assert_eq!(predict_utilisation(&m, 30, 30, 200), m(30.0));
        let at = predict_utilisation(&m, 200, 30, 200);
        assert!((at.0 - m(200.0).0).abs() < 1e-15 && (at.1 - m(200.0).1).abs() < 1e-15);
    }

    #[test]
    fn linear_model_extrapolates_exactly() {
        let m = |u: f64| (0.001 * u + 0.05, 0.0002 * u + 0.1);
        let (c, r) = predict_utilisation(&m, 400, 30, 200);
        assert!((c - 0.45).abs() < 1e-12);
        assert!((r - 0.18).abs() < 1e-12);
    }

    #[test]
    fn ram_extrapolates_from_ram() {
        // CPU far above RAM: a RAM line based on CPU would overshoot.
        let m = |u: f64| (0.5 + 0.0001 * u, 0.01 + 0.0001 * u);
        let (_, r) = predict_utilisation(&m, 300, 100, 200);
        assert!((r - 0.04).abs() < 1e-12);
    }

    #[test]
    fn degenerate_range_uses_the_model_at_max() {
        let m = |u: f64| (0.001 * u, 0.0);
        assert_eq!(predict_utilisation(&m, 500, 100, 100), (0.1, 0.0));
    }

    #[test]
    fn uniform_per_user_load_ranks_by_price_per_ecu() {
        let catalog = Catalog::aws_reference();
        let constants = FleetConstants::new(3.5, 2, catalog.ram_max()).unwrap();
        let mut repo = CapacityRepository::new();
        repo.record(CapacityRecord {
            time: 0.0,
            vm_type: "m1.small".into(),
            vm_id: VmId::new("vm-0"),
            cpu_capacity_norm: 0.2,
        })
        .unwrap();
        let cands = candidates(&catalog, &repo, &constants, Extrapolation::PerUnit).unwrap();
        let m = |u: f64| (0.001 * u, 0.0);
        // Unit steps keep rounding from blurring the 0.058 vs 0.0585 gap.
        let res = select_vm_type(&SelectionInput {
            delta: 1,
            ..input(&cands, &m, 30, 120)
        })
        .unwrap();
        assert_eq!(res.chosen_type, "m3.medium");
        let cost = |n: &str| {
            res.table
                .iter()
                .find(|t| t.vm_type == n)
                .unwrap()
                .cost_per_user
                .unwrap()
        };
        assert!(cost("m3.medium") < cost("m1.small"));
        assert!(cost("m1.small") < cost("m1.medium"));
    }

    #[test]
    fn memory_heavy_load_excludes_small_ram() {
        let ram_max = 3.75 * GIB as f64;
        let per_user = gib(0.01) as f64 / ram_max;
        let fixed = gib(1.3) as f64 / ram_max;
        let m = move |u: f64| (0.0005 * u, fixed + per_user * u);
        let cands = [
            cand("m1.small", 0.058, 0.2, 1.7 / 3.75),
            cand("m1.medium", 0.117, 0.4, 1.0),
            cand("m3.medium", 0.098, 0.27, 1.0),
        ];
        let res = select_vm_type(&input(&cands, &m, 30, 150)).unwrap();
        let small = &res.table[0];
        let worst = res
            .table
            .iter()
            .filter_map(|t| t.cost_per_user)
            .fold(0.0, f64::max);
        assert!(small.cost_per_user.is_none() || small.cost_per_user == Some(worst));
        assert_ne!(res.chosen_type, "m1.small");
    }

    #[test]
    fn single_candidate_and_infeasible() {
        let m = |u: f64| (0.001 * u, 0.0);
        let one = [cand("x", 100.0, 0.5, 1.0)];
        assert_eq!(
            select_vm_type(&input(&one, &m, 30, 50))
                .unwrap()
                .chosen_type,
            "x"
        );
        let tiny = [cand("x", 1.0, 0.01, 1.0), cand("y", 1.0, 0.02, 1.0)];
        assert!(matches!(
            select_vm_type(&input(&tiny, &m, 30, 50)),
            Err(Error::SelectionInfeasible)
        ));
    }

    #[test]
    fn capacities_are_delta_offsets() {
        let m = |u: f64| (0.00123 * u, 0.0);
        let c = [cand("a", 1.0, 0.5, 1.0), cand("b", 2.0, 0.77, 1.0)];
        let res = select_vm_type(&input(&c, &m, 33, 80)).unwrap();
        for t in &res.table {
            assert_eq!((t.user_capacity - 33) % DEFAULT_DELTA, 0);
        }
    }

    #[test]
    fn ties_prefer_cheaper_then_name() {
        let m = |u: f64| (0.001 * u, 0.0);
        // Same cost per user: b serves twice as many users at twice the price.
        let c = [cand("b", 2.0, 0.2605, 1.0), cand("a", 1.0, 0.1305, 1.0)];
        let res = select_vm_type(&SelectionInput {
            delta: 1,
            ..input(&c, &m, 10, 50)
        })
        .unwrap();
        assert_eq!(res.table[0].user_capacity, 260);
        assert_eq!(res.table[1].user_capacity, 130);
        assert_eq!(res.chosen_type, "a");
        let c = [cand("b", 1.0, 0.5, 1.0), cand("a", 1.0, 0.5, 1.0)];
        assert_eq!(
            select_vm_type(&input(&c, &m, 10, 50)).unwrap().chosen_type,
            "a"
        );
    }

    #[test]
    fn probe_limit_stops_flat_models() {
        let m = |_: f64| (0.1, 0.1);
        let c = [cand("a", 1.0, 0.5, 1.0)];
        let res = select_vm_type(&SelectionInput {
            probe_limit: 1000,
            ..input(&c, &m, 30, 30)
        })
        .unwrap();
        assert_eq!(res.table[0].user_capacity, 1000);
    }
}
