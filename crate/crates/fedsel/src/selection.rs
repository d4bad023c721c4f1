//! Per-round participant selection: feasibility filtering, the greedy
//! density heuristic, an exact dynamic-programming solver and the Best-SINR
//! baseline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkbudget::LinkBudget;
use crate::population::{self, Device};

/// One candidate device in a selection round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionItem {
    pub device_id: u64,
    /// Aggregation weight w_i, normalized over the full population.
    pub value: f64,
    /// Model update size l_i in bytes.
    pub size_bytes: u64,
    /// Local dataset size D_i in bytes, reported in results.
    pub sensed_bytes: u64,
    /// Whether the device meets the round delay budget.
    pub feasible: bool,
    pub snr_linear: f64,
}

/// The knapsack instance for one training round.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SelectionInstance {
    pub items: Vec<SelectionItem>,
    /// Aggregator capacity L_max in bytes.
    pub capacity_bytes: u64,
    /// Round budget T_upd in seconds.
    pub round_budget_s: f64,
}

/// A solver's chosen subset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Selected device ids in ascending order.
    pub selected_ids: Vec<u64>,
    /// Objective value: sum of selected weights.
    pub objective: f64,
    pub total_update_bytes: u64,
    pub total_sensed_bytes: u64,
    pub n_feasible: usize,
}

impl SelectionInstance {
    pub fn n_feasible(&self) -> usize {
        self.items.iter().filter(|it| it.feasible).count()
    }

    fn result_from(&self, mut selected: Vec<usize>) -> SelectionResult {
        selected.sort_unstable();
        let mut objective = 0.0;
        let mut total_update = 0u64;
        let mut total_sensed = 0u64;
        let mut ids = Vec::with_capacity(selected.len());
        for idx in selected {
            let it = &self.items[idx];
            objective += it.value;
            total_update += it.size_bytes;
            total_sensed += it.sensed_bytes;
            ids.push(it.device_id);
        }
        ids.sort_unstable();
        SelectionResult {
            selected_ids: ids,
            objective,
            total_update_bytes: total_update,
            total_sensed_bytes: total_sensed,
            n_feasible: self.n_feasible(),
        }
    }
}

/// Build the selection instance: weights over the whole population and the
/// per-device delay feasibility check against the round budget.
pub fn feasible_filter(
    devices: &[Device],
    link_budgets: &[LinkBudget],
    alpha: f64,
    t_upd_s: f64,
    capacity_bytes: u64,
) -> Result<SelectionInstance> {
    if devices.len() != link_budgets.len() {
        return Err(Error::Domain(format!(
            "{} devices but {} link budgets",
            devices.len(),
            link_budgets.len()
        )));
    }
    let w = population::weights(devices)?;
    let mut items = Vec::with_capacity(devices.len());
    for ((d, lb), wi) in devices.iter().zip(link_budgets).zip(w) {
        let delay = population::compute_delay(d, alpha)? + population::comm_delay(d.update_bytes, lb.rate_bps);
        items.push(SelectionItem {
            device_id: d.id,
            value: wi,
            size_bytes: d.update_bytes,
            sensed_bytes: d.dataset_bytes,
            feasible: delay <= t_upd_s,
            snr_linear: lb.snr_linear,
        });
    }
    Ok(SelectionInstance {
        items,
        capacity_bytes,
        round_budget_s: t_upd_s,
    })
}

/// Scan `order` (indices into `instance.items`) once, taking every item that
/// still fits in the remaining capacity.
fn capacity_scan(instance: &SelectionInstance, order: &[usize]) -> Vec<usize> {
    let mut remaining = instance.capacity_bytes;
    let mut chosen = Vec::new();
    for &idx in order {
        let size = instance.items[idx].size_bytes;
        if size <= remaining {
            remaining -= size;
            chosen.push(idx);
        }
    }
    chosen
}

fn feasible_indices(instance: &SelectionInstance) -> Vec<usize> {
    (0..instance.items.len())
        .filter(|&i| instance.items[i].feasible)
        .collect()
}

/// Greedy knapsack heuristic: sort feasible devices by weight density
/// z_i = w_i / l_i descending and take what fits. Ties break toward the
/// smaller update, then the lower device id.
pub fn greedy_select(instance: &SelectionInstance) -> SelectionResult {
    let mut order = feasible_indices(instance);
    order.sort_by(|&a, &b| {
        let ia = &instance.items[a];
        let ib = &instance.items[b];
        let za = ia.value / ia.size_bytes as f64;
        let zb = ib.value / ib.size_bytes as f64;
        zb.partial_cmp(&za)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ia.size_bytes.cmp(&ib.size_bytes))
            .then(ia.device_id.cmp(&ib.device_id))
    });
    instance.result_from(capacity_scan(instance, &order))
}

/// Best-SINR baseline: take feasible devices in descending channel quality,
/// under the same capacity scan as the greedy solver.
pub fn best_sinr_select(instance: &SelectionInstance) -> SelectionResult {
    let mut order = feasible_indices(instance);
    order.sort_by(|&a, &b| {
        let ia = &instance.items[a];
        let ib = &instance.items[b];
        ib.snr_linear
            .partial_cmp(&ia.snr_linear)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(ia.device_id.cmp(&ib.device_id))
    });
    instance.result_from(capacity_scan(instance, &order))
}

/// Default cap on items x capacity-units for the exact solver.
pub const DP_DEFAULT_WORK_BOUND: u64 = 100_000_000;

/// Exact 0/1 knapsack over the feasible items by dynamic programming.
///
/// Sizes are quantized upward to multiples of `quantum_bytes` and the
/// capacity downward, so the quantized constraint is conservative: any
/// returned subset also satisfies the exact byte constraint. With
/// `quantum_bytes = 1` the solution is exactly optimal.
pub fn dp_optimal_select(instance: &SelectionInstance, quantum_bytes: u64) -> Result<SelectionResult> {
    dp_optimal_select_bounded(instance, quantum_bytes, DP_DEFAULT_WORK_BOUND)
}

pub fn dp_optimal_select_bounded(
    instance: &SelectionInstance,
    quantum_bytes: u64,
    work_bound: u64,
) -> Result<SelectionResult> {
    if quantum_bytes == 0 {
        return Err(Error::Domain("quantum_bytes must be positive".into()));
    }
    let feasible = feasible_indices(instance);
    let cap_units = instance.capacity_bytes / quantum_bytes;
    let work = feasible.len() as u64 * (cap_units + 1);
    if work > work_bound {
        return Err(Error::WorkBoundExceeded {
            items: feasible.len(),
            capacity_units: cap_units,
            bound: work_bound,
        });
    }

    let n = feasible.len();
    let width = cap_units as usize + 1;
    let mut best = vec![0f64; width];
    // one bit per (item, capacity) cell for reconstruction
    let words_per_row = (width + 63) / 64;
    let mut take = vec![0u64; n * words_per_row];

    for (i, &idx) in feasible.iter().enumerate() {
        let it = &instance.items[idx];
        let size_units = (it.size_bytes + quantum_bytes - 1) / quantum_bytes;
        if size_units > cap_units {
            continue;
        }
        let size = size_units as usize;
        let row = &mut take[i * words_per_row..(i + 1) * words_per_row];
        for c in (size..width).rev() {
            let with = best[c - size] + it.value;
            if with > best[c] {
                best[c] = with;
                row[c / 64] |= 1 << (c % 64);
            }
        }
    }

    let mut chosen = Vec::new();
    let mut c = width - 1;
    for i in (0..n).rev() {
        if take[i * words_per_row + c / 64] >> (c % 64) & 1 == 1 {
            let it = &instance.items[feasible[i]];
            chosen.push(feasible[i]);
            let size_units = ((it.size_bytes + quantum_bytes - 1) / quantum_bytes) as usize;
            c -= size_units;
        }
    }
    Ok(instance.result_from(chosen))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    /// Instance with given (value, size) pairs, all feasible, ids 0..n.
    pub fn instance(items: &[(f64, u64)], capacity: u64) -> SelectionInstance {
        SelectionInstance {
            items: items
                .iter()
                .enumerate()
                .map(|(i, &(value, size))| SelectionItem {
                    device_id: i as u64,
                    value,
                    size_bytes: size,
                    sensed_bytes: size,
                    feasible: true,
                    snr_linear: 1.0,
                })
                .collect(),
            capacity_bytes: capacity,
            round_budget_s: 0.12,
        }
    }

    /// Exhaustive subset enumeration over feasible items; the independent
    /// oracle for both greedy and DP.
    pub fn brute_force_objective(instance: &SelectionInstance) -> f64 {
        let feasible: Vec<&SelectionItem> =
            instance.items.iter().filter(|it| it.feasible).collect();
        assert!(feasible.len() <= 20, "brute force limited to small instances");
        let mut best = 0.0f64;
        for mask in 0u32..(1 << feasible.len()) {
            let mut size = 0u64;
            let mut value = 0.0;
            for (i, it) in feasible.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    size += it.size_bytes;
                    value += it.value;
                }
            }
            if size <= instance.capacity_bytes && value > best {
                best = value;
            }
        }
        best
    }

    #[test]
    fn greedy_optimal_example() {
        let inst = instance(&[(0.5, 6), (0.3, 3), (0.2, 3)], 10);
        let res = greedy_select(&inst);
        assert_eq!(res.selected_ids, vec![0, 1]);
        assert_relative_eq!(res.objective, 0.8);
        assert_relative_eq!(brute_force_objective(&inst), 0.8);
    }

    #[test]
    fn greedy_suboptimal_example() {
        let inst = instance(&[(1.0, 10), (0.6, 6), (0.55, 5)], 10);
        let res = greedy_select(&inst);
        assert_relative_eq!(res.objective, 0.55);
        assert_eq!(res.selected_ids, vec![2]);
        // exact solver finds the true optimum
        let dp = dp_optimal_select(&inst, 1).unwrap();
        assert_relative_eq!(dp.objective, 1.0);
        assert_eq!(dp.selected_ids, vec![0]);
        assert_relative_eq!(brute_force_objective(&inst), 1.0);
    }

    #[test]
    fn zero_capacity_selects_nothing() {
        let inst = instance(&[(0.5, 6), (0.3, 3)], 0);
        let res = greedy_select(&inst);
        assert!(res.selected_ids.is_empty());
        assert_eq!(res.objective, 0.0);
    }

    #[test]
    fn empty_feasible_set() {
        let mut inst = instance(&[(0.5, 6), (0.3, 3)], 10);
        for it in &mut inst.items {
            it.feasible = false;
        }
        for res in [
            greedy_select(&inst),
            best_sinr_select(&inst),
            dp_optimal_select(&inst, 1).unwrap(),
        ] {
            assert!(res.selected_ids.is_empty());
            assert_eq!(res.objective, 0.0);
            assert_eq!(res.n_feasible, 0);
        }
    }

    #[test]
    fn dp_equal_sizes_is_top_k() {
        let inst = instance(&[(0.1, 5), (0.4, 5), (0.2, 5), (0.3, 5)], 10);
        let dp = dp_optimal_select(&inst, 1).unwrap();
        assert_eq!(dp.selected_ids, vec![1, 3]);
        assert_relative_eq!(dp.objective, 0.7);
        // greedy agrees exactly when all sizes are equal
        let g = greedy_select(&inst);
        assert_relative_eq!(g.objective, dp.objective);
    }

    #[test]
    fn dp_single_oversized_item() {
        let inst = instance(&[(1.0, 50)], 10);
        let dp = dp_optimal_select(&inst, 1).unwrap();
        assert!(dp.selected_ids.is_empty());
    }

    #[test]
    fn dp_work_bound_refusal() {
        let inst = instance(&[(0.5, 10), (0.5, 20)], 1000);
        let err = dp_optimal_select_bounded(&inst, 1, 100).unwrap_err();
        assert!(matches!(err, Error::WorkBoundExceeded { .. }));
    }

    #[test]
    fn dp_coarse_quantum_stays_within_capacity() {
        let inst = instance(&[(0.4, 1001), (0.3, 999), (0.3, 500)], 2000);
        let dp = dp_optimal_select(&inst, 1000).unwrap();
        assert!(dp.total_update_bytes <= inst.capacity_bytes);
    }

    #[test]
    fn best_sinr_prefers_closer_devices() {
        let mut inst = instance(&[(0.1, 4), (0.1, 4), (0.1, 4)], 8);
        // snr strictly decreasing with distance 0.1 / 0.5 / 1.0 km
        let params = crate::linkbudget::RadioParams::default();
        for (it, d) in inst.items.iter_mut().zip([0.1, 0.5, 1.0]) {
            it.snr_linear = crate::linkbudget::link_budget(d, &params).unwrap().snr_linear;
        }
        let res = best_sinr_select(&inst);
        assert_eq!(res.selected_ids, vec![0, 1]);
    }

    #[test]
    fn saturated_capacity_makes_algorithms_agree() {
        let inst = instance(&[(0.5, 6), (0.3, 3), (0.2, 3)], 100);
        let g = greedy_select(&inst);
        let b = best_sinr_select(&inst);
        assert_eq!(g.total_sensed_bytes, b.total_sensed_bytes);
        assert_eq!(g.selected_ids, b.selected_ids);
    }

    #[test]
    fn feasible_filter_examples() {
        use crate::linkbudget::{link_budget, RadioParams};
        use crate::population::{CategoryName, Device};

        let params = RadioParams::default();
        let phone = Device {
            id: 0,
            category: CategoryName::Smartphone,
            position: (0.0, 0.0),
            dataset_bytes: 150_000,
            update_bytes: 10_000,
            compute_capacity_cps: 1e6,
        };
        let lb = link_budget(0.2, &params).unwrap();
        let inst = feasible_filter(&[phone.clone()], &[lb], 0.5, 0.12, 1_000_000).unwrap();
        assert!(inst.items[0].feasible);

        // sensor: tau_comp = 100 ms, so tau_comm must fit in 20 ms
        let sensor = Device {
            id: 1,
            category: CategoryName::IoTSensor,
            dataset_bytes: 100_000,
            compute_capacity_cps: 5e5,
            ..phone.clone()
        };
        let far = link_budget(0.8, &params).unwrap();
        assert!(population::comm_delay(10_000, far.rate_bps) > 0.02);
        let inst = feasible_filter(&[sensor.clone()], &[far], 0.5, 0.12, 1_000_000).unwrap();
        assert!(!inst.items[0].feasible);

        // infinite budget makes everything feasible
        let far = link_budget(0.8, &params).unwrap();
        let inst = feasible_filter(&[sensor], &[far], 0.5, f64::INFINITY, 1_000_000).unwrap();
        assert!(inst.items[0].feasible);
    }

    #[test]
    fn value_scale_invariance() {
        let base = instance(&[(0.7, 9), (0.5, 5), (0.45, 4), (0.2, 3)], 12);
        let mut scaled = base.clone();
        for it in &mut scaled.items {
            it.value *= 137.0;
        }
        assert_eq!(greedy_select(&base).selected_ids, greedy_select(&scaled).selected_ids);
        assert_eq!(
            dp_optimal_select(&base, 1).unwrap().selected_ids,
            dp_optimal_select(&scaled, 1).unwrap().selected_ids
        );
    }
}
