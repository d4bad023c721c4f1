//! Sweep harness: run selection rounds across algorithms, capacity grids,
//! device-count grids and seeds, and aggregate the results.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linkbudget::{link_budget, RadioParams};
use crate::population::{sample_population, PopulationConfig};
use crate::selection::{
    best_sinr_select, dp_optimal_select, feasible_filter, greedy_select, SelectionInstance,
    SelectionResult,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Greedy,
    BestSinr,
    DpOracle,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Algorithm::Greedy => "greedy",
            Algorithm::BestSinr => "best_sinr",
            Algorithm::DpOracle => "dp_oracle",
        };
        f.write_str(s)
    }
}

/// Which parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    LMaxBytes,
    NDevices,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::LMaxBytes => "l_max_bytes",
            SweepParameter::NDevices => "n_devices",
        }
    }
}

fn default_algorithms() -> Vec<Algorithm> {
    vec![Algorithm::Greedy, Algorithm::BestSinr]
}

fn default_seeds() -> Vec<u64> {
    (0..30).collect()
}

fn default_lmax_grid() -> Vec<u64> {
    (1..=10).map(|i| i * 200_000).collect()
}

fn default_n_grid() -> Vec<usize> {
    (1..=8).map(|i| i * 100).collect()
}

fn default_t_upd_s() -> f64 {
    0.12
}

fn default_l_max_bytes() -> u64 {
    1_000_000
}

fn default_dp_quantum() -> u64 {
    1_000
}

/// Full parameterization of a sweep run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub population: PopulationConfig,
    pub radio: RadioParams,
    /// Round budget T_upd in seconds.
    pub t_upd_s: f64,
    /// Aggregator capacity L_max in bytes.
    pub l_max_bytes: u64,
    pub algorithms: Vec<Algorithm>,
    pub seeds: Vec<u64>,
    pub lmax_grid_bytes: Vec<u64>,
    pub n_grid: Vec<usize>,
    /// Quantum for the exact solver in full-scale comparisons.
    pub dp_quantum_bytes: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            population: PopulationConfig::default(),
            radio: RadioParams::default(),
            t_upd_s: default_t_upd_s(),
            l_max_bytes: default_l_max_bytes(),
            algorithms: default_algorithms(),
            seeds: default_seeds(),
            lmax_grid_bytes: default_lmax_grid(),
            n_grid: default_n_grid(),
            dp_quantum_bytes: default_dp_quantum(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.population.validate()?;
        self.radio.validate()?;
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed required".into()));
        }
        if self.lmax_grid_bytes.is_empty() || self.n_grid.is_empty() {
            return Err(Error::Config("sweep grids must be nonempty".into()));
        }
        Ok(())
    }
}

/// One output record: one algorithm run on one (sweep value, seed) instance.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: Algorithm,
    pub sweep_param: String,
    pub sweep_value: u64,
    pub seed: u64,
    pub objective: f64,
    pub total_sensed_bytes: u64,
    pub total_update_bytes: u64,
    pub n_selected: usize,
    pub n_feasible: usize,
    pub wall_time_ms: u64,
    /// Set when a solver refused the instance (e.g. DP work bound).
    pub skipped: Option<String>,
}

fn run_algorithm(
    algo: Algorithm,
    instance: &SelectionInstance,
    dp_quantum: u64,
) -> Result<SelectionResult> {
    match algo {
        Algorithm::Greedy => Ok(greedy_select(instance)),
        Algorithm::BestSinr => Ok(best_sinr_select(instance)),
        Algorithm::DpOracle => dp_optimal_select(instance, dp_quantum),
    }
}

fn rows_for_instance(
    config: &ExperimentConfig,
    instance: &SelectionInstance,
    sweep_param: SweepParameter,
    sweep_value: u64,
    seed: u64,
) -> Vec<MetricsRow> {
    config
        .algorithms
        .iter()
        .map(|&algo| {
            let start = Instant::now();
            let outcome = run_algorithm(algo, instance, config.dp_quantum_bytes);
            let wall_time_ms = start.elapsed().as_millis() as u64;
            match outcome {
                Ok(res) => MetricsRow {
                    algorithm: algo,
                    sweep_param: sweep_param.name().to_string(),
                    sweep_value,
                    seed,
                    objective: res.objective,
                    total_sensed_bytes: res.total_sensed_bytes,
                    total_update_bytes: res.total_update_bytes,
                    n_selected: res.selected_ids.len(),
                    n_feasible: res.n_feasible,
                    wall_time_ms,
                    skipped: None,
                },
                Err(err) => MetricsRow {
                    algorithm: algo,
                    sweep_param: sweep_param.name().to_string(),
                    sweep_value,
                    seed,
                    objective: 0.0,
                    total_sensed_bytes: 0,
                    total_update_bytes: 0,
                    n_selected: 0,
                    n_feasible: instance.n_feasible(),
                    wall_time_ms,
                    skipped: Some(err.to_string()),
                },
            }
        })
        .collect()
}

/// Build the selection instance for one seeded population of `n` devices.
fn build_instance(
    config: &ExperimentConfig,
    seed: u64,
    n_devices: usize,
    l_max_bytes: u64,
) -> Result<SelectionInstance> {
    let pop_config = PopulationConfig {
        n_devices,
        seed,
        ..config.population.clone()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let devices = sample_population(&pop_config, &mut rng)?;
    let server = pop_config.server_position();
    let budgets = devices
        .iter()
        .map(|d| link_budget(d.distance_km_to(server), &config.radio))
        .collect::<Result<Vec<_>>>()?;
    feasible_filter(
        &devices,
        &budgets,
        pop_config.computational_intensity,
        config.t_upd_s,
        l_max_bytes,
    )
}

/// One round at the config's own operating point: one row per algorithm.
pub fn run_round(config: &ExperimentConfig, seed: u64) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let instance = build_instance(config, seed, config.population.n_devices, config.l_max_bytes)?;
    Ok(rows_for_instance(
        config,
        &instance,
        SweepParameter::LMaxBytes,
        config.l_max_bytes,
        seed,
    ))
}

/// Run the full grid x seeds x algorithms sweep for one parameter.
///
/// For the capacity sweep each seed reuses a single population across the
/// grid. For the device-count sweep populations are nested: the population
/// at a smaller N is a prefix of the one at a larger N for the same seed.
pub fn sweep(config: &ExperimentConfig, param: SweepParameter) -> Result<Vec<MetricsRow>> {
    config.validate()?;
    let per_seed = |&seed: &u64| -> Result<Vec<MetricsRow>> {
        let mut rows = Vec::new();
        match param {
            SweepParameter::LMaxBytes => {
                for &l_max in &config.lmax_grid_bytes {
                    let instance =
                        build_instance(config, seed, config.population.n_devices, l_max)?;
                    rows.extend(rows_for_instance(config, &instance, param, l_max, seed));
                }
            }
            SweepParameter::NDevices => {
                for &n in &config.n_grid {
                    let instance = build_instance(config, seed, n, config.l_max_bytes)?;
                    rows.extend(rows_for_instance(config, &instance, param, n as u64, seed));
                }
            }
        }
        Ok(rows)
    };
    let nested: Vec<Vec<MetricsRow>> = config
        .seeds
        .par_iter()
        .map(per_seed)
        .collect::<Result<_>>()?;
    let mut rows: Vec<MetricsRow> = nested.into_iter().flatten().collect();
    rows.sort_by(|a, b| {
        a.sweep_value
            .cmp(&b.sweep_value)
            .then(a.seed.cmp(&b.seed))
            .then(a.algorithm.to_string().cmp(&b.algorithm.to_string()))
    });
    Ok(rows)
}

/// Group statistics for one (algorithm, sweep value) cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SummaryRow {
    pub algorithm: Algorithm,
    pub sweep_value: u64,
    pub n_rows: usize,
    pub mean_objective: f64,
    pub sd_objective: f64,
    pub mean_total_sensed_bytes: f64,
    pub sd_total_sensed_bytes: f64,
    pub mean_n_selected: f64,
    pub mean_n_feasible: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Aggregate rows over seeds, one output row per (algorithm, sweep value).
/// Skipped rows are excluded. Population standard deviation.
pub fn summarize(rows: &[MetricsRow]) -> Result<Vec<SummaryRow>> {
    let rows: Vec<&MetricsRow> = rows.iter().filter(|r| r.skipped.is_none()).collect();
    if rows.is_empty() {
        return Err(Error::Domain("summarize on empty row set".into()));
    }
    let mut keys: Vec<(Algorithm, u64)> = rows.iter().map(|r| (r.algorithm, r.sweep_value)).collect();
    keys.sort_by_key(|&(a, v)| (v, a.to_string()));
    keys.dedup();
    Ok(keys
        .into_iter()
        .map(|(algorithm, sweep_value)| {
            let group: Vec<&&MetricsRow> = rows
                .iter()
                .filter(|r| r.algorithm == algorithm && r.sweep_value == sweep_value)
                .collect();
            let objectives: Vec<f64> = group.iter().map(|r| r.objective).collect();
            let sensed: Vec<f64> = group.iter().map(|r| r.total_sensed_bytes as f64).collect();
            let (mean_objective, sd_objective) = mean_sd(&objectives);
            let (mean_total_sensed_bytes, sd_total_sensed_bytes) = mean_sd(&sensed);
            let mean_n_selected =
                group.iter().map(|r| r.n_selected as f64).sum::<f64>() / group.len() as f64;
            let mean_n_feasible =
                group.iter().map(|r| r.n_feasible as f64).sum::<f64>() / group.len() as f64;
            SummaryRow {
                algorithm,
                sweep_value,
                n_rows: group.len(),
                mean_objective,
                sd_objective,
                mean_total_sensed_bytes,
                sd_total_sensed_bytes,
                mean_n_selected,
                mean_n_feasible,
            }
        })
        .collect())
}

pub const METRICS_CSV_HEADER: &str = "algorithm,sweep_param,sweep_value,seed,objective,\
total_sensed_bytes,total_update_bytes,n_selected,n_feasible,wall_time_ms";

/// Write rows as CSV. `provenance` lines (flag overrides etc.) are emitted
/// first as `#`-prefixed comments; skipped rows additionally get a comment
/// carrying the skip reason.
pub fn write_metrics_csv<W: Write>(
    rows: &[MetricsRow],
    provenance: &[String],
    mut w: W,
) -> Result<()> {
    for line in provenance {
        writeln!(w, "# {line}")?;
    }
    writeln!(w, "{METRICS_CSV_HEADER}")?;
    for r in rows {
        if let Some(reason) = &r.skipped {
            writeln!(
                w,
                "# skipped: algorithm={} sweep_value={} seed={} reason={}",
                r.algorithm, r.sweep_value, r.seed, reason
            )?;
            continue;
        }
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            r.sweep_param,
            r.sweep_value,
            r.seed,
            r.objective,
            r.total_sensed_bytes,
            r.total_update_bytes,
            r.n_selected,
            r.n_feasible,
            r.wall_time_ms
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn small_config() -> ExperimentConfig {
        ExperimentConfig {
            population: PopulationConfig {
                n_devices: 40,
                ..PopulationConfig::default()
            },
            seeds: vec![0, 1, 2],
            lmax_grid_bytes: vec![100_000, 200_000],
            n_grid: vec![20, 40],
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn run_round_row_shape() {
        let config = ExperimentConfig {
            algorithms: vec![Algorithm::Greedy],
            ..ExperimentConfig::default()
        };
        let rows = run_round(&config, 7).unwrap();
        assert_eq!(rows.len(), 1);
        // 1 MB capacity over Normal(10 kB, 2 kB) updates: essentially every
        // update exceeds 4 kB (mean - 3 sigma), capping the selection at 250
        assert!(rows[0].total_update_bytes <= config.l_max_bytes);
        assert!(rows[0].n_selected <= 250);
        assert!(rows[0].n_selected <= rows[0].n_feasible);
        assert!(rows[0].objective >= 0.0 && rows[0].objective <= 1.0);
    }

    #[test]
    fn run_round_empty_algorithms() {
        let config = ExperimentConfig {
            algorithms: vec![],
            ..small_config()
        };
        assert!(run_round(&config, 0).unwrap().is_empty());
    }

    #[test]
    fn run_round_shares_the_instance_across_algorithms() {
        let config = small_config();
        let rows = run_round(&config, 3).unwrap();
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].n_feasible, rows[1].n_feasible);
    }

    #[test]
    fn run_round_is_deterministic() {
        let config = small_config();
        let a = run_round(&config, 11).unwrap();
        let b = run_round(&config, 11).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.objective, y.objective);
            assert_eq!(x.total_sensed_bytes, y.total_sensed_bytes);
            assert_eq!(x.n_selected, y.n_selected);
        }
    }

    #[test]
    fn sweep_row_count() {
        let config = small_config();
        let rows = sweep(&config, SweepParameter::LMaxBytes).unwrap();
        // |grid| * |seeds| * |algorithms|
        assert_eq!(rows.len(), 2 * 3 * 2);
        let rows = sweep(&config, SweepParameter::NDevices).unwrap();
        assert_eq!(rows.len(), 2 * 3 * 2);
    }

    #[test]
    fn degenerate_grid_equals_run_round() {
        let mut config = small_config();
        config.lmax_grid_bytes = vec![config.l_max_bytes];
        config.seeds = vec![5];
        let swept = sweep(&config, SweepParameter::LMaxBytes).unwrap();
        let single = run_round(&config, 5).unwrap();
        assert_eq!(swept.len(), single.len());
        for (a, b) in swept.iter().zip(&single) {
            assert_eq!(a.objective, b.objective);
            assert_eq!(a.n_selected, b.n_selected);
        }
    }

    #[test]
    fn greedy_objective_nondecreasing_in_capacity() {
        let config = ExperimentConfig {
            algorithms: vec![Algorithm::Greedy],
            seeds: vec![4],
            lmax_grid_bytes: (1..=8).map(|i| i * 50_000).collect(),
            ..small_config()
        };
        let rows = sweep(&config, SweepParameter::LMaxBytes).unwrap();
        let mut prev = -1.0;
        for r in rows {
            assert!(r.objective >= prev - 1e-12);
            prev = r.objective;
        }
    }

    #[test]
    fn saturation_makes_all_solvers_agree() {
        // capacity far larger than any feasible update total
        let config = ExperimentConfig {
            l_max_bytes: 1_000_000_000,
            algorithms: vec![Algorithm::Greedy, Algorithm::BestSinr, Algorithm::DpOracle],
            ..small_config()
        };
        let rows = run_round(&config, 2).unwrap();
        assert_eq!(rows.len(), 3);
        for r in &rows {
            assert!(r.skipped.is_none());
            assert_eq!(r.n_selected, r.n_feasible);
            assert_eq!(r.total_sensed_bytes, rows[0].total_sensed_bytes);
        }
    }

    #[test]
    fn summarize_examples() {
        let config = small_config();
        let rows = sweep(&config, SweepParameter::LMaxBytes).unwrap();
        let summary = summarize(&rows).unwrap();
        assert_eq!(summary.len(), 2 * 2); // algorithms x grid
        for s in &summary {
            assert_eq!(s.n_rows, 3);
        }

        let single = &rows[..1];
        let s = summarize(single).unwrap();
        assert_eq!(s.len(), 1);
        assert_relative_eq!(s[0].mean_objective, rows[0].objective);
        assert_relative_eq!(s[0].sd_objective, 0.0);

        assert!(summarize(&[]).is_err());
    }

    #[test]
    fn summarize_two_row_arithmetic() {
        let mk = |objective| MetricsRow {
            algorithm: Algorithm::Greedy,
            sweep_param: "l_max_bytes".into(),
            sweep_value: 1,
            seed: 0,
            objective,
            total_sensed_bytes: 0,
            total_update_bytes: 0,
            n_selected: 0,
            n_feasible: 0,
            wall_time_ms: 0,
            skipped: None,
        };
        let s = summarize(&[mk(0.2), mk(0.4)]).unwrap();
        assert_eq!(s.len(), 1);
        assert_relative_eq!(s[0].mean_objective, 0.3);
        assert_relative_eq!(s[0].sd_objective, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn dp_refusal_becomes_a_skipped_row() {
        let config = ExperimentConfig {
            algorithms: vec![Algorithm::DpOracle],
            dp_quantum_bytes: 1, // 1-byte quantum at 1 MB capacity blows the bound
            population: PopulationConfig {
                n_devices: 10_000,
                ..PopulationConfig::default()
            },
            ..ExperimentConfig::default()
        };
        let rows = run_round(&config, 0).unwrap();
        assert_eq!(rows.len(), 1);
        assert!(rows[0].skipped.is_some());
    }

    #[test]
    fn csv_output_is_deterministic() {
        let config = small_config();
        let rows = sweep(&config, SweepParameter::LMaxBytes).unwrap();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_metrics_csv(&rows, &[], &mut a).unwrap();
        write_metrics_csv(&rows, &[], &mut b).unwrap();
        assert_eq!(a, b);
        assert!(a.starts_with(METRICS_CSV_HEADER.as_bytes()));
    }
}
