//! Heterogeneous device population: sampling, per-device delays and
//! aggregation weights.

use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One class of IoT participant with its population mix and capabilities.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DeviceCategory {
    pub name: CategoryName,
    /// Fraction of the population in this category; fractions sum to 1.
    pub mix_fraction: f64,
    /// Mean local training dataset size in bytes.
    pub mean_dataset_bytes: f64,
    /// Compute capacity in CPU cycles per second.
    pub compute_capacity_cps: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CategoryName {
    Smartphone,
    Vehicle,
    IoTSensor,
}

impl fmt::Display for CategoryName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            CategoryName::Smartphone => "smartphone",
            CategoryName::Vehicle => "vehicle",
            CategoryName::IoTSensor => "iot_sensor",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for CategoryName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "smartphone" => Ok(CategoryName::Smartphone),
            "vehicle" => Ok(CategoryName::Vehicle),
            "iot_sensor" => Ok(CategoryName::IoTSensor),
            other => Err(Error::Config(format!("unknown device category: {other}"))),
        }
    }
}

/// One IoT participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub id: u64,
    pub category: CategoryName,
    /// Position (x, y) in km within the service square.
    pub position: (f64, f64),
    /// Local training dataset size D_i in bytes.
    pub dataset_bytes: u64,
    /// Local model update size l_i in bytes.
    pub update_bytes: u64,
    /// Compute capacity C_i in CPU cycles per second.
    pub compute_capacity_cps: f64,
}

impl Device {
    /// Distance in km to a point (the edge server sits at the square's center).
    pub fn distance_km_to(&self, point: (f64, f64)) -> f64 {
        let dx = self.position.0 - point.0;
        let dy = self.position.1 - point.1;
        (dx * dx + dy * dy).sqrt()
    }
}

/// Parameters for sampling a device population.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct PopulationConfig {
    pub n_devices: usize,
    pub area_side_km: f64,
    pub categories: Vec<DeviceCategory>,
    /// Std dev of dataset size, shared by all categories.
    pub dataset_sigma_bytes: f64,
    pub update_mean_bytes: f64,
    pub update_sigma_bytes: f64,
    /// Computational intensity alpha in CPU cycles per byte of sensed data.
    pub computational_intensity: f64,
    pub seed: u64,
}

impl Default for PopulationConfig {
    fn default() -> Self {
        Self {
            n_devices: 300,
            area_side_km: 1.0,
            categories: vec![
                DeviceCategory {
                    name: CategoryName::Smartphone,
                    mix_fraction: 0.5,
                    mean_dataset_bytes: 150_000.0,
                    compute_capacity_cps: 1e6,
                },
                DeviceCategory {
                    name: CategoryName::Vehicle,
                    mix_fraction: 0.3,
                    mean_dataset_bytes: 250_000.0,
                    compute_capacity_cps: 2e6,
                },
                DeviceCategory {
                    name: CategoryName::IoTSensor,
                    mix_fraction: 0.2,
                    mean_dataset_bytes: 100_000.0,
                    compute_capacity_cps: 5e5,
                },
            ],
            dataset_sigma_bytes: 20_000.0,
            update_mean_bytes: 10_000.0,
            update_sigma_bytes: 2_000.0,
            computational_intensity: 0.5,
            seed: 0,
        }
    }
}

impl PopulationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_devices == 0 {
            return Err(Error::Config("n_devices must be at least 1".into()));
        }
        if self.categories.is_empty() {
            return Err(Error::Config("at least one device category required".into()));
        }
        let mix: f64 = self.categories.iter().map(|c| c.mix_fraction).sum();
        if (mix - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!(
                "category mix fractions must sum to 1, got {mix}"
            )));
        }
        if self.dataset_sigma_bytes < 0.0 || self.update_sigma_bytes < 0.0 {
            return Err(Error::Config("sigmas must be nonnegative".into()));
        }
        for c in &self.categories {
            if c.mean_dataset_bytes <= 0.0 || c.compute_capacity_cps <= 0.0 {
                return Err(Error::Config(format!(
                    "category {} must have positive mean dataset and capacity",
                    c.name
                )));
            }
        }
        Ok(())
    }

    /// Center of the service square, where the edge server sits.
    pub fn server_position(&self) -> (f64, f64) {
        (self.area_side_km / 2.0, self.area_side_km / 2.0)
    }
}

/// Category for the device at stream position `index` (0-based), chosen by a
/// largest-remainder rule so that every prefix tracks the mix as closely as
/// possible. Counts over a full population of N divisible by 10 under the
/// default mix are exact, and populations of different sizes share prefixes.
fn category_at(categories: &[DeviceCategory], counts: &mut [usize], index: usize) -> usize {
    let n = (index + 1) as f64;
    let mut best = 0usize;
    let mut best_deficit = f64::NEG_INFINITY;
    for (j, c) in categories.iter().enumerate() {
        let deficit = c.mix_fraction * n - counts[j] as f64;
        if deficit > best_deficit + 1e-12 {
            best = j;
            best_deficit = deficit;
        }
    }
    counts[best] += 1;
    best
}

/// Normal sample resampled until it is at least 1, rounded to whole bytes.
fn sample_bytes<R: Rng>(rng: &mut R, mean: f64, sigma: f64) -> u64 {
    let dist = Normal::new(mean, sigma).expect("valid normal parameters");
    loop {
        let x = dist.sample(rng);
        if x >= 1.0 {
            return x.round() as u64;
        }
    }
}

/// Draw a full device population. Deterministic given the RNG state; devices
/// are sampled sequentially, so for a fixed stream the first n devices of a
/// larger population equal the population of size n.
pub fn sample_population<R: Rng>(config: &PopulationConfig, rng: &mut R) -> Result<Vec<Device>> {
    config.validate()?;
    let mut counts = vec![0usize; config.categories.len()];
    let mut devices = Vec::with_capacity(config.n_devices);
    for i in 0..config.n_devices {
        let cat_idx = category_at(&config.categories, &mut counts, i);
        let cat = &config.categories[cat_idx];
        let x = rng.gen_range(0.0..config.area_side_km);
        let y = rng.gen_range(0.0..config.area_side_km);
        let dataset_bytes = sample_bytes(rng, cat.mean_dataset_bytes, config.dataset_sigma_bytes);
        let update_bytes = sample_bytes(rng, config.update_mean_bytes, config.update_sigma_bytes);
        devices.push(Device {
            id: i as u64,
            category: cat.name,
            position: (x, y),
            dataset_bytes,
            update_bytes,
            compute_capacity_cps: cat.compute_capacity_cps,
        });
    }
    Ok(devices)
}

/// Local training delay: alpha * D_i / C_i, with alpha in cycles per byte.
pub fn compute_delay(device: &Device, alpha: f64) -> Result<f64> {
    if device.compute_capacity_cps <= 0.0 {
        return Err(Error::Domain(format!(
            "device {} has nonpositive compute capacity",
            device.id
        )));
    }
    Ok(alpha * device.dataset_bytes as f64 / device.compute_capacity_cps)
}

/// Upload delay for an update of `update_bytes` at `rate_bps`. A nonpositive
/// rate yields an infinite delay: the device cannot participate.
pub fn comm_delay(update_bytes: u64, rate_bps: f64) -> f64 {
    if update_bytes == 0 {
        return 0.0;
    }
    if rate_bps <= 0.0 {
        return f64::INFINITY;
    }
    (8.0 * update_bytes as f64) / rate_bps
}

/// Aggregation weights w_i = D_i / sum_j D_j over the whole population.
pub fn weights(devices: &[Device]) -> Result<Vec<f64>> {
    if devices.is_empty() {
        return Err(Error::Domain("weights of an empty population".into()));
    }
    let total: f64 = devices.iter().map(|d| d.dataset_bytes as f64).sum();
    if total <= 0.0 {
        return Err(Error::Domain("total dataset size must be positive".into()));
    }
    Ok(devices
        .iter()
        .map(|d| d.dataset_bytes as f64 / total)
        .collect())
}

const CSV_HEADER: &str = "id,category,x_km,y_km,dataset_bytes,update_bytes,capacity_cps";

/// Write a population as CSV for reproducibility.
pub fn write_population_csv<W: Write>(devices: &[Device], mut w: W) -> Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for d in devices {
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            d.id, d.category, d.position.0, d.position.1, d.dataset_bytes, d.update_bytes,
            d.compute_capacity_cps
        )?;
    }
    Ok(())
}

/// Read a population written by [`write_population_csv`].
pub fn read_population_csv<R: Read>(r: R) -> Result<Vec<Device>> {
    let reader = BufReader::new(r);
    let mut devices = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            if line != CSV_HEADER {
                return Err(Error::Config(format!("unexpected CSV header: {line}")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(Error::Config(format!(
                "line {}: expected 7 fields, got {}",
                lineno + 1,
                fields.len()
            )));
        }
        let parse_err =
            |f: &str| Error::Config(format!("line {}: bad numeric field {f}", lineno + 1));
        devices.push(Device {
            id: fields[0].parse().map_err(|_| parse_err(fields[0]))?,
            category: fields[1].parse()?,
            position: (
                fields[2].parse().map_err(|_| parse_err(fields[2]))?,
                fields[3].parse().map_err(|_| parse_err(fields[3]))?,
            ),
            dataset_bytes: fields[4].parse().map_err(|_| parse_err(fields[4]))?,
            update_bytes: fields[5].parse().map_err(|_| parse_err(fields[5]))?,
            compute_capacity_cps: fields[6].parse().map_err(|_| parse_err(fields[6]))?,
        });
    }
    Ok(devices)
}
