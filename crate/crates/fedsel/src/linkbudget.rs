//! Deterministic radio propagation math for a device-server link: pathloss,
//! noise power, SNR, spectral efficiency and Shannon rate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Radio parameters shared by every link in a run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RadioParams {
    /// Transmit power per device in dBm.
    pub tx_power_dbm: f64,
    /// Noise spectral density in dBm/Hz.
    pub noise_density_dbm_hz: f64,
    /// Channel bandwidth per user in Hz.
    pub bandwidth_hz: f64,
    /// Distances below this are clamped before the pathloss formula.
    pub min_distance_km: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        Self {
            // 200 mW, carried at full precision.
            tx_power_dbm: 10.0 * 200f64.log10(),
            noise_density_dbm_hz: -174.0,
            bandwidth_hz: 180_000.0,
            min_distance_km: 0.01,
        }
    }
}

impl RadioParams {
    pub fn validate(&self) -> Result<()> {
        if self.bandwidth_hz <= 0.0 {
            return Err(Error::Config("bandwidth_hz must be positive".into()));
        }
        if self.min_distance_km <= 0.0 {
            return Err(Error::Config("min_distance_km must be positive".into()));
        }
        Ok(())
    }
}

/// Derived radio quantities for one device-server link.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LinkBudget {
    pub distance_km: f64,
    pub pathloss_db: f64,
    pub rx_power_dbm: f64,
    pub noise_power_dbm: f64,
    pub snr_linear: f64,
    pub spectral_efficiency_bps_hz: f64,
    pub rate_bps: f64,
}

/// Urban-macro pathloss in dB: 128.1 + 37.6 log10(d km).
pub fn pathloss_db(distance_km: f64) -> Result<f64> {
    if distance_km <= 0.0 {
        return Err(Error::Domain(format!(
            "pathloss requires positive distance, got {distance_km}"
        )));
    }
    Ok(128.1 + 37.6 * distance_km.log10())
}

/// Total noise power over a bandwidth: N0 + 10 log10(B).
pub fn noise_power_dbm(bandwidth_hz: f64, noise_density_dbm_hz: f64) -> Result<f64> {
    if bandwidth_hz <= 0.0 {
        return Err(Error::Domain(format!(
            "noise power requires positive bandwidth, got {bandwidth_hz}"
        )));
    }
    Ok(noise_density_dbm_hz + 10.0 * bandwidth_hz.log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Full link budget for a device at the given distance. Distances below
/// `params.min_distance_km` are clamped first.
pub fn link_budget(distance_km: f64, params: &RadioParams) -> Result<LinkBudget> {
    params.validate()?;
    let d = distance_km.max(params.min_distance_km);
    let pl = pathloss_db(d)?;
    let rx = params.tx_power_dbm - pl;
    let noise = noise_power_dbm(params.bandwidth_hz, params.noise_density_dbm_hz)?;
    let snr_linear = db_to_linear(rx - noise);
    let spectral_efficiency = (1.0 + snr_linear).log2();
    Ok(LinkBudget {
        distance_km: d,
        pathloss_db: pl,
        rx_power_dbm: rx,
        noise_power_dbm: noise,
        snr_linear,
        spectral_efficiency_bps_hz: spectral_efficiency,
        rate_bps: params.bandwidth_hz * spectral_efficiency,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pathloss_at_one_km_is_the_constant_term() {
        assert_relative_eq!(pathloss_db(1.0).unwrap(), 128.1, max_relative = 1e-12);
    }

    #[test]
    fn pathloss_at_100m() {
        // 128.1 - 37.6
        assert_relative_eq!(pathloss_db(0.1).unwrap(), 90.5, epsilon = 1e-9);
    }

    #[test]
    fn pathloss_at_half_km() {
        // 128.1 - 37.6 * log10(2)
        assert_relative_eq!(pathloss_db(0.5).unwrap(), 116.781, epsilon = 1e-3);
    }

    #[test]
    fn pathloss_rejects_nonpositive_distance() {
        assert!(pathloss_db(0.0).is_err());
        assert!(pathloss_db(-1.0).is_err());
    }

    #[test]
    fn noise_power_examples() {
        assert_relative_eq!(noise_power_dbm(1.0, -174.0).unwrap(), -174.0, epsilon = 1e-12);
        assert_relative_eq!(
            noise_power_dbm(180_000.0, -174.0).unwrap(),
            -121.447,
            epsilon = 1e-3
        );
        assert_relative_eq!(noise_power_dbm(2.0, -174.0).unwrap(), -170.990, epsilon = 1e-3);
        assert!(noise_power_dbm(0.0, -174.0).is_err());
    }

    #[test]
    fn link_budget_at_one_km() {
        let lb = link_budget(1.0, &RadioParams::default()).unwrap();
        let snr_db = linear_to_db(lb.snr_linear);
        assert_relative_eq!(snr_db, 16.36, epsilon = 0.01);
        assert_relative_eq!(lb.snr_linear, 43.2, epsilon = 0.2);
        assert_relative_eq!(lb.rate_bps, 0.99e6, max_relative = 0.01);
    }

    #[test]
    fn link_budget_at_100m() {
        let lb = link_budget(0.1, &RadioParams::default()).unwrap();
        assert_relative_eq!(lb.pathloss_db, 90.5, epsilon = 1e-9);
        assert_relative_eq!(linear_to_db(lb.snr_linear), 53.96, epsilon = 0.01);
    }

    #[test]
    fn zero_snr_gives_zero_rate() {
        let params = RadioParams {
            tx_power_dbm: f64::NEG_INFINITY,
            ..RadioParams::default()
        };
        let lb = link_budget(1.0, &params).unwrap();
        assert_eq!(lb.snr_linear, 0.0);
        assert_eq!(lb.rate_bps, 0.0);
    }

    #[test]
    fn distance_below_floor_is_clamped() {
        let params = RadioParams::default();
        let lb = link_budget(1e-6, &params).unwrap();
        assert_eq!(lb.distance_km, params.min_distance_km);
    }

    #[test]
    fn rate_strictly_decreasing_in_distance() {
        let params = RadioParams::default();
        let mut prev = f64::INFINITY;
        for i in 0..100 {
            let d = params.min_distance_km + (10.0 - params.min_distance_km) * i as f64 / 99.0;
            let lb = link_budget(d, &params).unwrap();
            assert!(lb.rate_bps < prev, "rate not decreasing at d={d}");
            prev = lb.rate_bps;
        }
    }

    #[test]
    fn budget_fields_are_consistent() {
        let params = RadioParams::default();
        for d in [0.01, 0.05, 0.3, 1.0, 3.0, 9.9] {
            let lb = link_budget(d, &params).unwrap();
            assert_relative_eq!(
                lb.spectral_efficiency_bps_hz,
                (1.0 + lb.snr_linear).log2(),
                max_relative = 1e-12
            );
            assert_relative_eq!(
                lb.rate_bps,
                params.bandwidth_hz * lb.spectral_efficiency_bps_hz,
                max_relative = 1e-9
            );
        }
    }

    #[test]
    fn db_linear_round_trip() {
        for i in 0..=400 {
            let x = -200.0 + i as f64;
            assert_relative_eq!(linear_to_db(db_to_linear(x)), x, epsilon = 1e-9);
        }
    }
}
