//! Constants pinned by recorded calibration runs, loaded from
//! `data/calibration.toml` at compile time.

use std::sync::OnceLock;

use serde::Deserialize;

const SOURCE: &str = include_str!("../data/calibration.toml");

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct Calibration {
    pub version: u32,
    pub good_set: GoodSet,
    pub uniformity: Uniformity,
    pub clt: Clt,
    pub hiding: Hiding,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct GoodSet {
    pub floor_d4096: f64,
    pub measured_d4096: f64,
    pub measured_d64: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct Uniformity {
    pub c: f64,
    pub measured_ratio_d64: f64,
    pub measured_ratio_d4096: f64,
    pub samples: u64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct Clt {
    pub c: f64,
    pub measured_scaled_r16: f64,
    pub measured_scaled_r256: f64,
}

#[derive(Clone, Debug, Deserialize, PartialEq)]
pub struct Hiding {
    pub factor: f64,
}

impl Calibration {
    /// `c · d^{-1/6}`
    pub fn uniformity_bound(&self, d: usize) -> f64 {
        self.uniformity.c * (d as f64).powf(-1.0 / 6.0)
    }

    pub fn clt_bound(&self, r: usize) -> f64 {
        self.clt.c / (r as f64).sqrt()
    }

    pub fn hiding_bound(&self, d: usize) -> f64 {
        self.hiding.factor * self.uniformity_bound(d)
    }
}

pub fn calibration() -> &'static Calibration {
    static CAL: OnceLock<Calibration> = OnceLock::new();
    CAL.get_or_init(|| toml::from_str(SOURCE).expect("bundled calibration file parses"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loads_and_measurements_respect_pins() {
        let c = calibration();
        assert_eq!(c.version, 1);
        assert!(c.good_set.measured_d4096 >= c.good_set.floor_d4096);
        assert!(c.good_set.measured_d4096 > c.good_set.measured_d64);
        assert!(c.uniformity.measured_ratio_d64 <= c.uniformity.c);
        assert!(c.uniformity.measured_ratio_d4096 <= c.uniformity.c);
        assert!(c.clt.measured_scaled_r16 <= c.clt.c);
        assert!((c.uniformity_bound(64) - c.uniformity.c / 2.0).abs() < 1e-12);
    }
}
