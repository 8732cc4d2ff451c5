//! Seeded synthetic material data.
//!
//! All randomness comes from ChaCha8 generators keyed by `(seed, stream)`;
//! Monte Carlo replicate `r` uses stream `r`, so replicates are independent of
//! scheduling and of each other.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::material::{DataPoint, MaterialDataSet};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenError {
    #[error("invalid generator configuration: {0}")]
    InvalidConfig(&'static str),
}

/// Generator for replicate stream `stream` under master seed `seed`.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// `sigma_scale / (1 + exp(-rate * eps))`
pub fn sigmoid_stress(eps: f64, sigma_scale: f64, rate: f64) -> f64 {
    sigma_scale / (1.0 + (-rate * eps).exp())
}

/// Sigmoid law with Gaussian noise on every point and extra Gaussian noise on
/// a random subset of `d - n_clean` points. Noise multipliers are in Pa.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SigmoidGenConfig {
    pub d: usize,
    pub n_clean: usize,
    pub strain_lo: f64,
    pub strain_hi: f64,
    pub sigma_scale: f64,
    pub rate: f64,
    pub noise_clean: f64,
    pub noise_outlier: f64,
    pub seed: u64,
}

impl Default for SigmoidGenConfig {
    fn default() -> Self {
        Self {
            d: 400,
            n_clean: 360,
            strain_lo: -5e-3,
            strain_hi: 5e-3,
            sigma_scale: 1e6,
            rate: 1e3,
            noise_clean: 0.1,
            noise_outlier: 0.8,
            seed: 0,
        }
    }
}

impl SigmoidGenConfig {
    /// Noise multipliers read as fractions of a tenth of `sigma_scale`
    /// (1e4 Pa and 8e4 Pa at the default scale) instead of plain pascals.
    pub fn scaled() -> Self {
        let base = Self::default();
        let unit = 0.1 * base.sigma_scale;
        Self { noise_clean: base.noise_clean * unit, noise_outlier: base.noise_outlier * unit, ..base }
    }

    pub fn validate(&self) -> Result<(), GenError> {
        if self.d == 0 {
            return Err(GenError::InvalidConfig("d must be at least 1"));
        }
        if self.n_clean > self.d {
            return Err(GenError::InvalidConfig("n_clean must not exceed d"));
        }
        if !(self.strain_lo < self.strain_hi) || !self.strain_lo.is_finite() || !self.strain_hi.is_finite() {
            return Err(GenError::InvalidConfig("strain bounds must be finite with strain_lo < strain_hi"));
        }
        let scales = [self.sigma_scale, self.rate, self.noise_clean, self.noise_outlier];
        if scales.iter().any(|s| !(*s >= 0.0) || !s.is_finite()) {
            return Err(GenError::InvalidConfig("scales must be finite and non-negative"));
        }
        Ok(())
    }

    pub fn clean_stress(&self, eps: f64) -> f64 {
        sigmoid_stress(eps, self.sigma_scale, self.rate)
    }
}

/// Generated sigmoid data together with the clean-subset mask.
#[derive(Debug, Clone)]
pub struct SigmoidSample {
    pub data: MaterialDataSet,
    pub clean: Vec<bool>,
}

pub fn sample_sigmoid<R: Rng>(cfg: &SigmoidGenConfig, rng: &mut R) -> Result<SigmoidSample, GenError> {
    cfg.validate()?;
    let strains: Vec<f64> = (0..cfg.d).map(|_| rng.random_range(cfg.strain_lo..=cfg.strain_hi)).collect();
    let mut clean = vec![false; cfg.d];
    for j in index::sample(rng, cfg.d, cfg.n_clean) {
        clean[j] = true;
    }
    let points = strains
        .iter()
        .zip(&clean)
        .map(|(&eps, &is_clean)| {
            let mut sig = cfg.clean_stress(eps) + cfg.noise_clean * rng.sample::<f64, _>(StandardNormal);
            if !is_clean {
                sig += cfg.noise_outlier * rng.sample::<f64, _>(StandardNormal);
            }
            DataPoint::new(eps, sig)
        })
        .collect();
    let data = MaterialDataSet::new(points).expect("generated points are finite");
    Ok(SigmoidSample { data, clean })
}

pub fn gen_sigmoid_dataset(cfg: &SigmoidGenConfig) -> Result<MaterialDataSet, GenError> {
    sample_sigmoid(cfg, &mut replicate_rng(cfg.seed, 0)).map(|s| s.data)
}

/// Linear law with additive Gaussian noise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearGenConfig {
    pub d: usize,
    /// Pa
    pub modulus: f64,
    pub strain_lo: f64,
    pub strain_hi: f64,
    /// Pa
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for LinearGenConfig {
    fn default() -> Self {
        Self { d: 100, modulus: 2e9, strain_lo: 0.0, strain_hi: 1e-3, noise_std: 2e4, seed: 0 }
    }
}

impl LinearGenConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.d == 0 {
            return Err(GenError::InvalidConfig("d must be at least 1"));
        }
        if !self.modulus.is_finite() {
            return Err(GenError::InvalidConfig("modulus must be finite"));
        }
        if !(self.strain_lo <= self.strain_hi) || !self.strain_lo.is_finite() || !self.strain_hi.is_finite() {
            return Err(GenError::InvalidConfig("strain bounds must be finite with strain_lo <= strain_hi"));
        }
        if !(self.noise_std >= 0.0) || !self.noise_std.is_finite() {
            return Err(GenError::InvalidConfig("noise_std must be finite and non-negative"));
        }
        Ok(())
    }
}

pub fn sample_linear<R: Rng>(cfg: &LinearGenConfig, rng: &mut R) -> Result<MaterialDataSet, GenError> {
    cfg.validate()?;
    let strains: Vec<f64> = (0..cfg.d).map(|_| rng.random_range(cfg.strain_lo..=cfg.strain_hi)).collect();
    let points = strains
        .into_iter()
        .map(|eps| DataPoint::new(eps, cfg.modulus * eps + cfg.noise_std * rng.sample::<f64, _>(StandardNormal)))
        .collect();
    Ok(MaterialDataSet::new(points).expect("generated points are finite"))
}

pub fn gen_linear_noisy_dataset(cfg: &LinearGenConfig) -> Result<MaterialDataSet, GenError> {
    sample_linear(cfg, &mut replicate_rng(cfg.seed, 0))
}

/// Generator file contents: `{"family": "sigmoid" | "linear", ...fields}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GenConfig {
    Sigmoid(SigmoidGenConfig),
    Linear(LinearGenConfig),
}

impl GenConfig {
    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn seed(&self) -> u64 {
        match self {
            GenConfig::Sigmoid(c) => c.seed,
            GenConfig::Linear(c) => c.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self {
            GenConfig::Sigmoid(c) => c.seed = seed,
            GenConfig::Linear(c) => c.seed = seed,
        }
        self
    }

    pub fn validate(&self) -> Result<(), GenError> {
        match self {
            GenConfig::Sigmoid(c) => c.validate(),
            GenConfig::Linear(c) => c.validate(),
        }
    }

    /// Data set for replicate stream `stream` under the configured seed.
    pub fn generate(&self, stream: u64) -> Result<MaterialDataSet, GenError> {
        let mut rng = replicate_rng(self.seed(), stream);
        match self {
            GenConfig::Sigmoid(c) => sample_sigmoid(c, &mut rng).map(|s| s.data),
            GenConfig::Linear(c) => sample_linear(c, &mut rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_midpoint() {
        assert_eq!(sigmoid_stress(0.0, 1e6, 1e3), 5e5);
    }

    #[test]
    fn sigmoid_defaults() {
        let sample = sample_sigmoid(&SigmoidGenConfig::default(), &mut replicate_rng(7, 0)).unwrap();
        assert_eq!(sample.data.len(), 400);
        assert_eq!(sample.clean.iter().filter(|&&c| c).count(), 360);
        assert!(sample.data.points().iter().all(|p| (-5e-3..=5e-3).contains(&p.strain)));
    }

    #[test]
    fn scaled_variant_noise() {
        let s = SigmoidGenConfig::scaled();
        assert_eq!(s.noise_clean, 1e4);
        assert_eq!(s.noise_outlier, 8e4);
    }

    #[test]
    fn linear_zero_noise_on_line() {
        let cfg = LinearGenConfig { d: 3, noise_std: 0.0, ..LinearGenConfig::default() };
        let data = gen_linear_noisy_dataset(&cfg).unwrap();
        assert_eq!(data.len(), 3);
        for p in data.points() {
            assert_eq!(p.stress, 2e9 * p.strain);
        }
        assert_eq!(gen_linear_noisy_dataset(&LinearGenConfig::default()).unwrap().len(), 100);
    }

    #[test]
    fn seeds_and_streams() {
        let a = LinearGenConfig { seed: 1, ..LinearGenConfig::default() };
        let b = LinearGenConfig { seed: 2, ..a };
        let (da, db) = (gen_linear_noisy_dataset(&a).unwrap(), gen_linear_noisy_dataset(&b).unwrap());
        assert_ne!(da.points(), db.points());
        assert_eq!(da.points(), gen_linear_noisy_dataset(&a).unwrap().points());
        let g = GenConfig::Linear(a);
        assert_ne!(g.generate(0).unwrap().points(), g.generate(1).unwrap().points());
        assert_eq!(g.generate(0).unwrap().points(), da.points());
    }

    #[test]
    fn invalid_configs() {
        let bad = SigmoidGenConfig { n_clean: 401, ..SigmoidGenConfig::default() };
        assert!(gen_sigmoid_dataset(&bad).is_err());
        let bad = SigmoidGenConfig { strain_lo: 1.0, strain_hi: 0.0, ..SigmoidGenConfig::default() };
        assert!(gen_sigmoid_dataset(&bad).is_err());
        let bad = LinearGenConfig { noise_std: -1.0, ..LinearGenConfig::default() };
        assert!(gen_linear_noisy_dataset(&bad).is_err());
    }

    #[test]
    fn gen_config_json() {
        let g = GenConfig::from_json(r#"{"family":"sigmoid","noise_clean":1e4,"seed":3}"#).unwrap();
        let GenConfig::Sigmoid(c) = g else { panic!("wrong family") };
        assert_eq!((c.noise_clean, c.seed, c.d), (1e4, 3, 400));
        assert!(GenConfig::from_json(r#"{"family":"linear","bogus":1}"#).is_err());
        assert!(GenConfig::from_json(r#"{"family":"cubic"}"#).is_err());
    }
}
