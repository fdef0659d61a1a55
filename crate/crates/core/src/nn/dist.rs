//! Action distributions: categorical over logits and diagonal Gaussian.

use crate::error::{Error, Result};
use rand::Rng;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;

const LN_2PI: f64 = 1.8378770664093453; // ln(2π)

/// Stable softmax over one logit row.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = logits.iter().map(|&l| (l - max).exp()).sum::<f64>().ln() + max;
    logits.iter().map(|&l| l - lse).collect()
}

/// Categorical distribution over one row of logits.
pub struct Categorical {
    probs: Vec<f64>,
    log_probs: Vec<f64>,
}

impl Categorical {
    pub fn from_logits(logits: &[f64]) -> Result<Self> {
        if !logits.iter().all(|l| l.is_finite()) {
            return Err(Error::NonFinite("categorical logits".into()));
        }
        Ok(Categorical { probs: softmax(logits), log_probs: log_softmax(logits) })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>();
        let mut acc = 0.0;
        for (i, &p) in self.probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        self.probs.len() - 1
    }

    pub fn log_prob(&self, action: usize) -> f64 {
        self.log_probs[action]
    }

    pub fn entropy(&self) -> f64 {
        -self
            .probs
            .iter()
            .zip(&self.log_probs)
            .map(|(&p, &lp)| if p > 0.0 { p * lp } else { 0.0 })
            .sum::<f64>()
    }
}

/// Diagonal Gaussian with clamped log-std.
pub struct DiagGaussian {
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        if !mean.iter().all(|v| v.is_finite()) || !log_std.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("gaussian parameters".into()));
        }
        let log_std = log_std
            .into_iter()
            .map(|v| v.clamp(LOG_STD_MIN, LOG_STD_MAX))
            .collect();
        Ok(DiagGaussian { mean, log_std })
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.mean
            .iter()
            .zip(&self.log_std)
            .map(|(&m, &ls)| {
                let eps: f64 = rng.sample(rand_distr::StandardNormal);
                m + ls.exp() * eps
            })
            .collect()
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.log_std)
            .zip(x)
            .map(|((&m, &ls), &xv)| {
                let z = (xv - m) / ls.exp();
                -0.5 * z * z - ls - 0.5 * LN_2PI
            })
            .sum()
    }

    pub fn entropy(&self) -> f64 {
        self.log_std.iter().map(|&ls| 0.5 * (LN_2PI + 1.0) + ls).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits() {
        let d = Categorical::from_logits(&[0.0; 4]).unwrap();
        for &p in d.probs() {
            assert!((p - 0.25).abs() < 1e-15);
        }
        assert!((d.entropy() - 4.0f64.ln()).abs() < 1e-12);
        assert!((d.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_logit() {
        let d = Categorical::from_logits(&[1e3, 0.0, 0.0]).unwrap();
        assert!(d.probs()[0] > 1.0 - 1e-12);
        assert!(d.entropy().abs() < 1e-9);
    }

    #[test]
    fn sample_frequencies_within_3_sigma() {
        let logits = [0.0, (2.0f64).ln(), (4.0f64).ln()]; // probs 1/7, 2/7, 4/7
        let d = Categorical::from_logits(&logits).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 1_000_000usize;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[d.sample(&mut rng)] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let p = d.probs()[i];
            let sigma = (p * (1.0 - p) / n as f64).sqrt();
            let freq = c as f64 / n as f64;
            assert!((freq - p).abs() < 3.0 * sigma, "arm {i}: freq {freq} vs p {p}");
        }
    }

    #[test]
    fn gaussian_closed_forms() {
        let d = DiagGaussian::new(vec![0.0, 0.0], vec![0.0, 0.0]).unwrap();
        // entropy per dim at unit std: 0.5 ln(2πe)
        let per_dim = 0.5 * (LN_2PI + 1.0);
        assert!((d.entropy() - 2.0 * per_dim).abs() < 1e-12);
        // log-prob at the mean with unit std: -0.5 ln(2π) per dim
        assert!((d.log_prob(&[0.0, 0.0]) + LN_2PI).abs() < 1e-12);
    }

    #[test]
    fn log_std_is_clamped() {
        let d = DiagGaussian::new(vec![0.0], vec![-1e9]).unwrap();
        assert_eq!(d.log_std[0], LOG_STD_MIN);
        let d = DiagGaussian::new(vec![0.0], vec![50.0]).unwrap();
        assert_eq!(d.log_std[0], LOG_STD_MAX);
    }

    #[test]
    fn sample_mean_within_3_sigma() {
        let d = DiagGaussian::new(vec![1.5], vec![0.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += d.sample(&mut rng)[0];
        }
        let mean = sum / n as f64;
        let sigma = 1.0 / (n as f64).sqrt();
        assert!((mean - 1.5).abs() < 3.0 * sigma);
    }
}
