use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Probability law over LT row degrees `1..=d_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct DegreeDistribution {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl DegreeDistribution {
    /// `probs[d - 1]` is the probability of degree `d`.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::params("degree distribution is empty"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::params("degree probabilities must be finite and non-negative"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::params(format!("degree probabilities sum to {total}, not 1")));
        }
        if probs[0] <= 0.0 {
            return Err(Error::params("degree 1 must have positive probability"));
        }
        let mut acc = 0.0;
        let cdf = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Ok(DegreeDistribution { probs, cdf })
    }

    /// Normalises non-negative weights before validating.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::params("degree weights must have a positive sum"));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    /// Point mass on degree `d`. This bypasses the degree-one requirement of
    /// [`Self::new`] for `d > 1`; it exists for diagnostics such as checking
    /// row weights of the LT stage in isolation.
    pub fn point_mass(d: usize) -> Self {
        assert!(d >= 1, "degree must be at least 1");
        let mut probs = vec![0.0; d];
        probs[d - 1] = 1.0;
        let cdf = probs
            .iter()
            .scan(0.0, |a, p| {
                *a += p;
                Some(*a)
            })
            .collect();
        DegreeDistribution { probs, cdf }
    }

    pub fn ideal_soliton(k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::params("soliton needs k >= 1"));
        }
        let mut w = vec![0.0; k];
        w[0] = 1.0 / k as f64;
        for d in 2..=k {
            w[d - 1] = 1.0 / (d as f64 * (d as f64 - 1.0));
        }
        Self::from_weights(w)
    }

    /// Luby's robust soliton over `k` input symbols with spike parameters
    /// `c` and failure bound `delta`.
    pub fn robust_soliton(k: usize, c: f64, delta: f64) -> Result<Self> {
        if k == 0 || !(c > 0.0) || !(delta > 0.0 && delta < 1.0) {
            return Err(Error::params(format!(
                "robust soliton needs k >= 1, c > 0, 0 < delta < 1 (got k={k}, c={c}, delta={delta})"
            )));
        }
        let kf = k as f64;
        let r = c * (kf / delta).ln() * kf.sqrt();
        let spike = ((kf / r).floor() as usize).clamp(1, k);
        let mut w = vec![0.0; k];
        w[0] = 1.0 / kf;
        for d in 2..=k {
            w[d - 1] = 1.0 / (d as f64 * (d as f64 - 1.0));
        }
        for d in 1..spike {
            w[d - 1] += r / (d as f64 * kf);
        }
        if r > delta {
            w[spike - 1] += r * (r / delta).ln() / kf;
        }
        Self::from_weights(w)
    }

    pub fn max_degree(&self) -> usize {
        self.probs.len()
    }

    /// Probability of degree `d` (zero outside the support).
    pub fn prob(&self, d: usize) -> f64 {
        if d == 0 {
            0.0
        } else {
            self.probs.get(d - 1).copied().unwrap_or(0.0)
        }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(i, p)| (i + 1) as f64 * p).sum()
    }

    /// Inverse-CDF draw from one uniform real.
    pub fn sample<R: RngCore + ?Sized>(&self, rng: &mut R) -> usize {
        let u = rng::uniform_f64(rng);
        let i = self.cdf.partition_point(|&c| c <= u);
        // rounding can leave the final cdf entry a hair below 1
        let mut i = i.min(self.probs.len() - 1);
        while self.probs[i] == 0.0 && i > 0 {
            i -= 1;
        }
        i + 1
    }
}

impl TryFrom<Vec<f64>> for DegreeDistribution {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<DegreeDistribution> for Vec<f64> {
    fn from(d: DegreeDistribution) -> Self {
        d.probs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn robust_soliton_is_valid() {
        for k in [1, 2, 10, 100, 1000] {
            let d = DegreeDistribution::robust_soliton(k, 0.1, 0.5).unwrap();
            let s: f64 = d.probabilities().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
            assert!(d.prob(1) > 0.0);
            assert_eq!(d.max_degree(), k);
        }
    }

    #[test]
    fn robust_soliton_matches_hand_values() {
        // k = 10, c = 0.1, delta = 0.5: R = 0.1 ln(20) sqrt(10), spike at floor(k/R) = 10
        let k = 10.0f64;
        let r = 0.1 * (20.0f64).ln() * k.sqrt();
        assert_eq!((k / r).floor(), 10.0);
        let mut w: Vec<f64> = (1..=10)
            .map(|d| if d == 1 { 1.0 / k } else { 1.0 / (d as f64 * (d as f64 - 1.0)) })
            .collect();
        for d in 1..10 {
            w[d - 1] += r / (d as f64 * k);
        }
        w[9] += r * (r / 0.5).ln() / k;
        let z: f64 = w.iter().sum();
        let d = DegreeDistribution::robust_soliton(10, 0.1, 0.5).unwrap();
        for (i, wi) in w.iter().enumerate() {
            assert!((d.prob(i + 1) - wi / z).abs() < 1e-15);
        }
    }

    #[test]
    fn invalid_distributions_are_rejected() {
        assert!(DegreeDistribution::new(vec![]).is_err());
        assert!(DegreeDistribution::new(vec![0.5, 0.4]).is_err());
        assert!(DegreeDistribution::new(vec![0.0, 1.0]).is_err());
        assert!(DegreeDistribution::new(vec![1.5, -0.5]).is_err());
        assert_eq!(DegreeDistribution::point_mass(3).mean(), 3.0);
    }

    #[test]
    fn sampling_stays_in_support() {
        let d = DegreeDistribution::new(vec![0.25, 0.0, 0.75]).unwrap();
        let mut g = rng::stream(5, 0);
        for _ in 0..10_000 {
            let x = d.sample(&mut g);
            assert!(x == 1 || x == 3);
        }
    }

    #[test]
    fn serde_round_trip_validates() {
        let d = DegreeDistribution::ideal_soliton(5).unwrap();
        let json = serde_json::to_string(&d).unwrap();
        let back: DegreeDistribution = serde_json::from_str(&json).unwrap();
        assert_eq!(back, d);
        assert!(serde_json::from_str::<DegreeDistribution>("[0.0, 1.0]").is_err());
    }
}
