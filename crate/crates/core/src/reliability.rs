//! Latency-reliability-security function.
//!
//! Session `j` delivers its share of a generation by deadline `T` with
//! probability `F_j(T)`, a Gaussian delay CDF truncated below at the
//! propagation delay and scaled by the session's delivery ceiling. A
//! generation decodes under success pattern `c` (which sessions delivered)
//! when the delivered weight reaches the decode threshold and no session
//! carries more than the security cap.
//!
//! Packet erasure enters through goodput: a session with erasure `eps` needs
//! to push `share / (1 - eps)` packets through its link, so its transmission
//! delay grows accordingly.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::gf2::Gf2Matrix;

/// Largest session count accepted by [`success_patterns`].
pub const MAX_PATTERN_SESSIONS: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionProfile {
    /// Propagation and protocol delay, seconds.
    pub t_p: f64,
    /// Link bandwidth, bits per second.
    pub bandwidth: f64,
    /// Asymptotic delivery probability.
    pub ceiling: f64,
    /// Spread of the delay around its mean, seconds.
    pub sigma: f64,
    /// Per-packet erasure probability.
    pub erasure: f64,
}

pub const DEFAULT_SIGMA: f64 = 0.5e-3;

impl SessionProfile {
    pub fn new(t_p: f64, bandwidth: f64, ceiling: f64, sigma: f64, erasure: f64) -> Result<Self> {
        let p = SessionProfile {
            t_p,
            bandwidth,
            ceiling,
            sigma,
            erasure,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::params(what.to_string()));
        if !(self.t_p.is_finite() && self.t_p >= 0.0) {
            return bad("t_p must be finite and nonnegative");
        }
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return bad("bandwidth must be positive");
        }
        if !(0.0..=1.0).contains(&self.ceiling) {
            return bad("ceiling must lie in [0, 1]");
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return bad("sigma must be positive");
        }
        if !(0.0..=1.0).contains(&self.erasure) {
            return bad("erasure must lie in [0, 1]");
        }
        Ok(())
    }

    /// The three measured bearers: (t_p ms, Mbit/s, ceiling) =
    /// (9.927, 500, 0.90), (12, 100, 0.92), (6.25, 200, 0.95), with the given
    /// erasure probabilities.
    pub fn measured(erasure: [f64; 3]) -> Vec<SessionProfile> {
        [(9.927e-3, 500e6, 0.90), (12e-3, 100e6, 0.92), (6.25e-3, 200e6, 0.95)]
            .iter()
            .zip(erasure)
            .map(|(&(t_p, bandwidth, ceiling), erasure)| SessionProfile {
                t_p,
                bandwidth,
                ceiling,
                sigma: DEFAULT_SIGMA,
                erasure,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityParams {
    /// Delivered weight fraction needed to decode.
    pub decode_threshold: f64,
    /// Largest weight any one session may carry.
    pub security_cap: f64,
    /// Redundancy factor applied to every weight.
    pub redundancy: f64,
    /// Packet size in bits.
    pub packet_bits: f64,
    /// Slot deadline in seconds.
    pub deadline: f64,
}

impl Default for ReliabilityParams {
    fn default() -> Self {
        ReliabilityParams {
            decode_threshold: 0.8,
            security_cap: 0.8,
            redundancy: 1.05,
            packet_bits: 1500.0 * 8.0,
            deadline: 20.5e-3,
        }
    }
}

impl ReliabilityParams {
    pub fn validate(&self, sessions: usize) -> Result<()> {
        if !(self.security_cap > 0.0 && self.security_cap <= 1.0) {
            return Err(Error::params("security cap must lie in (0, 1]"));
        }
        if !(self.decode_threshold > 0.0 && self.decode_threshold <= sessions as f64 * self.security_cap) {
            return Err(Error::params(format!(
                "decode threshold {} must lie in (0, {}] for {sessions} sessions",
                self.decode_threshold,
                sessions as f64 * self.security_cap
            )));
        }
        if !(self.redundancy.is_finite() && self.redundancy > 0.0) {
            return Err(Error::params("redundancy factor must be positive"));
        }
        if !(self.packet_bits.is_finite() && self.packet_bits > 0.0) {
            return Err(Error::params("packet size must be positive"));
        }
        if !(self.deadline.is_finite() && self.deadline > 0.0) {
            return Err(Error::params("deadline must be positive"));
        }
        Ok(())
    }
}

/// Per-session scheduling weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::params("weight vector is empty"));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=1.0).contains(*w)) {
            return Err(Error::params(format!("weight {w} outside [0, 1]")));
        }
        Ok(WeightVector(weights))
    }

    /// All-zero weights, the companion of an idle slot.
    pub fn null(sessions: usize) -> Self {
        WeightVector(vec![0.0; sessions])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn is_null(&self) -> bool {
        self.0.iter().all(|&w| w == 0.0)
    }

    pub fn within_cap(&self, cap: f64) -> bool {
        self.0.iter().all(|&w| w <= cap + 1e-12)
    }

    /// Every weight positive and a multiple of `step`, total in `[1, N_L)`.
    pub fn is_admissible(&self, step: f64) -> bool {
        let on_grid = self.0.iter().all(|&w| {
            let k = (w / step).round();
            k >= 1.0 && (k * step - w).abs() < 1e-9
        });
        let total = self.total();
        on_grid && total >= 1.0 - 1e-9 && total < self.0.len() as f64 - 1e-9
    }
}

/// `P(delivered by T)` for a session pushing `payload_packets` packets of
/// `packet_bits` bits.
pub fn session_cdf(profile: &SessionProfile, payload_packets: f64, t: f64, packet_bits: f64) -> f64 {
    if t < profile.t_p || !payload_packets.is_finite() {
        return 0.0;
    }
    if t.is_infinite() {
        return profile.ceiling;
    }
    let mean = profile.t_p + payload_packets * packet_bits / profile.bandwidth;
    let normal = Normal::new(mean, profile.sigma).expect("sigma validated positive");
    profile.ceiling * normal.cdf(t)
}

/// Every binary success pattern over `sessions` sessions, pattern `i` in
/// row `i` with session `j` at bit `j` of `i`.
pub fn success_patterns(sessions: usize) -> Result<Gf2Matrix> {
    if sessions == 0 || sessions > MAX_PATTERN_SESSIONS {
        return Err(Error::TooManySessions {
            sessions,
            limit: MAX_PATTERN_SESSIONS,
        });
    }
    Ok(Gf2Matrix::from_fn(1 << sessions, sessions, |i, j| i >> j & 1 == 1))
}

/// Whether a generation decodes when exactly the sessions flagged in
/// `pattern` deliver.
pub fn pattern_indicator(pattern: &[bool], weights: &WeightVector, params: &ReliabilityParams) -> bool {
    if !weights.within_cap(params.security_cap) {
        return false;
    }
    let delivered: f64 = pattern
        .iter()
        .zip(weights.as_slice())
        .filter(|(c, _)| **c)
        .map(|(_, w)| w * params.redundancy)
        .sum();
    delivered >= params.decode_threshold - 1e-12
}

fn check_dims(weights: &WeightVector, profiles: &[SessionProfile]) -> Result<()> {
    if weights.len() != profiles.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} weights for {} sessions",
            weights.len(),
            profiles.len()
        )));
    }
    if profiles.len() > MAX_PATTERN_SESSIONS {
        return Err(Error::TooManySessions {
            sessions: profiles.len(),
            limit: MAX_PATTERN_SESSIONS,
        });
    }
    Ok(())
}

/// Per-session delivery probabilities by `t` for a generation of `g`
/// packets split by `weights`.
pub fn session_probabilities(t: f64, weights: &WeightVector, g: usize, profiles: &[SessionProfile], params: &ReliabilityParams) -> Vec<f64> {
    profiles
        .iter()
        .zip(weights.as_slice())
        .map(|(p, &w)| {
            if p.erasure >= 1.0 {
                return 0.0;
            }
            let load = w * g as f64 / (1.0 - p.erasure);
            session_cdf(p, load, t, params.packet_bits)
        })
        .collect()
}

/// Probability that a generation of `g` packets split by `weights` decodes
/// by deadline `t`.
pub fn f_scler(t: f64, weights: &WeightVector, g: usize, profiles: &[SessionProfile], params: &ReliabilityParams) -> Result<f64> {
    check_dims(weights, profiles)?;
    if g == 0 {
        return Err(Error::params("f_scler needs a block of at least one packet"));
    }
    if !weights.within_cap(params.security_cap) {
        return Ok(0.0);
    }
    let f = session_probabilities(t, weights, g, profiles, params);
    let n = profiles.len();
    let mut total = 0.0;
    let mut pattern = vec![false; n];
    for mask in 0usize..1 << n {
        for (j, c) in pattern.iter_mut().enumerate() {
            *c = mask >> j & 1 == 1;
        }
        if pattern_indicator(&pattern, weights, params) {
            total += pattern
                .iter()
                .zip(&f)
                .map(|(&c, &fj)| if c { fj } else { 1.0 - fj })
                .product::<f64>();
        }
    }
    Ok(total)
}

/// Reliability coefficient of action `(g, weights)` at the slot deadline.
/// An idle slot (`g = 0`) sends nothing and so cannot fail: its coefficient
/// is 1.
pub fn lp_reliability(g: usize, weights: &WeightVector, profiles: &[SessionProfile], params: &ReliabilityParams) -> Result<f64> {
    if g == 0 {
        check_dims(weights, profiles)?;
        return Ok(1.0);
    }
    f_scler(params.deadline, weights, g, profiles, params)
}

/// `1 - prod(1 - ceiling_j)`, the best reliability any split can reach.
pub fn reliability_ceiling(profiles: &[SessionProfile]) -> f64 {
    1.0 - profiles.iter().map(|p| 1.0 - p.ceiling).product::<f64>()
}

/// `f_scler` on a grid of deadlines (seconds), reported in milliseconds.
pub fn reliability_curve(
    times: &[f64],
    weights: &WeightVector,
    g: usize,
    profiles: &[SessionProfile],
    params: &ReliabilityParams,
) -> Result<Vec<(f64, f64)>> {
    times
        .iter()
        .map(|&t| Ok((t * 1e3, f_scler(t, weights, g, profiles, params)?)))
        .collect()
}

pub fn write_curve_csv<W: std::io::Write>(mut w: W, curve: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "T_ms,f_scler")?;
    for (t, f) in curve {
        writeln!(w, "{t},{f}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn nr() -> SessionProfile {
        SessionProfile::new(6.25e-3, 200e6, 0.95, 2e-3, 0.0).unwrap()
    }

    fn lossless() -> Vec<SessionProfile> {
        SessionProfile::measured([0.0; 3])
    }

    fn w(v: &[f64]) -> WeightVector {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn cdf_truncation_and_limit() {
        assert_eq!(session_cdf(&nr(), 10.0, 6e-3, 12000.0), 0.0);
        assert_eq!(session_cdf(&nr(), 10.0, f64::INFINITY, 12000.0), 0.95);
        assert!((session_cdf(&nr(), 10.0, 10.0, 12000.0) - 0.95).abs() < 1e-15);
    }

    #[test]
    fn cdf_at_mean_is_half_the_ceiling() {
        // 50 packets of 12000 bits over 200 Mbit/s take 3 ms
        let mu: f64 = 6.25e-3 + 50.0 * 12000.0 / 200e6;
        assert!((mu - 9.25e-3).abs() < 1e-15);
        assert!((session_cdf(&nr(), 50.0, mu, 12000.0) - 0.475).abs() < 1e-12);
    }

    #[test]
    fn pattern_rows() {
        let one = success_patterns(1).unwrap();
        assert_eq!((one.get(0, 0), one.get(1, 0)), (false, true));
        for n in 1..=10 {
            let p = success_patterns(n).unwrap();
            assert_eq!(p.rows(), 1 << n);
            let distinct: std::collections::HashSet<Vec<usize>> = (0..p.rows()).map(|r| p.row_support(r)).collect();
            assert_eq!(distinct.len(), 1 << n);
        }
        assert!(matches!(success_patterns(17), Err(Error::TooManySessions { sessions: 17, limit: 16 })));
        assert!(success_patterns(0).is_err());
    }

    #[test]
    fn indicator_cases() {
        let params = ReliabilityParams::default();
        assert!(!pattern_indicator(&[true; 3], &w(&[0.2, 0.2, 0.9]), &params));
        assert!(pattern_indicator(&[true; 3], &w(&[0.4, 0.4, 0.4]), &params));
        assert!(!pattern_indicator(&[false; 3], &w(&[0.8, 0.8, 0.8]), &params));
    }

    #[test]
    fn ceiling_with_any_single_session_decoding() {
        let params = ReliabilityParams::default();
        let f = f_scler(f64::INFINITY, &w(&[0.8, 0.8, 0.8]), 100, &lossless(), &params).unwrap();
        assert!((f - 0.9996).abs() < 1e-12);
        assert!((reliability_ceiling(&lossless()) - 0.9996).abs() < 1e-12);
    }

    #[test]
    fn over_cap_weights_never_decode() {
        let params = ReliabilityParams::default();
        for i in 0..100 {
            let t = i as f64 * 1e-3;
            assert_eq!(f_scler(t, &w(&[0.2, 0.2, 0.9]), 100, &lossless(), &params).unwrap(), 0.0);
        }
    }

    #[test]
    fn single_session_reduces_to_its_cdf() {
        let params = ReliabilityParams {
            decode_threshold: 0.5,
            ..Default::default()
        };
        let prof = vec![nr()];
        for t in [5e-3, 8e-3, 9e-3, 12e-3] {
            let f = f_scler(t, &w(&[0.6]), 80, &prof, &params).unwrap();
            // patterns {0}: indicator 0; {1}: indicator 1 with factor F_1
            let expect = session_cdf(&prof[0], 0.6 * 80.0, t, params.packet_bits);
            assert!((f - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn idle_action_is_certain() {
        let params = ReliabilityParams::default();
        assert_eq!(lp_reliability(0, &WeightVector::null(3), &lossless(), &params).unwrap(), 1.0);
        assert!(lp_reliability(0, &WeightVector::null(2), &lossless(), &params).is_err());
    }

    #[test]
    fn lp_reliability_uses_the_deadline() {
        let params = ReliabilityParams::default();
        let a = lp_reliability(50, &w(&[0.8, 0.8, 0.8]), &lossless(), &params).unwrap();
        let b = f_scler(params.deadline, &w(&[0.8, 0.8, 0.8]), 50, &lossless(), &params).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn raising_a_weight_can_lower_reliability_at_finite_deadline() {
        // once the decode threshold is met, a heavier share only lengthens
        // that session's transmission time
        let params = ReliabilityParams {
            decode_threshold: 0.5,
            ..Default::default()
        };
        let prof = vec![nr()];
        let low = f_scler(9e-3, &w(&[0.5]), 80, &prof, &params).unwrap();
        let high = f_scler(9e-3, &w(&[0.6]), 80, &prof, &params).unwrap();
        assert!(high < low, "{high} !< {low}");
    }

    #[test]
    fn admissibility() {
        assert!(w(&[0.8, 0.8, 0.8]).is_admissible(0.05));
        assert!(!w(&[0.5, 0.3, 0.1]).is_admissible(0.05));
        assert!(!w(&[1.0, 1.0, 1.0]).is_admissible(0.05));
        assert!(!w(&[0.52, 0.5, 0.5]).is_admissible(0.05));
        assert!(WeightVector::new(vec![1.2]).is_err());
    }

    #[test]
    fn param_validation() {
        assert!(ReliabilityParams::default().validate(3).is_ok());
        let bad = ReliabilityParams {
            decode_threshold: 2.5,
            ..Default::default()
        };
        assert!(bad.validate(3).is_err());
        assert!(SessionProfile::new(0.0, 0.0, 0.9, 1e-3, 0.0).is_err());
        assert!(SessionProfile::new(0.0, 1.0, 1.1, 1e-3, 0.0).is_err());
    }

    #[test]
    fn curve_csv() {
        let params = ReliabilityParams::default();
        let c = reliability_curve(&[0.0, 0.03], &w(&[0.8, 0.8, 0.8]), 100, &lossless(), &params).unwrap();
        let mut buf = Vec::new();
        write_curve_csv(&mut buf, &c).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("T_ms,f_scler\n0,0\n30,"));
    }

    fn grid_weights() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(1u32..=20, 3).prop_map(|v| v.into_iter().map(|k| k as f64 * 0.05).collect())
    }

    fn profiles() -> impl Strategy<Value = Vec<SessionProfile>> {
        prop::collection::vec(
            (0.0f64..0.02, 1e7f64..1e9, 0.5f64..1.0, 5e-4f64..5e-3, 0.0f64..0.3),
            3,
        )
        .prop_map(|v| {
            v.into_iter()
                .map(|(t_p, bw, c, s, e)| SessionProfile::new(t_p, bw, c, s, e).unwrap())
                .collect()
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(128))]

        #[test]
        fn monotone_in_deadline_and_bounded(ws in grid_weights(), profs in profiles(), g in 1usize..=100) {
            let params = ReliabilityParams::default();
            let weights = w(&ws);
            let cap = reliability_ceiling(&profs);
            let mut prev = 0.0;
            for i in 0..60 {
                let f = f_scler(i as f64 * 1e-3, &weights, g, &profs, &params).unwrap();
                prop_assert!(f >= prev - 1e-15);
                prop_assert!((0.0..=cap + 1e-12).contains(&f));
                prev = f;
            }
        }

        #[test]
        fn pattern_probabilities_partition(ws in grid_weights(), profs in profiles(), g in 1usize..=100, t in 0.0f64..0.05) {
            let params = ReliabilityParams::default();
            let f = session_probabilities(t, &w(&ws), g, &profs, &params);
            let total: f64 = (0usize..8)
                .map(|mask| (0..3).map(|j| if mask >> j & 1 == 1 { f[j] } else { 1.0 - f[j] }).product::<f64>())
                .sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn any_weight_above_cap_is_zero(ws in grid_weights(), over in 0.85f64..=1.0, which in 0usize..3, g in 1usize..=100, t in 0.0f64..1.0) {
            let params = ReliabilityParams::default();
            let mut v = ws;
            v[which] = over;
            prop_assert_eq!(f_scler(t, &w(&v), g, &SessionProfile::measured([0.1; 3]), &params).unwrap(), 0.0);
        }

        #[test]
        fn raising_a_weight_never_hurts_without_delay_cost(ws in grid_weights(), which in 0usize..3, g in 1usize..=100) {
            // with unbounded deadline, or bandwidth so large that load adds no
            // delay, a heavier share only helps the decode threshold
            let params = ReliabilityParams::default();
            let mut raised = ws.clone();
            raised[which] = (raised[which] + 0.05).min(params.security_cap);
            if ws[which] > params.security_cap { return Ok(()); }
            let fast: Vec<SessionProfile> = lossless().into_iter().map(|p| SessionProfile { bandwidth: 1e300, ..p }).collect();
            for (profs, t) in [(lossless(), f64::INFINITY), (fast, 15e-3)] {
                let a = f_scler(t, &w(&ws), g, &profs, &params).unwrap();
                let b = f_scler(t, &w(&raised), g, &profs, &params).unwrap();
                prop_assert!(b >= a - 1e-15);
            }
        }

        #[test]
        fn more_erasure_never_helps(ws in grid_weights(), e in 0.0f64..0.5, bump in 0.0f64..0.3, g in 1usize..=100, t in 0.0f64..0.05) {
            let params = ReliabilityParams::default();
            let a = f_scler(t, &w(&ws), g, &SessionProfile::measured([e; 3]), &params).unwrap();
            let b = f_scler(t, &w(&ws), g, &SessionProfile::measured([e + bump; 3]), &params).unwrap();
            prop_assert!(b <= a + 1e-15);
        }
    }
}
