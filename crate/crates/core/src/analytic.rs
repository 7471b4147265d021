//! Closed-form rate model.
//!
//! Synchronous gains (single-photon and weak-coherent sources), the memory
//! error model, the error-corrected rate and its scaling to bits per second,
//! the direct BB84 baseline, the asynchronous guide curve, and the exact
//! solution of the asynchronous global-clock process as an absorbing Markov
//! chain.
//!
//! None of the rates include a basis-sifting factor; the gain is the
//! probability of a recorded coincidence per attempt.

use crate::channel;
use crate::config::{SourceKind, SystemConfig, BSM_SUCCESS_PROB};
use crate::DomainError;

/// QBER above which no key survives error correction.
pub const QBER_CAP: f64 = 0.5;

/// Rate-equation outputs for one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatePoint {
    /// Coincidence probability per attempt.
    pub gain: f64,
    /// Uncapped QBER; `None` when the gain is zero.
    pub qber: Option<f64>,
    /// Error-corrected bits per attempt.
    pub corrected_rate: f64,
    /// bits/s
    pub total_rate: f64,
    /// Attempt rate `v / L`, Hz.
    pub attempt_rate: f64,
    /// Mean global-clock units per success used to scale `total_rate`.
    pub mean_m: f64,
}

/// Exact solution of the asynchronous loading chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainSolution {
    /// Probability that both memories end up loaded.
    pub success_prob: f64,
    /// Mean global-clock units at the both-loaded instant, conditioned on
    /// success. `None` when success is impossible.
    pub expected_m: Option<f64>,
    pub m_variance: Option<f64>,
}

impl ChainSolution {
    pub fn m_std(&self) -> Option<f64> {
        self.m_variance.map(|v| v.max(0.0).sqrt())
    }
}

pub fn binary_entropy(e: f64) -> Result<f64, DomainError> {
    DomainError::check_fraction("e", e)?;
    Ok(entropy(e))
}

fn entropy(e: f64) -> f64 {
    if e <= 0.0 || e >= 1.0 {
        return 0.0;
    }
    -e * e.log2() - (1.0 - e) * (1.0 - e).log2()
}

/// Per-arm channel, detector, memory and one-clock-unit decay factor shared
/// by the synchronous gains.
fn sync_arm_factor(cfg: &SystemConfig) -> f64 {
    let eta_t = channel::transmittance(cfg.protocol.total_distance / 2.0, &cfg.channel).total;
    eta_t * cfg.detector.efficiency * cfg.memory.efficiency * hold_survival(cfg)
}

/// Probability that a stored qubit survives one global clock unit.
pub fn hold_survival(cfg: &SystemConfig) -> f64 {
    (-cfg.clock_unit() / cfg.memory.coherence_time).exp()
}

/// `Q = ½ (η_t(L/2) η_d η_mem e^(−t/τ))²` with one photon per pulse and
/// `t = L / v`. Evaluated regardless of `cfg.source`.
pub fn gain_sps_sync(cfg: &SystemConfig) -> f64 {
    let x = sync_arm_factor(cfg);
    BSM_SUCCESS_PROB * x * x
}

/// `Q = ½ (1 − e^(−μ η_t(L/2) η_d η_mem e^(−t/τ)))²`. Evaluated regardless of
/// `cfg.source.kind`.
pub fn gain_wcp_sync(cfg: &SystemConfig) -> f64 {
    let p = -(-cfg.source.mean_photon_number * sync_arm_factor(cfg)).exp_m1();
    BSM_SUCCESS_PROB * p * p
}

/// Synchronous gain for the configured source.
pub fn sync_gain(cfg: &SystemConfig) -> f64 {
    match cfg.source.kind {
        SourceKind::Sps => gain_sps_sync(cfg),
        SourceKind::Wcp => gain_wcp_sync(cfg),
    }
}

/// Probability that a pulse of mean photon number `mu` leaves at least one
/// photon after the efficiency chain `eta_chain`: `1 − e^(−μ η)`.
pub fn wcp_load_prob(mu: f64, eta_chain: f64) -> Result<f64, DomainError> {
    DomainError::check_non_negative("mu", mu)?;
    DomainError::check_fraction("eta_chain", eta_chain)?;
    Ok(-(-mu * eta_chain).exp_m1())
}

/// Combined error of the two memories, `2E(1 − E)`.
pub fn memory_error_rate(error_prob: f64) -> f64 {
    2.0 * error_prob * (1.0 - error_prob)
}

/// `2E(1 − E) / Q` without the cap.
pub fn qber_ratio(error_prob: f64, gain: f64) -> Result<f64, DomainError> {
    DomainError::check_positive("gain", gain)?;
    Ok(memory_error_rate(error_prob) / gain)
}

/// `2E(1 − E) / Q`, capped at [`QBER_CAP`].
pub fn qber_from_gain(error_prob: f64, gain: f64) -> Result<f64, DomainError> {
    Ok(qber_ratio(error_prob, gain)?.min(QBER_CAP))
}

/// `max(0, Q (1 − f h(QBER)))`; a QBER above the cap is treated as the cap.
pub fn corrected_rate(gain: f64, qber: f64, ec_efficiency: f64) -> f64 {
    let e = qber.clamp(0.0, QBER_CAP);
    (gain * (1.0 - ec_efficiency * entropy(e))).max(0.0)
}

/// Bits per second: one attempt per `L / v`, stretched by the mean number of
/// global clock units per success.
pub fn total_rate(corrected_rate: f64, total_distance: f64, signal_speed: f64, mean_m: f64) -> f64 {
    signal_speed / total_distance / mean_m * corrected_rate
}

fn rate_point(cfg: &SystemConfig, gain: f64, qber: Option<f64>, mean_m: f64) -> RatePoint {
    let corrected = match qber {
        Some(q) => corrected_rate(gain, q, cfg.protocol.ec_efficiency),
        None => 0.0,
    };
    RatePoint {
        gain,
        qber,
        corrected_rate: corrected,
        total_rate: total_rate(corrected, cfg.protocol.total_distance, cfg.protocol.signal_speed, mean_m),
        attempt_rate: cfg.protocol.signal_speed / cfg.protocol.total_distance,
        mean_m,
    }
}

fn memory_rate_point(cfg: &SystemConfig, gain: f64, mean_m: f64) -> RatePoint {
    let qber = qber_ratio(cfg.memory.error_prob, gain).ok();
    rate_point(cfg, gain, qber, mean_m)
}

/// Synchronous MA-MDI-QKD rates for the configured source.
pub fn sync_rate_point(cfg: &SystemConfig) -> RatePoint {
    memory_rate_point(cfg, sync_gain(cfg), 1.0)
}

/// Direct BB84 over the full distance, limited by detector dark counts.
///
/// SPS: `Q = η_t(L) η_d`; WCP: `Q = 1 − e^(−μ η_t(L) η_d)`;
/// `QBER = P_d / (Q + P_d)`.
pub fn bb84_reference(cfg: &SystemConfig) -> RatePoint {
    let eta = channel::transmittance(cfg.protocol.total_distance, &cfg.channel).total * cfg.detector.efficiency;
    let gain = match cfg.source.kind {
        SourceKind::Sps => eta,
        SourceKind::Wcp => -(-cfg.source.mean_photon_number * eta).exp_m1(),
    };
    let dark = cfg.detector.dark_count_prob;
    let qber = if gain + dark > 0.0 { Some(dark / (gain + dark)) } else { None };
    rate_point(cfg, gain, qber, 1.0)
}

/// Guide curve for asynchronous loading: the synchronous gain with the
/// channel applied once over half the link instead of once per arm.
///
/// SPS: `½ (η_d η_mem s)² η_t(L/2)`. WCP: `½ (1 − e^(−μ η_d η_mem s))
/// (1 − e^(−μ η_t(L/2) η_d η_mem s))`. This is a reference shape, not a
/// physical prediction.
pub fn async_guide_curve(cfg: &SystemConfig) -> RatePoint {
    let eta_t = channel::transmittance(cfg.protocol.total_distance / 2.0, &cfg.channel).total;
    let lossless = cfg.detector.efficiency * cfg.memory.efficiency * hold_survival(cfg);
    let gain = match cfg.source.kind {
        SourceKind::Sps => BSM_SUCCESS_PROB * lossless * lossless * eta_t,
        SourceKind::Wcp => {
            let mu = cfg.source.mean_photon_number;
            BSM_SUCCESS_PROB * -(-mu * lossless).exp_m1() * -(-mu * lossless * eta_t).exp_m1()
        }
    };
    memory_rate_point(cfg, gain, 1.0)
}

/// Solves the asynchronous loading process exactly.
///
/// Round 1 loads both memories with probability `p²` (success at `m = 1`),
/// exactly one with `2p(1 − p)`, and neither with `(1 − p)²` (failure). From
/// the one-held state every further round succeeds with `s p`, stays
/// one-held with `s(1 − p) + (1 − s) p` (the held qubit survives and the
/// resend misses, or it decays while the resend lands), and fails with
/// `(1 − s)(1 − p)`.
pub fn async_chain_solution(p_load: f64, survive: f64) -> Result<ChainSolution, DomainError> {
    DomainError::check_fraction("p_load", p_load)?;
    DomainError::check_fraction("survive", survive)?;
    let (p, s) = (p_load, survive);
    if p == 0.0 {
        return Ok(ChainSolution { success_prob: 0.0, expected_m: None, m_variance: None });
    }
    let instant = p * p;
    let one_held = 2.0 * p * (1.0 - p);
    let advance = s * p;
    let stay = s * (1.0 - p) + (1.0 - s) * p;
    // 1 − stay, written to avoid cancellation when p is tiny and s ≈ 1.
    let leave = s * p + (1.0 - s) * (1.0 - p);

    let (delayed, m1, m2) = if one_held > 0.0 && advance > 0.0 {
        // Delayed successes land at m = 2 + K with P(K = k) ∝ stay^k.
        let mean_k = stay / leave;
        let second_k = stay * (1.0 + stay) / (leave * leave);
        let delayed = one_held * advance / leave;
        (delayed, 2.0 + mean_k, 4.0 + 4.0 * mean_k + second_k)
    } else {
        (0.0, 0.0, 0.0)
    };
    let success = instant + delayed;
    let mean = (instant + delayed * m1) / success;
    let second = (instant + delayed * m2) / success;
    Ok(ChainSolution {
        success_prob: success,
        expected_m: Some(mean),
        m_variance: Some((second - mean * mean).max(0.0)),
    })
}

/// Per-round loading probability of one arm in the MDI modes (η_d is applied
/// at retrieval, not at the herald).
pub fn arm_load_prob(cfg: &SystemConfig) -> f64 {
    let eta = channel::transmittance(cfg.arm_length(), &cfg.channel).total * cfg.memory.efficiency;
    match cfg.source.kind {
        SourceKind::Sps => eta,
        SourceKind::Wcp => -(-cfg.source.mean_photon_number * eta).exp_m1(),
    }
}

/// Exact asynchronous rates for a single-photon source: chain success times
/// the post-load confirm round, detection and BSM. Returns `None` for WCP,
/// whose multi-photon hold state is not a two-state chain.
pub fn async_sps_rate_point(cfg: &SystemConfig) -> Option<RatePoint> {
    if cfg.source.kind != SourceKind::Sps {
        return None;
    }
    let s = hold_survival(cfg);
    let chain = async_chain_solution(arm_load_prob(cfg), s).expect("probabilities from a validated config");
    let per_arm = s * cfg.detector.efficiency;
    let gain = chain.success_prob * per_arm * per_arm * BSM_SUCCESS_PROB;
    Some(memory_rate_point(cfg, gain, chain.expected_m.unwrap_or(1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Mode, SourceKind};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // Frozen from an independent 40-digit evaluation of the closed forms.
    const Q_SPS_10KM: f64 = 3.085229865547189e-5;
    const QBER_SPS_10KM: f64 = 6.482499091344964e-4;
    const RCORR_SPS_10KM: f64 = 3.061163086573773e-5;
    const RTOTAL_SPS_10KM: f64 = 0.917736693354817;
    const Q_WCP07_10KM: f64 = 1.503476567236473e-5;
    const BB84_Q_10KM: f64 = 4.044186701450569e-3;
    const BB84_QBER_10KM: f64 = 5.821824186534563e-2;
    const GUIDE_SPS_25KM: f64 = 1.569533235767665e-4;

    fn base() -> SystemConfig {
        SystemConfig::default().with_distance_km(10.0).with_memory(0.5, 0.25)
    }

    #[test]
    fn entropy_examples() {
        assert_eq!(binary_entropy(0.5).unwrap(), 1.0);
        assert_eq!(binary_entropy(0.0).unwrap(), 0.0);
        assert_eq!(binary_entropy(1.0).unwrap(), 0.0);
        assert_relative_eq!(binary_entropy(0.11).unwrap(), 0.499_915_958_164_528, max_relative = 1e-13);
        assert!(binary_entropy(-0.1).is_err());
        assert!(binary_entropy(1.5).is_err());
    }

    #[test]
    fn sps_sync_gain_examples() {
        let mut lossless = base();
        lossless.channel.collection_efficiency = 1.0;
        lossless.channel.atm_loss_db_per_m = 0.0;
        lossless.channel.aperture_diameter = 100.0;
        lossless.memory.efficiency = 1.0;
        lossless.memory.coherence_time = f64::INFINITY;
        lossless.protocol.total_distance = 1e-9;
        assert_relative_eq!(gain_sps_sync(&lossless), 0.5, max_relative = 1e-12);

        assert_eq!(gain_sps_sync(&base().with_memory(0.0, 0.25)), 0.0);
        assert_relative_eq!(gain_sps_sync(&base()), Q_SPS_10KM, max_relative = 1e-12);
    }

    #[test]
    fn wcp_sync_gain_examples() {
        let cfg = base().with_source(SourceKind::Wcp, 0.7);
        assert_relative_eq!(gain_wcp_sync(&cfg), Q_WCP07_10KM, max_relative = 1e-12);
        let huge = base().with_source(SourceKind::Wcp, 1e9);
        assert_relative_eq!(gain_wcp_sync(&huge), 0.5, max_relative = 1e-12);
        let tiny = base().with_source(SourceKind::Wcp, 1e-4);
        let ratio = gain_wcp_sync(&tiny) / gain_sps_sync(&tiny) / 1e-8;
        assert_relative_eq!(ratio, 1.0, max_relative = 1e-3);
        assert_eq!(sync_gain(&cfg), gain_wcp_sync(&cfg));
    }

    #[test]
    fn wcp_load_examples() {
        assert_eq!(wcp_load_prob(0.0, 0.5).unwrap(), 0.0);
        assert_eq!(wcp_load_prob(0.7, 0.0).unwrap(), 0.0);
        assert_relative_eq!(wcp_load_prob(0.7, 8.978e-3).unwrap(), 6.264893206137157e-3, max_relative = 1e-12);
        assert!(wcp_load_prob(-1.0, 0.5).is_err());
    }

    #[test]
    fn memory_error_examples() {
        assert_eq!(memory_error_rate(0.0), 0.0);
        assert_eq!(memory_error_rate(0.5), 0.5);
        assert_relative_eq!(memory_error_rate(1e-8), 2e-8, max_relative = 1e-7);
    }

    #[test]
    fn qber_examples() {
        assert_relative_eq!(qber_from_gain(1e-8, 3.09e-5).unwrap(), 6.472491844660194e-4, max_relative = 1e-12);
        assert_eq!(qber_from_gain(0.0, 3.09e-5).unwrap(), 0.0);
        assert_eq!(qber_from_gain(1e-8, 2e-8).unwrap(), 0.5);
        assert_relative_eq!(qber_ratio(1e-8, 2e-8).unwrap(), 1.0, max_relative = 1e-7);
        assert!(qber_from_gain(1e-8, 0.0).is_err());
    }

    #[test]
    fn corrected_rate_examples() {
        assert_eq!(corrected_rate(3e-5, 0.0, 1.0), 3e-5);
        assert_eq!(corrected_rate(3e-5, 0.5, 1.0), 0.0);
        assert_relative_eq!(corrected_rate(3.09e-5, 6.5e-4, 1.0), 3.065838751811267e-5, max_relative = 1e-12);
        assert_eq!(corrected_rate(3e-5, 0.9, 1.0), 0.0, "above-cap QBER yields no key");
    }

    #[test]
    fn total_rate_examples() {
        let r = total_rate(3.06e-5, 10e3, 2.998e8, 1.0);
        assert_relative_eq!(r, 0.917388, max_relative = 1e-6);
        assert_eq!(total_rate(3.06e-5, 10e3, 2.998e8, 2.0), r / 2.0);
        assert_eq!(total_rate(0.0, 10e3, 2.998e8, 1.0), 0.0);
    }

    #[test]
    fn sync_rate_chain_at_10km() {
        let p = sync_rate_point(&base());
        assert_relative_eq!(p.gain, Q_SPS_10KM, max_relative = 1e-12);
        assert_relative_eq!(p.qber.unwrap(), QBER_SPS_10KM, max_relative = 1e-12);
        assert_relative_eq!(p.corrected_rate, RCORR_SPS_10KM, max_relative = 1e-11);
        assert_relative_eq!(p.total_rate, RTOTAL_SPS_10KM, max_relative = 1e-11);
    }

    #[test]
    fn bb84_examples() {
        let cfg = base().with_mode(Mode::Bb84);
        let p = bb84_reference(&cfg);
        assert_relative_eq!(p.gain, BB84_Q_10KM, max_relative = 1e-12);
        assert_relative_eq!(p.qber.unwrap(), BB84_QBER_10KM, max_relative = 1e-12);

        let mut no_dark = cfg.clone();
        no_dark.detector.dark_count_prob = 0.0;
        assert_eq!(bb84_reference(&no_dark).qber, Some(0.0));

        let mut opaque = cfg.clone();
        opaque.channel.collection_efficiency = 1e-12;
        let p = bb84_reference(&opaque);
        assert!(p.qber.unwrap() > 0.999);
        assert_eq!(p.corrected_rate, 0.0);

        let wcp = bb84_reference(&cfg.clone().with_source(SourceKind::Wcp, 0.7));
        assert_relative_eq!(wcp.gain, -(-0.7 * BB84_Q_10KM).exp_m1(), max_relative = 1e-12);
    }

    #[test]
    fn guide_curve_examples() {
        let cfg = SystemConfig::default().with_mode(Mode::Async).with_distance_km(25.0).with_memory(0.5, 0.25);
        assert_relative_eq!(async_guide_curve(&cfg).gain, GUIDE_SPS_25KM, max_relative = 1e-12);

        for km in [1.0, 10.0, 35.0] {
            let c = cfg.clone().with_distance_km(km);
            let eta = channel::transmittance(c.protocol.total_distance / 2.0, &c.channel).total;
            assert_relative_eq!(async_guide_curve(&c).gain / gain_sps_sync(&c), 1.0 / eta, max_relative = 1e-12);
        }

        // Zero-distance agreement holds when the channel is lossless at L = 0.
        let mut near = cfg.clone().with_distance_km(1e-9);
        near.channel.collection_efficiency = 1.0;
        assert_relative_eq!(async_guide_curve(&near).gain, gain_sps_sync(&near), max_relative = 1e-9);
        let near_wcp = near.with_source(SourceKind::Wcp, 0.7);
        assert_relative_eq!(async_guide_curve(&near_wcp).gain, gain_wcp_sync(&near_wcp), max_relative = 1e-9);
    }

    #[test]
    fn chain_examples() {
        let c = async_chain_solution(1.0, 0.3).unwrap();
        assert_eq!(c.success_prob, 1.0);
        assert_eq!(c.expected_m, Some(1.0));

        let c = async_chain_solution(0.5, 1.0).unwrap();
        assert_relative_eq!(c.success_prob, 0.75, max_relative = 1e-15);
        assert_relative_eq!(c.expected_m.unwrap(), 7.0 / 3.0, max_relative = 1e-15);

        let c = async_chain_solution(0.5, 0.0).unwrap();
        assert_relative_eq!(c.success_prob, 0.25);
        assert_eq!(c.expected_m, Some(1.0));
        assert_eq!(c.m_variance, Some(0.0));

        let c = async_chain_solution(0.0, 0.9).unwrap();
        assert_eq!(c.success_prob, 0.0);
        assert_eq!(c.expected_m, None);

        assert!(async_chain_solution(1.1, 0.5).is_err());
    }

    #[test]
    fn chain_matches_round_by_round_enumeration() {
        // (p, s) -> (success, <m>, var m), from propagating state
        // probabilities round by round until the one-held mass vanishes.
        let table = [
            (0.1, 0.5, 0.028, 2.285714285714285, 2.204081632653063),
            (0.1, 0.9, 0.10000000000000007, 5.9999999999999964, 25.555555555555593),
            (0.1, 1.0, 0.19000000000000003, 10.473684210526322, 90.24930747922427),
            (0.5, 0.5, 0.5, 1.9999999999999998, 2.0),
            (0.5, 0.9, 0.7, 2.2857142857142865, 2.2040816326530566),
            (0.5, 1.0, 0.75, 2.333333333333333, 2.2222222222222223),
            (0.9, 0.5, 0.972, 1.333333333333333, 0.8888888888888864),
            (0.9, 0.9, 0.9878048780487804, 1.219512195121951, 0.2676977989292091),
            (0.9, 1.0, 0.99, 1.2020202020202018, 0.20610141822263106),
        ];
        for (p, s, success, mean, var) in table {
            let c = async_chain_solution(p, s).unwrap();
            assert_relative_eq!(c.success_prob, success, max_relative = 1e-12);
            assert_relative_eq!(c.expected_m.unwrap(), mean, max_relative = 1e-12);
            assert_relative_eq!(c.m_variance.unwrap(), var, max_relative = 1e-9);
        }
    }

    #[test]
    fn chain_is_stable_for_tiny_load_probability() {
        let c = async_chain_solution(1e-12, 1.0).unwrap();
        // success ≈ 2p when the held qubit never decays
        assert_relative_eq!(c.success_prob, 2e-12, max_relative = 1e-6);
        assert_relative_eq!(c.expected_m.unwrap(), 1e12, max_relative = 1e-3);
    }

    fn config_strategy() -> impl Strategy<Value = SystemConfig> {
        (0.1f64..60.0, 0.0f64..=1.0, 0.0f64..=1.0, 1e-3f64..5.0, 1e-3f64..5.0).prop_map(|(km, mem, det, tau, mu)| {
            SystemConfig::default()
                .with_distance_km(km)
                .with_memory(mem, tau)
                .with_detector_efficiency(det)
                .with_source(SourceKind::Sps, mu)
        })
    }

    proptest! {
        #[test]
        fn entropy_is_symmetric(e in 0.0f64..=1.0) {
            let a = binary_entropy(e).unwrap();
            let b = binary_entropy(1.0 - e).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn sync_gains_are_bounded(cfg in config_strategy()) {
            prop_assert!(gain_sps_sync(&cfg) <= 0.5);
            prop_assert!(gain_wcp_sync(&cfg) < 0.5);
        }

        #[test]
        fn sync_gains_are_monotone(
            cfg in config_strategy(),
            bump in 1.0f64..2.0,
            which in 0usize..4,
        ) {
            let mut better = cfg.clone();
            match which {
                0 => better.memory.efficiency = (cfg.memory.efficiency * bump).min(1.0),
                1 => better.detector.efficiency = (cfg.detector.efficiency * bump).min(1.0),
                2 => better.memory.coherence_time *= bump,
                _ => better.protocol.total_distance /= bump,
            }
            prop_assert!(gain_sps_sync(&better) >= gain_sps_sync(&cfg));
            prop_assert!(gain_wcp_sync(&better) >= gain_wcp_sync(&cfg));
        }

        #[test]
        fn small_mu_limit(cfg in config_strategy()) {
            let sps = gain_sps_sync(&cfg);
            prop_assume!(sps > 1e-300);
            let mu = 1e-4;
            let wcp = gain_wcp_sync(&cfg.clone().with_source(SourceKind::Wcp, mu));
            prop_assert!(((wcp / sps) / (mu * mu) - 1.0).abs() < 1e-3);
        }

        #[test]
        fn chain_success_bounds(p in 0.0f64..=1.0, s in 0.0f64..=1.0, dp in 0.0f64..0.2, ds in 0.0f64..0.2) {
            let c = async_chain_solution(p, s).unwrap();
            prop_assert!(c.success_prob >= p * p * (1.0 - 1e-12));
            prop_assert!(c.success_prob <= 1.0 + 1e-12);
            if let Some(m) = c.expected_m { prop_assert!(m >= 1.0 - 1e-12); }
            let more_p = async_chain_solution((p + dp).min(1.0), s).unwrap();
            let more_s = async_chain_solution(p, (s + ds).min(1.0)).unwrap();
            prop_assert!(more_p.success_prob >= c.success_prob * (1.0 - 1e-12));
            prop_assert!(more_s.success_prob >= c.success_prob * (1.0 - 1e-12));
        }

        #[test]
        fn corrected_rate_bounds(q in 0.0f64..=1.0, e in 0.0f64..=1.0, f in 0.0f64..3.0) {
            let r = corrected_rate(q, e, f);
            prop_assert!(r >= 0.0);
            prop_assert!(r <= q);
        }
    }
}
