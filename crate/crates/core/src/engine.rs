//! Global/local-clock Monte Carlo engine.
//!
//! A trial follows one attempt to load both memories at the relay:
//!
//! 1. Each arm sends a pulse; the number of photons stored is sampled by
//!    thinning the source statistics with `η_t(L/2)·η_mem`.
//! 2. Synchronous mode discards the attempt unless both memories load in the
//!    first global clock unit. Asynchronous mode keeps a loaded memory while
//!    the empty arm resends: every round the held photons decay with
//!    probability `1 − e^(−t/τ)` each and the empty arm samples a fresh load.
//!    The trial fails once both memories are empty at the end of a round.
//! 3. Once both memories hold a qubit (at global clock `m`), both arms wait
//!    one more clock unit for the confirmation, are retrieved, detected with
//!    `η_d` per photon and pass the Bell-state measurement with probability ½.
//!
//! Memory bit errors are trial-level events with probability `2E(1 − E)`.
//!
//! # Random streams
//!
//! Trial `i` of a batch with seed `seed` draws from
//! `ChaCha8Rng::from_seed(key(seed))` with its stream set to `i`, where
//! `key(seed)` is four consecutive SplitMix64 outputs of `seed` written
//! little-endian. Results therefore depend only on `(config, seed)`, never on
//! the number of worker threads or their scheduling.

use std::collections::BTreeMap;
use std::ops::AddAssign;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;

use crate::analytic;
use crate::config::{Mode, SourceKind, SourceSpec, SystemConfig, BSM_SUCCESS_PROB};

/// Trials handed to one rayon task.
const CHUNK: u64 = 1 << 14;

/// Occupancy and local clock of one memory.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ArmState {
    /// Photons currently stored; more than one is possible for WCP.
    pub photons_held: u32,
    /// Rounds the current qubit has been held; 0 when empty.
    pub local_clock: u32,
}

impl ArmState {
    pub fn loaded(photons: u32) -> Self {
        Self { photons_held: photons, local_clock: 0 }
    }

    pub fn is_loaded(&self) -> bool {
        self.photons_held > 0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TrialOutcome {
    /// Both memories held a qubit at the same time.
    pub loaded_coincidence: bool,
    /// Global clock units at the both-loaded instant (0 if never loaded).
    pub m_units: u32,
    /// Both retrieved qubits were detected and the BSM passed.
    pub detected_success: bool,
    pub error_event: bool,
    pub rounds_used: u32,
    /// The round cap was hit before the trial resolved.
    pub truncated: bool,
}

/// Integer tallies over a batch. Merging is associative and commutative, so
/// any partition of the trials gives the same totals.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TallySummary {
    pub n_trials: u64,
    pub n_loaded: u64,
    pub n_success: u64,
    pub n_error: u64,
    /// Σm over detected successes.
    pub sum_m: u64,
    /// Σm² over detected successes.
    pub sum_m_sq: u128,
    /// Σm over loaded coincidences.
    pub loaded_sum_m: u64,
    pub loaded_sum_m_sq: u128,
    pub n_truncated: u64,
    /// Count of detected successes per value of m.
    pub m_histogram: BTreeMap<u32, u64>,
}

impl TallySummary {
    pub fn record(&mut self, outcome: &TrialOutcome) {
        self.n_trials += 1;
        self.n_error += u64::from(outcome.error_event);
        self.n_truncated += u64::from(outcome.truncated);
        if outcome.loaded_coincidence {
            let m = u64::from(outcome.m_units);
            self.n_loaded += 1;
            self.loaded_sum_m += m;
            self.loaded_sum_m_sq += u128::from(m * m);
            if outcome.detected_success {
                self.n_success += 1;
                self.sum_m += m;
                self.sum_m_sq += u128::from(m * m);
                *self.m_histogram.entry(outcome.m_units).or_default() += 1;
            }
        }
    }
}

impl AddAssign<&TallySummary> for TallySummary {
    fn add_assign(&mut self, rhs: &TallySummary) {
        self.n_trials += rhs.n_trials;
        self.n_loaded += rhs.n_loaded;
        self.n_success += rhs.n_success;
        self.n_error += rhs.n_error;
        self.sum_m += rhs.sum_m;
        self.sum_m_sq += rhs.sum_m_sq;
        self.loaded_sum_m += rhs.loaded_sum_m;
        self.loaded_sum_m_sq += rhs.loaded_sum_m_sq;
        self.n_truncated += rhs.n_truncated;
        for (&m, &n) in &rhs.m_histogram {
            *self.m_histogram.entry(m).or_default() += n;
        }
    }
}

/// Per-trial probabilities derived once from a config.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialParams {
    pub mode: Mode,
    pub source: SourceKind,
    pub mean_photon_number: f64,
    /// Arm transmittance times memory efficiency.
    pub load_eta: f64,
    /// Probability that one stored photon survives one global clock unit.
    pub survive: f64,
    pub detector_efficiency: f64,
    pub bsm_prob: f64,
    /// Probability of a memory-error event per trial, `2E(1 − E)`.
    pub error_prob: f64,
    pub max_rounds: u32,
}

impl TrialParams {
    pub fn from_config(cfg: &SystemConfig) -> Self {
        let arm = crate::channel::transmittance(cfg.arm_length(), &cfg.channel).total;
        Self {
            mode: cfg.protocol.mode,
            source: cfg.source.kind,
            mean_photon_number: cfg.source.mean_photon_number,
            load_eta: arm * cfg.memory.efficiency,
            survive: analytic::hold_survival(cfg),
            detector_efficiency: cfg.detector.efficiency,
            bsm_prob: BSM_SUCCESS_PROB,
            error_prob: analytic::memory_error_rate(cfg.memory.error_prob),
            max_rounds: cfg.simulation.max_rounds,
        }
    }

    /// Test hook: a single-photon source with per-round load probability
    /// `p_load` and per-round survival `survive`, perfect detection and BSM,
    /// and no memory errors. Lets the engine be checked directly against the
    /// exact chain solution.
    pub fn from_probabilities(mode: Mode, p_load: f64, survive: f64, max_rounds: u32) -> Self {
        Self {
            mode,
            source: SourceKind::Sps,
            mean_photon_number: 1.0,
            load_eta: p_load,
            survive,
            detector_efficiency: 1.0,
            bsm_prob: 1.0,
            error_prob: 0.0,
            max_rounds,
        }
    }

    fn source_spec(&self) -> SourceSpec {
        SourceSpec { kind: self.source, mean_photon_number: self.mean_photon_number }
    }
}

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// ChaCha8 key derived from a batch seed.
pub fn stream_key(seed: u64) -> [u8; 32] {
    let mut state = seed;
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    key
}

/// The random stream of trial `trial_index` in a batch seeded with `seed`.
pub fn trial_rng(seed: u64, trial_index: u64) -> ChaCha8Rng {
    stream_for(&stream_key(seed), trial_index)
}

fn stream_for(key: &[u8; 32], trial_index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::from_seed(*key);
    rng.set_stream(trial_index);
    rng
}

/// Derives an independent seed for sub-experiment `index` of a run seeded
/// with `seed`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut state = seed ^ index.wrapping_mul(0xd134_2543_de82_ef95);
    splitmix64(&mut state)
}

fn bernoulli<R: Rng + ?Sized>(rng: &mut R, p: f64) -> bool {
    // p >= 1 must always fire and p <= 0 never; gen::<f64>() lies in [0, 1).
    p >= 1.0 || rng.random::<f64>() < p
}

/// Photons stored in one memory after a single send.
pub fn sample_arm_load<R: Rng + ?Sized>(source: &SourceSpec, arm_eta: f64, eta_mem: f64, rng: &mut R) -> u32 {
    let eta = arm_eta * eta_mem;
    match source.kind {
        SourceKind::Sps => u32::from(bernoulli(rng, eta)),
        SourceKind::Wcp => {
            let lambda = source.mean_photon_number * eta;
            if lambda <= 0.0 {
                return 0;
            }
            let poisson = Poisson::new(lambda).expect("finite positive Poisson mean");
            let n: f64 = poisson.sample(rng);
            n as u32
        }
    }
}

fn decay<R: Rng + ?Sized>(state: ArmState, survive: f64, rng: &mut R) -> ArmState {
    if state.photons_held == 0 {
        return ArmState::default();
    }
    let left = (0..state.photons_held).filter(|_| bernoulli(rng, survive)).count() as u32;
    if left == 0 {
        ArmState::default()
    } else {
        ArmState { photons_held: left, local_clock: state.local_clock + 1 }
    }
}

/// Holds a memory for one global clock unit of duration `t_unit`; each
/// stored photon survives independently with probability `e^(−t_unit/τ)`.
pub fn sample_round_survival<R: Rng + ?Sized>(
    state: ArmState,
    t_unit: f64,
    coherence_time: f64,
    rng: &mut R,
) -> ArmState {
    decay(state, (-t_unit / coherence_time).exp(), rng)
}

fn detected<R: Rng + ?Sized>(state: ArmState, eta_d: f64, rng: &mut R) -> bool {
    (0..state.photons_held).any(|_| bernoulli(rng, eta_d))
}

fn load<R: Rng + ?Sized>(params: &TrialParams, rng: &mut R) -> ArmState {
    ArmState::loaded(sample_arm_load(&params.source_spec(), params.load_eta, 1.0, rng))
}

/// Confirmation round, retrieval, detection and BSM for a loaded pair.
fn retrieve<R: Rng + ?Sized>(params: &TrialParams, a: ArmState, b: ArmState, rng: &mut R) -> bool {
    let a = decay(a, params.survive, rng);
    let b = decay(b, params.survive, rng);
    detected(a, params.detector_efficiency, rng)
        && detected(b, params.detector_efficiency, rng)
        && bernoulli(rng, params.bsm_prob)
}

pub fn run_trial_sync<R: Rng + ?Sized>(params: &TrialParams, rng: &mut R) -> TrialOutcome {
    let error_event = bernoulli(rng, params.error_prob);
    let a = load(params, rng);
    let b = load(params, rng);
    if !(a.is_loaded() && b.is_loaded()) {
        return TrialOutcome { error_event, rounds_used: 1, ..TrialOutcome::default() };
    }
    TrialOutcome {
        loaded_coincidence: true,
        m_units: 1,
        detected_success: retrieve(params, a, b, rng),
        error_event,
        rounds_used: 1,
        truncated: false,
    }
}

pub fn run_trial_async<R: Rng + ?Sized>(params: &TrialParams, rng: &mut R) -> TrialOutcome {
    let error_event = bernoulli(rng, params.error_prob);
    let mut a = load(params, rng);
    let mut b = load(params, rng);
    let mut round = 1u32;
    let failed =
        |round, truncated| TrialOutcome { error_event, rounds_used: round, truncated, ..TrialOutcome::default() };

    while !(a.is_loaded() && b.is_loaded()) {
        if !a.is_loaded() && !b.is_loaded() {
            return failed(round, false);
        }
        if round >= params.max_rounds {
            return failed(round, true);
        }
        round += 1;
        // The held arm waits one clock unit while the empty arm resends.
        if a.is_loaded() {
            a = decay(a, params.survive, rng);
            b = load(params, rng);
        } else {
            b = decay(b, params.survive, rng);
            a = load(params, rng);
        }
    }

    TrialOutcome {
        loaded_coincidence: true,
        m_units: round,
        detected_success: retrieve(params, a, b, rng),
        error_event,
        rounds_used: round,
        truncated: false,
    }
}

pub fn run_trial<R: Rng + ?Sized>(params: &TrialParams, rng: &mut R) -> TrialOutcome {
    match params.mode {
        Mode::Async => run_trial_async(params, rng),
        // BB84 has no memory stage; the synchronous tail is its closest
        // stochastic analogue and callers report it only as a diagnostic.
        Mode::Sync | Mode::Bb84 => run_trial_sync(params, rng),
    }
}

/// Runs `trials` independent trials on the current rayon pool.
pub fn run_batch_params(params: &TrialParams, trials: u64, seed: u64) -> TallySummary {
    let key = stream_key(seed);
    let chunks = trials.div_ceil(CHUNK);
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut tally = TallySummary::default();
            for i in c * CHUNK..((c + 1) * CHUNK).min(trials) {
                let mut rng = stream_for(&key, i);
                tally.record(&run_trial(params, &mut rng));
            }
            tally
        })
        .reduce(TallySummary::default, |mut acc, t| {
            acc += &t;
            acc
        })
}

/// Runs `cfg.simulation.trials` trials seeded with `cfg.simulation.seed`.
/// Truncated trials are counted in `n_truncated`.
pub fn run_batch(cfg: &SystemConfig) -> TallySummary {
    run_batch_params(&TrialParams::from_config(cfg), cfg.simulation.trials, cfg.simulation.seed)
}
