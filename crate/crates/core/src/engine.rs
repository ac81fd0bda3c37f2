//! Experiment drivers: one-shot static decoding, synchronous and
//! asynchronous dynamical decoding, the explicit-field decoder, and the
//! logical-failure check run on a noiseless copy.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::field::{default_height, FieldSchedule};
use crate::rules::{self, FieldState, NoiseParams, SimRng, SimulationState};
use crate::toric::{CodeState, Lattice};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Static,
    #[serde(rename = "sync")]
    Synchronous,
    #[serde(rename = "async")]
    Asynchronous,
    Explicit,
    Toom,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::Synchronous => "sync",
            Mode::Asynchronous => "async",
            Mode::Explicit => "explicit",
            Mode::Toom => "toom",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Outcome of one Monte Carlo trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub schema_version: u32,
    pub mode: Mode,
    #[serde(rename = "L")]
    pub size: usize,
    pub p: f64,
    pub q: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    pub seed: u64,
    #[serde(default)]
    pub trial: u64,
    /// Time steps until the first detected logical failure (the cap when
    /// censored). For static decoding: the number of rounds executed.
    pub failure_time: f64,
    pub censored: bool,
    /// Static decoding only: anyon free with trivial class at the end.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub success: Option<bool>,
    pub wall_time: f64,
}

impl SurvivalRecord {
    /// Equality ignoring `wall_time`.
    pub fn same_outcome(&self, other: &SurvivalRecord) -> bool {
        let mut a = self.clone();
        a.wall_time = other.wall_time;
        a == *other
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FieldModel {
    Automaton,
    Explicit { alpha: f64 },
}

/// Decoder and verification knobs shared by all drivers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecoderSettings {
    pub schedule: FieldSchedule,
    /// Depth of the automaton field; `None` means `max(4, L / 2)`.
    pub height: Option<usize>,
    /// Verification gives up after `k_ver * L` compound steps.
    pub k_ver: usize,
    /// Verify every this many time steps.
    pub verify_stride: u64,
}

impl Default for DecoderSettings {
    fn default() -> Self {
        Self {
            schedule: FieldSchedule::default(),
            height: None,
            k_ver: 16,
            verify_stride: 1,
        }
    }
}

impl DecoderSettings {
    pub fn height_for(&self, size: usize) -> usize {
        self.height.unwrap_or_else(|| default_height(size))
    }

    pub fn field_state(&self, size: usize, model: FieldModel) -> FieldState {
        match model {
            FieldModel::Automaton => FieldState::automaton(
                size,
                self.height_for(size),
                self.schedule.sweeps(size),
            ),
            FieldModel::Explicit { alpha } => FieldState::explicit(size, alpha),
        }
    }

    pub fn verification_rounds(&self, size: usize) -> usize {
        self.k_ver * size
    }
}

/// Event rates of the asynchronous decoder, per edge, plaquette or cell
/// and unit time. Field updates run at `c(L) * gamma_base`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub gamma_x: f64,
    pub gamma_m: f64,
    pub gamma_a: f64,
    pub gamma_base: f64,
}

impl Default for RateSet {
    fn default() -> Self {
        Self {
            gamma_x: 1.0,
            gamma_m: 1.0,
            gamma_a: 1.0,
            gamma_base: 1.0,
        }
    }
}

impl RateSet {
    pub fn gamma_f(&self, size: usize, schedule: &FieldSchedule) -> f64 {
        schedule.sweeps(size) as f64 * self.gamma_base
    }

    pub fn is_valid(&self) -> bool {
        [self.gamma_x, self.gamma_m, self.gamma_a, self.gamma_base]
            .iter()
            .all(|&g| g > 0.0 && g.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Flip,
    Measure,
    Anyon,
    Field,
}

/// Picks the next asynchronous event: a category with probability
/// proportional to its total rate, then a uniform target within it.
#[derive(Debug, Clone, PartialEq)]
pub struct EventSampler {
    cumulative: [f64; 4],
    counts: [usize; 4],
}

impl EventSampler {
    const KINDS: [EventKind; 4] = [
        EventKind::Flip,
        EventKind::Measure,
        EventKind::Anyon,
        EventKind::Field,
    ];

    pub fn new(size: usize, height: usize, rates: &RateSet, gamma_f: f64) -> Self {
        let plaquettes = size * size;
        let counts = [2 * plaquettes, plaquettes, plaquettes, plaquettes * height];
        let per_item = [rates.gamma_x, rates.gamma_m, rates.gamma_a, gamma_f];
        let mut cumulative = [0.0; 4];
        let mut acc = 0.0;
        for k in 0..4 {
            acc += per_item[k] * counts[k] as f64;
            cumulative[k] = acc;
        }
        Self { cumulative, counts }
    }

    pub fn total_rate(&self) -> f64 {
        self.cumulative[3]
    }

    /// Category weights normalised to one.
    pub fn probabilities(&self) -> [f64; 4] {
        let total = self.total_rate();
        let mut prev = 0.0;
        self.cumulative.map(|c| {
            let w = (c - prev) / total;
            prev = c;
            w
        })
    }

    #[inline]
    pub fn sample<R: Rng>(&self, rng: &mut R) -> (EventKind, usize) {
        let u = rng.random::<f64>() * self.total_rate();
        let k = self.cumulative[..3].iter().take_while(|&&c| u >= c).count();
        (Self::KINDS[k], rng.random_range(0..self.counts[k]))
    }
}

/// How the asynchronous clock advances per event.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClockMode {
    /// `1 / R` per event.
    #[default]
    Deterministic,
    /// Exponential waiting times with mean `1 / R`.
    Exponential,
}

/// Decodes copies of a code state without measurement errors, reusing one
/// scratch state across calls.
#[derive(Debug, Clone)]
pub struct Verifier {
    scratch: SimulationState,
    max_rounds: usize,
}

impl Verifier {
    pub fn new(lattice: Lattice, decoder: FieldState, max_rounds: usize) -> Self {
        Self {
            scratch: SimulationState::new(lattice, decoder, SimRng::seed_from_u64(0)),
            max_rounds,
        }
    }

    /// True when the copy ends with a logical error or still has anyons after
    /// `max_rounds` compound steps. `code` is not modified.
    pub fn failed(&mut self, code: &CodeState, seed: u64) -> bool {
        if let Some(logical) = code.logical_error() {
            return logical;
        }
        let s = &mut self.scratch;
        s.code.clone_from(code);
        s.field.reset();
        s.rng = SimRng::seed_from_u64(seed);
        s.clock = 0.0;
        s.measure(0.0);
        for _ in 0..self.max_rounds {
            s.compound_step();
            if let Some(logical) = s.code.logical_error() {
                return logical;
            }
        }
        true
    }
}

/// Standalone form of [`Verifier::failed`].
pub fn verify_logical(
    code: &CodeState,
    decoder: &FieldState,
    max_rounds: usize,
    seed: u64,
) -> bool {
    Verifier::new(code.lattice, decoder.fresh(), max_rounds).failed(code, seed)
}

/// Expected lifetime `1 / p` of an unprotected qubit flipped with
/// probability `p` per step; infinite for `p = 0`.
pub fn bare_qubit_baseline(p: f64) -> f64 {
    assert!((0.0..1.0).contains(&p), "p must lie in [0, 1)");
    1.0 / p
}

/// Seed of the verification stream used after time step `step`.
pub fn verification_seed(trial_seed: u64, step: u64) -> u64 {
    splitmix64(trial_seed ^ splitmix64(step.wrapping_add(0x5EED)))
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StaticOutcome {
    pub success: bool,
    pub rounds: usize,
    pub timed_out: bool,
    /// Homology class at the end, when anyon free.
    pub class: Option<(bool, bool)>,
}

/// `D_c^tau M_0 E_p`: one noise round, one perfect measurement, then up to
/// `max_rounds` compound steps, stopping early once anyon free.
pub fn run_static(
    size: usize,
    p: f64,
    max_rounds: usize,
    model: FieldModel,
    settings: &DecoderSettings,
    seed: u64,
) -> StaticOutcome {
    let lattice = Lattice::new(size);
    let mut state = SimulationState::new(
        lattice,
        settings.field_state(size, model),
        SimRng::seed_from_u64(seed),
    );
    state.error_map(p);
    state.measure(0.0);
    let mut rounds = 0;
    while !state.code.syndrome.anyon_free() && rounds < max_rounds {
        state.compound_step();
        rounds += 1;
    }
    let class = state
        .code
        .syndrome
        .anyon_free()
        .then(|| crate::toric::cut_parities(&lattice, &state.code.errors));
    StaticOutcome {
        success: class == Some((false, false)),
        rounds,
        timed_out: class.is_none(),
        class,
    }
}

/// Parameters of one survival trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SurvivalTrial {
    pub size: usize,
    pub noise: NoiseParams,
    pub settings: DecoderSettings,
    /// Censoring cap in time steps.
    pub cap: u64,
}

impl SurvivalTrial {
    pub fn new(size: usize, noise: NoiseParams, cap: u64) -> Self {
        Self {
            size,
            noise,
            settings: DecoderSettings::default(),
            cap,
        }
    }

    fn record(&self, mode: Mode, alpha: Option<f64>, seed: u64, time: f64, censored: bool, start: Instant) -> SurvivalRecord {
        SurvivalRecord {
            schema_version: SCHEMA_VERSION,
            mode,
            size: self.size,
            p: self.noise.p,
            q: self.noise.q,
            alpha,
            seed,
            trial: 0,
            failure_time: time,
            censored,
            success: None,
            wall_time: start.elapsed().as_secs_f64(),
        }
    }

    /// `(D_c M_q E_p)^tau` with a noiseless verification after each
    /// sequence (every `verify_stride` sequences).
    pub fn run_synchronous(&self, seed: u64) -> SurvivalRecord {
        self.run_sequences(Mode::Synchronous, FieldModel::Automaton, seed)
    }

    /// Synchronous sequences following the explicit `1/r^alpha` field.
    pub fn run_explicit(&self, alpha: f64, seed: u64) -> SurvivalRecord {
        self.run_sequences(Mode::Explicit, FieldModel::Explicit { alpha }, seed)
    }

    fn run_sequences(&self, mode: Mode, model: FieldModel, seed: u64) -> SurvivalRecord {
        let start = Instant::now();
        let lattice = Lattice::new(self.size);
        let decoder = self.settings.field_state(self.size, model);
        let mut verifier = Verifier::new(
            lattice,
            decoder.fresh(),
            self.settings.verification_rounds(self.size),
        );
        let mut state = SimulationState::new(lattice, decoder, SimRng::seed_from_u64(seed));
        let stride = self.settings.verify_stride.max(1);
        let alpha = match model {
            FieldModel::Explicit { alpha } => Some(alpha),
            FieldModel::Automaton => None,
        };
        for step in 1..=self.cap {
            state.error_map(self.noise.p);
            state.measure(self.noise.q);
            state.compound_step();
            state.clock = step as f64;
            debug_assert!(state.code.is_consistent());
            if step % stride == 0 && verifier.failed(&state.code, verification_seed(seed, step)) {
                return self.record(mode, alpha, seed, step as f64, false, start);
            }
        }
        self.record(mode, alpha, seed, self.cap as f64, true, start)
    }

    /// Continuous-time decoding: local operators fire at random sites with
    /// the given rates. One time unit is `gamma_a * L^2` anyon-update events
    /// in expectation.
    pub fn run_asynchronous(&self, rates: &RateSet, clock_mode: ClockMode, seed: u64) -> SurvivalRecord {
        let start = Instant::now();
        let size = self.size;
        let lattice = Lattice::new(size);
        let height = self.settings.height_for(size);
        let decoder = self.settings.field_state(size, FieldModel::Automaton);
        let mut verifier = Verifier::new(
            lattice,
            decoder.fresh(),
            self.settings.verification_rounds(size),
        );
        let mut state = SimulationState::new(lattice, decoder, SimRng::seed_from_u64(seed));
        let sampler = EventSampler::new(size, height, rates, rates.gamma_f(size, &self.settings.schedule));
        let rate = sampler.total_rate();
        let stride = self.settings.verify_stride.max(1);
        let cap = self.cap as f64;
        let mut next_check = stride;
        let (p, q) = (self.noise.p, self.noise.q);

        let FieldState::Automaton { field, .. } = &mut state.field else {
            unreachable!("asynchronous decoding uses the automaton field")
        };
        let code = &mut state.code;
        let rng = &mut state.rng;
        let mut clock = 0.0;
        loop {
            match sampler.sample(rng) {
                (EventKind::Flip, edge) => rules::local_flip(code, edge, p, rng),
                (EventKind::Measure, site) => rules::local_measure(code, site, q, rng),
                (EventKind::Anyon, site) => {
                    rules::local_anyon_update(code, field.surface(), site, rng);
                }
                (EventKind::Field, cell) => field.local_update(cell, &code.syndrome.recorded),
            }
            clock += match clock_mode {
                ClockMode::Deterministic => 1.0 / rate,
                // 1 - u lies in (0, 1]
                ClockMode::Exponential => -(1.0 - rng.random::<f64>()).ln() / rate,
            };
            if clock >= next_check as f64 {
                if next_check as f64 > cap {
                    break;
                }
                if verifier.failed(code, verification_seed(seed, next_check)) {
                    state.clock = clock;
                    return self.record(Mode::Asynchronous, None, seed, next_check as f64, false, start);
                }
                next_check += stride;
            }
        }
        state.clock = clock;
        self.record(Mode::Asynchronous, None, seed, cap, true, start)
    }
}
