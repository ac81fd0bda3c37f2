//! Noise maps, syndrome measurement and the anyon-move rule, in both their
//! whole-lattice form and as single-site local operators.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::field::{ExplicitKernel, PhiField};
use crate::toric::{CodeState, Lattice};

pub type SimRng = ChaCha8Rng;

/// Relative tolerance under which neighbouring field values count as equal.
pub const GRADIENT_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("{name} must lie in [0, 1), got {value}")]
    Probability { name: &'static str, value: f64 },
}

/// Physical flip probability `p` and measurement error probability `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseParams {
    pub p: f64,
    pub q: f64,
}

impl NoiseParams {
    pub fn new(p: f64, q: f64) -> Result<Self, ParamError> {
        check_probability("p", p)?;
        check_probability("q", q)?;
        Ok(Self { p, q })
    }
}

pub(crate) fn check_probability(name: &'static str, value: f64) -> Result<(), ParamError> {
    if (0.0..1.0).contains(&value) {
        Ok(())
    } else {
        Err(ParamError::Probability { name, value })
    }
}

/// `E_p`: every edge flips independently with probability `p`.
pub fn error_map<R: Rng>(code: &mut CodeState, p: f64, rng: &mut R) {
    if p <= 0.0 {
        return;
    }
    for edge in 0..code.lattice.num_edges() {
        if rng.random_bool(p) {
            code.flip_edge(edge);
        }
    }
}

/// `M_q`: recorded syndrome becomes the true syndrome with each plaquette
/// independently misreported with probability `q`.
pub fn measure<R: Rng>(code: &mut CodeState, q: f64, rng: &mut R) {
    let s = &mut code.syndrome;
    if q <= 0.0 {
        s.recorded.copy_from_slice(&s.true_syndrome);
        return;
    }
    for (rec, &t) in s.recorded.iter_mut().zip(&s.true_syndrome) {
        *rec = t ^ rng.random_bool(q);
    }
}

/// `X_{p,v}`: flip one edge with probability `p`.
pub fn local_flip<R: Rng>(code: &mut CodeState, edge: usize, p: f64, rng: &mut R) {
    if p > 0.0 && rng.random_bool(p) {
        code.flip_edge(edge);
    }
}

/// `m_{q,x}`: refresh one plaquette's record, wrong with probability `q`.
pub fn local_measure<R: Rng>(code: &mut CodeState, site: usize, q: f64, rng: &mut R) {
    let flip = q > 0.0 && rng.random_bool(q);
    code.syndrome.recorded[site] = code.syndrome.true_syndrome[site] ^ flip;
}

/// `a_x`: if a recorded anyon sits at `site`, with probability 1/2 move it
/// towards the largest of its four neighbouring field values. Nothing moves
/// when the four values are equal. Ties among maxima break uniformly.
/// Returns whether a move happened.
pub fn local_anyon_update<R: Rng>(
    code: &mut CodeState,
    plane: &[f64],
    site: usize,
    rng: &mut R,
) -> bool {
    if !code.syndrome.recorded[site] || !rng.random_bool(0.5) {
        return false;
    }
    let nbrs = code.lattice.neighbors(site);
    let vals = nbrs.map(|n| plane[n]);
    let max = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = vals.iter().cloned().fold(f64::INFINITY, f64::min);
    let tol = GRADIENT_TOLERANCE * max.abs();
    if max - min <= tol {
        return false;
    }
    let mut best = [0usize; 4];
    let mut count = 0;
    for (k, &v) in vals.iter().enumerate() {
        if v >= max - tol {
            best[count] = k;
            count += 1;
        }
    }
    let k = if count == 1 { best[0] } else { best[rng.random_range(0..count)] };
    let edge = code.lattice.incident_edges(site)[k];
    code.flip_edge(edge);
    code.syndrome.recorded[site] ^= true;
    code.syndrome.recorded[nbrs[k]] ^= true;
    true
}

/// `A`: visit the sites recorded at the start of the pass in random order
/// and apply [`local_anyon_update`] to those still occupied.
pub fn anyon_update<R: Rng>(code: &mut CodeState, plane: &[f64], rng: &mut R) -> usize {
    let mut occupied: Vec<usize> = code
        .syndrome
        .recorded
        .iter()
        .enumerate()
        .filter_map(|(i, &r)| r.then_some(i))
        .collect();
    if occupied.is_empty() {
        return 0;
    }
    occupied.shuffle(rng);
    let mut moves = 0;
    for site in occupied {
        if code.syndrome.recorded[site] && local_anyon_update(code, plane, site, rng) {
            moves += 1;
        }
    }
    moves
}

/// How the decoder obtains the field it follows.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldState {
    /// Iterated 3D automaton; `sweeps` field updates per anyon update.
    Automaton { field: PhiField, sweeps: usize },
    /// Steady-state `1/r^alpha` field recomputed from the record.
    Explicit { kernel: ExplicitKernel, plane: Vec<f64> },
}

impl FieldState {
    pub fn automaton(size: usize, height: usize, sweeps: usize) -> Self {
        assert!(sweeps >= 1, "at least one sweep per anyon update");
        FieldState::Automaton {
            field: PhiField::new(size, height),
            sweeps,
        }
    }

    pub fn explicit(size: usize, alpha: f64) -> Self {
        FieldState::Explicit {
            kernel: ExplicitKernel::new(size, alpha),
            plane: vec![0.0; size * size],
        }
    }

    /// Zero the field in place.
    pub fn reset(&mut self) {
        match self {
            FieldState::Automaton { field, .. } => field.reset(),
            FieldState::Explicit { plane, .. } => plane.fill(0.0),
        }
    }

    /// Same decoder with a zeroed field.
    pub fn fresh(&self) -> Self {
        match self {
            FieldState::Automaton { field, sweeps } => {
                FieldState::automaton(field.size(), field.height(), *sweeps)
            }
            FieldState::Explicit { kernel, plane } => FieldState::Explicit {
                kernel: kernel.clone(),
                plane: vec![0.0; plane.len()],
            },
        }
    }
}

/// Everything one trial evolves: code, decoder field, random stream, clock.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub code: CodeState,
    pub field: FieldState,
    pub rng: SimRng,
    pub clock: f64,
}

impl SimulationState {
    pub fn new(lattice: Lattice, field: FieldState, rng: SimRng) -> Self {
        Self {
            code: CodeState::new(lattice),
            field,
            rng,
            clock: 0.0,
        }
    }

    pub fn error_map(&mut self, p: f64) {
        error_map(&mut self.code, p, &mut self.rng);
    }

    pub fn measure(&mut self, q: f64) {
        measure(&mut self.code, q, &mut self.rng);
    }

    /// One field sweep. No-op for the explicit field.
    pub fn field_step(&mut self) {
        if let FieldState::Automaton { field, .. } = &mut self.field {
            field.step(&self.code.syndrome.recorded);
        }
    }

    /// `A` against the current field.
    pub fn anyon_update(&mut self) -> usize {
        match &mut self.field {
            FieldState::Automaton { field, .. } => {
                anyon_update(&mut self.code, field.surface(), &mut self.rng)
            }
            FieldState::Explicit { kernel, plane } => {
                kernel.fill_plane(&self.code.syndrome.recorded, plane);
                anyon_update(&mut self.code, plane, &mut self.rng)
            }
        }
    }

    /// `D_c = A F^c`; the explicit field replaces the `c` sweeps.
    pub fn compound_step(&mut self) -> usize {
        if let FieldState::Automaton { field, sweeps } = &mut self.field {
            for _ in 0..*sweeps {
                field.step(&self.code.syndrome.recorded);
            }
        }
        self.anyon_update()
    }
}
