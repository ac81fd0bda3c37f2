//! North-East-Center majority automaton on an `L x L` torus, the classical
//! reference eroder. North is `y - 1`, East is `x + 1`, both periodic.

use std::time::Instant;

use rand::{Rng, SeedableRng};

use crate::engine::{Mode, SurvivalRecord, SCHEMA_VERSION};
use crate::rules::SimRng;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryGrid {
    size: usize,
    bits: Vec<bool>,
}

impl BinaryGrid {
    pub fn new(size: usize) -> Self {
        Self::filled(size, false)
    }

    pub fn filled(size: usize, value: bool) -> Self {
        assert!(size >= 1, "grid must have at least one cell");
        Self {
            size,
            bits: vec![value; size * size],
        }
    }

    pub fn from_bits(size: usize, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), size * size, "grid needs L^2 cells");
        Self { size, bits }
    }

    /// I.i.d. cells, each one with probability `density`.
    pub fn random<R: Rng>(size: usize, density: f64, rng: &mut R) -> Self {
        let bits = (0..size * size).map(|_| rng.random_bool(density)).collect();
        Self { size, bits }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.size + x]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.size + x] = value;
    }

    pub fn ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Strictly more than half of the cells are one.
    pub fn majority_one(&self) -> bool {
        2 * self.ones() > self.bits.len()
    }

    pub fn is_uniform(&self, value: bool) -> bool {
        self.bits.iter().all(|&b| b == value)
    }

    /// Flips every cell independently with probability `p`.
    pub fn apply_noise<R: Rng>(&mut self, p: f64, rng: &mut R) {
        if p <= 0.0 {
            return;
        }
        // jump between flipped cells with geometric gaps
        let log_q = (1.0 - p).ln();
        let n = self.bits.len();
        let mut i = 0usize;
        loop {
            let u: f64 = 1.0 - rng.random::<f64>();
            let gap = (u.ln() / log_q).floor();
            if gap >= (n - i) as f64 {
                break;
            }
            i += gap as usize;
            self.bits[i] ^= true;
            i += 1;
            if i >= n {
                break;
            }
        }
    }
}

/// One synchronous NEC update into `out`.
pub fn nec_step_into(grid: &BinaryGrid, out: &mut BinaryGrid) {
    let l = grid.size;
    assert_eq!(out.size, l);
    for y in 0..l {
        let north = if y == 0 { l - 1 } else { y - 1 };
        let row = &grid.bits[y * l..(y + 1) * l];
        let north_row = &grid.bits[north * l..(north + 1) * l];
        let dst = &mut out.bits[y * l..(y + 1) * l];
        for x in 0..l {
            let east = if x + 1 == l { 0 } else { x + 1 };
            let votes = row[x] as u8 + north_row[x] as u8 + row[east] as u8;
            dst[x] = votes >= 2;
        }
    }
}

pub fn nec_step(grid: &BinaryGrid) -> BinaryGrid {
    let mut out = BinaryGrid::new(grid.size);
    nec_step_into(grid, &mut out);
    out
}

/// Starting from all zeros, alternates noise and one NEC update until the
/// majority turns to one or `cap` steps pass.
pub fn toom_survival(size: usize, noise_p: f64, cap: u64, seed: u64) -> SurvivalRecord {
    assert!(
        (0.0..0.5).contains(&noise_p),
        "noise probability must lie in [0, 1/2)"
    );
    let start = Instant::now();
    let mut rng = SimRng::seed_from_u64(seed);
    let mut grid = BinaryGrid::new(size);
    let mut next = BinaryGrid::new(size);
    let mut failed_at = None;
    for step in 1..=cap {
        grid.apply_noise(noise_p, &mut rng);
        nec_step_into(&grid, &mut next);
        std::mem::swap(&mut grid, &mut next);
        if grid.majority_one() {
            failed_at = Some(step);
            break;
        }
    }
    SurvivalRecord {
        schema_version: SCHEMA_VERSION,
        mode: Mode::Toom,
        size,
        p: noise_p,
        q: 0.0,
        alpha: None,
        seed,
        trial: 0,
        failure_time: failed_at.unwrap_or(cap) as f64,
        censored: failed_at.is_none(),
        success: None,
        wall_time: start.elapsed().as_secs_f64(),
    }
}
