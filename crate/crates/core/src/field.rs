//! The attractive φ-field.
//!
//! [`PhiField`] is the 3D cellular-automaton field on an `L x L x H` box:
//! periodic in x and y, mirrored below the bottom layer (the cell under
//! `z = 0` reads as the cell itself) and absorbing (zero) above `z = H - 1`.
//! Recorded anyons are sources at `z = 0`. [`ExplicitKernel`] evaluates the
//! steady-state `1 / r^alpha` superposition directly on the plane.

use std::io::{self, Write};

use crate::toric::{torus_manhattan, Site};

/// Number of field sweeps per anyon update, `ceil(kappa * log2(L)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FieldSchedule {
    pub kappa: f64,
}

impl Default for FieldSchedule {
    fn default() -> Self {
        Self { kappa: 1.0 }
    }
}

impl FieldSchedule {
    pub fn new(kappa: f64) -> Self {
        assert!(kappa > 0.0 && kappa.is_finite(), "kappa must be positive");
        Self { kappa }
    }

    pub fn sweeps(&self, size: usize) -> usize {
        let lg = (size as f64).log2();
        ((self.kappa * lg * lg).ceil() as usize).max(1)
    }
}

/// Default depth of the third dimension, `max(4, L / 2)`.
pub fn default_height(size: usize) -> usize {
    (size / 2).max(4)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhiField {
    size: usize,
    height: usize,
    values: Vec<f64>,
    scratch: Vec<f64>,
    // wrapped x-1 / x+1 lookups, shared by rows and columns
    prev: Vec<usize>,
    next: Vec<usize>,
}

impl PhiField {
    pub fn new(size: usize, height: usize) -> Self {
        assert!(size >= 2 && height >= 1, "field box must be at least 2 x 2 x 1");
        let n = size * size * height;
        Self {
            size,
            height,
            values: vec![0.0; n],
            scratch: vec![0.0; n],
            prev: (0..size).map(|i| (i + size - 1) % size).collect(),
            next: (0..size).map(|i| (i + 1) % size).collect(),
        }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_cells(&self) -> usize {
        self.values.len()
    }

    #[inline]
    pub fn cell_index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.size + y) * self.size + x
    }

    pub fn value(&self, x: usize, y: usize, z: usize) -> f64 {
        self.values[self.cell_index(x, y, z)]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn set_values(&mut self, values: &[f64]) {
        self.values.copy_from_slice(values);
    }

    /// The `z = 0` layer, indexed like plaquette sites.
    pub fn surface(&self) -> &[f64] {
        &self.values[..self.size * self.size]
    }

    pub fn reset(&mut self) {
        self.values.fill(0.0);
    }

    /// Sum of the six neighbours of `(x, y, z)` read from `src`.
    #[inline(always)]
    fn neighbor_sum(&self, src: &[f64], x: usize, y: usize, z: usize) -> f64 {
        let l = self.size;
        let plane = l * l;
        let base = z * plane;
        let row = base + y * l;
        let idx = row + x;
        let below = if z == 0 { src[idx] } else { src[idx - plane] };
        let above = if z + 1 == self.height { 0.0 } else { src[idx + plane] };
        src[row + self.prev[x]]
            + src[row + self.next[x]]
            + src[base + self.prev[y] * l + x]
            + src[base + self.next[y] * l + x]
            + below
            + above
    }

    /// One synchronous sweep: every cell becomes the mean of its six old
    /// neighbours, then `+1` at each `z = 0` cell holding a recorded anyon.
    pub fn step(&mut self, sources: &[bool]) {
        let l = self.size;
        let plane = l * l;
        debug_assert_eq!(sources.len(), plane);
        let mut out = std::mem::take(&mut self.scratch);
        let old = &self.values;
        for z in 0..self.height {
            let layer = z * plane;
            for y in 0..l {
                let row = layer + y * l;
                let cur = &old[row..row + l];
                let north = &old[layer + self.prev[y] * l..][..l];
                let south = &old[layer + self.next[y] * l..][..l];
                let below = if z == 0 { cur } else { &old[row - plane..row - plane + l] };
                let above = (z + 1 < self.height).then(|| &old[row + plane..row + plane + l]);
                relax_row(&mut out[row..row + l], cur, north, south, below, above);
            }
        }
        for (cell, _) in sources.iter().enumerate().filter(|(_, &s)| s) {
            out[cell] += 1.0;
        }
        self.scratch = std::mem::replace(&mut self.values, out);
    }

    /// Update a single cell in place from the current neighbour values.
    pub fn local_update(&mut self, cell: usize, sources: &[bool]) {
        let l = self.size;
        let x = cell % l;
        let y = (cell / l) % l;
        let z = cell / (l * l);
        let mut v = self.neighbor_sum(&self.values, x, y, z) / 6.0;
        if z == 0 && sources[cell] {
            v += 1.0;
        }
        self.values[cell] = v;
    }

    /// Max-norm distance to another field of the same shape.
    pub fn max_abs_diff(&self, other: &PhiField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Writes `x,y,z,value` rows with a header.
    pub fn write_snapshot<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "x,y,z,value")?;
        for z in 0..self.height {
            for y in 0..self.size {
                for x in 0..self.size {
                    writeln!(w, "{x},{y},{z},{}", self.value(x, y, z))?;
                }
            }
        }
        Ok(())
    }
}

const SIXTH: f64 = 1.0 / 6.0;

/// Averages one periodic row of cells from its in-row, adjacent-row and
/// adjacent-layer neighbours. `above = None` is the absorbing lid.
#[inline(always)]
fn relax_row(
    out: &mut [f64],
    cur: &[f64],
    north: &[f64],
    south: &[f64],
    below: &[f64],
    above: Option<&[f64]>,
) {
    let l = out.len();
    let vertical = |x: usize| north[x] + south[x] + below[x] + above.map_or(0.0, |a| a[x]);
    out[0] = (cur[l - 1] + cur[1] + vertical(0)) * SIXTH;
    out[l - 1] = (cur[l - 2] + cur[0] + vertical(l - 1)) * SIXTH;
    let m = l - 2;
    let (left, right) = (&cur[..m], &cur[2..]);
    let (n, s, b) = (&north[1..=m], &south[1..=m], &below[1..=m]);
    let o = &mut out[1..=m];
    match above {
        Some(a) => {
            let a = &a[1..=m];
            for i in 0..m {
                o[i] = (left[i] + right[i] + n[i] + s[i] + b[i] + a[i]) * SIXTH;
            }
        }
        None => {
            for i in 0..m {
                o[i] = (left[i] + right[i] + n[i] + s[i] + b[i]) * SIXTH;
            }
        }
    }
}

/// Precomputed `1 / max(r, 1)^alpha` for every torus Manhattan distance `r`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplicitKernel {
    size: usize,
    alpha: f64,
    by_distance: Vec<f64>,
}

impl ExplicitKernel {
    pub fn new(size: usize, alpha: f64) -> Self {
        assert!(alpha > 0.0 && alpha.is_finite(), "alpha must be positive");
        // the largest torus Manhattan distance is 2 * floor(L / 2)
        let by_distance = (0..=size)
            .map(|r| 1.0 / (r.max(1) as f64).powf(alpha))
            .collect();
        Self {
            size,
            alpha,
            by_distance,
        }
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn weight(&self, r: usize) -> f64 {
        self.by_distance[r]
    }

    /// Field value at one site for the given anyon positions.
    pub fn value_at(&self, site: Site, anyons: &[Site]) -> f64 {
        anyons
            .iter()
            .map(|&a| self.weight(torus_manhattan(site, a, self.size)))
            .sum()
    }

    /// Fills `plane` (length `L^2`) with the superposed field of all recorded
    /// anyons. The `r = 0` self term counts as 1.
    pub fn fill_plane(&self, recorded: &[bool], plane: &mut [f64]) {
        let l = self.size;
        plane.fill(0.0);
        for (a, _) in recorded.iter().enumerate().filter(|(_, &r)| r) {
            let (ax, ay) = (a % l, a / l);
            for y in 0..l {
                let dy = ay.abs_diff(y);
                let dy = dy.min(l - dy);
                let row = y * l;
                for x in 0..l {
                    let dx = ax.abs_diff(x);
                    plane[row + x] += self.by_distance[dx.min(l - dx) + dy];
                }
            }
        }
    }
}

/// Steady-state `1 / r^alpha` field of the recorded anyons on the `z = 0` plane.
pub fn explicit_field(recorded: &[bool], alpha: f64, size: usize) -> Vec<f64> {
    let mut plane = vec![0.0; size * size];
    ExplicitKernel::new(size, alpha).fill_plane(recorded, &mut plane);
    plane
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn sources(l: usize, at: &[(usize, usize)]) -> Vec<bool> {
        let mut s = vec![false; l * l];
        for &(x, y) in at {
            s[y * l + x] = true;
        }
        s
    }

    /// Solves `phi = M phi + s` directly, building `M` from coordinates.
    fn fixed_point_oracle(l: usize, h: usize, src: &[bool]) -> Vec<f64> {
        let n = l * l * h;
        let idx = |x: usize, y: usize, z: usize| (z * l + y) * l + x;
        let mut a = DMatrix::<f64>::identity(n, n);
        let mut b = DVector::<f64>::zeros(n);
        for z in 0..h {
            for y in 0..l {
                for x in 0..l {
                    let i = idx(x, y, z);
                    let mut nbrs = vec![
                        idx((x + 1) % l, y, z),
                        idx((x + l - 1) % l, y, z),
                        idx(x, (y + 1) % l, z),
                        idx(x, (y + l - 1) % l, z),
                    ];
                    nbrs.push(if z == 0 { i } else { idx(x, y, z - 1) });
                    if z + 1 < h {
                        nbrs.push(idx(x, y, z + 1));
                    }
                    for j in nbrs {
                        a[(i, j)] -= 1.0 / 6.0;
                    }
                    if z == 0 && src[y * l + x] {
                        b[i] = 1.0;
                    }
                }
            }
        }
        a.lu().solve(&b).expect("fixed-point system is nonsingular").as_slice().to_vec()
    }

    #[test]
    fn schedule_values() {
        let s = FieldSchedule::default();
        assert_eq!(s.sweeps(2), 1);
        assert_eq!(s.sweeps(12), 13);
        assert_eq!(s.sweeps(14), 15);
        assert_eq!(s.sweeps(16), 16);
        assert_eq!(s.sweeps(24), 22);
        assert_eq!(FieldSchedule::new(0.01).sweeps(12), 1);
        assert_eq!(default_height(6), 4);
        assert_eq!(default_height(12), 6);
    }

    #[test]
    fn zero_field_without_sources_is_fixed() {
        let mut f = PhiField::new(5, 4);
        f.step(&[false; 25]);
        assert!(f.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn two_hand_iterated_sweeps() {
        let l = 6;
        let src = sources(l, &[(2, 3)]);
        let mut f = PhiField::new(l, 4);
        f.step(&src);
        for (i, &v) in f.values().iter().enumerate() {
            let expect = if i == f.cell_index(2, 3, 0) { 1.0 } else { 0.0 };
            assert_eq!(v, expect);
        }
        f.step(&src);
        // the mirror below the source feeds back 1/6 of its own value
        assert!((f.value(2, 3, 0) - 7.0 / 6.0).abs() < 1e-15);
        for (x, y) in [(1, 3), (3, 3), (2, 2), (2, 4)] {
            assert!((f.value(x, y, 0) - 1.0 / 6.0).abs() < 1e-15);
        }
        assert!((f.value(2, 3, 1) - 1.0 / 6.0).abs() < 1e-15);
        let nonzero = f.values().iter().filter(|&&v| v != 0.0).count();
        assert_eq!(nonzero, 6);
    }

    #[test]
    fn iterated_sweeps_reach_linear_fixed_point() {
        let (l, h) = (4, 4);
        let src = sources(l, &[(0, 0), (2, 1), (3, 3)]);
        let exact = fixed_point_oracle(l, h, &src);
        let mut f = PhiField::new(l, h);
        for _ in 0..2000 {
            f.step(&src);
        }
        let err = f
            .values()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max-norm error {err}");
    }

    #[test]
    fn random_local_sweeps_reach_same_fixed_point() {
        let (l, h) = (4, 4);
        let src = sources(l, &[(1, 1), (2, 3)]);
        let exact = fixed_point_oracle(l, h, &src);
        let mut f = PhiField::new(l, h);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut order: Vec<usize> = (0..f.num_cells()).collect();
        for _ in 0..2000 {
            order.shuffle(&mut rng);
            for &c in &order {
                f.local_update(c, &src);
            }
        }
        let err = f
            .values()
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-6, "max-norm error {err}");
    }

    #[test]
    fn local_updates_at_exact_fixed_point_change_nothing() {
        let (l, h) = (4, 4);
        let src = sources(l, &[(3, 0)]);
        let mut f = PhiField::new(l, h);
        f.set_values(&fixed_point_oracle(l, h, &src));
        let before = f.clone();
        for c in (0..f.num_cells()).rev() {
            f.local_update(c, &src);
        }
        assert!(f.max_abs_diff(&before) < 1e-12);
    }

    #[test]
    fn local_update_at_source_of_zero_field() {
        let l = 5;
        let src = sources(l, &[(1, 2)]);
        let mut f = PhiField::new(l, 3);
        let c = f.cell_index(1, 2, 0);
        f.local_update(c, &src);
        for (i, &v) in f.values().iter().enumerate() {
            assert_eq!(v, if i == c { 1.0 } else { 0.0 });
        }
    }

    #[test]
    fn sweeps_are_linear_in_sources() {
        let l = 4;
        let s1 = sources(l, &[(0, 1)]);
        let s2 = sources(l, &[(3, 2), (1, 3)]);
        let both: Vec<bool> = s1.iter().zip(&s2).map(|(a, b)| a | b).collect();
        let (mut f1, mut f2, mut f12) = (PhiField::new(l, 4), PhiField::new(l, 4), PhiField::new(l, 4));
        for _ in 0..37 {
            f1.step(&s1);
            f2.step(&s2);
            f12.step(&both);
        }
        for i in 0..f12.num_cells() {
            assert!((f12.values()[i] - f1.values()[i] - f2.values()[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn converged_field_is_translation_covariant() {
        let l = 5;
        let (dx, dy) = (2, 3);
        let at = [(0, 0), (1, 3)];
        let shifted: Vec<(usize, usize)> = at.iter().map(|&(x, y)| ((x + dx) % l, (y + dy) % l)).collect();
        let (mut f, mut g) = (PhiField::new(l, 4), PhiField::new(l, 4));
        let (s, t) = (sources(l, &at), sources(l, &shifted));
        for _ in 0..1500 {
            f.step(&s);
            g.step(&t);
        }
        for z in 0..4 {
            for y in 0..l {
                for x in 0..l {
                    let a = f.value(x, y, z);
                    let b = g.value((x + dx) % l, (y + dy) % l, z);
                    assert!((a - b).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn field_drains_without_sources() {
        let l = 6;
        let mut f = PhiField::new(l, 4);
        let src = sources(l, &[(0, 0), (3, 3)]);
        for _ in 0..30 {
            f.step(&src);
        }
        let none = vec![false; l * l];
        let mut prev_max = f.values().iter().cloned().fold(0.0, f64::max);
        for _ in 0..400 {
            f.step(&none);
            assert!(f.values().iter().all(|&v| v >= 0.0 && v.is_finite()));
            let m = f.values().iter().cloned().fold(0.0, f64::max);
            assert!(m <= prev_max + 1e-15);
            prev_max = m;
        }
        assert!(prev_max < 1e-3);
    }

    #[test]
    fn successive_sweep_differences_shrink_after_burn_in() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for l in [4usize, 6, 8] {
            let src: Vec<bool> = (0..l * l).map(|_| rng.random_bool(0.2)).collect();
            let mut f = PhiField::new(l, default_height(l));
            for _ in 0..50 {
                f.step(&src);
            }
            let mut last = f64::INFINITY;
            for _ in 0..200 {
                let before = f.clone();
                f.step(&src);
                let d = f.max_abs_diff(&before);
                assert!(d <= last * (1.0 + 1e-9), "L={l}: {d} > {last}");
                last = d;
            }
        }
    }

    #[test]
    fn explicit_field_examples() {
        let l = 8;
        let one = sources(l, &[(4, 4)]);
        for alpha in [0.5, 1.0, 1.05, 2.0] {
            let plane = explicit_field(&one, alpha, l);
            for (x, y) in [(5, 4), (3, 4), (4, 5), (4, 3)] {
                assert_eq!(plane[y * l + x], 1.0);
            }
        }
        let two = sources(l, &[(0, 0), (3, 0)]);
        let plane = explicit_field(&two, 1.0, l);
        assert!((plane[1] - 1.5).abs() < 1e-15);
    }

    #[test]
    fn explicit_field_matches_brute_force_superposition() {
        let l = 6;
        let alpha = 1.05;
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let rec: Vec<bool> = (0..l * l).map(|_| rng.random_bool(0.25)).collect();
            let plane = explicit_field(&rec, alpha, l);
            for y in 0..l {
                for x in 0..l {
                    let mut expect = 0.0;
                    for ay in 0..l {
                        for ax in 0..l {
                            if !rec[ay * l + ax] {
                                continue;
                            }
                            // distance via all nine periodic images
                            let mut r = usize::MAX;
                            for ix in [-1i64, 0, 1] {
                                for iy in [-1i64, 0, 1] {
                                    let ddx = (x as i64 - ax as i64 - ix * l as i64).unsigned_abs();
                                    let ddy = (y as i64 - ay as i64 - iy * l as i64).unsigned_abs();
                                    r = r.min((ddx + ddy) as usize);
                                }
                            }
                            expect += 1.0 / (r.max(1) as f64).powf(alpha);
                        }
                    }
                    assert!((plane[y * l + x] - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn snapshot_has_one_row_per_cell() {
        let f = PhiField::new(3, 2);
        let mut buf = Vec::new();
        f.write_snapshot(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 18);
        assert!(text.starts_with("x,y,z,value\n0,0,0,0\n"));
    }
}
