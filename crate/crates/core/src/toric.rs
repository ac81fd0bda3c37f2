//! Toric-code geometry, X-error configurations, plaquette syndromes and
//! homology classes.
//!
//! Everything lives on the plaquette lattice: a plaquette `(x, y)` is a site,
//! and each qubit is an edge joining two neighbouring plaquettes. Edge
//! `(x, y, Right)` joins `(x, y)` to `(x + 1, y)`, edge `(x, y, Down)` joins
//! `(x, y)` to `(x, y + 1)`. Both directions wrap.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ToricError {
    #[error("configuration is not anyon free ({0} plaquettes flagged)")]
    NotAnyonFree(usize),
}

/// A plaquette coordinate on the `L x L` torus.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Site {
    pub x: usize,
    pub y: usize,
}

impl Site {
    pub const fn new(x: usize, y: usize) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Right,
    Down,
}

/// Periodic `L x L` plaquette lattice with `2 L^2` edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Lattice {
    size: usize,
}

impl Lattice {
    /// Panics if `size < 2`; smaller tori have degenerate neighbourhoods.
    pub fn new(size: usize) -> Self {
        assert!(size >= 2, "lattice side must be at least 2, got {size}");
        Self { size }
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn num_sites(&self) -> usize {
        self.size * self.size
    }

    pub fn num_edges(&self) -> usize {
        2 * self.size * self.size
    }

    #[inline]
    pub fn site_index(&self, site: Site) -> usize {
        site.y * self.size + site.x
    }

    #[inline]
    pub fn site_at(&self, index: usize) -> Site {
        Site::new(index % self.size, index / self.size)
    }

    #[inline]
    pub fn edge_index(&self, site: Site, dir: Direction) -> usize {
        2 * self.site_index(site)
            + match dir {
                Direction::Right => 0,
                Direction::Down => 1,
            }
    }

    #[inline]
    pub fn edge_at(&self, edge: usize) -> (Site, Direction) {
        let dir = if edge % 2 == 0 { Direction::Right } else { Direction::Down };
        (self.site_at(edge / 2), dir)
    }

    /// The two plaquettes an edge separates, as site indices.
    #[inline]
    pub fn edge_endpoints(&self, edge: usize) -> (usize, usize) {
        let l = self.size;
        let s = edge / 2;
        let (x, y) = (s % l, s / l);
        let other = if edge % 2 == 0 {
            y * l + (x + 1) % l
        } else {
            ((y + 1) % l) * l + x
        };
        (s, other)
    }

    /// Site indices of the right, left, down and up neighbours, in that order.
    #[inline]
    pub fn neighbors(&self, site: usize) -> [usize; 4] {
        let l = self.size;
        let (x, y) = (site % l, site / l);
        [
            y * l + (x + 1) % l,
            y * l + (x + l - 1) % l,
            ((y + 1) % l) * l + x,
            ((y + l - 1) % l) * l + x,
        ]
    }

    /// Edges connecting `site` to each entry of [`Lattice::neighbors`].
    #[inline]
    pub fn incident_edges(&self, site: usize) -> [usize; 4] {
        let l = self.size;
        let (x, y) = (site % l, site / l);
        let left = y * l + (x + l - 1) % l;
        let up = ((y + l - 1) % l) * l + x;
        [2 * site, 2 * left, 2 * site + 1, 2 * up + 1]
    }

    /// Edges of the elementary cycle around the lattice corner shared by
    /// `site`, its right, lower and lower-right neighbours. Toggling them is
    /// a stabilizer: it moves no anyon and leaves the homology class alone.
    pub fn stabilizer_edges(&self, site: usize) -> [usize; 4] {
        let [right, _, down, _] = self.neighbors(site);
        [2 * site, 2 * site + 1, 2 * right + 1, 2 * down]
    }

    pub fn manhattan(&self, a: Site, b: Site) -> usize {
        torus_manhattan(a, b, self.size)
    }
}

/// Manhattan distance on the `size x size` torus.
pub fn torus_manhattan(a: Site, b: Site, size: usize) -> usize {
    let dx = a.x.abs_diff(b.x);
    let dy = a.y.abs_diff(b.y);
    dx.min(size - dx) + dy.min(size - dy)
}

/// One bit per edge: cumulative X errors together with applied corrections.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ErrorConfig {
    bits: Vec<bool>,
}

impl ErrorConfig {
    pub fn new(lattice: &Lattice) -> Self {
        Self {
            bits: vec![false; lattice.num_edges()],
        }
    }

    pub fn from_bits(lattice: &Lattice, bits: Vec<bool>) -> Self {
        assert_eq!(bits.len(), lattice.num_edges(), "bit count must be 2 L^2");
        Self { bits }
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, edge: usize) -> bool {
        self.bits[edge]
    }

    /// Panics on an out-of-range edge.
    #[inline]
    pub fn toggle(&mut self, edge: usize) {
        assert!(edge < self.bits.len(), "edge {edge} out of range");
        self.bits[edge] ^= true;
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Plaquette parities of an error configuration.
pub fn syndrome(lattice: &Lattice, config: &ErrorConfig) -> Vec<bool> {
    let mut out = vec![false; lattice.num_sites()];
    for (edge, _) in config.bits().iter().enumerate().filter(|(_, &b)| b) {
        let (a, b) = lattice.edge_endpoints(edge);
        out[a] ^= true;
        out[b] ^= true;
    }
    out
}

/// Returns a copy of `config` with `edge` toggled.
pub fn apply_x(config: &ErrorConfig, edge: usize) -> ErrorConfig {
    let mut out = config.clone();
    out.toggle(edge);
    out
}

/// Homology class of an anyon-free configuration: parities of the error
/// bits crossing the cut between columns `L-1` and `0` and the cut between
/// rows `L-1` and `0`. `(false, false)` means no logical error.
pub fn homology_class(
    lattice: &Lattice,
    config: &ErrorConfig,
) -> Result<(bool, bool), ToricError> {
    let flagged = syndrome(lattice, config).iter().filter(|&&b| b).count();
    if flagged > 0 {
        return Err(ToricError::NotAnyonFree(flagged));
    }
    Ok(cut_parities(lattice, config))
}

/// Cut parities without the anyon-free check. Only meaningful as a class
/// label when the configuration has no anyons.
pub fn cut_parities(lattice: &Lattice, config: &ErrorConfig) -> (bool, bool) {
    let l = lattice.size();
    let mut h1 = false;
    let mut h2 = false;
    for k in 0..l {
        h1 ^= config.get(lattice.edge_index(Site::new(l - 1, k), Direction::Right));
        h2 ^= config.get(lattice.edge_index(Site::new(k, l - 1), Direction::Down));
    }
    (h1, h2)
}

/// Per-plaquette true syndrome plus the decoder's last recorded value.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct SyndromeRecord {
    pub true_syndrome: Vec<bool>,
    pub recorded: Vec<bool>,
}

impl SyndromeRecord {
    pub fn new(lattice: &Lattice) -> Self {
        Self {
            true_syndrome: vec![false; lattice.num_sites()],
            recorded: vec![false; lattice.num_sites()],
        }
    }

    pub fn true_count(&self) -> usize {
        self.true_syndrome.iter().filter(|&&b| b).count()
    }

    pub fn recorded_count(&self) -> usize {
        self.recorded.iter().filter(|&&b| b).count()
    }

    pub fn anyon_free(&self) -> bool {
        !self.true_syndrome.iter().any(|&b| b)
    }
}

/// Errors, corrections and syndromes of one toric-code copy. The true
/// syndrome is kept consistent with the edge bits incrementally.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CodeState {
    pub lattice: Lattice,
    pub errors: ErrorConfig,
    pub syndrome: SyndromeRecord,
}

impl CodeState {
    pub fn new(lattice: Lattice) -> Self {
        Self {
            errors: ErrorConfig::new(&lattice),
            syndrome: SyndromeRecord::new(&lattice),
            lattice,
        }
    }

    pub fn from_errors(lattice: Lattice, errors: ErrorConfig) -> Self {
        let true_syndrome = syndrome(&lattice, &errors);
        let recorded = true_syndrome.clone();
        Self {
            lattice,
            errors,
            syndrome: SyndromeRecord {
                true_syndrome,
                recorded,
            },
        }
    }

    /// Toggle one edge and the true syndrome of its two plaquettes.
    #[inline]
    pub fn flip_edge(&mut self, edge: usize) {
        self.errors.toggle(edge);
        let (a, b) = self.lattice.edge_endpoints(edge);
        self.syndrome.true_syndrome[a] ^= true;
        self.syndrome.true_syndrome[b] ^= true;
    }

    pub fn is_consistent(&self) -> bool {
        syndrome(&self.lattice, &self.errors) == self.syndrome.true_syndrome
    }

    /// `Some(true)` when anyon free with a nontrivial class, `Some(false)`
    /// when anyon free and trivial, `None` while anyons remain.
    pub fn logical_error(&self) -> Option<bool> {
        if !self.syndrome.anyon_free() {
            return None;
        }
        let (h1, h2) = cut_parities(&self.lattice, &self.errors);
        Some(h1 || h2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_config(lattice: &Lattice, rng: &mut impl Rng, density: f64) -> ErrorConfig {
        let bits = (0..lattice.num_edges()).map(|_| rng.random_bool(density)).collect();
        ErrorConfig::from_bits(lattice, bits)
    }

    /// Incidence recomputed from coordinates, independent of the index helpers.
    fn brute_force_syndrome(l: usize, bits: &[bool]) -> Vec<bool> {
        let mut out = vec![false; l * l];
        for y in 0..l {
            for x in 0..l {
                let right = bits[2 * (y * l + x)];
                let down = bits[2 * (y * l + x) + 1];
                let left = bits[2 * (y * l + (x + l - 1) % l)];
                let up = bits[2 * (((y + l - 1) % l) * l + x) + 1];
                out[y * l + x] = right ^ down ^ left ^ up;
            }
        }
        out
    }

    #[test]
    fn empty_config_has_no_anyons() {
        let lat = Lattice::new(5);
        assert!(syndrome(&lat, &ErrorConfig::new(&lat)).iter().all(|&b| !b));
    }

    #[test]
    fn single_error_flags_its_two_plaquettes() {
        let lat = Lattice::new(4);
        for edge in 0..lat.num_edges() {
            let c = apply_x(&ErrorConfig::new(&lat), edge);
            let s = syndrome(&lat, &c);
            let (a, b) = lat.edge_endpoints(edge);
            let flagged: Vec<usize> = (0..s.len()).filter(|&i| s[i]).collect();
            let mut expected = vec![a, b];
            expected.sort();
            assert_eq!(flagged, expected);
        }
    }

    #[test]
    fn syndrome_matches_brute_force_parity() {
        let lat = Lattice::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let c = random_config(&lat, &mut rng, 0.4);
            let s = syndrome(&lat, &c);
            assert_eq!(s, brute_force_syndrome(4, c.bits()));
            assert_eq!(s.iter().filter(|&&b| b).count() % 2, 0);
        }
    }

    #[test]
    fn apply_x_is_an_involution() {
        let lat = Lattice::new(3);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let c = random_config(&lat, &mut rng, 0.5);
        for e in 0..lat.num_edges() {
            assert_eq!(apply_x(&apply_x(&c, e), e), c);
        }
    }

    #[test]
    #[should_panic(expected = "out of range")]
    fn apply_x_rejects_bad_edge() {
        let lat = Lattice::new(3);
        apply_x(&ErrorConfig::new(&lat), lat.num_edges());
    }

    #[test]
    fn every_edge_touches_two_plaquettes_and_every_plaquette_four_edges() {
        let lat = Lattice::new(5);
        let mut count = vec![0; lat.num_sites()];
        for e in 0..lat.num_edges() {
            let (a, b) = lat.edge_endpoints(e);
            assert_ne!(a, b);
            count[a] += 1;
            count[b] += 1;
        }
        assert!(count.iter().all(|&c| c == 4));
        for s in 0..lat.num_sites() {
            for (n, e) in lat.neighbors(s).into_iter().zip(lat.incident_edges(s)) {
                let (a, b) = lat.edge_endpoints(e);
                assert!((a == s && b == n) || (a == n && b == s));
                assert!(lat.neighbors(n).contains(&s));
            }
        }
    }

    #[test]
    fn stabilizer_leaves_syndrome_unchanged() {
        let lat = Lattice::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let base = random_config(&lat, &mut rng, 0.3);
        for s in 0..lat.num_sites() {
            let mut c = base.clone();
            for e in lat.stabilizer_edges(s) {
                c.toggle(e);
            }
            assert_eq!(syndrome(&lat, &c), syndrome(&lat, &base));
        }
    }

    #[test]
    fn homology_of_empty_and_loops() {
        let lat = Lattice::new(6);
        let empty = ErrorConfig::new(&lat);
        assert_eq!(homology_class(&lat, &empty), Ok((false, false)));

        let mut horizontal = ErrorConfig::new(&lat);
        for x in 0..6 {
            horizontal.toggle(lat.edge_index(Site::new(x, 2), Direction::Right));
        }
        assert_eq!(homology_class(&lat, &horizontal), Ok((true, false)));

        let mut vertical = ErrorConfig::new(&lat);
        for y in 0..6 {
            vertical.toggle(lat.edge_index(Site::new(3, y), Direction::Down));
        }
        assert_eq!(homology_class(&lat, &vertical), Ok((false, true)));
    }

    #[test]
    fn homology_rejects_anyons() {
        let lat = Lattice::new(4);
        let c = apply_x(&ErrorConfig::new(&lat), 3);
        assert_eq!(homology_class(&lat, &c), Err(ToricError::NotAnyonFree(2)));
    }

    #[test]
    fn homology_invariant_under_stabilizers() {
        let lat = Lattice::new(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..20 {
            // random product of stabilizers plus a random logical
            let mut base = ErrorConfig::new(&lat);
            for s in 0..lat.num_sites() {
                if rng.random_bool(0.5) {
                    for e in lat.stabilizer_edges(s) {
                        base.toggle(e);
                    }
                }
            }
            if rng.random_bool(0.5) {
                for x in 0..4 {
                    base.toggle(lat.edge_index(Site::new(x, 1), Direction::Right));
                }
            }
            let class = homology_class(&lat, &base).unwrap();
            for s in 0..lat.num_sites() {
                let mut c = base.clone();
                for e in lat.stabilizer_edges(s) {
                    c.toggle(e);
                }
                assert_eq!(homology_class(&lat, &c).unwrap(), class);
            }
        }
    }

    #[test]
    fn manhattan_examples() {
        let a = Site::new(0, 0);
        assert_eq!(torus_manhattan(a, a, 6), 0);
        assert_eq!(torus_manhattan(a, Site::new(4, 5), 6), 3);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let l = rng.random_range(2..20);
            let p = Site::new(rng.random_range(0..l), rng.random_range(0..l));
            let q = Site::new(rng.random_range(0..l), rng.random_range(0..l));
            assert_eq!(torus_manhattan(p, q, l), torus_manhattan(q, p, l));
        }
    }

    #[test]
    fn incremental_syndrome_stays_consistent() {
        let lat = Lattice::new(5);
        let mut state = CodeState::new(lat);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let before = state.syndrome.true_syndrome.clone();
            let e = rng.random_range(0..lat.num_edges());
            state.flip_edge(e);
            let (a, b) = lat.edge_endpoints(e);
            let diff: Vec<usize> = (0..before.len())
                .filter(|&i| before[i] != state.syndrome.true_syndrome[i])
                .collect();
            let mut expected = vec![a, b];
            expected.sort();
            assert_eq!(diff, expected);
            assert!(state.is_consistent());
            assert_eq!(state.syndrome.true_count() % 2, 0);
        }
    }
}
