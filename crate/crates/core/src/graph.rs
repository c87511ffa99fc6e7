//! Undirected graphs on `p` labeled vertices.
//!
//! Edges live in a flat bitset over the `p(p-1)/2` unordered pairs in
//! row-major order: `(0,1), (0,2), ..., (0,p-1), (1,2), ...`. Vertices are
//! 0-based here; 1-based labels only appear at the I/O boundary.

use rand::Rng;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct UndirectedGraph {
    p: usize,
    bits: Vec<u64>,
}

/// Canonical byte encoding of an edge set; injective among graphs with the
/// same vertex count.
#[derive(Clone, PartialEq, Eq, Hash, Debug, PartialOrd, Ord)]
pub struct GraphKey(pub Vec<u8>);

impl GraphKey {
    pub fn as_bytes(&self) -> &[u8] {
        &self.0
    }
}

/// Number of unordered vertex pairs on `p` vertices.
pub fn pair_count(p: usize) -> usize {
    p * p.saturating_sub(1) / 2
}

impl UndirectedGraph {
    pub fn empty(p: usize) -> Self {
        assert!(p >= 1, "a graph needs at least one vertex");
        Self {
            p,
            bits: vec![0; pair_count(p).div_ceil(64)],
        }
    }

    pub fn complete(p: usize) -> Self {
        let mut g = Self::empty(p);
        for i in 0..pair_count(p) {
            g.set_bit(i, true);
        }
        g
    }

    /// Builds a graph from 0-based vertex pairs. Duplicates and reversed
    /// pairs collapse to a single edge.
    pub fn from_edges(p: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("graph needs at least one vertex".into()));
        }
        let mut g = Self::empty(p);
        for &(a, b) in edges {
            g.check_pair(a, b)?;
            let i = g.pair_index(a, b);
            g.set_bit(i, true);
        }
        Ok(g)
    }

    /// Erdős–Rényi graph including each pair independently with probability `prob`.
    pub fn random<R: Rng + ?Sized>(p: usize, prob: f64, rng: &mut R) -> Self {
        let mut g = Self::empty(p);
        for i in 0..pair_count(p) {
            if rng.random::<f64>() < prob {
                g.set_bit(i, true);
            }
        }
        g
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn edge_count(&self) -> usize {
        self.bits.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Index of the pair `{a, b}` in the row-major pair order.
    pub fn pair_index(&self, a: usize, b: usize) -> usize {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        debug_assert!(lo != hi && hi < self.p);
        lo * self.p - lo * (lo + 1) / 2 + (hi - lo - 1)
    }

    /// Inverse of [`pair_index`](Self::pair_index); returns `(lo, hi)` with `lo < hi`.
    pub fn pair_from_index(&self, mut index: usize) -> (usize, usize) {
        let p = self.p;
        let mut lo = 0;
        while index >= p - lo - 1 {
            index -= p - lo - 1;
            lo += 1;
        }
        (lo, lo + 1 + index)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        if a == b {
            return false;
        }
        self.bit(self.pair_index(a, b))
    }

    /// Returns the neighbouring graph that differs from `self` exactly at `{a, b}`.
    pub fn toggled(&self, a: usize, b: usize) -> Result<Self> {
        let mut g = self.clone();
        g.toggle(a, b)?;
        Ok(g)
    }

    pub fn toggle(&mut self, a: usize, b: usize) -> Result<()> {
        self.check_pair(a, b)?;
        let i = self.pair_index(a, b);
        let cur = self.bit(i);
        self.set_bit(i, !cur);
        Ok(())
    }

    /// Number of neighbours of `v` with a larger index.
    pub fn later_degree(&self, v: usize) -> usize {
        assert!(v < self.p, "vertex {v} out of range");
        ((v + 1)..self.p).filter(|&w| self.has_edge(v, w)).count()
    }

    pub fn degree(&self, v: usize) -> usize {
        (0..self.p).filter(|&w| self.has_edge(v, w)).count()
    }

    pub fn neighbors(&self, v: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.p).filter(move |&w| self.has_edge(v, w))
    }

    /// Edges as `(lo, hi)` pairs in row-major order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..pair_count(self.p))
            .filter(|&i| self.bit(i))
            .map(|i| self.pair_from_index(i))
    }

    /// Size of the one-edge-change neighbourhood; the same for every graph.
    pub fn neighborhood_size(&self) -> usize {
        pair_count(self.p)
    }

    pub fn hamming_distance(&self, other: &Self) -> usize {
        assert_eq!(self.p, other.p);
        self.bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn key(&self) -> GraphKey {
        let nbytes = pair_count(self.p).div_ceil(8);
        let bytes = self.bits.iter().flat_map(|w| w.to_le_bytes()).take(nbytes).collect();
        GraphKey(bytes)
    }

    /// Raw bitset words; pairs beyond `pair_count(p)` are always zero.
    pub fn words(&self) -> &[u64] {
        &self.bits
    }

    fn check_pair(&self, a: usize, b: usize) -> Result<()> {
        for v in [a, b] {
            if v >= self.p {
                return Err(Error::VertexOutOfRange { vertex: v, p: self.p });
            }
        }
        if a == b {
            return Err(Error::SelfLoop(a));
        }
        Ok(())
    }

    fn bit(&self, i: usize) -> bool {
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    fn set_bit(&mut self, i: usize, on: bool) {
        if on {
            self.bits[i / 64] |= 1 << (i % 64);
        } else {
            self.bits[i / 64] &= !(1 << (i % 64));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn construction_cases() {
        let g = UndirectedGraph::from_edges(3, &[]).unwrap();
        assert_eq!(g.edge_count(), 0);

        let g = UndirectedGraph::from_edges(3, &[(0, 1), (1, 0)]).unwrap();
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));

        let all: Vec<_> = (0..8).flat_map(|a| ((a + 1)..8).map(move |b| (a, b))).collect();
        let g = UndirectedGraph::from_edges(8, &all).unwrap();
        assert_eq!(g.edge_count(), 28);
        assert_eq!(g, UndirectedGraph::complete(8));
    }

    #[test]
    fn construction_errors() {
        assert!(matches!(
            UndirectedGraph::from_edges(3, &[(0, 3)]),
            Err(Error::VertexOutOfRange { vertex: 3, p: 3 })
        ));
        assert!(matches!(
            UndirectedGraph::from_edges(3, &[(1, 1)]),
            Err(Error::SelfLoop(1))
        ));
        let mut g = UndirectedGraph::empty(3);
        assert!(g.toggle(2, 2).is_err());
    }

    #[test]
    fn toggle_cases() {
        let g = UndirectedGraph::empty(3);
        let g1 = g.toggled(0, 1).unwrap();
        assert_eq!(g1.edge_count(), 1);
        assert_eq!(g1.toggled(0, 1).unwrap(), g);
        assert_eq!(UndirectedGraph::complete(8).toggled(3, 6).unwrap().edge_count(), 27);
    }

    #[test]
    fn later_degree_cases() {
        let k4 = UndirectedGraph::complete(4);
        assert_eq!(k4.later_degree(0), 3);
        assert_eq!(k4.later_degree(3), 0);
        // path 1-2-3 in 1-based labels
        let path = UndirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        assert_eq!(path.later_degree(1), 1);
        assert_eq!(path.later_degree(0), 1);
        assert_eq!(path.later_degree(2), 0);
    }

    #[test]
    fn key_cases() {
        let e = UndirectedGraph::empty(3);
        assert_eq!(e.key().as_bytes(), &[0u8]);
        assert_eq!(e.key(), UndirectedGraph::empty(3).key());
        assert_ne!(e.key(), e.toggled(0, 2).unwrap().key());
    }

    #[test]
    fn pair_index_roundtrip() {
        for p in 2..12 {
            let g = UndirectedGraph::empty(p);
            let mut expected = 0;
            for a in 0..p {
                for b in (a + 1)..p {
                    assert_eq!(g.pair_index(a, b), expected);
                    assert_eq!(g.pair_index(b, a), expected);
                    assert_eq!(g.pair_from_index(expected), (a, b));
                    expected += 1;
                }
            }
            assert_eq!(expected, pair_count(p));
        }
    }

    fn arb_graph() -> impl Strategy<Value = UndirectedGraph> {
        (1usize..12).prop_flat_map(|p| {
            proptest::collection::vec(any::<bool>(), pair_count(p)).prop_map(move |bits| {
                let mut g = UndirectedGraph::empty(p);
                for (i, on) in bits.into_iter().enumerate() {
                    g.set_bit(i, on);
                }
                g
            })
        })
    }

    proptest! {
        #[test]
        fn toggle_is_an_involution(g in arb_graph(), a in 0usize..12, b in 0usize..12) {
            let p = g.p();
            prop_assume!(a < p && b < p && a != b);
            let g1 = g.toggled(a, b).unwrap();
            prop_assert_eq!(g1.hamming_distance(&g), 1);
            prop_assert_eq!(g1.toggled(b, a).unwrap(), g.clone());
            prop_assert_eq!(g1.neighborhood_size(), g.neighborhood_size());
        }

        #[test]
        fn toggling_differences_connects_graphs(g in arb_graph(), seed in any::<u64>()) {
            let mut rng = crate::rng::rng_from_seed(seed);
            let h = UndirectedGraph::random(g.p(), 0.5, &mut rng);
            let mut walk = g.clone();
            let mut steps = 0;
            for i in 0..pair_count(g.p()) {
                if g.bit(i) != h.bit(i) {
                    let (a, b) = g.pair_from_index(i);
                    walk.toggle(a, b).unwrap();
                    steps += 1;
                }
            }
            prop_assert_eq!(walk, h.clone());
            prop_assert_eq!(steps, g.hamming_distance(&h));
        }

        #[test]
        fn keys_are_injective(g in arb_graph(), seed in any::<u64>()) {
            let mut rng = crate::rng::rng_from_seed(seed);
            let h = UndirectedGraph::random(g.p(), 0.5, &mut rng);
            prop_assert_eq!(g.key() == h.key(), g == h);
        }
    }
}
