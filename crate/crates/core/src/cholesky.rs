//! Cholesky parameterization of the cone `P_G` of positive definite matrices
//! with zeros at the non-edges of `G`.
//!
//! Every `K ∈ P_G` factors as `K = φᵀφ` with `φ` upper triangular and a
//! positive diagonal. Only the diagonal and the entries at edge positions of
//! `φ` are free; the remaining entries are determined by the completion
//! recursion, which forces `K` to vanish at every non-edge.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;

/// Zero-pattern tolerance used by [`in_cone`].
pub const ZERO_TOL: f64 = 1e-10;

/// Free positions of `φ`: diagonal pairs in vertex order, then edge pairs
/// `(lo, hi)` in row-major order. Length `p + |E|`.
pub fn free_elements(g: &UndirectedGraph) -> Vec<(usize, usize)> {
    let mut out: Vec<_> = (0..g.p()).map(|v| (v, v)).collect();
    out.extend(g.edges());
    out
}

/// Upper-triangular Cholesky factor of a precision matrix in `P_G`.
#[derive(Clone, Debug, PartialEq)]
pub struct CholeskyFactor {
    phi: DMatrix<f64>,
}

impl CholeskyFactor {
    pub fn identity(p: usize) -> Self {
        Self {
            phi: DMatrix::identity(p, p),
        }
    }

    /// Builds a completed factor from values on `free_elements(g)`.
    pub fn from_free(values: &[f64], g: &UndirectedGraph) -> Result<Self> {
        let free = free_elements(g);
        if values.len() != free.len() {
            return Err(Error::DimensionMismatch {
                expected: free.len(),
                got: values.len(),
            });
        }
        let p = g.p();
        let mut phi = DMatrix::zeros(p, p);
        for (&(i, j), &x) in free.iter().zip(values) {
            phi[(i, j)] = x;
        }
        Self::complete(phi, g)
    }

    /// Completes an upper-triangular matrix whose free entries (w.r.t. `g`)
    /// are set; entries below the diagonal and at non-free positions are
    /// overwritten.
    pub fn complete(mut phi: DMatrix<f64>, g: &UndirectedGraph) -> Result<Self> {
        let p = g.p();
        if phi.nrows() != p || phi.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: phi.nrows(),
            });
        }
        for v in 0..p {
            let d = phi[(v, v)];
            if !(d > 0.0) {
                return Err(Error::NonPositiveDiagonal { index: v, value: d });
            }
            for r in (v + 1)..p {
                phi[(r, v)] = 0.0;
            }
        }
        complete_columns(&mut phi, g, 0);
        Ok(Self { phi })
    }

    /// Cholesky factor of a positive definite `k`, with `k = φᵀφ`.
    pub fn from_precision(k: &DMatrix<f64>) -> Result<Self> {
        let chol = nalgebra::Cholesky::new(k.clone()).ok_or(Error::NotPositiveDefinite)?;
        Ok(Self {
            phi: chol.l().transpose(),
        })
    }

    pub fn p(&self) -> usize {
        self.phi.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub(crate) fn matrix_mut(&mut self) -> &mut DMatrix<f64> {
        &mut self.phi
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.phi[(i, j)]
    }

    /// Values at `free_elements(g)`.
    pub fn free_values(&self, g: &UndirectedGraph) -> Vec<f64> {
        free_elements(g).iter().map(|&(i, j)| self.phi[(i, j)]).collect()
    }

    /// `log det K = 2 Σ log φ_vv`.
    pub fn log_det_precision(&self) -> f64 {
        2.0 * (0..self.p()).map(|v| self.phi[(v, v)].ln()).sum::<f64>()
    }

    /// `K = φᵀφ`.
    pub fn precision(&self) -> DMatrix<f64> {
        assemble_precision(&self.phi)
    }

    /// Correlation matrix of `K⁻¹`, computed through `φ⁻¹` so no general
    /// inverse is needed.
    pub fn correlation(&self) -> DMatrix<f64> {
        let p = self.p();
        let inv = upper_triangular_inverse(&self.phi);
        // Σ = K⁻¹ = φ⁻¹ φ⁻ᵀ; Σ_ij = Σ_k inv[i,k] inv[j,k] over k ≥ max(i,j).
        let mut sigma = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in i..p {
                let mut s = 0.0;
                for k in j..p {
                    s += inv[(i, k)] * inv[(j, k)];
                }
                sigma[(i, j)] = s;
                sigma[(j, i)] = s;
            }
        }
        covariance_to_correlation(&sigma)
    }
}

/// Fills the non-free entries of columns `start..p` of `phi`, assuming
/// columns before `start` are final. Columns are processed left to right
/// and rows top to bottom, so every entry only reads finalized values.
pub(crate) fn complete_columns(phi: &mut DMatrix<f64>, g: &UndirectedGraph, start: usize) {
    let p = g.p();
    for j in start.max(1)..p {
        if !g.has_edge(0, j) {
            phi[(0, j)] = 0.0;
        }
        for i in 1..j {
            if g.has_edge(i, j) {
                continue;
            }
            let mut s = 0.0;
            for k in 0..i {
                s += phi[(k, i)] * phi[(k, j)];
            }
            phi[(i, j)] = -s / phi[(i, i)];
        }
    }
}

/// `φᵀφ` for an upper-triangular `φ`.
pub fn assemble_precision(phi: &DMatrix<f64>) -> DMatrix<f64> {
    let p = phi.nrows();
    let mut k = DMatrix::zeros(p, p);
    for i in 0..p {
        for j in i..p {
            let mut s = 0.0;
            for r in 0..=i {
                s += phi[(r, i)] * phi[(r, j)];
            }
            k[(i, j)] = s;
            k[(j, i)] = s;
        }
    }
    k
}

/// `log J(K → φ) = p log 2 + Σ_v (d_v + 1) log φ_vv`, where `d_v` counts the
/// neighbours of `v` with a larger index.
pub fn log_jacobian(phi: &CholeskyFactor, g: &UndirectedGraph) -> Result<f64> {
    let p = g.p();
    let mut total = p as f64 * std::f64::consts::LN_2;
    for v in 0..p {
        let d = phi.get(v, v);
        if !(d > 0.0) {
            return Err(Error::NonPositiveDiagonal { index: v, value: d });
        }
        total += (g.later_degree(v) as f64 + 1.0) * d.ln();
    }
    Ok(total)
}

/// Inverse of an upper-triangular matrix with nonzero diagonal.
pub(crate) fn upper_triangular_inverse(u: &DMatrix<f64>) -> DMatrix<f64> {
    let p = u.nrows();
    let mut inv = DMatrix::zeros(p, p);
    for j in 0..p {
        inv[(j, j)] = 1.0 / u[(j, j)];
        for i in (0..j).rev() {
            let mut s = 0.0;
            for k in (i + 1)..=j {
                s += u[(i, k)] * inv[(k, j)];
            }
            inv[(i, j)] = -s / u[(i, i)];
        }
    }
    inv
}

pub fn covariance_to_correlation(sigma: &DMatrix<f64>) -> DMatrix<f64> {
    let p = sigma.nrows();
    let sd: Vec<f64> = (0..p).map(|i| sigma[(i, i)].sqrt()).collect();
    let mut r = DMatrix::identity(p, p);
    for i in 0..p {
        for j in (i + 1)..p {
            let x = (sigma[(i, j)] / (sd[i] * sd[j])).clamp(-1.0, 1.0);
            r[(i, j)] = x;
            r[(j, i)] = x;
        }
    }
    r
}

/// The correlation matrix `Υ(K)` with entries `(K⁻¹)_ij / sqrt((K⁻¹)_ii (K⁻¹)_jj)`.
pub fn correlation_from_precision(k: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    Ok(CholeskyFactor::from_precision(k)?.correlation())
}

#[derive(Debug, Clone, PartialEq)]
pub enum ConeViolation {
    NotSquare,
    DimensionMismatch,
    Asymmetric { i: usize, j: usize, diff: f64 },
    NotPositiveDefinite,
    NonEdgeEntry { i: usize, j: usize, value: f64 },
}

/// Membership test for `P_G`: symmetric, zero at non-edges (both within
/// [`ZERO_TOL`]) and positive definite by a successful Cholesky.
pub fn in_cone(k: &DMatrix<f64>, g: &UndirectedGraph) -> std::result::Result<(), ConeViolation> {
    if k.nrows() != k.ncols() {
        return Err(ConeViolation::NotSquare);
    }
    if k.nrows() != g.p() {
        return Err(ConeViolation::DimensionMismatch);
    }
    let p = g.p();
    for i in 0..p {
        for j in (i + 1)..p {
            let diff = (k[(i, j)] - k[(j, i)]).abs();
            if diff > ZERO_TOL {
                return Err(ConeViolation::Asymmetric { i, j, diff });
            }
            if !g.has_edge(i, j) && k[(i, j)].abs() > ZERO_TOL {
                return Err(ConeViolation::NonEdgeEntry { i, j, value: k[(i, j)] });
            }
        }
    }
    if nalgebra::Cholesky::new(k.clone()).is_none() {
        return Err(ConeViolation::NotPositiveDefinite);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::Rng;

    use crate::rng::rng_from_seed;

    fn g(p: usize, edges: &[(usize, usize)]) -> UndirectedGraph {
        UndirectedGraph::from_edges(p, edges).unwrap()
    }

    #[test]
    fn free_element_order() {
        assert_eq!(free_elements(&g(3, &[])), vec![(0, 0), (1, 1), (2, 2)]);
        assert_eq!(
            free_elements(&UndirectedGraph::complete(2)),
            vec![(0, 0), (1, 1), (0, 1)]
        );
        assert_eq!(free_elements(&g(3, &[(0, 2)])), vec![(0, 0), (1, 1), (2, 2), (0, 2)]);
    }

    #[test]
    fn completion_on_complete_graph_is_identity() {
        let k4 = UndirectedGraph::complete(4);
        let vals: Vec<f64> = (0..10).map(|i| 0.3 + 0.1 * i as f64).collect();
        let phi = CholeskyFactor::from_free(&vals, &k4).unwrap();
        assert_eq!(phi.free_values(&k4), vals);
    }

    #[test]
    fn completion_small_cases() {
        let phi = CholeskyFactor::from_free(&[1.0, 2.0], &g(2, &[])).unwrap();
        assert_eq!(phi.get(0, 1), 0.0);
        let k = phi.precision();
        assert_eq!(k, DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 4.0]));

        let path = g(3, &[(0, 1), (1, 2)]);
        let phi = CholeskyFactor::from_free(&[1.0, 1.0, 1.0, 0.5, 0.3], &path).unwrap();
        assert_eq!(phi.get(0, 2), 0.0);
        let k = phi.precision();
        assert_abs_diff_eq!(k[(0, 2)], 0.0, epsilon = 1e-15);
        assert!(in_cone(&k, &path).is_ok());

        // star centred at vertex 0: (1,2) is non-free but not in the first row
        let star = g(3, &[(0, 1), (0, 2)]);
        let phi = CholeskyFactor::from_free(&[1.0, 2.0, 1.5, 0.5, -0.7], &star).unwrap();
        assert_abs_diff_eq!(phi.get(1, 2), 0.5 * 0.7 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(phi.precision()[(1, 2)], 0.0, epsilon = 1e-15);
    }

    #[test]
    fn completion_rejects_nonpositive_diagonal() {
        assert!(matches!(
            CholeskyFactor::from_free(&[1.0, 0.0], &g(2, &[])),
            Err(Error::NonPositiveDiagonal { index: 1, .. })
        ));
    }

    #[test]
    fn assembly_cases() {
        assert_eq!(CholeskyFactor::identity(3).precision(), DMatrix::identity(3, 3));
        let mut rng = rng_from_seed(11);
        let gr = UndirectedGraph::random(4, 0.5, &mut rng);
        let phi = random_factor(&gr, &mut rng);
        let k = phi.precision();
        let naive = phi.matrix().transpose() * phi.matrix();
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(k[(i, j)], naive[(i, j)], epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn log_jacobian_cases() {
        let k = 3.0f64;
        let phi = CholeskyFactor::from_free(&[k.sqrt()], &g(1, &[])).unwrap();
        let lj = log_jacobian(&phi, &g(1, &[])).unwrap();
        assert_abs_diff_eq!(lj, (2.0 * k.sqrt()).ln(), epsilon = 1e-14);

        let id2 = CholeskyFactor::identity(2);
        assert_abs_diff_eq!(
            log_jacobian(&id2, &UndirectedGraph::complete(2)).unwrap(),
            2.0 * 2f64.ln(),
            epsilon = 1e-14
        );
        let id3 = CholeskyFactor::identity(3);
        assert_abs_diff_eq!(
            log_jacobian(&id3, &g(3, &[])).unwrap(),
            3.0 * 2f64.ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn correlation_cases() {
        let id = DMatrix::<f64>::identity(3, 3);
        assert_eq!(correlation_from_precision(&id).unwrap(), id);
        let scaled = DMatrix::<f64>::identity(3, 3) * 7.5;
        let r = correlation_from_precision(&scaled).unwrap();
        assert_abs_diff_eq!(r, id, epsilon = 1e-15);

        let k = DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 2.0]);
        let r = correlation_from_precision(&k).unwrap();
        assert_abs_diff_eq!(r[(0, 1)], 0.5, epsilon = 1e-14);
        assert_abs_diff_eq!(r[(1, 0)], 0.5, epsilon = 1e-14);

        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(
            correlation_from_precision(&bad),
            Err(Error::NotPositiveDefinite)
        ));
    }

    #[test]
    fn cone_membership_cases() {
        let id = DMatrix::<f64>::identity(2, 2);
        assert!(in_cone(&id, &g(2, &[])).is_ok());
        assert!(in_cone(&id, &UndirectedGraph::complete(2)).is_ok());
        let k = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        assert!(matches!(
            in_cone(&k, &g(2, &[])),
            Err(ConeViolation::NonEdgeEntry { i: 0, j: 1, .. })
        ));
        let asym = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.4, 1.0]);
        assert!(matches!(
            in_cone(&asym, &UndirectedGraph::complete(2)),
            Err(ConeViolation::Asymmetric { .. })
        ));
        let indefinite = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert_eq!(
            in_cone(&indefinite, &UndirectedGraph::complete(2)),
            Err(ConeViolation::NotPositiveDefinite)
        );
    }

    pub(crate) fn random_factor<R: Rng>(gr: &UndirectedGraph, rng: &mut R) -> CholeskyFactor {
        let free = free_elements(gr);
        let vals: Vec<f64> = free
            .iter()
            .map(|&(i, j)| {
                if i == j {
                    rng.random_range(0.5..2.0)
                } else {
                    rng.random_range(-1.0..1.0)
                }
            })
            .collect();
        CholeskyFactor::from_free(&vals, gr).unwrap()
    }

    proptest! {
        #[test]
        fn completion_lands_in_cone_and_round_trips(p in 1usize..7, seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let gr = UndirectedGraph::random(p, 0.5, &mut rng);
            let phi = random_factor(&gr, &mut rng);
            let k = phi.precision();
            prop_assert!(in_cone(&k, &gr).is_ok());

            let back = CholeskyFactor::from_precision(&k).unwrap();
            let again = CholeskyFactor::from_free(&back.free_values(&gr), &gr).unwrap();
            for i in 0..p {
                for j in 0..p {
                    prop_assert!((again.get(i, j) - phi.get(i, j)).abs() <= 1e-10);
                }
            }

            let det = k.clone().determinant();
            let rel = (phi.log_det_precision().exp() - det).abs() / det;
            prop_assert!(rel < 1e-8);
        }

        #[test]
        fn correlation_via_factor_matches_dense_inverse(p in 1usize..7, seed in any::<u64>()) {
            let mut rng = rng_from_seed(seed);
            let gr = UndirectedGraph::random(p, 0.5, &mut rng);
            let phi = random_factor(&gr, &mut rng);
            let sigma = phi.precision().try_inverse().unwrap();
            let dense = covariance_to_correlation(&sigma);
            let r = phi.correlation();
            for i in 0..p {
                prop_assert!((r[(i, i)] - 1.0).abs() < 1e-12);
                for j in 0..p {
                    prop_assert!((r[(i, j)] - dense[(i, j)]).abs() < 1e-9);
                    prop_assert!(r[(i, j)].abs() <= 1.0);
                }
            }
        }
    }
}
