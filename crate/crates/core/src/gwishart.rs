//! G-Wishart densities and normalizing constants `I_G(δ, D)`.
//!
//! The density of `W_G(δ, D)` with respect to Lebesgue measure on `P_G` is
//! `det(K)^{(δ-2)/2} exp(-½⟨K, D⟩) / I_G(δ, D)`. On the complete graph
//! `I_G` has a closed form; for every other graph it is estimated by Monte
//! Carlo after changing variables from `K` to the free elements of its
//! Cholesky factor. Only prior constants (`D = I_p`) are ever needed by
//! the sampler, and only that case is supported by the estimator.

use std::collections::HashMap;
use std::f64::consts::{LN_2, PI};
use std::sync::RwLock;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::cholesky::in_cone;
use crate::error::{Error, Result};
use crate::graph::{GraphKey, UndirectedGraph};
use crate::rng::{derive_seed, rng_from_seed, TAG_NORMALIZING_CONSTANT};

#[derive(Clone, Debug, PartialEq)]
pub struct GWishartParams {
    delta: f64,
    d: DMatrix<f64>,
}

impl GWishartParams {
    pub fn new(delta: f64, d: DMatrix<f64>) -> Result<Self> {
        if !(delta > 2.0) {
            return Err(Error::Config(format!(
                "G-Wishart degrees of freedom must exceed 2, got {delta}"
            )));
        }
        if !d.is_square() || nalgebra::Cholesky::new(d.clone()).is_none() {
            return Err(Error::Config("G-Wishart scale matrix must be positive definite".into()));
        }
        Ok(Self { delta, d })
    }

    /// `W_G(δ, I_p)`.
    pub fn identity_scale(p: usize, delta: f64) -> Result<Self> {
        Self::new(delta, DMatrix::identity(p, p))
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn scale(&self) -> &DMatrix<f64> {
        &self.d
    }

    pub fn p(&self) -> usize {
        self.d.nrows()
    }

    fn has_identity_scale(&self) -> bool {
        self.d == DMatrix::identity(self.p(), self.p())
    }

    /// Posterior parameters `(δ + n, D + U)` after observing a scatter `U` of `n` samples.
    pub fn posterior(&self, n: usize, scatter: &DMatrix<f64>) -> Self {
        Self {
            delta: self.delta + n as f64,
            d: &self.d + scatter,
        }
    }
}

/// `((δ-2)/2) log det K - ½⟨K, D⟩`; adding `-log I_G(δ, D)` normalizes it.
pub fn log_density_unnorm(k: &DMatrix<f64>, params: &GWishartParams, g: &UndirectedGraph) -> Result<f64> {
    if let Err(v) = in_cone(k, g) {
        return Err(Error::Data(format!("precision matrix outside P_G: {v:?}")));
    }
    let chol = nalgebra::Cholesky::new(k.clone()).ok_or(Error::NotPositiveDefinite)?;
    let log_det = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let trace = k.component_mul(&params.d).sum();
    Ok(0.5 * (params.delta - 2.0) * log_det - 0.5 * trace)
}

/// `log Γ_p(a) = p(p-1)/4 log π + Σ_{i<p} log Γ(a - i/2)`.
pub fn log_multivariate_gamma(p: usize, a: f64) -> f64 {
    let pf = p as f64;
    pf * (pf - 1.0) / 4.0 * PI.ln() + (0..p).map(|i| ln_gamma(a - i as f64 / 2.0)).sum::<f64>()
}

/// Closed-form `log I_G(δ, D)` for the complete graph on `p` vertices.
pub fn log_norm_complete(p: usize, delta: f64, d: &DMatrix<f64>) -> Result<f64> {
    if !(delta > 2.0) {
        return Err(Error::Config(format!("degrees of freedom must exceed 2, got {delta}")));
    }
    let chol = nalgebra::Cholesky::new(d.clone()).ok_or(Error::NotPositiveDefinite)?;
    let log_det_d = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
    let a = (delta + p as f64 - 1.0) / 2.0;
    Ok(a * p as f64 * LN_2 + log_multivariate_gamma(p, a) - a * log_det_d)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormConstEstimate {
    pub log_value: f64,
    /// Delta-method standard error of `log_value`.
    pub std_error: f64,
}

/// Monte Carlo estimate of `log I_G(δ, I_p)`.
///
/// Writing `K = φᵀφ` and integrating over the free elements gives
/// `I_G = Π_v 2^{(δ+d_v)/2} Γ((δ+d_v)/2) · (2π)^{|E|/2} · E[exp(-½ Σ φ_ij²)]`,
/// the sum running over the non-free positions, with free diagonals drawn
/// from `χ(δ + d_v)`, free off-diagonals from `N(0, 1)` and the rest filled
/// in by completion. On the complete graph the expectation is exactly one.
pub fn log_norm_mc<R: Rng + ?Sized>(
    g: &UndirectedGraph,
    params: &GWishartParams,
    mc_samples: usize,
    rng: &mut R,
) -> Result<NormConstEstimate> {
    if params.p() != g.p() {
        return Err(Error::DimensionMismatch {
            expected: g.p(),
            got: params.p(),
        });
    }
    if !params.has_identity_scale() {
        return Err(Error::Unsupported(
            "Monte Carlo normalizing constants are only implemented for D = I".into(),
        ));
    }
    if mc_samples == 0 {
        return Err(Error::Config("need at least one Monte Carlo sample".into()));
    }
    let p = g.p();
    let delta = params.delta;
    let degrees: Vec<usize> = (0..p).map(|v| g.later_degree(v)).collect();
    let mut log_const = g.edge_count() as f64 / 2.0 * (2.0 * PI).ln();
    for &d in &degrees {
        let a = (delta + d as f64) / 2.0;
        log_const += a * LN_2 + ln_gamma(a);
    }

    let plan = CompletionPlan::new(g);
    // Structurally zero completions contribute exp(0) to every sample.
    if plan.steps.is_empty() {
        return Ok(NormConstEstimate {
            log_value: log_const,
            std_error: 0.0,
        });
    }

    let chi_sq: Vec<Option<Gamma<f64>>> = (0..p)
        .map(|v| {
            plan.divisor[v].then(|| Gamma::new((delta + degrees[v] as f64) / 2.0, 2.0).expect("valid gamma parameters"))
        })
        .collect();
    let edges: Vec<usize> = g.edges().map(|(i, j)| i * p + j).collect();
    let mut phi = vec![0.0; p * p];
    let mut log_w = Vec::with_capacity(mc_samples);
    for _ in 0..mc_samples {
        for (v, chi) in chi_sq.iter().enumerate() {
            if let Some(chi) = chi {
                phi[v * p + v] = chi.sample(rng).sqrt();
            }
        }
        for &e in &edges {
            phi[e] = StandardNormal.sample(rng);
        }
        let mut s = 0.0;
        for step in &plan.steps {
            let mut acc = 0.0;
            for &(a, b) in &step.terms {
                acc += phi[a] * phi[b];
            }
            let x = -acc / phi[step.diag];
            phi[step.target] = x;
            s += x * x;
        }
        log_w.push(-0.5 * s);
    }
    let max = log_w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let n = mc_samples as f64;
    let scaled: Vec<f64> = log_w.iter().map(|&x| (x - max).exp()).collect();
    let mean = scaled.iter().sum::<f64>() / n;
    let var = if mc_samples > 1 {
        scaled.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(NormConstEstimate {
        log_value: log_const + max + mean.ln(),
        std_error: var.sqrt() / (n.sqrt() * mean),
    })
}

/// Completion of the non-free entries that are not identically zero,
/// in the order the recursion needs them, over a row-major `p × p` buffer.
struct CompletionPlan {
    steps: Vec<CompletionStep>,
    /// Whether `φ_vv` is ever a divisor.
    divisor: Vec<bool>,
}

struct CompletionStep {
    target: usize,
    diag: usize,
    /// Index pairs `(k·p + i, k·p + j)` of products that can be nonzero.
    terms: Vec<(usize, usize)>,
}

impl CompletionPlan {
    fn new(g: &UndirectedGraph) -> Self {
        let p = g.p();
        // nonzero[i][j] for i < j: free, or completed from a nonzero product
        let mut nonzero = vec![false; p * p];
        let mut steps = Vec::new();
        let mut divisor = vec![false; p];
        for j in 1..p {
            nonzero[j] = g.has_edge(0, j);
            for i in 1..j {
                if g.has_edge(i, j) {
                    nonzero[i * p + j] = true;
                    continue;
                }
                let terms: Vec<(usize, usize)> = (0..i)
                    .filter(|&k| nonzero[k * p + i] && nonzero[k * p + j])
                    .map(|k| (k * p + i, k * p + j))
                    .collect();
                if !terms.is_empty() {
                    nonzero[i * p + j] = true;
                    divisor[i] = true;
                    steps.push(CompletionStep {
                        target: i * p + j,
                        diag: i * p + i,
                        terms,
                    });
                }
            }
        }
        Self { steps, divisor }
    }
}

/// Per-run memo of `log I_G(δ, I_p)`, shared by all chains.
///
/// The first request for a graph estimates the constant with a seed derived
/// from the master seed and the graph key, so a graph always gets the same
/// value within a run no matter which chain asks first. With caching
/// disabled the value is recomputed from the same seed, hence identical.
#[derive(Debug)]
pub struct NormConstCache {
    params: GWishartParams,
    mc_samples: usize,
    master_seed: u64,
    enabled: bool,
    map: RwLock<HashMap<GraphKey, f64>>,
}

impl NormConstCache {
    pub fn new(p: usize, delta: f64, mc_samples: usize, master_seed: u64) -> Result<Self> {
        if mc_samples == 0 {
            return Err(Error::Config("nc-samples must be at least 1".into()));
        }
        Ok(Self {
            params: GWishartParams::identity_scale(p, delta)?,
            mc_samples,
            master_seed,
            enabled: true,
            map: RwLock::new(HashMap::new()),
        })
    }

    pub fn disabled(mut self) -> Self {
        self.enabled = false;
        self
    }

    pub fn params(&self) -> &GWishartParams {
        &self.params
    }

    pub fn log_norm(&self, g: &UndirectedGraph) -> f64 {
        let key = g.key();
        if self.enabled {
            if let Some(&v) = self.map.read().expect("cache lock poisoned").get(&key) {
                return v;
            }
        }
        let mut rng = rng_from_seed(derive_seed(self.master_seed, TAG_NORMALIZING_CONSTANT, key.as_bytes()));
        let v = log_norm_mc(g, &self.params, self.mc_samples, &mut rng)
            .expect("cache parameters are validated at construction")
            .log_value;
        if self.enabled {
            self.map.write().expect("cache lock poisoned").entry(key).or_insert(v);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("cache lock poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sparse_completion_plan_matches_dense_completion() {
        use crate::cholesky::complete_columns;
        let mut rng = rng_from_seed(77);
        for _ in 0..200 {
            let p = rng.random_range(2..8);
            let g = UndirectedGraph::random(p, 0.4, &mut rng);
            let plan = CompletionPlan::new(&g);
            let mut dense = DMatrix::<f64>::zeros(p, p);
            for v in 0..p {
                dense[(v, v)] = rng.random_range(0.5..2.0);
            }
            for (i, j) in g.edges() {
                dense[(i, j)] = rng.random_range(-1.0..1.0);
            }
            let mut flat: Vec<f64> = (0..p * p).map(|k| dense[(k / p, k % p)]).collect();
            complete_columns(&mut dense, &g, 0);
            let mut sparse_sum = 0.0;
            for step in &plan.steps {
                let acc: f64 = step.terms.iter().map(|&(a, b)| flat[a] * flat[b]).sum();
                flat[step.target] = -acc / flat[step.diag];
                sparse_sum += flat[step.target] * flat[step.target];
            }
            let mut dense_sum = 0.0;
            for i in 0..p {
                for j in i + 1..p {
                    if !g.has_edge(i, j) {
                        dense_sum += dense[(i, j)] * dense[(i, j)];
                    }
                }
            }
            assert!((sparse_sum - dense_sum).abs() < 1e-12 * (1.0 + dense_sum));
        }
    }
    use approx::assert_abs_diff_eq;

    use crate::rng::rng_from_seed;

    #[test]
    fn unnormalized_density_cases() {
        for p in 1..5 {
            let params = GWishartParams::identity_scale(p, 3.0).unwrap();
            let k = DMatrix::identity(p, p);
            let v = log_density_unnorm(&k, &params, &UndirectedGraph::empty(p)).unwrap();
            assert_abs_diff_eq!(v, -(p as f64) / 2.0, epsilon = 1e-14);
        }
        let params = GWishartParams::identity_scale(2, 3.0).unwrap();
        let k = DMatrix::identity(2, 2) * 2.0;
        let v = log_density_unnorm(&k, &params, &UndirectedGraph::empty(2)).unwrap();
        assert_abs_diff_eq!(v, 2f64.ln() - 2.0, epsilon = 1e-14);

        let outside = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 1.0]);
        assert!(log_density_unnorm(&outside, &params, &UndirectedGraph::empty(2)).is_err());

        // posterior kernel is the prior kernel with (δ + n, D + U)
        let u = DMatrix::from_row_slice(2, 2, &[3.0, 1.0, 1.0, 2.0]);
        let post = params.posterior(5, &u);
        assert_eq!(post.delta(), 8.0);
        let k = DMatrix::from_row_slice(2, 2, &[1.5, -0.4, -0.4, 0.9]);
        let g = UndirectedGraph::complete(2);
        let det: f64 = 1.5 * 0.9 - 0.16;
        let expected = 3.0 * det.ln() - 0.5 * (1.5 * 4.0 + 0.9 * 3.0 - 0.8 * 1.0);
        assert_abs_diff_eq!(log_density_unnorm(&k, &post, &g).unwrap(), expected, epsilon = 1e-13);
    }

    #[test]
    fn complete_graph_closed_form() {
        let id2 = DMatrix::identity(2, 2);
        assert_abs_diff_eq!(
            log_norm_complete(2, 3.0, &id2).unwrap(),
            (8.0 * PI).ln(),
            epsilon = 1e-13
        );
        // p = 1: 2^{3/2} Γ(3/2) = √(2π)
        let id1 = DMatrix::identity(1, 1);
        assert_abs_diff_eq!(
            log_norm_complete(1, 3.0, &id1).unwrap(),
            (2.0 * PI).sqrt().ln(),
            epsilon = 1e-13
        );
        let c = 2.5;
        let p = 3;
        let delta = 4.0;
        let base = log_norm_complete(p, delta, &DMatrix::identity(p, p)).unwrap();
        let scaled = log_norm_complete(p, delta, &(DMatrix::identity(p, p) * c)).unwrap();
        let shift = -(delta + p as f64 - 1.0) * p as f64 / 2.0 * c.ln();
        assert_abs_diff_eq!(scaled - base, shift, epsilon = 1e-12);
        assert!(log_norm_complete(2, 2.0, &id2).is_err());
    }

    #[test]
    fn empty_graph_is_exact() {
        let mut rng = rng_from_seed(1);
        for p in 1..7 {
            let params = GWishartParams::identity_scale(p, 3.0).unwrap();
            let est = log_norm_mc(&UndirectedGraph::empty(p), &params, 10, &mut rng).unwrap();
            assert_abs_diff_eq!(est.log_value, p as f64 * (2.0 * PI).sqrt().ln(), epsilon = 1e-12);
            assert_eq!(est.std_error, 0.0);
            // p independent copies of the one-vertex constant
            let one = log_norm_complete(1, 3.0, &DMatrix::identity(1, 1)).unwrap();
            assert_abs_diff_eq!(est.log_value, p as f64 * one, epsilon = 1e-12);
        }
    }

    #[test]
    fn complete_graph_mc_matches_closed_form() {
        let mut rng = rng_from_seed(2);
        for p in 1..7 {
            let params = GWishartParams::identity_scale(p, 3.0).unwrap();
            let est = log_norm_mc(&UndirectedGraph::complete(p), &params, 100, &mut rng).unwrap();
            let exact = log_norm_complete(p, 3.0, params.scale()).unwrap();
            assert_abs_diff_eq!(est.log_value, exact, epsilon = 1e-10);
        }
    }

    #[test]
    fn relabelled_graphs_share_their_constant() {
        // the star 2-1-3 is the path 1-2-3 with vertices relabelled; only the
        // star has a non-trivial completion
        let params = GWishartParams::identity_scale(3, 3.0).unwrap();
        let path = UndirectedGraph::from_edges(3, &[(0, 1), (1, 2)]).unwrap();
        let star = UndirectedGraph::from_edges(3, &[(0, 1), (0, 2)]).unwrap();
        let mut rng = rng_from_seed(3);
        let a = log_norm_mc(&path, &params, 1000, &mut rng).unwrap();
        assert_eq!(a.std_error, 0.0);
        let b = log_norm_mc(&star, &params, 100_000, &mut rng).unwrap();
        assert!(b.std_error > 0.0);
        assert!(
            (a.log_value - b.log_value).abs() < 3.0 * b.std_error + 1e-3,
            "{a:?} {b:?}"
        );
    }

    #[test]
    fn std_error_shrinks_with_samples() {
        let params = GWishartParams::identity_scale(4, 3.0).unwrap();
        let cycle = UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let mut rng = rng_from_seed(4);
        let small = log_norm_mc(&cycle, &params, 5_000, &mut rng).unwrap();
        let large = log_norm_mc(&cycle, &params, 20_000, &mut rng).unwrap();
        let ratio = small.std_error / large.std_error;
        assert!((1.6..2.5).contains(&ratio), "ratio {ratio}");
        assert!((small.log_value - large.log_value).abs() < 3.0 * small.std_error);
    }

    #[test]
    fn non_identity_scale_is_unsupported() {
        let d = DMatrix::identity(2, 2) * 2.0;
        let params = GWishartParams::new(3.0, d).unwrap();
        let mut rng = rng_from_seed(0);
        assert!(matches!(
            log_norm_mc(&UndirectedGraph::empty(2), &params, 10, &mut rng),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn cache_is_deterministic() {
        let cache = NormConstCache::new(4, 3.0, 500, 99).unwrap();
        let g = UndirectedGraph::from_edges(4, &[(0, 1), (0, 2), (1, 3), (2, 3)]).unwrap();
        let a = cache.log_norm(&g);
        let b = cache.log_norm(&g);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(cache.len(), 1);

        let uncached = NormConstCache::new(4, 3.0, 500, 99).unwrap().disabled();
        assert_eq!(uncached.log_norm(&g).to_bits(), a.to_bits());
        assert_eq!(uncached.len(), 0);

        let h = g.toggled(0, 3).unwrap();
        let c = cache.log_norm(&h);
        assert_ne!(a, c);
        assert_eq!(cache.len(), 2);
        for e in [(0, 1), (1, 2), (2, 3), (0, 3), (0, 2), (1, 3)] {
            let n = g.toggled(e.0, e.1).unwrap();
            let ratio = cache.log_norm(&g) - cache.log_norm(&n);
            assert!(ratio.is_finite());
        }
    }
}
