//! The three-step chain over latent data, precision matrices and graphs.
//!
//! One iteration resamples the latent data given `K` (Gibbs), then sweeps
//! every free element of the Cholesky factor with Metropolis–Hastings
//! moves, then proposes a single edge addition or deletion with a
//! reversible-jump move. All precision matrices are held through their
//! Cholesky factor, so every proposal lands in the cone of the current
//! graph by construction.

mod baseline;
mod runner;
mod steps;

pub use baseline::{copula_full_baseline, sample_wishart};
pub use runner::{
    cache_for, run_chain, run_chain_with_cache, run_chains, Chain, ChainDiagnostics, ChainOutput, RunOutput,
};
pub use steps::{
    log_ratio_add, log_ratio_delete, log_ratio_precision, step1_resample_latents, step2_resample_precision,
    step3_resample_graph, GraphProposal,
};

use nalgebra::DMatrix;

use crate::cholesky::{assemble_precision, in_cone, CholeskyFactor};
use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::latent::{LatentMatrix, ObservedData};
use crate::rng::ChainRng;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SamplerConfig {
    /// G-Wishart prior degrees of freedom.
    pub delta: f64,
    /// Proposal scale for the free elements of the Cholesky factor.
    pub sigma_p: f64,
    /// Proposal scale for the element created by an edge addition.
    pub sigma_g: f64,
    /// Total iterations per chain, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    /// Keep every `thin`-th post-burn-in `Υ` for the table estimators.
    pub thin: usize,
    pub chains: usize,
    pub master_seed: u64,
    /// Monte Carlo samples per normalizing-constant estimate.
    pub nc_samples: usize,
    /// Threshold for the streaming `|Υ| ≥ ε` tallies.
    pub epsilon: f64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            delta: 3.0,
            sigma_p: 0.1,
            sigma_g: 0.1,
            iterations: 10_000,
            burn_in: 1_000,
            thin: 25,
            chains: 1,
            master_seed: 1,
            nc_samples: 2_000,
            epsilon: crate::estimators::DEFAULT_EPSILON,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if !(self.delta > 2.0) {
            return fail(format!("delta must exceed 2, got {}", self.delta));
        }
        if !(self.sigma_p > 0.0 && self.sigma_p.is_finite()) {
            return fail(format!("sigma-p must be positive, got {}", self.sigma_p));
        }
        if !(self.sigma_g > 0.0 && self.sigma_g.is_finite()) {
            return fail(format!("sigma-g must be positive, got {}", self.sigma_g));
        }
        if self.burn_in > self.iterations {
            return fail(format!(
                "burn-in {} exceeds iterations {}",
                self.burn_in, self.iterations
            ));
        }
        if self.thin == 0 {
            return fail("thin must be at least 1".into());
        }
        if self.chains == 0 {
            return fail("chains must be at least 1".into());
        }
        if self.nc_samples == 0 {
            return fail("nc-samples must be at least 1".into());
        }
        if !(self.epsilon > 0.0) {
            return fail(format!("epsilon must be positive, got {}", self.epsilon));
        }
        Ok(())
    }
}

/// Acceptance tallies for one move type.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct MoveStats {
    pub proposed: u64,
    pub accepted: u64,
}

impl MoveStats {
    pub fn record(&mut self, accepted: bool) {
        self.proposed += 1;
        self.accepted += accepted as u64;
    }

    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    pub fn merge(&mut self, other: &MoveStats) {
        self.proposed += other.proposed;
        self.accepted += other.accepted;
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Acceptance {
    pub diagonal: MoveStats,
    pub off_diagonal: MoveStats,
    pub edge_add: MoveStats,
    pub edge_delete: MoveStats,
    /// Proposals rejected because completion produced non-finite values.
    pub completion_failures: u64,
}

impl Acceptance {
    pub fn merge(&mut self, other: &Acceptance) {
        self.diagonal.merge(&other.diagonal);
        self.off_diagonal.merge(&other.off_diagonal);
        self.edge_add.merge(&other.edge_add);
        self.edge_delete.merge(&other.edge_delete);
        self.completion_failures += other.completion_failures;
    }
}

/// Current state of one chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub(crate) graph: UndirectedGraph,
    pub(crate) phi: CholeskyFactor,
    pub(crate) k: DMatrix<f64>,
    pub(crate) latents: LatentMatrix,
    /// `D + Σ z zᵀ`.
    pub(crate) m: DMatrix<f64>,
    pub(crate) scale: DMatrix<f64>,
    pub(crate) iteration: u64,
    pub(crate) rng: ChainRng,
    scratch: DMatrix<f64>,
    row_q: Vec<f64>,
}

impl ChainState {
    /// Starts at `K = I` (which lies in every cone) with midpoint latents.
    pub fn new(data: &ObservedData, graph: UndirectedGraph, scale: DMatrix<f64>, rng: ChainRng) -> Result<Self> {
        let p = data.p();
        if graph.p() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: graph.p(),
            });
        }
        if scale.nrows() != p || scale.ncols() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: scale.nrows(),
            });
        }
        let latents = LatentMatrix::init(data);
        let m = &scale + latents.scatter();
        Ok(Self {
            graph,
            phi: CholeskyFactor::identity(p),
            k: DMatrix::identity(p, p),
            latents,
            m,
            scale,
            iteration: 0,
            rng,
            scratch: DMatrix::zeros(p, p),
            row_q: vec![0.0; p],
        })
    }

    /// Replaces the precision matrix; `phi` must be completed for the
    /// current graph.
    pub fn set_phi(&mut self, phi: CholeskyFactor) -> Result<()> {
        if phi.p() != self.graph.p() {
            return Err(Error::DimensionMismatch {
                expected: self.graph.p(),
                got: phi.p(),
            });
        }
        self.k = phi.precision();
        self.phi = phi;
        Ok(())
    }

    pub fn graph(&self) -> &UndirectedGraph {
        &self.graph
    }

    pub fn phi(&self) -> &CholeskyFactor {
        &self.phi
    }

    pub fn precision(&self) -> &DMatrix<f64> {
        &self.k
    }

    pub fn latents(&self) -> &LatentMatrix {
        &self.latents
    }

    pub fn iteration(&self) -> u64 {
        self.iteration
    }

    /// `Υ(K)`, the correlation matrix of `K⁻¹`.
    pub fn upsilon(&self) -> DMatrix<f64> {
        self.phi.correlation()
    }

    fn refresh_m(&mut self) {
        self.m = &self.scale + self.latents.scatter();
    }

    fn refresh_k(&mut self) {
        self.k = assemble_precision(self.phi.matrix());
    }

    /// Checks `K ∈ P_G`, `K = φᵀφ` and that latents respect the ranks.
    pub fn check_invariants(&self) -> Result<()> {
        if let Err(v) = in_cone(&self.k, &self.graph) {
            return Err(Error::Data(format!("precision left the cone: {v:?}")));
        }
        let rebuilt = assemble_precision(self.phi.matrix());
        let scale = self.k.amax().max(1.0);
        if (&rebuilt - &self.k).amax() > 1e-10 * scale {
            return Err(Error::Data("precision drifted from its Cholesky factor".into()));
        }
        if !self.latents.satisfies_constraints() {
            return Err(Error::Data("latent data violate the rank constraints".into()));
        }
        Ok(())
    }
}

/// `φ_i M φ_iᵀ` for row `i` of an upper-triangular `φ`.
pub(crate) fn row_quad(phi: &DMatrix<f64>, m: &DMatrix<f64>, i: usize) -> f64 {
    let p = phi.nrows();
    let mut s = 0.0;
    for a in i..p {
        let pa = phi[(i, a)];
        if pa == 0.0 {
            continue;
        }
        let mut t = 0.5 * m[(a, a)] * pa;
        for b in a + 1..p {
            t += m[(a, b)] * phi[(i, b)];
        }
        s += pa * t;
    }
    2.0 * s
}
