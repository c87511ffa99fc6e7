//! Fixed complete-graph baseline: Step 3 is skipped and Step 2 becomes a
//! direct draw from the conjugate Wishart posterior.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

use super::runner::{run_all, Mode, RunOutput};
use super::{ChainState, SamplerConfig};
use crate::cholesky::CholeskyFactor;
use crate::error::{Error, Result};
use crate::latent::ObservedData;

/// Draws `K ~ W(df, Σ₀)` in the standard parameterization (`E[K] = df Σ₀`)
/// via the Bartlett decomposition. Requires `df > p - 1`.
pub fn sample_wishart<R: Rng + ?Sized>(df: f64, sigma0: &DMatrix<f64>, rng: &mut R) -> Result<DMatrix<f64>> {
    let p = sigma0.nrows();
    if !(df > p as f64 - 1.0) {
        return Err(Error::Config(format!(
            "Wishart degrees of freedom {df} must exceed {}",
            p as f64 - 1.0
        )));
    }
    let l = nalgebra::Cholesky::new(sigma0.clone())
        .ok_or(Error::NotPositiveDefinite)?
        .l();
    let mut a = DMatrix::zeros(p, p);
    for i in 0..p {
        let chi2 = Gamma::new((df - i as f64) / 2.0, 2.0)
            .expect("positive shape")
            .sample(rng);
        a[(i, i)] = chi2.sqrt();
        for j in 0..i {
            a[(i, j)] = StandardNormal.sample(rng);
        }
    }
    let la = l * a;
    let k = &la * la.transpose();
    Ok((&k + k.transpose()) * 0.5)
}

/// Replaces `K` by a draw from its full conditional on the complete graph.
/// The prior `W_G(δ, D)` corresponds to standard degrees of freedom
/// `δ + p - 1`, so the posterior is `W(δ + n + p - 1, (D + Σ z zᵀ)⁻¹)`.
pub(crate) fn step_wishart(state: &mut ChainState, delta: f64) -> Result<()> {
    let p = state.graph.p();
    let df = delta + state.latents.n() as f64 + p as f64 - 1.0;
    let sigma0 = state.m.clone().try_inverse().ok_or(Error::NotPositiveDefinite)?;
    let sigma0 = (&sigma0 + sigma0.transpose()) * 0.5;
    let k = sample_wishart(df, &sigma0, &mut state.rng)?;
    let phi = CholeskyFactor::from_precision(&k)?;
    state.set_phi(phi)
}

/// Runs the fixed complete-graph sampler with the same chain layout and
/// summary surface as [`super::run_chains`].
pub fn copula_full_baseline(config: &SamplerConfig, data: &ObservedData) -> Result<RunOutput> {
    run_all(config, data, Mode::CopulaFull)
}
