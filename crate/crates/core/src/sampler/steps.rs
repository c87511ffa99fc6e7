use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{row_quad, Acceptance, ChainState};
use crate::cholesky::{complete_columns, free_elements};
use crate::error::Result;
use crate::graph::{pair_count, UndirectedGraph};
use crate::gwishart::NormConstCache;
use crate::mvn::std_normal_cdf;
use crate::truncnorm::sample_truncated_normal;

/// Gibbs update of every latent cell given `K`, then refreshes `D + Σ z zᵀ`.
pub fn step1_resample_latents(state: &mut ChainState) -> Result<()> {
    state.latents.resample(&state.k, &state.graph, &mut state.rng)?;
    state.refresh_m();
    Ok(())
}

/// Metropolis–Hastings sweep over the free elements of `φ` in their
/// canonical order. Each proposal is recompleted from the column it
/// touches, and `⟨K' - K, M⟩` is evaluated from the rows that changed.
pub fn step2_resample_precision(
    state: &mut ChainState,
    delta: f64,
    sigma_p: f64,
    stats: &mut Acceptance,
) -> Result<()> {
    let p = state.graph.p();
    let n = state.latents.n() as f64;
    for i in 0..p {
        state.row_q[i] = row_quad(state.phi.matrix(), &state.m, i);
    }
    let mut new_q = vec![0.0; p];
    for (r, c) in free_elements(&state.graph) {
        let current = state.phi.get(r, c);
        let (proposal, log_q) = if r == c {
            let gamma = sample_truncated_normal(current, sigma_p, 0.0, f64::INFINITY, &mut state.rng)?;
            let power = delta + n + state.graph.later_degree(r) as f64 - 1.0;
            let log_q = std_normal_cdf(current / sigma_p).ln() - std_normal_cdf(gamma / sigma_p).ln()
                + power * (gamma / current).ln();
            (gamma, log_q)
        } else {
            let e: f64 = StandardNormal.sample(&mut state.rng);
            (current + sigma_p * e, 0.0)
        };
        state.scratch.copy_from(state.phi.matrix());
        state.scratch[(r, c)] = proposal;
        complete_columns(&mut state.scratch, &state.graph, c);
        let stat = if r == c {
            &mut stats.diagonal
        } else {
            &mut stats.off_diagonal
        };
        if !(r..p).all(|i| (c..p).all(|j| state.scratch[(i, j)].is_finite())) {
            stats.completion_failures += 1;
            stat.record(false);
            continue;
        }
        let mut diff = 0.0;
        for i in r..p {
            new_q[i] = row_quad(&state.scratch, &state.m, i);
            diff += new_q[i] - state.row_q[i];
        }
        let log_ratio = log_q - 0.5 * diff;
        let accept = log_ratio >= 0.0 || state.rng.random::<f64>().ln() < log_ratio;
        stat.record(accept);
        if accept {
            std::mem::swap(state.phi.matrix_mut(), &mut state.scratch);
            state.row_q[r..p].copy_from_slice(&new_q[r..p]);
        }
    }
    state.refresh_k();
    Ok(())
}

/// Log acceptance ratio for replacing free element `(r, c)` of `φ` by
/// `proposal`. For a diagonal element this is
/// `log Φ(φ/σ_p) - log Φ(γ/σ_p) + (δ + n + d_r - 1) log(γ/φ) - ½⟨K' - K, M⟩`;
/// off the diagonal only the trace term remains.
pub fn log_ratio_precision(
    state: &ChainState,
    r: usize,
    c: usize,
    proposal: f64,
    delta: f64,
    sigma_p: f64,
) -> Result<f64> {
    let (r, c) = (r.min(c), r.max(c));
    if r != c && !state.graph.has_edge(r, c) {
        return Err(crate::error::Error::Data(format!("({r}, {c}) is not a free element")));
    }
    let old = state.phi.matrix();
    let mut phi = old.clone();
    phi[(r, c)] = proposal;
    complete_columns(&mut phi, &state.graph, c);
    let mut log_q = 0.0;
    if r == c {
        let n = state.latents.n() as f64;
        let power = delta + n + state.graph.later_degree(r) as f64 - 1.0;
        let current = old[(r, r)];
        log_q = std_normal_cdf(current / sigma_p).ln() - std_normal_cdf(proposal / sigma_p).ln()
            + power * (proposal / current).ln();
    }
    Ok(log_q - 0.5 * trace_change(old, &phi, &state.m, r))
}

/// A proposed graph move with its log acceptance ratio.
#[derive(Debug, Clone)]
pub struct GraphProposal {
    pub log_ratio: f64,
    pub graph: UndirectedGraph,
    pub phi: DMatrix<f64>,
}

/// Change of `⟨φᵀφ, M⟩` between two factors that agree above row `from`.
fn trace_change(old: &DMatrix<f64>, new: &DMatrix<f64>, m: &DMatrix<f64>, from: usize) -> f64 {
    (from..old.nrows())
        .map(|i| row_quad(new, m, i) - row_quad(old, m, i))
        .sum()
}

/// Adding edge `(v1, v2)` (absent from the current graph) with new free
/// value `value` for `φ_{v1,v2}`. The log ratio is
/// `log(σ_g √(2π) φ_{v1,v1}) + log I_G - log I_G' - ½⟨K' - K, M⟩
/// + (φ' - φ)² / (2σ_g²)`; `det K` and the other free elements are unchanged.
pub fn log_ratio_add(
    state: &ChainState,
    v1: usize,
    v2: usize,
    value: f64,
    sigma_g: f64,
    cache: &NormConstCache,
) -> Result<GraphProposal> {
    let (v1, v2) = (v1.min(v2), v1.max(v2));
    let new_graph = state.graph.toggled(v1, v2)?;
    debug_assert!(new_graph.has_edge(v1, v2));
    let old = state.phi.matrix();
    let mut phi = old.clone();
    let completed = old[(v1, v2)];
    phi[(v1, v2)] = value;
    complete_columns(&mut phi, &new_graph, v2);
    let step = value - completed;
    let log_ratio = (sigma_g * (2.0 * PI).sqrt()).ln() + old[(v1, v1)].ln() + cache.log_norm(&state.graph)
        - cache.log_norm(&new_graph)
        - 0.5 * trace_change(old, &phi, &state.m, v1)
        + step * step / (2.0 * sigma_g * sigma_g);
    Ok(GraphProposal {
        log_ratio,
        graph: new_graph,
        phi,
    })
}

/// Deleting edge `(v1, v2)`; `φ_{v1,v2}` becomes a completed entry. This is
/// the reciprocal of [`log_ratio_add`] evaluated at the reverse move.
pub fn log_ratio_delete(
    state: &ChainState,
    v1: usize,
    v2: usize,
    sigma_g: f64,
    cache: &NormConstCache,
) -> Result<GraphProposal> {
    let (v1, v2) = (v1.min(v2), v1.max(v2));
    let new_graph = state.graph.toggled(v1, v2)?;
    debug_assert!(!new_graph.has_edge(v1, v2));
    let old = state.phi.matrix();
    let mut phi = old.clone();
    complete_columns(&mut phi, &new_graph, v2);
    let step = old[(v1, v2)] - phi[(v1, v2)];
    let log_ratio = -(sigma_g * (2.0 * PI).sqrt()).ln() - old[(v1, v1)].ln() + cache.log_norm(&state.graph)
        - cache.log_norm(&new_graph)
        - 0.5 * trace_change(old, &phi, &state.m, v1)
        - step * step / (2.0 * sigma_g * sigma_g);
    Ok(GraphProposal {
        log_ratio,
        graph: new_graph,
        phi,
    })
}

/// One reversible-jump proposal on a uniformly chosen pair.
pub fn step3_resample_graph(
    state: &mut ChainState,
    sigma_g: f64,
    cache: &NormConstCache,
    stats: &mut Acceptance,
) -> Result<()> {
    let p = state.graph.p();
    if p < 2 {
        return Ok(());
    }
    let (v1, v2) = state.graph.pair_from_index(state.rng.random_range(0..pair_count(p)));
    let adding = !state.graph.has_edge(v1, v2);
    let proposal = if adding {
        let e: f64 = StandardNormal.sample(&mut state.rng);
        let value = state.phi.get(v1, v2) + sigma_g * e;
        log_ratio_add(state, v1, v2, value, sigma_g, cache)?
    } else {
        log_ratio_delete(state, v1, v2, sigma_g, cache)?
    };
    let stat = if adding {
        &mut stats.edge_add
    } else {
        &mut stats.edge_delete
    };
    if !proposal.phi.iter().all(|x| x.is_finite()) || proposal.log_ratio.is_nan() {
        stats.completion_failures += 1;
        stat.record(false);
        return Ok(());
    }
    let lr = proposal.log_ratio;
    let accept = lr >= 0.0 || state.rng.random::<f64>().ln() < lr;
    stat.record(accept);
    if accept {
        state.graph = proposal.graph;
        *state.phi.matrix_mut() = proposal.phi;
        state.refresh_k();
    }
    Ok(())
}
