use std::sync::atomic::{AtomicUsize, Ordering};

use super::{
    step1_resample_latents, step2_resample_precision, step3_resample_graph, Acceptance, ChainState, SamplerConfig,
};
use crate::error::{Error, Result};
use crate::estimators::PosteriorSummary;
use crate::graph::UndirectedGraph;
use crate::gwishart::NormConstCache;
use crate::latent::ObservedData;
use crate::rng::{derive_seed, rng_from_seed, TAG_CHAIN};

/// How the precision matrix is updated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Mode {
    /// Full three-step chain over graphs.
    Graphical,
    /// Fixed complete graph with direct Wishart draws.
    CopulaFull,
}

/// Per-chain convergence and acceptance diagnostics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ChainDiagnostics {
    pub chain: usize,
    pub seed: u64,
    pub initial_edges: usize,
    /// Mean edge count over post-burn-in iterations (NaN when none).
    pub mean_edge_count: f64,
    pub acceptance: Acceptance,
    /// Edge count after every iteration, burn-in included.
    pub trace: Vec<u32>,
}

#[derive(Debug, Clone)]
pub struct ChainOutput {
    pub summary: PosteriorSummary,
    pub diagnostics: ChainDiagnostics,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub summary: PosteriorSummary,
    pub chains: Vec<ChainDiagnostics>,
}

impl RunOutput {
    pub fn acceptance(&self) -> Acceptance {
        let mut a = Acceptance::default();
        for c in &self.chains {
            a.merge(&c.acceptance);
        }
        a
    }
}

/// A chain that can be advanced one iteration at a time.
#[derive(Debug)]
pub struct Chain<'a> {
    config: SamplerConfig,
    cache: &'a NormConstCache,
    state: ChainState,
    acceptance: Acceptance,
    mode: Mode,
    seed: u64,
}

impl<'a> Chain<'a> {
    /// Chain `index` starts from an Erdős–Rényi(½) graph drawn from its
    /// own seed, `K = I` and midpoint latents.
    pub fn new(config: &SamplerConfig, data: &ObservedData, index: usize, cache: &'a NormConstCache) -> Result<Self> {
        Self::with_mode(config, data, index, cache, Mode::Graphical)
    }

    pub(crate) fn with_mode(
        config: &SamplerConfig,
        data: &ObservedData,
        index: usize,
        cache: &'a NormConstCache,
        mode: Mode,
    ) -> Result<Self> {
        config.validate()?;
        let p = data.p();
        if cache.params().p() != p || cache.params().delta() != config.delta {
            return Err(Error::Config(
                "normalizing-constant cache does not match the configuration".into(),
            ));
        }
        let seed = derive_seed(config.master_seed, TAG_CHAIN, &(index as u64).to_le_bytes());
        let mut rng = rng_from_seed(seed);
        let graph = match mode {
            Mode::Graphical => UndirectedGraph::random(p, 0.5, &mut rng),
            Mode::CopulaFull => UndirectedGraph::complete(p),
        };
        let state = ChainState::new(data, graph, cache.params().scale().clone(), rng)?;
        Ok(Self {
            config: config.clone(),
            cache,
            state,
            acceptance: Acceptance::default(),
            mode,
            seed,
        })
    }

    pub fn state(&self) -> &ChainState {
        &self.state
    }

    pub fn state_mut(&mut self) -> &mut ChainState {
        &mut self.state
    }

    pub fn acceptance(&self) -> &Acceptance {
        &self.acceptance
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Step 1, then Step 2, then Step 3.
    pub fn step(&mut self) -> Result<()> {
        let cfg = &self.config;
        step1_resample_latents(&mut self.state)?;
        match self.mode {
            Mode::Graphical => {
                step2_resample_precision(&mut self.state, cfg.delta, cfg.sigma_p, &mut self.acceptance)?;
                step3_resample_graph(&mut self.state, cfg.sigma_g, self.cache, &mut self.acceptance)?;
            }
            Mode::CopulaFull => super::baseline::step_wishart(&mut self.state, cfg.delta)?,
        }
        self.state.iteration += 1;
        Ok(())
    }

    /// Runs all configured iterations, recording every post-burn-in state
    /// and every `thin`-th one in full.
    pub fn run(mut self, index: usize) -> Result<ChainOutput> {
        let cfg = self.config.clone();
        let p = self.state.graph.p();
        let mut summary = PosteriorSummary::new(p, cfg.epsilon)?;
        let initial_edges = self.state.graph.edge_count();
        let mut trace = Vec::with_capacity(cfg.iterations);
        for s in 0..cfg.iterations {
            self.step()?;
            trace.push(self.state.graph.edge_count() as u32);
            if s >= cfg.burn_in {
                let ups = self.state.upsilon();
                summary.record(&self.state.graph, &ups);
                if (s - cfg.burn_in).is_multiple_of(cfg.thin) {
                    summary.push_thinned(&self.state.graph, &ups);
                }
            }
        }
        let mean_edge_count = summary.mean_edge_count().unwrap_or(f64::NAN);
        Ok(ChainOutput {
            summary,
            diagnostics: ChainDiagnostics {
                chain: index,
                seed: self.seed,
                initial_edges,
                mean_edge_count,
                acceptance: self.acceptance,
                trace,
            },
        })
    }
}

/// Builds the shared normalizing-constant cache for a configuration.
pub fn cache_for(config: &SamplerConfig, p: usize) -> Result<NormConstCache> {
    NormConstCache::new(p, config.delta, config.nc_samples, config.master_seed)
}

/// Runs chain `index` with a private normalizing-constant cache.
pub fn run_chain(config: &SamplerConfig, data: &ObservedData, index: usize) -> Result<ChainOutput> {
    let cache = cache_for(config, data.p())?;
    run_chain_with_cache(config, data, index, &cache)
}

pub fn run_chain_with_cache(
    config: &SamplerConfig,
    data: &ObservedData,
    index: usize,
    cache: &NormConstCache,
) -> Result<ChainOutput> {
    Chain::new(config, data, index, cache)?.run(index)
}

/// Runs `config.chains` independent chains on all available cores and
/// pools their summaries in chain order.
pub fn run_chains(config: &SamplerConfig, data: &ObservedData) -> Result<RunOutput> {
    run_all(config, data, Mode::Graphical)
}

pub(crate) fn run_all(config: &SamplerConfig, data: &ObservedData, mode: Mode) -> Result<RunOutput> {
    config.validate()?;
    let cache = cache_for(config, data.p())?;
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(config.chains);
    let next = AtomicUsize::new(0);
    let mut results: Vec<Option<Result<ChainOutput>>> = (0..config.chains).map(|_| None).collect();
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|_| {
                s.spawn(|| {
                    let mut done = Vec::new();
                    loop {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= config.chains {
                            break;
                        }
                        let out = Chain::with_mode(config, data, i, &cache, mode).and_then(|c| c.run(i));
                        if let Err(e) = &out {
                            log::error!("chain {i} failed: {e}");
                        }
                        done.push((i, out));
                    }
                    done
                })
            })
            .collect();
        for h in handles {
            for (i, out) in h.join().expect("chain worker panicked") {
                results[i] = Some(out);
            }
        }
    });
    let mut summary = PosteriorSummary::new(data.p(), config.epsilon)?;
    let mut chains = Vec::with_capacity(config.chains);
    for (i, r) in results.into_iter().enumerate() {
        let out = r.expect("every chain index is claimed").map_err(|e| Error::Chain {
            chain: i,
            source: Box::new(e),
        })?;
        summary.merge(&out.summary)?;
        chains.push(out.diagnostics);
    }
    Ok(RunOutput { summary, chains })
}
