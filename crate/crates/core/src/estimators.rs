//! Posterior summaries over the sample stream.
//!
//! The sampler feeds a [`PosteriorSummary`] with every post-burn-in state
//! (edge tallies, running sums of `Υ`, exceedance tallies) and with a thinned
//! subset of `Υ` draws. Everything that needs the copula, namely cell
//! probabilities and Cramér's V, is computed afterwards from the thinned
//! draws and the empirical marginals.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::graph::{pair_count, UndirectedGraph};
use crate::latent::ObservedData;
use crate::mvn::{bivariate_normal_cdf, gaussian_copula, robust_cholesky, std_normal_quantile, MvnOptions};
use crate::rng::{derive_seed, rng_from_seed, TAG_ESTIMATOR};

/// Default threshold for both interval-null Bayes factor tests.
pub const DEFAULT_EPSILON: f64 = 0.1;
/// Default number of Monte Carlo draws per thinned `Υ` for cell tables.
pub const DEFAULT_DRAWS: usize = 10_000;
/// Largest dimension accepted by the inclusion–exclusion cell estimator.
pub const MAX_EXACT_DIM: usize = 12;
/// Largest contingency table enumerated by the Monte Carlo estimator.
pub const MAX_TABLE_CELLS: usize = 1 << 22;

#[derive(Debug, Clone)]
pub struct ThinnedSample {
    pub graph: UndirectedGraph,
    pub upsilon: DMatrix<f64>,
}

/// Mergeable accumulators over retained states.
#[derive(Debug, Clone)]
pub struct PosteriorSummary {
    p: usize,
    epsilon: f64,
    samples: u64,
    edge_counts: Vec<u64>,
    edge_total: u64,
    upsilon_sum: DMatrix<f64>,
    exceed_counts: Vec<u64>,
    thinned: Vec<ThinnedSample>,
}

impl PosteriorSummary {
    pub fn new(p: usize, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        Ok(Self {
            p,
            epsilon,
            samples: 0,
            edge_counts: vec![0; pair_count(p)],
            edge_total: 0,
            upsilon_sum: DMatrix::zeros(p, p),
            exceed_counts: vec![0; pair_count(p)],
            thinned: Vec::new(),
        })
    }

    /// Adds one retained state to the streaming tallies.
    pub fn record(&mut self, g: &UndirectedGraph, upsilon: &DMatrix<f64>) {
        debug_assert_eq!(g.p(), self.p);
        self.samples += 1;
        self.edge_total += g.edge_count() as u64;
        for (a, b) in g.edges() {
            self.edge_counts[g.pair_index(a, b)] += 1;
        }
        self.upsilon_sum += upsilon;
        let mut idx = 0;
        for a in 0..self.p {
            for b in a + 1..self.p {
                if upsilon[(a, b)].abs() >= self.epsilon {
                    self.exceed_counts[idx] += 1;
                }
                idx += 1;
            }
        }
    }

    pub fn push_thinned(&mut self, g: &UndirectedGraph, upsilon: &DMatrix<f64>) {
        self.thinned.push(ThinnedSample {
            graph: g.clone(),
            upsilon: upsilon.clone(),
        });
    }

    /// Pools another summary into this one. Thinned draws are appended, so
    /// merging in a fixed order gives a deterministic result.
    pub fn merge(&mut self, other: &PosteriorSummary) -> Result<()> {
        if other.p != self.p {
            return Err(Error::DimensionMismatch {
                expected: self.p,
                got: other.p,
            });
        }
        if other.epsilon != self.epsilon {
            return Err(Error::Config("cannot merge summaries recorded at different ε".into()));
        }
        self.samples += other.samples;
        self.edge_total += other.edge_total;
        for (a, b) in self.edge_counts.iter_mut().zip(&other.edge_counts) {
            *a += b;
        }
        for (a, b) in self.exceed_counts.iter_mut().zip(&other.exceed_counts) {
            *a += b;
        }
        self.upsilon_sum += &other.upsilon_sum;
        self.thinned.extend(other.thinned.iter().cloned());
        Ok(())
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Number of retained states `S`.
    pub fn samples(&self) -> u64 {
        self.samples
    }

    pub fn thinned(&self) -> &[ThinnedSample] {
        &self.thinned
    }

    pub fn edge_tally(&self, a: usize, b: usize) -> u64 {
        self.edge_counts[pair_position(self.p, a, b)]
    }

    pub fn mean_edge_count(&self) -> Result<f64> {
        self.require_samples()?;
        Ok(self.edge_total as f64 / self.samples as f64)
    }

    fn require_samples(&self) -> Result<()> {
        if self.samples == 0 {
            Err(Error::EmptySummary("no retained samples"))
        } else {
            Ok(())
        }
    }
}

fn pair_position(p: usize, a: usize, b: usize) -> usize {
    let (a, b) = if a < b { (a, b) } else { (b, a) };
    a * (2 * p - a - 1) / 2 + (b - a - 1)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("epsilon must be positive, got {epsilon}")))
    }
}

/// Proportion of retained graphs containing each edge.
pub fn edge_inclusion_probs(summary: &PosteriorSummary) -> Result<DMatrix<f64>> {
    summary.require_samples()?;
    let p = summary.p;
    let s = summary.samples as f64;
    let mut out = DMatrix::zeros(p, p);
    for a in 0..p {
        for b in a + 1..p {
            let v = summary.edge_tally(a, b) as f64 / s;
            out[(a, b)] = v;
            out[(b, a)] = v;
        }
    }
    Ok(out)
}

/// Model-averaged correlation `Ῡ = (1/S) Σ Υ^s`.
pub fn mean_correlation(summary: &PosteriorSummary) -> Result<DMatrix<f64>> {
    summary.require_samples()?;
    let mut m = &summary.upsilon_sum / summary.samples as f64;
    for v in 0..summary.p {
        m[(v, v)] = 1.0;
    }
    Ok(m)
}

/// Tallies behind an interval-null Bayes factor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BayesFactor {
    /// Draws supporting the alternative.
    pub above: u64,
    /// Draws supporting the null.
    pub below: u64,
}

impl BayesFactor {
    /// `above / below`, infinite when no draw supports the null.
    pub fn value(&self) -> f64 {
        if self.below == 0 {
            if self.above == 0 {
                f64::NAN
            } else {
                f64::INFINITY
            }
        } else {
            self.above as f64 / self.below as f64
        }
    }

    /// Posterior probability of the alternative, `BF / (1 + BF)`.
    pub fn posterior_prob(&self) -> f64 {
        let total = self.above + self.below;
        if total == 0 {
            f64::NAN
        } else {
            self.above as f64 / total as f64
        }
    }
}

/// Bayes factor for `H₁: |Υ_ab| ≥ ε` against `H₀: |Υ_ab| < ε`. At the
/// summary's own ε the streaming tallies are used; any other ε is evaluated
/// on the thinned draws.
pub fn bayes_factor_upsilon(summary: &PosteriorSummary, a: usize, b: usize, epsilon: f64) -> Result<BayesFactor> {
    check_epsilon(epsilon)?;
    check_pair(summary.p, a, b)?;
    if epsilon == summary.epsilon {
        summary.require_samples()?;
        let above = summary.exceed_counts[pair_position(summary.p, a, b)];
        return Ok(BayesFactor {
            above,
            below: summary.samples - above,
        });
    }
    if summary.thinned.is_empty() {
        return Err(Error::EmptySummary("no thinned samples"));
    }
    let above = summary
        .thinned
        .iter()
        .filter(|t| t.upsilon[(a, b)].abs() >= epsilon)
        .count() as u64;
    Ok(BayesFactor {
        above,
        below: summary.thinned.len() as u64 - above,
    })
}

fn check_pair(p: usize, a: usize, b: usize) -> Result<()> {
    for v in [a, b] {
        if v >= p {
            return Err(Error::VertexOutOfRange { vertex: v, p });
        }
    }
    if a == b {
        return Err(Error::SelfLoop(a));
    }
    Ok(())
}

/// Empirical CDFs of discrete columns over codes `0..d_v`:
/// `cdf[v][x] = F̂_v(x)`, so `u⁰ = F̂(x)` and `u¹ = F̂(x-1)` with `F̂(-1) = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalMarginal {
    cdf: Vec<Vec<f64>>,
}

impl EmpiricalMarginal {
    pub fn from_data(data: &ObservedData) -> Result<Self> {
        let cdf = data
            .columns()
            .iter()
            .map(|c| {
                let d = match (c.kind.is_discrete(), c.levels) {
                    (true, Some(d)) => d,
                    _ => {
                        return Err(Error::Unsupported(format!(
                            "cell probabilities need discrete variables; {} is continuous",
                            c.name
                        )))
                    }
                };
                let mut counts = vec![0usize; d];
                for x in c.values.iter().flatten() {
                    counts[*x as usize] += 1;
                }
                Ok(cumulative(&counts))
            })
            .collect::<Result<_>>()?;
        Ok(Self { cdf })
    }

    /// From per-variable category counts.
    pub fn from_counts(counts: &[Vec<usize>]) -> Result<Self> {
        for c in counts {
            if c.is_empty() || c.iter().sum::<usize>() == 0 {
                return Err(Error::Data("marginal without observations".into()));
            }
        }
        Ok(Self {
            cdf: counts.iter().map(|c| cumulative(c)).collect(),
        })
    }

    pub fn p(&self) -> usize {
        self.cdf.len()
    }

    pub fn levels(&self, v: usize) -> usize {
        self.cdf[v].len()
    }

    pub fn all_levels(&self) -> Vec<usize> {
        self.cdf.iter().map(Vec::len).collect()
    }

    pub fn cdf(&self, v: usize, x: usize) -> f64 {
        self.cdf[v][x]
    }

    pub fn u0(&self, v: usize, x: usize) -> f64 {
        self.cdf[v][x]
    }

    pub fn u1(&self, v: usize, x: usize) -> f64 {
        if x == 0 {
            0.0
        } else {
            self.cdf[v][x - 1]
        }
    }

    pub fn prob(&self, v: usize, x: usize) -> f64 {
        self.u0(v, x) - self.u1(v, x)
    }

    /// Latent cut points `Φ⁻¹(F̂_v(x))` for `x = 0..d_v-1`; a latent value
    /// `z` maps to the number of cut points strictly below it.
    pub fn thresholds(&self, v: usize) -> Vec<f64> {
        let d = self.cdf[v].len();
        self.cdf[v][..d - 1].iter().map(|&u| std_normal_quantile(u)).collect()
    }

    fn table_size(&self) -> Result<usize> {
        self.cdf
            .iter()
            .try_fold(1usize, |acc, c| acc.checked_mul(c.len()))
            .filter(|&s| s <= MAX_TABLE_CELLS)
            .ok_or_else(|| Error::Unsupported(format!("contingency table exceeds {MAX_TABLE_CELLS} cells")))
    }
}

fn cumulative(counts: &[usize]) -> Vec<f64> {
    let total: usize = counts.iter().sum();
    let mut acc = 0;
    let mut out: Vec<f64> = counts
        .iter()
        .map(|&c| {
            acc += c;
            acc as f64 / total as f64
        })
        .collect();
    if let Some(last) = out.last_mut() {
        *last = 1.0;
    }
    out
}

/// Cell probability with the accumulated MVN integration error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellProbability {
    pub value: f64,
    pub error: f64,
}

/// `p(X = x | Υ)` by inclusion–exclusion over the `2^p` corners of the
/// cell: `Σ_{s ∈ {0,1}^p} (-1)^{|s|} C(u^{s_1}_1, ..., u^{s_p}_p | Υ)`.
/// Small negative values from integration noise are clamped to zero.
pub fn cell_probability_exact<R: Rng + ?Sized>(
    cell: &[usize],
    upsilon: &DMatrix<f64>,
    marginals: &EmpiricalMarginal,
    opts: &MvnOptions,
    rng: &mut R,
) -> Result<CellProbability> {
    let p = marginals.p();
    if p > MAX_EXACT_DIM {
        return Err(Error::Unsupported(format!(
            "exact cell probabilities are limited to {MAX_EXACT_DIM} variables, got {p}"
        )));
    }
    if cell.len() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: cell.len(),
        });
    }
    if upsilon.nrows() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: upsilon.nrows(),
        });
    }
    for (v, &x) in cell.iter().enumerate() {
        if x >= marginals.levels(v) {
            return Err(Error::Data(format!("level {x} out of range for variable {v}")));
        }
    }
    let mut value = 0.0;
    let mut error = 0.0;
    let mut u = vec![0.0; p];
    'corners: for mask in 0u32..(1 << p) {
        for v in 0..p {
            u[v] = if mask >> v & 1 == 1 {
                marginals.u1(v, cell[v])
            } else {
                marginals.u0(v, cell[v])
            };
            if u[v] == 0.0 {
                continue 'corners;
            }
        }
        let c = gaussian_copula(&u, upsilon, opts, rng)?;
        let sign = if mask.count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        value += sign * c.value;
        error += c.error;
    }
    if value < 0.0 {
        if value < -error.max(1e-12) {
            log::debug!("cell probability {value} below its error bound {error}");
        }
        value = 0.0;
    }
    Ok(CellProbability {
        value: value.min(1.0),
        error,
    })
}

/// Index of a cell in the lexicographic table order (last variable fastest).
pub fn cell_index(cell: &[usize], levels: &[usize]) -> usize {
    cell.iter().zip(levels).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Inverse of [`cell_index`].
pub fn cell_from_index(mut index: usize, levels: &[usize]) -> Vec<usize> {
    let mut cell = vec![0; levels.len()];
    for v in (0..levels.len()).rev() {
        cell[v] = index % levels[v];
        index /= levels[v];
    }
    cell
}

/// Full table of `p(X = x | Υ)` by forward simulation: `Z ~ N(0, Υ)`,
/// `X_v = F̂_v⁻¹(Φ(Z_v))`, binned. Cells are in lexicographic order with
/// the last variable fastest.
pub fn table_probabilities_mc<R: Rng + ?Sized>(
    upsilon: &DMatrix<f64>,
    marginals: &EmpiricalMarginal,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let counts = table_counts_mc(upsilon, marginals, draws, rng)?;
    Ok(counts.into_iter().map(|c| c as f64 / draws as f64).collect())
}

fn table_counts_mc<R: Rng + ?Sized>(
    upsilon: &DMatrix<f64>,
    marginals: &EmpiricalMarginal,
    draws: usize,
    rng: &mut R,
) -> Result<Vec<u64>> {
    let p = marginals.p();
    if draws == 0 {
        return Err(Error::Config("draws must be at least 1".into()));
    }
    if upsilon.nrows() != p || upsilon.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: upsilon.nrows(),
        });
    }
    let size = marginals.table_size()?;
    let levels = marginals.all_levels();
    let thresholds: Vec<Vec<f64>> = (0..p).map(|v| marginals.thresholds(v)).collect();
    let (l, _) = robust_cholesky(upsilon)?;
    let mut counts = vec![0u64; size];
    let mut e = vec![0.0; p];
    for _ in 0..draws {
        for x in e.iter_mut() {
            *x = StandardNormal.sample(rng);
        }
        let mut index = 0;
        for v in 0..p {
            let mut z = 0.0;
            for k in 0..=v {
                z += l[(v, k)] * e[k];
            }
            let x = thresholds[v].partition_point(|&t| t < z);
            index = index * levels[v] + x;
        }
        counts[index] += 1;
    }
    Ok(counts)
}

/// How expected cell counts are computed per thinned `Υ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CellMethod {
    MonteCarlo { draws: usize },
    Exact(MvnOptions),
}

/// `ñ · p̃(X = x)` with `p̃` the average of per-draw cell tables over the
/// thinned `Υ` samples. Each thinned draw gets its own seed derived from
/// `seed`, so the result does not depend on the thread count.
pub fn expected_cell_counts(
    summary: &PosteriorSummary,
    marginals: &EmpiricalMarginal,
    n: usize,
    method: CellMethod,
    seed: u64,
) -> Result<Vec<f64>> {
    let thinned = summary.thinned();
    if thinned.is_empty() {
        return Err(Error::EmptySummary("no thinned samples"));
    }
    if marginals.p() != summary.p() {
        return Err(Error::DimensionMismatch {
            expected: summary.p(),
            got: marginals.p(),
        });
    }
    let size = marginals.table_size()?;
    let levels = marginals.all_levels();
    let per_sample = |i: usize, acc: &mut Vec<f64>| -> Result<()> {
        let mut rng = rng_from_seed(derive_seed(seed, TAG_ESTIMATOR, &(i as u64).to_le_bytes()));
        let ups = &thinned[i].upsilon;
        match method {
            CellMethod::MonteCarlo { draws } => {
                let counts = table_counts_mc(ups, marginals, draws, &mut rng)?;
                for (a, c) in acc.iter_mut().zip(counts) {
                    *a += c as f64 / draws as f64;
                }
            }
            CellMethod::Exact(opts) => {
                for (idx, a) in acc.iter_mut().enumerate() {
                    let cell = cell_from_index(idx, &levels);
                    *a += cell_probability_exact(&cell, ups, marginals, &opts, &mut rng)?.value;
                }
            }
        }
        Ok(())
    };
    let totals = parallel_sum(thinned.len(), size, per_sample)?;
    let scale = n as f64 / thinned.len() as f64;
    Ok(totals.into_iter().map(|t| t * scale).collect())
}

/// Sums per-item vectors over `0..items` on all available cores. Items are
/// split into contiguous blocks and block results are added in order.
fn parallel_sum<F>(items: usize, len: usize, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize, &mut Vec<f64>) -> Result<()> + Sync,
{
    let workers = std::thread::available_parallelism()
        .map_or(1, |n| n.get())
        .min(items)
        .max(1);
    let block = items.div_ceil(workers);
    let parts: Vec<Result<Vec<f64>>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let f = &f;
                s.spawn(move || {
                    let mut acc = vec![0.0; len];
                    for i in w * block..((w + 1) * block).min(items) {
                        f(i, &mut acc)?;
                    }
                    Ok(acc)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("estimator worker panicked"))
            .collect()
    });
    let mut total = vec![0.0; len];
    for part in parts {
        for (t, x) in total.iter_mut().zip(part?) {
            *t += x;
        }
    }
    Ok(total)
}

/// Joint distribution of variables `a` and `b` under `Υ_ab = rho`, from
/// rectangle probabilities of the bivariate normal.
pub fn bivariate_table(rho: f64, marginals: &EmpiricalMarginal, a: usize, b: usize) -> DMatrix<f64> {
    let ta = cut_points(marginals, a);
    let tb = cut_points(marginals, b);
    let (da, db) = (marginals.levels(a), marginals.levels(b));
    let mut cdf = DMatrix::zeros(da + 1, db + 1);
    for i in 0..=da {
        for j in 0..=db {
            cdf[(i, j)] = bivariate_normal_cdf(ta[i], tb[j], rho);
        }
    }
    DMatrix::from_fn(da, db, |i, j| {
        (cdf[(i + 1, j + 1)] - cdf[(i, j + 1)] - cdf[(i + 1, j)] + cdf[(i, j)]).max(0.0)
    })
}

/// `-∞, Φ⁻¹(F̂(0)), ..., Φ⁻¹(F̂(d-2)), +∞`.
fn cut_points(marginals: &EmpiricalMarginal, v: usize) -> Vec<f64> {
    let mut t = vec![f64::NEG_INFINITY];
    t.extend(marginals.thresholds(v));
    t.push(f64::INFINITY);
    t
}

/// Cramér's V in the form `[Σ Σ p²(x₁,x₂) / (p(x₁) p(x₂)) - 1] / (min(I₁, I₂) - 1)`
/// (no square root). Marginals are taken from the table.
pub fn cramers_v(table: &DMatrix<f64>) -> Result<f64> {
    let (r, c) = table.shape();
    if r < 2 || c < 2 {
        return Err(Error::Data(
            "Cramér's V needs at least two categories per variable".into(),
        ));
    }
    let row: Vec<f64> = (0..r).map(|i| table.row(i).sum()).collect();
    let col: Vec<f64> = (0..c).map(|j| table.column(j).sum()).collect();
    if row.iter().chain(&col).any(|&m| !(m > 0.0)) {
        return Err(Error::Data(
            "Cramér's V is undefined with an empty marginal category".into(),
        ));
    }
    let mut s = 0.0;
    for i in 0..r {
        for j in 0..c {
            s += table[(i, j)] * table[(i, j)] / (row[i] * col[j]);
        }
    }
    Ok(((s - 1.0) / (r.min(c) as f64 - 1.0)).max(0.0))
}

/// Per-pair Cramér's V over the thinned draws: the mean `ρ̃` and the
/// tallies for `H₁: ρ ≥ ε` against `H₀: ρ < ε`.
#[derive(Debug, Clone)]
pub struct AssociationSummary {
    pub epsilon: f64,
    pub mean_rho: DMatrix<f64>,
    tallies: Vec<BayesFactor>,
    p: usize,
}

impl AssociationSummary {
    pub fn bayes_factor(&self, a: usize, b: usize) -> BayesFactor {
        self.tallies[pair_position(self.p, a, b)]
    }
}

/// Computes `ρ^s` for every pair and thinned draw from bivariate cell
/// tables. Categories never observed carry no mass and are dropped.
pub fn association_summary(
    summary: &PosteriorSummary,
    marginals: &EmpiricalMarginal,
    epsilon: f64,
) -> Result<AssociationSummary> {
    check_epsilon(epsilon)?;
    let p = summary.p();
    if marginals.p() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: marginals.p(),
        });
    }
    let thinned = summary.thinned();
    if thinned.is_empty() {
        return Err(Error::EmptySummary("no thinned samples"));
    }
    let mut mean_rho = DMatrix::zeros(p, p);
    let mut tallies = vec![BayesFactor::default(); pair_count(p)];
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect();
    // one accumulator slot per pair: [sum, above]
    let sums = parallel_sum(thinned.len(), 2 * pairs.len(), |i, acc| {
        for (k, &(a, b)) in pairs.iter().enumerate() {
            let rho = pair_cramers_v(thinned[i].upsilon[(a, b)], marginals, a, b)?;
            acc[2 * k] += rho;
            if rho >= epsilon {
                acc[2 * k + 1] += 1.0;
            }
        }
        Ok(())
    })?;
    let s = thinned.len() as f64;
    for (k, &(a, b)) in pairs.iter().enumerate() {
        let m = sums[2 * k] / s;
        mean_rho[(a, b)] = m;
        mean_rho[(b, a)] = m;
        let above = sums[2 * k + 1].round() as u64;
        tallies[k] = BayesFactor {
            above,
            below: thinned.len() as u64 - above,
        };
    }
    Ok(AssociationSummary {
        epsilon,
        mean_rho,
        tallies,
        p,
    })
}

/// Cramér's V between `a` and `b` implied by correlation `rho`.
pub fn pair_cramers_v(rho: f64, marginals: &EmpiricalMarginal, a: usize, b: usize) -> Result<f64> {
    let t = bivariate_table(rho, marginals, a, b);
    let rows: Vec<usize> = (0..t.nrows()).filter(|&i| marginals.prob(a, i) > 0.0).collect();
    let cols: Vec<usize> = (0..t.ncols()).filter(|&j| marginals.prob(b, j) > 0.0).collect();
    if rows.len() < 2 || cols.len() < 2 {
        return Ok(0.0);
    }
    let reduced = DMatrix::from_fn(rows.len(), cols.len(), |i, j| t[(rows[i], cols[j])]);
    cramers_v(&reduced)
}

/// Bayes factor for `H₁: ρ_ab ≥ ε`; the ε is the one the association
/// summary was computed at.
pub fn bayes_factor_rho(assoc: &AssociationSummary, a: usize, b: usize, epsilon: f64) -> Result<BayesFactor> {
    check_epsilon(epsilon)?;
    check_pair(assoc.p, a, b)?;
    if epsilon != assoc.epsilon {
        return Err(Error::Config(format!(
            "association summary was computed at ε = {}, not {epsilon}",
            assoc.epsilon
        )));
    }
    Ok(assoc.bayes_factor(a, b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DegreeRow {
    pub expected_degree: f64,
    pub cumulative_association: f64,
}

/// Per variable: the sum of incident edge inclusion probabilities and the
/// sum of `ρ̃` over partners whose `B_ρ` reaches `bf_threshold`.
pub fn degree_and_association_summary(
    edge_probs: &DMatrix<f64>,
    assoc: &AssociationSummary,
    bf_threshold: f64,
) -> Vec<DegreeRow> {
    let p = edge_probs.nrows();
    (0..p)
        .map(|v| {
            let mut row = DegreeRow {
                expected_degree: 0.0,
                cumulative_association: 0.0,
            };
            for w in (0..p).filter(|&w| w != v) {
                row.expected_degree += edge_probs[(v, w)];
                if assoc.bayes_factor(v, w).value() >= bf_threshold {
                    row.cumulative_association += assoc.mean_rho[(v, w)];
                }
            }
            row
        })
        .collect()
}

/// Integrated autocorrelation time `1 + 2 Σ_t ρ(t)` with Sokal's
/// automatic window (`t < 5 τ`). Constant series give 1.
pub fn integrated_autocorr_time(series: &[f64]) -> f64 {
    let n = series.len();
    if n < 2 {
        return 1.0;
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let c0 = series.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
    if c0 <= 0.0 {
        return 1.0;
    }
    let mut tau = 1.0;
    for t in 1..n {
        let ct = series[..n - t]
            .iter()
            .zip(&series[t..])
            .map(|(a, b)| (a - mean) * (b - mean))
            .sum::<f64>()
            / n as f64;
        tau += 2.0 * ct / c0;
        if t as f64 >= 5.0 * tau {
            break;
        }
    }
    tau.max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn corr(rho: f64) -> DMatrix<f64> {
        DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0])
    }

    fn summary_of(graphs: &[UndirectedGraph], ups: &[DMatrix<f64>]) -> PosteriorSummary {
        let mut s = PosteriorSummary::new(graphs[0].p(), DEFAULT_EPSILON).unwrap();
        for (g, u) in graphs.iter().zip(ups) {
            s.record(g, u);
            s.push_thinned(g, u);
        }
        s
    }

    #[test]
    fn edge_probabilities() {
        let p = 4;
        let id = DMatrix::identity(p, p);
        let s = summary_of(&vec![UndirectedGraph::complete(p); 3], &vec![id.clone(); 3]);
        let e = edge_inclusion_probs(&s).unwrap();
        assert!((0..p).all(|a| (0..p).all(|b| e[(a, b)] == if a == b { 0.0 } else { 1.0 })));
        let s = summary_of(&vec![UndirectedGraph::empty(p); 3], &vec![id; 3]);
        assert!(edge_inclusion_probs(&s).unwrap().iter().all(|&x| x == 0.0));
        let empty = PosteriorSummary::new(p, 0.1).unwrap();
        assert!(matches!(edge_inclusion_probs(&empty), Err(Error::EmptySummary(_))));
        assert!(mean_correlation(&empty).is_err());
    }

    #[test]
    fn mean_correlation_cases() {
        let g = UndirectedGraph::complete(2);
        let s = summary_of(std::slice::from_ref(&g), &[corr(0.3)]);
        assert_eq!(mean_correlation(&s).unwrap(), corr(0.3));
        let s = summary_of(&[g.clone(), g], &[corr(0.4), corr(-0.4)]);
        assert_abs_diff_eq!(mean_correlation(&s).unwrap()[(0, 1)], 0.0);
    }

    #[test]
    fn upsilon_bayes_factors() {
        let g = UndirectedGraph::complete(2);
        let s = summary_of(&[g.clone(), g.clone()], &[corr(0.5), corr(-0.3)]);
        let bf = bayes_factor_upsilon(&s, 0, 1, 0.1).unwrap();
        assert_eq!(bf.value(), f64::INFINITY);
        let s = summary_of(&[g.clone(), g], &[corr(0.5), corr(0.05)]);
        let bf = bayes_factor_upsilon(&s, 0, 1, 0.1).unwrap();
        assert_eq!(bf.value(), 1.0);
        assert_abs_diff_eq!(bf.posterior_prob(), bf.value() / (1.0 + bf.value()));
        // off-default ε falls back to thinned draws
        assert_eq!(bayes_factor_upsilon(&s, 0, 1, 0.01).unwrap().value(), f64::INFINITY);
        assert!(bayes_factor_upsilon(&s, 0, 1, 0.0).is_err());
        assert!(bayes_factor_upsilon(&s, 0, 0, 0.1).is_err());
    }

    #[test]
    fn merge_pools_tallies() {
        let g = UndirectedGraph::complete(2);
        let e = UndirectedGraph::empty(2);
        let mut a = summary_of(&[g.clone(), g], &[corr(0.5), corr(0.5)]);
        let b = summary_of(&[e.clone(), e], &[corr(0.0), corr(0.0)]);
        let pa = edge_inclusion_probs(&a).unwrap()[(0, 1)];
        let pb = edge_inclusion_probs(&b).unwrap()[(0, 1)];
        a.merge(&b).unwrap();
        let pooled = edge_inclusion_probs(&a).unwrap()[(0, 1)];
        assert!(pb <= pooled && pooled <= pa);
        assert_eq!(a.samples(), 4);
        assert_eq!(a.thinned().len(), 4);
        assert_eq!(a.mean_edge_count().unwrap(), 0.5);
    }

    fn balanced(p: usize) -> EmpiricalMarginal {
        EmpiricalMarginal::from_counts(&vec![vec![5, 5]; p]).unwrap()
    }

    #[test]
    fn exact_cells_small_cases() {
        let mut rng = rng_from_seed(1);
        let opts = MvnOptions::default();
        let m = EmpiricalMarginal::from_counts(&[vec![6, 4]]).unwrap();
        let one = DMatrix::identity(1, 1);
        assert_abs_diff_eq!(
            cell_probability_exact(&[0], &one, &m, &opts, &mut rng).unwrap().value,
            0.6,
            epsilon = 1e-12
        );
        assert_abs_diff_eq!(
            cell_probability_exact(&[1], &one, &m, &opts, &mut rng).unwrap().value,
            0.4,
            epsilon = 1e-12
        );

        let m = EmpiricalMarginal::from_counts(&[vec![3, 7], vec![2, 3, 5]]).unwrap();
        let id = DMatrix::identity(2, 2);
        for x in 0..2 {
            for y in 0..3 {
                let c = cell_probability_exact(&[x, y], &id, &m, &opts, &mut rng).unwrap().value;
                assert_abs_diff_eq!(c, m.prob(0, x) * m.prob(1, y), epsilon = 1e-10);
            }
        }

        // orthant identity: C(½, ½ | ρ) = ¼ + asin(ρ)/2π = 1/3 at ρ = ½
        let m = balanced(2);
        let expect = [[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]];
        for x in 0..2 {
            for y in 0..2 {
                let c = cell_probability_exact(&[x, y], &corr(0.5), &m, &opts, &mut rng)
                    .unwrap()
                    .value;
                assert_abs_diff_eq!(c, expect[x][y], epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn exact_cells_reject_bad_input() {
        let mut rng = rng_from_seed(1);
        let opts = MvnOptions::default();
        let m = balanced(13);
        let id = DMatrix::identity(13, 13);
        assert!(matches!(
            cell_probability_exact(&[0; 13], &id, &m, &opts, &mut rng),
            Err(Error::Unsupported(_))
        ));
        let data = ObservedData::new(vec![crate::latent::Column {
            name: "x".into(),
            kind: crate::latent::VarKind::Continuous,
            levels: None,
            values: vec![Some(0.3), Some(1.0)],
        }])
        .unwrap();
        assert!(matches!(
            EmpiricalMarginal::from_data(&data),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn mc_table_cases() {
        let mut rng = rng_from_seed(2);
        let m = EmpiricalMarginal::from_counts(&[vec![3, 7], vec![2, 3, 5]]).unwrap();
        let draws = 100_000;
        let t = table_probabilities_mc(&DMatrix::identity(2, 2), &m, draws, &mut rng).unwrap();
        assert_abs_diff_eq!(t.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        for (idx, &pr) in t.iter().enumerate() {
            let c = cell_from_index(idx, &[2, 3]);
            let q = m.prob(0, c[0]) * m.prob(1, c[1]);
            let se = (q * (1.0 - q) / draws as f64).sqrt();
            assert!((pr - q).abs() < 3.0 * se, "cell {c:?}: {pr} vs {q}");
        }
        let t = table_probabilities_mc(&corr(0.5), &balanced(2), draws, &mut rng).unwrap();
        let se = (1.0f64 / 3.0 * 2.0 / 3.0 / draws as f64).sqrt();
        assert!((t[0] - 1.0 / 3.0).abs() < 3.0 * se);

        let single = EmpiricalMarginal::from_counts(&[vec![4]]).unwrap();
        let t = table_probabilities_mc(&DMatrix::identity(1, 1), &single, 100, &mut rng).unwrap();
        assert_eq!(t, vec![1.0]);
    }

    #[test]
    fn cell_index_round_trip() {
        let levels = [2, 3, 4];
        for i in 0..24 {
            assert_eq!(cell_index(&cell_from_index(i, &levels), &levels), i);
        }
        assert_eq!(cell_from_index(1, &levels), vec![0, 0, 1]);
    }

    #[test]
    fn cramers_v_cases() {
        let ind = DMatrix::from_row_slice(2, 3, &[0.06, 0.09, 0.15, 0.14, 0.21, 0.35]);
        assert_abs_diff_eq!(cramers_v(&ind).unwrap(), 0.0, epsilon = 1e-12);
        let diag = DMatrix::from_row_slice(2, 2, &[0.5, 0.0, 0.0, 0.5]);
        assert_abs_diff_eq!(cramers_v(&diag).unwrap(), 1.0, epsilon = 1e-12);
        let t = DMatrix::from_row_slice(3, 2, &[0.2, 0.1, 0.05, 0.3, 0.25, 0.1]);
        let relabelled = DMatrix::from_row_slice(3, 2, &[0.1, 0.25, 0.3, 0.05, 0.1, 0.2]);
        assert_abs_diff_eq!(cramers_v(&t).unwrap(), cramers_v(&relabelled).unwrap(), epsilon = 1e-12);
        let empty_row = DMatrix::from_row_slice(2, 2, &[0.5, 0.5, 0.0, 0.0]);
        assert!(cramers_v(&empty_row).is_err());
    }

    #[test]
    fn bivariate_table_matches_exact_cells() {
        let m = EmpiricalMarginal::from_counts(&[vec![3, 7], vec![2, 3, 5]]).unwrap();
        let t = bivariate_table(0.4, &m, 0, 1);
        let mut rng = rng_from_seed(3);
        let ups = corr(0.4);
        for x in 0..2 {
            for y in 0..3 {
                let c = cell_probability_exact(&[x, y], &ups, &m, &MvnOptions::default(), &mut rng).unwrap();
                assert_abs_diff_eq!(t[(x, y)], c.value, epsilon = 1e-10);
            }
        }
        assert_abs_diff_eq!(t.sum(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn identity_draws_have_no_association() {
        let p = 3;
        let id = DMatrix::identity(p, p);
        let s = summary_of(&vec![UndirectedGraph::empty(p); 5], &vec![id; 5]);
        let m = balanced(p);
        let a = association_summary(&s, &m, 0.1).unwrap();
        for x in 0..p {
            for y in x + 1..p {
                assert_eq!(a.bayes_factor(x, y).above, 0);
                assert_abs_diff_eq!(a.mean_rho[(x, y)], 0.0, epsilon = 1e-12);
            }
        }
        let rows = degree_and_association_summary(&edge_inclusion_probs(&s).unwrap(), &a, 100.0);
        assert!(rows
            .iter()
            .all(|r| r.expected_degree == 0.0 && r.cumulative_association == 0.0));
    }

    #[test]
    fn degree_summary_applies_threshold() {
        let p = 3;
        let mut mean_rho = DMatrix::zeros(p, p);
        mean_rho[(0, 1)] = 0.3;
        mean_rho[(1, 0)] = 0.3;
        mean_rho[(0, 2)] = 0.2;
        mean_rho[(2, 0)] = 0.2;
        let tallies = vec![
            BayesFactor { above: 50, below: 1 },  // (0,1): B = 50, zeroed
            BayesFactor { above: 200, below: 0 }, // (0,2): B = ∞
            BayesFactor { above: 0, below: 10 },
        ];
        let assoc = AssociationSummary {
            epsilon: 0.1,
            mean_rho,
            tallies,
            p,
        };
        let probs = DMatrix::from_element(p, p, 1.0) - DMatrix::identity(p, p);
        let rows = degree_and_association_summary(&probs, &assoc, 100.0);
        assert!(rows.iter().all(|r| r.expected_degree == 2.0));
        assert_abs_diff_eq!(rows[0].cumulative_association, 0.2);
        assert_abs_diff_eq!(rows[1].cumulative_association, 0.0);
        assert_abs_diff_eq!(rows[2].cumulative_association, 0.2);
    }

    #[test]
    fn autocorrelation_time() {
        assert_eq!(integrated_autocorr_time(&[1.0; 100]), 1.0);
        // AR(1) with coefficient a has τ = (1 + a) / (1 - a)
        let a = 0.8;
        let mut rng = rng_from_seed(5);
        let mut x = 0.0;
        let series: Vec<f64> = (0..200_000)
            .map(|_| {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = a * x + e;
                x
            })
            .collect();
        let tau = integrated_autocorr_time(&series);
        assert!((tau / 9.0 - 1.0).abs() < 0.1, "{tau}");
    }
}
