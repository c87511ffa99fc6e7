//! Observed data and the latent layer of the extended rank likelihood.
//!
//! Each observed column is reduced to the ranks of its distinct observed
//! values ("levels"). Latent values must respect those ranks strictly:
//! a cell's latent value lies above every latent value of a lower level and
//! below every latent value of a higher level. Because the latent matrix
//! always satisfies these constraints, the binding bounds for a cell at
//! level `l` are the maximum of level `l-1` and the minimum of level `l+1`,
//! which are tracked per level instead of scanning the column.

use log::warn;
use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::UndirectedGraph;
use crate::mvn::std_normal_quantile;
use crate::truncnorm::sample_truncated_normal;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Ordinal,
    Continuous,
}

impl VarKind {
    pub fn is_discrete(self) -> bool {
        !matches!(self, VarKind::Continuous)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub name: String,
    pub kind: VarKind,
    /// Declared number of categories for discrete columns (codes `0..levels`).
    pub levels: Option<usize>,
    pub values: Vec<Option<f64>>,
}

/// `n` observations of `p` variables; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservedData {
    n: usize,
    columns: Vec<Column>,
}

impl ObservedData {
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n = columns.first().map_or(0, |c| c.values.len());
        for c in &columns {
            if c.values.len() != n {
                return Err(Error::Data(format!(
                    "column {} has {} rows, expected {n}",
                    c.name,
                    c.values.len()
                )));
            }
            if n > 0 && c.values.iter().all(Option::is_none) {
                return Err(Error::Data(format!("column {} has no observed values", c.name)));
            }
            if c.kind.is_discrete() {
                let d = c
                    .levels
                    .ok_or_else(|| Error::Data(format!("discrete column {} needs a level count", c.name)))?;
                if d < 2 {
                    return Err(Error::Data(format!(
                        "column {} needs at least 2 levels, got {d}",
                        c.name
                    )));
                }
                if c.kind == VarKind::Binary && d != 2 {
                    return Err(Error::Data(format!("binary column {} declares {d} levels", c.name)));
                }
                for x in c.values.iter().flatten() {
                    if x.fract() != 0.0 || *x < 0.0 || *x >= d as f64 {
                        return Err(Error::Data(format!(
                            "column {}: value {x} is not a level code in 0..{d}",
                            c.name
                        )));
                    }
                }
            } else if c.values.iter().flatten().any(|x| !x.is_finite()) {
                return Err(Error::Data(format!("column {} has non-finite values", c.name)));
            }
        }
        Ok(Self { n, columns })
    }

    /// All-discrete data from integer codes, one row per case.
    pub fn from_discrete_rows(rows: &[Vec<usize>], levels: &[usize]) -> Result<Self> {
        let p = levels.len();
        let columns = (0..p)
            .map(|v| Column {
                name: format!("V{}", v + 1),
                kind: if levels[v] == 2 {
                    VarKind::Binary
                } else {
                    VarKind::Ordinal
                },
                levels: Some(levels[v]),
                values: rows.iter().map(|r| Some(r[v] as f64)).collect(),
            })
            .collect();
        for r in rows {
            if r.len() != p {
                return Err(Error::Data(format!("row has {} entries, expected {p}", r.len())));
            }
        }
        Self::new(columns)
    }

    /// No observations of `p` variables; the latent layer is then empty and
    /// the posterior equals the prior.
    pub fn empty(p: usize) -> Self {
        let columns = (0..p)
            .map(|v| Column {
                name: format!("V{}", v + 1),
                kind: VarKind::Continuous,
                levels: None,
                values: Vec::new(),
            })
            .collect();
        Self { n: 0, columns }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.columns.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column(&self, v: usize) -> &Column {
        &self.columns[v]
    }

    pub fn names(&self) -> Vec<String> {
        self.columns.iter().map(|c| c.name.clone()).collect()
    }

    pub fn all_discrete(&self) -> bool {
        self.columns.iter().all(|c| c.kind.is_discrete())
    }

    pub fn has_missing(&self) -> bool {
        self.columns.iter().any(|c| c.values.iter().any(Option::is_none))
    }

    /// Keeps only the listed rows.
    pub fn subset_rows(&self, rows: &[usize]) -> Result<Self> {
        let columns = self
            .columns
            .iter()
            .map(|c| Column {
                values: rows.iter().map(|&j| c.values[j]).collect(),
                ..c.clone()
            })
            .collect();
        Self::new(columns)
    }
}

/// Rank coding of one column: the level of each row among the distinct
/// observed values, or `None` when missing.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnRanks {
    pub level: Vec<Option<u32>>,
    pub counts: Vec<usize>,
}

impl ColumnRanks {
    pub fn from_values(values: &[Option<f64>]) -> Self {
        let mut distinct: Vec<f64> = values.iter().flatten().copied().collect();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        let mut counts = vec![0; distinct.len()];
        let level = values
            .iter()
            .map(|x| {
                x.map(|x| {
                    let l = distinct.partition_point(|&d| d < x);
                    counts[l] += 1;
                    l as u32
                })
            })
            .collect();
        Self { level, counts }
    }

    pub fn n_levels(&self) -> usize {
        self.counts.len()
    }
}

/// Bounds `(L, U)` on row `j`'s latent value implied by the observed
/// ranks: `L = max{z_k : x_k < x_j}` and `U = min{z_k : x_k > x_j}`, with
/// empty sets giving `∓∞`. A missing `x_j` leaves the cell unconstrained.
/// Brute-force evaluation in `O(n)`.
pub fn latent_bounds(x: &[Option<f64>], z: &[f64], j: usize) -> (f64, f64) {
    let Some(xj) = x[j] else {
        return (f64::NEG_INFINITY, f64::INFINITY);
    };
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (xk, &zk) in x.iter().zip(z) {
        match xk {
            Some(xk) if *xk < xj => lo = lo.max(zk),
            Some(xk) if *xk > xj => hi = hi.min(zk),
            _ => {}
        }
    }
    (lo, hi)
}

/// Latent matrix `z` (n × p) together with its scatter `Σ_j z_j z_jᵀ` and
/// per-level extremes used for bound queries.
#[derive(Debug, Clone)]
pub struct LatentMatrix {
    n: usize,
    p: usize,
    /// Column-major: `z[v * n + j]`.
    z: Vec<f64>,
    scatter: DMatrix<f64>,
    ranks: Vec<ColumnRanks>,
    level_min: Vec<Vec<f64>>,
    level_max: Vec<Vec<f64>>,
}

impl LatentMatrix {
    /// Midpoint normal scores: the cell with average rank `r` among the `m`
    /// observed values of its column starts at `Φ⁻¹((r - ½)/m)`. For a
    /// discrete column this equals `Φ⁻¹((F̂(x-1) + F̂(x))/2)`. Missing cells
    /// start at zero.
    pub fn init(data: &ObservedData) -> Self {
        let n = data.n();
        let p = data.p();
        let mut z = vec![0.0; n * p];
        let mut ranks = Vec::with_capacity(p);
        for (v, col) in data.columns().iter().enumerate() {
            let r = ColumnRanks::from_values(&col.values);
            if n > 0 && r.n_levels() < 2 {
                warn!(
                    "column {} has a single observed value; it imposes no rank constraints",
                    col.name
                );
            }
            let observed: usize = r.counts.iter().sum();
            let mut below = 0usize;
            let scores: Vec<f64> = r
                .counts
                .iter()
                .map(|&c| {
                    let mid = (below as f64 + c as f64 / 2.0) / observed as f64;
                    below += c;
                    std_normal_quantile(mid)
                })
                .collect();
            for j in 0..n {
                if let Some(l) = r.level[j] {
                    z[v * n + j] = scores[l as usize];
                }
            }
            ranks.push(r);
        }
        let mut out = Self {
            n,
            p,
            z,
            scatter: DMatrix::zeros(p, p),
            ranks,
            level_min: Vec::new(),
            level_max: Vec::new(),
        };
        out.rebuild_extremes();
        out.refresh_scatter();
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, j: usize, v: usize) -> f64 {
        self.z[v * self.n + j]
    }

    pub fn column(&self, v: usize) -> &[f64] {
        &self.z[v * self.n..(v + 1) * self.n]
    }

    pub fn ranks(&self, v: usize) -> &ColumnRanks {
        &self.ranks[v]
    }

    pub fn scatter(&self) -> &DMatrix<f64> {
        &self.scatter
    }

    /// Current bounds for cell `(j, v)` in `O(1)`.
    pub fn bounds(&self, j: usize, v: usize) -> (f64, f64) {
        let Some(l) = self.ranks[v].level[j] else {
            return (f64::NEG_INFINITY, f64::INFINITY);
        };
        let l = l as usize;
        let lo = if l > 0 {
            self.level_max[v][l - 1]
        } else {
            f64::NEG_INFINITY
        };
        let hi = if l + 1 < self.ranks[v].n_levels() {
            self.level_min[v][l + 1]
        } else {
            f64::INFINITY
        };
        (lo, hi)
    }

    /// Sets one latent value, keeping the scatter and level extremes in sync.
    /// The caller is responsible for staying inside the cell's bounds.
    pub fn set(&mut self, j: usize, v: usize, value: f64) {
        let old = self.replace(j, v, value);
        let delta = value - old;
        for w in 0..self.p {
            if w == v {
                self.scatter[(v, v)] += value * value - old * old;
            } else {
                let s = delta * self.z[w * self.n + j];
                self.scatter[(v, w)] += s;
                self.scatter[(w, v)] += s;
            }
        }
    }

    fn replace(&mut self, j: usize, v: usize, value: f64) -> f64 {
        let idx = v * self.n + j;
        let old = self.z[idx];
        self.z[idx] = value;
        if let Some(l) = self.ranks[v].level[j] {
            let l = l as usize;
            if value >= self.level_max[v][l] {
                self.level_max[v][l] = value;
            } else if old == self.level_max[v][l] {
                self.level_max[v][l] = self.scan_level(v, l, f64::NEG_INFINITY, f64::max);
            }
            if value <= self.level_min[v][l] {
                self.level_min[v][l] = value;
            } else if old == self.level_min[v][l] {
                self.level_min[v][l] = self.scan_level(v, l, f64::INFINITY, f64::min);
            }
        }
        old
    }

    fn scan_level(&self, v: usize, l: usize, init: f64, f: fn(f64, f64) -> f64) -> f64 {
        let col = self.column(v);
        self.ranks[v]
            .level
            .iter()
            .zip(col)
            .filter(|(lv, _)| **lv == Some(l as u32))
            .fold(init, |acc, (_, &z)| f(acc, z))
    }

    fn rebuild_extremes(&mut self) {
        self.level_min = (0..self.p)
            .map(|v| {
                (0..self.ranks[v].n_levels())
                    .map(|l| self.scan_level(v, l, f64::INFINITY, f64::min))
                    .collect()
            })
            .collect();
        self.level_max = (0..self.p)
            .map(|v| {
                (0..self.ranks[v].n_levels())
                    .map(|l| self.scan_level(v, l, f64::NEG_INFINITY, f64::max))
                    .collect()
            })
            .collect();
    }

    /// Recomputes `Σ_j z_j z_jᵀ` from scratch.
    pub fn refresh_scatter(&mut self) {
        self.scatter = self.compute_scatter();
    }

    pub fn compute_scatter(&self) -> DMatrix<f64> {
        let mut s = DMatrix::zeros(self.p, self.p);
        for a in 0..self.p {
            for b in a..self.p {
                let x: f64 = self.column(a).iter().zip(self.column(b)).map(|(x, y)| x * y).sum();
                s[(a, b)] = x;
                s[(b, a)] = x;
            }
        }
        s
    }

    fn refresh_scatter_row(&mut self, v: usize) {
        for w in 0..self.p {
            let x: f64 = self.column(v).iter().zip(self.column(w)).map(|(x, y)| x * y).sum();
            self.scatter[(v, w)] = x;
            self.scatter[(w, v)] = x;
        }
    }

    /// Whether every cell lies strictly inside its rank bounds.
    pub fn satisfies_constraints(&self) -> bool {
        (0..self.p).all(|v| {
            let n_levels = self.ranks[v].n_levels();
            let ordered = (1..n_levels).all(|l| self.level_max[v][l - 1] < self.level_min[v][l]);
            let tracked = (0..n_levels).all(|l| {
                self.level_max[v][l] == self.scan_level(v, l, f64::NEG_INFINITY, f64::max)
                    && self.level_min[v][l] == self.scan_level(v, l, f64::INFINITY, f64::min)
            });
            ordered && tracked && self.column(v).iter().all(|z| z.is_finite())
        })
    }

    /// One Gibbs sweep over all cells, column by column (`v` outer, `j`
    /// inner). Each cell is drawn from its full conditional
    /// `N(-Σ_{w ∈ bd(v)} K_vw/K_vv z_w, 1/K_vv)` truncated to its bounds.
    pub fn resample<R: Rng + ?Sized>(&mut self, k: &DMatrix<f64>, g: &UndirectedGraph, rng: &mut R) -> Result<()> {
        let n = self.n;
        for v in 0..self.p {
            let kvv = k[(v, v)];
            let sigma = 1.0 / kvv.sqrt();
            let coef: Vec<(usize, f64)> = g.neighbors(v).map(|w| (w, k[(v, w)] / kvv)).collect();
            for j in 0..n {
                let mut mu = 0.0;
                for &(w, c) in &coef {
                    mu -= c * self.z[w * n + j];
                }
                let (lo, hi) = self.bounds(j, v);
                let x = sample_truncated_normal(mu, sigma, lo, hi, rng)?;
                debug_assert!(lo < x && x < hi);
                self.replace(j, v, x);
            }
            self.refresh_scatter_row(v);
        }
        Ok(())
    }
}
