//! Data ingestion and result files.
//!
//! Contingency tables list cell counts in lexicographic order with the
//! **last variable varying fastest**; this is the most common source of
//! silently wrong input. Case files are CSV with a header row and `NA` for
//! missing values. Every file written here labels vertices and categories
//! 1-based.

use std::fs;
use std::io::Write;
use std::path::Path;

use log::warn;
use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::estimators::{cell_from_index, AssociationSummary, DegreeRow, PosteriorSummary};
use crate::graph::UndirectedGraph;
use crate::latent::{Column, ObservedData, VarKind};
use crate::sampler::ChainDiagnostics;

/// Missing-value token in case files.
pub const MISSING: &str = "NA";
/// Integer-valued case columns with at most this many distinct codes are
/// read as ordinal when kinds are not declared.
pub const MAX_INFERRED_LEVELS: usize = 10;

/// Reads a contingency table file; see [`parse_contingency_str`].
pub fn parse_contingency_table(path: &Path, levels: &[usize]) -> Result<ObservedData> {
    parse_contingency_str(&fs::read_to_string(path)?, levels)
}

/// Expands whitespace-separated cell counts into one case per unit count.
/// Cells are in lexicographic order with the last variable fastest, so for
/// two binary variables the order is `(0,0) (0,1) (1,0) (1,1)`. Lines
/// starting with `#` are comments.
pub fn parse_contingency_str(text: &str, levels: &[usize]) -> Result<ObservedData> {
    if levels.is_empty() {
        return Err(Error::Config("a contingency table needs at least one variable".into()));
    }
    if let Some(&d) = levels.iter().find(|&&d| d < 2) {
        return Err(Error::Config(format!(
            "every variable needs at least 2 levels, got {d}"
        )));
    }
    let cells = levels
        .iter()
        .try_fold(1usize, |a, &d| a.checked_mul(d))
        .ok_or_else(|| Error::Config("table dimensions overflow".into()))?;
    let mut counts = Vec::with_capacity(cells);
    for token in text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace)
    {
        let c: i64 = token
            .parse()
            .map_err(|_| Error::Data(format!("cell count {token:?} is not an integer")))?;
        if c < 0 {
            return Err(Error::Data(format!("negative cell count {c}")));
        }
        counts.push(c as usize);
    }
    if counts.len() != cells {
        return Err(Error::Data(format!(
            "table has {} cells, expected {cells} for levels {levels:?}",
            counts.len()
        )));
    }
    if counts.iter().all(|&c| c == 0) {
        return Err(Error::Data("table has no observations".into()));
    }
    let rows: Vec<Vec<usize>> = counts
        .iter()
        .enumerate()
        .flat_map(|(i, &c)| std::iter::repeat_n(cell_from_index(i, levels), c))
        .collect();
    ObservedData::from_discrete_rows(&rows, levels)
}

/// Cell counts of all-discrete data, in table order.
pub fn tabulate(data: &ObservedData) -> Result<Vec<usize>> {
    let levels = discrete_levels(data)?;
    let size: usize = levels.iter().product();
    let mut counts = vec![0; size];
    'rows: for j in 0..data.n() {
        let mut index = 0;
        for (v, &d) in levels.iter().enumerate() {
            match data.column(v).values[j] {
                Some(x) => index = index * d + x as usize,
                None => continue 'rows,
            }
        }
        counts[index] += 1;
    }
    Ok(counts)
}

/// Declared level counts of an all-discrete data set.
pub fn discrete_levels(data: &ObservedData) -> Result<Vec<usize>> {
    data.columns()
        .iter()
        .map(|c| match (c.kind.is_discrete(), c.levels) {
            (true, Some(d)) => Ok(d),
            _ => Err(Error::Unsupported(format!("variable {} is not discrete", c.name))),
        })
        .collect()
}

/// Reads a CSV case file; see [`parse_case_str`].
pub fn parse_case_data(path: &Path, levels: Option<&[usize]>) -> Result<ObservedData> {
    parse_case_str(&fs::read_to_string(path)?, levels)
}

/// Parses CSV case data with a header row of variable names.
///
/// With `levels` given, entry `d ≥ 2` declares an ordinal (binary when 2)
/// column coded `0..d`, and `0` declares a continuous column. Without it,
/// a column whose observed values are integers spanning at most
/// [`MAX_INFERRED_LEVELS`] codes is ordinal, recoded to start at 0; any
/// other column is continuous.
pub fn parse_case_str(text: &str, levels: Option<&[usize]>) -> Result<ObservedData> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let names: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("bad header: {e}")))?
        .iter()
        .map(str::to_owned)
        .collect();
    let p = names.len();
    if let Some(l) = levels {
        if l.len() != p {
            return Err(Error::Config(format!("{} level counts given for {p} columns", l.len())));
        }
    }
    let mut raw: Vec<Vec<Option<f64>>> = vec![Vec::new(); p];
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", line + 1)))?;
        for (v, field) in record.iter().enumerate() {
            let value = if field == MISSING {
                None
            } else {
                Some(field.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| {
                    Error::Data(format!(
                        "row {}, column {}: {field:?} is not a number",
                        line + 1,
                        names[v]
                    ))
                })?)
            };
            raw[v].push(value);
        }
    }
    let n = raw.first().map_or(0, Vec::len);
    if n == 0 {
        return Err(Error::Data("case file has no rows".into()));
    }
    if n == 1 {
        warn!("a single case imposes no rank constraints");
    }
    let columns = names
        .into_iter()
        .zip(raw)
        .enumerate()
        .map(|(v, (name, values))| match levels.map(|l| l[v]) {
            Some(0) => Ok(Column {
                name,
                kind: VarKind::Continuous,
                levels: None,
                values,
            }),
            Some(d) => Ok(discrete_column(name, d, values)),
            None => infer_column(name, values),
        })
        .collect::<Result<Vec<_>>>()?;
    ObservedData::new(columns)
}

fn discrete_column(name: String, d: usize, values: Vec<Option<f64>>) -> Column {
    let kind = if d == 2 { VarKind::Binary } else { VarKind::Ordinal };
    Column {
        name,
        kind,
        levels: Some(d),
        values,
    }
}

fn infer_column(name: String, values: Vec<Option<f64>>) -> Result<Column> {
    let observed: Vec<f64> = values.iter().flatten().copied().collect();
    let integral = observed.iter().all(|x| x.fract() == 0.0);
    let (lo, hi) = observed
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
    let span = hi - lo + 1.0;
    if integral && !observed.is_empty() && span >= 2.0 && span <= MAX_INFERRED_LEVELS as f64 {
        let values = values.into_iter().map(|x| x.map(|x| x - lo)).collect();
        Ok(discrete_column(name, span as usize, values))
    } else {
        Ok(Column {
            name,
            kind: VarKind::Continuous,
            levels: None,
            values,
        })
    }
}

fn create(path: &Path) -> Result<std::io::BufWriter<fs::File>> {
    Ok(std::io::BufWriter::new(fs::File::create(path)?))
}

fn fmt(x: f64) -> String {
    if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else if x.is_nan() {
        "nan".into()
    } else {
        format!("{x:.6}")
    }
}

/// `v1,v2,name1,name2,inclusion_prob` for every pair.
pub fn write_edges_csv(path: &Path, names: &[String], probs: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "v1,v2,name1,name2,inclusion_prob")?;
    for a in 0..names.len() {
        for b in a + 1..names.len() {
            writeln!(
                w,
                "{},{},{},{},{}",
                a + 1,
                b + 1,
                names[a],
                names[b],
                fmt(probs[(a, b)])
            )?;
        }
    }
    Ok(w.flush()?)
}

/// Square matrix with a header row and a leading name column.
pub fn write_matrix_csv(path: &Path, names: &[String], m: &DMatrix<f64>) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "variable,{}", names.join(","))?;
    for (a, name) in names.iter().enumerate() {
        let row: Vec<String> = (0..names.len()).map(|b| fmt(m[(a, b)])).collect();
        writeln!(w, "{name},{}", row.join(","))?;
    }
    Ok(w.flush()?)
}

/// `v1,v2,name1,name2,cramers_v,p_h1,bayes_factor,above,below`; an
/// infinite Bayes factor is written as `inf`.
pub fn write_cramers_v_csv(path: &Path, names: &[String], assoc: &AssociationSummary) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "v1,v2,name1,name2,cramers_v,p_h1,bayes_factor,above,below")?;
    for a in 0..names.len() {
        for b in a + 1..names.len() {
            let bf = assoc.bayes_factor(a, b);
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                a + 1,
                b + 1,
                names[a],
                names[b],
                fmt(assoc.mean_rho[(a, b)]),
                fmt(bf.posterior_prob()),
                fmt(bf.value()),
                bf.above,
                bf.below
            )?;
        }
    }
    Ok(w.flush()?)
}

/// Cell label with 1-based categories separated by spaces, e.g. `2 1 1 2`.
pub fn cell_label(cell: &[usize]) -> String {
    cell.iter().map(|x| (x + 1).to_string()).collect::<Vec<_>>().join(" ")
}

/// `cell,observed,expected` in table order.
pub fn write_cells_csv(path: &Path, levels: &[usize], observed: &[usize], expected: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "cell,observed,expected")?;
    for (i, (o, e)) in observed.iter().zip(expected).enumerate() {
        writeln!(w, "{},{o},{}", cell_label(&cell_from_index(i, levels)), fmt(*e))?;
    }
    Ok(w.flush()?)
}

pub fn write_degrees_csv(path: &Path, names: &[String], rows: &[DegreeRow]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "variable,name,expected_degree,cumulative_association")?;
    for (v, (name, r)) in names.iter().zip(rows).enumerate() {
        writeln!(
            w,
            "{},{name},{},{}",
            v + 1,
            fmt(r.expected_degree),
            fmt(r.cumulative_association)
        )?;
    }
    Ok(w.flush()?)
}

/// `iteration,chain,edge_count` with 1-based iterations and 0-based chains.
pub fn write_trace_csv(path: &Path, chains: &[ChainDiagnostics]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "iteration,chain,edge_count")?;
    for c in chains {
        for (i, e) in c.trace.iter().enumerate() {
            writeln!(w, "{},{},{e}", i + 1, c.chain)?;
        }
    }
    Ok(w.flush()?)
}

/// Edge list `v1,v2` with 1-based vertices.
pub fn write_graph_csv(path: &Path, g: &UndirectedGraph) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "v1,v2")?;
    for (a, b) in g.edges() {
        writeln!(w, "{},{}", a + 1, b + 1)?;
    }
    Ok(w.flush()?)
}

/// Thinned draws, one per row: `sample,edges,u_1_2,u_1_3,...`. `edges` is a
/// 0/1 string over the pairs `(1,2), (1,3), ..., (p-1,p)` and the `u`
/// columns hold the upper triangle of `Υ` in the same order.
pub fn write_samples_csv(path: &Path, summary: &PosteriorSummary) -> Result<()> {
    let p = summary.p();
    let pairs: Vec<(usize, usize)> = (0..p).flat_map(|a| (a + 1..p).map(move |b| (a, b))).collect();
    let mut w = create(path)?;
    let header: Vec<String> = pairs.iter().map(|(a, b)| format!("u_{}_{}", a + 1, b + 1)).collect();
    writeln!(w, "sample,edges,{}", header.join(","))?;
    for (i, s) in summary.thinned().iter().enumerate() {
        let bits: String = pairs
            .iter()
            .map(|&(a, b)| if s.graph.has_edge(a, b) { '1' } else { '0' })
            .collect();
        let ups: Vec<String> = pairs.iter().map(|&(a, b)| format!("{}", s.upsilon[(a, b)])).collect();
        writeln!(w, "{},{bits},{}", i + 1, ups.join(","))?;
    }
    Ok(w.flush()?)
}
