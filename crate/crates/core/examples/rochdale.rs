//! Full CGGM analysis of the Rochdale 2^8 table: edge probabilities,
//! correlations, Cramér's V, expected cell counts and the result files.
//!
//! `cargo run --release --example rochdale -- [iterations] [chains] [out-dir]`

#![allow(clippy::needless_range_loop)]

use cggm::cli::{analyze, summary_text, write_outputs, Baseline, Format, RunConfig};
use cggm::estimators::cell_from_index;
use cggm::io::cell_label;
use cggm::sampler::SamplerConfig;

fn main() {
    let mut args = std::env::args().skip(1);
    let iterations: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(20_000);
    let chains: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(2);
    let out = args.next().unwrap_or_else(|| "rochdale-out".into());

    let cfg = RunConfig {
        data: concat!(env!("CARGO_MANIFEST_DIR"), "/data/rochdale.txt").into(),
        format: Format::Table,
        levels: Some(vec![2; 8]),
        sampler: SamplerConfig {
            iterations,
            burn_in: iterations / 10,
            chains,
            ..SamplerConfig::default()
        },
        draws: 10_000,
        bf_threshold: 100.0,
        baseline: Baseline::Cggm,
        out: out.into(),
        write_samples: false,
    };
    let data = cfg.load_data().unwrap();
    let report = analyze(&cfg, &data).unwrap();
    print!("{}", summary_text(&report));

    let names = ["a", "b", "c", "d", "e", "f", "g", "h"];
    println!("\nedge probabilities (upper) and correlations (lower):");
    println!("     {}", names.map(|n| format!("{n:>6}")).join(""));
    for i in 0..8 {
        let row: Vec<String> = (0..8)
            .map(|j| match i.cmp(&j) {
                std::cmp::Ordering::Less => format!("{:>6.2}", report.edge_probs[(i, j)]),
                std::cmp::Ordering::Greater => format!("{:>6.2}", report.correlation[(i, j)]),
                std::cmp::Ordering::Equal => "     -".into(),
            })
            .collect();
        println!("{:>5}{}", names[i], row.join(""));
    }

    let t = report.tables.as_ref().unwrap();
    let mut order: Vec<usize> = (0..t.observed.len()).collect();
    order.sort_by(|&x, &y| t.observed[y].cmp(&t.observed[x]).then(x.cmp(&y)));
    println!("\nlargest cells: observed, expected");
    for &i in order.iter().take(10) {
        println!(
            "  {}  {:>3}  {:>6.2}",
            cell_label(&cell_from_index(i, &t.levels)),
            t.observed[i],
            t.expected[i]
        );
    }
    write_outputs(&report, &cfg.out).unwrap();
    println!("files written to {}", cfg.out.display());
}
