//! The complete-graph Gaussian copula baseline next to the CGGM on the
//! Rochdale table.

use cggm::cli::{analyze, Baseline, Format, RunConfig};
use cggm::sampler::SamplerConfig;

fn config(baseline: Baseline, iterations: usize) -> RunConfig {
    RunConfig {
        data: concat!(env!("CARGO_MANIFEST_DIR"), "/data/rochdale.txt").into(),
        format: Format::Table,
        levels: Some(vec![2; 8]),
        sampler: SamplerConfig {
            iterations,
            burn_in: iterations / 10,
            chains: 2,
            ..SamplerConfig::default()
        },
        draws: 5_000,
        bf_threshold: 100.0,
        baseline,
        out: std::env::temp_dir(),
        write_samples: false,
    }
}

fn main() {
    let iterations: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(5_000);
    let data = config(Baseline::Cggm, iterations).load_data().unwrap();
    println!(
        "{:<12} {:>9} {:>9} {:>9} {:>12} {:>8}",
        "model", "Υ(a,g)", "Υ(b,d)", "ρ(b,d)", "p(H1,ρ) b,d", "SSE"
    );
    for baseline in [Baseline::Cggm, Baseline::CopulaFull] {
        let report = analyze(&config(baseline, iterations), &data).unwrap();
        let t = report.tables.as_ref().unwrap();
        println!(
            "{:<12} {:>9.3} {:>9.3} {:>9.3} {:>12.3} {:>8.1}",
            format!("{baseline:?}"),
            report.correlation[(0, 6)],
            report.correlation[(1, 3)],
            t.association.mean_rho[(1, 3)],
            t.association.bayes_factor(1, 3).posterior_prob(),
            t.sse
        );
    }
}
