//! With no data the sampler must return the prior: all eight graphs on
//! three vertices equally often. Pass an iteration count to run longer.

use cggm::estimators::integrated_autocorr_time;
use cggm::latent::ObservedData;
use cggm::sampler::{cache_for, Chain, SamplerConfig};

fn main() {
    let iterations: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50_000);
    let cfg = SamplerConfig {
        iterations,
        burn_in: 1_000.min(iterations / 10),
        ..SamplerConfig::default()
    };
    let data = ObservedData::empty(3);
    let cache = cache_for(&cfg, 3).unwrap();
    let mut chain = Chain::new(&cfg, &data, 0, &cache).unwrap();

    let mut labels = Vec::new();
    for s in 0..cfg.iterations {
        chain.step().unwrap();
        if s >= cfg.burn_in {
            let g = chain.state().graph();
            labels
                .push(g.has_edge(0, 1) as usize | (g.has_edge(0, 2) as usize) << 1 | (g.has_edge(1, 2) as usize) << 2);
        }
    }
    let n = labels.len() as f64;
    println!("graph  edges        frequency");
    for k in 0..8 {
        let edges: Vec<&str> = [(1, "0-1"), (2, "0-2"), (4, "1-2")]
            .iter()
            .filter(|e| k & e.0 != 0)
            .map(|e| e.1)
            .collect();
        let freq = labels.iter().filter(|&&l| l == k).count() as f64 / n;
        println!("{k:>5}  {:<12} {freq:.4}", edges.join(","));
    }
    let tau = (0..8)
        .map(|k| integrated_autocorr_time(&labels.iter().map(|&l| (l == k) as u8 as f64).collect::<Vec<_>>()))
        .fold(1.0, f64::max);
    println!("autocorrelation time {tau:.1}, effective samples {:.0}", n / tau);
    let a = chain.acceptance();
    println!(
        "acceptance: add {:.3}, delete {:.3}",
        a.edge_add.rate(),
        a.edge_delete.rate()
    );
}
