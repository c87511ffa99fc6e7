//! Mixed case data: a continuous column, an ordinal one and a binary one
//! with missing entries, read from CSV and analysed together.

use cggm::estimators::{edge_inclusion_probs, mean_correlation};
use cggm::io::parse_case_str;
use cggm::rng::rng_from_seed;
use cggm::sampler::{run_chains, SamplerConfig};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

fn main() {
    // Latent chain income -> education -> owns_home; rest are independent.
    let mut rng = rng_from_seed(11);
    let mut csv = String::from("income,education,owns_home,noise\n");
    for _ in 0..300 {
        let z1: f64 = StandardNormal.sample(&mut rng);
        let (e2, e3): (f64, f64) = (StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng));
        let z2 = 0.7 * z1 + 0.71 * e2;
        let z3 = 0.7 * z2 + 0.71 * e3;
        let income = (10.0 + z1).exp().round();
        let education = (z2 * 1.5 + 2.0).round().clamp(0.0, 4.0);
        let owns = if rng.random::<f64>() < 0.1 {
            "NA".to_string()
        } else {
            ((z3 > 0.3) as u8).to_string()
        };
        let noise: f64 = StandardNormal.sample(&mut rng);
        csv.push_str(&format!("{income},{education},{owns},{noise:.4}\n"));
    }
    // income and noise are continuous, education ordinal coded 0..5,
    // owns_home binary.
    let data = parse_case_str(&csv, Some(&[0, 5, 2, 0])).unwrap();
    println!(
        "{} cases, {} variables, missing values: {}",
        data.n(),
        data.p(),
        data.has_missing()
    );

    let cfg = SamplerConfig {
        iterations: 4_000,
        burn_in: 500,
        chains: 2,
        ..SamplerConfig::default()
    };
    let out = run_chains(&cfg, &data).unwrap();
    let probs = edge_inclusion_probs(&out.summary).unwrap();
    let corr = mean_correlation(&out.summary).unwrap();
    let names = data.names();
    for a in 0..data.p() {
        for b in a + 1..data.p() {
            println!(
                "{:>10} - {:<10} P(edge) {:.3}  Υ {:+.3}",
                names[a],
                names[b],
                probs[(a, b)],
                corr[(a, b)]
            );
        }
    }
}
