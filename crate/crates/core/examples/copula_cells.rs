//! Gaussian copula cell probabilities: exact inclusion–exclusion against
//! forward simulation, and Cramér's V of a bivariate margin.

use cggm::estimators::{
    bivariate_table, cell_from_index, cell_probability_exact, cramers_v, table_probabilities_mc, EmpiricalMarginal,
};
use cggm::mvn::{bivariate_normal_cdf, mvn_cdf, MvnOptions};
use cggm::rng::rng_from_seed;
use nalgebra::DMatrix;

fn main() {
    let mut rng = rng_from_seed(5);
    let opts = MvnOptions::default();

    // orthant identity: Φ₂(0, 0 | ρ) = 1/4 + asin(ρ) / 2π
    println!("Φ₂(0,0|0.5) = {:.10} (1/3)", bivariate_normal_cdf(0.0, 0.0, 0.5));
    let sigma = DMatrix::from_row_slice(3, 3, &[1.0, 0.5, 0.5, 0.5, 1.0, 0.5, 0.5, 0.5, 1.0]);
    let r = mvn_cdf(&[0.0; 3], &sigma, &opts, &mut rng).unwrap();
    println!("Φ₃(0,0,0|0.5) = {:.6} ± {:.1e} (1/4)", r.value, r.error);

    // Two binary variables and a three-level one.
    let marg = EmpiricalMarginal::from_counts(&[vec![60, 40], vec![30, 70], vec![20, 50, 30]]).unwrap();
    let ups = DMatrix::from_row_slice(3, 3, &[1.0, 0.6, -0.3, 0.6, 1.0, 0.2, -0.3, 0.2, 1.0]);
    let levels = marg.all_levels();
    let mc = table_probabilities_mc(&ups, &marg, 200_000, &mut rng).unwrap();
    println!("cell      exact             simulated");
    for (i, sim) in mc.iter().enumerate() {
        let cell = cell_from_index(i, &levels);
        let exact = cell_probability_exact(&cell, &ups, &marg, &opts, &mut rng).unwrap();
        println!("{cell:?}  {:.5} ± {:.0e}   {sim:.5}", exact.value, exact.error);
    }

    for rho in [0.0, 0.3, 0.6, 0.9] {
        let t = bivariate_table(rho, &marg, 0, 1);
        println!("ρ = {rho}: Cramér's V {:.4}", cramers_v(&t).unwrap());
    }
}
