//! Free Cholesky elements, completion into the cone P_G and the Jacobian
//! of the change of variables.

use cggm::cholesky::{free_elements, log_jacobian, CholeskyFactor};
use cggm::UndirectedGraph;

fn main() {
    // 4-cycle 0-1-2-3-0: (0,2) and (1,3) are missing.
    let g = UndirectedGraph::from_edges(4, &[(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
    let free = free_elements(&g);
    println!("free elements: {free:?}");

    let values = [1.2, 0.9, 1.1, 0.8, 0.3, -0.5, 0.4, 0.2];
    let phi = CholeskyFactor::from_free(&values, &g).unwrap();
    println!("completed φ:{}", phi.matrix());

    let k = phi.precision();
    println!("K = φᵀφ (zeros at the missing edges):{k}");
    println!("K[0,2] = {:.2e}, K[1,3] = {:.2e}", k[(0, 2)], k[(1, 3)]);

    let back = CholeskyFactor::from_precision(&k).unwrap();
    println!("round-trip error {:.2e}", (back.matrix() - phi.matrix()).amax());
    println!("log Jacobian {:.6}", log_jacobian(&phi, &g).unwrap());
    println!("correlation Υ(K):{}", phi.correlation());
}
