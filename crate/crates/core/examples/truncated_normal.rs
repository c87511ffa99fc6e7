//! Draws from truncated normals, from the bulk out to far tails.

use cggm::rng::rng_from_seed;
use cggm::truncnorm::sample_truncated_normal;

fn main() {
    let mut rng = rng_from_seed(3);
    let cases = [
        ("half line", 0.0, f64::INFINITY),
        ("body", -0.5, 1.5),
        ("narrow", 1.0, 1.01),
        ("upper tail", 5.0, 6.0),
        ("far tail", 12.0, f64::INFINITY),
        ("lower tail", f64::NEG_INFINITY, -8.0),
    ];
    for (label, lower, upper) in cases {
        let n = 100_000;
        let mut sum = 0.0;
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for _ in 0..n {
            let x = sample_truncated_normal(0.0, 1.0, lower, upper, &mut rng).unwrap();
            sum += x;
            lo = lo.min(x);
            hi = hi.max(x);
        }
        println!(
            "{label:>10} ({lower}, {upper}): mean {:.4}  range [{lo:.4}, {hi:.4}]",
            sum / n as f64
        );
    }
}
