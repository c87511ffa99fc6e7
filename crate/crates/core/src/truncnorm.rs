//! Sampling from a normal distribution truncated to an open interval.
//!
//! Intervals holding a large share of the mass (at least about 30%) use
//! plain rejection from the untruncated normal, which is much cheaper than
//! special-function evaluations. Elsewhere in the body the draw uses the
//! inverse CDF,
//! working with upper-tail probabilities when the interval sits above the
//! mean. When the whole interval lies more than four standard deviations
//! out, inverse-CDF precision degrades and rejection sampling takes over:
//! an exponential proposal for wide intervals, a uniform one for narrow
//! intervals.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::mvn::{std_normal_cdf, std_normal_quantile, std_normal_upper_quantile};

const TAIL: f64 = 4.0;
const MAX_RETRIES: usize = 64;

/// Draws from `N(mu, sigma²)` conditioned on `lower < x < upper`.
/// Infinite bounds are allowed.
pub fn sample_truncated_normal<R: Rng + ?Sized>(
    mu: f64,
    sigma: f64,
    lower: f64,
    upper: f64,
    rng: &mut R,
) -> Result<f64> {
    if !(lower < upper) {
        return Err(Error::InvalidInterval { lower, upper });
    }
    if !(sigma > 0.0) || !sigma.is_finite() || !mu.is_finite() {
        return Err(Error::Config(format!(
            "truncated normal needs finite mean and positive scale, got N({mu}, {sigma}²)"
        )));
    }
    let a = (lower - mu) / sigma;
    let b = (upper - mu) / sigma;
    for _ in 0..MAX_RETRIES {
        let x = mu + sigma * standard_truncated(a, b, rng);
        if lower < x && x < upper {
            return Ok(x);
        }
    }
    // Only reachable when the interval is a handful of ulps wide.
    Ok(interior_point(lower, upper))
}

fn interior_point(lower: f64, upper: f64) -> f64 {
    match (lower.is_finite(), upper.is_finite()) {
        (true, true) => {
            let mid = lower + (upper - lower) / 2.0;
            if lower < mid && mid < upper {
                mid
            } else {
                lower.next_up()
            }
        }
        (true, false) => lower.next_up(),
        (false, true) => upper.next_down(),
        (false, false) => 0.0,
    }
}

/// Standard normal restricted to `(a, b)`.
fn standard_truncated<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    if a == f64::NEG_INFINITY && b == f64::INFINITY {
        return StandardNormal.sample(rng);
    }
    if holds_bulk(a, b) {
        loop {
            let x: f64 = StandardNormal.sample(rng);
            if a < x && x < b {
                return x;
            }
        }
    }
    if a >= TAIL {
        return right_tail(a, b, rng);
    }
    if b <= -TAIL {
        return -right_tail(-b, -a, rng);
    }
    let u: f64 = rng.random();
    if a > 0.0 {
        let qa = std_normal_cdf(-a);
        let qb = std_normal_cdf(-b);
        std_normal_upper_quantile(qb + u * (qa - qb))
    } else {
        let pa = std_normal_cdf(a);
        let pb = std_normal_cdf(b);
        std_normal_quantile(pa + u * (pb - pa))
    }
}

/// Cheap sufficient condition for `Φ(b) - Φ(a) > 0.3`.
fn holds_bulk(a: f64, b: f64) -> bool {
    (a == f64::NEG_INFINITY && b >= -0.5) || (b == f64::INFINITY && a <= 0.5) || (a <= 0.0 && b >= 0.0 && b - a >= 1.0)
}

/// Standard normal restricted to `(a, b)` with `a ≥ 4`.
fn right_tail<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    if b - a < 1.0 / lambda {
        loop {
            let x = a + (b - a) * rng.random::<f64>();
            let log_accept = -0.5 * (x * x - a * a);
            if rng.random::<f64>().ln() < log_accept {
                return x;
            }
        }
    }
    loop {
        let e: f64 = -rng.random::<f64>().ln() / lambda;
        let x = a + e;
        if x >= b {
            continue;
        }
        let d = x - lambda;
        if rng.random::<f64>().ln() < -0.5 * d * d {
            return x;
        }
    }
}
