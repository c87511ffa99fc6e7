//! Normal distribution kernels: `Φ`, `Φ⁻¹`, the bivariate CDF, rectangle
//! probabilities of `N_p(0, Σ)` and the Gaussian copula built from them.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use nalgebra::DMatrix;
use rand::Rng;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};

/// Standard normal CDF.
pub fn std_normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal quantile. `u = 0` maps to `-∞` and `u = 1` to `+∞`;
/// values outside `[0, 1]` give NaN.
pub fn std_normal_quantile(u: f64) -> f64 {
    if !(0.0..=1.0).contains(&u) {
        return f64::NAN;
    }
    if u == 0.0 {
        return f64::NEG_INFINITY;
    }
    if u == 1.0 {
        return f64::INFINITY;
    }
    if u > 0.5 {
        return std_normal_upper_quantile(1.0 - u);
    }
    let x = -SQRT_2 * erfc_inv(2.0 * u);
    halley(x, u, std_normal_cdf(x))
}

/// One Halley step on `Φ(x) = target`; `erfc_inv` alone is good to ~1e-9.
fn halley(x: f64, target: f64, current: f64) -> f64 {
    let pdf = (-0.5 * x * x).exp() / (2.0 * PI).sqrt();
    if !x.is_finite() || pdf <= 0.0 {
        return x;
    }
    let t = (current - target) / pdf;
    x - t / (1.0 + 0.5 * x * t)
}

/// Upper quantile: the `x` with `1 - Φ(x) = q`, accurate for tiny `q`.
pub(crate) fn std_normal_upper_quantile(q: f64) -> f64 {
    if q <= 0.0 {
        return f64::INFINITY;
    }
    if q >= 1.0 {
        return f64::NEG_INFINITY;
    }
    let x = SQRT_2 * erfc_inv(2.0 * q);
    // solve Φ(-x) = q
    -halley(-x, q, std_normal_cdf(-x))
}

const GL6_W: [f64; 3] = [0.1713244923791705, 0.3607615730481384, 0.4679139345726904];
const GL6_X: [f64; 3] = [0.9324695142031522, 0.6612093864662647, 0.238_619_186_083_197];
const GL12_W: [f64; 6] = [
    0.04717533638651177,
    0.1069393259953183,
    0.1600783285433464,
    0.2031674267230659,
    0.2334925365383547,
    0.2491470458134029,
];
const GL12_X: [f64; 6] = [
    0.9815606342467191,
    0.904_117_256_370_475,
    0.769_902_674_194_305,
    0.5873179542866171,
    0.3678314989981802,
    0.1252334085114692,
];
const GL20_W: [f64; 10] = [
    0.01761400713915212,
    0.04060142980038694,
    0.06267204833410906,
    0.08327674157670475,
    0.1019301198172404,
    0.1181945319615184,
    0.1316886384491766,
    0.1420961093183821,
    0.1491729864726037,
    0.1527533871307259,
];
const GL20_X: [f64; 10] = [
    0.9931285991850949,
    0.9639719272779138,
    0.912_234_428_251_326,
    0.8391169718222188,
    0.7463319064601508,
    0.636_053_680_726_515,
    0.5108670019508271,
    0.3737060887154196,
    0.2277858511416451,
    0.07652652113349733,
];

/// `P(X > h, Y > k)` for standard bivariate normal with correlation `r`
/// (Drezner–Wesolowsky with Genz's refinements).
fn bvn_upper(h: f64, k: f64, r: f64) -> f64 {
    if h == f64::INFINITY || k == f64::INFINITY {
        return 0.0;
    }
    if h == f64::NEG_INFINITY {
        return if k == f64::NEG_INFINITY {
            1.0
        } else {
            std_normal_cdf(-k)
        };
    }
    if k == f64::NEG_INFINITY {
        return std_normal_cdf(-h);
    }
    if r == 0.0 {
        return std_normal_cdf(-h) * std_normal_cdf(-k);
    }
    let tp = 2.0 * PI;
    let (w, x): (&[f64], &[f64]) = if r.abs() < 0.3 {
        (&GL6_W, &GL6_X)
    } else if r.abs() < 0.75 {
        (&GL12_W, &GL12_X)
    } else {
        (&GL20_W, &GL20_X)
    };
    let mut k = k;
    let mut hk = h * k;
    let mut bvn = 0.0;
    if r.abs() < 0.925 {
        let hs = (h * h + k * k) / 2.0;
        let asr = r.asin() / 2.0;
        for (&wi, &xi) in w.iter().zip(x) {
            for node in [1.0 - xi, 1.0 + xi] {
                let sn = (asr * node).sin();
                bvn += wi * ((sn * hk - hs) / (1.0 - sn * sn)).exp();
            }
        }
        return (bvn * asr / tp + std_normal_cdf(-h) * std_normal_cdf(-k)).clamp(0.0, 1.0);
    }
    if r < 0.0 {
        k = -k;
        hk = -hk;
    }
    if r.abs() < 1.0 {
        let a2 = 1.0 - r * r;
        let mut a = a2.sqrt();
        let bs = (h - k) * (h - k);
        let c = (4.0 - hk) / 8.0;
        let d = (12.0 - hk) / 80.0;
        let asr = -(bs / a2 + hk) / 2.0;
        if asr > -100.0 {
            bvn = a * asr.exp() * (1.0 - c * (bs - a2) * (1.0 - d * bs) / 3.0 + c * d * a2 * a2);
        }
        if hk > -100.0 {
            let b = bs.sqrt();
            let sp = tp.sqrt() * std_normal_cdf(-b / a);
            bvn -= (-hk / 2.0).exp() * sp * b * (1.0 - c * bs * (1.0 - d * bs) / 3.0);
        }
        a /= 2.0;
        let mut sum = 0.0;
        for (&wi, &xi) in w.iter().zip(x) {
            for node in [1.0 - xi, 1.0 + xi] {
                let xs = (a * node) * (a * node);
                let asr = -(bs / xs + hk) / 2.0;
                if asr > -100.0 {
                    let sp = 1.0 + c * xs * (1.0 + 5.0 * d * xs);
                    let rs = (1.0 - xs).sqrt();
                    let ep = (-(hk / 2.0) * xs / ((1.0 + rs) * (1.0 + rs))).exp() / rs;
                    sum += wi * asr.exp() * (sp - ep);
                }
            }
        }
        bvn = (a * sum - bvn) / tp;
    }
    let out = if r > 0.0 {
        bvn + std_normal_cdf(-h.max(k))
    } else if h >= k {
        -bvn
    } else {
        let l = if h < 0.0 {
            std_normal_cdf(k) - std_normal_cdf(h)
        } else {
            std_normal_cdf(-h) - std_normal_cdf(-k)
        };
        l - bvn
    };
    out.clamp(0.0, 1.0)
}

/// `Φ₂(h, k | ρ) = P(X ≤ h, Y ≤ k)` for a standard bivariate normal.
pub fn bivariate_normal_cdf(h: f64, k: f64, rho: f64) -> f64 {
    let rho = rho.clamp(-1.0, 1.0);
    bvn_upper(-h, -k, rho)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnOptions {
    /// Target absolute error (three standard errors across randomizations).
    pub tol: f64,
    /// Independent random shifts of the lattice rule.
    pub randomizations: usize,
    /// Points per randomization in the first round; doubled until converged.
    pub initial_points: usize,
    /// Cap on points per randomization.
    pub max_points: usize,
}

impl Default for MvnOptions {
    fn default() -> Self {
        Self {
            tol: 1e-4,
            randomizations: 10,
            initial_points: 256,
            max_points: 1 << 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MvnResult {
    pub value: f64,
    pub error: f64,
    pub converged: bool,
    /// Σ needed eigenvalue clamping before it could be factored.
    pub near_singular: bool,
}

impl MvnResult {
    fn exact(value: f64) -> Self {
        Self {
            value,
            error: 0.0,
            converged: true,
            near_singular: false,
        }
    }
}

const EIGEN_FLOOR: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;

/// Lower Cholesky factor of a correlation matrix; eigenvalues are clamped
/// at `1e-12` when the plain factorization fails.
pub(crate) fn robust_cholesky(sigma: &DMatrix<f64>) -> Result<(DMatrix<f64>, bool)> {
    if let Some(ch) = nalgebra::Cholesky::new(sigma.clone()) {
        return Ok((ch.l(), false));
    }
    let eig = sigma.clone().symmetric_eigen();
    if eig.eigenvalues.iter().any(|&l| l < -PSD_TOL) {
        return Err(Error::NotPositiveDefinite);
    }
    let clamped = eig.eigenvalues.map(|l| l.max(EIGEN_FLOOR));
    let rebuilt = &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    let rebuilt = (&rebuilt + rebuilt.transpose()) * 0.5;
    let ch = nalgebra::Cholesky::new(rebuilt).ok_or(Error::NotPositiveDefinite)?;
    Ok((ch.l(), true))
}

fn first_primes(n: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(n);
    let mut c = 2u64;
    while out.len() < n {
        if (2..c).take_while(|d| d * d <= c).all(|d| !c.is_multiple_of(d)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// `P(X ≤ upper)` for `X ~ N_p(0, Σ)` with `Σ` a correlation matrix.
///
/// Uses the separation-of-variables transform onto the unit cube,
/// integrated with a randomly shifted Richtmyer lattice rule (baker's
/// periodization). Variables are reordered by increasing marginal mass
/// `Φ(upper_i)`. For `p ≤ 2` the result is computed in closed form.
pub fn mvn_cdf<R: Rng + ?Sized>(
    upper: &[f64],
    sigma: &DMatrix<f64>,
    opts: &MvnOptions,
    rng: &mut R,
) -> Result<MvnResult> {
    let p = upper.len();
    if sigma.nrows() != p || sigma.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: sigma.nrows(),
        });
    }
    if p == 0 || upper.iter().all(|&b| b == f64::INFINITY) {
        return Ok(MvnResult::exact(1.0));
    }
    if upper.contains(&f64::NEG_INFINITY) {
        return Ok(MvnResult::exact(0.0));
    }

    // Variables with an infinite upper limit integrate out.
    let active: Vec<usize> = (0..p).filter(|&i| upper[i].is_finite()).collect();
    let mut order = active.clone();
    order.sort_by(|&a, &b| upper[a].total_cmp(&upper[b]));
    let q = order.len();
    if q == 1 {
        return Ok(MvnResult::exact(std_normal_cdf(upper[order[0]])));
    }
    let sub = DMatrix::from_fn(q, q, |i, j| sigma[(order[i], order[j])]);
    if q == 2 {
        return Ok(MvnResult::exact(bivariate_normal_cdf(
            upper[order[0]],
            upper[order[1]],
            sub[(0, 1)],
        )));
    }
    let (l, near_singular) = robust_cholesky(&sub)?;
    let b: Vec<f64> = order.iter().map(|&i| upper[i]).collect();

    let gen: Vec<f64> = first_primes(q - 1)
        .iter()
        .map(|&pr| (pr as f64).sqrt().fract())
        .collect();
    let nrand = opts.randomizations.max(2);
    let mut n = opts.initial_points.max(1);
    let mut y = vec![0.0; q];
    let mut shift = vec![0.0; q - 1];
    loop {
        let mut means = Vec::with_capacity(nrand);
        for _ in 0..nrand {
            for s in shift.iter_mut() {
                *s = rng.random::<f64>();
            }
            let mut acc = 0.0;
            for k in 1..=n {
                let mut f = 1.0;
                for i in 0..q {
                    let mut s = 0.0;
                    for j in 0..i {
                        s += l[(i, j)] * y[j];
                    }
                    let e = std_normal_cdf((b[i] - s) / l[(i, i)]);
                    f *= e;
                    if f == 0.0 || i == q - 1 {
                        break;
                    }
                    let w = (k as f64 * gen[i] + shift[i]).fract();
                    let w = (2.0 * w - 1.0).abs();
                    y[i] = std_normal_quantile((w * e).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON));
                }
                acc += f;
            }
            means.push(acc / n as f64);
        }
        let m = means.iter().sum::<f64>() / nrand as f64;
        let var = means.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / ((nrand - 1) * nrand) as f64;
        let error = 3.0 * var.sqrt();
        if error <= opts.tol || n >= opts.max_points {
            return Ok(MvnResult {
                value: m.clamp(0.0, 1.0),
                error,
                converged: error <= opts.tol,
                near_singular,
            });
        }
        n *= 2;
    }
}

/// Gaussian copula `C(u | Σ) = Φ_p(Φ⁻¹(u_1), ..., Φ⁻¹(u_p) | Σ)`.
pub fn gaussian_copula<R: Rng + ?Sized>(
    u: &[f64],
    sigma: &DMatrix<f64>,
    opts: &MvnOptions,
    rng: &mut R,
) -> Result<MvnResult> {
    if let Some(bad) = u.iter().find(|x| !(0.0..=1.0).contains(*x)) {
        return Err(Error::Data(format!("copula argument {bad} outside [0, 1]")));
    }
    let upper: Vec<f64> = u.iter().map(|&x| std_normal_quantile(x)).collect();
    mvn_cdf(&upper, sigma, opts, rng)
}

/// Checks that `m` is a correlation matrix: symmetric, unit diagonal,
/// entries in `[-1, 1]` and smallest eigenvalue at least `-1e-10`.
pub fn validate_correlation(m: &DMatrix<f64>) -> Result<()> {
    let p = m.nrows();
    if m.ncols() != p {
        return Err(Error::DimensionMismatch {
            expected: p,
            got: m.ncols(),
        });
    }
    for i in 0..p {
        if (m[(i, i)] - 1.0).abs() > PSD_TOL {
            return Err(Error::Data(format!("diagonal entry {i} is {}", m[(i, i)])));
        }
        for j in 0..i {
            if (m[(i, j)] - m[(j, i)]).abs() > PSD_TOL || m[(i, j)].abs() > 1.0 + PSD_TOL {
                return Err(Error::Data(format!("invalid off-diagonal entry ({i}, {j})")));
            }
        }
    }
    let min_eig = m.clone().symmetric_eigen().eigenvalues.min();
    if min_eig < -PSD_TOL {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    use crate::rng::rng_from_seed;

    #[test]
    fn univariate_cases() {
        assert_eq!(std_normal_cdf(0.0), 0.5);
        assert_abs_diff_eq!(std_normal_quantile(0.975), 1.959963984540054, epsilon = 1e-12);
        for &x in &[0.1, 0.5, 1.3, 2.7, 5.0, 8.0] {
            assert_abs_diff_eq!(std_normal_cdf(-x), 1.0 - std_normal_cdf(x), epsilon = 1e-15);
        }
        assert_eq!(std_normal_quantile(0.0), f64::NEG_INFINITY);
        assert_eq!(std_normal_quantile(1.0), f64::INFINITY);
        assert!(std_normal_quantile(1.5).is_nan());
        assert_abs_diff_eq!(std_normal_upper_quantile(0.025), 1.959963984540054, epsilon = 1e-12);
    }

    #[test]
    fn quantile_round_trip() {
        let mut u = 1e-10;
        while u < 1.0 - 1e-10 {
            let err = (std_normal_cdf(std_normal_quantile(u)) - u).abs();
            assert!(err < 1e-12, "u={u} err={err}");
            u = if u < 0.01 {
                u * 1.7
            } else if u < 0.99 {
                u + 0.003
            } else {
                1.0 - (1.0 - u) / 1.7
            };
        }
    }

    /// `Φ₂(h,k|ρ) = ∫_{-∞}^{h} φ(x) Φ((k - ρx)/√(1-ρ²)) dx` by composite Simpson.
    fn bvn_quadrature(h: f64, k: f64, rho: f64) -> f64 {
        let lo = -12.0f64;
        let hi = h.min(12.0);
        let n = 20_000;
        let step = (hi - lo) / n as f64;
        let s = (1.0 - rho * rho).sqrt();
        let f = |x: f64| (-0.5 * x * x).exp() / (2.0 * PI).sqrt() * std_normal_cdf((k - rho * x) / s);
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let x = lo + i as f64 * step;
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
        }
        acc * step / 3.0
    }

    #[test]
    fn bivariate_cases() {
        assert_abs_diff_eq!(bivariate_normal_cdf(0.0, 0.0, 0.0), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(bivariate_normal_cdf(0.0, 0.0, 0.5), 1.0 / 3.0, epsilon = 1e-14);
        for &rho in &[-0.99f64, -0.95, -0.5, -0.1, 0.2, 0.6, 0.93, 0.999] {
            let orthant = 0.25 + rho.asin() / (2.0 * PI);
            assert_abs_diff_eq!(bivariate_normal_cdf(0.0, 0.0, rho), orthant, epsilon = 1e-13);
            for &k in &[-2.0, 0.3, 1.7] {
                assert_abs_diff_eq!(
                    bivariate_normal_cdf(f64::INFINITY, k, rho),
                    std_normal_cdf(k),
                    epsilon = 1e-15
                );
            }
        }
        assert_abs_diff_eq!(
            bivariate_normal_cdf(1.0, 2.0, 1.0),
            std_normal_cdf(1.0),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            bivariate_normal_cdf(1.0, 2.0, -1.0),
            std_normal_cdf(1.0) + std_normal_cdf(2.0) - 1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn bivariate_matches_quadrature() {
        for &rho in &[-0.97, -0.8, -0.4, -0.05, 0.1, 0.35, 0.7, 0.9, 0.96] {
            for &(h, k) in &[(-1.5, 0.4), (0.0, 0.0), (0.8, -0.3), (2.1, 1.2), (-2.5, -2.2)] {
                let exact = bvn_quadrature(h, k, rho);
                let got = bivariate_normal_cdf(h, k, rho);
                assert!((exact - got).abs() < 1e-10, "h={h} k={k} rho={rho}: {got} vs {exact}");
            }
        }
    }

    fn exchangeable(p: usize, rho: f64) -> DMatrix<f64> {
        DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { rho })
    }

    #[test]
    fn mvn_cases() {
        let mut rng = rng_from_seed(3);
        let opts = MvnOptions::default();
        let upper = [0.3, -0.7, 1.1, 0.0];
        let id = DMatrix::identity(4, 4);
        let r = mvn_cdf(&upper, &id, &opts, &mut rng).unwrap();
        let prod: f64 = upper.iter().map(|&b| std_normal_cdf(b)).product();
        assert!((r.value - prod).abs() < 1e-4);

        let inf = [f64::INFINITY; 3];
        assert_eq!(
            mvn_cdf(&inf, &exchangeable(3, 0.5), &opts, &mut rng).unwrap().value,
            1.0
        );

        // trivariate orthant: 1/8 + Σ asin(ρ_ij) / (4π) = 1/4 at ρ = 0.5
        let r = mvn_cdf(&[0.0; 3], &exchangeable(3, 0.5), &opts, &mut rng).unwrap();
        assert!(r.converged);
        assert!((r.value - 0.25).abs() < 3e-4, "{r:?}");
    }

    #[test]
    fn mvn_handles_singular_correlation() {
        let mut rng = rng_from_seed(5);
        let sigma = exchangeable(3, 1.0);
        let r = mvn_cdf(&[0.0, 0.5, 1.0], &sigma, &MvnOptions::default(), &mut rng).unwrap();
        assert!(r.near_singular);
        assert!((r.value - 0.5).abs() < 1e-3, "{r:?}");
        let bad = exchangeable(3, -0.9);
        assert!(mvn_cdf(&[0.0; 3], &bad, &MvnOptions::default(), &mut rng).is_err());
    }

    #[test]
    fn copula_cases() {
        let mut rng = rng_from_seed(9);
        let opts = MvnOptions::default();
        let s = exchangeable(3, 0.4);
        assert_eq!(gaussian_copula(&[1.0; 3], &s, &opts, &mut rng).unwrap().value, 1.0);
        assert_eq!(
            gaussian_copula(&[0.3, 0.0, 0.9], &s, &opts, &mut rng).unwrap().value,
            0.0
        );
        let id = DMatrix::identity(3, 3);
        let u = [0.2, 0.5, 0.7];
        let c = gaussian_copula(&u, &id, &opts, &mut rng).unwrap();
        assert!((c.value - 0.07).abs() < 1e-4);
        let s2 = exchangeable(2, 0.5);
        assert_abs_diff_eq!(
            gaussian_copula(&[0.5, 0.5], &s2, &opts, &mut rng).unwrap().value,
            1.0 / 3.0,
            epsilon = 1e-14
        );
        // margins
        let c = gaussian_copula(&[0.37, 1.0, 1.0], &s, &opts, &mut rng).unwrap();
        assert_abs_diff_eq!(c.value, 0.37, epsilon = 1e-12);
        assert!(gaussian_copula(&[1.2, 0.5, 0.5], &s, &opts, &mut rng).is_err());
    }

    #[test]
    fn mvn_is_monotone_on_a_grid() {
        let mut rng = rng_from_seed(21);
        let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.3, -0.2, 0.3, 1.0, 0.5, -0.2, 0.5, 1.0]);
        let opts = MvnOptions {
            tol: 1e-5,
            ..MvnOptions::default()
        };
        let grid = [-1.0, 0.0, 1.0];
        for &b0 in &grid {
            let mut prev = 0.0;
            for &b1 in &grid {
                let r = mvn_cdf(&[b0, b1, 0.4], &s, &opts, &mut rng).unwrap();
                assert!(r.value >= prev - 2e-5);
                prev = r.value;
            }
        }
    }

    #[test]
    fn correlation_validation() {
        assert!(validate_correlation(&exchangeable(3, 0.3)).is_ok());
        assert!(validate_correlation(&exchangeable(3, -0.9)).is_err());
        let mut m = exchangeable(2, 0.3);
        m[(0, 0)] = 1.1;
        assert!(validate_correlation(&m).is_err());
    }
}
