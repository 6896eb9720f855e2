//! Gauss-Hermite quadrature for expectations against normal densities.
//!
//! Nodes and weights come from Newton iteration on the orthonormal Hermite
//! recurrence (the classic `gauher` scheme), which keeps the rule exactly
//! symmetric and machine-precision accurate at any practical order.

use crate::error::{Error, Result};
use crate::numerics::Scalar;

/// A Gauss-Hermite rule with weights normalized so they sum to one, i.e.
/// already divided by sqrt(pi) for the change of variables
/// E f(W) = sum_i w_i f(mu + sqrt(2) sigma x_i), W ~ N(mu, sigma^2).
#[derive(Debug, Clone)]
pub struct GaussHermite<F> {
    nodes: Vec<F>,
    weights: Vec<F>,
    order: usize,
}

impl<F: Scalar> GaussHermite<F> {
    pub fn new(order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("quadrature order must be positive".into()));
        }
        let (nodes, weights) = compute_rule::<F>(order);
        Ok(GaussHermite { nodes, weights, order })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Abscissae in strictly increasing order, symmetric about 0.
    pub fn nodes(&self) -> &[F] {
        &self.nodes
    }

    /// Normalized weights (sum to 1).
    pub fn weights(&self) -> &[F] {
        &self.weights
    }

    /// E f(W) for W ~ N(mu, sigma^2).
    pub fn expectation(&self, mu: F, sigma: F, mut f: impl FnMut(F) -> F) -> Result<F> {
        if !(sigma > F::zero()) || !sigma.is_finite() || !mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "gh_expectation: need finite mu and sigma > 0, got mu = {mu}, sigma = {sigma}"
            )));
        }
        let scale = F::from_f64(std::f64::consts::SQRT_2).unwrap() * sigma;
        let mut acc = F::zero();
        for (&x, &w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + w * f(mu + scale * x);
        }
        Ok(acc)
    }
}

/// Free-function form of [`GaussHermite::expectation`].
pub fn gh_expectation<F: Scalar>(
    f: impl FnMut(F) -> F,
    mu: F,
    sigma: F,
    rule: &GaussHermite<F>,
) -> Result<F> {
    rule.expectation(mu, sigma, f)
}

/// Orthonormal Hermite value and scaled derivative term at z for order n.
/// Returns (p_n(z), p_{n-1}(z)).
fn hermite_pair(n: usize, z: f64) -> (f64, f64) {
    let mut p1 = std::f64::consts::PI.powf(-0.25);
    let mut p2 = 0.0;
    for j in 1..=n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
    }
    (p1, p2)
}

fn compute_rule<F: Scalar>(n: usize) -> (Vec<F>, Vec<F>) {
    let nf = n as f64;
    let m = n.div_ceil(2);
    let mut nodes = vec![0.0f64; n];
    let mut weights = vec![0.0f64; n];
    let mut z = 0.0f64;
    for i in 0..m {
        // Stroud-Secrest style initial guesses, refined by Newton.
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * nodes[n - 1],
            3 => 1.91 * z - 0.91 * nodes[n - 2],
            _ => 2.0 * z - nodes[n - i + 1],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (p1, p2) = hermite_pair(n, z);
            pp = (2.0 * nf).sqrt() * p2;
            let dz = p1 / pp;
            z -= dz;
            if dz.abs() < 1e-15 * (1.0 + z.abs()) {
                break;
            }
        }
        // Middle root of an odd rule is exactly zero by symmetry.
        if n % 2 == 1 && i == m - 1 {
            z = 0.0;
            let (_, p2) = hermite_pair(n, z);
            pp = (2.0 * nf).sqrt() * p2;
        }
        let w = 2.0 / (pp * pp);
        nodes[n - 1 - i] = z;
        nodes[i] = -z;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    (
        nodes.into_iter().map(|x| F::from_f64(x).unwrap()).collect(),
        weights.into_iter().map(|w| F::from_f64(w * inv_sqrt_pi).unwrap()).collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::normal;

    #[test]
    fn weights_normalize_to_one() {
        for order in [1, 2, 3, 7, 16, 30, 61] {
            let rule = GaussHermite::<f64>::new(order).unwrap();
            let total: f64 = rule.weights().iter().sum();
            assert!((total - 1.0).abs() < 1e-12, "order {order}: sum = {total}");
            let e = rule.expectation(0.3, 1.7, |_| 1.0).unwrap();
            assert!((e - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn nodes_increasing_and_symmetric() {
        for order in [2, 5, 30, 31] {
            let rule = GaussHermite::<f64>::new(order).unwrap();
            let nodes = rule.nodes();
            for i in 1..nodes.len() {
                assert!(nodes[i] > nodes[i - 1]);
            }
            for i in 0..nodes.len() {
                assert_eq!(nodes[i], -nodes[nodes.len() - 1 - i], "order {order} node {i}");
            }
        }
    }

    #[test]
    fn mean_is_exact() {
        let rule = GaussHermite::<f64>::new(30).unwrap();
        let e = rule.expectation(1.7, 0.5, |w| w).unwrap();
        assert!((e - 1.7).abs() < 1e-12, "E W = {e}");
    }

    #[test]
    fn second_moment_is_exact() {
        let rule = GaussHermite::<f64>::new(30).unwrap();
        let e = rule.expectation(0.0, 2.0, |w| w * w).unwrap();
        assert!((e - 4.0).abs() < 1e-10, "E W^2 = {e}");
    }

    /// Analytic central moments of N(mu, sigma^2) up to a given degree.
    fn normal_moment(mu: f64, sigma: f64, p: u32) -> f64 {
        // E (mu + sigma Z)^p expanded over E Z^k = (k-1)!! for even k.
        let mut total = 0.0;
        for kk in (0..=p).step_by(2) {
            let mut binom = 1.0;
            for j in 0..kk {
                binom *= (p - j) as f64 / (j + 1) as f64;
            }
            let mut dfact = 1.0;
            let mut j = kk as i64 - 1;
            while j > 1 {
                dfact *= j as f64;
                j -= 2;
            }
            total += binom * mu.powi((p - kk) as i32) * sigma.powi(kk as i32) * dfact;
        }
        total
    }

    #[test]
    fn exact_for_polynomials_below_twice_order() {
        for order in [3usize, 8, 15, 30] {
            let rule = GaussHermite::<f64>::new(order).unwrap();
            let (mu, sigma) = (0.4, 1.3);
            for p in 0..(2 * order as u32) {
                let got = rule.expectation(mu, sigma, |w| w.powi(p as i32)).unwrap();
                let want = normal_moment(mu, sigma, p);
                let tol = 1e-9 * want.abs().max(1.0);
                assert!((got - want).abs() < tol, "order {order}, degree {p}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn probit_integrand_matches_closed_form() {
        // E Phi(a + b W) = Phi((a + b mu) / sqrt(1 + b^2 sigma^2)) for W ~ N(mu, sigma^2).
        let rule = GaussHermite::<f64>::new(30).unwrap();
        let (a, b, mu, sigma) = (0.3, 0.8, 0.2, 0.5);
        let got = rule.expectation(mu, sigma, |w| normal::cdf(a + b * w)).unwrap();
        let want = normal::cdf((a + b * mu) / (1.0 + b * b * sigma * sigma).sqrt());
        // Frozen from the closed form: Phi(0.46 / sqrt(1.16)).
        assert!((want - 0.6653464905230543).abs() < 1e-12);
        assert!((got - want).abs() < 1e-10, "{got} vs {want}");
    }

    #[test]
    fn rejects_bad_sigma() {
        let rule = GaussHermite::<f64>::new(10).unwrap();
        assert!(rule.expectation(0.0, 0.0, |w| w).is_err());
        assert!(rule.expectation(0.0, -1.0, |w| w).is_err());
    }

    #[test]
    fn zero_order_rejected() {
        assert!(GaussHermite::<f64>::new(0).is_err());
    }

    #[test]
    fn generic_f32_rule() {
        let rule = GaussHermite::<f32>::new(12).unwrap();
        let e = rule.expectation(1.0f32, 0.5, |w| w).unwrap();
        assert!((e - 1.0).abs() < 1e-5);
    }
}
