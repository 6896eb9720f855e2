//! Maximum likelihood fits used by the nuisance models: probit regression by
//! Fisher scoring and Gaussian linear regression.

use crate::error::{Error, Result};
use crate::numerics::normal;
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone)]
pub struct ProbitFit {
    pub coef: Vec<f64>,
    pub iterations: usize,
    /// Max-norm of the mean score at the solution.
    pub score_norm: f64,
}

#[derive(Debug, Clone)]
pub struct LinearFit {
    pub coef: Vec<f64>,
    /// Residual standard deviation with the MLE divisor n.
    pub sigma: f64,
}

fn check_design_rank(design: &DMatrix<f64>, context: &str) -> Result<()> {
    let svd = design.clone().svd(false, false);
    let max = svd.singular_values.max();
    let min = svd.singular_values.min();
    if !(min > 1e-10 * max) {
        return Err(Error::RankDeficient {
            context: context.to_string(),
            detail: format!(
                "design matrix singular values span [{min:e}, {max:e}]; columns are collinear"
            ),
        });
    }
    Ok(())
}

/// Probit regression of binary `responses` on `design` with a fixed,
/// known `offset` added to the linear index.
pub fn probit_mle(responses: &[u8], design: &DMatrix<f64>, offset: &[f64]) -> Result<ProbitFit> {
    let n = responses.len();
    let p = design.ncols();
    if design.nrows() != n || offset.len() != n {
        return Err(Error::InvalidArgument(format!(
            "probit_mle: shape mismatch (n = {n}, design rows = {}, offset = {})",
            design.nrows(),
            offset.len()
        )));
    }
    if n == 0 {
        return Err(Error::Positivity("probit_mle: empty data".into()));
    }
    let ones = responses.iter().filter(|&&y| y == 1).count();
    if ones == 0 || ones == n {
        return Err(Error::Separation(format!(
            "all {n} responses are {}; both classes required",
            responses[0]
        )));
    }
    check_design_rank(design, "probit design")?;

    let nf = n as f64;
    let mut beta = DVector::zeros(p);
    let mut eta = DVector::zeros(n);
    let mut score = DVector::zeros(p);
    let mut best_obj = f64::NEG_INFINITY;
    for iter in 0..200 {
        let index = design * &beta;
        // If some beta strictly separates the classes (ignoring the fixed
        // offset), the likelihood has no interior maximum.
        if iter > 0 {
            let margin = (0..n)
                .map(|i| if responses[i] == 1 { index[i] } else { -index[i] })
                .fold(f64::INFINITY, f64::min);
            if margin > 0.0 {
                return Err(Error::Separation(format!(
                    "responses are perfectly separated (classification margin {margin:.3e})"
                )));
            }
        }
        eta.copy_from(&index);
        for i in 0..n {
            eta[i] += offset[i];
        }

        score.fill(0.0);
        let mut info = DMatrix::<f64>::zeros(p, p);
        let mut loglik = 0.0;
        for i in 0..n {
            let e = eta[i];
            let cdf = normal::cdf(e);
            let pdf = normal::pdf(e);
            let (p1, p0) = (cdf.max(1e-300), (1.0 - cdf).max(1e-300));
            loglik += if responses[i] == 1 { p1.ln() } else { p0.ln() };
            let v = pdf * (f64::from(responses[i]) - cdf) / (p1 * p0);
            let wt = pdf * pdf / (p1 * p0);
            for j in 0..p {
                let xj = design[(i, j)];
                score[j] += v * xj;
                for l in 0..=j {
                    info[(j, l)] += wt * xj * design[(i, l)];
                }
            }
        }
        for j in 0..p {
            score[j] /= nf;
            for l in 0..=j {
                info[(j, l)] /= nf;
                info[(l, j)] = info[(j, l)];
            }
        }
        best_obj = best_obj.max(loglik);
        let score_norm = score.amax();
        if score_norm < 1e-10 {
            return Ok(ProbitFit { coef: beta.iter().copied().collect(), iterations: iter, score_norm });
        }
        let step = info.clone().lu().solve(&score).ok_or_else(|| Error::RankDeficient {
            context: "probit Fisher information".into(),
            detail: "information matrix is singular".into(),
        })?;
        beta += &step;
        if beta.amax() > 1e4 {
            return Err(Error::Separation(format!(
                "coefficients diverging (|beta| reached {:.1e})",
                beta.amax()
            )));
        }
    }
    Err(Error::NonConvergence {
        iterations: 200,
        objective: -best_obj,
        best: beta.iter().copied().collect(),
    })
}

/// Ordinary least squares with the residual SD reported under the MLE
/// (divide-by-n) convention.
pub fn linear_gaussian_mle(y: &[f64], design: &DMatrix<f64>) -> Result<LinearFit> {
    let n = y.len();
    if design.nrows() != n {
        return Err(Error::InvalidArgument(format!(
            "linear_gaussian_mle: {} rows vs {n} responses",
            design.nrows()
        )));
    }
    if n == 0 {
        return Err(Error::Positivity("linear_gaussian_mle: empty data".into()));
    }
    check_design_rank(design, "linear design")?;
    let yv = DVector::from_column_slice(y);
    let xtx = design.transpose() * design;
    let xty = design.transpose() * &yv;
    let coef = xtx.lu().solve(&xty).ok_or_else(|| Error::RankDeficient {
        context: "linear normal equations".into(),
        detail: "X'X is singular".into(),
    })?;
    let resid = &yv - design * &coef;
    let sigma = (resid.norm_squared() / n as f64).sqrt();
    Ok(LinearFit { coef: coef.iter().copied().collect(), sigma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::{RngStream, SeedSpec};

    fn design_from_cols(cols: &[Vec<f64>]) -> DMatrix<f64> {
        let n = cols[0].len();
        DMatrix::from_fn(n, cols.len(), |i, j| cols[j][i])
    }

    #[test]
    fn intercept_only_balanced_gives_zero() {
        let n = 1000;
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let x = DMatrix::from_element(n, 1, 1.0);
        let fit = probit_mle(&y, &x, &vec![0.0; n]).unwrap();
        assert!(fit.coef[0].abs() < 1e-8, "coef = {}", fit.coef[0]);
    }

    #[test]
    fn recovers_known_coefficients() {
        let truth = [0.2, 1.0, -0.5];
        let n = 100_000;
        let mut s = RngStream::from_spec(SeedSpec::new(314, 0));
        let mut cols = vec![vec![1.0; n], Vec::with_capacity(n), Vec::with_capacity(n)];
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let x1 = s.normal();
            let x2 = s.normal();
            cols[1].push(x1);
            cols[2].push(x2);
            let p = normal::cdf(truth[0] + truth[1] * x1 + truth[2] * x2);
            y.push(s.bernoulli(p));
        }
        let x = design_from_cols(&cols);
        let fit = probit_mle(&y, &x, &vec![0.0; n]).unwrap();
        // Asymptotic SEs from the inverse Fisher information at the fit.
        let mut info = DMatrix::<f64>::zeros(3, 3);
        for i in 0..n {
            let eta: f64 = (0..3).map(|j| fit.coef[j] * x[(i, j)]).sum();
            let (c, d) = (normal::cdf(eta), normal::pdf(eta));
            let wt = d * d / (c * (1.0 - c));
            for j in 0..3 {
                for l in 0..3 {
                    info[(j, l)] += wt * x[(i, j)] * x[(i, l)];
                }
            }
        }
        let cov = info.try_inverse().unwrap();
        for j in 0..3 {
            let se = cov[(j, j)].sqrt();
            assert!(
                (fit.coef[j] - truth[j]).abs() < 3.0 * se,
                "coef {j}: {} vs {} (se {se})",
                fit.coef[j],
                truth[j]
            );
        }
    }

    #[test]
    fn all_ones_is_separation() {
        let y = vec![1u8; 50];
        let x = DMatrix::from_element(50, 1, 1.0);
        assert!(matches!(probit_mle(&y, &x, &vec![0.0; 50]), Err(Error::Separation(_))));
    }

    #[test]
    fn perfectly_separated_covariate_detected() {
        let n = 200;
        let mut s = RngStream::from_spec(SeedSpec::new(3, 0));
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let y: Vec<u8> = xs.iter().map(|&v| u8::from(v > 0.0)).collect();
        let x = design_from_cols(&[vec![1.0; n], xs]);
        assert!(matches!(probit_mle(&y, &x, &vec![0.0; n]), Err(Error::Separation(_))));
    }

    #[test]
    fn duplicate_column_is_rank_error() {
        let n = 100;
        let mut s = RngStream::from_spec(SeedSpec::new(4, 0));
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 3 == 0)).collect();
        let x = design_from_cols(&[xs.clone(), xs]);
        assert!(matches!(probit_mle(&y, &x, &vec![0.0; n]), Err(Error::RankDeficient { .. })));
    }

    #[test]
    fn offset_is_honored() {
        // With the true index supplied as offset, the free intercept is ~0.
        let n = 50_000;
        let mut s = RngStream::from_spec(SeedSpec::new(8, 0));
        let mut off = Vec::with_capacity(n);
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let o = 0.7 * s.normal();
            off.push(o);
            y.push(s.bernoulli(normal::cdf(o)));
        }
        let x = DMatrix::from_element(n, 1, 1.0);
        let fit = probit_mle(&y, &x, &off).unwrap();
        assert!(fit.coef[0].abs() < 0.03, "intercept {}", fit.coef[0]);
    }

    #[test]
    fn exact_linear_fit_has_zero_sigma() {
        let n = 64;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / 7.0).collect();
        let y: Vec<f64> = xs.iter().map(|&v| 2.0 - 3.0 * v).collect();
        let x = design_from_cols(&[vec![1.0; n], xs]);
        let fit = linear_gaussian_mle(&y, &x).unwrap();
        assert!((fit.coef[0] - 2.0).abs() < 1e-10);
        assert!((fit.coef[1] + 3.0).abs() < 1e-10);
        assert!(fit.sigma < 1e-10);
    }

    #[test]
    fn orthogonal_design_projects_columnwise() {
        let n = 400;
        let c0: Vec<f64> = (0..n).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let c1: Vec<f64> = (0..n).map(|i| if i % 4 < 2 { 1.0 } else { -1.0 }).collect();
        let dot: f64 = c0.iter().zip(&c1).map(|(a, b)| a * b).sum();
        assert_eq!(dot, 0.0);
        let y: Vec<f64> = (0..n).map(|i| 1.5 * c0[i] - 0.25 * c1[i]).collect();
        let x = design_from_cols(&[c0.clone(), c1.clone()]);
        let fit = linear_gaussian_mle(&y, &x).unwrap();
        let proj0: f64 =
            y.iter().zip(&c0).map(|(a, b)| a * b).sum::<f64>() / c0.iter().map(|v| v * v).sum::<f64>();
        let proj1: f64 =
            y.iter().zip(&c1).map(|(a, b)| a * b).sum::<f64>() / c1.iter().map(|v| v * v).sum::<f64>();
        assert!((fit.coef[0] - proj0).abs() < 1e-12);
        assert!((fit.coef[1] - proj1).abs() < 1e-12);
    }

    #[test]
    fn recovers_intermediate_model_truth() {
        // W on (1, Z, A, C, C^2) with coefficients (1, 0.5, 0.75, 1.5, -1.5), sd 0.5.
        let truth = [1.0, 0.5, 0.75, 1.5, -1.5];
        let n = 100_000;
        let mut s = RngStream::from_spec(SeedSpec::new(15, 0));
        let mut cols: Vec<Vec<f64>> = vec![vec![1.0; n]];
        for _ in 0..4 {
            cols.push(Vec::with_capacity(n));
        }
        let mut y = Vec::with_capacity(n);
        for _ in 0..n {
            let z = f64::from(s.bernoulli(0.5));
            let a = 0.5 * s.normal();
            let c = 0.5 * s.normal();
            cols[1].push(z);
            cols[2].push(a);
            cols[3].push(c);
            cols[4].push(c * c);
            let mean: f64 = truth[0] + truth[1] * z + truth[2] * a + truth[3] * c + truth[4] * c * c;
            y.push(mean + 0.5 * s.normal());
        }
        let x = design_from_cols(&cols);
        let fit = linear_gaussian_mle(&y, &x).unwrap();
        let xtx_inv = (x.transpose() * &x).try_inverse().unwrap();
        for j in 0..5 {
            let se = (fit.sigma * fit.sigma * xtx_inv[(j, j)]).sqrt();
            assert!(
                (fit.coef[j] - truth[j]).abs() < 3.0 * se,
                "gamma {j}: {} vs {}",
                fit.coef[j],
                truth[j]
            );
        }
        assert!((fit.sigma - 0.5).abs() < 0.01);
    }
}
