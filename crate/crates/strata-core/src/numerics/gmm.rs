//! Generalized method of moments by Gauss-Newton on the sample moment
//! quadratic form, with central-difference Jacobians and optional two-step
//! optimal weighting.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Identity,
    /// Identity first step, then re-solve with the inverse sample moment
    /// covariance.
    TwoStep,
}

#[derive(Debug, Clone)]
pub struct GmmOptions {
    pub weighting: Weighting,
    pub max_iterations: usize,
    /// Relative parameter-change tolerance.
    pub param_tol: f64,
    /// Absolute objective-change tolerance.
    pub objective_tol: f64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            weighting: Weighting::Identity,
            max_iterations: 200,
            param_tol: 1e-9,
            objective_tol: 1e-12,
        }
    }
}

/// A moment system: `moment(theta, i, out)` writes record i's moment vector.
pub struct GmmProblem<M> {
    pub moment: M,
    pub n_records: usize,
    pub param_dim: usize,
    pub moment_dim: usize,
    pub init: Vec<f64>,
    pub options: GmmOptions,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct GmmReport {
    pub objective: f64,
    pub iterations: usize,
    pub jacobian_condition: f64,
    pub converged: bool,
    pub weighting: Weighting,
}

#[derive(Debug, Clone)]
pub struct GmmSolution {
    pub params: Vec<f64>,
    pub report: GmmReport,
}

impl<M: Fn(&[f64], usize, &mut [f64])> GmmProblem<M> {
    /// Sample mean of the moment vector; None if any entry is non-finite.
    pub fn mean_moments(&self, theta: &[f64]) -> Option<DVector<f64>> {
        let m = self.moment_dim;
        let mut acc = DVector::<f64>::zeros(m);
        let mut buf = vec![0.0; m];
        for i in 0..self.n_records {
            (self.moment)(theta, i, &mut buf);
            for j in 0..m {
                if !buf[j].is_finite() {
                    return None;
                }
                acc[j] += buf[j];
            }
        }
        acc /= self.n_records as f64;
        Some(acc)
    }

    /// Central-difference Jacobian of the mean moments, step
    /// h_j = max(1e-6, 1e-6 |theta_j|).
    pub fn central_jacobian(&self, theta: &[f64]) -> Option<DMatrix<f64>> {
        let mut jac = DMatrix::<f64>::zeros(self.moment_dim, self.param_dim);
        let mut th = theta.to_vec();
        for j in 0..self.param_dim {
            let h = 1e-6f64.max(1e-6 * theta[j].abs());
            th[j] = theta[j] + h;
            let up = self.mean_moments(&th)?;
            th[j] = theta[j] - h;
            let dn = self.mean_moments(&th)?;
            th[j] = theta[j];
            for r in 0..self.moment_dim {
                jac[(r, j)] = (up[r] - dn[r]) / (2.0 * h);
            }
        }
        Some(jac)
    }

    /// Centered sample covariance of the per-record moments at `theta`.
    fn moment_covariance(&self, theta: &[f64], mean: &DVector<f64>) -> DMatrix<f64> {
        let m = self.moment_dim;
        let mut cov = DMatrix::<f64>::zeros(m, m);
        let mut buf = vec![0.0; m];
        for i in 0..self.n_records {
            (self.moment)(theta, i, &mut buf);
            for r in 0..m {
                let dr = buf[r] - mean[r];
                for c in 0..=r {
                    cov[(r, c)] += dr * (buf[c] - mean[c]);
                }
            }
        }
        let nf = self.n_records as f64;
        for r in 0..m {
            for c in 0..=r {
                cov[(r, c)] /= nf;
                cov[(c, r)] = cov[(r, c)];
            }
        }
        cov
    }
}

fn pseudo_inverse(mat: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = mat.clone().svd(true, true);
    let max = svd.singular_values.max();
    svd.pseudo_inverse(1e-12 * max.max(1e-300)).expect("svd computed")
}

fn describe_null_directions(a: &DMatrix<f64>, tol_ratio: f64) -> String {
    let svd = a.clone().svd(false, true);
    let vt = svd.v_t.as_ref().expect("right singular vectors");
    let max = svd.singular_values.max();
    let mut parts = Vec::new();
    for k in 0..svd.singular_values.len() {
        if svd.singular_values[k] <= tol_ratio * max.max(1e-300) {
            let row = vt.row(k);
            let terms: Vec<String> = (0..row.len())
                .filter(|&j| row[j].abs() >= 0.3)
                .map(|j| format!("{:+.2}*theta[{j}]", row[j]))
                .collect();
            parts.push(terms.join(" "));
        }
    }
    if parts.is_empty() {
        "near-singular normal equations".to_string()
    } else {
        format!("unidentified directions: {}", parts.join("; "))
    }
}

fn solve_with_weight<M: Fn(&[f64], usize, &mut [f64])>(
    problem: &GmmProblem<M>,
    weight: Option<&DMatrix<f64>>,
    init: &[f64],
) -> Result<(Vec<f64>, GmmReport)> {
    let objective = |g: &DVector<f64>| -> f64 {
        match weight {
            None => g.dot(g),
            Some(w) => g.dot(&(w * g)),
        }
    };
    let mut theta = init.to_vec();
    let mut g = problem
        .mean_moments(&theta)
        .ok_or_else(|| Error::InvalidArgument("moment function not finite at initial parameter".into()))?;
    let mut q = objective(&g);
    let mut cond = f64::NAN;
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..problem.options.max_iterations {
        iterations = iter + 1;
        let jac = problem.central_jacobian(&theta).ok_or_else(|| {
            Error::InvalidArgument("moment function not finite near current iterate".into())
        })?;
        let svd_j = jac.clone().svd(false, false);
        cond = svd_j.singular_values.max() / svd_j.singular_values.min().max(1e-300);
        let wj = match weight {
            None => jac.clone(),
            Some(w) => w * &jac,
        };
        let normal = jac.transpose() * &wj;
        let rhs = -(jac.transpose() * match weight {
            None => g.clone(),
            Some(w) => w * &g,
        });
        let svd_n = normal.clone().svd(false, false);
        let (smax, smin) = (svd_n.singular_values.max(), svd_n.singular_values.min());
        if !(smin > 1e-12 * smax) {
            return Err(Error::RankDeficient {
                context: "gmm normal equations".into(),
                detail: describe_null_directions(&normal, 1e-12),
            });
        }
        let delta = normal.lu().solve(&rhs).expect("nonsingular by svd check");
        let grad_norm = rhs.norm();

        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> =
                theta.iter().zip(delta.iter()).map(|(t, d)| t + lambda * d).collect();
            if let Some(gt) = problem.mean_moments(&trial) {
                let qt = objective(&gt);
                if qt < q {
                    let param_change = lambda * delta.norm();
                    let obj_change = q - qt;
                    theta = trial;
                    g = gt;
                    q = qt;
                    accepted = true;
                    let theta_norm = theta.iter().map(|t| t * t).sum::<f64>().sqrt();
                    if param_change <= problem.options.param_tol * (1.0 + theta_norm)
                        || obj_change <= problem.options.objective_tol
                    {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 0.5;
        }
        if !accepted {
            // No descent direction left; at a stationary point this is
            // convergence, otherwise give up.
            if grad_norm < 1e-8 || q < 1e-18 {
                converged = true;
            } else {
                return Err(Error::NonConvergence { iterations, objective: q, best: theta });
            }
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence {
            iterations,
            objective: q,
            best: theta,
        });
    }
    Ok((
        theta,
        GmmReport {
            objective: q,
            iterations,
            jacobian_condition: cond,
            converged,
            weighting: Weighting::Identity,
        },
    ))
}

/// Minimizes the sample-moment quadratic form.
pub fn gmm_solve<M: Fn(&[f64], usize, &mut [f64])>(problem: &GmmProblem<M>) -> Result<GmmSolution> {
    if problem.moment_dim < problem.param_dim {
        return Err(Error::InvalidArgument(format!(
            "under-identified moment system: {} moments < {} parameters",
            problem.moment_dim, problem.param_dim
        )));
    }
    if problem.n_records == 0 {
        return Err(Error::Positivity("gmm_solve: empty data".into()));
    }
    if problem.init.len() != problem.param_dim {
        return Err(Error::InvalidArgument("initial parameter has wrong dimension".into()));
    }
    let (theta1, report) = solve_with_weight(problem, None, &problem.init)?;
    match problem.options.weighting {
        Weighting::Identity => Ok(GmmSolution { params: theta1, report }),
        Weighting::TwoStep => {
            let mean = problem.mean_moments(&theta1).expect("finite at solution");
            let cov = problem.moment_covariance(&theta1, &mean);
            let w = pseudo_inverse(&cov);
            let (theta2, mut report2) = solve_with_weight(problem, Some(&w), &theta1)?;
            report2.weighting = Weighting::TwoStep;
            report2.iterations += report.iterations;
            Ok(GmmSolution { params: theta2, report: report2 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::rng::{RngStream, SeedSpec};

    #[test]
    fn identity_moment_solves_exactly() {
        let problem = GmmProblem {
            moment: |theta: &[f64], _i: usize, out: &mut [f64]| out[0] = theta[0] - 3.0,
            n_records: 10,
            param_dim: 1,
            moment_dim: 1,
            init: vec![0.0],
            options: GmmOptions::default(),
        };
        let sol = gmm_solve(&problem).unwrap();
        assert!((sol.params[0] - 3.0).abs() < 1e-10, "theta = {}", sol.params[0]);
        assert!(sol.report.objective < 1e-18);
    }

    fn linear_data(n: usize, p: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut s = RngStream::from_spec(SeedSpec::new(seed, 0));
        let truth: Vec<f64> = (0..p).map(|j| 0.5 * (j as f64 + 1.0)).collect();
        let mut xs = vec![vec![0.0; p]; n];
        let mut y = vec![0.0; n];
        for i in 0..n {
            let mut mean = 0.0;
            for j in 0..p {
                let v = if j == 0 { 1.0 } else { s.normal() };
                xs[i][j] = v;
                mean += truth[j] * v;
            }
            y[i] = mean + 0.3 * s.normal();
        }
        (xs, y)
    }

    #[test]
    fn just_identified_linear_matches_least_squares() {
        let (xs, y) = linear_data(500, 3, 21);
        let n = y.len();
        let problem = GmmProblem {
            moment: |theta: &[f64], i: usize, out: &mut [f64]| {
                let resid = y[i] - xs[i].iter().zip(theta).map(|(x, t)| x * t).sum::<f64>();
                for j in 0..3 {
                    out[j] = xs[i][j] * resid;
                }
            },
            n_records: n,
            param_dim: 3,
            moment_dim: 3,
            init: vec![0.0; 3],
            options: GmmOptions::default(),
        };
        let sol = gmm_solve(&problem).unwrap();
        // Closed-form least-squares oracle.
        let x = DMatrix::from_fn(n, 3, |i, j| xs[i][j]);
        let yv = DVector::from_column_slice(&y);
        let closed = (x.transpose() * &x).lu().solve(&(x.transpose() * yv)).unwrap();
        for j in 0..3 {
            assert!(
                (sol.params[j] - closed[j]).abs() < 1e-8,
                "theta[{j}] = {} vs {}",
                sol.params[j],
                closed[j]
            );
        }
    }

    #[test]
    fn two_step_matches_closed_form_gls() {
        // Over-identified: 4 instruments, 2 parameters, heteroskedastic noise.
        let n = 2000;
        let mut s = RngStream::from_spec(SeedSpec::new(77, 0));
        let mut x = vec![[0.0f64; 2]; n];
        let mut z = vec![[0.0f64; 4]; n];
        let mut y = vec![0.0f64; n];
        let truth = [1.0, -0.7];
        for i in 0..n {
            let z1 = s.normal();
            let z2 = s.normal();
            let z3 = s.normal();
            z[i] = [1.0, z1, z2, z3];
            x[i] = [1.0, 0.8 * z1 + 0.5 * z2 + 0.3 * z3 + 0.2 * s.normal()];
            let noise = (0.5 + 0.5 * z1 * z1) * s.normal();
            y[i] = truth[0] * x[i][0] + truth[1] * x[i][1] + noise;
        }
        let problem = GmmProblem {
            moment: |theta: &[f64], i: usize, out: &mut [f64]| {
                let resid = y[i] - theta[0] * x[i][0] - theta[1] * x[i][1];
                for j in 0..4 {
                    out[j] = z[i][j] * resid;
                }
            },
            n_records: n,
            param_dim: 2,
            moment_dim: 4,
            init: vec![0.0; 2],
            options: GmmOptions { weighting: Weighting::TwoStep, ..GmmOptions::default() },
        };
        let sol = gmm_solve(&problem).unwrap();

        // Closed-form two-step GMM oracle computed directly from matrices.
        let nf = n as f64;
        let zm = DMatrix::from_fn(n, 4, |i, j| z[i][j]);
        let xm = DMatrix::from_fn(n, 2, |i, j| x[i][j]);
        let yv = DVector::from_column_slice(&y);
        let m = zm.transpose() * &xm / nf;
        let v = zm.transpose() * &yv / nf;
        let step1 = (m.transpose() * &m).lu().solve(&(m.transpose() * &v)).unwrap();
        let mut cov = DMatrix::<f64>::zeros(4, 4);
        let gbar = &v - &m * &step1;
        for i in 0..n {
            let resid = y[i] - step1[0] * x[i][0] - step1[1] * x[i][1];
            for r in 0..4 {
                for c in 0..4 {
                    cov[(r, c)] += (z[i][r] * resid - gbar[r]) * (z[i][c] * resid - gbar[c]);
                }
            }
        }
        cov /= nf;
        let w = cov.try_inverse().unwrap();
        let lhs = m.transpose() * &w * &m;
        let rhs = m.transpose() * &w * &v;
        let closed = lhs.lu().solve(&rhs).unwrap();
        for j in 0..2 {
            assert!(
                (sol.params[j] - closed[j]).abs() < 1e-6,
                "theta[{j}] = {} vs gls {}",
                sol.params[j],
                closed[j]
            );
        }
        assert_eq!(sol.report.weighting, Weighting::TwoStep);
    }

    #[test]
    fn unidentified_direction_is_named() {
        // theta[1] never enters the moments.
        let problem = GmmProblem {
            moment: |theta: &[f64], _i: usize, out: &mut [f64]| {
                out[0] = theta[0] - 1.0;
                out[1] = 2.0 * theta[0] - 2.0;
            },
            n_records: 5,
            param_dim: 2,
            moment_dim: 2,
            init: vec![0.0, 0.0],
            options: GmmOptions::default(),
        };
        match gmm_solve(&problem) {
            Err(Error::RankDeficient { detail, .. }) => {
                assert!(detail.contains("theta[1]"), "detail: {detail}");
            }
            other => panic!("expected rank deficiency, got {other:?}"),
        }
    }

    #[test]
    fn iteration_cap_returns_best_iterate() {
        // exp(theta) has no root; each Gauss-Newton step moves theta by about
        // -1, so a short cap stops well before the tolerances engage.
        let problem = GmmProblem {
            moment: |theta: &[f64], _i: usize, out: &mut [f64]| out[0] = theta[0].exp(),
            n_records: 3,
            param_dim: 1,
            moment_dim: 1,
            init: vec![5.0],
            options: GmmOptions { max_iterations: 6, ..GmmOptions::default() },
        };
        match gmm_solve(&problem) {
            Err(Error::NonConvergence { best, objective, iterations }) => {
                assert!(best[0] < 5.0);
                assert!(objective > 0.0);
                assert_eq!(iterations, 6);
            }
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn under_identified_rejected() {
        let problem = GmmProblem {
            moment: |_: &[f64], _: usize, out: &mut [f64]| out[0] = 0.0,
            n_records: 3,
            param_dim: 2,
            moment_dim: 1,
            init: vec![0.0; 2],
            options: GmmOptions::default(),
        };
        assert!(matches!(gmm_solve(&problem), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn central_jacobian_agrees_with_forward_difference() {
        let n = 200;
        let mut s = RngStream::from_spec(SeedSpec::new(5, 1));
        let xs: Vec<f64> = (0..n).map(|_| s.normal()).collect();
        let problem = GmmProblem {
            moment: |theta: &[f64], i: usize, out: &mut [f64]| {
                out[0] = (theta[0] + theta[1] * xs[i]).tanh() - 0.3;
                out[1] = xs[i] * ((theta[0] + theta[1] * xs[i]).sin());
            },
            n_records: n,
            param_dim: 2,
            moment_dim: 2,
            init: vec![0.1, 0.2],
            options: GmmOptions::default(),
        };
        let theta = [0.4, -0.6];
        let central = problem.central_jacobian(&theta).unwrap();
        // Independent forward-difference computation.
        let base = problem.mean_moments(&theta).unwrap();
        for j in 0..2 {
            let h = 1e-7f64.max(1e-7 * theta[j].abs());
            let mut th = theta.to_vec();
            th[j] += h;
            let up = problem.mean_moments(&th).unwrap();
            for r in 0..2 {
                let fwd = (up[r] - base[r]) / h;
                let rel = (central[(r, j)] - fwd).abs() / central[(r, j)].abs().max(1e-8);
                assert!(rel < 1e-4, "entry ({r},{j}): central {} fwd {fwd}", central[(r, j)]);
            }
        }
    }
}
