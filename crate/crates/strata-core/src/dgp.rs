//! Synthetic data-generating mechanism with derived parameter constraints,
//! plus closed-form and Monte Carlo ground-truth oracles.
//!
//! Generation steps per record: bivariate-normal covariates (A, C); probit
//! treatment Z; bivariate-normal (U, W) given (Z, A, C) with slopes
//! constrained so W is independent of (Z, A) given (U, C); ordered selection
//! of the principal stratum from a latent index; and a conditional-normal
//! (or Bernoulli-probit) outcome with stratum-specific intercepts.

use crate::dataset::{Dataset, LatentTruth};
use crate::error::{Error, Result};
use crate::models::{
    self, stratum_from_latent, stratum_s, BridgeParams, LinkKind, OrderedProbitParams,
    OutcomeParams, PrincipalStratum, TreatmentParams, WModelParams, STRATA,
};
use crate::numerics::normal;
use crate::numerics::rng::{RngStream, SeedSpec};
use serde::{Deserialize, Serialize};

/// Full simulation configuration. Field defaults reproduce the reference
/// noncompliance design; `confounding` scales how strongly the unmeasured
/// variable drives stratum selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub n: usize,

    // Covariate block: (A, C) bivariate normal.
    pub mean_a: f64,
    pub mean_c: f64,
    pub sd_a: f64,
    pub sd_c: f64,
    pub corr_ac: f64,

    // Treatment probit index on (1, A, C).
    pub treat_intercept: f64,
    pub treat_slope_a: f64,
    pub treat_slope_c: f64,

    // Unmeasured confounder U given (Z, A, C).
    pub conf_intercept: f64,
    pub conf_slope_z: f64,
    pub conf_slope_a: f64,
    pub conf_slope_c: f64,
    pub conf_slope_c_sq: f64,
    pub conf_sd: f64,

    // Proxy intermediate W: free coefficients; the Z, A and C^2 slopes are
    // derived so that W is independent of (Z, A) given (U, C) and the
    // conditional mean of U stays linear.
    pub proxy_intercept: f64,
    pub proxy_slope_c: f64,
    pub proxy_sd: f64,
    pub conf_proxy_corr: f64,

    // Stratum selection index and threshold gap.
    pub sel_intercept: f64,
    pub sel_slope_w: f64,
    /// Coefficient of U in the selection index (the confounding strength).
    pub confounding: f64,
    pub sel_slope_c: f64,
    pub log_threshold_gap: f64,

    // Outcome block.
    pub outcome_intercepts: [[f64; 3]; 2],
    pub outcome_slope_a: f64,
    pub outcome_slope_w: f64,
    pub outcome_slope_c: f64,
    pub outcome_sd: f64,
    pub outcome_link: LinkKind,

    /// Mask Y for records with S = 0 (truncation-by-death output mode).
    pub truncate_outputs: bool,

    /// Diagnostic escape hatch: bypass the derived proxy slopes. Breaks the
    /// negative-control structure on purpose (used to falsify the
    /// compatibility check); not part of the serialized schema.
    #[serde(skip)]
    pub proxy_slope_overrides: Option<(f64, f64, f64)>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n: 1000,
            mean_a: 0.0,
            mean_c: 0.0,
            sd_a: 0.5,
            sd_c: 0.5,
            corr_ac: 0.5,
            treat_intercept: 0.0,
            treat_slope_a: 1.0,
            treat_slope_c: 1.0,
            conf_intercept: 1.0,
            conf_slope_z: 1.0,
            conf_slope_a: 1.5,
            conf_slope_c: 1.5,
            conf_slope_c_sq: -0.75,
            conf_sd: 0.5,
            proxy_intercept: 1.0,
            proxy_slope_c: 1.5,
            proxy_sd: 0.5,
            conf_proxy_corr: 0.5,
            sel_intercept: 0.5,
            sel_slope_w: 0.5,
            confounding: 0.2,
            sel_slope_c: 1.0,
            log_threshold_gap: 0.0,
            outcome_intercepts: [[0.0, 1.0, 2.0], [2.0, 3.0, 4.0]],
            outcome_slope_a: 0.0,
            outcome_slope_w: 0.0,
            outcome_slope_c: 1.0,
            outcome_sd: 0.5,
            outcome_link: LinkKind::Linear,
            truncate_outputs: false,
            proxy_slope_overrides: None,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        for (name, v) in [
            ("sd_a", self.sd_a),
            ("sd_c", self.sd_c),
            ("conf_sd", self.conf_sd),
            ("proxy_sd", self.proxy_sd),
            ("outcome_sd", self.outcome_sd),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.corr_ac.abs() < 1.0) {
            return Err(Error::InvalidArgument("corr_ac must lie in (-1, 1)".into()));
        }
        if !(self.conf_proxy_corr.abs() < 1.0) || self.conf_proxy_corr == 0.0 {
            return Err(Error::InvalidArgument(
                "conf_proxy_corr must be nonzero and inside (-1, 1)".into(),
            ));
        }
        Ok(())
    }

    /// Derived slope of W on Z: keeps W independent of Z given (U, C).
    pub fn proxy_slope_z(&self) -> f64 {
        self.proxy_slope_overrides
            .map(|o| o.0)
            .unwrap_or(self.conf_slope_z * self.proxy_sd * self.conf_proxy_corr / self.conf_sd)
    }

    /// Derived slope of W on A: keeps W independent of A given (U, C).
    pub fn proxy_slope_a(&self) -> f64 {
        self.proxy_slope_overrides
            .map(|o| o.1)
            .unwrap_or(self.conf_slope_a * self.proxy_sd * self.conf_proxy_corr / self.conf_sd)
    }

    /// Derived quadratic C slope of W: keeps E(U | Z, A, W, C) linear in C.
    pub fn proxy_slope_c_sq(&self) -> f64 {
        self.proxy_slope_overrides
            .map(|o| o.2)
            .unwrap_or(self.conf_slope_c_sq * self.proxy_sd / (self.conf_sd * self.conf_proxy_corr))
    }

    /// Implied case tag of the outcome block.
    pub fn case(&self) -> models::Case {
        match (self.outcome_slope_a != 0.0, self.outcome_slope_w != 0.0) {
            (false, false) => models::Case::I,
            (true, false) => models::Case::II,
            (false, true) => models::Case::III,
            (true, true) => models::Case::IV,
        }
    }

    fn u_mean(&self, z: f64, a: f64, c: f64) -> f64 {
        self.conf_intercept
            + self.conf_slope_z * z
            + self.conf_slope_a * a
            + self.conf_slope_c * c
            + self.conf_slope_c_sq * c * c
    }

    fn w_mean(&self, z: f64, a: f64, c: f64) -> f64 {
        self.proxy_intercept
            + self.proxy_slope_z() * z
            + self.proxy_slope_a() * a
            + self.proxy_slope_c * c
            + self.proxy_slope_c_sq() * c * c
    }
}

/// Draws a dataset (with latent truth attached) from the configuration.
pub fn generate(cfg: &SimConfig, seed: SeedSpec) -> Result<Dataset> {
    cfg.validate()?;
    let mut rng = RngStream::from_spec(seed);
    let n = cfg.n;
    let cov_ac = {
        let off = cfg.corr_ac * cfg.sd_a * cfg.sd_c;
        [[cfg.sd_a * cfg.sd_a, off], [off, cfg.sd_c * cfg.sd_c]]
    };
    let cov_uw = {
        let off = cfg.conf_proxy_corr * cfg.conf_sd * cfg.proxy_sd;
        [[cfg.conf_sd * cfg.conf_sd, off], [off, cfg.proxy_sd * cfg.proxy_sd]]
    };
    let gap = cfg.log_threshold_gap;

    let (mut zs, mut ss, mut ys) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut aa, mut ww, mut cc) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n));
    let (mut us, mut gs) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for _ in 0..n {
        let [a, c] = rng.mvn2([cfg.mean_a, cfg.mean_c], cov_ac)?;
        let pz = normal::cdf(cfg.treat_intercept + cfg.treat_slope_a * a + cfg.treat_slope_c * c);
        let z = rng.bernoulli(pz);
        let zf = f64::from(z);
        let [u, w] = rng.mvn2([cfg.u_mean(zf, a, c), cfg.w_mean(zf, a, c)], cov_uw)?;
        let g_star = cfg.sel_intercept
            + cfg.sel_slope_w * w
            + cfg.confounding * u
            + cfg.sel_slope_c * c;
        let eps = rng.normal();
        let g = stratum_from_latent(g_star, eps, gap);
        let s = stratum_s(z, g);
        let mean_y = cfg.outcome_intercepts[usize::from(z)][g.index()]
            + cfg.outcome_slope_a * a
            + cfg.outcome_slope_w * w
            + cfg.outcome_slope_c * c;
        let y = match cfg.outcome_link {
            LinkKind::Linear => mean_y + cfg.outcome_sd * rng.normal(),
            LinkKind::Probit => f64::from(rng.bernoulli(normal::cdf(mean_y))),
        };
        zs.push(z);
        ss.push(s);
        ys.push(if cfg.truncate_outputs && s == 0 { None } else { Some(y) });
        aa.push(a);
        ww.push(w);
        cc.push(c);
        us.push(u);
        gs.push(g);
    }
    Dataset::new(zs, ss, ys, aa, ww, vec![cc], Some(LatentTruth { u: us, g: gs }))
}

/// True treatment-model parameters implied by the configuration.
pub fn true_treatment_params(cfg: &SimConfig) -> TreatmentParams {
    TreatmentParams {
        beta0: cfg.treat_intercept,
        beta_a: cfg.treat_slope_a,
        beta_c: vec![cfg.treat_slope_c],
    }
}

/// True proxy-intermediate model implied by the configuration.
pub fn true_w_model_params(cfg: &SimConfig) -> WModelParams {
    WModelParams {
        gamma0: cfg.proxy_intercept,
        gamma_z: cfg.proxy_slope_z(),
        gamma_a: cfg.proxy_slope_a(),
        gamma_c1: vec![cfg.proxy_slope_c],
        gamma_c2: vec![cfg.proxy_slope_c_sq()],
        sigma_w: cfg.proxy_sd,
    }
}

/// True outcome parameters implied by the configuration.
pub fn true_outcome_params(cfg: &SimConfig) -> OutcomeParams {
    OutcomeParams::new(
        cfg.case(),
        cfg.outcome_link,
        cfg.outcome_intercepts,
        cfg.outcome_slope_a,
        cfg.outcome_slope_w,
        vec![cfg.outcome_slope_c],
    )
}

/// Closed-form bridge parameters implied by the configuration.
///
/// Conditional on (U, C), W is normal with mean m0 + m1 C + m2 C^2 + mu U
/// and variance s2; matching probit-normal expectations of the bridge index
/// against the selection probability pr(S = 1 | Z, C, U) term by term in
/// (1, Z, U, C, C^2) gives the coefficients below.
pub fn true_bridge_params(cfg: &SimConfig) -> Result<BridgeParams> {
    let mu = cfg.conf_proxy_corr * cfg.proxy_sd / cfg.conf_sd;
    let m0 = cfg.proxy_intercept - mu * cfg.conf_intercept;
    let m1 = cfg.proxy_slope_c - mu * cfg.conf_slope_c;
    let m2 = cfg.proxy_slope_c_sq() - mu * cfg.conf_slope_c_sq;
    let s2 = cfg.proxy_sd * cfg.proxy_sd * (1.0 - cfg.conf_proxy_corr * cfg.conf_proxy_corr);
    let zw = cfg.sel_slope_w;
    let ks_sq = 1.0 + zw * zw * s2;
    let b = zw + cfg.confounding / mu;
    let denom = ks_sq - b * b * s2;
    if !(denom > 0.0) {
        return Err(Error::Infeasible(format!(
            "no probit-form bridge exists for this configuration (discriminant {denom:e})"
        )));
    }
    let alpha_w = b / denom.sqrt();
    let kh = (1.0 + alpha_w * alpha_w * s2).sqrt();
    let r = kh / ks_sq.sqrt();
    let gap = cfg.log_threshold_gap.exp();
    Ok(BridgeParams {
        alpha0: r * (cfg.sel_intercept - gap + zw * m0) - alpha_w * m0,
        alpha1: cfg.log_threshold_gap + r.ln(),
        alpha_w,
        alpha_c1: vec![r * (zw * m1 + cfg.sel_slope_c) - alpha_w * m1],
        alpha_c2: vec![m2 * (r * zw - alpha_w)],
    })
}

/// Closed-form ordered-probit strata parameters implied by the
/// configuration: integrate U out of the selection index given (Z, X).
pub fn true_ordered_probit_params(cfg: &SimConfig) -> OrderedProbitParams {
    let uw = cfg.conf_proxy_corr * cfg.conf_sd / cfg.proxy_sd;
    let r2 = cfg.conf_proxy_corr * cfg.conf_proxy_corr;
    let u0 = cfg.conf_intercept - uw * cfg.proxy_intercept;
    let uz = cfg.conf_slope_z * (1.0 - r2);
    let ua = cfg.conf_slope_a * (1.0 - r2);
    let uc = cfg.conf_slope_c - uw * cfg.proxy_slope_c;
    let var_u = cfg.conf_sd * cfg.conf_sd * (1.0 - r2);
    let zu = cfg.confounding;
    let ku = (1.0 + zu * zu * var_u).sqrt();
    OrderedProbitParams {
        psi0: (cfg.sel_intercept + zu * u0) / ku,
        psi1: cfg.log_threshold_gap - ku.ln(),
        psi_z: zu * uz / ku,
        psi_w: (cfg.sel_slope_w + zu * uw) / ku,
        psi_a: zu * ua / ku,
        psi_c: vec![(cfg.sel_slope_c + zu * uc) / ku],
    }
}

/// Ground-truth summaries for acceptance tests.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OracleTruth {
    /// Intercept contrasts per stratum (exact under the linear link).
    pub delta_analytic: Option<[f64; 3]>,
    /// Monte Carlo effect estimates per stratum `[nn, sc, ss]`.
    pub delta_mc: [f64; 3],
    /// Monte Carlo standard errors of `delta_mc`.
    pub delta_mc_se: [f64; 3],
    /// Marginal stratum proportions `[nn, sc, ss]`.
    pub pr_g: [f64; 3],
    /// Stratum proportions by arm: `pr_g_given_z[z][g]`.
    pub pr_g_given_z: [[f64; 3]; 2],
    pub n_mc: usize,
}

impl OracleTruth {
    pub fn delta(&self, g: PrincipalStratum) -> f64 {
        match self.delta_analytic {
            Some(d) => d[g.index()],
            None => self.delta_mc[g.index()],
        }
    }
}

/// Brute-force truth by direct Monte Carlo over latent records, with the
/// analytic intercept-contrast branch alongside as a cross-check.
pub fn oracle_truth(cfg: &SimConfig, n_mc: usize, seed: SeedSpec) -> Result<OracleTruth> {
    let mc_cfg = SimConfig { n: n_mc, truncate_outputs: false, ..cfg.clone() };
    let mut rng = RngStream::from_spec(seed);
    let cov_ac = {
        let off = cfg.corr_ac * cfg.sd_a * cfg.sd_c;
        [[cfg.sd_a * cfg.sd_a, off], [off, cfg.sd_c * cfg.sd_c]]
    };
    let cov_uw = {
        let off = cfg.conf_proxy_corr * cfg.conf_sd * cfg.proxy_sd;
        [[cfg.conf_sd * cfg.conf_sd, off], [off, cfg.proxy_sd * cfg.proxy_sd]]
    };
    let mut count = [0usize; 3];
    let mut count_by_z = [[0usize; 3]; 2];
    let mut z_total = [0usize; 2];
    let mut sum = [0.0f64; 3];
    let mut sum_sq = [0.0f64; 3];
    for _ in 0..n_mc {
        let [a, c] = rng.mvn2([cfg.mean_a, cfg.mean_c], cov_ac)?;
        let pz = normal::cdf(cfg.treat_intercept + cfg.treat_slope_a * a + cfg.treat_slope_c * c);
        let z = rng.bernoulli(pz);
        let zf = f64::from(z);
        let [u, w] = rng.mvn2([mc_cfg.u_mean(zf, a, c), mc_cfg.w_mean(zf, a, c)], cov_uw)?;
        let g_star =
            cfg.sel_intercept + cfg.sel_slope_w * w + cfg.confounding * u + cfg.sel_slope_c * c;
        let g = stratum_from_latent(g_star, rng.normal(), cfg.log_threshold_gap);
        let slope_part = cfg.outcome_slope_a * a + cfg.outcome_slope_w * w + cfg.outcome_slope_c * c;
        // Both potential outcomes for the same unit.
        let diff = match cfg.outcome_link {
            LinkKind::Linear => {
                let y1 = cfg.outcome_intercepts[1][g.index()] + slope_part + cfg.outcome_sd * rng.normal();
                let y0 = cfg.outcome_intercepts[0][g.index()] + slope_part + cfg.outcome_sd * rng.normal();
                y1 - y0
            }
            LinkKind::Probit => {
                let p1 = normal::cdf(cfg.outcome_intercepts[1][g.index()] + slope_part);
                let p0 = normal::cdf(cfg.outcome_intercepts[0][g.index()] + slope_part);
                f64::from(rng.bernoulli(p1)) - f64::from(rng.bernoulli(p0))
            }
        };
        let gi = g.index();
        count[gi] += 1;
        count_by_z[usize::from(z)][gi] += 1;
        z_total[usize::from(z)] += 1;
        sum[gi] += diff;
        sum_sq[gi] += diff * diff;
    }
    let mut delta_mc = [f64::NAN; 3];
    let mut delta_mc_se = [f64::NAN; 3];
    let mut pr_g = [0.0; 3];
    for gi in 0..3 {
        pr_g[gi] = count[gi] as f64 / n_mc as f64;
        if count[gi] > 1 {
            let m = sum[gi] / count[gi] as f64;
            delta_mc[gi] = m;
            let var = (sum_sq[gi] / count[gi] as f64 - m * m).max(0.0);
            delta_mc_se[gi] = (var / count[gi] as f64).sqrt();
        }
    }
    let mut pr_g_given_z = [[0.0; 3]; 2];
    for z in 0..2 {
        for gi in 0..3 {
            pr_g_given_z[z][gi] = count_by_z[z][gi] as f64 / (z_total[z].max(1)) as f64;
        }
    }
    let delta_analytic = match cfg.outcome_link {
        LinkKind::Linear => {
            let mut d = [0.0; 3];
            for g in STRATA {
                d[g.index()] =
                    cfg.outcome_intercepts[1][g.index()] - cfg.outcome_intercepts[0][g.index()];
            }
            Some(d)
        }
        LinkKind::Probit => None,
    };
    Ok(OracleTruth { delta_analytic, delta_mc, delta_mc_se, pr_g, pr_g_given_z, n_mc })
}

/// Per-cell residual of the bridge equation E(S - h | Z, C-bin, U-bin).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CompatReport {
    /// Worst |cell residual| / (4 / sqrt(cell size)).
    pub worst_ratio: f64,
    pub max_abs_residual: f64,
    pub cells: usize,
}

/// Verifies that the closed-form bridge reproduces pr(S = 1 | Z, C, U) by
/// cell-averaged residuals over a latent grid; the negative control for
/// this check is a configuration with the derived constraints overridden.
pub fn verify_bridge_compatibility(
    cfg: &SimConfig,
    n_mc: usize,
    seed: SeedSpec,
) -> Result<CompatReport> {
    let data = generate(&SimConfig { n: n_mc, ..cfg.clone() }, seed)?;
    let latent = data.latent().expect("generated data carries latent truth");
    let bridge = true_bridge_params(cfg)?;
    let quantiles = |col: &[f64]| -> [f64; 3] {
        let mut v = col.to_vec();
        v.sort_by(|x, y| x.total_cmp(y));
        [v[v.len() / 4], v[v.len() / 2], v[3 * v.len() / 4]]
    };
    let cq = quantiles(data.c_col(0));
    let uq = quantiles(&latent.u);
    let bin = |cuts: &[f64; 3], v: f64| cuts.iter().take_while(|&&t| v > t).count();
    let mut sums = vec![0.0f64; 32];
    let mut counts = vec![0usize; 32];
    for i in 0..data.len() {
        let c = data.c_col(0)[i];
        let h = models::bridge_h(data.z()[i], data.w()[i], &[c], &bridge);
        let cell =
            usize::from(data.z()[i]) * 16 + bin(&cq, c) * 4 + bin(&uq, latent.u[i]);
        sums[cell] += f64::from(data.s()[i]) - h;
        counts[cell] += 1;
    }
    let mut worst_ratio = 0.0f64;
    let mut max_abs = 0.0f64;
    let mut cells = 0;
    for cell in 0..32 {
        if counts[cell] < 50 {
            continue;
        }
        cells += 1;
        let resid = sums[cell] / counts[cell] as f64;
        let limit = 4.0 / (counts[cell] as f64).sqrt();
        worst_ratio = worst_ratio.max(resid.abs() / limit);
        max_abs = max_abs.max(resid.abs());
    }
    Ok(CompatReport { worst_ratio, max_abs_residual: max_abs, cells })
}
