//! Parametric model family: the confounding bridge, treatment and
//! proxy-intermediate nuisance models, the ordered-probit strata model, and
//! the case-structured outcome means.

use crate::error::{Error, Result};
use crate::numerics::normal;
use serde::{Deserialize, Serialize};

/// Principal stratum: joint potential values of the intermediate variable.
/// `Never` = (0,0), `Complier` = (1,0), `Always` = (1,1). Defiers are ruled
/// out by the monotonicity mode and cannot be constructed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PrincipalStratum {
    /// Intermediate event never occurs ("nn").
    #[serde(rename = "nn")]
    Never,
    /// Intermediate event occurs only under treatment ("sc").
    #[serde(rename = "sc")]
    Complier,
    /// Intermediate event occurs under both arms ("ss").
    #[serde(rename = "ss")]
    Always,
}

pub const STRATA: [PrincipalStratum; 3] =
    [PrincipalStratum::Never, PrincipalStratum::Complier, PrincipalStratum::Always];

impl PrincipalStratum {
    /// Index used for intercept tables: nn = 0, sc = 1, ss = 2 (the latent
    /// ordering of the selection model).
    pub fn index(self) -> usize {
        match self {
            PrincipalStratum::Never => 0,
            PrincipalStratum::Complier => 1,
            PrincipalStratum::Always => 2,
        }
    }

    pub fn token(self) -> &'static str {
        match self {
            PrincipalStratum::Never => "nn",
            PrincipalStratum::Complier => "sc",
            PrincipalStratum::Always => "ss",
        }
    }

    pub fn from_token(tok: &str) -> Result<Self> {
        match tok {
            "nn" => Ok(PrincipalStratum::Never),
            "sc" => Ok(PrincipalStratum::Complier),
            "ss" => Ok(PrincipalStratum::Always),
            other => Err(Error::Schema(format!("unknown stratum token `{other}`"))),
        }
    }
}

impl std::fmt::Display for PrincipalStratum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.token())
    }
}

/// Covariate view of one record: negative-control exposure, negative-control
/// intermediate, and the baseline block.
#[derive(Debug, Clone, Copy)]
pub struct Covariates<'a> {
    pub a: f64,
    pub w: f64,
    pub c: &'a [f64],
}

/// Confounding bridge h(Z, W, C) = Phi(a0 + exp(a1) Z + aw W + ac1.C + ac2.C^2).
/// The exp(a1) parameterization keeps h strictly increasing in z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BridgeParams {
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha_w: f64,
    pub alpha_c1: Vec<f64>,
    pub alpha_c2: Vec<f64>,
}

impl BridgeParams {
    pub fn dim(&self) -> usize {
        3 + self.alpha_c1.len() + self.alpha_c2.len()
    }

    pub fn from_flat(theta: &[f64], c_dim: usize) -> Self {
        BridgeParams {
            alpha0: theta[0],
            alpha1: theta[1],
            alpha_w: theta[2],
            alpha_c1: theta[3..3 + c_dim].to_vec(),
            alpha_c2: theta[3 + c_dim..3 + 2 * c_dim].to_vec(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = vec![self.alpha0, self.alpha1, self.alpha_w];
        out.extend_from_slice(&self.alpha_c1);
        out.extend_from_slice(&self.alpha_c2);
        out
    }

    /// Linear index before the probit link, without the treatment shift.
    #[inline]
    pub fn base_index(&self, w: f64, c: &[f64]) -> f64 {
        let mut idx = self.alpha0 + self.alpha_w * w;
        for (j, &cj) in c.iter().enumerate() {
            idx += self.alpha_c1[j] * cj + self.alpha_c2[j] * cj * cj;
        }
        idx
    }
}

/// Evaluates the bridge function; strictly inside (0, 1).
#[inline]
pub fn bridge_h(z: u8, w: f64, c: &[f64], p: &BridgeParams) -> f64 {
    let mut idx = p.base_index(w, c);
    if z == 1 {
        idx += p.alpha1.exp();
    }
    normal::cdf(idx)
}

/// Treatment model pr(Z = 1 | A, C) = Phi(b0 + ba A + bc.C).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentParams {
    pub beta0: f64,
    pub beta_a: f64,
    pub beta_c: Vec<f64>,
}

pub fn treatment_prob(a: f64, c: &[f64], p: &TreatmentParams) -> f64 {
    let mut idx = p.beta0 + p.beta_a * a;
    for (j, &cj) in c.iter().enumerate() {
        idx += p.beta_c[j] * cj;
    }
    normal::cdf(idx)
}

/// Proxy-intermediate model W | Z, A, C ~ N(q(Z, A, C), sigma_w^2) with
/// q linear in (1, Z, A, C, C^2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WModelParams {
    pub gamma0: f64,
    pub gamma_z: f64,
    pub gamma_a: f64,
    pub gamma_c1: Vec<f64>,
    pub gamma_c2: Vec<f64>,
    pub sigma_w: f64,
}

impl WModelParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma_w > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma_w must be positive, got {}",
                self.sigma_w
            )));
        }
        Ok(())
    }
}

/// Conditional mean q(z, a, c) of the proxy intermediate.
pub fn w_mean(z: u8, a: f64, c: &[f64], p: &WModelParams) -> f64 {
    let mut q = p.gamma0 + p.gamma_z * f64::from(z) + p.gamma_a * a;
    for (j, &cj) in c.iter().enumerate() {
        q += p.gamma_c1[j] * cj + p.gamma_c2[j] * cj * cj;
    }
    q
}

/// Ordered-probit strata model. The threshold gap enters as exp(psi1) so the
/// three class probabilities are valid for any parameter value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrderedProbitParams {
    pub psi0: f64,
    pub psi1: f64,
    pub psi_z: f64,
    pub psi_w: f64,
    pub psi_a: f64,
    pub psi_c: Vec<f64>,
}

impl OrderedProbitParams {
    #[inline]
    pub fn index(&self, z: u8, a: f64, w: f64, c: &[f64]) -> f64 {
        let mut idx = self.psi0 + self.psi_z * f64::from(z) + self.psi_w * w + self.psi_a * a;
        for (j, &cj) in c.iter().enumerate() {
            idx += self.psi_c[j] * cj;
        }
        idx
    }
}

/// Strata probabilities (pi_ss, pi_sc, pi_nn), each in [0,1], summing to 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiTriple {
    pub ss: f64,
    pub sc: f64,
    pub nn: f64,
}

impl PiTriple {
    pub fn get(&self, g: PrincipalStratum) -> f64 {
        match g {
            PrincipalStratum::Always => self.ss,
            PrincipalStratum::Complier => self.sc,
            PrincipalStratum::Never => self.nn,
        }
    }

    pub fn sum(&self) -> f64 {
        self.ss + self.sc + self.nn
    }
}

/// Class probabilities of the ordered-probit strata model.
pub fn ordered_probit_pi(z: u8, a: f64, w: f64, c: &[f64], p: &OrderedProbitParams) -> PiTriple {
    let idx = p.index(z, a, w, c);
    let upper = normal::cdf(idx);
    let lower = normal::cdf(idx - p.psi1.exp());
    PiTriple { ss: lower, sc: (upper - lower).max(0.0), nn: 1.0 - upper }
}

/// Deterministic map from (z, stratum) to the observed intermediate value.
#[inline]
pub fn stratum_s(z: u8, g: PrincipalStratum) -> u8 {
    match g {
        PrincipalStratum::Always => 1,
        PrincipalStratum::Complier => z,
        PrincipalStratum::Never => 0,
    }
}

/// Stratum implied by the latent selection value g_star + eps and the
/// threshold gap exp(psi1).
pub fn stratum_from_latent(g_star: f64, eps: f64, psi1: f64) -> PrincipalStratum {
    let v = g_star + eps;
    if v <= 0.0 {
        PrincipalStratum::Never
    } else if v <= psi1.exp() {
        PrincipalStratum::Complier
    } else {
        PrincipalStratum::Always
    }
}

/// Latent form of the potential intermediate: S_z = 1{G* + eps > (1-z) exp(psi1)}.
pub fn s_from_latent(z: u8, g_star: f64, eps: f64, psi1: f64) -> u8 {
    u8::from(g_star + eps > f64::from(1 - z) * psi1.exp())
}

/// Which covariates the outcome mean may depend on; driven by the
/// identification route in use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Case {
    /// Baseline covariates only: m(Z, G, C).
    #[serde(rename = "i")]
    I,
    /// Exposure proxy admitted: m(Z, G, A, C).
    #[serde(rename = "ii")]
    II,
    /// Intermediate proxy admitted: m(Z, G, W, C).
    #[serde(rename = "iii")]
    III,
    /// All covariates admitted: m(Z, G, A, W, C).
    #[serde(rename = "iv")]
    IV,
}

impl Case {
    pub fn admits_a(self) -> bool {
        matches!(self, Case::II | Case::IV)
    }

    pub fn admits_w(self) -> bool {
        matches!(self, Case::III | Case::IV)
    }
}

impl std::fmt::Display for Case {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Case::I => "i",
            Case::II => "ii",
            Case::III => "iii",
            Case::IV => "iv",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinkKind {
    Linear,
    Probit,
}

/// Outcome mean model with saturated (z, g) intercepts and slopes shared
/// across arms and strata. Slopes outside the case's admissible covariate
/// set are structurally zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeParams {
    /// Intercepts indexed `[z][stratum.index()]`.
    pub intercepts: [[f64; 3]; 2],
    pub slope_a: f64,
    pub slope_w: f64,
    pub slope_c: Vec<f64>,
    pub case: Case,
    pub link: LinkKind,
}

impl OutcomeParams {
    pub fn new(
        case: Case,
        link: LinkKind,
        intercepts: [[f64; 3]; 2],
        slope_a: f64,
        slope_w: f64,
        slope_c: Vec<f64>,
    ) -> Self {
        OutcomeParams {
            intercepts,
            slope_a: if case.admits_a() { slope_a } else { 0.0 },
            slope_w: if case.admits_w() { slope_w } else { 0.0 },
            slope_c,
            case,
            link,
        }
    }

    #[inline]
    pub fn linear_index(&self, z: u8, g: PrincipalStratum, x: Covariates) -> f64 {
        let mut idx = self.intercepts[usize::from(z)][g.index()];
        if self.case.admits_a() {
            idx += self.slope_a * x.a;
        }
        if self.case.admits_w() {
            idx += self.slope_w * x.w;
        }
        for (j, &cj) in x.c.iter().enumerate() {
            idx += self.slope_c[j] * cj;
        }
        idx
    }
}

/// Conditional outcome mean m(z, g, x); a probability under the probit link.
pub fn outcome_mean(z: u8, g: PrincipalStratum, x: Covariates, p: &OutcomeParams) -> f64 {
    let idx = p.linear_index(z, g, x);
    match p.link {
        LinkKind::Linear => idx,
        LinkKind::Probit => normal::cdf(idx),
    }
}
