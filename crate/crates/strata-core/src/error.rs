use thiserror::Error;

/// Pipeline stage tags used to locate failures in multi-step runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Bridge,
    Nuisance,
    OrderedProbit,
    Weights,
    Outcome,
    Pce,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::Bridge => "bridge",
            Stage::Nuisance => "nuisance",
            Stage::OrderedProbit => "ordered-probit",
            Stage::Weights => "weights",
            Stage::Outcome => "outcome",
            Stage::Pce => "pce",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no sign change over [{lo}, {hi}]: f(lo) = {f_lo:e}, f(hi) = {f_hi:e}")]
    NoSignChange { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("rank deficiency in {context}: {detail}")]
    RankDeficient { context: String, detail: String },

    #[error("perfect separation: probit coefficients diverge ({0})")]
    Separation(String),

    #[error("no convergence after {iterations} iterations (objective {objective:e})")]
    NonConvergence {
        iterations: usize,
        objective: f64,
        /// Best iterate found before giving up.
        best: Vec<f64>,
    },

    #[error("positivity violation: {0}")]
    Positivity(String),

    #[error("infeasible strata proportions: {0}")]
    Infeasible(String),

    #[error("unsupported outcome kind: {0}")]
    UnsupportedKind(String),

    #[error("invalid evidence: {0}")]
    InvalidEvidence(String),

    #[error("unreliable inference: {failed} of {total} bootstrap resamples failed")]
    UnreliableBootstrap { failed: usize, total: usize },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("stage {stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: Stage) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// The stage tag, if this error came out of a pipeline run.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
