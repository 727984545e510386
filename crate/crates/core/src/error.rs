use std::fmt;

use serde::Serialize;

/// Pipeline stage names, used to tag errors and report outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Monotonicity,
    Dissipativity,
    Stability,
    Attractor,
    Alpha,
    Gamma,
    Delta,
    Trajectory,
    Attraction,
    Comparability,
    Recurrence,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Stage::Monotonicity => "monotonicity",
            Stage::Dissipativity => "dissipativity",
            Stage::Stability => "stability",
            Stage::Attractor => "attractor",
            Stage::Alpha => "alpha",
            Stage::Gamma => "gamma",
            Stage::Delta => "delta",
            Stage::Trajectory => "trajectory",
            Stage::Attraction => "attraction",
            Stage::Comparability => "comparability",
            Stage::Recurrence => "recurrence",
        };
        f.write_str(name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("integration diverged at t = {time} (|u| = {norm:e})")]
    Divergence { time: f64, norm: f64 },

    #[error("not dissipative at tested scale: {0}")]
    NotDissipative(String),

    #[error("pullback limit did not converge: Hausdorff residual {residual:e} >= threshold {threshold:e}")]
    RefinementNeeded { residual: f64, threshold: f64 },

    #[error(
        "limit fiber is not a singleton: tail diameter {diameter:e} >= {tol:e} over {returns} returns \
         (horizon too short, or the monotonicity/stability hypotheses fail)"
    )]
    SingletonViolation { diameter: f64, tol: f64, returns: usize },

    #[error("no base returns within eps = {eps} before horizon {horizon}")]
    NoReturns { eps: f64, horizon: f64 },

    #[error("entire trajectory reconstruction landed {achieved:e} away from the target (requested {requested:e})")]
    ReconstructionFailure { achieved: f64, requested: f64 },

    #[error("comparability failed at eps = {eps}: no positive delta above {floor:e}")]
    ComparabilityFailure { eps: f64, floor: f64 },

    #[error("strong comparability failed: tail oscillation {oscillation:e} >= {tol:e} along sequence toward {target:?}")]
    StrongComparabilityFailure { oscillation: f64, tol: f64, target: Vec<f64>, times: Vec<f64> },

    #[error("attraction not observed: distance {tail_max:e} >= {tol:e} on the second half of the horizon, or window maxima increase")]
    AttractionFailure { tail_max: f64, tol: f64 },

    #[error("limit point lies {distance:e} from the attractor fiber (allowed {tol:e})")]
    MembershipFailure { distance: f64, tol: f64 },

    #[error("trajectory shows no recurrence at the tested scale: {0}")]
    NotRecurrent(String),

    #[error("empty point cloud")]
    EmptyCloud,

    #[error("no fiber available over base point {0:?}")]
    MissingFiber(Vec<f64>),

    #[error("hypothesis check failed: {0}")]
    Hypothesis(String),

    #[error("internal consistency violation: {0}")]
    Internal(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn at(self, stage: Stage) -> Error {
        match self {
            e @ Error::Stage { .. } => e,
            other => Error::Stage { stage, source: Box::new(other) },
        }
    }

    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }

    /// The error with any stage wrapper removed.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Process exit code: 2 hypothesis failure, 3 numerical non-convergence, 4 invalid input.
    pub fn exit_code(&self) -> i32 {
        match self.root() {
            Error::NotDissipative(_) | Error::Hypothesis(_) => 2,
            Error::InvalidArgument(_)
            | Error::DimensionMismatch { .. }
            | Error::Config(_)
            | Error::Json(_)
            | Error::Csv(_)
            | Error::Io(_) => 4,
            _ => 3,
        }
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}
