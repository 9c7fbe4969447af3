use thiserror::Error;

use crate::poly::Exponents;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{which} has forbidden monomial with exponents {exp:?} (coefficient {coef})")]
    ConstraintViolation {
        which: &'static str,
        exp: Exponents,
        coef: f64,
    },

    #[error("horizontal vectors are attached to different base points")]
    BasePointMismatch,

    #[error("frame fields are dependent at the query point (rank {rank})")]
    DegenerateFrame { rank: usize },

    #[error("V, W, [V,W], [W,[V,W]] do not span (rank {rank})")]
    BasisFailure { rank: usize },

    #[error("{which} depends on z")]
    ZDependence { which: &'static str },

    #[error("frame has no normal-form coefficients")]
    NotNormalForm,

    #[error("characteristic field is not differentiable here: {0}")]
    NonDifferentiable(String),

    #[error("step size underflow at t = {t} (h = {h})")]
    StepFailure { t: f64, h: f64 },

    #[error("controls (u, v) = ({u}, {v}) at t = {t} are spacelike")]
    NotNonspacelike { t: f64, u: f64, v: f64 },

    #[error("sample {index} leaves the region |y| < x")]
    RegionViolation { index: usize },

    #[error("characteristic does not reach the initial surface within |t| <= {horizon}")]
    NoBoundaryHit { horizon: f64 },

    #[error("unknown region {0:?}")]
    UnknownRegion(String),

    #[error("invalid control piece: {0}")]
    InvalidControl(String),

    #[error("no endpoint falls in the probe slab")]
    EmptySlab,

    #[error("clouds were drawn with different seeds or sampler settings")]
    SeedMismatch,

    #[error("{0}")]
    InvalidInput(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
