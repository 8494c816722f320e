use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
    #[error("degenerate beam: combined beamformer has zero norm")]
    DegenerateBeam,
    #[error("beamwidth measurement failed: {0}")]
    Measurement(&'static str),
    #[error("scenario error: {0}")]
    Scenario(&'static str),
    #[error("no correlation peak exceeds the threshold")]
    NoTarget,
    #[error("detected {found} targets, expected {expected}")]
    DetectionShortfall { expected: usize, found: usize },
    #[error("duplicate delay {0} in shift matrix")]
    SingularDesign(usize),
    #[error("ill-conditioned least-squares system (cond {cond:.3e}), delays {first} and {second}")]
    IllConditioned { cond: f64, first: usize, second: usize },
    #[error("zero reference coefficient for target {0}")]
    ZeroCoefficient(usize),
    #[error("degenerate frame pair: denominators are equal")]
    DegenerateFramePair,
    #[error("frame {0} is not available")]
    MissingFrame(usize),
    #[error("frame {frame} detected {found} targets, frame 0 detected {expected}")]
    Association { frame: usize, expected: usize, found: usize },
}
