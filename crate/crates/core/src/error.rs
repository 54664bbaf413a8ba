use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid plane: {0}")]
    InvalidPlane(String),
    #[error("invalid pose: {0}")]
    InvalidPose(String),
    #[error("invalid basis: {0}")]
    InvalidBasis(String),
    #[error("invalid segment: {0}")]
    InvalidSegment(String),

    #[error("triangulation produced no triangles (input has {points} usable points)")]
    EmptyMesh { points: usize },
    #[error("plane extraction failed: {0}")]
    ExtractionFailed(String),
    #[error("no ground cluster within {tolerance_deg} deg of +z")]
    NoGround { tolerance_deg: f64 },
    #[error("no cluster approximately orthogonal to the ground plane")]
    DegenerateBasis,

    #[error("no plane correspondences survived matching")]
    NoCorrespondence,
    #[error("rotation is unobservable: source normals are all parallel")]
    UnobservableRotation,
    #[error("translation system is rank deficient (min eigenvalue {min_eigenvalue:e})")]
    RankDeficient { min_eigenvalue: f64 },
    #[error("registration failed: {0}")]
    RegistrationFailed(String),

    #[error("pose graph: {0}")]
    Graph(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("run aborted: {failed} of {total} frames failed")]
    TooManyFailures { failed: usize, total: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable tag used in CLI error summaries.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidPlane(_) => "invalid_plane",
            Error::InvalidPose(_) => "invalid_pose",
            Error::InvalidBasis(_) => "invalid_basis",
            Error::InvalidSegment(_) => "invalid_segment",
            Error::EmptyMesh { .. } => "empty_mesh",
            Error::ExtractionFailed(_) => "extraction_failed",
            Error::NoGround { .. } => "no_ground",
            Error::DegenerateBasis => "degenerate_basis",
            Error::NoCorrespondence => "no_correspondence",
            Error::UnobservableRotation => "unobservable_rotation",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::RegistrationFailed(_) => "registration_failed",
            Error::Graph(_) => "graph",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::TooManyFailures { .. } => "too_many_failures",
            Error::Config(_) => "config",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
