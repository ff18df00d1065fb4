use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter vector has length {got}, model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate scale: {primitive}.{axis} = {value}")]
    DegenerateScale {
        primitive: String,
        axis: char,
        value: f64,
    },

    #[error("top radius out of range: {primitive}.r_top = {value}")]
    TopRadiusOutOfRange { primitive: String, value: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("projection left feasible region: {0}")]
    Infeasible(String),

    #[error("size mismatch: {0}")]
    SizeMismatch(String),

    #[error("document error: {0}")]
    Document(String),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
