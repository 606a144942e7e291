use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("gaussian {index}: degenerate scales {scales:?} (two or more below machine epsilon)")]
    DegenerateGaussian { index: usize, scales: [f64; 3] },

    #[error("triangle {index}: degenerate face (vertices collinear)")]
    DegenerateFace { index: usize },

    #[error("numerical blowup at step {step}, particle {particle}: non-finite state")]
    NumericalBlowup { step: u64, particle: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("{}: parse error at byte {offset}: {message}", path.display())]
    PlyParse {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("{}: obj parse error at line {line}: {message}", path.display())]
    ObjParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("solver halted after frame {last_good_frame}: {source}")]
    SolverHalted {
        last_good_frame: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for config/input errors, 2 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_)
            | Error::PlyParse { .. }
            | Error::ObjParse { .. }
            | Error::DegenerateGaussian { .. } => 1,
            _ => 2,
        }
    }
}
