//! Bayesian clustering of zero-inflated multivariate compositional count
//! data with a discrete sparse Dirichlet-multinomial mixture.
//!
//! The model is a mixture of finite mixtures: a spike-and-slab prior on the
//! unnormalized mixture weights induces a zero-truncated binomial prior on
//! the number of components, and each component models its counts with a
//! zero-inflated Dirichlet-multinomial (ZIDM) likelihood in which per-cell
//! at-risk indicators separate structural zeros from sampling zeros. The
//! individual relative abundances and the per-taxon at-risk probabilities
//! are integrated out analytically, so the sampled state is only
//! (allocations, at-risk indicators, component concentrations, weights,
//! component count).
//!
//! Crate layout:
//! - [`model`]: domain types and the pure log-density kernels.
//! - [`sampler`]: the Metropolis-Hastings-within-Gibbs chain with the
//!   telescoping update for the number of components.
//! - [`posterior`]: co-clustering, partition search under the variation of
//!   information lower bound, adjusted Rand index, abundance and diversity
//!   summaries.
//! - [`simgen`]: synthetic compositional count generators, including a
//!   Dirichlet-tree multinomial generator driven by a Newick tree.
//! - [`io`]: CSV/JSON/binary file formats shared with the command-line
//!   front end.
//!
//! With the default `parallel` feature, replicate fits, multi-chain runs
//! and partition-search restarts fan out over rayon; each unit of work owns
//! an independently seeded RNG stream, so results are identical to the
//! sequential fallback.

pub mod data;
pub mod io;
pub mod math;
pub mod model;
pub mod newick;
pub mod posterior;
pub mod sampler;
pub mod simgen;

pub use data::CountMatrix;
pub use model::{Hyperparams, HyperSettings, KPrior, ZeroInflation};
pub use posterior::{CoClusterMatrix, Partition};
pub use sampler::{ChainState, DrawRecord, PosteriorDraws, SamplerConfig};

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("taxon {taxon} has a positive count but is marked structurally absent")]
    StructuralZeroConflict { taxon: usize },
    #[error("row has positive depth but no at-risk taxa")]
    NoAtRiskTaxa,
    #[error("component count {k} outside prior support 1..={k_max}")]
    KOutOfSupport { k: usize, k_max: usize },
    #[error("at-risk update requested for positive count at row {row}, column {col}")]
    GammaForcedPositive { row: usize, col: usize },
    #[error("no posterior draws available")]
    NoDraws,
    #[error("posterior draws carry no concentration traces")]
    NoXiTraces,
    #[error("newick parse error at byte {offset}: {message}")]
    NewickSyntax { offset: usize, message: String },
    #[error("{path}: parse error at row {row}, column {col}: {message}")]
    CsvParse {
        path: String,
        row: usize,
        col: usize,
        message: String,
    },
    #[error("target zero fraction {target} unachievable: floor at fully at-risk is {floor:.4}")]
    CalibrationFloor { target: f64, floor: f64 },
    #[error("generation failed: {0}")]
    Generation(String),
    #[error("calibration failed: {0}")]
    Calibration(String),
    #[error("sample ids missing from one input: {0:?}")]
    IdMismatch(Vec<String>),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: invalid JSON: {message}")]
    Json { path: String, message: String },
}

impl Error {
    /// Wrap an I/O error with the path it occurred on.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
