//! Developer-annotated ground truth for bug-inducing commits, SZZ variants,
//! iterated-blame line tracing, and the evaluation machinery around them.
pub mod classify;
pub mod fixture;
pub mod git;
pub mod io;
pub mod metrics;
pub mod miner;
pub mod similarity;
pub mod szz;
pub mod trace;

pub use git::{BlameEntry, CommitId, CommitRef, DiffSet, FileDiff, GitError, Hunk, LineChange, LineKind, Repo};
pub use miner::{AbnormalCategory, AbnormalRecord, BugFixLink, MinedDataset};
pub use szz::{Algorithm, Prediction};
pub use trace::{ChainRole, TcMode, TraceChain};
