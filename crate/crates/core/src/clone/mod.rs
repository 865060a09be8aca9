//! Type-2 clone detection over Java sources.
//!
//! Units are compared as normalized token streams: comments and layout are
//! dropped and qualified type names are reduced to their simple names, so a
//! copy that was only re-commented, reformatted or moved to another package
//! compares equal to its original. Identifiers and literals are compared
//! verbatim.

mod detect;
pub mod lexer;
mod normalize;

pub use detect::{
    compare_units, detect_artifact_clone, ArtifactCloneReport, ClassCloneVerdict, CloneConfig, CloneError,
    RelocationMap, SourceDiagnostics, SourceSet,
};
pub use lexer::LexError;
pub use normalize::{normalize, NormalizedUnit, Token, TokenKind};

pub(crate) use normalize::qualifier_len;
