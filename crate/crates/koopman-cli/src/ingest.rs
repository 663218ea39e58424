//! Snapshot CSV ingestion.

use std::path::Path;

use koopman::{Result, SnapshotPairs};

/// Parses a snapshot CSV (`x1..xN,y1..yN` header); the state dimension is
/// inferred from the header. Malformed input yields a parse error carrying
/// the offending line number.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<SnapshotPairs> {
    SnapshotPairs::load_csv(path)
}
