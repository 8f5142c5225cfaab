//! Builds validated releases of a bilingual re-enacted dialog corpus.
//!
//! The pipeline reads conversation recordings, their EAF markup and three
//! metadata tables, reports problems as [`validate::Diagnostic`]s, pairs each
//! original fragment with its re-enactment, and writes clips, per-track
//! concatenations, redacted recordings and CSV tables.

pub mod audio;
pub mod corpus;
pub mod eaf;
mod iso639;
pub mod pairing;
pub mod release;
pub mod testkit;
pub mod validate;
