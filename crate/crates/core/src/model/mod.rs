//! Shared domain types and the line-delimited record format.

pub mod digest;
pub mod fraction;
pub mod record;
pub mod types;

pub use digest::{canonical_digest, new_id, sha256_hex};
pub use fraction::{Fraction, FractionError};
pub use record::{decode_problem, decode_record, encode_record, read_problems, read_records, write_records, Record, RecordError};
pub use types::*;
