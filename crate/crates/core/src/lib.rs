//! Coded state machines.
//!
//! `K` polynomial state machines are run on `N` untrusted nodes. Each node
//! stores a single Lagrange-coded combination of all `K` states, executes the
//! transition function directly on coded data, and the true next states and
//! outputs are recovered by Reed-Solomon decoding even when up to `b` nodes
//! return arbitrary values. The crate also contains the full and partial
//! replication baselines, an interactive verifiable matrix-vector protocol
//! used to delegate all encoding and decoding to a single audited worker, and
//! a deterministic simulator that measures security, storage efficiency and
//! throughput under Byzantine adversaries.

#![allow(clippy::type_complexity, clippy::needless_range_loop)]

pub mod baseline;
pub mod boolfunc;
pub mod csm;
pub mod error;
pub mod field;
pub mod harness;
pub mod intermix;
pub mod linalg;
pub mod machine;
pub mod poly;
pub mod rs;
pub mod simnet;

pub use error::{Error, Result};
pub use field::{Fe, Field};
