//! Fixtures, corpora and oracles shared by the integration tests.
#![allow(dead_code)]

pub mod library;
pub mod oracle;
pub mod scenario;
