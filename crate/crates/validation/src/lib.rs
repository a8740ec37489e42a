//! Home of the `acceptance` test target, which runs every check of
//! `relaylab validate` at the default configuration.
//!
//! It lives in its own package so that `cargo test --workspace` reaches it
//! after the unit and integration tests of the other crates.
