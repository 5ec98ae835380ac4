//! Carries the end-to-end acceptance checks in `tests/acceptance.rs`; the
//! library itself is empty.
