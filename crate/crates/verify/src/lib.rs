//! Acceptance checks for the workspace. The suite is the `acceptance`
//! test target; run it with `cargo test -p ssisar-verify --test acceptance`.
