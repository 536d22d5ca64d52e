//! Holds the `acceptance` test target; run it with
//! `cargo test -p notescreen-verify --test acceptance`.
