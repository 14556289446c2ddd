//! Holds the `acceptance` test target. Run it with
//! `cargo test -p hellinger-validation --test acceptance [criterion...]`.
