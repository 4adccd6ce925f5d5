//! Intentionally empty: this crate only exists to host the benchmarks.
