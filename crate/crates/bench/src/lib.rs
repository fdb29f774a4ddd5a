//! Criterion benchmarks for the simulator, classifier, and eigensolver kernels.
//! Run with `cargo bench -p loopgas-bench`.
