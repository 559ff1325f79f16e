//! Criterion benchmarks for learning, planning and the heuristic; see `benches/`.
