"""Bundled example programs (.kan files) used by the CLI and the benchmarks."""
