use criterion::{criterion_group, criterion_main};

criterion_group!(benches, cellfree_bench::benchmarks);
criterion_main!(benches);
