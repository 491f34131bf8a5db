//! Benchmark bodies; `benches/kernels.rs` registers them with criterion.

use std::hint::black_box;

use cellfree_core::experiments::{sinr_terms, snapshot_inputs, SnapshotInputs};
use cellfree_core::mc_oracle::{mc_hardening_sinr, mc_inverse_norm_moment, reference_instances};
use cellfree_core::performance::all_sinrs;
use cellfree_core::power_control::{mmf_allocation, mmf_uniform_allocation, mr_allocation};
use cellfree_core::{generate_snapshot, BisectionSettings, MmfProblemData, RandomStream, SystemConfig};
use criterion::{BenchmarkId, Criterion};

fn desk_inputs(alpha: f64) -> (SystemConfig, SnapshotInputs) {
    let mut cfg = SystemConfig::desk();
    cfg.alpha = alpha;
    let inputs = snapshot_inputs(&cfg, 0).expect("desk snapshot");
    (cfg, inputs)
}

pub fn benchmarks(c: &mut Criterion) {
    let (cfg, inputs) = desk_inputs(0.0);
    let n = cfg.antennas_per_ap;

    c.bench_function("snapshot/generate_desk", |b| {
        let mut stream = RandomStream::new(1);
        b.iter(|| generate_snapshot(black_box(&cfg), &mut stream).unwrap())
    });
    c.bench_function("snapshot/inputs_desk", |b| b.iter(|| snapshot_inputs(black_box(&cfg), 3).unwrap()));

    let terms = sinr_terms(&cfg, &inputs).unwrap();
    let mr = mr_allocation(&inputs.stats, &inputs.clusters, n, cfg.alpha).unwrap();
    c.bench_function("sinr/terms_desk", |b| b.iter(|| sinr_terms(black_box(&cfg), &inputs).unwrap()));
    c.bench_function("sinr/closed_form_desk", |b| b.iter(|| all_sinrs(black_box(&terms), &mr, cfg.rho_d).unwrap()));
    c.bench_function("power/mr_desk", |b| {
        b.iter(|| mr_allocation(black_box(&inputs.stats), &inputs.clusters, n, cfg.alpha).unwrap())
    });

    let mut group = c.benchmark_group("power/mmf_desk");
    group.sample_size(10);
    let settings = BisectionSettings::default();
    for alpha in [-1.0, 0.0, 1.0] {
        let (cfg, inputs) = desk_inputs(alpha);
        let terms = sinr_terms(&cfg, &inputs).unwrap();
        let data = MmfProblemData::new(&terms, &inputs.stats, &inputs.clusters, n, alpha, cfg.rho_d).unwrap();
        group.bench_with_input(BenchmarkId::new("per_pair", alpha), &data, |b, d| {
            b.iter(|| mmf_allocation(d, &settings).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("per_ap", alpha), &data, |b, d| {
            b.iter(|| mmf_uniform_allocation(d, &settings).unwrap())
        });
    }
    group.finish();

    let mut group = c.benchmark_group("oracle");
    group.sample_size(10);
    group.bench_function("inverse_moment_N8_100k", |b| {
        let mut stream = RandomStream::new(2);
        b.iter(|| mc_inverse_norm_moment(8, 1.0, 0.5, 100_000, &mut stream).unwrap())
    });
    let (_, inst) = reference_instances().remove(0);
    let alloc = inst.mr_allocation(0.5).unwrap();
    group.bench_function("hardening_sinr_2x2_100k", |b| {
        let mut stream = RandomStream::new(3);
        b.iter(|| mc_hardening_sinr(&inst, &alloc, 0.5, 100_000, &mut stream).unwrap())
    });
    group.finish();
}
