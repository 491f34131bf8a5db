//! Paired strategy comparisons on random networks.

use cellfree_core::experiments::{compare_strategies, run_snapshots};
use cellfree_core::{Strategy, SystemConfig};

fn mid_size() -> SystemConfig {
    let mut c = SystemConfig::with_sizes(30, 8, 8);
    c.seed = 5;
    c
}

#[test]
fn mmf_beats_mr_on_average() {
    let mmf = run_snapshots(&mid_size(), Strategy::Mmf, 50).unwrap();
    let mr = run_snapshots(&mid_size(), Strategy::Mr, 50).unwrap();
    assert!(mmf.excluded.is_empty());
    assert!(mmf.aggregates.mean_min_se >= mr.aggregates.mean_min_se);
    // Per snapshot as well.
    for (a, b) in mmf.snapshots.iter().zip(&mr.snapshots) {
        assert!(a.min_se() >= b.min_se() - 1e-3, "snapshot {}", a.id);
    }
}

#[test]
fn uniform_mmf_sits_between_and_saves_power() {
    let mut cfg = mid_size();
    cfg.alpha = 0.5;
    let rows = compare_strategies(&cfg, &Strategy::ALL, 30).unwrap();
    let get = |s: Strategy| rows.iter().find(|r| r.strategy == s).unwrap().aggregates;
    let (mr, mru, mmf, mmfu) = (get(Strategy::Mr), get(Strategy::MrUniform), get(Strategy::Mmf), get(Strategy::MmfUniform));
    assert!((mr.mean_power - 1.0).abs() < 1e-12 && (mru.mean_power - 1.0).abs() < 1e-12);
    assert!(mmfu.mean_power < 1.0);
    assert!(mr.mean_min_se <= mmfu.mean_min_se && mmfu.mean_min_se <= mmf.mean_min_se);
}
