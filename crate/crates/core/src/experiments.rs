//! Snapshot-loop experiments: single-strategy runs, alpha sweeps and
//! strategy comparisons.
//!
//! Snapshot `i` draws everything from stream `(seed, i)` in a fixed order
//! (geometry, pilots) before alpha or the strategy is used, so runs that
//! differ only in those see identical networks.
//!
//! Percentiles use the nearest-rank rule on the pooled per-UE samples: the
//! p-th percentile of `n` sorted values is the one at rank `ceil(p n / 100)`.

use std::fmt::Write as _;

use crate::channel_world::{generate_snapshot, Snapshot};
use crate::clustering::{build_clusters, ClusterMap};
use crate::config::SystemConfig;
use crate::error::{Error, Result};
use crate::performance::{compute_sinr_terms, evaluate, EvalContext, PowerAllocation, SinrTerms, Strategy};
use crate::power_control::{
    mmf_allocation, mmf_uniform_allocation, mr_allocation, mr_uniform_allocation, BisectionSettings,
    BisectionStatus, MmfProblemData,
};
use crate::rng::RandomStream;
use crate::training::{assign_pilots, estimation_stats, PilotBook, TrainingStats};

/// Largest per-AP power accepted in any emitted row.
pub const POWER_SLACK: f64 = 1e-6;

/// Alpha-independent part of one snapshot.
#[derive(Debug, Clone)]
pub struct SnapshotInputs {
    pub id: u64,
    pub snapshot: Snapshot,
    pub pilots: PilotBook,
    pub stats: TrainingStats,
    pub clusters: ClusterMap,
}

pub fn snapshot_inputs(config: &SystemConfig, id: u64) -> Result<SnapshotInputs> {
    let mut stream = RandomStream::substream(config.seed, id);
    let snapshot = generate_snapshot(config, &mut stream)?;
    let pilots = assign_pilots(config.num_ues, config.tau_p, config.pilot_policy, &mut stream)?;
    let stats = estimation_stats(&snapshot.beta, &pilots, config.tau_p, config.rho_p)?;
    let clusters = build_clusters(&snapshot.beta, config.cluster_size)?;
    Ok(SnapshotInputs {
        id,
        snapshot,
        pilots,
        stats,
        clusters,
    })
}

pub fn sinr_terms(config: &SystemConfig, inputs: &SnapshotInputs) -> Result<SinrTerms> {
    compute_sinr_terms(
        &inputs.stats,
        &inputs.snapshot.beta,
        &inputs.pilots,
        &inputs.clusters,
        config.antennas_per_ap,
        config.alpha,
    )
}

/// Runs `strategy` on one snapshot. The status is `None` for closed-form rules.
pub fn allocate(
    config: &SystemConfig,
    inputs: &SnapshotInputs,
    terms: &SinrTerms,
    strategy: Strategy,
    settings: &BisectionSettings,
) -> Result<(PowerAllocation, Option<BisectionStatus>)> {
    let (n, alpha) = (config.antennas_per_ap, config.alpha);
    Ok(match strategy {
        Strategy::Mr => (mr_allocation(&inputs.stats, &inputs.clusters, n, alpha)?, None),
        Strategy::MrUniform => (mr_uniform_allocation(&inputs.stats, &inputs.clusters, n, alpha)?, None),
        Strategy::Mmf | Strategy::MmfUniform => {
            let data = MmfProblemData::new(terms, &inputs.stats, &inputs.clusters, n, alpha, config.rho_d)?;
            let out = if strategy == Strategy::Mmf {
                mmf_allocation(&data, settings)?
            } else {
                mmf_uniform_allocation(&data, settings)?
            };
            (out.allocation, Some(out.status))
        }
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotRecord {
    pub id: u64,
    pub sinr: Vec<f64>,
    pub se: Vec<f64>,
    /// `(m, power)` for every AP with served UEs.
    pub ap_power: Vec<(usize, f64)>,
    pub status: Option<BisectionStatus>,
}

impl SnapshotRecord {
    pub fn min_se(&self) -> f64 {
        self.se.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn median_se(&self) -> f64 {
        percentile(&self.se, 50.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub p10_se: f64,
    pub p50_se: f64,
    pub p95_se: f64,
    pub mean_min_se: f64,
    pub mean_median_se: f64,
    /// Mean over snapshots and active APs.
    pub mean_power: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub strategy: Strategy,
    pub alpha: f64,
    pub config_hash: String,
    pub seed: u64,
    pub snapshots: Vec<SnapshotRecord>,
    /// Snapshots whose MMF subproblem could not be decided.
    pub excluded: Vec<u64>,
    /// Snapshots that hit the bisection iteration cap (kept, best point).
    pub capped: Vec<u64>,
    pub aggregates: Aggregates,
}

/// Nearest-rank percentile; `NaN` for an empty sample.
pub fn percentile(values: &[f64], p: f64) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((p / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        sum / n as f64
    }
}

fn aggregate(records: &[SnapshotRecord]) -> Aggregates {
    let pooled: Vec<f64> = records.iter().flat_map(|r| r.se.iter().copied()).collect();
    Aggregates {
        p10_se: percentile(&pooled, 10.0),
        p50_se: percentile(&pooled, 50.0),
        p95_se: percentile(&pooled, 95.0),
        mean_min_se: mean(records.iter().map(SnapshotRecord::min_se)),
        mean_median_se: mean(records.iter().map(SnapshotRecord::median_se)),
        mean_power: mean(records.iter().flat_map(|r| r.ap_power.iter().map(|&(_, p)| p))),
    }
}

fn check_run(config: &SystemConfig, n_snapshots: usize) -> Result<()> {
    config.validate()?;
    if n_snapshots == 0 {
        return Err(Error::Config("need at least one snapshot".into()));
    }
    Ok(())
}

fn evaluate_snapshot(
    config: &SystemConfig,
    inputs: &SnapshotInputs,
    strategy: Strategy,
    settings: &BisectionSettings,
) -> Result<SnapshotRecord> {
    let terms = sinr_terms(config, inputs)?;
    let (alloc, status) = allocate(config, inputs, &terms, strategy, settings)?;
    let ctx = EvalContext {
        terms: &terms,
        stats: &inputs.stats,
        clusters: &inputs.clusters,
        antennas: config.antennas_per_ap,
        alpha: config.alpha,
        rho_d: config.rho_d,
        xi: config.xi,
        tau_p: config.tau_p,
        tau_c: config.tau_c,
    };
    let report = evaluate(&ctx, &alloc)?;
    let ap_power: Vec<(usize, f64)> = inputs.clusters.active_aps().map(|m| (m, report.ap_power[m])).collect();
    if let Some(&(m, p)) = ap_power.iter().find(|(_, p)| *p > 1.0 + POWER_SLACK) {
        return Err(Error::Domain(format!(
            "snapshot {}: AP {m} power {p} exceeds the budget under {strategy}",
            inputs.id
        )));
    }
    Ok(SnapshotRecord {
        id: inputs.id,
        sinr: report.sinr,
        se: report.se,
        ap_power,
        status,
    })
}

fn collect(
    config: &SystemConfig,
    strategy: Strategy,
    records: Vec<SnapshotRecord>,
) -> ExperimentResult {
    let mut kept = Vec::with_capacity(records.len());
    let (mut excluded, mut capped) = (Vec::new(), Vec::new());
    for r in records {
        match r.status {
            Some(BisectionStatus::Indeterminate) => excluded.push(r.id),
            Some(BisectionStatus::MaxIterations) => {
                capped.push(r.id);
                kept.push(r);
            }
            _ => kept.push(r),
        }
    }
    ExperimentResult {
        strategy,
        alpha: config.alpha,
        config_hash: config.hash(),
        seed: config.seed,
        aggregates: aggregate(&kept),
        snapshots: kept,
        excluded,
        capped,
    }
}

pub fn run_snapshots(config: &SystemConfig, strategy: Strategy, n_snapshots: usize) -> Result<ExperimentResult> {
    run_snapshots_with(config, strategy, n_snapshots, &BisectionSettings::default())
}

pub fn run_snapshots_with(
    config: &SystemConfig,
    strategy: Strategy,
    n_snapshots: usize,
    settings: &BisectionSettings,
) -> Result<ExperimentResult> {
    check_run(config, n_snapshots)?;
    let records = (0..n_snapshots as u64)
        .map(|id| evaluate_snapshot(config, &snapshot_inputs(config, id)?, strategy, settings))
        .collect::<Result<Vec<_>>>()?;
    Ok(collect(config, strategy, records))
}

/// One run per alpha on the same snapshots.
pub fn sweep_alpha(
    config: &SystemConfig,
    alphas: &[f64],
    strategy: Strategy,
    n_snapshots: usize,
) -> Result<Vec<ExperimentResult>> {
    let configs = alphas
        .iter()
        .map(|&alpha| {
            let mut c = config.clone();
            c.alpha = alpha;
            check_run(&c, n_snapshots).map(|_| c)
        })
        .collect::<Result<Vec<_>>>()?;
    paired(&configs, &[strategy], n_snapshots)
}

/// Every strategy on the same snapshots.
pub fn compare_strategies(
    config: &SystemConfig,
    strategies: &[Strategy],
    n_snapshots: usize,
) -> Result<Vec<ExperimentResult>> {
    check_run(config, n_snapshots)?;
    paired(std::slice::from_ref(config), strategies, n_snapshots)
}

/// Generates each snapshot once and evaluates every (config, strategy) pair
/// on it; the configs may differ only in alpha.
fn paired(configs: &[SystemConfig], strategies: &[Strategy], n_snapshots: usize) -> Result<Vec<ExperimentResult>> {
    let settings = BisectionSettings::default();
    let mut records: Vec<Vec<SnapshotRecord>> = vec![Vec::with_capacity(n_snapshots); configs.len() * strategies.len()];
    for id in 0..n_snapshots as u64 {
        let inputs = snapshot_inputs(&configs[0], id)?;
        for (ci, config) in configs.iter().enumerate() {
            for (si, &strategy) in strategies.iter().enumerate() {
                records[ci * strategies.len() + si].push(evaluate_snapshot(config, &inputs, strategy, &settings)?);
            }
        }
    }
    let mut out = Vec::with_capacity(records.len());
    let mut it = records.into_iter();
    for config in configs {
        for &strategy in strategies {
            out.push(collect(config, strategy, it.next().expect("one record list per pair")));
        }
    }
    Ok(out)
}

fn header(hash: &str, seed: u64) -> String {
    format!("# config_hash={hash} seed={seed}\n")
}

impl ExperimentResult {
    /// Per-UE rows: `snapshot,ue,sinr,se`.
    pub fn ue_csv(&self) -> String {
        let mut out = header(&self.config_hash, self.seed);
        out.push_str("snapshot,ue,sinr,se\n");
        for r in &self.snapshots {
            for (k, (sinr, se)) in r.sinr.iter().zip(&r.se).enumerate() {
                writeln!(out, "{},{k},{sinr},{se}", r.id).unwrap();
            }
        }
        out
    }

    /// Per-AP rows for active APs: `snapshot,ap,normalized_power`.
    pub fn power_csv(&self) -> String {
        let mut out = header(&self.config_hash, self.seed);
        out.push_str("snapshot,ap,normalized_power\n");
        for r in &self.snapshots {
            for &(m, p) in &r.ap_power {
                writeln!(out, "{},{m},{p}", r.id).unwrap();
            }
        }
        out
    }

    pub fn summary(&self) -> String {
        let a = &self.aggregates;
        let mut out = format!(
            "strategy={} alpha={} snapshots={} excluded={} capped={}\n",
            self.strategy,
            self.alpha,
            self.snapshots.len(),
            self.excluded.len(),
            self.capped.len()
        );
        writeln!(
            out,
            "SE percentiles (bit/s/Hz): p10={:.4} p50={:.4} p95={:.4}",
            a.p10_se, a.p50_se, a.p95_se
        )
        .unwrap();
        writeln!(
            out,
            "mean min SE={:.4} mean median SE={:.4} mean AP power={:.6}",
            a.mean_min_se, a.mean_median_se, a.mean_power
        )
        .unwrap();
        out
    }
}

const TABLE_COLUMNS: &str =
    "strategy,alpha,p10_se,p50_se,p95_se,mean_min_se,mean_median_se,mean_power,snapshots,excluded,capped\n";

/// One summary row per result, for sweeps and comparisons.
pub fn summary_csv(base: &SystemConfig, results: &[ExperimentResult]) -> String {
    let mut out = header(&base.hash(), base.seed);
    out.push_str(TABLE_COLUMNS);
    for r in results {
        let a = &r.aggregates;
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            r.strategy,
            r.alpha,
            a.p10_se,
            a.p50_se,
            a.p95_se,
            a.mean_min_se,
            a.mean_median_se,
            a.mean_power,
            r.snapshots.len(),
            r.excluded.len(),
            r.capped.len()
        )
        .unwrap();
    }
    out
}

/// Fixed-width rendering of [`summary_csv`] for terminals.
pub fn summary_table(results: &[ExperimentResult]) -> String {
    let mut out = format!(
        "{:<8} {:>7} {:>8} {:>8} {:>8} {:>8} {:>8} {:>9} {:>5} {:>4}\n",
        "strategy", "alpha", "p10", "p50", "p95", "min", "median", "power", "snaps", "excl"
    );
    for r in results {
        let a = &r.aggregates;
        writeln!(
            out,
            "{:<8} {:>7.3} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>8.4} {:>9.6} {:>5} {:>4}",
            r.strategy.as_str(),
            r.alpha,
            a.p10_se,
            a.p50_se,
            a.p95_se,
            a.mean_min_se,
            a.mean_median_se,
            a.mean_power,
            r.snapshots.len(),
            r.excluded.len()
        )
        .unwrap();
    }
    out
}
