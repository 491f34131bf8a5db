//! Downlink power-control strategies.
//!
//! MR and MR-U are closed-form rules that saturate every active AP's power
//! budget. MMF and MMF-U maximise the worst UE's SINR by bisection over
//! second-order cone feasibility problems, see [`mmf`].

pub mod mmf;

pub use mmf::{
    mmf_allocation, mmf_feasibility, mmf_uniform_allocation, BisectionSettings, BisectionStatus, Feasibility,
    MmfOutcome, MmfProblemData,
};

use crate::clustering::ClusterMap;
use crate::error::{Error, Result};
use crate::performance::{gamma_ratio, PowerAllocation, Strategy};
use crate::training::TrainingStats;

fn check_inputs(stats: &TrainingStats, clusters: &ClusterMap, n: usize, alpha: f64) -> Result<f64> {
    // The rules only need Gamma(N - alpha) to be finite.
    if !alpha.is_finite() || alpha >= n as f64 {
        return Err(Error::Domain(format!("alpha must be below N = {n}, got {alpha}")));
    }
    if stats.gamma.shape() != (clusters.num_aps, clusters.num_ues()) {
        return Err(Error::Config("training stats and cluster map disagree on sizes".into()));
    }
    for (m, ues) in clusters.served_ues.iter().enumerate() {
        for &k in ues {
            if !(stats.gamma[(m, k)] > 0.0) {
                return Err(Error::Domain(format!("gamma[{m}][{k}] must be positive for a served pair")));
            }
        }
    }
    // Gamma(N) / Gamma(N - alpha)
    Ok(1.0 / gamma_ratio(n, alpha)?)
}

/// Maximal-ratio rule: `eta_mk` proportional to `gamma_mk^(alpha + 1)`,
/// scaled so every active AP transmits at full power.
pub fn mr_allocation(stats: &TrainingStats, clusters: &ClusterMap, n: usize, alpha: f64) -> Result<PowerAllocation> {
    let scale = check_inputs(stats, clusters, n, alpha)?;
    let mut alloc = PowerAllocation::zeros(clusters.num_aps, clusters.num_ues());
    alloc.strategy = Some(Strategy::Mr);
    for (m, ues) in clusters.served_ues.iter().enumerate() {
        let total: f64 = ues.iter().map(|&j| stats.gamma[(m, j)]).sum();
        for &k in ues {
            alloc.eta[(m, k)] = scale * stats.gamma[(m, k)].powf(alpha + 1.0) / total;
        }
    }
    Ok(alloc)
}

/// One coefficient per AP, shared by all its UEs, at the largest value the
/// budget allows.
pub fn mr_uniform_allocation(
    stats: &TrainingStats,
    clusters: &ClusterMap,
    n: usize,
    alpha: f64,
) -> Result<PowerAllocation> {
    let scale = check_inputs(stats, clusters, n, alpha)?;
    let mut alloc = PowerAllocation::zeros(clusters.num_aps, clusters.num_ues());
    alloc.strategy = Some(Strategy::MrUniform);
    for (m, ues) in clusters.served_ues.iter().enumerate() {
        let total: f64 = ues.iter().map(|&j| stats.gamma[(m, j)].powf(-alpha)).sum();
        for &k in ues {
            alloc.eta[(m, k)] = scale / total;
        }
    }
    Ok(alloc)
}
