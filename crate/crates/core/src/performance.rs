//! Closed-form downlink SINR / SE for conjugate beamforming with
//! fractional-exponent normalisation `w_mk = conj(g_hat_mk) / |g_hat_mk|^(alpha+1)`.
//!
//! With `rho_mk = rho_d eta_mk`,
//!
//! ```text
//! SINR_k = (sum_{m in M_k} sqrt(rho_mk) a_mkk)^2
//!        / ( sum_j sum_{m in M_j} rho_mj b_mkj
//!          + sum_{j != k} (sum_{m in M_j} sqrt(rho_mj) a_mkj)^2 + 1 )
//! ```
//!
//! where `a_mkj` is the mean of `g_mk^T w_mj` and `b_mkj` its variance. Both
//! are closed forms in Gamma-function ratios of the chi-square moments of
//! `|g_hat|^2`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use statrs::function::gamma::ln_gamma;

use crate::clustering::ClusterMap;
use crate::error::{Error, Result};
use crate::training::{PilotBook, TrainingStats};

/// Power-control rule.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Mr,
    MrUniform,
    Mmf,
    MmfUniform,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Mr, Strategy::MrUniform, Strategy::Mmf, Strategy::MmfUniform];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Mr => "mr",
            Strategy::MrUniform => "mr-u",
            Strategy::Mmf => "mmf",
            Strategy::MmfUniform => "mmf-u",
        }
    }

    pub fn is_optimised(self) -> bool {
        matches!(self, Strategy::Mmf | Strategy::MmfUniform)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown strategy `{s}` (expected mr, mr-u, mmf or mmf-u)")))
    }
}

/// `Gamma(N - delta) / Gamma(N)`, evaluated as a log-Gamma difference.
pub fn gamma_ratio(n: usize, delta: f64) -> Result<f64> {
    let arg = n as f64 - delta;
    if !(arg > 0.0) || !delta.is_finite() {
        return Err(Error::Domain(format!(
            "Gamma(N - delta) needs N - delta > 0, got N = {n}, delta = {delta}"
        )));
    }
    if delta == 0.0 {
        return Ok(1.0);
    }
    Ok((ln_gamma(arg) - ln_gamma(n as f64)).exp())
}

fn check_alpha(n: usize, alpha: f64) -> Result<()> {
    if !alpha.is_finite() || alpha >= n as f64 - 1.0 {
        return Err(Error::Domain(format!(
            "channel inversion rate must satisfy alpha < N - 1 = {}, got {alpha}",
            n as f64 - 1.0
        )));
    }
    Ok(())
}

/// `a_mkj` and `b_mkj` over every serving pair `(m, j)`, `m in M_j`, and
/// every UE `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinrTerms {
    num_ues: usize,
    serving_aps: Vec<Vec<usize>>,
    offsets: Vec<usize>,
    a: Vec<f64>,
    b: Vec<f64>,
}

impl SinrTerms {
    pub fn num_ues(&self) -> usize {
        self.num_ues
    }

    /// M_j, in the order used by the `slot` arguments below.
    pub fn serving(&self, j: usize) -> &[usize] {
        &self.serving_aps[j]
    }

    #[inline]
    fn idx(&self, k: usize, j: usize, slot: usize) -> usize {
        (self.offsets[j] + slot) * self.num_ues + k
    }

    /// `a_mkj` for `m = M_j[slot]`.
    #[inline]
    pub fn a(&self, k: usize, j: usize, slot: usize) -> f64 {
        self.a[self.idx(k, j, slot)]
    }

    /// `b_mkj` for `m = M_j[slot]`.
    #[inline]
    pub fn b(&self, k: usize, j: usize, slot: usize) -> f64 {
        self.b[self.idx(k, j, slot)]
    }
}

pub fn compute_sinr_terms(
    stats: &TrainingStats,
    beta: &DMatrix<f64>,
    pilots: &PilotBook,
    clusters: &ClusterMap,
    n: usize,
    alpha: f64,
) -> Result<SinrTerms> {
    check_alpha(n, alpha)?;
    let k_count = clusters.num_ues();
    if pilots.num_ues() != k_count || beta.ncols() != k_count || stats.gamma.shape() != beta.shape() {
        return Err(Error::Config("training stats, pilots and clusters disagree on sizes".into()));
    }
    let coherent = gamma_ratio(n, (alpha - 1.0) / 2.0)?;
    let inverse = gamma_ratio(n, alpha)?;
    let excess = n as f64 - alpha - 1.0;
    let gamma = &stats.gamma;

    let mut offsets = Vec::with_capacity(k_count);
    let mut total = 0;
    for aps in &clusters.serving_aps {
        offsets.push(total);
        total += aps.len();
    }
    let mut a = vec![0.0; total * k_count];
    let mut b = vec![0.0; total * k_count];
    for (j, aps) in clusters.serving_aps.iter().enumerate() {
        for (slot, &m) in aps.iter().enumerate() {
            let g_j_alpha = gamma[(m, j)].powf(alpha);
            for k in 0..k_count {
                let at = (offsets[j] + slot) * k_count + k;
                let spread = inverse * beta[(m, k)] / g_j_alpha;
                if pilots.shares_pilot(k, j) {
                    let a_val = coherent * gamma[(m, k)].sqrt() / g_j_alpha.sqrt();
                    a[at] = a_val;
                    b[at] = inverse * excess * gamma[(m, k)] / g_j_alpha - a_val * a_val + spread;
                } else {
                    b[at] = spread;
                }
            }
        }
    }
    Ok(SinrTerms {
        num_ues: k_count,
        serving_aps: clusters.serving_aps.clone(),
        offsets,
        a,
        b,
    })
}

/// Power-control coefficients `eta_mk` (M x K, zero outside the clusters).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerAllocation {
    pub eta: DMatrix<f64>,
    /// `None` for hand-built allocations.
    pub strategy: Option<Strategy>,
}

impl PowerAllocation {
    pub fn zeros(num_aps: usize, num_ues: usize) -> Self {
        Self {
            eta: DMatrix::zeros(num_aps, num_ues),
            strategy: None,
        }
    }

    /// Checks non-negativity and that no pair outside the clusters carries power.
    pub fn check_support(&self, clusters: &ClusterMap) -> Result<()> {
        for m in 0..self.eta.nrows() {
            for k in 0..self.eta.ncols() {
                let e = self.eta[(m, k)];
                if !(e >= 0.0) {
                    return Err(Error::Domain(format!("eta[{m}][{k}] = {e} is negative or NaN")));
                }
                if e > 0.0 && !clusters.serves(m, k) {
                    return Err(Error::Domain(format!("eta[{m}][{k}] > 0 but AP {m} does not serve UE {k}")));
                }
            }
        }
        Ok(())
    }
}

/// SINR of UE `k` under allocation `alloc`.
pub fn closed_form_sinr(k: usize, terms: &SinrTerms, alloc: &PowerAllocation, rho_d: f64) -> Result<f64> {
    let k_count = terms.num_ues();
    if k >= k_count {
        return Err(Error::IndexOutOfRange {
            what: "UE",
            index: k,
            len: k_count,
        });
    }
    if alloc.eta.ncols() != k_count {
        return Err(Error::Config("allocation and SINR terms disagree on K".into()));
    }
    let mut signal = 0.0;
    let mut denom = 1.0;
    for j in 0..k_count {
        let mut coherent = 0.0;
        for (slot, &m) in terms.serving(j).iter().enumerate() {
            let rho = rho_d * alloc.eta[(m, j)];
            coherent += rho.sqrt() * terms.a(k, j, slot);
            denom += rho * terms.b(k, j, slot);
        }
        if j == k {
            signal = coherent * coherent;
        } else {
            denom += coherent * coherent;
        }
    }
    Ok(signal / denom)
}

pub fn all_sinrs(terms: &SinrTerms, alloc: &PowerAllocation, rho_d: f64) -> Result<Vec<f64>> {
    (0..terms.num_ues()).map(|k| closed_form_sinr(k, terms, alloc, rho_d)).collect()
}

/// `xi (1 - tau_p / tau_c) log2(1 + sinr)` in bit/s/Hz.
pub fn spectral_efficiency(sinr: f64, xi: f64, tau_p: usize, tau_c: usize) -> f64 {
    xi * (1.0 - tau_p as f64 / tau_c as f64) * (1.0 + sinr).log2()
}

/// `E|x_m|^2 / rho_d = Gamma(N - alpha)/Gamma(N) sum_{k in K_m} eta_mk / gamma_mk^alpha`.
pub fn normalized_transmit_power(
    m: usize,
    alloc: &PowerAllocation,
    stats: &TrainingStats,
    clusters: &ClusterMap,
    n: usize,
    alpha: f64,
) -> Result<f64> {
    if m >= clusters.num_aps {
        return Err(Error::IndexOutOfRange {
            what: "AP",
            index: m,
            len: clusters.num_aps,
        });
    }
    let served = &clusters.served_ues[m];
    if served.is_empty() {
        return Ok(0.0);
    }
    let ratio = gamma_ratio(n, alpha)?;
    let sum: f64 = served
        .iter()
        .map(|&k| alloc.eta[(m, k)] / stats.gamma[(m, k)].powf(alpha))
        .sum();
    Ok(ratio * sum)
}

/// Per-AP normalised powers; fails if any exceeds `1 + tolerance`.
pub fn audit_power_constraint(
    alloc: &PowerAllocation,
    stats: &TrainingStats,
    clusters: &ClusterMap,
    n: usize,
    alpha: f64,
    tolerance: f64,
) -> Result<Vec<f64>> {
    let powers = (0..clusters.num_aps)
        .map(|m| normalized_transmit_power(m, alloc, stats, clusters, n, alpha))
        .collect::<Result<Vec<_>>>()?;
    if let Some((m, p)) = powers.iter().enumerate().find(|(_, &p)| p > 1.0 + tolerance) {
        return Err(Error::Domain(format!("AP {m} exceeds its power budget: {p}")));
    }
    Ok(powers)
}

/// Per-UE SINR / SE and per-AP normalised power for one snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct PerformanceReport {
    pub sinr: Vec<f64>,
    pub se: Vec<f64>,
    pub ap_power: Vec<f64>,
}

impl PerformanceReport {
    pub fn min_se(&self) -> f64 {
        self.se.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn min_sinr(&self) -> f64 {
        self.sinr.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Everything a report needs besides the allocation.
pub struct EvalContext<'a> {
    pub terms: &'a SinrTerms,
    pub stats: &'a TrainingStats,
    pub clusters: &'a ClusterMap,
    pub antennas: usize,
    pub alpha: f64,
    pub rho_d: f64,
    pub xi: f64,
    pub tau_p: usize,
    pub tau_c: usize,
}

pub fn evaluate(ctx: &EvalContext<'_>, alloc: &PowerAllocation) -> Result<PerformanceReport> {
    let sinr = all_sinrs(ctx.terms, alloc, ctx.rho_d)?;
    let se = sinr
        .iter()
        .map(|&s| spectral_efficiency(s, ctx.xi, ctx.tau_p, ctx.tau_c))
        .collect();
    let ap_power = (0..ctx.clusters.num_aps)
        .map(|m| normalized_transmit_power(m, alloc, ctx.stats, ctx.clusters, ctx.antennas, ctx.alpha))
        .collect::<Result<Vec<_>>>()?;
    Ok(PerformanceReport { sinr, se, ap_power })
}
