//! Monte-Carlo oracle for the closed-form moments.
//!
//! Channels, the uplink pilot observation, the MMSE estimate and the
//! fractional-exponent precoder are sampled directly. The estimator gain is
//! recomputed here from `beta` and the pilot assignment instead of being
//! taken from [`crate::training`], so agreement with the closed forms is a
//! genuine cross-check.
//!
//! Draws run in batches of [`BATCH_DRAWS`], batch `b` on stream
//! `(base, b)` where `base` is taken from the caller's stream. Results are
//! reduced in batch order and therefore reproducible.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::clustering::{build_clusters, ClusterMap};
use crate::error::{Error, Result};
use crate::performance::{compute_sinr_terms, PowerAllocation, SinrTerms};
use crate::power_control::mr_allocation;
use crate::rng::RandomStream;
use crate::training::{estimation_stats, PilotBook, TrainingStats};

pub const BATCH_DRAWS: usize = 10_000;

/// Pass threshold in standard errors.
pub const PASS_SIGMAS: f64 = 4.0;

/// Running mean and variance (Welford, with Chan's merge).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
struct Running {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Running {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    fn merge(&mut self, other: &Running) {
        if other.n == 0 {
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * self.n as f64 * other.n as f64 / n as f64;
        self.n = n;
    }

    fn estimate(&self) -> Estimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        Estimate {
            mean: self.mean,
            std_error: (var / self.n.max(1) as f64).sqrt(),
            draws: self.n as usize,
        }
    }
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub draws: usize,
}

fn batches(n_draws: usize, stream: &mut RandomStream) -> impl Iterator<Item = (usize, RandomStream)> {
    let base = stream.next_u64();
    let count = n_draws.div_ceil(BATCH_DRAWS);
    (0..count).map(move |b| {
        let size = BATCH_DRAWS.min(n_draws - b * BATCH_DRAWS);
        (size, RandomStream::substream(base, b as u64))
    })
}

fn norm_sqr(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Sample mean of `|g|^(-2 alpha)` for `g ~ CN(0, gamma I_N)`.
pub fn mc_inverse_norm_moment(
    n: usize,
    gamma: f64,
    alpha: f64,
    n_draws: usize,
    stream: &mut RandomStream,
) -> Result<Estimate> {
    if n == 0 || !(gamma > 0.0) || !(alpha < n as f64) || n_draws == 0 {
        return Err(Error::Domain(format!(
            "inverse moment needs N >= 1, gamma > 0, alpha < N and draws > 0 (N = {n}, gamma = {gamma}, alpha = {alpha})"
        )));
    }
    let mut total = Running::default();
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for (size, mut s) in batches(n_draws, stream) {
        let mut acc = Running::default();
        for _ in 0..size {
            v.iter_mut().for_each(|z| *z = s.complex_normal(gamma));
            acc.push(norm_sqr(&v).powf(-alpha));
        }
        total.merge(&acc);
    }
    Ok(total.estimate())
}

/// A small system for the oracle: large-scale gains, pilots, clusters and
/// power levels.
#[derive(Debug, Clone)]
pub struct OracleInstance {
    pub beta: DMatrix<f64>,
    pub pilots: PilotBook,
    pub clusters: ClusterMap,
    pub antennas: usize,
    pub rho_p: f64,
    pub rho_d: f64,
}

impl OracleInstance {
    /// Serves each UE from its `cluster_size` strongest APs.
    pub fn new(
        beta: DMatrix<f64>,
        pilots: PilotBook,
        cluster_size: usize,
        antennas: usize,
        rho_p: f64,
        rho_d: f64,
    ) -> Result<Self> {
        let clusters = build_clusters(&beta, cluster_size)?;
        let inst = Self {
            beta,
            pilots,
            clusters,
            antennas,
            rho_p,
            rho_d,
        };
        inst.check()?;
        Ok(inst)
    }

    pub fn stats(&self) -> Result<TrainingStats> {
        estimation_stats(&self.beta, &self.pilots, self.pilots.tau_p, self.rho_p)
    }

    pub fn sinr_terms(&self, alpha: f64) -> Result<SinrTerms> {
        compute_sinr_terms(&self.stats()?, &self.beta, &self.pilots, &self.clusters, self.antennas, alpha)
    }

    pub fn mr_allocation(&self, alpha: f64) -> Result<PowerAllocation> {
        mr_allocation(&self.stats()?, &self.clusters, self.antennas, alpha)
    }

    pub fn num_aps(&self) -> usize {
        self.beta.nrows()
    }

    pub fn num_ues(&self) -> usize {
        self.beta.ncols()
    }

    fn check(&self) -> Result<()> {
        let (m, k) = self.beta.shape();
        if self.pilots.assignment.len() != k || self.clusters.num_ues() != k || self.clusters.num_aps != m {
            return Err(Error::Config("oracle instance has inconsistent sizes".into()));
        }
        if self.antennas == 0 || !(self.rho_p > 0.0) || !(self.rho_d > 0.0) {
            return Err(Error::Config("oracle instance needs N >= 1 and positive powers".into()));
        }
        Ok(())
    }

    /// Estimator gain `c_mk`, written out from the pilot assignment.
    fn estimator_gain(&self, m: usize, k: usize) -> f64 {
        let snr = self.pilots.tau_p as f64 * self.rho_p;
        let p = self.pilots.assignment[k];
        let mut contamination = 0.0;
        for (j, &q) in self.pilots.assignment.iter().enumerate() {
            if q == p {
                contamination += self.beta[(m, j)];
            }
        }
        snr.sqrt() * self.beta[(m, k)] / (snr * contamination + 1.0)
    }
}

/// One joint draw of every channel vector and its estimate.
#[derive(Debug, Clone)]
pub struct ChannelDraw {
    num_ues: usize,
    antennas: usize,
    g: Vec<Complex64>,
    g_hat: Vec<Complex64>,
}

impl ChannelDraw {
    fn at(&self, m: usize, k: usize) -> std::ops::Range<usize> {
        let start = (m * self.num_ues + k) * self.antennas;
        start..start + self.antennas
    }

    pub fn g(&self, m: usize, k: usize) -> &[Complex64] {
        &self.g[self.at(m, k)]
    }

    pub fn g_hat(&self, m: usize, k: usize) -> &[Complex64] {
        &self.g_hat[self.at(m, k)]
    }

    /// Estimation error `g - g_hat`.
    pub fn g_tilde(&self, m: usize, k: usize) -> Vec<Complex64> {
        self.g(m, k).iter().zip(self.g_hat(m, k)).map(|(a, b)| a - b).collect()
    }
}

struct Sampler<'a> {
    inst: &'a OracleInstance,
    gains: Vec<f64>,
    amp: f64,
    draw: ChannelDraw,
    obs: Vec<Complex64>,
}

impl<'a> Sampler<'a> {
    fn new(inst: &'a OracleInstance) -> Self {
        let (m_count, k_count, n) = (inst.num_aps(), inst.num_ues(), inst.antennas);
        let gains = (0..m_count)
            .flat_map(|m| (0..k_count).map(move |k| (m, k)))
            .map(|(m, k)| inst.estimator_gain(m, k))
            .collect();
        let zero = Complex64::new(0.0, 0.0);
        Self {
            inst,
            gains,
            amp: (inst.pilots.tau_p as f64 * inst.rho_p).sqrt(),
            draw: ChannelDraw {
                num_ues: k_count,
                antennas: n,
                g: vec![zero; m_count * k_count * n],
                g_hat: vec![zero; m_count * k_count * n],
            },
            obs: vec![zero; inst.pilots.tau_p * n],
        }
    }

    /// Channels first (AP-major), then the pilot observation noise of each AP.
    fn sample(&mut self, s: &mut RandomStream) {
        let inst = self.inst;
        let (m_count, k_count, n) = (inst.num_aps(), inst.num_ues(), inst.antennas);
        for m in 0..m_count {
            for k in 0..k_count {
                let var = inst.beta[(m, k)];
                let r = self.draw.at(m, k);
                self.draw.g[r].iter_mut().for_each(|z| *z = s.complex_normal(var));
            }
        }
        for m in 0..m_count {
            // y_p = sqrt(tau_p rho_p) sum_{k on pilot p} g_mk + noise
            self.obs.iter_mut().for_each(|z| *z = s.complex_normal(1.0));
            for k in 0..k_count {
                let p = inst.pilots.assignment[k];
                let r = self.draw.at(m, k);
                for (i, z) in self.draw.g[r].iter().enumerate() {
                    self.obs[p * n + i] += self.amp * z;
                }
            }
            for k in 0..k_count {
                let p = inst.pilots.assignment[k];
                let c = self.gains[m * k_count + k];
                let r = self.draw.at(m, k);
                for (i, z) in self.draw.g_hat[r].iter_mut().enumerate() {
                    *z = c * self.obs[p * n + i];
                }
            }
        }
    }
}

/// Draws every channel and runs the uplink training once.
pub fn sample_training(inst: &OracleInstance, stream: &mut RandomStream) -> Result<ChannelDraw> {
    inst.check()?;
    let mut sampler = Sampler::new(inst);
    sampler.sample(stream);
    Ok(sampler.draw)
}

/// Sampled `DS_k`, `E|BU_k|^2` and `E|UI_kj|^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentEstimates {
    pub ds: Vec<Estimate>,
    pub bu: Vec<Estimate>,
    /// `ui[k][j]`; the diagonal holds `E|S_kk|^2`.
    pub ui: Vec<Vec<Estimate>>,
}

/// Closed-form counterparts of [`MomentEstimates`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedMoments {
    pub ds: Vec<f64>,
    pub bu: Vec<f64>,
    pub ui: Vec<Vec<f64>>,
}

/// Evaluates the closed-form moments from precomputed `a` / `b` terms.
pub fn closed_form_moments(terms: &SinrTerms, alloc: &PowerAllocation, rho_d: f64) -> ClosedMoments {
    let k_count = terms.num_ues();
    let mut ds = vec![0.0; k_count];
    let mut bu = vec![0.0; k_count];
    let mut ui = vec![vec![0.0; k_count]; k_count];
    for k in 0..k_count {
        for j in 0..k_count {
            let (mut mean, mut var) = (0.0, 0.0);
            for (slot, &m) in terms.serving(j).iter().enumerate() {
                let rho = rho_d * alloc.eta[(m, j)];
                mean += rho.sqrt() * terms.a(k, j, slot);
                var += rho * terms.b(k, j, slot);
            }
            if j == k {
                ds[k] = mean;
                bu[k] = var;
            }
            ui[k][j] = var + mean * mean;
        }
    }
    ClosedMoments { ds, bu, ui }
}

/// Samples `S_kj = sum_{m in M_j} sqrt(rho_d eta_mj) g_mk^T w_mj` with
/// `w = conj(g_hat) / |g_hat|^(alpha + 1)` and estimates its moments.
pub fn mc_ds_bu_ui(
    inst: &OracleInstance,
    alloc: &PowerAllocation,
    alpha: f64,
    n_draws: usize,
    stream: &mut RandomStream,
) -> Result<MomentEstimates> {
    inst.check()?;
    if !alpha.is_finite() || n_draws < 2 {
        return Err(Error::Domain("need a finite alpha and at least two draws".into()));
    }
    if alloc.eta.shape() != inst.beta.shape() {
        return Err(Error::Config("allocation shape does not match the instance".into()));
    }
    let k_count = inst.num_ues();
    let n = inst.antennas;
    let pairs = k_count * k_count;
    let mut ds = vec![Running::default(); k_count];
    let mut bu = vec![Running::default(); k_count];
    let mut ui = vec![Running::default(); pairs];

    let mut sampler = Sampler::new(inst);
    let zero = Complex64::new(0.0, 0.0);
    let mut precoders: Vec<Vec<Complex64>> = Vec::new();
    let mut batch: Vec<Complex64> = Vec::with_capacity(BATCH_DRAWS * pairs);
    for (size, mut s) in batches(n_draws, stream) {
        batch.clear();
        for _ in 0..size {
            sampler.sample(&mut s);
            let draw = &sampler.draw;
            precoders.clear();
            for (j, aps) in inst.clusters.serving_aps.iter().enumerate() {
                for &m in aps {
                    let gh = draw.g_hat(m, j);
                    let scale = (inst.rho_d * alloc.eta[(m, j)]).sqrt() / norm_sqr(gh).powf((alpha + 1.0) / 2.0);
                    precoders.push(gh.iter().map(|z| z.conj() * scale).collect());
                }
            }
            for k in 0..k_count {
                let mut p = 0;
                for aps in &inst.clusters.serving_aps {
                    let mut sum = zero;
                    for &m in aps {
                        let g = draw.g(m, k);
                        let w = &precoders[p];
                        for i in 0..n {
                            sum += g[i] * w[i];
                        }
                        p += 1;
                    }
                    batch.push(sum);
                }
            }
        }
        // Within-batch centring for the variance term.
        let mut centre = vec![zero; pairs];
        for chunk in batch.chunks(pairs) {
            for (c, v) in centre.iter_mut().zip(chunk) {
                *c += v;
            }
        }
        centre.iter_mut().for_each(|c| *c /= size as f64);
        let bessel = if size > 1 { size as f64 / (size - 1) as f64 } else { 1.0 };
        let mut ds_b = vec![Running::default(); k_count];
        let mut bu_b = vec![Running::default(); k_count];
        let mut ui_b = vec![Running::default(); pairs];
        for chunk in batch.chunks(pairs) {
            for k in 0..k_count {
                let kk = k * k_count + k;
                ds_b[k].push(chunk[kk].re);
                bu_b[k].push((chunk[kk] - centre[kk]).norm_sqr() * bessel);
            }
            for (acc, v) in ui_b.iter_mut().zip(chunk) {
                acc.push(v.norm_sqr());
            }
        }
        for (t, b) in ds.iter_mut().zip(&ds_b) {
            t.merge(b);
        }
        for (t, b) in bu.iter_mut().zip(&bu_b) {
            t.merge(b);
        }
        for (t, b) in ui.iter_mut().zip(&ui_b) {
            t.merge(b);
        }
    }
    Ok(MomentEstimates {
        ds: ds.iter().map(Running::estimate).collect(),
        bu: bu.iter().map(Running::estimate).collect(),
        ui: ui.chunks(k_count).map(|row| row.iter().map(Running::estimate).collect()).collect(),
    })
}

/// Hardening-bound SINR assembled from sampled moments:
/// `DS_k^2 / (E|BU_k|^2 + sum_{j != k} E|UI_kj|^2 + 1)`.
pub fn hardening_sinr(est: &MomentEstimates) -> Vec<f64> {
    let k_count = est.ds.len();
    (0..k_count)
        .map(|k| {
            let ui: f64 = (0..k_count).filter(|&j| j != k).map(|j| est.ui[k][j].mean).sum();
            est.ds[k].mean.powi(2) / (est.bu[k].mean + ui + 1.0)
        })
        .collect()
}

pub fn mc_hardening_sinr(
    inst: &OracleInstance,
    alloc: &PowerAllocation,
    alpha: f64,
    n_draws: usize,
    stream: &mut RandomStream,
) -> Result<Vec<f64>> {
    Ok(hardening_sinr(&mc_ds_bu_ui(inst, alloc, alpha, n_draws, stream)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentCheck {
    pub name: String,
    pub closed_form: f64,
    pub mc_estimate: f64,
    pub std_error: f64,
    pub draws: usize,
    pub pass: bool,
    /// False when the sampled quantity has infinite variance, so the
    /// standard error is no valid yardstick; such checks are shown but do
    /// not count towards [`MomentCheckReport::all_pass`].
    pub reliable: bool,
}

impl MomentCheck {
    pub fn new(name: impl Into<String>, closed_form: f64, est: &Estimate) -> Self {
        Self {
            name: name.into(),
            closed_form,
            mc_estimate: est.mean,
            std_error: est.std_error,
            draws: est.draws,
            pass: (closed_form - est.mean).abs() <= PASS_SIGMAS * est.std_error,
            reliable: true,
        }
    }

    pub fn unreliable(mut self) -> Self {
        self.reliable = false;
        self
    }

    /// Distance from the closed form in standard errors.
    pub fn z_score(&self) -> f64 {
        let d = (self.closed_form - self.mc_estimate).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MomentCheckReport {
    pub checks: Vec<MomentCheck>,
}

impl MomentCheckReport {
    /// True when every reliable check passes.
    pub fn all_pass(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn failures(&self) -> impl Iterator<Item = &MomentCheck> {
        self.checks.iter().filter(|c| c.reliable && !c.pass)
    }

    pub fn extend(&mut self, other: MomentCheckReport) {
        self.checks.extend(other.checks);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("name,closed_form,mc_estimate,std_error,draws,z,pass,reliable\n");
        for c in &self.checks {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                c.name,
                c.closed_form,
                c.mc_estimate,
                c.std_error,
                c.draws,
                c.z_score(),
                c.pass,
                c.reliable
            )
            .unwrap();
        }
        out
    }

    pub fn to_text(&self) -> String {
        let width = self.checks.iter().map(|c| c.name.len()).max().unwrap_or(4).max(4);
        let mut out = String::new();
        writeln!(
            out,
            "{:width$}  {:>14}  {:>14}  {:>11}  {:>6}  result",
            "name", "closed form", "monte carlo", "std error", "z"
        )
        .unwrap();
        for c in &self.checks {
            writeln!(
                out,
                "{:width$}  {:>14.7e}  {:>14.7e}  {:>11.3e}  {:>6.2}  {}",
                c.name,
                c.closed_form,
                c.mc_estimate,
                c.std_error,
                c.z_score(),
                match (c.pass, c.reliable) {
                    (true, true) => "pass",
                    (false, true) => "FAIL",
                    (true, false) => "pass*",
                    (false, false) => "fail*",
                }
            )
            .unwrap();
        }
        let failed = self.failures().count();
        let unreliable = self.checks.iter().filter(|c| !c.reliable).count();
        writeln!(out, "{} checks, {} failed", self.checks.len() - unreliable, failed).unwrap();
        if unreliable > 0 {
            writeln!(
                out,
                "* {unreliable} infinite-variance checks (2 alpha >= N): standard error is not a valid scale, not counted"
            )
            .unwrap();
        }
        out
    }
}

/// `|g|^(-2 alpha)` has a finite variance iff `2 alpha < N`.
pub fn inverse_moment_has_finite_variance(n: usize, alpha: f64) -> bool {
    2.0 * alpha < n as f64
}

/// Inverse-norm moment checks over a grid of `(N, alpha, gamma)`. Cases with
/// `alpha >= N` are skipped, repeated alphas run once, and infinite-variance
/// cases are marked unreliable.
pub fn inverse_moment_suite(
    antennas: &[usize],
    alphas: &[f64],
    gammas: &[f64],
    n_draws: usize,
    stream: &mut RandomStream,
) -> Result<MomentCheckReport> {
    let mut report = MomentCheckReport::default();
    for &n in antennas {
        let mut seen: Vec<f64> = Vec::new();
        for &alpha in alphas {
            if alpha >= n as f64 || seen.contains(&alpha) {
                continue;
            }
            seen.push(alpha);
            for &gamma in gammas {
                let est = mc_inverse_norm_moment(n, gamma, alpha, n_draws, stream)?;
                let closed = crate::performance::gamma_ratio(n, alpha)? / gamma.powf(alpha);
                let check = MomentCheck::new(format!("inv_moment[N={n},alpha={alpha},gamma={gamma}]"), closed, &est);
                report.checks.push(if inverse_moment_has_finite_variance(n, alpha) {
                    check
                } else {
                    check.unreliable()
                });
            }
        }
    }
    Ok(report)
}

/// DS, BU and UI checks for every UE (and UE pair) of one instance.
pub fn ds_bu_ui_checks(
    label: &str,
    terms: &SinrTerms,
    inst: &OracleInstance,
    alloc: &PowerAllocation,
    alpha: f64,
    n_draws: usize,
    stream: &mut RandomStream,
) -> Result<MomentCheckReport> {
    let est = mc_ds_bu_ui(inst, alloc, alpha, n_draws, stream)?;
    let closed = closed_form_moments(terms, alloc, inst.rho_d);
    let k_count = inst.num_ues();
    let mut report = MomentCheckReport::default();
    for k in 0..k_count {
        report.checks.push(MomentCheck::new(format!("{label}:DS[{k}]"), closed.ds[k], &est.ds[k]));
        report.checks.push(MomentCheck::new(format!("{label}:BU[{k}]"), closed.bu[k], &est.bu[k]));
        for j in (0..k_count).filter(|&j| j != k) {
            report
                .checks
                .push(MomentCheck::new(format!("{label}:UI[{k},{j}]"), closed.ui[k][j], &est.ui[k][j]));
        }
    }
    Ok(report)
}

/// Antenna counts of the inverse-moment grid.
pub const MOMENT_ANTENNAS: [usize; 3] = [2, 4, 8];

/// Estimate variances of the inverse-moment grid.
pub const MOMENT_GAMMAS: [f64; 3] = [0.1, 1.0, 2.7];

/// Exponents of the DS/BU/UI checks.
pub const MOMENT_ALPHAS: [f64; 4] = [-1.0, 0.0, 0.5, 1.0];

/// Alpha grid of the inverse-moment suite at `n` antennas; the last entry
/// sits 1.5 below the pole at `alpha = N`.
pub fn inverse_moment_alphas(n: usize) -> Vec<f64> {
    vec![-1.0, -0.5, 0.0, 0.5, 1.0, n as f64 - 1.5]
}

/// Two APs, two UEs and four antennas, every AP serving both UEs. The UEs
/// share one pilot in the first instance and use orthogonal pilots in the
/// second.
pub fn reference_instances() -> Vec<(&'static str, OracleInstance)> {
    let beta = DMatrix::from_row_slice(2, 2, &[0.9, 0.4, 0.2, 0.7]);
    let build = |tau_p: usize, assignment: Vec<usize>| {
        let pilots = PilotBook::from_assignment(tau_p, assignment).expect("valid pilots");
        OracleInstance::new(beta.clone(), pilots, 2, 4, 10.0, 5.0).expect("valid instance")
    };
    vec![("copilot", build(1, vec![0, 0])), ("orthogonal", build(2, vec![0, 1]))]
}

/// The full oracle suite: the inverse-moment grid, then DS/BU/UI checks of
/// both reference instances under the MR rule for every alpha in
/// [`MOMENT_ALPHAS`].
pub fn validation_suite(n_draws: usize, stream: &mut RandomStream) -> Result<MomentCheckReport> {
    let mut report = MomentCheckReport::default();
    for n in MOMENT_ANTENNAS {
        report.extend(inverse_moment_suite(&[n], &inverse_moment_alphas(n), &MOMENT_GAMMAS, n_draws, stream)?);
    }
    for (name, inst) in reference_instances() {
        for alpha in MOMENT_ALPHAS {
            let terms = inst.sinr_terms(alpha)?;
            let alloc = inst.mr_allocation(alpha)?;
            let label = format!("{name}[alpha={alpha}]");
            report.extend(ds_bu_ui_checks(&label, &terms, &inst, &alloc, alpha, n_draws, stream)?);
        }
    }
    Ok(report)
}
