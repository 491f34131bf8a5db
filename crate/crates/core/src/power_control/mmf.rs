//! Max-min fair power control.
//!
//! The decision variables are the amplitudes `u_mk = sqrt(rho_d eta_mk)`. At a
//! fixed target `nu`, UE `k` meets `SINR_k >= nu` iff
//!
//! ```text
//! a_kk^T u_k >= sqrt(nu) |( a_kj^T u_j  (j != k),  b_kj o u_j  (all j),  1 )|
//! ```
//!
//! Rather than asking whether this system is feasible, each subproblem
//! maximises a margin `t` subtracted from every left-hand side. That program
//! is always strictly feasible and bounded, so the interior-point solver needs
//! no infeasibility detection: `t* >= 0` means `nu` is attainable. The inner
//! norms are flattened by concatenating `b_kj o u_j` into the outer vector,
//! which is exactly equivalent and needs no epigraph slacks.
//!
//! Variables are rescaled so each lies in `[0, 1]` at the per-AP budget,
//! which keeps the cone data well conditioned for any `rho_d`.

use crate::clustering::ClusterMap;
use crate::error::{Error, Result};
use crate::performance::{closed_form_sinr, gamma_ratio, PowerAllocation, SinrTerms, Strategy};
use crate::socp::{ConeDims, ConeProgram, ConicSolver, InteriorPoint, SolveStatus, SparseRows};
use crate::training::TrainingStats;

/// Coefficients of the MMF cone programs for one snapshot.
#[derive(Debug, Clone)]
pub struct MmfProblemData {
    terms: SinrTerms,
    clusters: ClusterMap,
    rho_d: f64,
    budget: f64,
    /// `coherent[k][j][slot] = a_mkj`, `m = M_j[slot]`.
    coherent: Vec<Vec<Vec<f64>>>,
    /// `spread[k][j][slot] = sqrt(b_mkj)`.
    spread: Vec<Vec<Vec<f64>>>,
    /// `gamma_hat[m][i] = gamma_{m, K_m[i]}^(-alpha/2)`.
    gamma_hat: Vec<Vec<f64>>,
    /// First pair index of each UE's serving set.
    offsets: Vec<usize>,
}

impl MmfProblemData {
    pub fn new(
        terms: &SinrTerms,
        stats: &TrainingStats,
        clusters: &ClusterMap,
        n: usize,
        alpha: f64,
        rho_d: f64,
    ) -> Result<Self> {
        let k_count = clusters.num_ues();
        if terms.num_ues() != k_count || stats.gamma.shape() != (clusters.num_aps, k_count) {
            return Err(Error::Config("SINR terms, training stats and clusters disagree on sizes".into()));
        }
        if !(rho_d > 0.0) {
            return Err(Error::Config(format!("rho_d must be positive, got {rho_d}")));
        }
        for j in 0..k_count {
            if terms.serving(j) != clusters.serving_aps[j].as_slice() {
                return Err(Error::Config(format!("SINR terms were built for a different cluster of UE {j}")));
            }
        }
        let budget = (rho_d / gamma_ratio(n, alpha)?).sqrt();
        let mut coherent = vec![vec![Vec::new(); k_count]; k_count];
        let mut spread = vec![vec![Vec::new(); k_count]; k_count];
        for k in 0..k_count {
            for j in 0..k_count {
                let len = clusters.serving_aps[j].len();
                coherent[k][j] = (0..len).map(|s| terms.a(k, j, s)).collect();
                spread[k][j] = (0..len)
                    .map(|s| {
                        let b = terms.b(k, j, s);
                        if !(b >= 0.0) {
                            return Err(Error::Domain(format!("b for UE {k}, pair ({j}, {s}) is {b}")));
                        }
                        Ok(b.sqrt())
                    })
                    .collect::<Result<_>>()?;
            }
        }
        let gamma_hat = clusters
            .served_ues
            .iter()
            .enumerate()
            .map(|(m, ues)| {
                ues.iter()
                    .map(|&k| {
                        let g = stats.gamma[(m, k)];
                        if g > 0.0 {
                            Ok(g.powf(-alpha / 2.0))
                        } else {
                            Err(Error::Domain(format!("gamma[{m}][{k}] must be positive for a served pair")))
                        }
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let mut offsets = Vec::with_capacity(k_count);
        let mut total = 0;
        for aps in &clusters.serving_aps {
            offsets.push(total);
            total += aps.len();
        }
        Ok(Self {
            terms: terms.clone(),
            clusters: clusters.clone(),
            rho_d,
            budget,
            coherent,
            spread,
            gamma_hat,
            offsets,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.clusters.num_ues()
    }

    pub fn num_pairs(&self) -> usize {
        self.clusters.num_pairs()
    }

    /// `sqrt(rho_d Gamma(N) / Gamma(N - alpha))`.
    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn clusters(&self) -> &ClusterMap {
        &self.clusters
    }

    pub fn coherent(&self, k: usize, j: usize) -> &[f64] {
        &self.coherent[k][j]
    }

    pub fn spread(&self, k: usize, j: usize) -> &[f64] {
        &self.spread[k][j]
    }

    pub fn gamma_hat(&self, m: usize) -> &[f64] {
        &self.gamma_hat[m]
    }

    fn gamma_hat_of(&self, m: usize, k: usize) -> f64 {
        let i = self.clusters.served_ues[m].binary_search(&k).expect("served pair");
        self.gamma_hat[m][i]
    }

    /// Interference-free full-power SINR of the worst UE: every UE alone,
    /// each serving AP spending its whole budget on it. No allocation can
    /// beat this for the UE that attains it, so it bounds the max-min SINR.
    pub fn upper_bracket(&self) -> f64 {
        (0..self.num_ues())
            .map(|k| {
                let amp: f64 = self.clusters.serving_aps[k]
                    .iter()
                    .zip(&self.coherent[k][k])
                    .map(|(&m, a)| a * self.budget / self.gamma_hat_of(m, k))
                    .sum();
                amp * amp
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Allocation for amplitudes `u`, ordered by UE then serving slot.
    pub fn allocation_from_amplitudes(&self, u: &[f64], strategy: Strategy) -> PowerAllocation {
        let mut alloc = PowerAllocation::zeros(self.clusters.num_aps, self.num_ues());
        alloc.strategy = Some(strategy);
        for (j, aps) in self.clusters.serving_aps.iter().enumerate() {
            for (slot, &m) in aps.iter().enumerate() {
                let amp = u[self.offsets[j] + slot].max(0.0);
                alloc.eta[(m, j)] = amp * amp / self.rho_d;
            }
        }
        alloc
    }

    fn min_sinr(&self, alloc: &PowerAllocation) -> Result<f64> {
        (0..self.num_ues()).try_fold(f64::INFINITY, |acc, k| {
            Ok(acc.min(closed_form_sinr(k, &self.terms, alloc, self.rho_d)?))
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BisectionSettings {
    pub nu_low: f64,
    /// `None` uses [`MmfProblemData::upper_bracket`].
    pub nu_high: Option<f64>,
    pub tol_rel: f64,
    pub max_iters: usize,
    pub feasibility_tol: f64,
}

impl Default for BisectionSettings {
    fn default() -> Self {
        Self {
            nu_low: 0.0,
            nu_high: None,
            tol_rel: 1e-3,
            max_iters: 100,
            feasibility_tol: 1e-6,
        }
    }
}

impl BisectionSettings {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.nu_low >= 0.0) {
            return bad(format!("nu_low must be >= 0, got {}", self.nu_low));
        }
        if let Some(hi) = self.nu_high {
            if !(hi > self.nu_low) {
                return bad(format!("nu_high ({hi}) must exceed nu_low ({})", self.nu_low));
            }
        }
        if !(self.tol_rel > 0.0) {
            return bad(format!("tol_rel must be positive, got {}", self.tol_rel));
        }
        if !(self.feasibility_tol >= 0.0) {
            return bad(format!("feasibility_tol must be >= 0, got {}", self.feasibility_tol));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Feasibility {
    /// `u` is ordered by UE then serving slot; `min_sinr` is its audited
    /// worst-UE SINR.
    Feasible {
        u: Vec<f64>,
        allocation: PowerAllocation,
        min_sinr: f64,
    },
    Infeasible,
    /// The conic solver failed and the candidate point does not certify `nu`.
    Indeterminate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BisectionStatus {
    Converged,
    /// Iteration cap hit; the best certified point is returned.
    MaxIterations,
    /// A subproblem could not be decided; the best certified point so far is
    /// returned.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MmfOutcome {
    pub allocation: PowerAllocation,
    /// Worst-UE SINR of `allocation`.
    pub nu: f64,
    /// Final bracket top.
    pub nu_high: f64,
    pub status: BisectionStatus,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Tying {
    PerPair,
    PerAp,
}

impl Tying {
    fn strategy(self) -> Strategy {
        match self {
            Tying::PerPair => Strategy::Mmf,
            Tying::PerAp => Strategy::MmfUniform,
        }
    }
}

/// Variable index and scale of each pair: `u_p = scale_p x_var(p)`.
struct Layout {
    var: Vec<usize>,
    scale: Vec<f64>,
    num_vars: usize,
    /// Per-AP groups of variables sharing a ball constraint (per-pair only).
    balls: Vec<Vec<usize>>,
}

fn layout(data: &MmfProblemData, tying: Tying) -> Layout {
    let pairs = data.num_pairs();
    let mut var = vec![0; pairs];
    let mut scale = vec![0.0; pairs];
    let mut balls = Vec::new();
    let num_vars = match tying {
        Tying::PerPair => {
            for (j, aps) in data.clusters.serving_aps.iter().enumerate() {
                for (slot, &m) in aps.iter().enumerate() {
                    let p = data.offsets[j] + slot;
                    var[p] = p;
                    scale[p] = data.budget / data.gamma_hat_of(m, j);
                }
            }
            for (m, ues) in data.clusters.served_ues.iter().enumerate() {
                if !ues.is_empty() {
                    balls.push(
                        ues.iter()
                            .map(|&k| data.offsets[k] + data.clusters.slot(m, k).expect("served pair"))
                            .collect(),
                    );
                }
            }
            pairs
        }
        Tying::PerAp => {
            let mut index = vec![usize::MAX; data.clusters.num_aps];
            let mut count = 0;
            for m in data.clusters.active_aps() {
                index[m] = count;
                count += 1;
            }
            for (j, aps) in data.clusters.serving_aps.iter().enumerate() {
                for (slot, &m) in aps.iter().enumerate() {
                    let p = data.offsets[j] + slot;
                    let norm = data.gamma_hat[m].iter().map(|g| g * g).sum::<f64>().sqrt();
                    var[p] = index[m];
                    scale[p] = data.budget / norm;
                }
            }
            count
        }
    };
    Layout {
        var,
        scale,
        num_vars,
        balls,
    }
}

fn margin_program(data: &MmfProblemData, lay: &Layout, tying: Tying, nu: f64) -> ConeProgram {
    let nv = lay.num_vars;
    let t = nv;
    let mut g = SparseRows::new(nv + 1);
    let mut h = Vec::new();
    let mut dims = ConeDims::default();

    for v in 0..nv {
        g.push(vec![(v, -1.0)]);
        h.push(0.0);
    }
    dims.nonneg = nv;
    if tying == Tying::PerAp {
        for v in 0..nv {
            g.push(vec![(v, 1.0)]);
            h.push(1.0);
        }
        dims.nonneg += nv;
    }

    let root = nu.sqrt();
    let k_count = data.num_ues();
    let mut acc = vec![0.0; nv];
    for k in 0..k_count {
        let mut rows = 0;
        // Head: c_k a_kk^T u_k - t.
        acc.iter_mut().for_each(|x| *x = 0.0);
        for (slot, a) in data.coherent[k][k].iter().enumerate() {
            let p = data.offsets[k] + slot;
            acc[lay.var[p]] += a * lay.scale[p];
        }
        let full: f64 = acc.iter().sum();
        let ck = 1.0 / full;
        let mut head: Vec<(usize, f64)> = acc
            .iter()
            .enumerate()
            .filter(|(_, &x)| x != 0.0)
            .map(|(v, &x)| (v, -ck * x))
            .collect();
        head.push((t, 1.0));
        g.push(head);
        h.push(0.0);
        rows += 1;

        let coef = ck * root;
        for j in 0..k_count {
            if j == k || data.coherent[k][j].iter().all(|&a| a == 0.0) {
                continue;
            }
            acc.iter_mut().for_each(|x| *x = 0.0);
            for (slot, a) in data.coherent[k][j].iter().enumerate() {
                let p = data.offsets[j] + slot;
                acc[lay.var[p]] += a * lay.scale[p];
            }
            g.push(
                acc.iter()
                    .enumerate()
                    .filter(|(_, &x)| x != 0.0)
                    .map(|(v, &x)| (v, -coef * x))
                    .collect(),
            );
            h.push(0.0);
            rows += 1;
        }
        // Spread terms sharing a variable merge into one row.
        acc.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..k_count {
            for (slot, sb) in data.spread[k][j].iter().enumerate() {
                let p = data.offsets[j] + slot;
                let c = sb * lay.scale[p];
                acc[lay.var[p]] += c * c;
            }
        }
        for (v, &sq) in acc.iter().enumerate() {
            if sq > 0.0 {
                g.push(vec![(v, -coef * sq.sqrt())]);
                h.push(0.0);
                rows += 1;
            }
        }
        g.push(Vec::new());
        h.push(coef);
        rows += 1;
        dims.soc.push(rows);
    }

    for ball in &lay.balls {
        g.push(Vec::new());
        h.push(1.0);
        for &v in ball {
            g.push(vec![(v, -1.0)]);
            h.push(0.0);
        }
        dims.soc.push(ball.len() + 1);
    }

    let mut c = vec![0.0; nv + 1];
    c[t] = -1.0;
    ConeProgram { c, g, h, dims }
}

/// Maps a solver point back into the feasible set and returns amplitudes.
fn amplitudes(lay: &Layout, tying: Tying, x: &[f64]) -> Vec<f64> {
    let mut x: Vec<f64> = x[..lay.num_vars].iter().map(|v| v.max(0.0)).collect();
    match tying {
        Tying::PerAp => x.iter_mut().for_each(|v| *v = v.min(1.0)),
        Tying::PerPair => {
            for ball in &lay.balls {
                let norm = ball.iter().map(|&v| x[v] * x[v]).sum::<f64>().sqrt();
                if norm > 1.0 {
                    ball.iter().for_each(|&v| x[v] /= norm);
                }
            }
        }
    }
    lay.var.iter().zip(&lay.scale).map(|(&v, s)| s * x[v]).collect()
}

fn feasibility(
    nu: f64,
    data: &MmfProblemData,
    settings: &BisectionSettings,
    tying: Tying,
    solver: &dyn ConicSolver,
) -> Result<Feasibility> {
    if !(nu >= 0.0) || !nu.is_finite() {
        return Err(Error::Domain(format!("target SINR must be finite and >= 0, got {nu}")));
    }
    let lay = layout(data, tying);
    let prog = margin_program(data, &lay, tying, nu);
    let sol = solver.solve(&prog);
    if sol.x.iter().all(|v| v.is_finite()) {
        let u = amplitudes(&lay, tying, &sol.x);
        let allocation = data.allocation_from_amplitudes(&u, tying.strategy());
        let min_sinr = data.min_sinr(&allocation)?;
        if min_sinr >= nu * (1.0 - settings.feasibility_tol) {
            return Ok(Feasibility::Feasible {
                u,
                allocation,
                min_sinr,
            });
        }
        if sol.status == SolveStatus::Optimal && sol.x[lay.num_vars] < 0.0 {
            return Ok(Feasibility::Infeasible);
        }
    }
    Ok(Feasibility::Indeterminate)
}

/// Decides whether every UE can reach SINR `nu` under the per-AP budgets.
pub fn mmf_feasibility(nu: f64, data: &MmfProblemData, settings: &BisectionSettings) -> Result<Feasibility> {
    feasibility(nu, data, settings, Tying::PerPair, &InteriorPoint::default())
}

/// As [`mmf_feasibility`] with one shared coefficient per AP.
pub fn mmf_uniform_feasibility(
    nu: f64,
    data: &MmfProblemData,
    settings: &BisectionSettings,
) -> Result<Feasibility> {
    feasibility(nu, data, settings, Tying::PerAp, &InteriorPoint::default())
}

fn bisect(
    data: &MmfProblemData,
    settings: &BisectionSettings,
    tying: Tying,
    solver: &dyn ConicSolver,
) -> Result<MmfOutcome> {
    settings.validate()?;
    let mut hi = settings.nu_high.unwrap_or_else(|| data.upper_bracket());
    let mut iterations = 0;
    let outcome = |best: Option<(PowerAllocation, f64)>, hi: f64, status, iterations| {
        let (allocation, nu) = best.unwrap_or_else(|| {
            let mut a = PowerAllocation::zeros(data.clusters.num_aps, data.num_ues());
            a.strategy = Some(tying.strategy());
            (a, 0.0)
        });
        MmfOutcome {
            allocation,
            nu,
            nu_high: hi,
            status,
            iterations,
        }
    };

    // The zero target yields a balanced starting point and a lower bracket.
    let mut best = match feasibility(0.0, data, settings, tying, solver)? {
        Feasibility::Feasible {
            allocation, min_sinr, ..
        } => (allocation, min_sinr),
        _ => return Ok(outcome(None, hi, BisectionStatus::Indeterminate, 0)),
    };
    let mut lo = best.1;
    if settings.nu_low > lo && settings.nu_low < hi {
        iterations += 1;
        match feasibility(settings.nu_low, data, settings, tying, solver)? {
            Feasibility::Feasible {
                allocation, min_sinr, ..
            } => {
                lo = settings.nu_low.max(min_sinr);
                best = (allocation, min_sinr);
            }
            Feasibility::Infeasible => hi = settings.nu_low,
            Feasibility::Indeterminate => {
                return Ok(outcome(Some(best), hi, BisectionStatus::Indeterminate, iterations))
            }
        }
    }

    loop {
        if hi - lo <= settings.tol_rel * hi {
            return Ok(outcome(Some(best), hi, BisectionStatus::Converged, iterations));
        }
        if iterations >= settings.max_iters {
            return Ok(outcome(Some(best), hi, BisectionStatus::MaxIterations, iterations));
        }
        // Geometric midpoints halve the bracket in log-SINR.
        let nu = if lo > 0.0 { (lo * hi).sqrt() } else { hi / 2.0 };
        iterations += 1;
        match feasibility(nu, data, settings, tying, solver)? {
            Feasibility::Feasible {
                allocation, min_sinr, ..
            } => {
                lo = nu.max(min_sinr);
                if min_sinr > best.1 {
                    best = (allocation, min_sinr);
                }
            }
            Feasibility::Infeasible => hi = nu,
            Feasibility::Indeterminate => {
                return Ok(outcome(Some(best), hi, BisectionStatus::Indeterminate, iterations))
            }
        }
    }
}

/// Max-min fair allocation with one coefficient per serving pair.
pub fn mmf_allocation(data: &MmfProblemData, settings: &BisectionSettings) -> Result<MmfOutcome> {
    bisect(data, settings, Tying::PerPair, &InteriorPoint::default())
}

/// Max-min fair allocation with a single coefficient per active AP.
pub fn mmf_uniform_allocation(data: &MmfProblemData, settings: &BisectionSettings) -> Result<MmfOutcome> {
    bisect(data, settings, Tying::PerAp, &InteriorPoint::default())
}

/// [`mmf_allocation`] or [`mmf_uniform_allocation`] on a caller-supplied solver.
pub fn mmf_allocation_with(
    data: &MmfProblemData,
    settings: &BisectionSettings,
    uniform: bool,
    solver: &dyn ConicSolver,
) -> Result<MmfOutcome> {
    let tying = if uniform { Tying::PerAp } else { Tying::PerPair };
    bisect(data, settings, tying, solver)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel_world::generate_snapshot;
    use crate::clustering::build_clusters;
    use crate::config::SystemConfig;
    use crate::performance::{all_sinrs, audit_power_constraint, compute_sinr_terms};
    use crate::power_control::mr_allocation;
    use crate::rng::RandomStream;
    use crate::training::{assign_pilots, estimation_stats, PilotBook};
    use nalgebra::DMatrix;

    struct Instance {
        stats: TrainingStats,
        clusters: ClusterMap,
        terms: SinrTerms,
        data: MmfProblemData,
        n: usize,
        alpha: f64,
        rho_d: f64,
    }

    fn from_beta(beta: DMatrix<f64>, pilots: PilotBook, l: usize, n: usize, alpha: f64) -> Instance {
        let cfg = SystemConfig::with_sizes(beta.nrows(), n, beta.ncols());
        let stats = estimation_stats(&beta, &pilots, pilots.tau_p, cfg.rho_p).unwrap();
        let clusters = build_clusters(&beta, l).unwrap();
        let terms = compute_sinr_terms(&stats, &beta, &pilots, &clusters, n, alpha).unwrap();
        let data = MmfProblemData::new(&terms, &stats, &clusters, n, alpha, cfg.rho_d).unwrap();
        Instance {
            stats,
            clusters,
            terms,
            data,
            n,
            alpha,
            rho_d: cfg.rho_d,
        }
    }

    fn random(m: usize, k: usize, l: usize, alpha: f64, seed: u64) -> Instance {
        random_with_pilots(m, k, l, (k / 2).max(1), alpha, seed)
    }

    fn random_with_pilots(m: usize, k: usize, l: usize, tau_p: usize, alpha: f64, seed: u64) -> Instance {
        let mut cfg = SystemConfig::with_sizes(m, 4, k);
        cfg.cluster_size = l;
        cfg.tau_p = tau_p;
        let mut stream = RandomStream::new(seed);
        let snap = generate_snapshot(&cfg, &mut stream).unwrap();
        let pilots = assign_pilots(k, cfg.tau_p, cfg.pilot_policy, &mut stream).unwrap();
        from_beta(snap.beta, pilots, l, 4, alpha)
    }

    fn min_sinr(inst: &Instance, alloc: &PowerAllocation) -> f64 {
        all_sinrs(&inst.terms, alloc, inst.rho_d)
            .unwrap()
            .into_iter()
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn zero_target_is_feasible() {
        let inst = random(3, 2, 2, 0.0, 7);
        let f = mmf_feasibility(0.0, &inst.data, &BisectionSettings::default()).unwrap();
        assert!(matches!(f, Feasibility::Feasible { .. }));
    }

    #[test]
    fn target_above_bracket_is_infeasible() {
        let inst = random(3, 2, 2, 0.5, 11);
        let nu = inst.data.upper_bracket() * 1.01;
        let s = BisectionSettings::default();
        assert_eq!(mmf_feasibility(nu, &inst.data, &s).unwrap(), Feasibility::Infeasible);
        assert_eq!(mmf_uniform_feasibility(nu, &inst.data, &s).unwrap(), Feasibility::Infeasible);
    }

    #[test]
    fn feasible_point_round_trips() {
        let inst = random(4, 3, 2, 0.0, 3);
        let s = BisectionSettings::default();
        let mr = mr_allocation(&inst.stats, &inst.clusters, inst.n, inst.alpha).unwrap();
        let nu = min_sinr(&inst, &mr);
        match mmf_feasibility(nu, &inst.data, &s).unwrap() {
            Feasibility::Feasible { allocation, u, .. } => {
                assert_eq!(u.len(), inst.data.num_pairs());
                let sinr = all_sinrs(&inst.terms, &allocation, inst.rho_d).unwrap();
                assert!(sinr.iter().all(|&x| x >= nu * (1.0 - s.feasibility_tol)), "{sinr:?} vs {nu}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lone_ue_gets_full_budget() {
        let beta = DMatrix::from_row_slice(1, 1, &[1e-9]);
        let pilots = PilotBook::from_assignment(1, vec![0]).unwrap();
        for alpha in [-1.0, 0.0, 1.0] {
            let inst = from_beta(beta.clone(), pilots.clone(), 1, 4, alpha);
            let out = mmf_allocation(&inst.data, &BisectionSettings::default()).unwrap();
            assert_eq!(out.status, BisectionStatus::Converged);
            let full = mr_allocation(&inst.stats, &inst.clusters, inst.n, alpha).unwrap();
            let rel = (out.allocation.eta[(0, 0)] - full.eta[(0, 0)]).abs() / full.eta[(0, 0)];
            assert!(rel < 1e-6, "{rel}");
            assert!((out.nu - min_sinr(&inst, &full)).abs() <= 1e-6 * out.nu);
        }
    }

    #[test]
    fn symmetric_pair_equal_sinrs() {
        let beta = DMatrix::from_row_slice(2, 2, &[1e-9, 3e-10, 3e-10, 1e-9]);
        let pilots = PilotBook::from_assignment(2, vec![0, 1]).unwrap();
        let inst = from_beta(beta, pilots, 2, 4, 0.0);
        let s = BisectionSettings {
            tol_rel: 1e-6,
            ..Default::default()
        };
        let out = mmf_allocation(&inst.data, &s).unwrap();
        let sinr = all_sinrs(&inst.terms, &out.allocation, inst.rho_d).unwrap();
        assert!((sinr[0] - sinr[1]).abs() <= 1e-4 * sinr[0], "{sinr:?}");
    }

    #[test]
    fn mmf_beats_mr_and_uniform() {
        let s = BisectionSettings::default();
        for seed in 0..8 {
            for alpha in [-1.0, 0.0, 1.0] {
                let inst = random(3, 2, 2, alpha, seed);
                let mr = mr_allocation(&inst.stats, &inst.clusters, inst.n, alpha).unwrap();
                let mmf = mmf_allocation(&inst.data, &s).unwrap();
                let uni = mmf_uniform_allocation(&inst.data, &s).unwrap();
                assert_eq!(mmf.status, BisectionStatus::Converged);
                assert_eq!(uni.status, BisectionStatus::Converged);
                let (a, b, c) = (min_sinr(&inst, &mmf.allocation), min_sinr(&inst, &mr), min_sinr(&inst, &uni.allocation));
                assert!(a >= b * (1.0 - s.tol_rel), "seed {seed} alpha {alpha}: mmf {a} < mr {b}");
                assert!(c <= a * (1.0 + s.tol_rel), "seed {seed} alpha {alpha}: mmf-u {c} > mmf {a}");
            }
        }
    }

    #[test]
    fn uniform_matches_full_when_aps_serve_one_ue() {
        let beta = DMatrix::from_row_slice(2, 2, &[1e-8, 1e-11, 2e-11, 5e-9]);
        let pilots = PilotBook::from_assignment(1, vec![0, 0]).unwrap();
        let inst = from_beta(beta, pilots, 1, 4, 0.5);
        assert!(inst.clusters.served_ues.iter().all(|u| u.len() == 1));
        let s = BisectionSettings {
            tol_rel: 1e-6,
            ..Default::default()
        };
        let a = mmf_allocation(&inst.data, &s).unwrap();
        let b = mmf_uniform_allocation(&inst.data, &s).unwrap();
        assert!((a.nu - b.nu).abs() <= 1e-5 * a.nu, "{} vs {}", a.nu, b.nu);
    }

    #[test]
    fn uniform_beats_mr_on_average() {
        let s = BisectionSettings::default();
        let se = |x: f64| (1.0 + x).log2();
        let (mut uni, mut mr) = (0.0, 0.0);
        for seed in 0..50 {
            // Orthogonal pilots: with both UEs on one pilot the average gain
            // is too small to resolve in 50 snapshots.
            let inst = random_with_pilots(3, 2, 2, 2, 0.0, 100 + seed);
            let alloc = mr_allocation(&inst.stats, &inst.clusters, inst.n, 0.0).unwrap();
            mr += se(min_sinr(&inst, &alloc));
            uni += se(mmf_uniform_allocation(&inst.data, &s).unwrap().nu);
        }
        assert!(uni >= mr, "{uni} < {mr}");
    }

    #[test]
    fn outcome_certified_and_within_budget() {
        let s = BisectionSettings::default();
        for seed in 0..4 {
            let inst = random(8, 4, 3, 0.5, 40 + seed);
            for out in [mmf_allocation(&inst.data, &s).unwrap(), mmf_uniform_allocation(&inst.data, &s).unwrap()] {
                assert!(min_sinr(&inst, &out.allocation) >= out.nu * (1.0 - 10.0 * s.tol_rel));
                assert!(out.nu <= out.nu_high);
                out.allocation.check_support(&inst.clusters).unwrap();
                audit_power_constraint(&out.allocation, &inst.stats, &inst.clusters, inst.n, inst.alpha, s.feasibility_tol)
                    .unwrap();
            }
        }
    }

    #[test]
    fn feasibility_is_monotone() {
        let inst = random(5, 3, 2, 0.0, 9);
        let s = BisectionSettings::default();
        let opt = mmf_allocation(&inst.data, &s).unwrap().nu;
        for frac in [0.9, 0.5, 0.1] {
            let f = mmf_feasibility(opt * frac, &inst.data, &s).unwrap();
            assert!(matches!(f, Feasibility::Feasible { .. }), "{frac}");
        }
        assert_eq!(mmf_feasibility(opt * 1.05, &inst.data, &s).unwrap(), Feasibility::Infeasible);
    }

    #[test]
    fn iteration_cap_reported() {
        let inst = random(3, 2, 2, 0.0, 5);
        let s = BisectionSettings {
            max_iters: 1,
            tol_rel: 1e-9,
            ..Default::default()
        };
        let out = mmf_allocation(&inst.data, &s).unwrap();
        assert_eq!(out.status, BisectionStatus::MaxIterations);
        assert!(out.nu > 0.0);
    }

    #[test]
    fn settings_validated() {
        let inst = random(3, 2, 2, 0.0, 5);
        for s in [
            BisectionSettings {
                tol_rel: 0.0,
                ..Default::default()
            },
            BisectionSettings {
                nu_low: -1.0,
                ..Default::default()
            },
            BisectionSettings {
                nu_low: 2.0,
                nu_high: Some(1.0),
                ..Default::default()
            },
        ] {
            assert!(mmf_allocation(&inst.data, &s).is_err());
        }
        assert!(mmf_feasibility(-1.0, &inst.data, &BisectionSettings::default()).is_err());
    }

    #[test]
    fn data_shapes() {
        let inst = random(6, 3, 2, 0.5, 1);
        for k in 0..3 {
            for j in 0..3 {
                assert_eq!(inst.data.coherent(k, j).len(), inst.clusters.serving_aps[j].len());
                assert_eq!(inst.data.spread(k, j).len(), inst.clusters.serving_aps[j].len());
            }
        }
        for m in 0..6 {
            assert_eq!(inst.data.gamma_hat(m).len(), inst.clusters.served_ues[m].len());
        }
    }
}
