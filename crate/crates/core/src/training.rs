//! Uplink pilot assignment and linear-MMSE estimation statistics.

use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::config::PilotPolicy;
use crate::error::{Error, Result};
use crate::rng::RandomStream;

/// Pilot index per UE from a set of `tau_p` orthonormal pilots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PilotBook {
    pub tau_p: usize,
    pub assignment: Vec<usize>,
    /// UEs using each pilot, in ascending order.
    pub copilot_sets: Vec<Vec<usize>>,
}

impl PilotBook {
    pub fn from_assignment(tau_p: usize, assignment: Vec<usize>) -> Result<Self> {
        if tau_p == 0 {
            return Err(Error::Config("tau_p must be at least 1".into()));
        }
        let mut copilot_sets = vec![Vec::new(); tau_p];
        for (k, &p) in assignment.iter().enumerate() {
            if p >= tau_p {
                return Err(Error::IndexOutOfRange {
                    what: "pilot",
                    index: p,
                    len: tau_p,
                });
            }
            copilot_sets[p].push(k);
        }
        Ok(Self {
            tau_p,
            assignment,
            copilot_sets,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.assignment.len()
    }

    /// Whether UEs `k` and `j` share a pilot; unchecked variant of
    /// [`copilot_indicator`].
    #[inline]
    pub fn shares_pilot(&self, k: usize, j: usize) -> bool {
        self.assignment[k] == self.assignment[j]
    }

    /// UEs sharing `k`'s pilot, `k` included.
    pub fn copilots_of(&self, k: usize) -> &[usize] {
        &self.copilot_sets[self.assignment[k]]
    }
}

pub fn assign_pilots(
    num_ues: usize,
    tau_p: usize,
    policy: PilotPolicy,
    stream: &mut RandomStream,
) -> Result<PilotBook> {
    if tau_p == 0 {
        return Err(Error::Config("tau_p must be at least 1".into()));
    }
    let assignment = match policy {
        PilotPolicy::RoundRobin => (0..num_ues).map(|k| k % tau_p).collect(),
        PilotPolicy::Random => (0..num_ues).map(|_| stream.uniform_index(tau_p)).collect(),
    };
    PilotBook::from_assignment(tau_p, assignment)
}

/// 1 if `k` and `j` use the same pilot (always for `k == j`), else 0.
pub fn copilot_indicator(pilots: &PilotBook, k: usize, j: usize) -> Result<u8> {
    let len = pilots.num_ues();
    for idx in [k, j] {
        if idx >= len {
            return Err(Error::IndexOutOfRange {
                what: "UE",
                index: idx,
                len,
            });
        }
    }
    Ok(pilots.shares_pilot(k, j) as u8)
}

/// Per-link MMSE scaling `c` and per-antenna estimate variance `gamma`,
/// both M x K.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingStats {
    pub c: DMatrix<f64>,
    pub gamma: DMatrix<f64>,
}

impl TrainingStats {
    /// CSV with one row per (m, k): `m,k,c,gamma`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,k,c,gamma\n");
        for m in 0..self.c.nrows() {
            for k in 0..self.c.ncols() {
                writeln!(out, "{m},{k},{},{}", self.c[(m, k)], self.gamma[(m, k)]).unwrap();
            }
        }
        out
    }
}

/// `c_mk = sqrt(tau_p rho_p) beta_mk / (tau_p rho_p sum_{j ~ k} beta_mj + 1)` and
/// `gamma_mk = sqrt(tau_p rho_p) c_mk beta_mk`, where `j ~ k` runs over every UE
/// sharing `k`'s pilot, `k` itself included.
pub fn estimation_stats(
    beta: &DMatrix<f64>,
    pilots: &PilotBook,
    tau_p: usize,
    rho_p: f64,
) -> Result<TrainingStats> {
    let (m_count, k_count) = beta.shape();
    if pilots.num_ues() != k_count {
        return Err(Error::Config(format!(
            "pilot book covers {} UEs, beta has {k_count} columns",
            pilots.num_ues()
        )));
    }
    let snr = tau_p as f64 * rho_p;
    if !(snr > 0.0) {
        return Err(Error::Config("tau_p * rho_p must be positive".into()));
    }
    let amp = snr.sqrt();
    let mut c = DMatrix::zeros(m_count, k_count);
    let mut gamma = DMatrix::zeros(m_count, k_count);
    for m in 0..m_count {
        for k in 0..k_count {
            let contamination: f64 = pilots.copilots_of(k).iter().map(|&j| beta[(m, j)]).sum();
            let ck = amp * beta[(m, k)] / (snr * contamination + 1.0);
            c[(m, k)] = ck;
            gamma[(m, k)] = amp * ck * beta[(m, k)];
        }
    }
    Ok(TrainingStats { c, gamma })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rr(k: usize, tau: usize) -> PilotBook {
        assign_pilots(k, tau, PilotPolicy::RoundRobin, &mut RandomStream::new(0)).unwrap()
    }

    #[test]
    fn round_robin_reuse() {
        let book = rr(4, 2);
        assert_eq!(book.assignment, vec![0, 1, 0, 1]);
        assert_eq!(book.copilot_sets, vec![vec![0, 2], vec![1, 3]]);
    }

    #[test]
    fn distinct_when_enough_pilots() {
        let book = rr(3, 4);
        assert_eq!(book.assignment, vec![0, 1, 2]);
        assert!(book.copilot_sets.iter().all(|s| s.len() <= 1));
        for k in 0..3 {
            assert_eq!(book.copilots_of(k), &[k]);
        }
    }

    #[test]
    fn each_pilot_reused_twice() {
        let book = rr(40, 20);
        assert!(book.copilot_sets.iter().all(|s| s.len() == 2));
    }

    #[test]
    fn random_policy_in_range_and_seeded() {
        let a = assign_pilots(30, 7, PilotPolicy::Random, &mut RandomStream::new(9)).unwrap();
        let b = assign_pilots(30, 7, PilotPolicy::Random, &mut RandomStream::new(9)).unwrap();
        assert_eq!(a, b);
        assert!(a.assignment.iter().all(|&p| p < 7));
        assert_eq!(a.copilot_sets.iter().map(Vec::len).sum::<usize>(), 30);
    }

    #[test]
    fn zero_pilots_rejected() {
        assert!(assign_pilots(3, 0, PilotPolicy::RoundRobin, &mut RandomStream::new(0)).is_err());
    }

    #[test]
    fn indicator_cases() {
        let book = rr(4, 2);
        assert_eq!(copilot_indicator(&book, 1, 1).unwrap(), 1);
        assert_eq!(copilot_indicator(&book, 0, 2).unwrap(), 1);
        assert_eq!(copilot_indicator(&book, 0, 1).unwrap(), 0);
        assert!(matches!(
            copilot_indicator(&book, 0, 4),
            Err(Error::IndexOutOfRange { index: 4, .. })
        ));
    }

    #[test]
    fn single_ue_hand_value() {
        // tau_p rho_p = 100, beta = 0.1: c = 10 * 0.1 / 11, gamma = 1/11.
        let beta = DMatrix::from_element(1, 1, 0.1);
        let s = estimation_stats(&beta, &rr(1, 1), 1, 100.0).unwrap();
        assert!((s.c[(0, 0)] - 1.0 / 11.0).abs() < 1e-15);
        assert!((s.gamma[(0, 0)] - 1.0 / 11.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_estimation_limit() {
        let beta = DMatrix::from_element(1, 1, 0.3);
        let s = estimation_stats(&beta, &rr(1, 1), 1, 1e12).unwrap();
        assert!((s.gamma[(0, 0)] - 0.3).abs() / 0.3 < 1e-9);
    }

    #[test]
    fn copilot_ratio_four() {
        let beta = DMatrix::from_row_slice(1, 2, &[0.2, 0.1]);
        let s = estimation_stats(&beta, &rr(2, 1), 1, 50.0).unwrap();
        assert!((s.gamma[(0, 0)] / s.gamma[(0, 1)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn csv_layout() {
        let beta = DMatrix::from_element(2, 3, 0.1);
        let s = estimation_stats(&beta, &rr(3, 2), 2, 10.0).unwrap();
        let csv = s.to_csv();
        assert_eq!(csv.lines().count(), 7);
        assert!(csv.starts_with("m,k,c,gamma\n"));
    }

    proptest! {
        #[test]
        fn gamma_bounded_and_copilot_identity(
            betas in prop::collection::vec(1e-12f64..1e-3, 12),
            tau in 1usize..4,
            rho_db in 60.0f64..120.0,
        ) {
            let beta = DMatrix::from_vec(3, 4, betas);
            let book = rr(4, tau);
            let s = estimation_stats(&beta, &book, tau, 10f64.powf(rho_db / 10.0)).unwrap();
            for m in 0..3 {
                for k in 0..4 {
                    let g = s.gamma[(m, k)];
                    prop_assert!(g > 0.0 && g <= beta[(m, k)]);
                    for j in 0..4 {
                        if book.shares_pilot(k, j) {
                            let lhs = g * beta[(m, j)].powi(2);
                            let rhs = s.gamma[(m, j)] * beta[(m, k)].powi(2);
                            prop_assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
                        }
                    }
                }
            }
        }

        #[test]
        fn contamination_never_helps(
            b0 in 1e-10f64..1e-4, b1 in 1e-10f64..1e-4, rho_db in 60.0f64..120.0,
        ) {
            let rho = 10f64.powf(rho_db / 10.0);
            let beta = DMatrix::from_row_slice(1, 2, &[b0, b1]);
            let alone = estimation_stats(&beta, &rr(2, 2), 2, rho).unwrap();
            let shared = estimation_stats(&beta, &PilotBook::from_assignment(2, vec![0, 0]).unwrap(), 2, rho).unwrap();
            prop_assert!(shared.gamma[(0, 0)] <= alone.gamma[(0, 0)]);
        }
    }
}
