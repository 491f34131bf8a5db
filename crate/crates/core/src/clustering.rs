//! User-centric serving clusters.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// `serving_aps[k]` is M_k (strongest first); `served_ues[m]` is K_m
/// (ascending UE index).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClusterMap {
    pub num_aps: usize,
    pub serving_aps: Vec<Vec<usize>>,
    pub served_ues: Vec<Vec<usize>>,
}

impl ClusterMap {
    /// Builds the dual sets from the per-UE serving lists.
    pub fn from_serving(num_aps: usize, serving_aps: Vec<Vec<usize>>) -> Result<Self> {
        let mut served_ues = vec![Vec::new(); num_aps];
        for (k, aps) in serving_aps.iter().enumerate() {
            for &m in aps {
                if m >= num_aps {
                    return Err(Error::IndexOutOfRange {
                        what: "AP",
                        index: m,
                        len: num_aps,
                    });
                }
                if served_ues[m].last() == Some(&k) {
                    return Err(Error::Config(format!("AP {m} listed twice for UE {k}")));
                }
                served_ues[m].push(k);
            }
        }
        Ok(Self {
            num_aps,
            serving_aps,
            served_ues,
        })
    }

    pub fn num_ues(&self) -> usize {
        self.serving_aps.len()
    }

    pub fn serves(&self, m: usize, k: usize) -> bool {
        self.serving_aps[k].contains(&m)
    }

    /// Position of AP `m` inside M_k.
    pub fn slot(&self, m: usize, k: usize) -> Option<usize> {
        self.serving_aps[k].iter().position(|&x| x == m)
    }

    /// APs with at least one served UE.
    pub fn active_aps(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_aps).filter(|&m| !self.served_ues[m].is_empty())
    }

    pub fn num_pairs(&self) -> usize {
        self.serving_aps.iter().map(Vec::len).sum()
    }
}

/// M_k = the `cluster_size` APs with the largest `beta[., k]`; ties go to the
/// lower AP index.
pub fn build_clusters(beta: &DMatrix<f64>, cluster_size: usize) -> Result<ClusterMap> {
    let (m_count, k_count) = beta.shape();
    if cluster_size == 0 || cluster_size > m_count {
        return Err(Error::Config(format!(
            "cluster size must lie in [1, {m_count}], got {cluster_size}"
        )));
    }
    let serving = (0..k_count)
        .map(|k| {
            let mut order: Vec<usize> = (0..m_count).collect();
            // Stable sort keeps lower indices first among equal gains.
            order.sort_by(|&a, &b| beta[(b, k)].total_cmp(&beta[(a, k)]));
            order.truncate(cluster_size);
            order
        })
        .collect();
    ClusterMap::from_serving(m_count, serving)
}
