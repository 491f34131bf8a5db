//! Network geometry and large-scale fading.
//!
//! APs and UEs are dropped uniformly on a `D x D` square with wrap-around
//! (torus) distances. Pathloss follows a log-distance urban-microcell law,
//! `PL(dB) = -30.5 - 36.7 log10(max(d, 10 m))`, with independent log-normal
//! shadowing per AP-UE link.

use std::fmt::Write as _;
use std::io::Write;

use nalgebra::DMatrix;

use crate::config::SystemConfig;
use crate::error::Result;
use crate::rng::RandomStream;

/// Distances below this are clamped before evaluating the pathloss law.
pub const MIN_DISTANCE_M: f64 = 10.0;
const PL_INTERCEPT_DB: f64 = -30.5;
const PL_SLOPE_DB: f64 = 36.7;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

/// Shortest distance between two points on a `side x side` torus.
pub fn wrapped_distance(a: Point, b: Point, side: f64) -> f64 {
    let fold = |d: f64| {
        let d = d.abs().rem_euclid(side);
        d.min(side - d)
    };
    fold(a.x - b.x).hypot(fold(a.y - b.y))
}

pub fn pathloss_db(distance_m: f64) -> f64 {
    PL_INTERCEPT_DB - PL_SLOPE_DB * distance_m.max(MIN_DISTANCE_M).log10()
}

/// Linear large-scale gain `10^((pl_db + sigma_sh q) / 10)`.
pub fn large_scale_gain(pl_db: f64, q: f64, sigma_sh_db: f64) -> f64 {
    10f64.powf((pl_db + sigma_sh_db * q) / 10.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub area_side_m: f64,
    pub ap_positions: Vec<Point>,
    pub ue_positions: Vec<Point>,
    /// M x K large-scale gains, linear.
    pub beta: DMatrix<f64>,
}

impl Snapshot {
    /// Builds the gain matrix for given positions and standard-normal shadow
    /// draws (`shadow` is M x K).
    pub fn from_positions(
        area_side_m: f64,
        sigma_sh_db: f64,
        ap_positions: Vec<Point>,
        ue_positions: Vec<Point>,
        shadow: &DMatrix<f64>,
    ) -> Self {
        let (m, k) = (ap_positions.len(), ue_positions.len());
        assert_eq!(shadow.shape(), (m, k), "shadow draws must be M x K");
        let beta = DMatrix::from_fn(m, k, |i, j| {
            let d = wrapped_distance(ap_positions[i], ue_positions[j], area_side_m);
            large_scale_gain(pathloss_db(d), shadow[(i, j)], sigma_sh_db)
        });
        Self {
            area_side_m,
            ap_positions,
            ue_positions,
            beta,
        }
    }

    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_ues(&self) -> usize {
        self.ue_positions.len()
    }

    pub fn distance(&self, m: usize, k: usize) -> f64 {
        wrapped_distance(self.ap_positions[m], self.ue_positions[k], self.area_side_m)
    }

    /// CSV with one row per (m, k): `m,k,distance_m,beta`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("m,k,distance_m,beta\n");
        for m in 0..self.num_aps() {
            for k in 0..self.num_ues() {
                writeln!(out, "{m},{k},{},{}", self.distance(m, k), self.beta[(m, k)]).unwrap();
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(self.to_csv().as_bytes())?;
        Ok(())
    }
}

/// Draws AP and UE positions and shadowing, then fills `beta`.
///
/// Consumes, in order: M AP positions, K UE positions, M x K shadow draws
/// (AP-major).
pub fn generate_snapshot(config: &SystemConfig, stream: &mut RandomStream) -> Result<Snapshot> {
    config.validate()?;
    let side = config.area_side_m;
    let mut drop = |n: usize| -> Vec<Point> {
        (0..n)
            .map(|_| {
                let x = side * stream.uniform();
                let y = side * stream.uniform();
                Point::new(x, y)
            })
            .collect()
    };
    let aps = drop(config.num_aps);
    let ues = drop(config.num_ues);
    let mut shadow = DMatrix::zeros(config.num_aps, config.num_ues);
    for m in 0..config.num_aps {
        for k in 0..config.num_ues {
            shadow[(m, k)] = stream.standard_normal();
        }
    }
    Ok(Snapshot::from_positions(side, config.sigma_sh_db, aps, ues, &shadow))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn pathloss_floor() {
        assert_eq!(pathloss_db(1.0), pathloss_db(10.0));
        assert_eq!(pathloss_db(0.0), pathloss_db(10.0));
    }

    #[test]
    fn pathloss_at_100m() {
        assert!((pathloss_db(100.0) - (-103.9)).abs() < 1e-12);
    }

    #[test]
    fn pathloss_decade_slope() {
        assert!((pathloss_db(1000.0) - pathloss_db(100.0) + 36.7).abs() < 1e-12);
    }

    #[test]
    fn zero_shadowing_is_pure_pathloss() {
        let pl = -90.0;
        assert_eq!(large_scale_gain(pl, 0.0, 4.0), 10f64.powf(pl / 10.0));
    }

    #[test]
    fn one_sigma_shadow_factor() {
        let ratio = large_scale_gain(-90.0, 1.0, 4.0) / large_scale_gain(-90.0, 0.0, 4.0);
        assert!((ratio - 10f64.powf(0.4)).abs() < 1e-12);
        assert!((ratio - 2.5119).abs() < 1e-4);
    }

    #[test]
    fn lognormal_mean() {
        let (pl, sigma) = (-100.0, 4.0);
        let mut s = RandomStream::new(11);
        let n = 1_000_000;
        let mean = (0..n).map(|_| large_scale_gain(pl, s.standard_normal(), sigma)).sum::<f64>() / n as f64;
        let expect = 10f64.powf(pl / 10.0) * ((sigma * 10f64.ln() / 10.0).powi(2) / 2.0).exp();
        assert!((mean - expect).abs() / expect < 0.01, "{mean} vs {expect}");
    }

    #[test]
    fn colocated_single_link() {
        let p = Point::new(123.0, 45.0);
        let shadow = DMatrix::from_element(1, 1, 0.7);
        let snap = Snapshot::from_positions(500.0, 4.0, vec![p], vec![p], &shadow);
        let expect = 10f64.powf(pathloss_db(MIN_DISTANCE_M) / 10.0) * 10f64.powf(4.0 * 0.7 / 10.0);
        assert!((snap.beta[(0, 0)] - expect).abs() / expect < 1e-14);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = SystemConfig::desk();
        let a = generate_snapshot(&cfg, &mut RandomStream::new(5)).unwrap();
        let b = generate_snapshot(&cfg, &mut RandomStream::new(5)).unwrap();
        let c = generate_snapshot(&cfg, &mut RandomStream::new(6)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.beta, c.beta);
    }

    #[test]
    fn gains_below_model_maximum() {
        let mut cfg = SystemConfig::with_sizes(100, 8, 20);
        cfg.area_side_m = 500.0;
        let snap = generate_snapshot(&cfg, &mut RandomStream::new(1)).unwrap();
        // 6-sigma shadowing on top of the floor pathloss.
        let ceiling = large_scale_gain(pathloss_db(0.0), 6.0, cfg.sigma_sh_db);
        for &b in snap.beta.iter() {
            assert!(b > 0.0 && b < 1.0 && b <= ceiling, "{b}");
        }
    }

    #[test]
    fn wrapped_distance_folds() {
        let d = wrapped_distance(Point::new(1.0, 1.0), Point::new(499.0, 499.0), 500.0);
        assert!((d - 8f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn csv_has_row_per_link() {
        let cfg = SystemConfig::with_sizes(3, 2, 2);
        let snap = generate_snapshot(&cfg, &mut RandomStream::new(1)).unwrap();
        let csv = snap.to_csv();
        assert_eq!(csv.lines().count(), 1 + 6);
        assert!(csv.starts_with("m,k,distance_m,beta\n"));
    }

    proptest! {
        #[test]
        fn pathloss_non_increasing(d1 in 0.0f64..5000.0, extra in 0.0f64..5000.0) {
            prop_assert!(pathloss_db(d1 + extra) <= pathloss_db(d1));
        }

        #[test]
        fn translation_invariance(
            pts in prop::collection::vec((0.0f64..500.0, 0.0f64..500.0), 5),
            ox in 0.0f64..500.0, oy in 0.0f64..500.0,
        ) {
            let side = 500.0;
            let pts: Vec<Point> = pts.into_iter().map(|(x, y)| Point::new(x, y)).collect();
            let (aps, ues) = pts.split_at(3);
            let shift = |p: &Point| Point::new((p.x + ox).rem_euclid(side), (p.y + oy).rem_euclid(side));
            let shadow = DMatrix::from_fn(3, 2, |i, j| (i as f64 - j as f64) * 0.3);
            let a = Snapshot::from_positions(side, 4.0, aps.to_vec(), ues.to_vec(), &shadow);
            let b = Snapshot::from_positions(
                side, 4.0,
                aps.iter().map(shift).collect(),
                ues.iter().map(shift).collect(),
                &shadow,
            );
            for (x, y) in a.beta.iter().zip(b.beta.iter()) {
                prop_assert!((x - y).abs() <= 1e-9 * x.abs());
            }
        }
    }
}
