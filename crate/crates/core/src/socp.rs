//! Second-order cone programming.
//!
//! Solves
//!
//! ```text
//! minimize c^T x   subject to   G x + s = h,   s in K
//! ```
//!
//! with `K` a product of a non-negative orthant and second-order cones
//! `{(s0, s1) : |s1| <= s0}`, using a primal-dual path-following method with
//! Nesterov-Todd scaling and Mehrotra predictor-corrector steps. No
//! homogeneous embedding is used: callers must pose problems that have a
//! strictly feasible point and a bounded optimum.
//!
//! The Newton system is reduced to the `n x n` normal equations
//! `G^T W^-2 G dx = r`. For every cone block the product `W^-1 G_b` is a
//! rank-one update of `G_b`, so the block contribution is assembled from a
//! precomputed Gram matrix plus low-rank terms in `O(n^2)`.

use nalgebra::{DMatrix, DVector};

/// Row-sparse matrix.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRows {
    pub ncols: usize,
    pub rows: Vec<Vec<(usize, f64)>>,
}

impl SparseRows {
    pub fn new(ncols: usize) -> Self {
        Self {
            ncols,
            rows: Vec::new(),
        }
    }

    /// Appends a row, dropping explicit zeros.
    pub fn push(&mut self, mut row: Vec<(usize, f64)>) {
        row.retain(|&(j, v)| {
            debug_assert!(j < self.ncols);
            v != 0.0
        });
        self.rows.push(row);
    }

    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].iter().map(|&(j, v)| v * x[j]).sum()
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows()).map(|i| self.row_dot(i, x)).collect()
    }

    /// `G^T y`.
    pub fn mul_t(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.ncols];
        for (row, &yi) in self.rows.iter().zip(y) {
            if yi != 0.0 {
                for &(j, v) in row {
                    out[j] += v * yi;
                }
            }
        }
        out
    }

    fn gram_of(&self, range: std::ops::Range<usize>, out: &mut DMatrix<f64>) {
        for row in &self.rows[range] {
            for &(i, vi) in row {
                for &(j, vj) in row {
                    out[(i, j)] += vi * vj;
                }
            }
        }
    }
}

/// Cone layout of the slack vector: `nonneg` orthant entries first, then one
/// second-order cone per entry of `soc` (its dimension, head included).
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConeDims {
    pub nonneg: usize,
    pub soc: Vec<usize>,
}

impl ConeDims {
    pub fn total(&self) -> usize {
        self.nonneg + self.soc.iter().sum::<usize>()
    }

    /// Barrier degree: one per orthant entry and one per cone.
    pub fn degree(&self) -> usize {
        self.nonneg + self.soc.len()
    }

    fn soc_ranges(&self) -> Vec<std::ops::Range<usize>> {
        let mut start = self.nonneg;
        self.soc
            .iter()
            .map(|&d| {
                let r = start..start + d;
                start += d;
                r
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeProgram {
    pub c: Vec<f64>,
    pub g: SparseRows,
    pub h: Vec<f64>,
    pub dims: ConeDims,
}

impl ConeProgram {
    pub fn check(&self) -> Result<(), String> {
        if self.g.ncols != self.c.len() {
            return Err(format!("G has {} columns, c has {} entries", self.g.ncols, self.c.len()));
        }
        if self.g.nrows() != self.h.len() || self.h.len() != self.dims.total() {
            return Err(format!(
                "G has {} rows, h has {}, cones cover {}",
                self.g.nrows(),
                self.h.len(),
                self.dims.total()
            ));
        }
        if self.dims.soc.contains(&0) {
            return Err("empty second-order cone".into());
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iters: usize,
    /// Relative primal / dual residual tolerance.
    pub feastol: f64,
    /// Absolute duality-gap tolerance.
    pub abstol: f64,
    /// Relative duality-gap tolerance.
    pub reltol: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iters: 100,
            feastol: 1e-9,
            abstol: 1e-9,
            reltol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Optimal,
    MaxIterations,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeSolution {
    pub status: SolveStatus,
    pub x: Vec<f64>,
    pub s: Vec<f64>,
    pub z: Vec<f64>,
    pub iterations: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
}

/// Anything that can solve a [`ConeProgram`].
pub trait ConicSolver {
    fn solve(&self, program: &ConeProgram) -> ConeSolution;
}

/// Built-in primal-dual interior-point solver.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint {
    pub settings: SolverSettings,
}

impl InteriorPoint {
    pub fn new(settings: SolverSettings) -> Self {
        Self { settings }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `x0^2 - |x1|^2`, factored to limit cancellation near the boundary.
fn soc_residual(x: &[f64]) -> f64 {
    let tail = norm(&x[1..]);
    (x[0] - tail) * (x[0] + tail)
}

#[derive(Debug, Clone)]
struct SocScaling {
    eta: f64,
    a: f64,
    q: Vec<f64>,
}

impl SocScaling {
    fn new(s: &[f64], z: &[f64]) -> Option<Self> {
        let (sr, zr) = (soc_residual(s), soc_residual(z));
        if !(sr > 0.0 && zr > 0.0 && s[0] > 0.0 && z[0] > 0.0) {
            return None;
        }
        let (sn, zn) = (sr.sqrt(), zr.sqrt());
        let sbar: Vec<f64> = s.iter().map(|v| v / sn).collect();
        let zbar: Vec<f64> = z.iter().map(|v| v / zn).collect();
        let gamma = ((1.0 + dot(&sbar, &zbar)) / 2.0).sqrt();
        let a = (sbar[0] + zbar[0]) / (2.0 * gamma);
        let q = sbar[1..]
            .iter()
            .zip(&zbar[1..])
            .map(|(x, y)| (x - y) / (2.0 * gamma))
            .collect();
        Some(Self {
            eta: (sr / zr).sqrt().sqrt(),
            a,
            q,
        })
    }

    /// `out = W v` (or `W^-1 v` when `inverse`).
    fn apply(&self, v: &[f64], out: &mut [f64], inverse: bool) {
        let sign = if inverse { -1.0 } else { 1.0 };
        let scale = if inverse { 1.0 / self.eta } else { self.eta };
        let qv = dot(&self.q, &v[1..]);
        out[0] = scale * (self.a * v[0] + sign * qv);
        let coef = sign * v[0] + qv / (1.0 + self.a);
        for (o, (vi, qi)) in out[1..].iter_mut().zip(v[1..].iter().zip(&self.q)) {
            *o = scale * (vi + coef * qi);
        }
    }
}

#[derive(Debug, Clone)]
struct Scaling {
    /// Orthant part: `W = diag(d)`, `d = sqrt(s / z)`.
    d: Vec<f64>,
    soc: Vec<SocScaling>,
}

struct Workspace<'a> {
    prog: &'a ConeProgram,
    ranges: Vec<std::ops::Range<usize>>,
    /// Dense head row of each cone block.
    heads: Vec<Vec<f64>>,
    /// Gram matrix of the tail rows of each cone block.
    grams: Vec<DMatrix<f64>>,
}

impl<'a> Workspace<'a> {
    fn new(prog: &'a ConeProgram) -> Self {
        let n = prog.c.len();
        let ranges = prog.dims.soc_ranges();
        let heads = ranges
            .iter()
            .map(|r| {
                let mut head = vec![0.0; n];
                for &(j, v) in &prog.g.rows[r.start] {
                    head[j] += v;
                }
                head
            })
            .collect();
        let grams = ranges
            .iter()
            .map(|r| {
                let mut gram = DMatrix::zeros(n, n);
                prog.g.gram_of(r.start + 1..r.end, &mut gram);
                gram
            })
            .collect();
        Self {
            prog,
            ranges,
            heads,
            grams,
        }
    }

    fn scaling(&self, s: &[f64], z: &[f64]) -> Option<Scaling> {
        let l = self.prog.dims.nonneg;
        let mut d = Vec::with_capacity(l);
        for i in 0..l {
            if !(s[i] > 0.0 && z[i] > 0.0) {
                return None;
            }
            d.push((s[i] / z[i]).sqrt());
        }
        let soc = self
            .ranges
            .iter()
            .map(|r| SocScaling::new(&s[r.clone()], &z[r.clone()]))
            .collect::<Option<Vec<_>>>()?;
        Some(Scaling { d, soc })
    }

    fn apply_w(&self, w: &Scaling, v: &[f64], inverse: bool) -> Vec<f64> {
        let mut out = vec![0.0; v.len()];
        for (i, di) in w.d.iter().enumerate() {
            out[i] = if inverse { v[i] / di } else { v[i] * di };
        }
        for (r, sc) in self.ranges.iter().zip(&w.soc) {
            sc.apply(&v[r.clone()], &mut out[r.clone()], inverse);
        }
        out
    }

    /// `G^T W^-2 G`.
    fn normal_matrix(&self, w: &Scaling) -> DMatrix<f64> {
        let n = self.prog.c.len();
        let g = &self.prog.g;
        let mut hm = DMatrix::zeros(n, n);
        for (i, di) in w.d.iter().enumerate() {
            let inv2 = 1.0 / (di * di);
            for &(p, vp) in &g.rows[i] {
                for &(q, vq) in &g.rows[i] {
                    hm[(p, q)] += inv2 * vp * vq;
                }
            }
        }
        for (b, (r, sc)) in self.ranges.iter().zip(&w.soc).enumerate() {
            // r_vec = G1^T q
            let mut rv = vec![0.0; n];
            for (row, &qi) in g.rows[r.start + 1..r.end].iter().zip(&sc.q) {
                for &(j, v) in row {
                    rv[j] += v * qi;
                }
            }
            let head = &self.heads[b];
            let f: Vec<f64> = rv.iter().zip(head).map(|(ri, hi)| ri / (1.0 + sc.a) - hi).collect();
            let v0: Vec<f64> = head.iter().zip(&rv).map(|(hi, ri)| (sc.a * hi - ri) / sc.eta).collect();
            let inv2 = 1.0 / (sc.eta * sc.eta);
            let qq = dot(&sc.q, &sc.q);
            let gram = &self.grams[b];
            for p in 0..n {
                for q in 0..n {
                    hm[(p, q)] += inv2 * (gram[(p, q)] + rv[p] * f[q] + f[p] * rv[q] + qq * f[p] * f[q])
                        + v0[p] * v0[q];
                }
            }
        }
        hm
    }
}

/// Cholesky factor with a growing diagonal shift if the matrix is not
/// numerically positive definite.
struct Factor {
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    matrix: DMatrix<f64>,
}

impl Factor {
    fn new(matrix: DMatrix<f64>) -> Option<Self> {
        let n = matrix.nrows();
        let scale = (0..n).map(|i| matrix[(i, i)].abs()).fold(0.0, f64::max).max(1e-300);
        let mut shift = 0.0;
        for _ in 0..12 {
            let mut m = matrix.clone();
            for i in 0..n {
                m[(i, i)] += shift;
            }
            if let Some(chol) = m.clone().cholesky() {
                return Some(Self { chol, matrix: m });
            }
            shift = if shift == 0.0 { 1e-14 * scale } else { shift * 100.0 };
        }
        None
    }

    /// Solve with one step of iterative refinement.
    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let b = DVector::from_column_slice(rhs);
        let mut x = self.chol.solve(&b);
        let resid = &b - &self.matrix * &x;
        x += self.chol.solve(&resid);
        x.as_slice().to_vec()
    }
}

/// Orthant and cone helpers on the full stacked vector.
fn jordan_product(dims: &ConeDims, ranges: &[std::ops::Range<usize>], x: &[f64], y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    for i in 0..dims.nonneg {
        out[i] = x[i] * y[i];
    }
    for r in ranges {
        let (xb, yb) = (&x[r.clone()], &y[r.clone()]);
        out[r.start] = dot(xb, yb);
        for i in 1..xb.len() {
            out[r.start + i] = xb[0] * yb[i] + yb[0] * xb[i];
        }
    }
    out
}

/// Solves `lambda o q = v` for `q`.
fn jordan_divide(dims: &ConeDims, ranges: &[std::ops::Range<usize>], lambda: &[f64], v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; v.len()];
    for i in 0..dims.nonneg {
        out[i] = v[i] / lambda[i];
    }
    for r in ranges {
        let (lb, vb) = (&lambda[r.clone()], &v[r.clone()]);
        let det = soc_residual(lb);
        let q0 = (lb[0] * vb[0] - dot(&lb[1..], &vb[1..])) / det;
        out[r.start] = q0;
        for i in 1..lb.len() {
            out[r.start + i] = (vb[i] - q0 * lb[i]) / lb[0];
        }
    }
    out
}

fn add_identity(dims: &ConeDims, ranges: &[std::ops::Range<usize>], v: &mut [f64], t: f64) {
    for x in &mut v[..dims.nonneg] {
        *x += t;
    }
    for r in ranges {
        v[r.start] += t;
    }
}

/// Smallest `t` with `v + t e` on the cone boundary (negative when `v` is
/// interior).
fn max_violation(dims: &ConeDims, ranges: &[std::ops::Range<usize>], v: &[f64]) -> f64 {
    let mut worst = f64::NEG_INFINITY;
    for &x in &v[..dims.nonneg] {
        worst = worst.max(-x);
    }
    for r in ranges {
        let b = &v[r.clone()];
        worst = worst.max(norm(&b[1..]) - b[0]);
    }
    worst
}

/// Largest step `t >= 0` keeping `lambda + t d` in the cone; `lambda` must be
/// interior.
fn max_step(dims: &ConeDims, ranges: &[std::ops::Range<usize>], lambda: &[f64], d: &[f64]) -> f64 {
    let mut step = f64::INFINITY;
    for i in 0..dims.nonneg {
        if d[i] < 0.0 {
            step = step.min(-lambda[i] / d[i]);
        }
    }
    for r in ranges {
        let (lk, dk) = (&lambda[r.clone()], &d[r.clone()]);
        let lnorm = soc_residual(lk).sqrt();
        let lbar0 = lk[0] / lnorm;
        let lbar_d = (lk[0] * dk[0] - dot(&lk[1..], &dk[1..])) / lnorm;
        let factor = (lbar_d + dk[0]) / (lbar0 + 1.0);
        let rho0 = lbar_d / lnorm;
        let tail: f64 = lk[1..]
            .iter()
            .zip(&dk[1..])
            .map(|(l, dv)| {
                let v = (dv - factor * l / lnorm) / lnorm;
                v * v
            })
            .sum::<f64>()
            .sqrt();
        let sigma = tail - rho0;
        if sigma > 0.0 {
            step = step.min(1.0 / sigma);
        }
    }
    step
}

impl ConicSolver for InteriorPoint {
    fn solve(&self, prog: &ConeProgram) -> ConeSolution {
        let st = self.settings;
        let n = prog.c.len();
        let m = prog.h.len();
        let dims = &prog.dims;
        let ws = Workspace::new(prog);
        let ranges = ws.ranges.clone();
        let degree = dims.degree().max(1) as f64;
        let g = &prog.g;

        let failure = |x: Vec<f64>, s: Vec<f64>, z: Vec<f64>, iterations, status| {
            let primal_objective = dot(&prog.c, &x);
            let dual_objective = -dot(&prog.h, &z);
            ConeSolution {
                status,
                x,
                s,
                z,
                iterations,
                primal_objective,
                dual_objective,
            }
        };

        // Least-squares start: x minimising |G x - h|, z of least norm with
        // G^T z = -c, both slacks shifted into the cone interior.
        let mut gram = DMatrix::zeros(n, n);
        g.gram_of(0..m, &mut gram);
        let Some(f0) = Factor::new(gram) else {
            return failure(vec![0.0; n], vec![0.0; m], vec![0.0; m], 0, SolveStatus::NumericalFailure);
        };
        let gth = g.mul_t(&prog.h);
        let rhs: Vec<f64> = gth.iter().zip(&prog.c).map(|(a, b)| a - b).collect();
        let mut x = f0.solve(&rhs);
        let gx = g.mul(&x);
        let mut s: Vec<f64> = prog.h.iter().zip(&gx).map(|(h, v)| h - v).collect();
        let y = f0.solve(&prog.c);
        let mut z: Vec<f64> = g.mul(&y).into_iter().map(|v| -v).collect();
        for v in [&mut s, &mut z] {
            let t = max_violation(dims, &ranges, v);
            if t >= -1e-8 * norm(v).max(1.0) {
                add_identity(dims, &ranges, v, 1.0 + t);
            }
        }

        let hnorm = norm(&prog.h).max(1.0);
        let cnorm = norm(&prog.c).max(1.0);
        for iter in 0..st.max_iters {
            let gtz = g.mul_t(&z);
            let rx: Vec<f64> = gtz.iter().zip(&prog.c).map(|(a, b)| a + b).collect();
            let gx = g.mul(&x);
            let rz: Vec<f64> = (0..m).map(|i| gx[i] + s[i] - prog.h[i]).collect();
            let gap = dot(&s, &z);
            let mu = gap / degree;
            let pcost = dot(&prog.c, &x);
            let dcost = -dot(&prog.h, &z);
            let pres = norm(&rz) / hnorm;
            let dres = norm(&rx) / cnorm;
            let relgap = if pcost < 0.0 {
                gap / -pcost
            } else if dcost > 0.0 {
                gap / dcost
            } else {
                f64::INFINITY
            };
            if !(gap.is_finite() && pres.is_finite() && dres.is_finite()) {
                return failure(x, s, z, iter, SolveStatus::NumericalFailure);
            }
            if pres <= st.feastol && dres <= st.feastol && (gap <= st.abstol || relgap <= st.reltol) {
                return ConeSolution {
                    status: SolveStatus::Optimal,
                    x,
                    s,
                    z,
                    iterations: iter,
                    primal_objective: pcost,
                    dual_objective: dcost,
                };
            }

            let Some(w) = ws.scaling(&s, &z) else {
                return failure(x, s, z, iter, SolveStatus::NumericalFailure);
            };
            let lambda = ws.apply_w(&w, &z, false);
            let Some(factor) = Factor::new(ws.normal_matrix(&w)) else {
                return failure(x, s, z, iter, SolveStatus::NumericalFailure);
            };
            let bx: Vec<f64> = rx.iter().map(|v| -v).collect();
            let bz: Vec<f64> = rz.iter().map(|v| -v).collect();
            let w_inv_bz = ws.apply_w(&w, &bz, true);

            // Returns (dx, scaled ds, scaled dz) for the complementarity target `ds`.
            let newton = |target: &[f64]| {
                let qv = jordan_divide(dims, &ranges, &lambda, target);
                let diff: Vec<f64> = w_inv_bz.iter().zip(&qv).map(|(a, b)| a - b).collect();
                let corr = g.mul_t(&ws.apply_w(&w, &diff, true));
                let rhs: Vec<f64> = bx.iter().zip(&corr).map(|(a, b)| a + b).collect();
                let dx = factor.solve(&rhs);
                let gdx = g.mul(&dx);
                let resid: Vec<f64> = gdx.iter().zip(&bz).map(|(a, b)| a - b).collect();
                let mut dz = ws.apply_w(&w, &resid, true);
                for (d, qi) in dz.iter_mut().zip(&qv) {
                    *d += qi;
                }
                let ds: Vec<f64> = qv.iter().zip(&dz).map(|(a, b)| a - b).collect();
                (dx, ds, dz)
            };

            let lsq = jordan_product(dims, &ranges, &lambda, &lambda);
            let affine: Vec<f64> = lsq.iter().map(|v| -v).collect();
            let (_, ds_a, dz_a) = newton(&affine);
            let step_a = max_step(dims, &ranges, &lambda, &ds_a)
                .min(max_step(dims, &ranges, &lambda, &dz_a))
                .min(1.0);
            let sigma = (1.0 - step_a).powi(3);

            let cross = jordan_product(dims, &ranges, &ds_a, &dz_a);
            let mut target: Vec<f64> = lsq.iter().zip(&cross).map(|(a, b)| -a - b).collect();
            add_identity(dims, &ranges, &mut target, sigma * mu);
            let (dx, ds, dz) = newton(&target);
            let step = (0.99
                * max_step(dims, &ranges, &lambda, &ds).min(max_step(dims, &ranges, &lambda, &dz)))
            .min(1.0);
            if !(step > 0.0) {
                return failure(x, s, z, iter, SolveStatus::NumericalFailure);
            }
            let ds_full = ws.apply_w(&w, &ds, false);
            let dz_full = ws.apply_w(&w, &dz, true);
            for (xi, d) in x.iter_mut().zip(&dx) {
                *xi += step * d;
            }
            for (si, d) in s.iter_mut().zip(&ds_full) {
                *si += step * d;
            }
            for (zi, d) in z.iter_mut().zip(&dz_full) {
                *zi += step * d;
            }
        }
        failure(x, s, z, st.max_iters, SolveStatus::MaxIterations)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn soc_contains(x: &[f64], tol: f64) -> bool {
        norm(&x[1..]) <= x[0] + tol
    }

    #[test]
    fn scaling_maps_z_and_s_to_same_point() {
        let s = [3.0, 1.0, -0.5, 0.7];
        let z = [2.0, -0.3, 0.9, 0.1];
        let sc = SocScaling::new(&s, &z).unwrap();
        let mut wz = [0.0; 4];
        let mut winv_s = [0.0; 4];
        sc.apply(&z, &mut wz, false);
        sc.apply(&s, &mut winv_s, true);
        for (a, b) in wz.iter().zip(&winv_s) {
            assert!((a - b).abs() < 1e-12, "{wz:?} vs {winv_s:?}");
        }
        let mut back = [0.0; 4];
        sc.apply(&wz, &mut back, true);
        for (a, b) in back.iter().zip(&z) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn max_step_matches_bisection() {
        let dims = ConeDims { nonneg: 0, soc: vec![3] };
        let ranges = dims.soc_ranges();
        let lam = [2.0, 0.5, -0.3];
        for d in [[-1.0, 0.8, 0.2], [0.1, -2.0, 1.0], [1.0, 0.1, 0.0], [-0.5, -0.5, -0.5]] {
            let t = max_step(&dims, &ranges, &lam, &d);
            let inside = |a: f64| {
                let p: Vec<f64> = lam.iter().zip(&d).map(|(l, x)| l + a * x).collect();
                soc_contains(&p, 0.0)
            };
            if t.is_finite() {
                assert!(inside(t * (1.0 - 1e-9)));
                assert!(!inside(t * (1.0 + 1e-6)));
            } else {
                assert!(inside(1e6));
            }
        }
    }

    #[test]
    fn jordan_divide_inverts_product() {
        let dims = ConeDims { nonneg: 2, soc: vec![3] };
        let ranges = dims.soc_ranges();
        let lam = [1.5, 0.7, 2.0, 0.3, -0.4];
        let v = [0.2, -1.0, 0.5, 1.0, -2.0];
        let q = jordan_divide(&dims, &ranges, &lam, &v);
        let back = jordan_product(&dims, &ranges, &lam, &q);
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn small_lp() {
        // max x + y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  -> (1.6, 1.2)
        let mut g = SparseRows::new(2);
        g.push(vec![(0, -1.0)]);
        g.push(vec![(1, -1.0)]);
        g.push(vec![(0, 1.0), (1, 2.0)]);
        g.push(vec![(0, 3.0), (1, 1.0)]);
        let prog = ConeProgram {
            c: vec![-1.0, -1.0],
            g,
            h: vec![0.0, 0.0, 4.0, 6.0],
            dims: ConeDims { nonneg: 4, soc: vec![] },
        };
        prog.check().unwrap();
        let sol = InteriorPoint::default().solve(&prog);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[0] - 1.6).abs() < 1e-7 && (sol.x[1] - 1.2).abs() < 1e-7, "{:?}", sol.x);
    }

    #[test]
    fn projection_onto_ball() {
        // minimise c^T x over |x| <= 1: x* = -c / |c|.
        let c = vec![3.0, -4.0, 12.0];
        let mut g = SparseRows::new(3);
        g.push(vec![]);
        for j in 0..3 {
            g.push(vec![(j, -1.0)]);
        }
        let prog = ConeProgram {
            c: c.clone(),
            g,
            h: vec![1.0, 0.0, 0.0, 0.0],
            dims: ConeDims { nonneg: 0, soc: vec![4] },
        };
        let sol = InteriorPoint::default().solve(&prog);
        assert_eq!(sol.status, SolveStatus::Optimal);
        let cn = norm(&c);
        for (xi, ci) in sol.x.iter().zip(&c) {
            assert!((xi + ci / cn).abs() < 1e-7);
        }
        assert!((sol.primal_objective + cn).abs() < 1e-7);
    }

    #[test]
    fn mixed_cones() {
        // maximise t s.t. |(x - 1, y - 2)| <= 1 - t ... written as
        // (1 - t, x - 1, y - 2) in SOC, x + y <= 2, x, y >= 0.
        // Optimum: point of the halfplane closest to (1, 2): (0.5, 1.5),
        // distance sqrt(0.5), so t* = 1 - sqrt(0.5).
        let mut g = SparseRows::new(3);
        g.push(vec![(0, -1.0)]);
        g.push(vec![(1, -1.0)]);
        g.push(vec![(0, 1.0), (1, 1.0)]);
        g.push(vec![(2, 1.0)]);
        g.push(vec![(0, -1.0)]);
        g.push(vec![(1, -1.0)]);
        let prog = ConeProgram {
            c: vec![0.0, 0.0, -1.0],
            g,
            h: vec![0.0, 0.0, 2.0, 1.0, -1.0, -2.0],
            dims: ConeDims { nonneg: 3, soc: vec![3] },
        };
        let sol = InteriorPoint::default().solve(&prog);
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.x[2] - (1.0 - 0.5f64.sqrt())).abs() < 1e-7, "{:?}", sol.x);
        // The optimiser is only determined to about sqrt(gap).
        assert!((sol.x[0] - 0.5).abs() < 1e-4 && (sol.x[1] - 1.5).abs() < 1e-4, "{sol:?}");
    }

    #[test]
    fn shape_mismatch_reported() {
        let prog = ConeProgram {
            c: vec![1.0],
            g: SparseRows::new(1),
            h: vec![1.0],
            dims: ConeDims { nonneg: 1, soc: vec![] },
        };
        assert!(prog.check().is_err());
    }
}
