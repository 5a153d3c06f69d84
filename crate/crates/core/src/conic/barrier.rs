//! Dense primal log-barrier method. Slow and simple on purpose: it shares no
//! code with the primary backend, so agreement between the two is evidence that
//! the canonical form, not a backend quirk, determines the optimum.
//!
//! Equalities are removed by a nullspace parametrization `x = x0 + N z`; a
//! phase-I problem `min sigma s.t. s(z) + sigma e in int K` finds a strictly
//! feasible start; phase II follows the central path with damped Newton steps.
//! Both phases run inside the ball `||z|| <= RADIUS` so that centering always
//! has a minimizer; an optimum on the ball's boundary means unbounded.

use std::ops::Range;

use nalgebra::{DMatrix, DVector};

use super::canonical::CanonicalProgram;
use super::program::{smat, svec_len, ConeKind};
use super::{ConicSolver, RawSolution, SolveStatus, SolverSettings};

const RADIUS: f64 = 1e6;

#[derive(Debug, Clone)]
pub struct BarrierSolver {
    /// Central-path step factor.
    pub mu: f64,
    pub max_newton: usize,
}

impl Default for BarrierSolver {
    fn default() -> Self {
        Self { mu: 8.0, max_newton: 4000 }
    }
}

struct Block {
    kind: ConeKind,
    rows: Range<usize>,
}

/// `minimize cost^T z  s.t.  s0 - B z in int K`.
struct Reduced {
    s0: DVector<f64>,
    b: DMatrix<f64>,
    cost: DVector<f64>,
    blocks: Vec<Block>,
    nu: f64,
}

fn svec_of(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows();
    let mut out = DVector::zeros(svec_len(n));
    let mut k = 0;
    for col in 0..n {
        for row in 0..=col {
            out[k] = if row == col { m[(row, col)] } else { m[(row, col)] * std::f64::consts::SQRT_2 };
            k += 1;
        }
    }
    out
}

fn barrier_value(kind: ConeKind, s: &[f64]) -> Option<f64> {
    match kind {
        ConeKind::Zero => Some(0.0),
        ConeKind::NonNeg => s.iter().try_fold(0.0, |acc, &v| (v > 0.0).then(|| acc - v.ln())),
        ConeKind::Soc => {
            let d = s[0] * s[0] - s[1..].iter().map(|v| v * v).sum::<f64>();
            (s[0] > 0.0 && d > 0.0).then(|| -d.ln())
        }
        ConeKind::Exp => {
            let (x, y, z) = (s[0], s[1], s[2]);
            if !(y > 0.0 && z > 0.0) {
                return None;
            }
            let psi = y * (z / y).ln() - x;
            (psi > 0.0).then(|| -psi.ln() - y.ln() - z.ln())
        }
        ConeKind::Psd { n } => {
            let chol = smat(s, n).cholesky()?;
            let l = chol.l();
            Some(-2.0 * (0..n).map(|i| l[(i, i)].ln()).sum::<f64>())
        }
    }
}

/// Gradient and Hessian of the barrier of one block at an interior point.
fn barrier_derivs(kind: ConeKind, s: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
    let d = s.len();
    match kind {
        ConeKind::Zero => (DVector::zeros(d), DMatrix::zeros(d, d)),
        ConeKind::NonNeg => (
            DVector::from_fn(d, |i, _| -1.0 / s[i]),
            DMatrix::from_diagonal(&DVector::from_fn(d, |i, _| 1.0 / (s[i] * s[i]))),
        ),
        ConeKind::Soc => {
            let gap = s[0] * s[0] - s[1..].iter().map(|v| v * v).sum::<f64>();
            let jw = DVector::from_fn(d, |i, _| if i == 0 { s[0] } else { -s[i] });
            let grad = &jw * (-2.0 / gap);
            let mut hess = &jw * jw.transpose() * (4.0 / (gap * gap));
            hess[(0, 0)] -= 2.0 / gap;
            for i in 1..d {
                hess[(i, i)] += 2.0 / gap;
            }
            (grad, hess)
        }
        ConeKind::Exp => {
            let (x, y, z) = (s[0], s[1], s[2]);
            let l = (z / y).ln();
            let psi = y * l - x;
            let dpsi = DVector::from_vec(vec![-1.0, l - 1.0, y / z]);
            let grad = &dpsi * (-1.0 / psi) - DVector::from_vec(vec![0.0, 1.0 / y, 1.0 / z]);
            let mut d2psi = DMatrix::zeros(3, 3);
            d2psi[(1, 1)] = -1.0 / y;
            d2psi[(1, 2)] = 1.0 / z;
            d2psi[(2, 1)] = 1.0 / z;
            d2psi[(2, 2)] = -y / (z * z);
            let mut hess = &dpsi * dpsi.transpose() / (psi * psi) - d2psi / psi;
            hess[(1, 1)] += 1.0 / (y * y);
            hess[(2, 2)] += 1.0 / (z * z);
            (grad, hess)
        }
        ConeKind::Psd { n } => {
            let x = smat(s, n);
            let xinv = x.cholesky().map(|c| c.inverse()).unwrap_or_else(|| DMatrix::zeros(n, n));
            let grad = -svec_of(&xinv);
            let m = svec_len(n);
            let mut hess = DMatrix::zeros(m, m);
            let mut e = vec![0.0; m];
            for j in 0..m {
                e[j] = 1.0;
                let col = svec_of(&(&xinv * smat(&e, n) * &xinv));
                hess.set_column(j, &col);
                e[j] = 0.0;
            }
            (grad, hess)
        }
    }
}

/// Interior direction `e` of each cone.
fn cone_identity(kind: ConeKind, d: usize) -> Vec<f64> {
    match kind {
        ConeKind::Zero => vec![0.0; d],
        ConeKind::NonNeg => vec![1.0; d],
        ConeKind::Soc => (0..d).map(|i| if i == 0 { 1.0 } else { 0.0 }).collect(),
        ConeKind::Exp => vec![-1.0, 1.0, 1.0],
        ConeKind::Psd { n } => svec_of(&DMatrix::identity(n, n)).iter().copied().collect(),
    }
}

enum Outcome {
    Converged,
    Stopped,
    Unbounded,
    Stalled(f64),
}

impl Reduced {
    /// Appends the rows `(RADIUS, z) in SOC`.
    fn with_ball(mut self) -> Self {
        let (m, p) = self.b.shape();
        let mut b = DMatrix::zeros(m + p + 1, p);
        b.view_mut((0, 0), (m, p)).copy_from(&self.b);
        for i in 0..p {
            b[(m + 1 + i, i)] = -1.0;
        }
        let mut s0 = DVector::zeros(m + p + 1);
        s0.rows_mut(0, m).copy_from(&self.s0);
        s0[m] = RADIUS;
        self.b = b;
        self.s0 = s0;
        self.blocks.push(Block { kind: ConeKind::Soc, rows: m..m + p + 1 });
        self.nu += 2.0;
        self
    }

    fn slack(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.s0 - &self.b * z
    }

    fn phi(&self, s: &DVector<f64>) -> Option<f64> {
        self.blocks
            .iter()
            .try_fold(0.0, |acc, blk| barrier_value(blk.kind, &s.as_slice()[blk.rows.clone()]).map(|v| acc + v))
    }

    fn newton_system(&self, s: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
        let p = self.b.ncols();
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for blk in &self.blocks {
            if blk.kind == ConeKind::Zero {
                continue;
            }
            let (g, h) = barrier_derivs(blk.kind, &s.as_slice()[blk.rows.clone()]);
            let bb = self.b.rows(blk.rows.start, blk.rows.len());
            // d/dz phi(s0 - B z) = -B^T grad, Hessian B^T H B
            grad -= bb.transpose() * g;
            hess += bb.transpose() * (h * bb);
        }
        (grad, hess)
    }

    /// Follows the central path from a strictly feasible `z`. `stop` ends the
    /// run early once the objective value satisfies it.
    fn run(
        &self,
        z: &mut DVector<f64>,
        gap_tol: f64,
        mu: f64,
        max_newton: usize,
        stop: impl Fn(f64) -> bool,
        iters: &mut usize,
    ) -> Outcome {
        let mut t = 1.0 / (1.0 + self.cost.amax());
        loop {
            let mut centered = false;
            let mut inner = 0;
            let mut prev_dec = f64::INFINITY;
            while inner < 200 {
                inner += 1;
                *iters += 1;
                if *iters > max_newton {
                    return Outcome::Stalled(self.nu / t);
                }
                let s = self.slack(z);
                let obj = self.cost.dot(z);
                if stop(obj) {
                    return Outcome::Stopped;
                }
                let (gb, h) = self.newton_system(&s);
                let g = &self.cost * t + gb;
                let dz = match solve_spd(&h, &g) {
                    Some(d) => -d,
                    None => return Outcome::Stalled(self.nu / t),
                };
                let dec = -g.dot(&dz);
                // Below this the decrement is rounding noise; it stops shrinking.
                if dec <= 1e-10 || (dec <= 1e-4 && dec >= 0.5 * prev_dec) {
                    centered = true;
                    break;
                }
                prev_dec = dec;
                // Damped step of a self-concordant barrier: stays inside the
                // Dikin ellipsoid, so halving only guards against rounding.
                let lambda = dec.max(0.0).sqrt();
                let mut alpha = if lambda > 0.25 { 1.0 / (1.0 + lambda) } else { 1.0 };
                let mut accepted = false;
                for _ in 0..60 {
                    let zn = &*z + &dz * alpha;
                    if self.phi(&self.slack(&zn)).is_some() {
                        *z = zn;
                        accepted = true;
                        break;
                    }
                    alpha *= 0.5;
                }
                if !accepted {
                    centered = true;
                    break;
                }
            }
            if !centered {
                return Outcome::Stalled(self.nu / t);
            }
            let obj = self.cost.dot(z);
            if self.nu / t <= gap_tol * (1.0 + obj.abs()) {
                if z.norm() > 0.5 * RADIUS {
                    return Outcome::Unbounded;
                }
                return Outcome::Converged;
            }
            t *= mu;
        }
    }
}

/// Solves `H x = g` for symmetric PSD `H` after Jacobi equilibration,
/// adding a growing ridge if the factorization fails.
fn solve_spd(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = h.nrows();
    if n == 0 {
        return Some(DVector::zeros(0));
    }
    let dmax = h.diagonal().amax().max(1e-300);
    let d = DVector::from_fn(n, |i, _| 1.0 / h[(i, i)].max(1e-300 * dmax).sqrt());
    let scaled = DMatrix::from_fn(n, n, |i, j| d[i] * h[(i, j)] * d[j]);
    let rhs = g.component_mul(&d);
    let mut ridge = 0.0;
    for _ in 0..12 {
        let mut m = scaled.clone();
        for i in 0..n {
            m[(i, i)] += ridge;
        }
        if let Some(c) = m.cholesky() {
            return Some(c.solve(&rhs).component_mul(&d));
        }
        ridge = if ridge == 0.0 { 1e-14 } else { ridge * 100.0 };
    }
    None
}

impl BarrierSolver {
    fn solve_inner(
        &self,
        prog: &CanonicalProgram,
        settings: &SolverSettings,
    ) -> Result<(Vec<f64>, usize), (SolveStatus, String, usize)> {
        let n = prog.n;
        let a = prog.a_dense();
        let ranges = prog.cone_ranges();
        let mut eq_rows = Vec::new();
        let mut blocks = Vec::new();
        let mut k_rows = Vec::new();
        for (cone, r) in prog.cones.iter().zip(&ranges) {
            if cone.kind == ConeKind::Zero {
                eq_rows.extend(r.clone());
            } else {
                let start = k_rows.len();
                k_rows.extend(r.clone());
                blocks.push(Block { kind: cone.kind, rows: start..k_rows.len() });
            }
        }
        let c = DVector::from_column_slice(&prog.c);
        let b = DVector::from_column_slice(&prog.b);

        // x = x0 + N z
        let (x0, null) = if eq_rows.is_empty() {
            (DVector::zeros(n), DMatrix::identity(n, n))
        } else {
            let e = a.select_rows(&eq_rows);
            let f = b.select_rows(&eq_rows);
            let svd = e.clone().svd(true, true);
            let smax = svd.singular_values.amax().max(1e-300);
            let x0 = svd.solve(&f, 1e-12 * smax).map_err(|m| (SolveStatus::NumericalLimit, m.to_string(), 0))?;
            let resid = (&e * &x0 - &f).amax();
            if resid > 1e-9 * (1.0 + f.amax()) {
                return Err((SolveStatus::Infeasible, format!("equalities inconsistent (residual {resid:e})"), 0));
            }
            let gram = e.transpose() * &e;
            let eig = gram.symmetric_eigen();
            let lmax = eig.eigenvalues.amax().max(1e-300);
            let keep: Vec<usize> = (0..n).filter(|&i| eig.eigenvalues[i] <= 1e-12 * lmax).collect();
            (x0, eig.eigenvectors.select_columns(&keep))
        };

        let ak = a.select_rows(&k_rows);
        let s0 = b.select_rows(&k_rows) - &ak * &x0;
        let bmat = &ak * &null;
        let cost = null.transpose() * &c;
        let nu: f64 = blocks.iter().map(|blk| blk.kind.barrier_degree(blk.rows.len())).sum();
        let p = bmat.ncols();
        let mut iters = 0;

        // phase I: variables (z, sigma); extra row keeps sigma >= -1
        let mut z = DVector::zeros(p);
        let core = Reduced { s0: s0.clone(), b: bmat.clone(), cost: cost.clone(), blocks, nu };
        if core.phi(&s0).is_none() {
            let m = k_rows.len();
            let mut e = DVector::zeros(m);
            for blk in &core.blocks {
                let id = cone_identity(blk.kind, blk.rows.len());
                e.rows_mut(blk.rows.start, blk.rows.len()).copy_from_slice(&id);
            }
            let mut b1 = DMatrix::zeros(m + 1, p + 1);
            b1.view_mut((0, 0), (m, p)).copy_from(&bmat);
            b1.view_mut((0, p), (m, 1)).copy_from(&(-&e));
            b1[(m, p)] = -1.0;
            let mut s01 = DVector::zeros(m + 1);
            s01.rows_mut(0, m).copy_from(&s0);
            s01[m] = 1.0;
            let mut cost1 = DVector::zeros(p + 1);
            cost1[p] = 1.0;
            let mut blocks1: Vec<Block> =
                core.blocks.iter().map(|b| Block { kind: b.kind, rows: b.rows.clone() }).collect();
            blocks1.push(Block { kind: ConeKind::NonNeg, rows: m..m + 1 });
            let phase1 = Reduced { s0: s01, b: b1, cost: cost1, blocks: blocks1, nu: nu + 1.0 }.with_ball();
            let mut sigma = 1.0 + s0.amax().min(0.25 * RADIUS);
            let mut zz = DVector::zeros(p + 1);
            let mut found = false;
            for _ in 0..80 {
                zz[p] = sigma;
                if phase1.phi(&phase1.slack(&zz)).is_some() {
                    found = true;
                    break;
                }
                sigma *= 2.0;
            }
            if !found {
                return Err((SolveStatus::NumericalLimit, "phase I could not find an interior start".into(), 0));
            }
            // a comfortable margin is preferred, but any strictly negative sigma will do
            let out = phase1.run(&mut zz, 1e-10, self.mu, self.max_newton, |v| v < -1e-2, &mut iters);
            match out {
                Outcome::Stopped => {}
                Outcome::Converged | Outcome::Stalled(_) if zz[p] < -1e-12 => {}
                Outcome::Converged | Outcome::Stalled(_) => {
                    let sig = zz[p];
                    return Err((SolveStatus::Infeasible, format!("phase I optimum sigma = {sig:e}"), iters));
                }
                // A thin interior can push the margin maximizer to the ball;
                // any strictly negative sigma is still a valid start.
                Outcome::Unbounded if zz[p] < -1e-12 => {}
                Outcome::Unbounded => {
                    return Err((SolveStatus::NumericalLimit, "phase I left the bounding ball".into(), iters))
                }
            }
            z = zz.rows(0, p).into_owned();
        }

        let red = core.with_ball();
        let out = red.run(&mut z, settings.tol, self.mu, self.max_newton, |_| false, &mut iters);
        let x = (&x0 + &null * &z).iter().copied().collect::<Vec<f64>>();
        match out {
            Outcome::Converged => Ok((x, iters)),
            Outcome::Unbounded => Err((SolveStatus::Unbounded, "optimum on the bounding ball".into(), iters)),
            Outcome::Stalled(gap) => {
                let obj = red.cost.dot(&z);
                if gap <= 1e2 * settings.tol * (1.0 + obj.abs()) {
                    Ok((x, iters))
                } else {
                    Err((SolveStatus::NumericalLimit, format!("stalled with duality gap bound {gap:e}"), iters))
                }
            }
            Outcome::Stopped => unreachable!(),
        }
    }
}

impl ConicSolver for BarrierSolver {
    fn name(&self) -> &'static str {
        "barrier"
    }

    fn solve_canonical(&self, program: &CanonicalProgram, settings: &SolverSettings) -> RawSolution {
        match self.solve_inner(program, settings) {
            Ok((x, iters)) => RawSolution {
                status: SolveStatus::Optimal,
                x: Some(x),
                iterations: iters as u32,
                detail: format!("barrier: converged after {iters} Newton steps"),
            },
            Err((status, detail, iters)) => {
                RawSolution { status, x: None, iterations: iters as u32, detail: format!("barrier: {detail}") }
            }
        }
    }
}
