use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::expr::{AffExpr, ComplexVar, HermitianVar, RealVar, VarInfo, VarKind};
use crate::error::{Error, Result};
use crate::linalg::{CMatrix, CVector};

/// Cone families. Every block lists its rows `e(x)` and asks `e(x) in K`.
/// `Psd { n }` takes the `n(n+1)/2` scaled upper-triangle entries
/// (column-major, off-diagonals times `sqrt 2`) of a symmetric `n x n` matrix.
/// `Exp` is the closure of `{(x, y, z) : y > 0, y exp(x / y) <= z}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ConeKind {
    Zero,
    NonNeg,
    Soc,
    Exp,
    Psd { n: usize },
}

impl ConeKind {
    /// Barrier parameter of one block of this kind with `dim` rows.
    pub fn barrier_degree(self, dim: usize) -> f64 {
        match self {
            ConeKind::Zero => 0.0,
            ConeKind::NonNeg => dim as f64,
            ConeKind::Soc => 2.0,
            ConeKind::Exp => 3.0,
            ConeKind::Psd { n } => n as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ConeKind::Zero => "zero",
            ConeKind::NonNeg => "nonneg",
            ConeKind::Soc => "soc",
            ConeKind::Exp => "exp",
            ConeKind::Psd { .. } => "psd",
        }
    }
}

pub fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Scaled upper triangle of a symmetric matrix given as rows of expressions.
pub fn svec(m: &[Vec<AffExpr>]) -> Vec<AffExpr> {
    let n = m.len();
    let mut out = Vec::with_capacity(svec_len(n));
    for col in 0..n {
        for row in 0..=col {
            let e = m[row][col].clone();
            out.push(if row == col { e } else { e * std::f64::consts::SQRT_2 });
        }
    }
    out
}

/// Inverse of [`svec`] on numbers.
pub fn smat(v: &[f64], n: usize) -> nalgebra::DMatrix<f64> {
    let mut m = nalgebra::DMatrix::zeros(n, n);
    let mut k = 0;
    for col in 0..n {
        for row in 0..=col {
            let x = if row == col { v[k] } else { v[k] / std::f64::consts::SQRT_2 };
            m[(row, col)] = x;
            m[(col, row)] = x;
            k += 1;
        }
    }
    m
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeBlock {
    pub kind: ConeKind,
    pub rows: Vec<AffExpr>,
}

impl ConeBlock {
    pub fn new(kind: ConeKind, rows: Vec<AffExpr>) -> Self {
        Self { kind, rows }
    }

    fn check_dims(&self) -> Result<()> {
        let d = self.rows.len();
        let ok = match self.kind {
            ConeKind::Zero | ConeKind::NonNeg => d >= 1,
            ConeKind::Soc => d >= 1,
            ConeKind::Exp => d == 3,
            ConeKind::Psd { n } => n >= 1 && d == svec_len(n),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::MalformedProgram(format!("{} block with {d} rows", self.kind.name())))
        }
    }

    /// Distance-like violation of cone membership at the row values `v`.
    pub fn violation(&self, v: &[f64]) -> f64 {
        match self.kind {
            ConeKind::Zero => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            ConeKind::NonNeg => v.iter().fold(0.0, |m, x| m.max(-x)),
            ConeKind::Soc => {
                let tail = v[1..].iter().map(|x| x * x).sum::<f64>().sqrt();
                (tail - v[0]).max(0.0)
            }
            ConeKind::Exp => exp_cone_violation(v[0], v[1], v[2]),
            ConeKind::Psd { n } => {
                let m = smat(v, n);
                (-m.symmetric_eigenvalues().min()).max(0.0)
            }
        }
    }
}

fn exp_cone_violation(x: f64, y: f64, z: f64) -> f64 {
    if y > 0.0 {
        let lhs = y * (x / y).exp();
        if lhs.is_finite() {
            (lhs - z).max(0.0)
        } else {
            f64::INFINITY
        }
    } else {
        (-y).max(0.0) + x.max(0.0) + (-z).max(0.0)
    }
}

/// One tagged constraint; a tag names the modeling role and a label indexes
/// the instance (user, target, beam) within that role.
#[derive(Debug, Clone, PartialEq)]
pub struct Constraint {
    pub tag: String,
    pub label: String,
    pub blocks: Vec<ConeBlock>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintCheck {
    pub tag: String,
    pub label: String,
    pub violation: f64,
    pub scale: f64,
}

/// Convex program `maximize objective s.t. every block in its cone`.
#[derive(Debug, Clone, Default)]
pub struct ConicProgram {
    vars: Vec<VarInfo>,
    n_scalars: usize,
    objective: AffExpr,
    constraints: Vec<Constraint>,
}

/// `||x||^2 <= t` as the rotated cone `||((t-1)/2, x)|| <= (t+1)/2`.
pub fn soc_of_quadratic(x: Vec<AffExpr>, bound: AffExpr) -> ConeBlock {
    let mut rows = Vec::with_capacity(x.len() + 2);
    rows.push((bound.clone() + 1.0) * 0.5);
    rows.push((bound - 1.0) * 0.5);
    rows.extend(x);
    ConeBlock::new(ConeKind::Soc, rows)
}

/// `level <= log2(arg)` as `(ln 2 * level, 1, arg) in K_exp`; forces `arg > 0`
/// whenever `level` is finite.
pub fn hypograph_log(arg: AffExpr, level: AffExpr) -> ConeBlock {
    ConeBlock::new(ConeKind::Exp, vec![level * std::f64::consts::LN_2, AffExpr::constant(1.0), arg])
}

pub fn nonneg(e: AffExpr) -> ConeBlock {
    ConeBlock::new(ConeKind::NonNeg, vec![e])
}

pub fn equal(e: AffExpr) -> ConeBlock {
    ConeBlock::new(ConeKind::Zero, vec![e])
}

/// Real PSD block equivalent to `R >= 0` for the Hermitian variable.
pub fn psd_hermitian(r: &HermitianVar) -> ConeBlock {
    ConeBlock::new(ConeKind::Psd { n: 2 * r.n }, svec(&r.realified()))
}

/// Numeric realification of a Hermitian matrix.
pub fn embed_hermitian(m: &CMatrix) -> Result<nalgebra::DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::NotHermitian(f64::INFINITY));
    }
    let asym = crate::linalg::hermitian_asymmetry(m);
    let scale = crate::linalg::max_abs(m).max(1.0);
    if asym > 1e-10 * scale {
        return Err(Error::NotHermitian(asym));
    }
    Ok(crate::linalg::realify(m))
}

/// Recovers the complex matrix from a (possibly slightly perturbed) real embedding.
pub fn extract_hermitian(real: &nalgebra::DMatrix<f64>) -> CMatrix {
    let n = real.nrows() / 2;
    let c = CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (real[(i, j)] + real[(i + n, j + n)]);
        let im = 0.5 * (real[(i + n, j)] - real[(i, j + n)]);
        crate::linalg::C64::new(re, im)
    });
    (&c + c.adjoint()) * crate::linalg::C64::new(0.5, 0.0)
}

/// Slack variables introduced by [`ConicProgram::relax`].
#[derive(Debug, Clone, PartialEq)]
pub struct Relaxation {
    pub slack: RealVar,
    /// `(tag, label)` of each relaxed constraint, in slack order.
    pub relaxed: Vec<(String, String)>,
}

impl Relaxation {
    pub fn total(&self, x: &[f64]) -> f64 {
        self.slack.value(x).iter().map(|s| s.max(0.0)).sum()
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    fn register(&mut self, name: &str, kind: VarKind, dim: usize) -> usize {
        let info = VarInfo { name: name.to_string(), kind, dim, offset: self.n_scalars };
        let offset = info.offset;
        self.n_scalars += info.n_scalars();
        self.vars.push(info);
        offset
    }

    pub fn add_real(&mut self, name: &str, len: usize) -> RealVar {
        RealVar { offset: self.register(name, VarKind::Real, len), len }
    }

    pub fn add_complex(&mut self, name: &str, len: usize) -> ComplexVar {
        ComplexVar { offset: self.register(name, VarKind::Complex, len), len }
    }

    pub fn add_hermitian(&mut self, name: &str, n: usize) -> HermitianVar {
        HermitianVar { offset: self.register(name, VarKind::Hermitian, n), n }
    }

    pub fn maximize(&mut self, objective: AffExpr) {
        self.objective = objective.compressed();
    }

    pub fn add(&mut self, tag: &str, label: impl Into<String>, blocks: Vec<ConeBlock>) {
        let blocks = blocks
            .into_iter()
            .map(|mut b| {
                b.rows.iter_mut().for_each(AffExpr::compress);
                b
            })
            .collect();
        self.constraints.push(Constraint { tag: tag.to_string(), label: label.into(), blocks });
    }

    pub fn vars(&self) -> &[VarInfo] {
        &self.vars
    }

    pub fn var(&self, name: &str) -> Option<&VarInfo> {
        self.vars.iter().find(|v| v.name == name)
    }

    pub fn n_scalars(&self) -> usize {
        self.n_scalars
    }

    pub fn objective(&self) -> &AffExpr {
        &self.objective
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn count_by_tag(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for c in &self.constraints {
            *out.entry(c.tag.clone()).or_insert(0) += 1;
        }
        out
    }

    pub fn count_tag(&self, tag: &str) -> usize {
        self.constraints.iter().filter(|c| c.tag == tag).count()
    }

    /// Dimension and reference checks, plus the Hermitian usage rule: a
    /// Hermitian scalar may only enter real affine forms, which is guaranteed
    /// by construction through [`HermitianVar`].
    pub fn validate(&self) -> Result<()> {
        let n = self.n_scalars;
        let check_expr = |e: &AffExpr, what: &str| -> Result<()> {
            if let Some(i) = e.max_index() {
                if i >= n {
                    return Err(Error::MalformedProgram(format!("{what} references scalar {i} of {n}")));
                }
            }
            if !e.constant.is_finite() || e.terms.iter().any(|t| !t.1.is_finite()) {
                return Err(Error::MalformedProgram(format!("{what} has non-finite coefficients")));
            }
            Ok(())
        };
        check_expr(&self.objective, "objective")?;
        for c in &self.constraints {
            for b in &c.blocks {
                b.check_dims().map_err(|e| Error::MalformedProgram(format!("{}[{}]: {e}", c.tag, c.label)))?;
                for r in &b.rows {
                    check_expr(r, &format!("{}[{}]", c.tag, c.label))?;
                }
            }
        }
        Ok(())
    }

    /// Violation of every constraint at `x`. The scale mirrors an
    /// interior-point feasibility test: `max(1, |b|, |x|, |Ax + b|)` in the
    /// infinity norm over the whole program, raised to `1 +` the largest row
    /// magnitude of the constraint when that is larger.
    pub fn check(&self, x: &[f64]) -> Vec<ConstraintCheck> {
        let mut global = x.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for c in &self.constraints {
            for r in c.blocks.iter().flat_map(|b| &b.rows) {
                global = global.max(r.constant.abs()).max(r.eval(x).abs());
            }
        }
        self.constraints
            .iter()
            .map(|c| {
                let mut violation: f64 = 0.0;
                let mut scale: f64 = global;
                for b in &c.blocks {
                    let v: Vec<f64> = b.rows.iter().map(|r| r.eval(x)).collect();
                    violation = violation.max(b.violation(&v));
                    for r in &b.rows {
                        scale = scale.max(1.0 + r.magnitude(x));
                    }
                }
                ConstraintCheck { tag: c.tag.clone(), label: c.label.clone(), violation, scale }
            })
            .collect()
    }

    /// Largest scaled violation `violation / scale` over all constraints.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.check(x).iter().map(|c| c.violation / c.scale).fold(0.0, f64::max)
    }

    /// Adds a nonnegative slack to every scalar nonnegativity constraint whose
    /// tag is listed and subtracts `penalty * sum(slack)` from the objective.
    /// With `cap`, also requires `sum(slack) <= cap`.
    pub fn relax(&mut self, tags: &[&str], penalty: f64, cap: Option<f64>) -> Result<Relaxation> {
        let targets: Vec<usize> = self
            .constraints
            .iter()
            .enumerate()
            .filter(|(_, c)| tags.contains(&c.tag.as_str()))
            .map(|(i, _)| i)
            .collect();
        for &i in &targets {
            let c = &self.constraints[i];
            if c.blocks.len() != 1 || c.blocks[0].kind != ConeKind::NonNeg || c.blocks[0].rows.len() != 1 {
                return Err(Error::MalformedProgram(format!(
                    "only scalar inequalities can be relaxed ({}[{}])",
                    c.tag, c.label
                )));
            }
        }
        let slack = self.add_real("restoration_slack", targets.len());
        let mut relaxed = Vec::with_capacity(targets.len());
        for (k, &i) in targets.iter().enumerate() {
            let c = &mut self.constraints[i];
            c.blocks[0].rows[0] += slack.at(k);
            relaxed.push((c.tag.clone(), c.label.clone()));
        }
        let total = AffExpr::sum((0..slack.len).map(|k| slack.at(k)));
        for k in 0..slack.len {
            self.add("restoration_slack_nonneg", k.to_string(), vec![nonneg(slack.at(k))]);
        }
        if let Some(cap) = cap {
            self.add("restoration_slack_cap", "", vec![nonneg(AffExpr::constant(cap) - total.clone())]);
        }
        let obj = self.objective.clone() - total * penalty;
        self.maximize(obj);
        Ok(Relaxation { slack, relaxed })
    }

    /// Flat primal point for fixed values of some variables (others zero).
    pub fn point(&self) -> PointBuilder<'_> {
        PointBuilder { x: vec![0.0; self.n_scalars], _p: self }
    }
}

/// Assembles a flat primal vector from typed values.
pub struct PointBuilder<'a> {
    x: Vec<f64>,
    _p: &'a ConicProgram,
}

impl PointBuilder<'_> {
    pub fn real(mut self, v: &RealVar, vals: &[f64]) -> Self {
        self.x[v.offset..v.offset + v.len].copy_from_slice(vals);
        self
    }

    pub fn complex(mut self, v: &ComplexVar, vals: &CVector) -> Self {
        for i in 0..v.len {
            self.x[v.offset + i] = vals[i].re;
            self.x[v.offset + v.len + i] = vals[i].im;
        }
        self
    }

    pub fn hermitian(mut self, v: &HermitianVar, m: &CMatrix) -> Self {
        for (i, val) in v.params_of(m) {
            self.x[i] = val;
        }
        self
    }

    pub fn build(self) -> Vec<f64> {
        self.x
    }
}
