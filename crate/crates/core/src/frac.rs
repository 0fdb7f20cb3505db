//! Fractional powers `P_alpha(T) v` by quadrature along the line `-j R`.
//!
//! With `s = -j tau` the path integral becomes an integral over `tau`; the
//! half-lines `tau > 0` and `tau < 0` are folded onto `t = |tau| > 0`, so
//! every node `t` carries the pair `s = -jt`, `s = +jt`. Both points share
//! the real matrix `Q = t^2 I + L`, so each node costs one factorization.
//!
//! Writing `s^{alpha-1} = t^{alpha-1} u(s)` with `|u(s)| = 1`, the singular
//! factor `t^{alpha-1}` is absorbed into the quadrature weights and the pair
//! coefficients `c(s) = -u(s)` carry the direction of traversal.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::coeff::ConditionReport;
use crate::error::{Error, Result};
use crate::grid::{Grid, QuatField, RealField, VectorOperator};
use crate::quad::gauss_jacobi_unit;
use crate::quat::{qpow, ImaginaryUnit, Quaternion};
use crate::resolvent::{ResolventWorkspace, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub alpha: f64,
    pub j: ImaginaryUnit,
    pub t_split: f64,
    pub n_sing: usize,
    pub n_tail: usize,
}

impl QuadratureSpec {
    /// Defaults: `j = e1`, `t_split = 1`, 64 nodes per panel.
    pub fn new(alpha: f64) -> Result<Self> {
        let spec = Self { alpha, j: ImaginaryUnit::E1, t_split: 1.0, n_sing: 64, n_tail: 64 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_j(mut self, j: ImaginaryUnit) -> Self {
        self.j = j;
        self
    }

    pub fn with_nodes(mut self, n_sing: usize, n_tail: usize) -> Self {
        self.n_sing = n_sing;
        self.n_tail = n_tail;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidInput(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.t_split > 0.0 && self.t_split.is_finite()) {
            return Err(Error::InvalidInput(format!("t_split must be positive, got {}", self.t_split)));
        }
        if self.n_sing < 4 || self.n_tail < 4 {
            return Err(Error::InvalidInput("each quadrature panel needs at least 4 nodes".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Panel {
    /// `[0, t_split]`, Gauss-Jacobi with weight `t^{alpha-1}`.
    Singular,
    /// `[t_split, inf)` through `t = t_split / u^2`.
    Tail,
}

/// A node with `sum weight * g(t) ~ int_0^inf t^{alpha-1} g(t) dt`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadNode {
    pub t: f64,
    pub weight: f64,
    pub panel: Panel,
}

/// Quadrature for `int_0^inf t^{alpha-1} g(t) dt` with `g(t) = O(1/t)` at
/// infinity, in ascending `t`.
///
/// On the tail, `t = t_split / u^2` turns the integral into
/// `int_0^1 u^{1-2 alpha} [2 t_split^{alpha-1} t g(t)] du`, and `t g(t)` is
/// smooth in `u`, so Gauss-Jacobi with weight `u^{1-2alpha}` converges
/// spectrally.
pub fn quad_nodes(spec: &QuadratureSpec) -> Result<Vec<QuadNode>> {
    spec.validate()?;
    let (a, ts) = (spec.alpha, spec.t_split);
    let mut nodes = Vec::with_capacity(spec.n_sing + spec.n_tail);
    let (x, w) = gauss_jacobi_unit(spec.n_sing, a - 1.0);
    for (x, w) in x.iter().zip(&w) {
        nodes.push(QuadNode { t: ts * x, weight: ts.powf(a) * w, panel: Panel::Singular });
    }
    let (u, w) = gauss_jacobi_unit(spec.n_tail, 1.0 - 2.0 * a);
    for (u, w) in u.iter().zip(&w).rev() {
        let t = ts / (u * u);
        nodes.push(QuadNode { t, weight: 2.0 * ts.powf(a - 1.0) * w * t, panel: Panel::Tail });
    }
    Ok(nodes)
}

/// Which of the two Balakrishnan integrals to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ResolventForm {
    /// `(1/2pi) int s^{alpha-1} ds_j S_R^{-1}(s,T) T v`.
    Right,
    /// `(1/2pi) int S_L^{-1}(s,T) ds_j s^{alpha-1} T v`.
    Left,
}

/// `P_alpha(T) v` with its scalar and vector parts.
#[derive(Debug, Clone, PartialEq)]
pub struct FracApplyResult {
    pub full: QuatField,
    pub scal: RealField,
    /// Components along `e1, e2, e3`.
    pub vec: [RealField; 3],
    /// Size of everything that would break the Scal/Vec structure, relative
    /// to the largest output entry.
    pub j_leak: f64,
}

impl FracApplyResult {
    fn from_full(full: QuatField, j_leak: f64) -> Self {
        let scal = full.component(0);
        let vec = [full.component(1), full.component(2), full.component(3)];
        Self { full, scal, vec, j_leak }
    }
}

/// Sums over the pair `s = -jt, +jt` of the quaternion factors that multiply
/// the fields in the integrand.
#[derive(Debug, Clone, Copy)]
struct PairCoefficients {
    /// `sum c`.
    c: Quaternion,
    /// `sum c s`.
    cs: Quaternion,
    /// `sum c s_bar`.
    cs_bar: Quaternion,
    /// `sum s_bar c`.
    s_bar_c: Quaternion,
}

fn pair_coefficients(j: Quaternion, alpha: f64, t: f64) -> Result<PairCoefficients> {
    let mut out = PairCoefficients {
        c: Quaternion::ZERO,
        cs: Quaternion::ZERO,
        cs_bar: Quaternion::ZERO,
        s_bar_c: Quaternion::ZERO,
    };
    for sign in [-1.0, 1.0] {
        let s = j * (sign * t);
        let c = -(qpow(s, alpha - 1.0)? * t.powf(1.0 - alpha));
        out.c += c;
        out.cs += c * s;
        out.cs_bar += c * s.conj();
        out.s_bar_c += s.conj() * c;
    }
    Ok(out)
}

/// `P_alpha(T)` for one operator, quadrature rule and solver.
#[derive(Debug, Clone)]
pub struct FracPower {
    spec: QuadratureSpec,
    op: Arc<VectorOperator>,
    solver: SolverConfig,
    nodes: Vec<QuadNode>,
}

/// Per-node contribution to each input, plus the leak bound.
type NodeOutput = (Vec<QuatField>, Vec<f64>);

impl FracPower {
    /// Refuses with `ConditionsFailed` when `report` does not pass, unless `force`.
    pub fn new(
        spec: QuadratureSpec,
        op: Arc<VectorOperator>,
        solver: SolverConfig,
        report: &ConditionReport,
        force: bool,
    ) -> Result<Self> {
        if !report.pass && !force {
            return Err(Error::ConditionsFailed);
        }
        Self::unchecked(spec, op, solver)
    }

    /// Skips the condition report; for operators built from raw samples.
    pub fn unchecked(spec: QuadratureSpec, op: Arc<VectorOperator>, solver: SolverConfig) -> Result<Self> {
        solver.validate()?;
        let nodes = quad_nodes(&spec)?;
        Ok(Self { spec, op, solver, nodes })
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn operator(&self) -> &Arc<VectorOperator> {
        &self.op
    }

    pub fn solver(&self) -> &SolverConfig {
        &self.solver
    }

    pub fn nodes(&self) -> &[QuadNode] {
        &self.nodes
    }

    pub fn grid(&self) -> &Grid {
        self.op.grid()
    }

    pub fn apply(&self, v: &QuatField) -> Result<FracApplyResult> {
        self.apply_with_form(v, ResolventForm::Right)
    }

    pub fn apply_with_form(&self, v: &QuatField, form: ResolventForm) -> Result<FracApplyResult> {
        Ok(self.apply_many(std::slice::from_ref(v), form)?.remove(0))
    }

    /// Applies `P_alpha(T)` to several inputs, sharing one factorization per node.
    pub fn apply_many(&self, vs: &[QuatField], form: ResolventForm) -> Result<Vec<FracApplyResult>> {
        for v in vs {
            if v.grid != *self.grid() {
                return Err(Error::InvalidInput("input field lives on a different grid".into()));
            }
            if v.comps.iter().any(|c| c.iter().any(|x| !x.is_finite())) {
                return Err(Error::InvalidInput("input field has non-finite values".into()));
            }
        }
        let tvs: Vec<QuatField> = vs.iter().map(|v| self.op.apply(v)).collect();
        let per_node: Vec<NodeOutput> = self
            .nodes
            .par_iter()
            .enumerate()
            .map(|(index, node)| {
                self.node_contribution(node, vs, &tvs, form).map_err(|e| Error::NodeFailed {
                    index,
                    t: node.t,
                    source: Box::new(e),
                })
            })
            .collect::<Result<_>>()?;

        let grid = *self.grid();
        let mut out = Vec::with_capacity(vs.len());
        for (k, v) in vs.iter().enumerate() {
            // fixed ascending-t reduction
            let mut acc = QuatField::zeros(grid);
            let mut leak = 0.0;
            for (fields, leaks) in &per_node {
                acc.axpy(1.0, &fields[k]);
                leak += leaks[k];
            }
            let peak = acc.max_abs();
            let mut j_leak = if peak > 0.0 { leak / peak } else { leak };
            if v.is_real() && peak > 0.0 {
                let stray = acc.comps[grid.dims() + 1..].iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
                j_leak += stray / peak;
            }
            out.push(FracApplyResult::from_full(acc, j_leak));
        }
        Ok(out)
    }

    fn node_contribution(
        &self,
        node: &QuadNode,
        vs: &[QuatField],
        tvs: &[QuatField],
        form: ResolventForm,
    ) -> Result<NodeOutput> {
        let t = node.t;
        let k = pair_coefficients(self.spec.j.quaternion(), self.spec.alpha, t)?;
        let ws = ResolventWorkspace::new(self.op.clone(), self.spec.j.quaternion() * t, self.solver)?;
        let scale = node.weight / (2.0 * PI);
        let mut fields = Vec::with_capacity(vs.len());
        let mut leaks = Vec::with_capacity(vs.len());
        for (v, tv) in vs.iter().zip(tvs) {
            let (field, leak) = match (form, node.panel) {
                (ResolventForm::Right, Panel::Singular) => {
                    // s^{alpha-1} (s S_R^{-1} v - v), which stays bounded as t -> 0
                    let w = ws.solve_q(v)?;
                    let tw = self.op.apply(&w);
                    let mut x = w.scale(t * t);
                    x.axpy(-1.0, v);
                    let mut f = x.left_mul(k.c);
                    f.axpy(-1.0, &tw.left_mul(k.cs));
                    let leak = k.c.vector_modulus() * x.max_abs() + k.cs.vector_modulus() * tw.max_abs();
                    (f, leak)
                }
                (ResolventForm::Right, Panel::Tail) => {
                    let y = ws.solve_q(tv)?;
                    let ty = self.op.apply(&y);
                    let mut f = y.left_mul(k.cs_bar);
                    f.axpy(-1.0, &ty.left_mul(k.c));
                    let leak = k.cs_bar.vector_modulus() * y.max_abs() + k.c.vector_modulus() * ty.max_abs();
                    (f, leak)
                }
                (ResolventForm::Left, _) => {
                    let y = ws.solve_q(tv)?;
                    let cy = y.left_mul(k.c);
                    let mut f = y.left_mul(k.s_bar_c);
                    f.axpy(-1.0, &self.op.apply(&cy));
                    let leak = k.s_bar_c.vector_modulus() * y.max_abs() + k.c.vector_modulus() * y.max_abs();
                    (f, leak)
                }
            };
            fields.push(field.scale(scale));
            leaks.push(scale.abs() * leak);
        }
        Ok((fields, leaks))
    }
}

/// Dense matrices of `v -> Scal P_alpha(T) v` and `v -> Vec P_alpha(T) v`
/// on real inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct FracPowerOperator {
    pub alpha: f64,
    pub grid: Grid,
    pub m_scal: DMatrix<f64>,
    /// One matrix per direction `e1..e3`; inactive directions are zero.
    pub m_vec: [DMatrix<f64>; 3],
    /// Largest `j_leak` over the basis columns.
    pub j_leak: f64,
    pub build_tolerance: f64,
}

/// Budget for per-node intermediate storage during a build, in `f64`s.
const BUILD_SCRATCH: usize = 1 << 24;

impl FracPowerOperator {
    /// Applies `fp` to every canonical basis field.
    pub fn build(fp: &FracPower) -> Result<Self> {
        let grid = *fp.grid();
        let n = grid.len();
        if n > fp.solver.dense_cap {
            return Err(Error::TooLarge { size: n, cap: fp.solver.dense_cap });
        }
        let chunk = (BUILD_SCRATCH / (fp.nodes.len() * 4 * n)).clamp(1, n);
        let mut m_scal = DMatrix::zeros(n, n);
        let mut m_vec = [DMatrix::zeros(n, n), DMatrix::zeros(n, n), DMatrix::zeros(n, n)];
        let mut j_leak = 0.0f64;
        let mut start = 0;
        while start < n {
            let end = (start + chunk).min(n);
            let basis: Vec<QuatField> = (start..end)
                .map(|col| {
                    let mut e = QuatField::zeros(grid);
                    e.comps[0][col] = 1.0;
                    e
                })
                .collect();
            for (col, res) in (start..end).zip(fp.apply_many(&basis, ResolventForm::Right)?) {
                m_scal.column_mut(col).copy_from_slice(&res.full.comps[0]);
                for (l, m) in m_vec.iter_mut().enumerate() {
                    m.column_mut(col).copy_from_slice(&res.full.comps[l + 1]);
                }
                j_leak = j_leak.max(res.j_leak);
            }
            start = end;
        }
        Ok(Self { alpha: fp.spec.alpha, grid, m_scal, m_vec, j_leak, build_tolerance: fp.solver.tol })
    }

    pub fn apply(&self, v: &RealField) -> (RealField, [RealField; 3]) {
        let x = nalgebra::DVector::from_column_slice(&v.values);
        let field = |m: &DMatrix<f64>| RealField { grid: self.grid, values: (m * &x).iter().copied().collect() };
        (field(&self.m_scal), [field(&self.m_vec[0]), field(&self.m_vec[1]), field(&self.m_vec[2])])
    }
}
