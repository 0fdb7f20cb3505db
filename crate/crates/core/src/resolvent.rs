//! Pseudo-resolvent solves `Q_s w = f` on the imaginary axis and the
//! S-resolvent operators built from them.
//!
//! For `Re(s) = 0` the pseudo-resolvent is the real matrix
//! `Q = |s|^2 I + L`, applied to each quaternion component separately.
//! Both S-resolvents then reduce to `v -> s_bar Q^{-1} v - T Q^{-1} v`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{QuatField, VectorOperator};
use crate::linalg::{bicgstab, cg, BandLu, BandMatrix};
use crate::quat::Quaternion;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverMethod {
    /// Banded LU with partial pivoting.
    Dense,
    /// BiCGStab (CG for constant coefficients) with Jacobi preconditioning.
    Krylov,
    /// `Dense` up to `dense_cap` unknowns, `Krylov` above.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub method: SolverMethod,
    pub tol: f64,
    /// Defaults to `20 N`.
    pub max_iter: Option<usize>,
    pub dense_cap: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { method: SolverMethod::Auto, tol: 1e-10, max_iter: None, dense_cap: 5000 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::InvalidInput(format!("solver tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == Some(0) {
            return Err(Error::InvalidInput("max_iter must be positive".into()));
        }
        Ok(())
    }

    fn uses_direct(&self, n: usize) -> Result<bool> {
        match self.method {
            SolverMethod::Dense if n > self.dense_cap => Err(Error::TooLarge { size: n, cap: self.dense_cap }),
            SolverMethod::Dense => Ok(true),
            SolverMethod::Krylov => Ok(false),
            SolverMethod::Auto => Ok(n <= self.dense_cap),
        }
    }
}

enum Backend {
    Direct { band: BandMatrix, lu: BandLu },
    Krylov { inv_diag: Vec<f64>, symmetric: bool, max_iter: usize },
}

/// Right and left null vectors of `L`.
///
/// The composed central difference annihilates the grid function that is 1
/// on every other node (starting at the first) when an axis has an odd
/// number of nodes. With every axis odd, `L` has the exact null vector
/// `z = (x) z_l` and left null vector `y = (x) z_l / a_l`, so `Q z = |s|^2 z`
/// and `y^T Q = |s|^2 y^T` hold exactly. Solving for that mode in closed
/// form keeps the remaining solve well conditioned as `|s| -> 0`.
struct NullPair {
    right: Vec<f64>,
    left: Vec<f64>,
    pairing: f64,
}

impl NullPair {
    fn detect(op: &VectorOperator) -> Option<Self> {
        let grid = op.grid();
        if grid.n().iter().any(|&k| k % 2 == 0) {
            return None;
        }
        let n = grid.len();
        let mut right = vec![0.0; n];
        let mut left = vec![0.0; n];
        for idx in 0..n {
            let m = grid.multi_index(idx);
            if (0..grid.dims()).all(|k| m[k].is_multiple_of(2)) {
                right[idx] = 1.0;
                let mut l = 1.0;
                for k in 0..grid.dims() {
                    l /= op.coeffs()[k][m[k]];
                }
                left[idx] = l;
            }
        }
        let pairing: f64 = right.iter().zip(&left).map(|(a, b)| a * b).sum();
        if !(pairing.is_finite() && pairing.abs() > 0.0) || left.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some(Self { right, left, pairing })
    }

    /// Null vectors of `Q` (right, left), or of `Q^T` when transposed.
    fn vectors(&self, transpose: bool) -> (&[f64], &[f64]) {
        if transpose {
            (&self.left, &self.right)
        } else {
            (&self.right, &self.left)
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Solver state for one point `s` on the imaginary axis.
pub struct ResolventWorkspace {
    op: Arc<VectorOperator>,
    s: Quaternion,
    shift: f64,
    cfg: SolverConfig,
    backend: Backend,
    null: Option<NullPair>,
}

impl std::fmt::Debug for ResolventWorkspace {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ResolventWorkspace")
            .field("s", &self.s)
            .field("cfg", &self.cfg)
            .field("direct", &self.is_direct())
            .finish()
    }
}

/// Estimated spectral norm of the real representation of an S-resolvent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormEstimate {
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

const NORM_REL_TOL: f64 = 1e-6;
const NORM_MAX_ITER: usize = 3000;
const REFINEMENT_STEPS: usize = 3;

impl ResolventWorkspace {
    pub fn new(op: Arc<VectorOperator>, s: Quaternion, cfg: SolverConfig) -> Result<Self> {
        cfg.validate()?;
        if !s.is_finite() || s.modulus() == 0.0 {
            return Err(Error::InvalidInput("s must be finite and nonzero".into()));
        }
        if s.re().abs() > 1e-14 * s.modulus() {
            return Err(Error::InvalidInput(format!("s = {s} is not purely imaginary")));
        }
        let shift = s.norm_sqr();
        let n = op.grid().len();
        let backend = if cfg.uses_direct(n)? {
            let band = op.q_band(shift);
            let lu = band.factor()?;
            Backend::Direct { band, lu }
        } else {
            let inv_diag = op.l_diagonal().iter().map(|d| 1.0 / (d + shift)).collect();
            Backend::Krylov { inv_diag, symmetric: op.is_constant(), max_iter: cfg.max_iter.unwrap_or(20 * n) }
        };
        let null = NullPair::detect(&op);
        Ok(Self { op, s, shift, cfg, backend, null })
    }

    pub fn s(&self) -> Quaternion {
        self.s
    }

    pub fn operator(&self) -> &VectorOperator {
        &self.op
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn is_direct(&self) -> bool {
        matches!(self.backend, Backend::Direct { .. })
    }

    /// `out = Q x` (or `Q^T x`).
    fn apply_q_real(&self, x: &[f64], transpose: bool) -> Vec<f64> {
        match &self.backend {
            Backend::Direct { band, .. } if transpose => band.mul_vec_transpose(x),
            Backend::Direct { band, .. } => band.mul_vec(x),
            Backend::Krylov { .. } => {
                let mut out = vec![0.0; x.len()];
                if transpose {
                    self.apply_l_transpose(x, &mut out);
                } else {
                    self.op.apply_l(x, &mut out);
                }
                out.iter_mut().zip(x).for_each(|(o, v)| *o += self.shift * v);
                out
            }
        }
    }

    fn apply_l_transpose(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        let mut t1 = vec![0.0; n];
        let mut t2 = vec![0.0; n];
        out.iter_mut().for_each(|v| *v = 0.0);
        for axis in 0..self.op.grid().dims() {
            self.op.apply_a_transpose(axis, x, &mut t1);
            self.op.apply_a_transpose(axis, &t1, &mut t2);
            out.iter_mut().zip(&t2).for_each(|(o, v)| *o -= v);
        }
    }

    /// Raw backend solve without null-mode handling.
    fn backend_solve(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        match &self.backend {
            Backend::Direct { lu, .. } => Ok(if transpose { lu.solve_transpose(b) } else { lu.solve(b) }),
            Backend::Krylov { inv_diag, symmetric, max_iter } => {
                let tol = 0.1 * self.cfg.tol;
                let apply = |x: &[f64], out: &mut [f64]| out.copy_from_slice(&self.apply_q_real(x, transpose));
                let sol = if *symmetric {
                    cg(apply, inv_diag, b, tol, *max_iter)?
                } else {
                    bicgstab(apply, inv_diag, b, tol, *max_iter)?
                };
                Ok(sol.x)
            }
        }
    }

    /// Splits `b = coef z + g` along the null vector `z`, with `y^T g = 0`.
    fn split_rhs(&self, b: &[f64], transpose: bool) -> (Vec<f64>, f64) {
        match &self.null {
            None => (b.to_vec(), 0.0),
            Some(null) => {
                let (right, left) = null.vectors(transpose);
                let coef = dot(left, b) / null.pairing;
                (b.iter().zip(right).map(|(b, z)| b - coef * z).collect(), coef)
            }
        }
    }

    /// Removes the null-mode component of a solution of the split system.
    fn project(&self, x: &mut [f64], transpose: bool) {
        if let Some(null) = &self.null {
            let (right, left) = null.vectors(transpose);
            let drift = dot(left, x) / null.pairing;
            x.iter_mut().zip(right).for_each(|(x, z)| *x -= drift * z);
        }
    }

    /// Solves `Q x = b` (or `Q^T x = b`) for one real component.
    ///
    /// The null mode contributes `coef z / |s|^2` exactly; the residual is
    /// measured on the complementary part, where it is computed reliably.
    pub fn solve_real(&self, b: &[f64], transpose: bool) -> Result<Vec<f64>> {
        let bnorm = norm(b);
        if bnorm == 0.0 {
            return Ok(vec![0.0; b.len()]);
        }
        let (g, coef) = self.split_rhs(b, transpose);
        let mut x = self.backend_solve(&g, transpose)?;
        self.project(&mut x, transpose);
        let mut steps = 0;
        loop {
            let qx = self.apply_q_real(&x, transpose);
            let r: Vec<f64> = g.iter().zip(&qx).map(|(b, q)| b - q).collect();
            let res = norm(&r) / bnorm;
            if !res.is_finite() {
                return Err(Error::SolverDiverged { iterations: steps, residual: res });
            }
            if res <= self.cfg.tol {
                break;
            }
            if steps == REFINEMENT_STEPS {
                return Err(Error::SolverDiverged { iterations: steps, residual: res });
            }
            let (r, _) = self.split_rhs(&r, transpose);
            let mut dx = self.backend_solve(&r, transpose)?;
            self.project(&mut dx, transpose);
            x.iter_mut().zip(&dx).for_each(|(x, d)| *x += d);
            steps += 1;
        }
        if let Some(null) = &self.null {
            let (right, _) = null.vectors(transpose);
            let c = coef / self.shift;
            x.iter_mut().zip(right).for_each(|(x, z)| *x += c * z);
        }
        Ok(x)
    }

    fn solve_components(&self, f: &QuatField, transpose: bool) -> Result<QuatField> {
        let mut out = QuatField::zeros(f.grid);
        for k in 0..4 {
            if f.comps[k].iter().any(|&v| v != 0.0) {
                out.comps[k] = self.solve_real(&f.comps[k], transpose)?;
            }
        }
        Ok(out)
    }

    /// `w = Q_s^{-1} f`, componentwise.
    pub fn solve_q(&self, f: &QuatField) -> Result<QuatField> {
        self.solve_components(f, false)
    }

    /// `w = Q_s^{-T} f`, componentwise.
    pub fn solve_q_transpose(&self, f: &QuatField) -> Result<QuatField> {
        self.solve_components(f, true)
    }

    /// `||Q x - f|| / ||f||` over all components.
    ///
    /// When `L` has a null vector `z`, `x` is split as `c z + x_perp` and
    /// `Q z = |s|^2 z` is used exactly, so the huge null component of a
    /// small-shift solution does not drown the residual in rounding.
    pub fn relative_residual(&self, x: &QuatField, f: &QuatField) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..4 {
            let (g, _) = self.split_rhs(&f.comps[k], false);
            let mut xp = x.comps[k].clone();
            self.project(&mut xp, false);
            let qx = self.apply_q_real(&xp, false);
            num += g.iter().zip(&qx).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
            den += f.comps[k].iter().map(|v| v * v).sum::<f64>();
        }
        if den == 0.0 {
            num.sqrt()
        } else {
            (num / den).sqrt()
        }
    }

    /// `Q_s u`, componentwise.
    pub fn apply_q(&self, u: &QuatField) -> QuatField {
        let mut out = QuatField::zeros(u.grid);
        for k in 0..4 {
            out.comps[k] = self.apply_q_real(&u.comps[k], false);
        }
        out
    }

    /// `s_bar w - T w` for `w = Q^{-1} v` already computed.
    pub fn resolvent_from_solution(&self, w: &QuatField) -> QuatField {
        let mut out = w.left_mul(self.s.conj());
        out.axpy(-1.0, &self.op.apply(w));
        out
    }

    /// `S_R^{-1}(s,T) v = -(T - s_bar) Q_s^{-1} v`.
    pub fn apply_sr(&self, v: &QuatField) -> Result<QuatField> {
        Ok(self.resolvent_from_solution(&self.solve_q(v)?))
    }

    /// `S_L^{-1}(s,T) v = (s I - T_bar) Q_{c,s}^{-1} v`; with `Q_{c,s} = -Q_s`
    /// and `T_bar = -T` this is `s_bar Q^{-1} v - T Q^{-1} v`.
    pub fn apply_sl(&self, v: &QuatField) -> Result<QuatField> {
        let w = self.solve_q(v)?;
        let mut out = w.left_mul(-self.s);
        out.axpy(-1.0, &self.op.apply(&w));
        Ok(out)
    }

    /// Transpose of [`Self::apply_sr`] in the real `4N x 4N` representation:
    /// `Q^{-T} (s v - T^T v)`.
    pub fn apply_sr_transpose(&self, v: &QuatField) -> Result<QuatField> {
        let mut rhs = v.left_mul(self.s);
        rhs.axpy(-1.0, &self.op.apply_transpose(v));
        self.solve_q_transpose(&rhs)
    }

    /// Largest singular value of the S-resolvent by power iteration on
    /// `M^T M`; a lower bound on the norm.
    pub fn estimate_norm(&self) -> Result<NormEstimate> {
        let grid = *self.op.grid();
        let n = grid.len();
        // deterministic start with energy in every mode
        let mut x = QuatField::zeros(grid);
        for k in 0..4 {
            for i in 0..n {
                let phase = (i * 4 + k) as f64;
                x.comps[k][i] = (0.7548776662466927 * phase).fract() - 0.5 + 0.1 * ((k + 1) as f64);
            }
        }
        let mut x = x.scale(1.0 / x.l2());
        let mut sigma = 0.0;
        for it in 1..=NORM_MAX_ITER {
            let y = self.apply_sr(&x)?;
            let next = y.l2();
            let z = self.apply_sr_transpose(&y)?;
            let zn = z.l2();
            if zn == 0.0 {
                return Ok(NormEstimate { value: 0.0, iterations: it, converged: true });
            }
            let converged = (next - sigma).abs() <= NORM_REL_TOL * next;
            sigma = next;
            if converged {
                return Ok(NormEstimate { value: sigma, iterations: it, converged: true });
            }
            x = z.scale(1.0 / zn);
        }
        Ok(NormEstimate { value: sigma, iterations: NORM_MAX_ITER, converged: false })
    }
}
