//! Reference computations that share no code path with the quadrature.
//!
//! [`fractional_laplacian_spectral`] uses continuous sine eigenpairs;
//! [`ConstantCoefficientOracle`] diagonalizes its own assembly of the
//! discrete `L`; [`s_spectrum_probe`] reports the eigenvalues of `L`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::frac::FracApplyResult;
use crate::grid::{Grid, QuatField, RealField, VectorOperator};

/// Applies `M` (an `n x n` matrix) along `axis` of a tensor field.
fn along_axis(grid: &Grid, axis: usize, m: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    let n = grid.n()[axis];
    let s = grid.stride(axis);
    let mut out = vec![0.0; u.len()];
    let mut line = vec![0.0; n];
    for base in 0..u.len() {
        if !(base / s).is_multiple_of(n) {
            continue;
        }
        for (i, l) in line.iter_mut().enumerate() {
            *l = u[base + i * s];
        }
        for r in 0..n {
            out[base + r * s] = (0..n).map(|c| m[(r, c)] * line[c]).sum();
        }
    }
    out
}

/// `(-Delta)^beta v` through the continuous Dirichlet sine modes of the box.
pub fn fractional_laplacian_spectral(beta: f64, v: &RealField) -> RealField {
    let grid = v.grid;
    let mut coefs = v.values.clone();
    let mut inverse = Vec::with_capacity(grid.dims());
    for axis in 0..grid.dims() {
        let n = grid.n()[axis];
        let sines = DMatrix::from_fn(n, n, |k, i| (PI * ((k + 1) * (i + 1)) as f64 / (n + 1) as f64).sin());
        let forward = &sines * (2.0 / (n + 1) as f64);
        coefs = along_axis(&grid, axis, &forward, &coefs);
        inverse.push(sines);
    }
    for (idx, c) in coefs.iter_mut().enumerate() {
        let m = grid.multi_index(idx);
        let lambda: f64 = (0..grid.dims())
            .map(|k| ((m[k] + 1) as f64 * PI / grid.domain().lengths()[k]).powi(2))
            .sum();
        *c *= lambda.powf(beta);
    }
    for (axis, sines) in inverse.iter().enumerate() {
        coefs = along_axis(&grid, axis, &sines.transpose(), &coefs);
    }
    RealField { grid, values: coefs }
}

/// Dense one-dimensional central difference with zero ghosts.
fn central_difference(n: usize, h: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if j == i + 1 {
            0.5 / h
        } else if i == j + 1 {
            -0.5 / h
        } else {
            0.0
        }
    })
}

/// `I (x) ... (x) M (x) ... (x) I` with `M` in slot `axis`, axis 0 slowest.
fn kron_axis(grid: &Grid, axis: usize, m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::identity(1, 1);
    for k in 0..grid.dims() {
        let factor = if k == axis { m.clone() } else { DMatrix::identity(grid.n()[k], grid.n()[k]) };
        out = out.kronecker(&factor);
    }
    out
}

/// Eigendecomposition of `L = -sum a_l^2 D_l^2` for constant coefficients.
#[derive(Debug, Clone)]
pub struct ConstantCoefficientOracle {
    grid: Grid,
    a: Vec<DMatrix<f64>>,
    eig: SymmetricEigen<f64, nalgebra::Dyn>,
    zero_floor: f64,
}

impl ConstantCoefficientOracle {
    pub fn new(op: &VectorOperator) -> Result<Self> {
        if !op.is_constant() {
            return Err(Error::RejectVariableCoefficients);
        }
        let grid = *op.grid();
        let n = grid.len();
        if n > 5000 {
            return Err(Error::TooLarge { size: n, cap: 5000 });
        }
        let a: Vec<DMatrix<f64>> = (0..grid.dims())
            .map(|k| kron_axis(&grid, k, &central_difference(grid.n()[k], grid.h()[k])) * op.coeffs()[k][0])
            .collect();
        let mut l = DMatrix::zeros(n, n);
        for ak in &a {
            l -= ak * ak;
        }
        let eig = SymmetricEigen::new(l);
        let top = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        Ok(Self { grid, a, eig, zero_floor: 1e-12 * top.max(1.0) })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalues of `L` in ascending order with their eigenvectors.
    pub fn eigenpairs(&self) -> Vec<(f64, RealField)> {
        let mut idx: Vec<usize> = (0..self.eig.eigenvalues.len()).collect();
        idx.sort_by(|&i, &j| self.eig.eigenvalues[i].total_cmp(&self.eig.eigenvalues[j]));
        idx.into_iter()
            .map(|i| {
                let v = RealField { grid: self.grid, values: self.eig.eigenvectors.column(i).iter().copied().collect() };
                (self.eig.eigenvalues[i], v)
            })
            .collect()
    }

    /// Distinct positive eigenvalues, merged at relative distance `1e-9`.
    pub fn distinct_positive(&self) -> Vec<f64> {
        let mut out: Vec<f64> = Vec::new();
        for (lam, _) in self.eigenpairs() {
            if lam > self.zero_floor && out.last().is_none_or(|&p| (lam - p) > 1e-9 * lam) {
                out.push(lam);
            }
        }
        out
    }

    /// `L^p v`, with the null space of `L` mapped to zero.
    pub fn power(&self, p: f64, v: &[f64]) -> Vec<f64> {
        let q = &self.eig.eigenvectors;
        let coef = q.transpose() * DVector::from_column_slice(v);
        let scaled = DVector::from_iterator(
            coef.len(),
            coef.iter().zip(self.eig.eigenvalues.iter()).map(|(c, &lam)| {
                if lam.abs() <= self.zero_floor {
                    0.0
                } else {
                    c * lam.powf(p)
                }
            }),
        );
        (q * scaled).iter().copied().collect()
    }

    /// `Scal = L^{alpha/2} v / 2`, `Vec_l = L^{(alpha-1)/2} A_l v / 2`.
    pub fn closed_form_p_alpha(&self, alpha: f64, v: &RealField) -> Result<FracApplyResult> {
        if v.grid != self.grid {
            return Err(Error::InvalidInput("field lives on a different grid".into()));
        }
        let mut full = QuatField::zeros(self.grid);
        full.comps[0] = self.power(alpha / 2.0, &v.values).iter().map(|x| 0.5 * x).collect();
        let x = DVector::from_column_slice(&v.values);
        for (k, ak) in self.a.iter().enumerate() {
            let av: Vec<f64> = (ak * &x).iter().copied().collect();
            full.comps[k + 1] = self.power((alpha - 1.0) / 2.0, &av).iter().map(|x| 0.5 * x).collect();
        }
        let scal = full.component(0);
        let vec = [full.component(1), full.component(2), full.component(3)];
        Ok(FracApplyResult { full, scal, vec, j_leak: 0.0 })
    }
}

/// Discrete S-spectrum approximation from the eigenvalues `mu` of `L`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SpectrumProbe {
    /// `+-sqrt(mu)` for every real `mu >= 0`, ascending.
    pub points: Vec<f64>,
    /// Eigenvalues that are negative or not real, as `(re, im)`; their
    /// spheres `+-j sqrt|mu|` are not listed in `points`.
    pub flagged: Vec<(f64, f64)>,
    pub eigenvalues: Vec<(f64, f64)>,
}

/// Eigenvalues of the dense `L = -sum A_l^2` and the points `+-sqrt(mu)`.
pub fn s_spectrum_probe(op: &VectorOperator) -> Result<SpectrumProbe> {
    let n = op.grid().len();
    if n > 5000 {
        return Err(Error::TooLarge { size: n, cap: 5000 });
    }
    let l = op.dense_l();
    let scale = l.abs().max().max(1.0);
    let mut eigenvalues: Vec<(f64, f64)> = if op.is_constant() {
        SymmetricEigen::new(l).eigenvalues.iter().map(|&x| (x, 0.0)).collect()
    } else {
        l.complex_eigenvalues().iter().map(|z| (z.re, z.im)).collect()
    };
    eigenvalues.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let tol = 1e-10 * scale;
    let mut points = Vec::new();
    let mut flagged = Vec::new();
    for &(re, im) in &eigenvalues {
        if im.abs() <= tol && re >= -tol {
            let r = re.max(0.0).sqrt();
            points.push(-r);
            points.push(r);
        } else {
            flagged.push((re, im));
        }
    }
    points.sort_by(f64::total_cmp);
    Ok(SpectrumProbe { points, flagged, eigenvalues })
}
