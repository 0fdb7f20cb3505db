//! Box domains, uniform interior grids, real and quaternion grid functions,
//! and the discrete vector operator `T = sum_l e_l A_l`.
//!
//! Nodes are stored in lexicographic order with axis 0 varying slowest.
//! Boundary values are zero and never stored; every stencil that reaches
//! outside the interior reads a zero ghost.

use std::ops::{Add, Sub};

use nalgebra::DMatrix;

use crate::coeff::CoefficientProfile;
use crate::error::{Error, Result};
use crate::linalg::BandMatrix;
use crate::quat::{left_mult_table, Quaternion};

/// `(0, L_0) x ... x (0, L_{d-1})` with `d` in `1..=3`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    dims: usize,
    lengths: [f64; 3],
}

impl BoxDomain {
    pub fn new(lengths: Vec<f64>) -> Result<Self> {
        if lengths.is_empty() || lengths.len() > 3 {
            return Err(Error::InvalidInput(format!("box must have 1 to 3 axes, got {}", lengths.len())));
        }
        if let Some(l) = lengths.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
            return Err(Error::InvalidInput(format!("box length {l} is not strictly positive")));
        }
        let mut arr = [0.0; 3];
        arr[..lengths.len()].copy_from_slice(&lengths);
        Ok(Self { dims: lengths.len(), lengths: arr })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn lengths(&self) -> &[f64] {
        &self.lengths[..self.dims]
    }

    pub fn volume(&self) -> f64 {
        self.lengths().iter().product()
    }
}

/// Default node-count caps for desk-scale runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridLimits {
    pub max_nodes: [usize; 3],
}

impl Default for GridLimits {
    fn default() -> Self {
        Self { max_nodes: [2048, 128 * 128, 24 * 24 * 24] }
    }
}

/// Uniform grid of interior nodes `x_i = i h_l`, `i = 1..=n_l`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    domain: BoxDomain,
    n: [usize; 3],
    h: [f64; 3],
    strides: [usize; 3],
}

impl Grid {
    pub fn new(domain: BoxDomain, n: Vec<usize>) -> Result<Self> {
        Self::with_limits(domain, n, GridLimits::default())
    }

    pub fn with_limits(domain: BoxDomain, n: Vec<usize>, limits: GridLimits) -> Result<Self> {
        let d = domain.dims();
        if n.len() != d {
            return Err(Error::InvalidInput(format!("{} node counts for a {d}-dimensional box", n.len())));
        }
        if n.contains(&0) {
            return Err(Error::InvalidInput("every axis needs at least one interior node".into()));
        }
        let total: usize = n.iter().product();
        if total > limits.max_nodes[d - 1] {
            return Err(Error::TooLarge { size: total, cap: limits.max_nodes[d - 1] });
        }
        let mut nn = [1usize; 3];
        let mut h = [0.0; 3];
        for k in 0..d {
            nn[k] = n[k];
            h[k] = domain.lengths()[k] / (n[k] + 1) as f64;
        }
        let mut strides = [0usize; 3];
        let mut s = 1;
        for k in (0..d).rev() {
            strides[k] = s;
            s *= nn[k];
        }
        Ok(Self { domain, n: nn, h, strides })
    }

    /// Same node count on every axis.
    pub fn uniform(domain: BoxDomain, n: usize) -> Result<Self> {
        Self::new(domain, vec![n; domain.dims()])
    }

    pub fn domain(&self) -> &BoxDomain {
        &self.domain
    }

    pub fn dims(&self) -> usize {
        self.domain.dims()
    }

    pub fn n(&self) -> &[usize] {
        &self.n[..self.dims()]
    }

    pub fn h(&self) -> &[f64] {
        &self.h[..self.dims()]
    }

    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Total number of interior nodes.
    pub fn len(&self) -> usize {
        self.n().iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Cell volume `prod h_l`, the quadrature weight of the discrete L2 norm.
    pub fn cell_volume(&self) -> f64 {
        self.h().iter().product()
    }

    /// Interior node coordinates along `axis`.
    pub fn axis_nodes(&self, axis: usize) -> Vec<f64> {
        (1..=self.n[axis]).map(|i| i as f64 * self.h[axis]).collect()
    }

    /// Per-axis node indices (0-based) of flat index `idx`.
    pub fn multi_index(&self, idx: usize) -> [usize; 3] {
        let mut out = [0usize; 3];
        for k in 0..self.dims() {
            out[k] = (idx / self.strides[k]) % self.n[k];
        }
        out
    }

    /// Coordinates of node `idx`; absent axes are 0.
    pub fn coords(&self, idx: usize) -> [f64; 3] {
        let m = self.multi_index(idx);
        let mut out = [0.0; 3];
        for k in 0..self.dims() {
            out[k] = (m[k] + 1) as f64 * self.h[k];
        }
        out
    }

    fn check_same(&self, other: &Grid) {
        assert!(self == other, "fields live on different grids");
    }
}

/// Real-valued grid function.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl RealField {
    pub fn zeros(grid: Grid) -> Self {
        Self { values: vec![0.0; grid.len()], grid }
    }

    pub fn from_values(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidInput(format!(
                "{} values for a grid with {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("field values must be finite".into()));
        }
        Ok(Self { grid, values })
    }

    /// Samples `f(x1, x2, x3)` at every node.
    pub fn from_fn(grid: Grid, f: impl Fn([f64; 3]) -> f64) -> Self {
        let values = (0..grid.len()).map(|i| f(grid.coords(i))).collect();
        Self { grid, values }
    }

    pub fn l2(&self) -> f64 {
        (self.grid.cell_volume() * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn dot(&self, other: &RealField) -> f64 {
        self.grid.check_same(&other.grid);
        self.grid.cell_volume() * self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn scale(&self, k: f64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * k).collect() }
    }
}

impl Add for &RealField {
    type Output = RealField;
    fn add(self, rhs: &RealField) -> RealField {
        self.grid.check_same(&rhs.grid);
        RealField { grid: self.grid, values: self.values.iter().zip(&rhs.values).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &RealField {
    type Output = RealField;
    fn sub(self, rhs: &RealField) -> RealField {
        self.grid.check_same(&rhs.grid);
        RealField { grid: self.grid, values: self.values.iter().zip(&rhs.values).map(|(a, b)| a - b).collect() }
    }
}

/// Discrete L2, `D` and `H1` norms of a quaternion field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norms {
    pub l2: f64,
    pub d_norm: f64,
    pub h1: f64,
}

/// Quaternion-valued grid function: component 0 is the scalar part,
/// components 1..=3 lie along `e1..e3`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuatField {
    pub grid: Grid,
    pub comps: [Vec<f64>; 4],
}

impl QuatField {
    pub fn zeros(grid: Grid) -> Self {
        let n = grid.len();
        Self { grid, comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]] }
    }

    pub fn from_real(f: &RealField) -> Self {
        let mut q = Self::zeros(f.grid);
        q.comps[0].clone_from(&f.values);
        q
    }

    pub fn from_components(grid: Grid, comps: [Vec<f64>; 4]) -> Result<Self> {
        if comps.iter().any(|c| c.len() != grid.len()) {
            return Err(Error::InvalidInput("component length does not match the grid".into()));
        }
        Ok(Self { grid, comps })
    }

    pub fn component(&self, k: usize) -> RealField {
        RealField { grid: self.grid, values: self.comps[k].clone() }
    }

    pub fn at(&self, idx: usize) -> Quaternion {
        Quaternion::new(self.comps[0][idx], self.comps[1][idx], self.comps[2][idx], self.comps[3][idx])
    }

    pub fn set(&mut self, idx: usize, q: Quaternion) {
        let a = q.to_array();
        for k in 0..4 {
            self.comps[k][idx] = a[k];
        }
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    pub fn is_real(&self) -> bool {
        self.comps[1..].iter().all(|c| c.iter().all(|&v| v == 0.0))
    }

    /// Pointwise `q * u(x)`.
    pub fn left_mul(&self, q: Quaternion) -> Self {
        let m = left_mult_table(q);
        let mut out = Self::zeros(self.grid);
        for i in 0..4 {
            for k in 0..4 {
                let c = m[i][k];
                if c != 0.0 {
                    for (o, v) in out.comps[i].iter_mut().zip(&self.comps[k]) {
                        *o += c * v;
                    }
                }
            }
        }
        out
    }

    pub fn scale(&self, k: f64) -> Self {
        let mut out = self.clone();
        out.comps.iter_mut().for_each(|c| c.iter_mut().for_each(|v| *v *= k));
        out
    }

    /// `self += k * other`.
    pub fn axpy(&mut self, k: f64, other: &QuatField) {
        self.grid.check_same(&other.grid);
        for (c, o) in self.comps.iter_mut().zip(&other.comps) {
            for (a, b) in c.iter_mut().zip(o) {
                *a += k * b;
            }
        }
    }

    pub fn l2(&self) -> f64 {
        let s: f64 = self.comps.iter().flat_map(|c| c.iter()).map(|v| v * v).sum();
        (self.grid.cell_volume() * s).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().flat_map(|c| c.iter()).fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Real inner product over all four components, cell-volume weighted.
    pub fn dot(&self, other: &QuatField) -> f64 {
        self.grid.check_same(&other.grid);
        let s: f64 = self
            .comps
            .iter()
            .zip(&other.comps)
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>())
            .sum();
        self.grid.cell_volume() * s
    }

    /// Flattened `[c0 | c1 | c2 | c3]`.
    pub fn to_flat(&self) -> Vec<f64> {
        self.comps.concat()
    }

    pub fn from_flat(grid: Grid, flat: &[f64]) -> Self {
        let n = grid.len();
        assert_eq!(flat.len(), 4 * n);
        Self {
            grid,
            comps: [
                flat[..n].to_vec(),
                flat[n..2 * n].to_vec(),
                flat[2 * n..3 * n].to_vec(),
                flat[3 * n..].to_vec(),
            ],
        }
    }
}

impl Add for &QuatField {
    type Output = QuatField;
    fn add(self, rhs: &QuatField) -> QuatField {
        let mut out = self.clone();
        out.axpy(1.0, rhs);
        out
    }
}

impl Sub for &QuatField {
    type Output = QuatField;
    fn sub(self, rhs: &QuatField) -> QuatField {
        let mut out = self.clone();
        out.axpy(-1.0, rhs);
        out
    }
}

/// Calls `f(line_start, stride, count)` for every grid line along `axis`.
fn for_each_line(grid: &Grid, axis: usize, mut f: impl FnMut(usize, usize, usize)) {
    let n = grid.n[axis];
    let s = grid.strides[axis];
    let block = n * s;
    let total = grid.len();
    let mut outer = 0;
    while outer < total {
        for inner in 0..s {
            f(outer + inner, s, n);
        }
        outer += block;
    }
}

/// Central difference along `axis` with zero ghosts: `(u_{i+1} - u_{i-1}) / 2h`.
pub fn apply_d(grid: &Grid, axis: usize, u: &[f64], out: &mut [f64]) {
    let inv = 0.5 / grid.h[axis];
    for_each_line(grid, axis, |start, s, n| {
        for i in 0..n {
            let right = if i + 1 < n { u[start + (i + 1) * s] } else { 0.0 };
            let left = if i > 0 { u[start + (i - 1) * s] } else { 0.0 };
            out[start + i * s] = (right - left) * inv;
        }
    });
}

/// Divergence `sum_l D_l w_l` of the first `dims` channels.
pub fn divergence(w: &[RealField]) -> RealField {
    let grid = w[0].grid;
    assert!(w.len() >= grid.dims());
    let mut out = RealField::zeros(grid);
    let mut tmp = vec![0.0; grid.len()];
    for (axis, f) in w.iter().enumerate().take(grid.dims()) {
        f.grid.check_same(&grid);
        apply_d(&grid, axis, &f.values, &mut tmp);
        out.values.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }
    out
}

/// Discrete norms: `l2`, `d_norm^2 = sum_l ||D_l u||^2`, `h1^2 = l2^2 + d_norm^2`.
pub fn norms(u: &QuatField) -> Norms {
    let grid = u.grid;
    let vol = grid.cell_volume();
    let l2 = u.l2();
    let mut d2 = 0.0;
    let mut tmp = vec![0.0; grid.len()];
    for axis in 0..grid.dims() {
        for c in &u.comps {
            apply_d(&grid, axis, c, &mut tmp);
            d2 += tmp.iter().map(|v| v * v).sum::<f64>();
        }
    }
    let d_norm = (vol * d2).sqrt();
    Norms { l2, d_norm, h1: (l2 * l2 + d_norm * d_norm).sqrt() }
}

/// `T = sum_l e_l A_l` with `A_l = diag(a_l(x_l)) D_l`, discretized on a grid.
///
/// The `A_l` act along different axes with single-variable coefficients, so
/// they commute exactly and `T^2 = -sum_l A_l^2` holds as a matrix identity.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorOperator {
    grid: Grid,
    /// `a_l` sampled at the interior nodes of axis `l`.
    coeffs: Vec<Vec<f64>>,
    constant: bool,
}

impl VectorOperator {
    pub fn new(grid: Grid, profiles: &[CoefficientProfile]) -> Result<Self> {
        if profiles.len() != grid.dims() {
            return Err(Error::InvalidInput(format!(
                "{} profiles for a {}-dimensional grid",
                profiles.len(),
                grid.dims()
            )));
        }
        let coeffs = profiles
            .iter()
            .enumerate()
            .map(|(axis, p)| grid.axis_nodes(axis).into_iter().map(|x| p.value(x)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let constant = profiles.iter().all(|p| p.is_constant());
        Ok(Self { grid, coeffs, constant })
    }

    /// Operator with the given per-axis coefficient samples.
    pub fn from_samples(grid: Grid, coeffs: Vec<Vec<f64>>) -> Result<Self> {
        if coeffs.len() != grid.dims() || coeffs.iter().enumerate().any(|(k, c)| c.len() != grid.n()[k]) {
            return Err(Error::InvalidInput("coefficient samples do not match the grid".into()));
        }
        let constant = coeffs.iter().all(|c| c.iter().all(|&v| v == c[0]));
        Ok(Self { grid, coeffs, constant })
    }

    /// `T` with `a_l = 1` on every axis.
    pub fn gradient(grid: Grid) -> Self {
        let coeffs = (0..grid.dims()).map(|k| vec![1.0; grid.n()[k]]).collect();
        Self { grid, coeffs, constant: true }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coeffs(&self) -> &[Vec<f64>] {
        &self.coeffs
    }

    /// True when every coefficient is constant, in which case `-sum A_l^2`
    /// is symmetric.
    pub fn is_constant(&self) -> bool {
        self.constant
    }

    /// `out = A_axis u`.
    pub fn apply_a(&self, axis: usize, u: &[f64], out: &mut [f64]) {
        apply_d(&self.grid, axis, u, out);
        let a = &self.coeffs[axis];
        for_each_line(&self.grid, axis, |start, s, n| {
            for (i, ai) in a.iter().enumerate().take(n) {
                out[start + i * s] *= ai;
            }
        });
    }

    /// `out = A_axis^T u = -D_axis (a u)`.
    pub fn apply_a_transpose(&self, axis: usize, u: &[f64], out: &mut [f64]) {
        let mut scaled = u.to_vec();
        let a = &self.coeffs[axis];
        for_each_line(&self.grid, axis, |start, s, n| {
            for (i, ai) in a.iter().enumerate().take(n) {
                scaled[start + i * s] *= ai;
            }
        });
        apply_d(&self.grid, axis, &scaled, out);
        out.iter_mut().for_each(|v| *v = -*v);
    }

    /// `out = L u` with `L = -sum_l A_l^2` (so `T^2 = L` componentwise).
    pub fn apply_l(&self, u: &[f64], out: &mut [f64]) {
        let n = self.grid.len();
        let mut t1 = vec![0.0; n];
        let mut t2 = vec![0.0; n];
        out.iter_mut().for_each(|v| *v = 0.0);
        for axis in 0..self.grid.dims() {
            self.apply_a(axis, u, &mut t1);
            self.apply_a(axis, &t1, &mut t2);
            out.iter_mut().zip(&t2).for_each(|(o, v)| *o -= v);
        }
    }

    fn apply_with(&self, v: &QuatField, transpose: bool) -> QuatField {
        self.grid.check_same(&v.grid);
        let n = self.grid.len();
        let mut out = QuatField::zeros(self.grid);
        let mut tmp = vec![0.0; n];
        for axis in 0..self.grid.dims() {
            let unit = Quaternion::basis(axis + 1);
            // (e_l)^T = -e_l in the real representation
            let m = left_mult_table(if transpose { -unit } else { unit });
            for k in 0..4 {
                if v.comps[k].iter().all(|&x| x == 0.0) {
                    continue;
                }
                if transpose {
                    self.apply_a_transpose(axis, &v.comps[k], &mut tmp);
                } else {
                    self.apply_a(axis, &v.comps[k], &mut tmp);
                }
                for (i, row) in m.iter().enumerate() {
                    let c = row[k];
                    if c != 0.0 {
                        out.comps[i].iter_mut().zip(&tmp).for_each(|(o, t)| *o += c * t);
                    }
                }
            }
        }
        out
    }

    /// `T v = sum_l e_l (A_l v)`.
    pub fn apply(&self, v: &QuatField) -> QuatField {
        self.apply_with(v, false)
    }

    /// Transpose of `T` in the real `4N x 4N` representation.
    pub fn apply_transpose(&self, v: &QuatField) -> QuatField {
        self.apply_with(v, true)
    }

    /// Half-bandwidth of `-sum A_l^2` in lexicographic ordering.
    pub fn bandwidth(&self) -> usize {
        let n = self.grid.len();
        (0..self.grid.dims())
            .filter(|&k| self.grid.n()[k] > 2)
            .map(|k| 2 * self.grid.stride(k))
            .max()
            .unwrap_or(0)
            .min(n.saturating_sub(1))
    }

    /// Calls `f(row, col, value)` for every nonzero of `L = -sum A_l^2`.
    fn for_each_l_entry(&self, mut f: impl FnMut(usize, usize, f64)) {
        for axis in 0..self.grid.dims() {
            let h = self.grid.h[axis];
            let a = &self.coeffs[axis];
            let q = 1.0 / (4.0 * h * h);
            for_each_line(&self.grid, axis, |start, s, n| {
                for i in 0..n {
                    let row = start + i * s;
                    // (A A u)_i = a_i/(2h) [ (Au)_{i+1} - (Au)_{i-1} ], ghosts of Au are zero
                    let mut diag = 0.0;
                    if i + 1 < n {
                        diag += a[i] * a[i + 1];
                        if i + 2 < n {
                            f(row, start + (i + 2) * s, -a[i] * a[i + 1] * q);
                        }
                    }
                    if i >= 1 {
                        diag += a[i] * a[i - 1];
                        if i >= 2 {
                            f(row, start + (i - 2) * s, -a[i] * a[i - 1] * q);
                        }
                    }
                    f(row, row, diag * q);
                }
            });
        }
    }

    /// Banded `Q = shift I + L`.
    pub fn q_band(&self, shift: f64) -> BandMatrix {
        let n = self.grid.len();
        let bw = self.bandwidth();
        let mut m = BandMatrix::zeros(n, bw, bw);
        for i in 0..n {
            m.add(i, i, shift);
        }
        self.for_each_l_entry(|i, j, v| m.add(i, j, v));
        m
    }

    /// Diagonal of `L`.
    pub fn l_diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.grid.len()];
        self.for_each_l_entry(|i, j, v| {
            if i == j {
                d[i] += v;
            }
        });
        d
    }

    /// Dense `L = -sum A_l^2`, assembled from the stencil.
    pub fn dense_l(&self) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut m = DMatrix::zeros(n, n);
        self.for_each_l_entry(|i, j, v| m[(i, j)] += v);
        m
    }

    /// Dense `A_axis`, column by column.
    pub fn dense_a(&self, axis: usize) -> DMatrix<f64> {
        let n = self.grid.len();
        let mut m = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_a(axis, &e, &mut col);
            m.set_column(j, &nalgebra::DVector::from_column_slice(&col));
            e[j] = 0.0;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn line(length: f64, n: usize) -> Grid {
        Grid::uniform(BoxDomain::new(vec![length]).unwrap(), n).unwrap()
    }

    fn random_field(grid: Grid, rng: &mut ChaCha8Rng) -> QuatField {
        let mut q = QuatField::zeros(grid);
        for c in q.comps.iter_mut() {
            c.iter_mut().for_each(|v| *v = rng.random_range(-1.0..1.0));
        }
        q
    }

    fn variable_op(grid: Grid) -> VectorOperator {
        let profiles: Vec<_> = ["1+0.1*x", "1+0.2*x^2", "2-sin(x)"]
            .iter()
            .take(grid.dims())
            .enumerate()
            .map(|(k, t)| CoefficientProfile::parse(k, t, grid.domain().lengths()[k]).unwrap())
            .collect();
        VectorOperator::new(grid, &profiles).unwrap()
    }

    #[test]
    fn domain_and_grid_validation() {
        assert!(BoxDomain::new(vec![]).is_err());
        assert!(BoxDomain::new(vec![1.0, -1.0]).is_err());
        assert!(BoxDomain::new(vec![1.0; 4]).is_err());
        let d = BoxDomain::new(vec![1.0, 2.0]).unwrap();
        assert!(Grid::new(d, vec![3]).is_err());
        assert!(matches!(Grid::new(d, vec![200, 200]), Err(Error::TooLarge { .. })));
        let g = Grid::new(d, vec![3, 4]).unwrap();
        assert_eq!(g.len(), 12);
        assert_eq!(g.h(), &[0.25, 0.4]);
        // lexicographic, axis 0 slowest
        assert_eq!(g.multi_index(5), [1, 1, 0]);
        let c = g.coords(5);
        assert_relative_eq!(c[0], 0.5);
        assert_relative_eq!(c[1], 0.8);
        assert_eq!(c[2], 0.0);
    }

    #[test]
    fn central_difference_of_linear_function() {
        let g = line(1.0, 9);
        let u: Vec<f64> = g.axis_nodes(0);
        let mut out = vec![0.0; 9];
        apply_d(&g, 0, &u, &mut out);
        for v in &out[1..8] {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-13);
        }
        let h = g.h()[0];
        assert_relative_eq!(out[8], (0.0 - u[7]) / (2.0 * h), max_relative = 1e-14);
        assert_relative_eq!(out[0], u[1] / (2.0 * h), max_relative = 1e-14);
    }

    #[test]
    fn central_difference_taylor_bound() {
        let g = line(PI, 127);
        let h = g.h()[0];
        let u: Vec<f64> = g.axis_nodes(0).iter().map(|x| x.sin()).collect();
        let mut out = vec![0.0; 127];
        apply_d(&g, 0, &u, &mut out);
        // sin vanishes at both ends, so even the boundary-adjacent nodes see exact ghosts
        for (x, d) in g.axis_nodes(0).iter().zip(&out) {
            assert!((d - x.cos()).abs() <= h * h / 6.0 + 1e-14);
        }
        let zero = vec![0.0; 127];
        apply_d(&g, 0, &zero, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn apply_t_examples() {
        let g = line(PI, 63);
        let op = VectorOperator::gradient(g);
        let h = g.h()[0];
        let v = RealField::from_fn(g, |x| x[0].sin());
        let tv = op.apply(&QuatField::from_real(&v));
        assert!(tv.comps[0].iter().chain(&tv.comps[2]).chain(&tv.comps[3]).all(|&x| x == 0.0));
        for (x, d) in g.axis_nodes(0).iter().zip(&tv.comps[1]) {
            assert!((d - x.cos()).abs() <= h * h / 6.0 + 1e-14);
        }

        let ones = QuatField::from_real(&RealField::from_fn(g, |_| 1.0));
        let t1 = op.apply(&ones);
        assert_relative_eq!(t1.comps[1][0], 1.0 / (2.0 * h));
        assert_relative_eq!(t1.comps[1][62], -1.0 / (2.0 * h));
        assert!(t1.comps[1][1..62].iter().all(|&x| x == 0.0));

        // T (e2 f) = e1 e2 A1 f = e3 A1 f
        let f = RealField::from_fn(g, |x| x[0] * (PI - x[0]));
        let mut e2f = QuatField::zeros(g);
        e2f.comps[2].clone_from(&f.values);
        let out = op.apply(&e2f);
        let mut a1f = vec![0.0; 63];
        op.apply_a(0, &f.values, &mut a1f);
        assert_eq!(out.comps[3], a1f);
        assert!(out.comps[0].iter().chain(&out.comps[1]).chain(&out.comps[2]).all(|&x| x == 0.0));
    }

    #[test]
    fn axis_operators_commute() {
        let d = BoxDomain::new(vec![1.0, 2.0, 1.5]).unwrap();
        let g = Grid::new(d, vec![5, 6, 4]).unwrap();
        let op = variable_op(g);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = g.len();
        for l in 0..3 {
            for m in 0..3 {
                if l == m {
                    continue;
                }
                let (mut a, mut b, mut c, mut e) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
                op.apply_a(m, &u, &mut a);
                op.apply_a(l, &a, &mut b);
                op.apply_a(l, &u, &mut c);
                op.apply_a(m, &c, &mut e);
                for (x, y) in b.iter().zip(&e) {
                    assert!((x - y).abs() <= 1e-12 * (1.0 + x.abs()));
                }
            }
        }
    }

    #[test]
    fn t_squared_is_real_and_equals_l() {
        let d = BoxDomain::new(vec![1.0, 1.3]).unwrap();
        let g = Grid::new(d, vec![7, 6]).unwrap();
        let op = variable_op(g);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v = random_field(g, &mut rng);
        let tt = op.apply(&op.apply(&v));
        let mut lv = QuatField::zeros(g);
        for k in 0..4 {
            op.apply_l(&v.comps[k], &mut lv.comps[k]);
        }
        let scale = lv.max_abs();
        assert!((&tt - &lv).max_abs() <= 1e-13 * scale);
    }

    #[test]
    fn band_and_dense_assembly_agree_with_matrix_free() {
        let d = BoxDomain::new(vec![1.0, 2.0]).unwrap();
        let g = Grid::new(d, vec![5, 4]).unwrap();
        let op = variable_op(g);
        let dense = op.dense_l();
        let band = op.q_band(0.7);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut lu = vec![0.0; g.len()];
        op.apply_l(&u, &mut lu);
        let du = &dense * nalgebra::DVector::from_column_slice(&u);
        let bu = band.mul_vec(&u);
        for i in 0..g.len() {
            assert!((lu[i] - du[i]).abs() <= 1e-12 * (1.0 + lu[i].abs()));
            assert!((lu[i] + 0.7 * u[i] - bu[i]).abs() <= 1e-12 * (1.0 + lu[i].abs()));
        }
        // composition of the dense axis operators reproduces L
        let composed = -(0..2).map(|k| op.dense_a(k) * op.dense_a(k)).fold(DMatrix::zeros(20, 20), |a, b| a + b);
        assert!((composed - dense).amax() <= 1e-10);
        assert_eq!(op.l_diagonal(), op.dense_l().diagonal().as_slice());
    }

    #[test]
    fn constant_coefficient_l_is_symmetric_psd() {
        // even node counts keep the spectrum away from zero; odd counts have a
        // one-dimensional kernel (the indicator of the odd-indexed nodes)
        let g = line(PI, 16);
        let l = VectorOperator::gradient(g).dense_l();
        assert!((&l - l.transpose()).amax() == 0.0);
        let ev = nalgebra::SymmetricEigen::new(l).eigenvalues;
        assert!(ev.min() > 0.1);

        let g = line(PI, 15);
        let op = VectorOperator::gradient(g);
        let ev = nalgebra::SymmetricEigen::new(op.dense_l()).eigenvalues;
        let mut sorted: Vec<f64> = ev.iter().copied().collect();
        sorted.sort_by(f64::total_cmp);
        assert!(sorted[0].abs() < 1e-10 && sorted[1] > 0.5);
        let z: Vec<f64> = (0..15).map(|i| if i % 2 == 0 { 1.0 } else { 0.0 }).collect();
        let mut out = vec![0.0; 15];
        op.apply_a(0, &z, &mut out);
        assert!(out.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn norms_examples() {
        let g = line(PI, 511);
        let zero = norms(&QuatField::zeros(g));
        assert_eq!((zero.l2, zero.d_norm, zero.h1), (0.0, 0.0, 0.0));
        let s = QuatField::from_real(&RealField::from_fn(g, |x| x[0].sin()));
        let nm = norms(&s);
        assert_relative_eq!(nm.l2, (PI / 2.0).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(nm.h1 * nm.h1, nm.l2 * nm.l2 + nm.d_norm * nm.d_norm, max_relative = 1e-14);
    }

    #[test]
    fn discrete_poincare_on_refined_grids() {
        // the boundary rows of D cost O(h) in the discrete constant
        for n in [63, 255, 1023] {
            let g = line(PI, n);
            let eps = 2.0 * g.h()[0] / PI;
            let c_omega = 1.0;
            for k in 1..4 {
                let u = QuatField::from_real(&RealField::from_fn(g, |x| (k as f64 * x[0]).sin()));
                let nm = norms(&u);
                assert!(nm.l2 <= c_omega * (1.0 + eps) * nm.d_norm, "n={n} k={k}");
            }
        }
    }

    #[test]
    fn transpose_is_adjoint() {
        let d = BoxDomain::new(vec![1.0, 2.0]).unwrap();
        let g = Grid::new(d, vec![6, 5]).unwrap();
        let op = variable_op(g);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let u = random_field(g, &mut rng);
        let v = random_field(g, &mut rng);
        let lhs = op.apply(&u).dot(&v);
        let rhs = u.dot(&op.apply_transpose(&v));
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0));
    }

    #[test]
    fn divergence_examples() {
        let g = line(1.0, 31);
        let c = RealField::from_fn(g, |_| 2.0);
        let dv = divergence(&[c]);
        assert!(dv.values[1..30].iter().all(|&v| v == 0.0));

        let v = RealField::from_fn(g, |x| x[0] * x[0] * (1.0 - x[0]));
        let mut dvv = vec![0.0; 31];
        apply_d(&g, 0, &v.values, &mut dvv);
        let mut ddv = vec![0.0; 31];
        apply_d(&g, 0, &dvv, &mut ddv);
        let div = divergence(&[RealField::from_values(g, dvv).unwrap()]);
        assert_eq!(div.values, ddv);
    }
}
