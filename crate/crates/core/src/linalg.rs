//! Banded LU with partial pivoting and two preconditioned Krylov solvers.

use crate::error::{Error, Result};

/// General band matrix in LAPACK column-major band storage, with room for
/// the fill-in that partial pivoting produces.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Self { n, kl, ku, ldab, ab: vec![0.0; ldab * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        j * self.ldab + self.kl + self.ku + i - j
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && i <= j + self.kl && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.ab[self.idx(i, j)]
        } else {
            0.0
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.in_band(i, j), "entry ({i}, {j}) outside the band");
        let k = self.idx(i, j);
        self.ab[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for j in 0..self.n {
            let xj = x[j];
            if xj == 0.0 {
                continue;
            }
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            for (i, yi) in y.iter_mut().enumerate().take(hi + 1).skip(lo) {
                *yi += self.ab[self.idx(i, j)] * xj;
            }
        }
        y
    }

    /// `y = A^T x`.
    pub fn mul_vec_transpose(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for (j, yj) in y.iter_mut().enumerate() {
            let lo = j.saturating_sub(self.ku);
            let hi = (j + self.kl).min(self.n - 1);
            *yj = (lo..=hi).map(|i| self.ab[self.idx(i, j)] * x[i]).sum();
        }
        y
    }

    /// Diagonal entries.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.ab[self.idx(i, i)]).collect()
    }

    /// LU factorization with partial pivoting, `P A = L U`.
    pub fn factor(&self) -> Result<BandLu> {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let kv = kl + ku;
        let mut ab = self.ab.clone();
        let at = |i: usize, j: usize| j * ldab + kv + i - j;
        let mut ipiv = vec![0usize; n];
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut jp = 0;
            let mut best = ab[at(j, j)].abs();
            for p in 1..=km {
                let v = ab[at(j + p, j)].abs();
                if v > best {
                    best = v;
                    jp = p;
                }
            }
            ipiv[j] = j + jp;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::SolverDiverged { iterations: j, residual: f64::INFINITY });
            }
            ju = ju.max((j + ku + jp).min(n - 1));
            if jp != 0 {
                for c in j..=ju {
                    ab.swap(at(j, c), at(j + jp, c));
                }
            }
            let inv = 1.0 / ab[at(j, j)];
            for p in 1..=km {
                ab[at(j + p, j)] *= inv;
            }
            for c in j + 1..=ju {
                let u = ab[at(j, c)];
                if u != 0.0 {
                    for p in 1..=km {
                        let l = ab[at(j + p, j)];
                        ab[at(j + p, c)] -= l * u;
                    }
                }
            }
        }
        Ok(BandLu { n, kl, kv, ldab, ab, ipiv })
    }
}

/// Factors produced by [`BandMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    kv: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandLu {
    #[inline]
    fn at(&self, i: usize, j: usize) -> f64 {
        self.ab[j * self.ldab + self.kv + i - j]
    }

    /// Solves `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
            let bj = b[j];
            if bj != 0.0 {
                for k in 1..=self.kl.min(n - 1 - j) {
                    b[j + k] -= self.at(j + k, j) * bj;
                }
            }
        }
        for j in (0..n).rev() {
            b[j] /= self.at(j, j);
            let bj = b[j];
            if bj != 0.0 {
                for i in j.saturating_sub(self.kv)..j {
                    b[i] -= self.at(i, j) * bj;
                }
            }
        }
    }

    /// Solves `A^T x = b` in place.
    pub fn solve_transpose_in_place(&self, b: &mut [f64]) {
        let n = self.n;
        for j in 0..n {
            let mut s = b[j];
            for i in j.saturating_sub(self.kv)..j {
                s -= self.at(i, j) * b[i];
            }
            b[j] = s / self.at(j, j);
        }
        for j in (0..n).rev() {
            let mut s = b[j];
            for k in 1..=self.kl.min(n - 1 - j) {
                s -= self.at(j + k, j) * b[j + k];
            }
            b[j] = s;
            let p = self.ipiv[j];
            if p != j {
                b.swap(j, p);
            }
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_transpose_in_place(&mut x);
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Outcome of a Krylov solve.
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned BiCGStab for `A x = b`; `apply(x, out)` writes `A x`.
pub fn bicgstab(
    apply: impl Fn(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovSolution> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(KrylovSolution { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut t = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut res = 1.0;
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::SolverDiverged { iterations: it, residual: res });
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
            y[i] = p[i] * inv_diag[i];
        }
        apply(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * y[i];
            }
            return Ok(KrylovSolution { x, iterations: it, residual: norm(&s) / bnorm });
        }
        for i in 0..n {
            z[i] = s[i] * inv_diag[i];
        }
        apply(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm(&r) / bnorm;
        if !res.is_finite() {
            return Err(Error::SolverDiverged { iterations: it, residual: res });
        }
        if res <= tol {
            return Ok(KrylovSolution { x, iterations: it, residual: res });
        }
    }
    Err(Error::SolverDiverged { iterations: max_iter, residual: res })
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite `A`.
pub fn cg(
    apply: impl Fn(&[f64], &mut [f64]),
    inv_diag: &[f64],
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<KrylovSolution> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(KrylovSolution { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(inv_diag).map(|(a, d)| a * d).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = dot(&r, &z);
    let mut res = 1.0;
    for it in 1..=max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 || !pap.is_finite() {
            return Err(Error::SolverDiverged { iterations: it, residual: res });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            return Ok(KrylovSolution { x, iterations: it, residual: res });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverDiverged { iterations: max_iter, residual: res })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_band(n: usize, kl: usize, ku: usize, rng: &mut ChaCha8Rng) -> (BandMatrix, DMatrix<f64>) {
        let mut b = BandMatrix::zeros(n, kl, ku);
        let mut d = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i.saturating_sub(kl)..=(i + ku).min(n - 1) {
                let v: f64 = rng.random_range(-1.0..1.0);
                b.add(i, j, v);
                d[(i, j)] = v;
            }
        }
        (b, d)
    }

    #[test]
    fn band_lu_matches_dense_solve() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(n, kl, ku) in &[(1, 0, 0), (7, 2, 1), (20, 3, 3), (33, 0, 4), (40, 5, 0)] {
            let (band, dense) = random_band(n, kl, ku, &mut rng);
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let lu = band.factor().unwrap();
            let x = lu.solve(&b);
            let xt = lu.solve_transpose(&b);
            let bv = DVector::from_column_slice(&b);
            let r = &dense * DVector::from_column_slice(&x) - &bv;
            let rt = dense.transpose() * DVector::from_column_slice(&xt) - &bv;
            let scale = dense.norm() * DVector::from_column_slice(&x).norm().max(1.0);
            assert!(r.norm() <= 1e-10 * scale, "n={n}: residual {}", r.norm());
            assert!(rt.norm() <= 1e-10 * scale, "n={n}: transpose residual {}", rt.norm());
        }
    }

    #[test]
    fn mul_vec_matches_dense() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (band, dense) = random_band(15, 2, 3, &mut rng);
        let x: Vec<f64> = (0..15).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = band.mul_vec(&x);
        let yt = band.mul_vec_transpose(&x);
        let xv = DVector::from_column_slice(&x);
        let yd = &dense * &xv;
        let ytd = dense.transpose() * &xv;
        for i in 0..15 {
            assert!((y[i] - yd[i]).abs() < 1e-13);
            assert!((yt[i] - ytd[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let band = BandMatrix::zeros(4, 1, 1);
        assert!(matches!(band.factor(), Err(Error::SolverDiverged { .. })));
    }

    fn laplacian(n: usize, shift: f64) -> impl Fn(&[f64], &mut [f64]) {
        move |x: &[f64], out: &mut [f64]| {
            for i in 0..n {
                let l = if i > 0 { x[i - 1] } else { 0.0 };
                let r = if i + 1 < n { x[i + 1] } else { 0.0 };
                out[i] = (2.0 + shift) * x[i] - l - r;
            }
        }
    }

    #[test]
    fn krylov_solvers_converge() {
        let n = 50;
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.3).sin()).collect();
        let inv = vec![1.0 / 2.1; n];
        for sol in [
            cg(laplacian(n, 0.1), &inv, &b, 1e-12, 500).unwrap(),
            bicgstab(laplacian(n, 0.1), &inv, &b, 1e-12, 500).unwrap(),
        ] {
            let mut ax = vec![0.0; n];
            laplacian(n, 0.1)(&sol.x, &mut ax);
            let r: f64 = ax.iter().zip(&b).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            assert!(r <= 1e-11 * norm(&b));
        }
        let zero = cg(laplacian(n, 0.1), &inv, &vec![0.0; n], 1e-12, 10).unwrap();
        assert!(zero.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn krylov_reports_divergence() {
        let n = 200;
        let b = vec![1.0; n];
        let inv = vec![0.5; n];
        let err = bicgstab(laplacian(n, 0.0), &inv, &b, 1e-14, 3).unwrap_err();
        assert!(matches!(err, Error::SolverDiverged { iterations: 3, .. }));
    }
}
