//! Gauss-Jacobi rules on `[0, 1]` with weight `x^b`.

use nalgebra::{DMatrix, SymmetricEigen};

/// Nodes and weights with `sum w_i f(x_i) ~ int_0^1 x^b f(x) dx`, `b > -1`.
///
/// Golub-Welsch on the Jacobi matrix of `(1-y)^0 (1+y)^b` on `[-1, 1]`,
/// followed by Newton polishing of the nodes and Christoffel weights.
pub fn gauss_jacobi_unit(n: usize, b: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1 && b > -1.0);
    let (alpha, beta) = recurrence(n, b);
    let mut jac = DMatrix::zeros(n, n);
    for k in 0..n {
        jac[(k, k)] = alpha[k];
        if k + 1 < n {
            let off = beta[k + 1].sqrt();
            jac[(k, k + 1)] = off;
            jac[(k + 1, k)] = off;
        }
    }
    let mut ys: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    ys.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    let mu0 = 2f64.powf(b + 1.0) / (b + 1.0);
    let mut xs = Vec::with_capacity(n);
    let mut ws = Vec::with_capacity(n);
    for y0 in ys {
        let mut y = y0;
        for _ in 0..3 {
            let (p, dp, _) = orthonormal(&alpha, &beta, mu0, n, y);
            if dp == 0.0 {
                break;
            }
            let step = p / dp;
            y -= step;
            if step.abs() <= 1e-16 * (1.0 + y.abs()) {
                break;
            }
        }
        let (_, _, sum_sq) = orthonormal(&alpha, &beta, mu0, n, y);
        xs.push(0.5 * (1.0 + y));
        ws.push(1.0 / sum_sq * 2f64.powf(-(b + 1.0)));
    }
    (xs, ws)
}

/// Recurrence coefficients `alpha_0..alpha_{n-1}`, `beta_1..beta_n` (index 0 unused).
fn recurrence(n: usize, b: f64) -> (Vec<f64>, Vec<f64>) {
    let a = 0.0;
    let ab = a + b;
    let mut alpha = vec![0.0; n];
    let mut beta = vec![0.0; n + 1];
    alpha[0] = (b - a) / (ab + 2.0);
    for (k, al) in alpha.iter_mut().enumerate().skip(1) {
        let k = k as f64;
        *al = (b * b - a * a) / ((2.0 * k + ab) * (2.0 * k + ab + 2.0));
    }
    if n >= 1 {
        beta[1] = 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + ab).powi(2) * (3.0 + ab));
    }
    for (k, be) in beta.iter_mut().enumerate().skip(2) {
        let k = k as f64;
        let s = 2.0 * k + ab;
        *be = 4.0 * k * (k + a) * (k + b) * (k + ab) / (s * s * (s + 1.0) * (s - 1.0));
    }
    (alpha, beta)
}

/// Orthonormal `p_n(y)`, its derivative, and `sum_{k<n} p_k(y)^2`.
fn orthonormal(alpha: &[f64], beta: &[f64], mu0: f64, n: usize, y: f64) -> (f64, f64, f64) {
    let mut p_prev = 0.0;
    let mut dp_prev = 0.0;
    let mut p = 1.0 / mu0.sqrt();
    let mut dp = 0.0;
    let mut sum_sq = 0.0;
    for k in 0..n {
        sum_sq += p * p;
        let sb_next = beta[k + 1].sqrt();
        let sb = if k == 0 { 0.0 } else { beta[k].sqrt() };
        let p_next = ((y - alpha[k]) * p - sb * p_prev) / sb_next;
        let dp_next = (p + (y - alpha[k]) * dp - sb * dp_prev) / sb_next;
        p_prev = p;
        dp_prev = dp;
        p = p_next;
        dp = dp_next;
    }
    (p, dp, sum_sq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn weights_integrate_monomials() {
        for &b in &[-0.75, -0.5, -0.25, 0.0, 0.5, 0.9] {
            let (x, w) = gauss_jacobi_unit(12, b);
            for m in 0..(2 * 12) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(m)).sum();
                assert_relative_eq!(q, 1.0 / (m as f64 + b + 1.0), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn legendre_case_matches_known_nodes() {
        let (x, w) = gauss_jacobi_unit(2, 0.0);
        let d = 0.5 / 3f64.sqrt();
        assert_relative_eq!(x[0], 0.5 - d, epsilon = 1e-15);
        assert_relative_eq!(x[1], 0.5 + d, epsilon = 1e-15);
        assert_relative_eq!(w[0], 0.5, epsilon = 1e-15);
    }

    #[test]
    fn nodes_are_sorted_and_interior() {
        let (x, w) = gauss_jacobi_unit(128, -0.6);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        assert!(x[0] > 0.0 && x[127] < 1.0);
        assert!(w.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn singular_weight_integrates_smooth_function() {
        // int_0^1 x^{-1/2} cos(x) dx = sqrt(2 pi) C(sqrt(2/pi)), C the Fresnel cosine integral
        let (x, w) = gauss_jacobi_unit(20, -0.5);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert_relative_eq!(q, 1.809_048_475_800_544, max_relative = 1e-14);
    }
}
