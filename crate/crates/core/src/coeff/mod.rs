//! Coefficient profiles `a_l(x_l)` and the hypotheses of the resolvent
//! estimate on the imaginary axis.

pub mod expr;

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::BoxDomain;

pub use expr::{differentiate, parse_expr, parse_expr_xyz, Expr};

/// Default number of Chebyshev sample points per axis.
pub const DEFAULT_SAMPLES: usize = 1024;

/// Coefficient `a_l` along one axis, with its symbolic derivative.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientProfile {
    /// Axis index, 0-based.
    pub axis: usize,
    pub expr: Expr,
    pub dexpr: Expr,
    /// Right end of the interval `[0, length]`.
    pub length: f64,
}

impl CoefficientProfile {
    pub fn new(axis: usize, expr: Expr, length: f64) -> Self {
        let dexpr = expr.differentiate();
        Self { axis, expr, dexpr, length }
    }

    pub fn parse(axis: usize, text: &str, length: f64) -> Result<Self> {
        Ok(Self::new(axis, parse_expr(text)?, length))
    }

    pub fn constant(axis: usize, value: f64, length: f64) -> Self {
        Self::new(axis, Expr::Num(value), length)
    }

    /// Profiles for every axis of `domain`, parsed from one expression each.
    pub fn parse_all<S: AsRef<str>>(texts: &[S], domain: &BoxDomain) -> Result<Vec<Self>> {
        if texts.len() != domain.dims() {
            return Err(Error::InvalidInput(format!(
                "{} coefficient expressions for a {}-dimensional box",
                texts.len(),
                domain.dims()
            )));
        }
        texts
            .iter()
            .enumerate()
            .map(|(axis, t)| Self::parse(axis, t.as_ref(), domain.lengths()[axis]))
            .collect()
    }

    pub fn is_constant(&self) -> bool {
        self.expr.is_constant()
    }

    pub fn value(&self, x: f64) -> Result<f64> {
        self.expr.eval_at(x)
    }

    pub fn derivative(&self, x: f64) -> Result<f64> {
        self.dexpr.eval_at(x)
    }

    /// Largest deviation between the symbolic derivative and a central
    /// difference with step `h`, relative to `1 + |a'(x)|`, over `points`.
    pub fn derivative_mismatch(&self, points: &[f64], h: f64) -> Result<f64> {
        let mut worst = 0.0f64;
        for &x in points {
            let fd = (self.value(x + h)? - self.value(x - h)?) / (2.0 * h);
            let d = self.derivative(x)?;
            worst = worst.max((fd - d).abs() / (1.0 + d.abs()));
        }
        Ok(worst)
    }
}

/// Chebyshev-Lobatto points on `[0, length]`.
pub fn chebyshev_points(length: f64, count: usize) -> Vec<f64> {
    assert!(count >= 2);
    (0..count)
        .map(|k| 0.5 * length * (1.0 - (PI * k as f64 / (count - 1) as f64).cos()))
        .collect()
}

/// Per-direction Poincare constant of a box: `max_l L_l / pi`.
pub fn poincare_constant(domain: &BoxDomain) -> f64 {
    domain.lengths().iter().fold(0.0f64, |m, &l| m.max(l)) / PI
}

/// Per-axis sampled extrema entering the report.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AxisBounds {
    pub inf_abs_a: f64,
    pub inf_a_sq: f64,
    pub min_a: f64,
    pub sup_abs_da: f64,
    /// `sup |d/dx (a^2)|`.
    pub sup_abs_da_sq: f64,
}

/// Every constant of the resolvent estimate for one coefficient set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub c_omega: f64,
    pub c_a: f64,
    pub phi_sup: f64,
    /// `inf a_l^2 - (sqrt(C_Omega)/2) sup |d(a_l^2)|`, one per active axis.
    pub margins: Vec<f64>,
    pub k_const: f64,
    /// Present only when `k_const > 0`.
    pub tau: Option<f64>,
    pub theta: Option<f64>,
    /// `kappa(s1^2) = min(s1^2, kappa_floor)`.
    pub kappa_floor: f64,
    pub margins_positive: bool,
    pub k_positive: bool,
    /// `a_l >= m > 0` on the sampled closure; informational.
    pub coefficients_positive: bool,
    pub pass: bool,
    pub samples: usize,
    pub axes: Vec<AxisBounds>,
    pub domain_note: &'static str,
}

impl ConditionReport {
    pub fn kappa_at(&self, s1_sq: f64) -> f64 {
        s1_sq.min(self.kappa_floor)
    }
}

const DOMAIN_NOTE: &str = "box domain: corners are not smooth; the per-direction Poincare \
inequality with C = max L/pi holds by one-dimensional slicing";

/// Evaluates the hypotheses and constants for `profiles` on `domain`,
/// sampling each coefficient at `samples` Chebyshev points.
pub fn check_conditions(
    profiles: &[CoefficientProfile],
    domain: &BoxDomain,
    samples: usize,
) -> Result<ConditionReport> {
    if samples < 64 {
        return Err(Error::InvalidInput(format!("need at least 64 samples per axis, got {samples}")));
    }
    if profiles.len() != domain.dims() {
        return Err(Error::InvalidInput(format!(
            "{} profiles for a {}-dimensional box",
            profiles.len(),
            domain.dims()
        )));
    }
    let c_omega = poincare_constant(domain);
    let mut axes = Vec::with_capacity(profiles.len());
    for (axis, p) in profiles.iter().enumerate() {
        let mut b = AxisBounds {
            inf_abs_a: f64::INFINITY,
            inf_a_sq: f64::INFINITY,
            min_a: f64::INFINITY,
            sup_abs_da: 0.0,
            sup_abs_da_sq: 0.0,
        };
        for x in chebyshev_points(domain.lengths()[axis], samples) {
            let a = p.value(x)?;
            let da = p.derivative(x)?;
            b.inf_abs_a = b.inf_abs_a.min(a.abs());
            b.inf_a_sq = b.inf_a_sq.min(a * a);
            b.min_a = b.min_a.min(a);
            b.sup_abs_da = b.sup_abs_da.max(da.abs());
            b.sup_abs_da_sq = b.sup_abs_da_sq.max((2.0 * a * da).abs());
        }
        axes.push(b);
    }

    let delta_half = 0.5 * c_omega.sqrt();
    let margins: Vec<f64> = axes.iter().map(|b| b.inf_a_sq - delta_half * b.sup_abs_da_sq).collect();
    // |Phi(x)|^2 = sum_l a_l'(x_l)^2 and the axes vary independently
    let phi_sup = axes.iter().map(|b| b.sup_abs_da * b.sup_abs_da).sum::<f64>().sqrt();
    let inf_abs = axes.iter().fold(f64::INFINITY, |m, b| m.min(b.inf_abs_a));
    let c_a = 1.0 / inf_abs;
    let coupling = 0.5 * phi_sup * phi_sup * c_omega * c_omega * c_a * c_a;
    let coupling = if coupling.is_nan() { f64::INFINITY } else { coupling };
    let k_const = 0.5 - coupling;

    let (tau, theta) = if k_const > 0.0 {
        let tau = 0.5 / (1.0 + coupling * 4.0 / k_const);
        (Some(tau), Some(2.0 * 1.0f64.max((1.0 / tau).sqrt())))
    } else {
        (None, None)
    };
    let margins_positive = margins.iter().all(|&m| m > 0.0);
    let k_positive = k_const > 0.0;
    let kappa_floor = margins.iter().fold(f64::INFINITY, |m, &v| m.min(v));
    Ok(ConditionReport {
        c_omega,
        c_a,
        phi_sup,
        margins,
        k_const,
        tau,
        theta,
        kappa_floor,
        margins_positive,
        k_positive,
        coefficients_positive: axes.iter().all(|b| b.min_a > 0.0),
        pass: margins_positive && k_positive,
        samples,
        axes,
        domain_note: DOMAIN_NOTE,
    })
}
