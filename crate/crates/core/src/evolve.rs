//! The semi-discrete evolution `dv/dt = G v` with
//! `G = sum_l D_l Vec_l P_alpha(T)`, the divergence of the vector channel.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frac::FracPowerOperator;
use crate::grid::{apply_d, Grid, RealField};

pub use crate::grid::divergence;

/// Largest vector-channel leak the generator accepts.
pub const J_LEAK_TOLERANCE: f64 = 1e-9;
/// Largest spectral abscissa accepted as dissipative.
pub const DISSIPATIVITY_TOLERANCE: f64 = 1e-8;
/// Allowed growth of the L2 norm per step before a trace is marked non-monotone.
pub const MONOTONE_SLACK: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "crank-nicolson")]
    CrankNicolson,
    #[serde(rename = "explicit-rk4")]
    ExplicitRk4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionConfig {
    pub dt: f64,
    pub t_end: f64,
    pub scheme: Scheme,
    /// Store a snapshot every this many steps; 0 stores none.
    pub snapshot_every: usize,
}

impl EvolutionConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidInput("dt and t_end must be positive".into()));
        }
        if self.dt >= self.t_end {
            return Err(Error::InvalidInput(format!("dt = {} must be smaller than t_end = {}", self.dt, self.t_end)));
        }
        Ok(())
    }

    /// Number of steps; the last one is shortened to land on `t_end`.
    fn steps(&self) -> usize {
        let k = self.t_end / self.dt;
        let r = k.round();
        if (k - r).abs() <= 1e-9 * k {
            r as usize
        } else {
            k.ceil() as usize
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvolutionTrace {
    pub times: Vec<f64>,
    pub l2_series: Vec<f64>,
    pub snapshot_times: Vec<f64>,
    pub snapshots: Vec<RealField>,
    pub final_state: RealField,
    /// No step increased the L2 norm by more than `MONOTONE_SLACK` (relative).
    pub monotone: bool,
}

/// The dense generator together with its spectral data.
#[derive(Debug, Clone)]
pub struct Generator {
    pub grid: Grid,
    pub alpha: f64,
    /// 1 for the literal form, 2 for the `beta = 2 alpha - 1` correspondence.
    pub scale: f64,
    pub matrix: DMatrix<f64>,
    pub abscissa: f64,
    pub spectral_radius: f64,
    /// Largest step for which RK4 is stable on every eigenvalue.
    pub rk4_bound: f64,
    eigenvalues: Vec<(f64, f64)>,
}

/// Step size, LU of `I - dt/2 G`, and `I + dt/2 G`.
type CnFactor = (f64, nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, DMatrix<f64>);

fn rk4_amplification(re: f64, im: f64) -> f64 {
    // R(z) = 1 + z + z^2/2 + z^3/6 + z^4/24 by Horner in complex arithmetic
    let (mut pr, mut pi) = (1.0 / 24.0, 0.0);
    for c in [1.0 / 6.0, 0.5, 1.0, 1.0] {
        let (nr, ni) = (pr * re - pi * im + c, pr * im + pi * re);
        pr = nr;
        pi = ni;
    }
    (pr * pr + pi * pi).sqrt()
}

impl Generator {
    /// `G = scale * sum_l D_l M_vec[l]`; refuses operators whose vector
    /// channel leaked and generators that are not dissipative.
    pub fn from_operator(fp: &FracPowerOperator, scale: f64) -> Result<Self> {
        if fp.j_leak > J_LEAK_TOLERANCE {
            return Err(Error::JLeak { leak: fp.j_leak, tolerance: J_LEAK_TOLERANCE });
        }
        let grid = fp.grid;
        let n = grid.len();
        let mut g = DMatrix::zeros(n, n);
        let mut col = vec![0.0; n];
        for axis in 0..grid.dims() {
            for c in 0..n {
                let src: Vec<f64> = fp.m_vec[axis].column(c).iter().copied().collect();
                apply_d(&grid, axis, &src, &mut col);
                let mut dst = g.column_mut(c);
                for (d, v) in dst.iter_mut().zip(&col) {
                    *d += scale * v;
                }
            }
        }
        Self::from_matrix(grid, fp.alpha, scale, g)
    }

    pub fn from_matrix(grid: Grid, alpha: f64, scale: f64, matrix: DMatrix<f64>) -> Result<Self> {
        let eig = matrix.clone().complex_eigenvalues();
        let eigenvalues: Vec<(f64, f64)> = eig.iter().map(|z| (z.re, z.im)).collect();
        if eigenvalues.iter().any(|(r, i)| !(r.is_finite() && i.is_finite())) {
            return Err(Error::NotDissipative { abscissa: f64::NAN });
        }
        let abscissa = eigenvalues.iter().fold(f64::NEG_INFINITY, |m, e| m.max(e.0));
        if abscissa > DISSIPATIVITY_TOLERANCE {
            return Err(Error::NotDissipative { abscissa });
        }
        let spectral_radius = eigenvalues.iter().fold(0.0f64, |m, (r, i)| m.max(r.hypot(*i)));
        let stable = |dt: f64| {
            eigenvalues.iter().all(|&(r, i)| rk4_amplification(r * dt, i * dt) <= 1.0 + 1e-12)
        };
        let rk4_bound = if spectral_radius == 0.0 {
            f64::INFINITY
        } else {
            let (mut lo, mut hi) = (0.0, 3.0 / spectral_radius);
            if stable(hi) {
                hi
            } else {
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if stable(mid) {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                lo
            }
        };
        Ok(Self { grid, alpha, scale, matrix, abscissa, spectral_radius, rk4_bound, eigenvalues })
    }

    /// Eigenvalues as `(re, im)` pairs.
    pub fn eigenvalues(&self) -> &[(f64, f64)] {
        &self.eigenvalues
    }

    pub fn apply(&self, v: &RealField) -> RealField {
        let x = DVector::from_column_slice(&v.values);
        RealField { grid: self.grid, values: (&self.matrix * x).iter().copied().collect() }
    }

    pub fn evolve(&self, v0: &RealField, cfg: &EvolutionConfig) -> Result<EvolutionTrace> {
        cfg.validate()?;
        if v0.grid != self.grid {
            return Err(Error::InvalidInput("initial field lives on a different grid".into()));
        }
        let steps = cfg.steps();
        if cfg.scheme == Scheme::ExplicitRk4 && cfg.dt > self.rk4_bound {
            return Err(Error::Stability { dt: cfg.dt, bound: self.rk4_bound });
        }
        let n = self.grid.len();
        let mut v = DVector::from_column_slice(&v0.values);
        let mut trace = EvolutionTrace {
            times: vec![0.0],
            l2_series: vec![v0.l2()],
            snapshot_times: Vec::new(),
            snapshots: Vec::new(),
            final_state: v0.clone(),
            monotone: true,
        };
        if cfg.snapshot_every > 0 {
            trace.snapshot_times.push(0.0);
            trace.snapshots.push(v0.clone());
        }
        let reference = v0.l2();
        let id = DMatrix::<f64>::identity(n, n);
        let mut cn_cache: Option<CnFactor> = None;
        let mut t = 0.0;
        for step in 1..=steps {
            let dt = if step == steps { cfg.t_end - t } else { cfg.dt };
            v = match cfg.scheme {
                Scheme::CrankNicolson => {
                    if cn_cache.as_ref().is_none_or(|(h, _, _)| *h != dt) {
                        let lhs = &id - &self.matrix * (0.5 * dt);
                        let rhs = &id + &self.matrix * (0.5 * dt);
                        cn_cache = Some((dt, lhs.lu(), rhs));
                    }
                    let (_, lu, rhs) = cn_cache.as_ref().expect("cache filled");
                    lu.solve(&(rhs * &v)).ok_or(Error::SolverDiverged { iterations: step, residual: f64::INFINITY })?
                }
                Scheme::ExplicitRk4 => {
                    let k1 = &self.matrix * &v;
                    let k2 = &self.matrix * (&v + &k1 * (0.5 * dt));
                    let k3 = &self.matrix * (&v + &k2 * (0.5 * dt));
                    let k4 = &self.matrix * (&v + &k3 * dt);
                    &v + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
                }
            };
            t = if step == steps { cfg.t_end } else { t + dt };
            let field = RealField { grid: self.grid, values: v.iter().copied().collect() };
            let l2 = field.l2();
            if !l2.is_finite() {
                return Err(Error::SolverDiverged { iterations: step, residual: l2 });
            }
            if l2 > trace.l2_series[step - 1] + MONOTONE_SLACK * reference {
                trace.monotone = false;
            }
            trace.times.push(t);
            trace.l2_series.push(l2);
            if cfg.snapshot_every > 0 && step % cfg.snapshot_every == 0 {
                trace.snapshot_times.push(t);
                trace.snapshots.push(field.clone());
            }
            if step == steps {
                trace.final_state = field;
            }
        }
        Ok(trace)
    }
}
