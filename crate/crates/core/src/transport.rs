//! Numerical flat sections: adaptive parallel transport of ψ' = −A(z)ψ along
//! paths in the complex plane, monodromy matrices, and the closed-form
//! classical-limit sections of the CP^{n-1} connection (the Γ(s)^n Mellin
//! expansion, the constant vector, and the conjugation identity behind it).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::constants::log_gamma_taylor;
use crate::error::{Error, Result};
use crate::matrix::{matrix_exp_poly, ComplexMatrix, ExpKind};
use crate::quantum::{kappa_matrix, GradingOperator};
use crate::series::TruncatedSeries;

type C64 = Complex64;

/// A path in one complex plane: either a polyline through waypoints or a
/// circular arc (turns = +1 is one counterclockwise loop).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum PlanePath {
    Polyline {
        #[serde(with = "crate::wire::complex_vec")]
        waypoints: Vec<C64>,
    },
    Circle {
        #[serde(with = "crate::wire::complex_pair")]
        center: C64,
        radius: f64,
        #[serde(default)]
        start_angle: f64,
        turns: f64,
    },
}

impl PlanePath {
    pub fn segment(from: C64, to: C64) -> Self {
        PlanePath::Polyline {
            waypoints: vec![from, to],
        }
    }

    pub fn circle(center: C64, radius: f64, start_angle: f64, turns: f64) -> Self {
        PlanePath::Circle {
            center,
            radius,
            start_angle,
            turns,
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            PlanePath::Polyline { waypoints } => {
                if waypoints.len() < 2 {
                    return Err(Error::usage("polyline needs at least two waypoints"));
                }
            }
            PlanePath::Circle { radius, .. } => {
                if *radius <= 0.0 {
                    return Err(Error::usage("circle radius must be positive"));
                }
            }
        }
        Ok(())
    }

    /// Number of smooth pieces indexed by `point`/`velocity`.
    fn pieces(&self) -> usize {
        match self {
            PlanePath::Polyline { waypoints } => waypoints.len() - 1,
            PlanePath::Circle { .. } => 1,
        }
    }

    fn point(&self, piece: usize, t: f64) -> C64 {
        match self {
            PlanePath::Polyline { waypoints } => {
                let a = waypoints[piece];
                let b = waypoints[piece + 1];
                a + (b - a) * t
            }
            PlanePath::Circle {
                center,
                radius,
                start_angle,
                turns,
            } => {
                let phi = start_angle + 2.0 * std::f64::consts::PI * turns * t;
                center + C64::from_polar(*radius, phi)
            }
        }
    }

    fn velocity(&self, piece: usize, t: f64) -> C64 {
        match self {
            PlanePath::Polyline { waypoints } => waypoints[piece + 1] - waypoints[piece],
            PlanePath::Circle {
                radius,
                start_angle,
                turns,
                ..
            } => {
                let w = 2.0 * std::f64::consts::PI * turns;
                let phi = start_angle + w * t;
                C64::from_polar(*radius, phi) * C64::new(0.0, w)
            }
        }
    }

    pub fn start(&self) -> C64 {
        self.point(0, 0.0)
    }

    pub fn end(&self) -> C64 {
        self.point(self.pieces() - 1, 1.0)
    }

    pub fn is_closed(&self, tol: f64) -> bool {
        match self {
            PlanePath::Circle { turns, .. } => (turns - turns.round()).abs() < 1e-12,
            PlanePath::Polyline { .. } => {
                let scale = self.start().norm().max(self.end().norm()).max(1.0);
                (self.end() - self.start()).norm() <= tol * scale
            }
        }
    }

    pub fn reversed(&self) -> PlanePath {
        match self {
            PlanePath::Polyline { waypoints } => {
                let mut w = waypoints.clone();
                w.reverse();
                PlanePath::Polyline { waypoints: w }
            }
            PlanePath::Circle {
                center,
                radius,
                start_angle,
                turns,
            } => PlanePath::Circle {
                center: *center,
                radius: *radius,
                start_angle: start_angle + 2.0 * std::f64::consts::PI * turns,
                turns: -turns,
            },
        }
    }

    /// Pointwise check, at `samples` points per piece, that the path keeps a
    /// distance of at least `min_dist` from each declared singularity.
    pub fn check_avoids(&self, singular: &[C64], min_dist: f64, samples: usize) -> Result<()> {
        self.validate()?;
        for piece in 0..self.pieces() {
            for k in 0..=samples {
                let z = self.point(piece, k as f64 / samples as f64);
                for s in singular {
                    if (z - s).norm() < min_dist {
                        return Err(Error::usage(format!(
                            "path passes within {min_dist} of singularity at {s}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Basepoint plus a matrix whose columns are flat-section values there.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FlatFrame {
    #[serde(with = "crate::wire::complex_pair")]
    pub basepoint: C64,
    pub columns: ComplexMatrix,
}

impl FlatFrame {
    pub fn new(basepoint: C64, columns: ComplexMatrix) -> Result<Self> {
        let n = columns.rows();
        if columns.cols() != n || columns.rank(1e-12)? < n {
            return Err(Error::usage("flat frame columns must be invertible"));
        }
        Ok(FlatFrame { basepoint, columns })
    }
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 6] = [0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
// b5 - b4, applied to the stages for the embedded error estimate
const DP_ERR: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

const MAX_STEPS: usize = 1_000_000;
const MIN_STEP: f64 = 1e-13;

fn axpy(y: &mut [C64], a: f64, x: &[C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += xi * a;
    }
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

/// Solve ψ'(z) = −A(z)ψ(z) along `path` with an embedded Dormand-Prince 5(4)
/// pair; local error per unit arclength is kept at or below `tol`,
/// relative to the solution magnitude.  Deterministic for fixed inputs.
pub fn transport<F>(conn: F, path: &PlanePath, v0: &[C64], tol: f64) -> Result<Vec<C64>>
where
    F: Fn(C64) -> Result<ComplexMatrix>,
{
    transport_impl(conn, path, v0, tol, &mut |_, _| {})
}

/// As `transport`, but also reports `(t, ψ)` at every accepted step, with
/// `t` the global path parameter in [0, 1].
pub fn transport_traced<F>(
    conn: F,
    path: &PlanePath,
    v0: &[C64],
    tol: f64,
) -> Result<(Vec<C64>, Vec<(f64, Vec<C64>)>)>
where
    F: Fn(C64) -> Result<ComplexMatrix>,
{
    let mut trace = Vec::new();
    let out = transport_impl(conn, path, v0, tol, &mut |t, y| {
        trace.push((t, y.to_vec()));
    })?;
    Ok((out, trace))
}

fn transport_impl<F>(
    conn: F,
    path: &PlanePath,
    v0: &[C64],
    tol: f64,
    observe: &mut dyn FnMut(f64, &[C64]),
) -> Result<Vec<C64>>
where
    F: Fn(C64) -> Result<ComplexMatrix>,
{
    path.validate()?;
    if tol <= 0.0 {
        return Err(Error::usage("transport tolerance must be positive"));
    }
    let dim = v0.len();
    let rhs = |piece: usize, t: f64, y: &[C64]| -> Result<Vec<C64>> {
        let z = path.point(piece, t);
        let a = conn(z)?;
        if a.rows() != dim || a.cols() != dim {
            return Err(Error::usage("connection matrix does not match vector size"));
        }
        let mut out = a.mul_vec(y);
        for o in out.iter_mut() {
            *o = -*o;
        }
        Ok(out.iter().map(|&w| w * path.velocity(piece, t)).collect())
    };

    let pieces = path.pieces();
    let mut y = v0.to_vec();
    let mut steps_used = 0usize;
    observe(0.0, &y);
    for piece in 0..pieces {
        let mut t = 0.0f64;
        let mut h = 0.1f64;
        while t < 1.0 {
            if steps_used >= MAX_STEPS {
                return Err(Error::Transport {
                    position: path.point(piece, t),
                    reason: format!("step budget of {MAX_STEPS} exhausted"),
                });
            }
            if h < MIN_STEP {
                return Err(Error::Transport {
                    position: path.point(piece, t),
                    reason: "step size underflow (singularity on or near the path?)".to_string(),
                });
            }
            let h_eff = h.min(1.0 - t);
            let mut k: Vec<Vec<C64>> = Vec::with_capacity(7);
            k.push(rhs(piece, t, &y)?);
            for stage in 0..6 {
                let mut ys = y.clone();
                for (j, kj) in k.iter().enumerate() {
                    let a = DP_A[stage][j];
                    if a != 0.0 {
                        axpy(&mut ys, a * h_eff, kj);
                    }
                }
                k.push(rhs(piece, t + DP_C[stage] * h_eff, &ys)?);
            }
            let mut y5 = y.clone();
            let mut err_vec = vec![C64::ZERO; dim];
            for (j, kj) in k.iter().enumerate() {
                if DP_B5[j] != 0.0 {
                    axpy(&mut y5, DP_B5[j] * h_eff, kj);
                }
                if DP_ERR[j] != 0.0 {
                    axpy(&mut err_vec, DP_ERR[j] * h_eff, kj);
                }
            }
            let err = vec_norm(&err_vec);
            let arc = (path.point(piece, t + h_eff) - path.point(piece, t)).norm();
            let budget = tol * arc.max(1e-300) * vec_norm(&y).max(1.0);
            steps_used += 1;
            if err <= budget {
                t += h_eff;
                y = y5;
                observe((piece as f64 + t) / pieces as f64, &y);
            }
            let ratio = if err > 0.0 { budget / err } else { 10.0 };
            h = (h_eff * (0.9 * ratio.powf(0.2)).clamp(0.2, 5.0)).min(1.0);
        }
    }
    Ok(y)
}

/// Monodromy of a closed loop: the operator sending flat-section values at
/// the basepoint to their continuation, built column by column.
pub fn monodromy<F>(conn: F, loop_path: &PlanePath, tol: f64) -> Result<ComplexMatrix>
where
    F: Fn(C64) -> Result<ComplexMatrix>,
{
    if !loop_path.is_closed(1e-9) {
        return Err(Error::usage("monodromy requires a closed loop"));
    }
    let probe = conn(loop_path.start())?;
    let dim = probe.rows();
    let mut cols = Vec::with_capacity(dim);
    for j in 0..dim {
        let mut e = vec![C64::ZERO; dim];
        e[j] = C64::ONE;
        cols.push(transport(&conn, loop_path, &e, tol)?);
    }
    Ok(ComplexMatrix::from_fn(dim, dim, |i, j| cols[j][i]))
}

fn principal_log_of_minus(u: C64) -> Result<C64> {
    if u == C64::ZERO {
        return Err(Error::domain("u = 0 is outside the branch domain"));
    }
    if u.im == 0.0 && u.re > 0.0 {
        return Err(Error::domain(
            "u on the positive real axis (branch cut of log(-u))",
        ));
    }
    Ok((-u).ln())
}

/// Coefficients ψ_cl,1 .. ψ_cl,n (the h^0 .. h^{n-1} components) of the
/// classical-limit section, read off the expansion of
/// (−u)^{(1−n)/2} (−u)^{ns} Γ(s)^n in powers of 1/s with principal branches
/// on C ∖ R_{>=0}.  At u = −1 these are the Taylor coefficients of Γ(1+s)^n.
pub fn psi_cl_coeffs(n: usize, u: C64) -> Result<Vec<C64>> {
    if n < 1 {
        return Err(Error::usage("psi_cl_coeffs requires n >= 1"));
    }
    let w = principal_log_of_minus(u)?;
    // T(s) = exp(n w s) Γ(1+s)^n truncated at order n
    let lg = log_gamma_taylor(n)?;
    let mut arg = lg.scale(C64::new(n as f64, 0.0));
    if n >= 2 {
        let mut lin = vec![C64::ZERO; n];
        lin[1] = w * n as f64;
        arg = arg.add(&TruncatedSeries::from_coeffs(crate::series::Var::S, lin)?)?;
    }
    let t = arg.exp()?;
    let pref = (w * ((1.0 - n as f64) / 2.0)).exp();
    let mut out = Vec::with_capacity(n);
    for j in 1..=n {
        // ψ_cl,j = (−u)^{n−j} · (−u)^{(1−n)/2} · [s^{j-1}] T(s)
        let pw = (w * ((n - j) as f64)).exp();
        out.push(pw * pref * t.coeff(j - 1));
    }
    Ok(out)
}

/// The u-independent vector of Prop-style constancy:
/// exp(log(−u)·Gr) · exp((log(−u)/u)·K) · ψ_cl(u), with K the classical
/// κ-matrix.  Equals the Taylor coefficients of Γ(1+s)^n for every admissible
/// u.
pub fn psi_const(n: usize, u: C64) -> Result<Vec<C64>> {
    if n < 2 {
        return Err(Error::usage("psi_const requires n >= 2"));
    }
    let w = principal_log_of_minus(u)?;
    let psi = psi_cl_coeffs(n, u)?;
    let k = kappa_matrix(n)?;
    let gr = GradingOperator::cpn(n)?.to_matrix();
    let m_nil = matrix_exp_poly(&k.scale(w / u), ExpKind::Nilpotent)?;
    let m_diag = matrix_exp_poly(&gr.scale(w), ExpKind::Diagonal)?;
    Ok(m_diag.mul_vec(&m_nil.mul_vec(&psi)))
}

/// Conjugating factor P(u) = exp(log(−u)·Gr) exp((log(−u)/u)·K) for real
/// u < 0.
fn conjugating_factor(k: &ComplexMatrix, gr: &ComplexMatrix, u: f64) -> Result<ComplexMatrix> {
    let w = C64::new((-u).ln(), 0.0);
    let m_nil = matrix_exp_poly(&k.scale(w / u), ExpKind::Nilpotent)?;
    let m_diag = matrix_exp_poly(&gr.scale(w), ExpKind::Diagonal)?;
    Ok(m_diag.mul(&m_nil))
}

/// Max-norm residual of (d/du + u^{-2}K + u^{-1}Gr)v against
/// P(u)^{-1} d/du (P(u) v) for constant v, the d/du side evaluated by central
/// differences on the exactly computable factors.
pub fn conjugation_residual(
    k: &ComplexMatrix,
    gr: &ComplexMatrix,
    u: f64,
    v: &[C64],
) -> Result<f64> {
    if u >= 0.0 {
        return Err(Error::domain("conjugation identity is checked at real u < 0"));
    }
    let lhs = {
        let a = k.scale(C64::new(1.0 / (u * u), 0.0));
        let b = gr.scale(C64::new(1.0 / u, 0.0));
        a.add(&b).mul_vec(v)
    };
    let delta = 1e-6 * u.abs();
    let plus = conjugating_factor(k, gr, u + delta)?.mul_vec(v);
    let minus = conjugating_factor(k, gr, u - delta)?.mul_vec(v);
    let diff: Vec<C64> = plus
        .iter()
        .zip(&minus)
        .map(|(p, m)| (p - m) / (2.0 * delta))
        .collect();
    // P(u)^{-1} = exp(-(w/u)K) exp(-w Gr)
    let w = C64::new((-u).ln(), 0.0);
    let inv = matrix_exp_poly(&k.scale(-w / u), ExpKind::Nilpotent)?
        .mul(&matrix_exp_poly(&gr.scale(-w), ExpKind::Diagonal)?);
    let rhs = inv.mul_vec(&diff);
    Ok(lhs
        .iter()
        .zip(&rhs)
        .map(|(a, b)| (a - b).norm())
        .fold(0.0, f64::max))
}

/// The CP^{n-1} instance of the conjugation identity.
pub fn check_conjugation_identity(n: usize, u: f64, v: &[C64]) -> Result<f64> {
    let k = kappa_matrix(n)?;
    let gr = GradingOperator::cpn(n)?.to_matrix();
    conjugation_residual(&k, &gr, u, v)
}
