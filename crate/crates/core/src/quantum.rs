//! The meromorphic quantum connection of CP^{n-1} at a fixed Novikov
//! parameter q, in the basis {1, h, .., h^{n-1}}:
//!
//!   ∇_{∂/∂u} = ∂/∂u + u^{-2} A_{-2}(n,q) + u^{-1} Gr,
//!   ∇_{∂/∂q} = ∂/∂q − (qu)^{-1} Sh(n,q),
//!
//! where A_{-2} = n·Sh, Sh is the h-multiplication (shift) matrix with q in
//! the top-right corner, and Gr = diag((1-n)/2, .., (n-1)/2).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::DEFAULT_TOL;

type C64 = Complex64;

/// d + (Σ_k A_k u^k) du with finitely many terms and pole order <= 2 at 0.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MeromorphicConnection {
    pub rank: usize,
    pub terms: BTreeMap<i32, ComplexMatrix>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub meta: Option<ConnectionMeta>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConnectionMeta {
    pub n: usize,
    #[serde(with = "crate::wire::complex_pair")]
    pub q: C64,
}

impl MeromorphicConnection {
    pub fn new(
        rank: usize,
        terms: BTreeMap<i32, ComplexMatrix>,
        meta: Option<ConnectionMeta>,
    ) -> Result<Self> {
        for (&k, m) in &terms {
            if k < -2 {
                return Err(Error::usage(format!(
                    "pole order above 2: term u^{k} present"
                )));
            }
            if m.rows() != rank || m.cols() != rank {
                return Err(Error::usage(format!("term u^{k} is not rank x rank")));
            }
        }
        Ok(MeromorphicConnection { rank, terms, meta })
    }

    pub fn term(&self, k: i32) -> Option<&ComplexMatrix> {
        self.terms.get(&k)
    }

    /// Evaluate Σ_k A_k u^k; domain error at u = 0 when negative powers are
    /// present.
    pub fn matrix_at(&self, u: C64) -> Result<ComplexMatrix> {
        let has_pole = self.terms.keys().any(|&k| k < 0);
        if u == C64::ZERO && has_pole {
            return Err(Error::domain("connection matrix evaluated at the pole u=0"));
        }
        let mut out = ComplexMatrix::zeros(self.rank, self.rank);
        for (&k, m) in &self.terms {
            out = out.add(&m.scale(u.powi(k)));
        }
        Ok(out)
    }
}

/// Diagonal grading operator; entries differ by integers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradingOperator {
    pub diagonal: Vec<f64>,
}

impl GradingOperator {
    pub fn new(diagonal: Vec<f64>) -> Result<Self> {
        for w in diagonal.windows(2) {
            let gap = w[1] - w[0];
            if (gap - gap.round()).abs() > 1e-12 {
                return Err(Error::usage(
                    "grading diagonal entries must differ by integers",
                ));
            }
        }
        Ok(GradingOperator { diagonal })
    }

    /// Gr for CP^{n-1}: (k - d)/2 on H^k with d = n-1, so h^j gets j-(n-1)/2.
    pub fn cpn(n: usize) -> Result<Self> {
        if n < 1 {
            return Err(Error::usage("grading requires n >= 1"));
        }
        let shift = (n as f64 - 1.0) / 2.0;
        Self::new((0..n).map(|j| j as f64 - shift).collect())
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        ComplexMatrix::diagonal(
            &self
                .diagonal
                .iter()
                .map(|&x| C64::new(x, 0.0))
                .collect::<Vec<_>>(),
        )
    }
}

/// The matrix of h-multiplication on C[h]/(h^n - q): ones on the subdiagonal
/// and q in the top-right corner; its n-th power is q times the identity.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ShiftMatrix {
    pub rank: usize,
    #[serde(with = "crate::wire::complex_pair")]
    pub corner: C64,
}

impl ShiftMatrix {
    pub fn new(rank: usize, corner: C64) -> Result<Self> {
        if rank < 1 {
            return Err(Error::usage("shift matrix rank must be >= 1"));
        }
        Ok(ShiftMatrix { rank, corner })
    }

    pub fn to_matrix(&self) -> ComplexMatrix {
        let n = self.rank;
        ComplexMatrix::from_fn(n, n, |i, j| {
            if n == 1 {
                // h = q^{1/1} · 1 degenerates to multiplication by q
                self.corner
            } else if i == 0 && j == n - 1 {
                self.corner
            } else if j + 1 == i {
                C64::ONE
            } else {
                C64::ZERO
            }
        })
    }
}

/// ∇_{∂/∂u} of CP^{n-1} at parameter q (q = 0 gives the classical limit).
pub fn build_cpn_u_connection(n: usize, q: C64) -> Result<MeromorphicConnection> {
    if n < 2 {
        return Err(Error::usage("build_cpn_u_connection requires n >= 2"));
    }
    let shift = ShiftMatrix::new(n, q)?;
    let a_m2 = shift.to_matrix().scale(C64::new(n as f64, 0.0));
    let a_m1 = GradingOperator::cpn(n)?.to_matrix();
    let mut terms = BTreeMap::new();
    terms.insert(-2, a_m2);
    terms.insert(-1, a_m1);
    MeromorphicConnection::new(n, terms, Some(ConnectionMeta { n, q }))
}

/// The classical cup-product matrix by the κ class: A_{-2} at q = 0.
pub fn kappa_matrix(n: usize) -> Result<ComplexMatrix> {
    if n < 2 {
        return Err(Error::usage("kappa_matrix requires n >= 2"));
    }
    Ok(ShiftMatrix::new(n, C64::ZERO)?
        .to_matrix()
        .scale(C64::new(n as f64, 0.0)))
}

/// ∇_{∂/∂q} of CP^{n-1} at fixed u, as a matrix-valued function of q.
#[derive(Debug, Clone, Copy)]
pub struct QConnectionFamily {
    pub n: usize,
    pub u: C64,
}

pub fn build_cpn_q_connection(n: usize, u: C64) -> Result<QConnectionFamily> {
    if n < 2 {
        return Err(Error::usage("build_cpn_q_connection requires n >= 2"));
    }
    if u == C64::ZERO {
        return Err(Error::usage("build_cpn_q_connection requires u != 0"));
    }
    Ok(QConnectionFamily { n, u })
}

impl QConnectionFamily {
    /// −(qu)^{-1} Sh(n, q); domain error at q = 0.
    pub fn matrix_at(&self, q: C64) -> Result<ComplexMatrix> {
        if q == C64::ZERO {
            return Err(Error::domain("q-connection evaluated at q = 0"));
        }
        let sh = ShiftMatrix::new(self.n, q)?.to_matrix();
        Ok(sh.scale(-C64::ONE / (q * self.u)))
    }
}

/// Eigenvalues of A_{-2}, clustered with absolute tolerance `tol` and sorted
/// by (Re, Im).  Clusters closer than 2·tol to each other are refused: the
/// Stokes analysis downstream needs honestly distinct exponents.
pub fn exponent_eigenvalues_with_tol(
    conn: &MeromorphicConnection,
    tol: f64,
) -> Result<(Vec<C64>, Vec<usize>)> {
    let a = conn
        .term(-2)
        .ok_or_else(|| Error::usage("connection has no u^{-2} term"))?;
    let vals = a.eigenvalues()?;
    let mut sorted = vals;
    sorted.sort_by(|a, b| {
        (a.re, a.im)
            .partial_cmp(&(b.re, b.im))
            .expect("finite eigenvalues")
    });
    let mut reps: Vec<C64> = Vec::new();
    let mut mults: Vec<usize> = Vec::new();
    for v in sorted {
        match reps.iter().position(|r| (r - v).norm() <= tol) {
            Some(i) => {
                // running mean keeps the representative centered
                let m = mults[i] as f64;
                reps[i] = (reps[i] * m + v) / (m + 1.0);
                mults[i] += 1;
            }
            None => {
                reps.push(v);
                mults.push(1);
            }
        }
    }
    for i in 0..reps.len() {
        for j in (i + 1)..reps.len() {
            if (reps[i] - reps[j]).norm() < 2.0 * tol {
                return Err(Error::usage(format!(
                    "exponent collision below tolerance: {} vs {}",
                    reps[i], reps[j]
                )));
            }
        }
    }
    let mut order: Vec<usize> = (0..reps.len()).collect();
    order.sort_by(|&a, &b| {
        (reps[a].re, reps[a].im)
            .partial_cmp(&(reps[b].re, reps[b].im))
            .expect("finite eigenvalues")
    });
    Ok((
        order.iter().map(|&i| reps[i]).collect(),
        order.iter().map(|&i| mults[i]).collect(),
    ))
}

pub fn exponent_eigenvalues(conn: &MeromorphicConnection) -> Result<Vec<C64>> {
    Ok(exponent_eigenvalues_with_tol(conn, 1e-8)?.0)
}

/// Check [K, Gr] = −K for the classical κ-matrix K = A_{-2} of `conn`,
/// i.e. Gr·K − K·Gr = K entrywise within `tol`.
pub fn check_commutation(conn: &MeromorphicConnection, gr: &GradingOperator) -> Result<bool> {
    let k = conn
        .term(-2)
        .ok_or_else(|| Error::usage("connection has no u^{-2} term"))?;
    let g = gr.to_matrix();
    let lhs = g.mul(k).sub(&k.mul(&g));
    let scale = k.norm_max().max(1.0);
    Ok(lhs.sub(k).norm_max() <= DEFAULT_TOL * scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn cp1_connection_matrices() {
        let conn = build_cpn_u_connection(2, C64::ONE).unwrap();
        let a2 = conn.term(-2).unwrap();
        assert_eq!(a2.get(0, 0), C64::ZERO);
        assert_eq!(a2.get(0, 1), c(2.0, 0.0));
        assert_eq!(a2.get(1, 0), c(2.0, 0.0));
        assert_eq!(a2.get(1, 1), C64::ZERO);
        let a1 = conn.term(-1).unwrap();
        assert_eq!(a1.get(0, 0), c(-0.5, 0.0));
        assert_eq!(a1.get(1, 1), c(0.5, 0.0));
    }

    #[test]
    fn cp2_connection_matrices() {
        let q0 = c(0.3, -0.8);
        let conn = build_cpn_u_connection(3, q0).unwrap();
        let a2 = conn.term(-2).unwrap();
        assert_eq!(a2.get(0, 2), q0 * 3.0);
        assert_eq!(a2.get(1, 0), c(3.0, 0.0));
        assert_eq!(a2.get(2, 1), c(3.0, 0.0));
        assert_eq!(a2.get(0, 0), C64::ZERO);
        let a1 = conn.term(-1).unwrap();
        assert_eq!(a1.get(0, 0), c(-1.0, 0.0));
        assert_eq!(a1.get(1, 1), C64::ZERO);
        assert_eq!(a1.get(2, 2), c(1.0, 0.0));
    }

    #[test]
    fn classical_limit_is_strictly_triangular() {
        let conn = build_cpn_u_connection(2, C64::ZERO).unwrap();
        let a2 = conn.term(-2).unwrap();
        assert_eq!(a2.get(0, 1), C64::ZERO);
        assert_eq!(a2.get(1, 0), c(2.0, 0.0));
    }

    #[test]
    fn n_below_two_rejected() {
        assert!(build_cpn_u_connection(1, C64::ONE).is_err());
    }

    #[test]
    fn q_connection_values() {
        let fam = build_cpn_q_connection(2, c(-1.0, 0.0)).unwrap();
        let m = fam.matrix_at(C64::ONE).unwrap();
        assert_eq!(m.get(0, 1), C64::ONE);
        assert_eq!(m.get(1, 0), C64::ONE);

        let m4 = fam.matrix_at(c(4.0, 0.0)).unwrap();
        assert_eq!(m4.get(0, 1), C64::ONE);
        assert!((m4.get(1, 0) - c(0.25, 0.0)).norm() < 1e-15);

        assert!(fam.matrix_at(C64::ZERO).is_err());
    }

    #[test]
    fn q_connection_scales_inversely_in_u() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 2..5 {
            let u = c(rng.random::<f64>() + 0.5, rng.random::<f64>());
            let q = c(rng.random::<f64>() + 0.2, rng.random::<f64>());
            let m1 = build_cpn_q_connection(n, u).unwrap().matrix_at(q).unwrap();
            let m2 = build_cpn_q_connection(n, u * 2.0)
                .unwrap()
                .matrix_at(q)
                .unwrap();
            assert!(m1.scale(c(0.5, 0.0)).sub(&m2).norm_max() < 1e-14);
        }
    }

    #[test]
    fn shift_matrix_power_is_q_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for n in 1..=8usize {
            let q = c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let sh = ShiftMatrix::new(n, q).unwrap().to_matrix();
            let mut p = ComplexMatrix::identity(n);
            for _ in 0..n {
                p = p.mul(&sh);
            }
            let expect = ComplexMatrix::identity(n).scale(q);
            assert!(p.sub(&expect).norm_max() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn a_minus_two_is_n_times_shift() {
        for n in 2..6 {
            let q = c(0.7, 0.1);
            let conn = build_cpn_u_connection(n, q).unwrap();
            let sh = ShiftMatrix::new(n, q).unwrap().to_matrix();
            assert!(conn
                .term(-2)
                .unwrap()
                .sub(&sh.scale(c(n as f64, 0.0)))
                .norm_max()
                .eq(&0.0));
        }
    }

    #[test]
    fn exponents_cp1_q1() {
        let conn = build_cpn_u_connection(2, C64::ONE).unwrap();
        let e = exponent_eigenvalues(&conn).unwrap();
        assert_eq!(e.len(), 2);
        assert!((e[0] - c(-2.0, 0.0)).norm() < 1e-10);
        assert!((e[1] - c(2.0, 0.0)).norm() < 1e-10);
    }

    #[test]
    fn exponents_cp2_are_cube_roots() {
        let conn = build_cpn_u_connection(3, C64::ONE).unwrap();
        let e = exponent_eigenvalues(&conn).unwrap();
        assert_eq!(e.len(), 3);
        let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / 3.0);
        for j in 0..3 {
            let target = omega.powu(j) * 3.0;
            assert!(
                e.iter().any(|v| (v - target).norm() < 1e-10),
                "missing 3*omega^{j}"
            );
        }
    }

    #[test]
    fn exponents_formula_random_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for n in 2..=6usize {
            let q = C64::from_polar(rng.random::<f64>() + 0.5, rng.random::<f64>() * 3.0 - 1.5);
            let conn = build_cpn_u_connection(n, q).unwrap();
            let e = exponent_eigenvalues(&conn).unwrap();
            assert_eq!(e.len(), n);
            let root = q.powf(1.0 / n as f64);
            for j in 0..n {
                let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * j as f64 / n as f64);
                let target = root * omega * n as f64;
                assert!(
                    e.iter().any(|v| (v - target).norm() < 1e-10),
                    "n={n} missing branch {j}"
                );
            }
        }
    }

    #[test]
    fn nilpotent_classical_exponent() {
        let conn = build_cpn_u_connection(2, C64::ZERO).unwrap();
        let (e, m) = exponent_eigenvalues_with_tol(&conn, 1e-8).unwrap();
        assert_eq!(e.len(), 1);
        assert!(e[0].norm() < 1e-12);
        assert_eq!(m[0], 2);
    }

    #[test]
    fn missing_pole_term_rejected() {
        let conn = MeromorphicConnection::new(2, BTreeMap::new(), None).unwrap();
        assert!(exponent_eigenvalues(&conn).is_err());
    }

    #[test]
    fn commutation_relation_holds() {
        for n in [2usize, 5] {
            let conn = build_cpn_u_connection(n, C64::ZERO).unwrap();
            let gr = GradingOperator::cpn(n).unwrap();
            assert!(check_commutation(&conn, &gr).unwrap(), "n={n}");
        }
        // replacing Gr by the identity breaks it
        let conn = build_cpn_u_connection(3, C64::ZERO).unwrap();
        let id = GradingOperator::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(!check_commutation(&conn, &id).unwrap());
    }

    #[test]
    fn flatness_of_combined_connection() {
        // zero curvature: d_u A_q − d_q A_u + [A_u, A_q] = 0, with the
        // derivatives evaluated exactly
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        for n in 2..=5usize {
            let u = c(rng.random::<f64>() + 0.4, rng.random::<f64>() - 0.5);
            let q = c(rng.random::<f64>() + 0.4, rng.random::<f64>() - 0.5);
            let a_u = build_cpn_u_connection(n, q).unwrap().matrix_at(u).unwrap();
            let a_q = build_cpn_q_connection(n, u).unwrap().matrix_at(q).unwrap();
            // d/du [−(qu)^{-1} Sh(q)] = (qu^2)^{-1} Sh(q)
            let sh = ShiftMatrix::new(n, q).unwrap().to_matrix();
            let du_aq = sh.scale(C64::ONE / (q * u * u));
            // d/dq [u^{-2}(nN + nqE) + u^{-1}Gr] = u^{-2} n E
            let corner = ComplexMatrix::from_fn(n, n, |i, j| {
                if n > 1 && i == 0 && j == n - 1 {
                    c(n as f64, 0.0)
                } else if n == 1 {
                    c(n as f64, 0.0)
                } else {
                    C64::ZERO
                }
            });
            let dq_au = corner.scale(u.powi(-2));
            let comm = a_u.mul(&a_q).sub(&a_q.mul(&a_u));
            let resid = du_aq.sub(&dq_au).add(&comm).norm_max();
            assert!(resid < 1e-12, "curvature residual {resid} at n={n}");
        }
    }

    #[test]
    fn connection_json_round_trip() {
        let conn = build_cpn_u_connection(3, c(0.5, 0.25)).unwrap();
        let s = serde_json::to_string(&conn).unwrap();
        let back: MeromorphicConnection = serde_json::from_str(&s).unwrap();
        assert_eq!(back.rank, 3);
        assert!(back
            .term(-2)
            .unwrap()
            .sub(conn.term(-2).unwrap())
            .norm_max()
            .eq(&0.0));
        assert_eq!(back.meta.as_ref().unwrap().n, 3);
    }
}
