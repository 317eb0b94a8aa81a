//! Finite-dimensional differential Z/2-graded Batalin-Vilkovisky algebras:
//! axiom verification, the freeness/degeneration test for H(A[u]/(u^N),
//! d + uΔ), Maurer-Cartan arcs, the coordinate change F(a) = u(exp(a/u) − 1),
//! and the order-by-order period map through a chosen splitting.
//!
//! The BV bracket is [a,b] = Δ(ab) − Δ(a)b − (−1)^{ε·|a|} aΔ(b), where ε is
//! the parity of Δ as an operator.  The paper's case is ε = 1; the finite
//! Grassmann contraction models have ε = 0, and all Koszul-sign rules below
//! are written for general homogeneous ε (they reduce to the usual ones at
//! ε = 1).

mod generators;
mod mixed;
mod splitting;

pub use generators::*;
pub use mixed::*;
pub use splitting::*;

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;

type C64 = Complex64;

/// Hard cap on ε truncation orders (factorial growth beyond).
pub const MAX_EPS_ORDER: usize = 6;
/// Hard cap on the u-window in either direction.
pub const MAX_U_WINDOW: i32 = 8;

/// A finite-dimensional Z/2-graded supercommutative unital algebra with two
/// distinguished operators d (order <= 1) and Δ (order <= 2).
#[derive(Debug, Clone)]
pub struct BVAlgebra {
    pub dim: usize,
    pub parity: Vec<u8>,
    pub unit: usize,
    /// mult[i][j] = list of (k, c): e_i e_j = Σ c e_k
    mult: Vec<Vec<Vec<(usize, C64)>>>,
    pub d: ComplexMatrix,
    pub delta: ComplexMatrix,
}

impl BVAlgebra {
    pub fn new(
        dim: usize,
        parity: Vec<u8>,
        unit: usize,
        mult: Vec<Vec<Vec<(usize, C64)>>>,
        d: ComplexMatrix,
        delta: ComplexMatrix,
    ) -> Result<Self> {
        if parity.len() != dim || unit >= dim {
            return Err(Error::usage("parity length or unit index out of range"));
        }
        if mult.len() != dim || mult.iter().any(|row| row.len() != dim) {
            return Err(Error::usage("mult table must be dim x dim"));
        }
        for row in &mult {
            for cell in row {
                for &(k, _) in cell {
                    if k >= dim {
                        return Err(Error::usage("mult target index out of range"));
                    }
                }
            }
        }
        for m in [&d, &delta] {
            if m.rows() != dim || m.cols() != dim {
                return Err(Error::usage("operator matrices must be dim x dim"));
            }
        }
        Ok(BVAlgebra {
            dim,
            parity,
            unit,
            mult,
            d,
            delta,
        })
    }

    pub fn mult_table(&self) -> &Vec<Vec<Vec<(usize, C64)>>> {
        &self.mult
    }

    pub fn basis_product(&self, i: usize, j: usize) -> &[(usize, C64)] {
        &self.mult[i][j]
    }

    /// Bilinear product of coefficient vectors.
    pub fn prod(&self, x: &[C64], y: &[C64]) -> Vec<C64> {
        let mut out = vec![C64::ZERO; self.dim];
        for (i, &xi) in x.iter().enumerate() {
            if xi == C64::ZERO {
                continue;
            }
            for (j, &yj) in y.iter().enumerate() {
                if yj == C64::ZERO {
                    continue;
                }
                for &(k, c) in &self.mult[i][j] {
                    out[k] += xi * yj * c;
                }
            }
        }
        out
    }

    pub fn apply_d(&self, x: &[C64]) -> Vec<C64> {
        self.d.mul_vec(x)
    }

    pub fn apply_delta(&self, x: &[C64]) -> Vec<C64> {
        self.delta.mul_vec(x)
    }

    pub fn unit_vec(&self) -> Vec<C64> {
        let mut e = vec![C64::ZERO; self.dim];
        e[self.unit] = C64::ONE;
        e
    }

    pub fn basis_vec(&self, i: usize) -> Vec<C64> {
        let mut e = vec![C64::ZERO; self.dim];
        e[i] = C64::ONE;
        e
    }

    /// Parity of an operator matrix: Some(0/1) if homogeneous, None if zero.
    /// Mixed-parity operators are a usage error.
    pub fn operator_parity(&self, m: &ComplexMatrix) -> Result<Option<u8>> {
        let mut found: Option<u8> = None;
        for r in 0..self.dim {
            for c in 0..self.dim {
                if m.get(r, c).norm() > 0.0 {
                    let p = (self.parity[r] + self.parity[c]) % 2;
                    match found {
                        None => found = Some(p),
                        Some(q) if q != p => {
                            return Err(Error::usage(
                                "operator is not parity-homogeneous".to_string(),
                            ))
                        }
                        _ => {}
                    }
                }
            }
        }
        Ok(found)
    }

    /// Parity ε of Δ; defaults to 1 (the odd case) when Δ = 0.
    pub fn delta_parity(&self) -> Result<u8> {
        Ok(self.operator_parity(&self.delta)?.unwrap_or(1))
    }

    /// BV bracket of a basis element with a vector.
    fn bracket_basis(&self, i: usize, y: &[C64], eps: u8) -> Vec<C64> {
        let x = self.basis_vec(i);
        let xy = self.prod(&x, y);
        let mut out = self.apply_delta(&xy);
        let dx_y = self.prod(&self.apply_delta(&x), y);
        let sign = if eps * self.parity[i] % 2 == 1 { -1.0 } else { 1.0 };
        let x_dy = self.prod(&x, &self.apply_delta(y));
        for k in 0..self.dim {
            out[k] -= dx_y[k];
            out[k] -= x_dy[k] * sign;
        }
        out
    }

    /// BV bracket [x, y], bilinear (x split into parity components).
    pub fn bracket(&self, x: &[C64], y: &[C64]) -> Result<Vec<C64>> {
        let eps = self.delta_parity()?;
        let mut out = vec![C64::ZERO; self.dim];
        for (i, &xi) in x.iter().enumerate() {
            if xi == C64::ZERO {
                continue;
            }
            let br = self.bracket_basis(i, y, eps);
            for k in 0..self.dim {
                out[k] += br[k] * xi;
            }
        }
        Ok(out)
    }
}

/// One itemized axiom violation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AxiomIssue {
    pub axiom: String,
    pub detail: String,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct AxiomReport {
    pub issues: Vec<AxiomIssue>,
}

impl AxiomReport {
    pub fn passed(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, axiom: &str, detail: String) {
        self.issues.push(AxiomIssue {
            axiom: axiom.to_string(),
            detail,
        });
    }
}

fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn vec_sub(a: &[C64], b: &[C64]) -> Vec<C64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Verify every structural axiom and itemize the failures: unitality,
/// supercommutativity, associativity, parity consistency, d(1) = Δ(1) = 0,
/// d² = Δ² = dΔ + Δd = 0, d a derivation, Δ of order <= 2 (the bracket is a
/// biderivation), and the graded Jacobi identity for the bracket.
pub fn check_bv_axioms(a: &BVAlgebra) -> Result<AxiomReport> {
    let mut report = AxiomReport::default();
    let tol = 1e-10;
    let n = a.dim;

    // parity of the multiplication
    for i in 0..n {
        for j in 0..n {
            for &(k, c) in a.basis_product(i, j) {
                if c.norm() > 0.0 && (a.parity[i] + a.parity[j]) % 2 != a.parity[k] {
                    report.push(
                        "mult-parity",
                        format!("e_{i} e_{j} hits e_{k} with inconsistent parity"),
                    );
                }
            }
        }
    }
    // unit
    for j in 0..n {
        let e = a.basis_vec(j);
        let left = a.prod(&a.unit_vec(), &e);
        let right = a.prod(&e, &a.unit_vec());
        if vec_norm(&vec_sub(&left, &e)) > tol || vec_norm(&vec_sub(&right, &e)) > tol {
            report.push("unit", format!("1 · e_{j} != e_{j}"));
        }
    }
    // supercommutativity
    for i in 0..n {
        for j in 0..n {
            let s = if a.parity[i] * a.parity[j] % 2 == 1 {
                -1.0
            } else {
                1.0
            };
            let ij = a.prod(&a.basis_vec(i), &a.basis_vec(j));
            let ji = a.prod(&a.basis_vec(j), &a.basis_vec(i));
            let dev: f64 = ij
                .iter()
                .zip(&ji)
                .map(|(x, y)| (x - y * s).norm())
                .fold(0.0, f64::max);
            if dev > tol {
                report.push("supercommutativity", format!("pair ({i},{j}) deviates {dev:.2e}"));
            }
        }
    }
    // associativity
    for i in 0..n {
        for j in 0..n {
            let ij = a.prod(&a.basis_vec(i), &a.basis_vec(j));
            for k in 0..n {
                let lhs = a.prod(&ij, &a.basis_vec(k));
                let jk = a.prod(&a.basis_vec(j), &a.basis_vec(k));
                let rhs = a.prod(&a.basis_vec(i), &jk);
                if vec_norm(&vec_sub(&lhs, &rhs)) > tol {
                    report.push("associativity", format!("triple ({i},{j},{k})"));
                }
            }
        }
    }
    // operator parity homogeneity
    for (name, m) in [("d", &a.d), ("delta", &a.delta)] {
        if a.operator_parity(m).is_err() {
            report.push("operator-parity", format!("{name} is not parity-homogeneous"));
        }
    }
    // d(1) = Δ(1) = 0
    if vec_norm(&a.apply_d(&a.unit_vec())) > tol {
        report.push("d-unit", "d(1) != 0".to_string());
    }
    if vec_norm(&a.apply_delta(&a.unit_vec())) > tol {
        report.push("delta-unit", "Δ(1) != 0".to_string());
    }
    // squares and anticommutator
    let dd = a.d.mul(&a.d);
    if dd.norm_max() > tol {
        report.push("d-squared", format!("|d²| = {:.2e}", dd.norm_max()));
    }
    let del2 = a.delta.mul(&a.delta);
    if del2.norm_max() > tol {
        report.push("delta-squared", format!("|Δ²| = {:.2e}", del2.norm_max()));
    }
    let anti = a.d.mul(&a.delta).add(&a.delta.mul(&a.d));
    if anti.norm_max() > tol {
        report.push(
            "anticommutator",
            format!("|dΔ + Δd| = {:.2e}", anti.norm_max()),
        );
    }
    // d is a derivation
    let pd = a.operator_parity(&a.d).unwrap_or(Some(1)).unwrap_or(1);
    for i in 0..n {
        for j in 0..n {
            let lhs = a.apply_d(&a.prod(&a.basis_vec(i), &a.basis_vec(j)));
            let mut rhs = a.prod(&a.apply_d(&a.basis_vec(i)), &a.basis_vec(j));
            let s = if pd * a.parity[i] % 2 == 1 { -1.0 } else { 1.0 };
            let other = a.prod(&a.basis_vec(i), &a.apply_d(&a.basis_vec(j)));
            for k in 0..n {
                rhs[k] += other[k] * s;
            }
            if vec_norm(&vec_sub(&lhs, &rhs)) > tol {
                report.push("d-derivation", format!("pair ({i},{j})"));
            }
        }
    }
    // Δ has order <= 2 iff the bracket is a biderivation:
    // [a, bc] = [a,b]c + (−1)^{(|a|+ε)|b|} b[a,c]
    let eps = a.delta_parity().unwrap_or(1);
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let bc = a.prod(&a.basis_vec(j), &a.basis_vec(k));
                let lhs = a.bracket(&a.basis_vec(i), &bc)?;
                let ab_c = a.prod(&a.bracket(&a.basis_vec(i), &a.basis_vec(j))?, &a.basis_vec(k));
                let s = if (a.parity[i] + eps) * a.parity[j] % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                let b_ac = a.prod(&a.basis_vec(j), &a.bracket(&a.basis_vec(i), &a.basis_vec(k))?);
                let mut rhs = ab_c;
                for t in 0..n {
                    rhs[t] += b_ac[t] * s;
                }
                if vec_norm(&vec_sub(&lhs, &rhs)) > tol {
                    report.push("bracket-biderivation", format!("triple ({i},{j},{k})"));
                }
            }
        }
    }
    // graded Jacobi with the ε-suspended parities
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                let lhs = a.bracket(&a.basis_vec(i), &a.bracket(&a.basis_vec(j), &a.basis_vec(k))?)?;
                let t1 = a.bracket(&a.bracket(&a.basis_vec(i), &a.basis_vec(j))?, &a.basis_vec(k))?;
                let s = if (a.parity[i] + eps) * (a.parity[j] + eps) % 2 == 1 {
                    -1.0
                } else {
                    1.0
                };
                let t2 = a.bracket(&a.basis_vec(j), &a.bracket(&a.basis_vec(i), &a.basis_vec(k))?)?;
                let mut rhs = t1;
                for t in 0..n {
                    rhs[t] += t2[t] * s;
                }
                if vec_norm(&vec_sub(&lhs, &rhs)) > tol {
                    report.push("bracket-jacobi", format!("triple ({i},{j},{k})"));
                }
            }
        }
    }
    Ok(report)
}

/// Row of the per-N degeneration report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DegenerationRow {
    pub n: usize,
    pub dim_h: usize,
    pub expected: usize,
    pub free: bool,
}

/// dim_C H(A,d) by rank.
pub fn cohomology_dim(a: &BVAlgebra) -> Result<usize> {
    let r = a.d.rank(1e-10)?;
    Ok(a.dim - 2 * r)
}

/// For each N <= n_max, compute dim_C H(A[u]/(u^N), d + uΔ) by rank of the
/// ND x ND differential and compare against N · dim_C H(A,d): equality is
/// freeness of the truncated cohomology module.
pub fn check_degeneration(a: &BVAlgebra, n_max: usize) -> Result<Vec<DegenerationRow>> {
    if n_max < 1 {
        return Err(Error::usage("check_degeneration requires Nmax >= 1"));
    }
    let h = cohomology_dim(a)?;
    let dd = a.dim;
    let mut rows = Vec::with_capacity(n_max);
    for n in 1..=n_max {
        let big = ComplexMatrix::from_fn(n * dd, n * dd, |r, c| {
            let (rb, ri) = (r / dd, r % dd);
            let (cb, ci) = (c / dd, c % dd);
            if rb == cb {
                a.d.get(ri, ci)
            } else if rb == cb + 1 {
                a.delta.get(ri, ci)
            } else {
                C64::ZERO
            }
        });
        let rank = big.rank(1e-10)?;
        let dim_h = n * dd - 2 * rank;
        rows.push(DegenerationRow {
            n,
            dim_h,
            expected: n * h,
            free: dim_h == n * h,
        });
    }
    Ok(rows)
}

/// A formal arc a(ε) = a_1 ε + .. + a_K ε^K with coefficients in A, all of
/// even algebra parity.
#[derive(Debug, Clone)]
pub struct FormalArc {
    pub coeffs: Vec<Vec<C64>>,
}

impl FormalArc {
    pub fn new(a: &BVAlgebra, coeffs: Vec<Vec<C64>>) -> Result<Self> {
        if coeffs.is_empty() || coeffs.len() > MAX_EPS_ORDER {
            return Err(Error::usage(format!(
                "arc order must be in 1..={MAX_EPS_ORDER}"
            )));
        }
        for (k, v) in coeffs.iter().enumerate() {
            if v.len() != a.dim {
                return Err(Error::usage(format!("arc coefficient {} has wrong length", k + 1)));
            }
            for (i, z) in v.iter().enumerate() {
                if z.norm() > 0.0 && a.parity[i] == 1 {
                    return Err(Error::usage(format!(
                        "arc coefficient {} has an odd component at basis {i}",
                        k + 1
                    )));
                }
            }
        }
        Ok(FormalArc { coeffs })
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }
}

/// Coefficients of ε^k in d a + ½[a, a], for k = 1..K.
pub fn maurer_cartan_residual(a: &BVAlgebra, arc: &FormalArc) -> Result<Vec<Vec<C64>>> {
    let k_max = arc.order();
    let mut out = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut r = a.apply_d(&arc.coeffs[k - 1]);
        for k1 in 1..k {
            let k2 = k - k1;
            let br = a.bracket(&arc.coeffs[k1 - 1], &arc.coeffs[k2 - 1])?;
            for t in 0..a.dim {
                r[t] += br[t] * 0.5;
            }
        }
        out.push(r);
    }
    Ok(out)
}

/// Max norm of the worst residual order.
pub fn maurer_cartan_max_residual(a: &BVAlgebra, arc: &FormalArc) -> Result<f64> {
    Ok(maurer_cartan_residual(a, arc)?
        .iter()
        .map(|v| vec_norm(v))
        .fold(0.0, f64::max))
}

/// Gauge action of λ(ε) ∈ εA[[ε]] (odd coefficients) on an arc:
/// a ↦ e^{ad_λ}(a) − Σ_{m>=0} ad_λ^m (dλ) / (m+1)!.
/// Nilpotent in ε, so the sums terminate at the truncation order.
pub fn gauge_transform(
    a: &BVAlgebra,
    arc: &FormalArc,
    lambda: &[Vec<C64>],
) -> Result<FormalArc> {
    let k_max = arc.order();
    if lambda.len() > k_max {
        return Err(Error::usage("gauge parameter has more orders than the arc"));
    }
    for v in lambda {
        if v.len() != a.dim {
            return Err(Error::usage("gauge parameter has wrong dimension"));
        }
        for (i, z) in v.iter().enumerate() {
            if z.norm() > 0.0 && a.parity[i] == 0 {
                return Err(Error::usage(
                    "gauge parameter must have odd components".to_string(),
                ));
            }
        }
    }
    // ε-series arithmetic on Vec<Vec<C64>> indexed by ε power 1..K
    let zero = vec![vec![C64::ZERO; a.dim]; k_max];
    let ad = |x: &Vec<Vec<C64>>| -> Result<Vec<Vec<C64>>> {
        // ad_λ(x)_k = Σ_{k1+k2=k} [x_{k1}, λ_{k2}]
        let mut out = zero.clone();
        for (k2, l) in lambda.iter().enumerate() {
            for k1 in 1..=k_max {
                let k = k1 + k2 + 1;
                if k > k_max {
                    continue;
                }
                let br = a.bracket(&x[k1 - 1], l)?;
                for t in 0..a.dim {
                    out[k - 1][t] += br[t];
                }
            }
        }
        Ok(out)
    };
    // e^{ad}(arc)
    let mut total: Vec<Vec<C64>> = arc.coeffs.clone();
    let mut term: Vec<Vec<C64>> = arc.coeffs.clone();
    let mut fact = 1.0;
    for m in 1..=k_max {
        term = ad(&term)?;
        fact *= m as f64;
        for k in 0..k_max {
            for t in 0..a.dim {
                total[k][t] += term[k][t] / fact;
            }
        }
    }
    // − Σ ad^m(dλ)/(m+1)!
    let mut dl = zero.clone();
    for (k2, l) in lambda.iter().enumerate() {
        let v = a.apply_d(l);
        for t in 0..a.dim {
            dl[k2][t] += v[t];
        }
    }
    let mut term = dl.clone();
    let mut fact = 1.0;
    for k in 0..k_max {
        for t in 0..a.dim {
            total[k][t] -= term[k][t];
        }
    }
    for m in 1..=k_max {
        term = ad(&term)?;
        fact *= (m + 1) as f64;
        for k in 0..k_max {
            for t in 0..a.dim {
                total[k][t] -= term[k][t] / fact;
            }
        }
    }
    FormalArc::new(a, total)
}

// --- serialization ---
// {"dim":D,"parity":[..],"unit":0,"mult":[[[ [k,[re,im]] ,..],..],..],
//  "d":matrix,"delta":matrix}

#[derive(Serialize, Deserialize)]
struct BVWire {
    dim: usize,
    parity: Vec<u8>,
    unit: usize,
    mult: Vec<Vec<Vec<(usize, [f64; 2])>>>,
    d: ComplexMatrix,
    delta: ComplexMatrix,
}

impl Serialize for BVAlgebra {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        let mult = self
            .mult
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| cell.iter().map(|&(k, c)| (k, [c.re, c.im])).collect())
                    .collect()
            })
            .collect();
        BVWire {
            dim: self.dim,
            parity: self.parity.clone(),
            unit: self.unit,
            mult,
            d: self.d.clone(),
            delta: self.delta.clone(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for BVAlgebra {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let w = BVWire::deserialize(de)?;
        let mult = w
            .mult
            .iter()
            .map(|row| {
                row.iter()
                    .map(|cell| {
                        cell.iter()
                            .map(|&(k, c)| (k, C64::new(c[0], c[1])))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        BVAlgebra::new(w.dim, w.parity, w.unit, mult, w.d, w.delta).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grassmann_contraction_passes_axioms() {
        let a = grassmann_with_contraction(2).unwrap();
        let report = check_bv_axioms(&a).unwrap();
        assert!(report.passed(), "{:?}", report.issues);
        // [θ_0, θ_1] = ±1
        let br = a.bracket(&a.basis_vec(1), &a.basis_vec(2)).unwrap();
        assert!((br[0].norm() - 1.0).abs() < 1e-12);
        for t in 1..a.dim {
            assert!(br[t].norm() < 1e-12);
        }
    }

    #[test]
    fn larger_grassmann_contraction_passes() {
        let a = grassmann_with_contraction(4).unwrap();
        let report = check_bv_axioms(&a).unwrap();
        assert!(report.passed(), "{:?}", report.issues);
    }

    #[test]
    fn first_order_delta_has_zero_bracket() {
        // Δ = ∂/∂θ_0 on Λ(θ_0, θ_1): order 1, all brackets vanish
        let a = grassmann_with_first_order_delta(2).unwrap();
        let report = check_bv_axioms(&a).unwrap();
        assert!(report.passed(), "{:?}", report.issues);
        for i in 0..a.dim {
            for j in 0..a.dim {
                let br = a.bracket(&a.basis_vec(i), &a.basis_vec(j)).unwrap();
                assert!(vec_norm(&br) < 1e-12, "bracket ({i},{j}) nonzero");
            }
        }
    }

    #[test]
    fn broken_associativity_reported() {
        let mut a = grassmann_with_contraction(2).unwrap();
        // perturb one structure constant
        a.mult[1][2].push((3, C64::new(0.1, 0.0)));
        let report = check_bv_axioms(&a).unwrap();
        assert!(!report.passed());
        assert!(report
            .issues
            .iter()
            .any(|i| i.axiom == "associativity" || i.axiom == "supercommutativity"));
    }

    #[test]
    fn koszul_family_passes_axioms() {
        let a = truncated_koszul(3, 2).unwrap();
        let report = check_bv_axioms(&a).unwrap();
        assert!(report.passed(), "{:?}", report.issues);
        assert_eq!(cohomology_dim(&a).unwrap(), 4);
    }

    #[test]
    fn degeneration_delta_zero_always_free() {
        for alg in [
            truncated_polynomial(3).unwrap(),
            truncated_koszul(3, 2).unwrap(),
            grassmann_plain(2).unwrap(),
        ] {
            let rows = check_degeneration(&alg, 4).unwrap();
            assert!(rows.iter().all(|r| r.free), "{rows:?}");
        }
    }

    #[test]
    fn degeneration_contraction_fails_at_two() {
        let a = grassmann_with_contraction(2).unwrap();
        let rows = check_degeneration(&a, 2).unwrap();
        assert!(rows[0].free); // N = 1 always free
        assert_eq!(rows[0].dim_h, 4);
        assert!(!rows[1].free);
        assert_eq!(rows[1].dim_h, 6);
        assert_eq!(rows[1].expected, 8);
    }

    #[test]
    fn degeneration_two_dim_odd_line() {
        // C[θ] with Δ = ∂/∂θ: free at N=1, dim 2 vs 4 at N=2
        let a = grassmann_with_first_order_delta(1).unwrap();
        let rows = check_degeneration(&a, 2).unwrap();
        assert!(rows[0].free);
        assert!(!rows[1].free);
        assert_eq!(rows[1].dim_h, 2);
        assert_eq!(rows[1].expected, 4);
    }

    #[test]
    fn mc_residual_abelian_is_zero() {
        let a = abelian_even(4).unwrap();
        let arc = FormalArc::new(&a, vec![a.basis_vec(1), a.basis_vec(2)]).unwrap();
        let res = maurer_cartan_max_residual(&a, &arc).unwrap();
        assert_eq!(res, 0.0);
    }

    #[test]
    fn mc_residual_contraction_top_class() {
        // a_1 = θ_0θ_1 in the contraction algebra: d = 0 but
        // ½[a_1, a_1] = −Δ(a_1)·a_1 = −a_1 (with Δ(θ_0θ_1) = 1), so the
        // order-2 residual is −a_1, not zero
        let a = grassmann_with_contraction(2).unwrap();
        let top = a.basis_vec(3);
        let arc = FormalArc::new(&a, vec![top.clone(), vec![C64::ZERO; a.dim]]).unwrap();
        let res = maurer_cartan_residual(&a, &arc).unwrap();
        assert!(vec_norm(&res[0]) < 1e-14, "order 1 must vanish (d = 0)");
        let expected: Vec<C64> = top.iter().map(|z| -z).collect();
        assert!(vec_norm(&vec_sub(&res[1], &expected)) < 1e-12);
    }

    #[test]
    fn mc_residual_generic_nonzero() {
        let a = grassmann_with_contraction(4).unwrap();
        // generic even element: mix of pairable two-forms
        let mut v = vec![C64::ZERO; a.dim];
        v[0b0011] = C64::new(1.0, 0.0);
        v[0b1100] = C64::new(0.7, -0.3);
        v[0b0101] = C64::new(-0.2, 0.4);
        let arc = FormalArc::new(&a, vec![v, vec![C64::ZERO; a.dim]]).unwrap();
        let res = maurer_cartan_residual(&a, &arc).unwrap();
        assert!(vec_norm(&res[1]) > 1e-3, "expected nonzero order-2 residual");
    }

    #[test]
    fn odd_arc_rejected() {
        let a = grassmann_with_contraction(2).unwrap();
        assert!(FormalArc::new(&a, vec![a.basis_vec(1)]).is_err());
    }

    #[test]
    fn bv_json_round_trip() {
        let a = grassmann_with_contraction(2).unwrap();
        let s = serde_json::to_string(&a).unwrap();
        let back: BVAlgebra = serde_json::from_str(&s).unwrap();
        assert_eq!(back.dim, a.dim);
        assert_eq!(back.parity, a.parity);
        assert!(check_bv_axioms(&back).unwrap().passed());
    }
}
