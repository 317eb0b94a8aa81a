//! The Gamma-hat characteristic class of CP^{n-1} in the truncated ring
//! C[h]/(h^n), the (2πi)^k scaling operator, and their composition: the map
//! whose image of the rational cohomology lattice cuts out the rational
//! structure on flat sections.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::constants::log_gamma_taylor;
use crate::error::{Error, Result};
use crate::matrix::ComplexMatrix;
use crate::series::{TruncatedSeries, Var};

type C64 = Complex64;

/// An element of H^•(CP^{n-1}, C) = C[h]/(h^n); the coefficient of h^k is the
/// H^{2k} component.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CohomologyElement {
    series: TruncatedSeries,
}

impl CohomologyElement {
    pub fn from_series(series: TruncatedSeries) -> Result<Self> {
        if series.var() != Var::H {
            return Err(Error::usage("cohomology elements live in the h variable"));
        }
        Ok(CohomologyElement { series })
    }

    pub fn one(n: usize) -> Result<Self> {
        Ok(CohomologyElement {
            series: TruncatedSeries::one(Var::H, n)?,
        })
    }

    /// The hyperplane class h.
    pub fn hyperplane(n: usize) -> Result<Self> {
        Ok(CohomologyElement {
            series: TruncatedSeries::variable(Var::H, n)?,
        })
    }

    pub fn ring_dimension(&self) -> usize {
        self.series.order()
    }

    pub fn component(&self, k: usize) -> C64 {
        self.series.coeff(k)
    }

    pub fn components(&self) -> &[C64] {
        self.series.coeffs()
    }

    pub fn series(&self) -> &TruncatedSeries {
        &self.series
    }

    pub fn cup(&self, rhs: &CohomologyElement) -> Result<CohomologyElement> {
        Ok(CohomologyElement {
            series: self.series.mul(&rhs.series)?,
        })
    }

    fn is_nilpotent(&self) -> bool {
        self.series.coeff(0).norm() == 0.0
    }
}

/// Γ̂ from an explicit multiset of Chern roots: ∏ Γ(1 + λ_i) expanded in the
/// truncated ring of dimension `n`.  Roots must be nilpotent.
pub fn gamma_hat_from_roots(roots: &[CohomologyElement], n: usize) -> Result<CohomologyElement> {
    if n < 1 {
        return Err(Error::usage("ring dimension must be >= 1"));
    }
    let lg = log_gamma_taylor(n)?;
    let mut log_total = TruncatedSeries::zero(Var::H, n)?;
    for root in roots {
        if root.ring_dimension() != n {
            return Err(Error::usage("root lives in a different ring dimension"));
        }
        if !root.is_nilpotent() {
            return Err(Error::usage("Chern roots must have zero constant term"));
        }
        log_total = log_total.add(&lg.compose(root.series())?)?;
    }
    CohomologyElement::from_series(log_total.exp()?)
}

/// Γ̂(T CP^{n-1}) = Γ(1+h)^n, from [T_X] = n[O(1)] − [O].
pub fn gamma_hat_cpn(n: usize) -> Result<CohomologyElement> {
    if n < 1 {
        return Err(Error::usage("gamma_hat_cpn requires n >= 1"));
    }
    let h = CohomologyElement::hyperplane(n)?;
    gamma_hat_from_roots(&vec![h; n], n)
}

/// The operator multiplying H^{2k} by (2πi)^k, as a diagonal matrix in the
/// basis {1, h, .., h^{n-1}}.
pub fn d_operator(n: usize) -> Result<ComplexMatrix> {
    if n < 1 {
        return Err(Error::usage("d_operator requires n >= 1"));
    }
    let two_pi_i = C64::new(0.0, 2.0 * PI);
    let diag: Vec<C64> = (0..n).map(|k| two_pi_i.powu(k as u32)).collect();
    Ok(ComplexMatrix::diagonal(&diag))
}

/// Cup multiplication by `g` as a lower-triangular Toeplitz matrix in the
/// h-basis.
pub fn cup_matrix(g: &CohomologyElement) -> ComplexMatrix {
    let n = g.ring_dimension();
    ComplexMatrix::from_fn(n, n, |i, j| {
        if i >= j {
            g.component(i - j)
        } else {
            C64::ZERO
        }
    })
}

/// The lattice map: first the (2πi)^k rescaling, then cup product by Γ̂.
/// Lower triangular with determinant (2πi)^{n(n-1)/2}.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LatticeMap {
    pub n: usize,
    pub matrix: ComplexMatrix,
}

pub fn lattice_map(n: usize) -> Result<LatticeMap> {
    let gh = gamma_hat_cpn(n)?;
    let matrix = cup_matrix(&gh).mul(&d_operator(n)?);
    Ok(LatticeMap { n, matrix })
}
