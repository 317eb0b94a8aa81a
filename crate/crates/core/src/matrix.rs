//! Dense complex matrices with the small set of factorizations the toolkit
//! needs: tolerant rank, eigenvalues, null spaces, least squares, and the two
//! exact matrix exponentials (nilpotent and diagonal).

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eig, LeastSquaresSvd, SVD};
use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::DEFAULT_TOL;

pub type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    data: Array2<C64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        ComplexMatrix {
            data: Array2::zeros((rows, cols)),
        }
    }

    pub fn identity(n: usize) -> Self {
        ComplexMatrix {
            data: Array2::eye(n),
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        ComplexMatrix {
            data: Array2::from_shape_fn((rows, cols), |(i, j)| f(i, j)),
        }
    }

    /// Row-major flat construction; errors if `entries` has the wrong length
    /// or contains non-finite values.
    pub fn from_rows(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::usage(format!(
                "matrix entries length {} != {}x{}",
                entries.len(),
                rows,
                cols
            )));
        }
        for z in entries {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::usage("non-finite matrix entry".to_string()));
            }
        }
        Ok(ComplexMatrix {
            data: Array2::from_shape_vec((rows, cols), entries.to_vec())
                .map_err(|e| Error::usage(e.to_string()))?,
        })
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        let n = diag.len();
        Self::from_fn(n, n, |i, j| if i == j { diag[i] } else { C64::ZERO })
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.data[(i, j)] = v;
    }

    pub fn array(&self) -> &Array2<C64> {
        &self.data
    }

    pub fn from_array(data: Array2<C64>) -> Self {
        ComplexMatrix { data }
    }

    pub fn column(&self, j: usize) -> Vec<C64> {
        self.data.column(j).to_vec()
    }

    pub fn mul(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.cols(), rhs.rows(), "matrix product shape mismatch");
        ComplexMatrix {
            data: self.data.dot(&rhs.data),
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols(), v.len(), "matrix-vector shape mismatch");
        let x = Array1::from_vec(v.to_vec());
        self.data.dot(&x).to_vec()
    }

    pub fn add(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data + &rhs.data,
        }
    }

    pub fn sub(&self, rhs: &ComplexMatrix) -> ComplexMatrix {
        ComplexMatrix {
            data: &self.data - &rhs.data,
        }
    }

    pub fn scale(&self, c: C64) -> ComplexMatrix {
        ComplexMatrix {
            data: self.data.mapv(|z| z * c),
        }
    }

    pub fn adjoint(&self) -> ComplexMatrix {
        ComplexMatrix {
            data: self.data.t().mapv(|z| z.conj()),
        }
    }

    pub fn transpose(&self) -> ComplexMatrix {
        ComplexMatrix {
            data: self.data.t().to_owned(),
        }
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hstack(blocks: &[&ComplexMatrix]) -> ComplexMatrix {
        let rows = blocks.first().map(|m| m.rows()).unwrap_or(0);
        let cols = blocks.iter().map(|m| m.cols()).sum();
        let mut out = ComplexMatrix::zeros(rows, cols);
        let mut off = 0;
        for b in blocks {
            assert_eq!(b.rows(), rows, "hstack row mismatch");
            for i in 0..rows {
                for j in 0..b.cols() {
                    out.set(i, off + j, b.get(i, j));
                }
            }
            off += b.cols();
        }
        out
    }

    pub fn vstack(blocks: &[&ComplexMatrix]) -> ComplexMatrix {
        let cols = blocks.first().map(|m| m.cols()).unwrap_or(0);
        let rows = blocks.iter().map(|m| m.rows()).sum();
        let mut out = ComplexMatrix::zeros(rows, cols);
        let mut off = 0;
        for b in blocks {
            assert_eq!(b.cols(), cols, "vstack col mismatch");
            for i in 0..b.rows() {
                for j in 0..cols {
                    out.set(off + i, j, b.get(i, j));
                }
            }
            off += b.rows();
        }
        out
    }

    /// Columns `sel` of `self`, in order.
    pub fn select_columns(&self, sel: &[usize]) -> ComplexMatrix {
        ComplexMatrix::from_fn(self.rows(), sel.len(), |i, j| self.get(i, sel[j]))
    }

    pub fn singular_values(&self) -> Result<Vec<f64>> {
        if self.rows() == 0 || self.cols() == 0 {
            return Ok(Vec::new());
        }
        let (_, s, _) = self
            .data
            .svd(false, false)
            .map_err(|e| Error::Linalg(e.to_string()))?;
        Ok(s.to_vec())
    }

    /// Number of singular values above `tol * sigma_max`; the zero matrix has
    /// rank 0.
    pub fn rank(&self, tol: f64) -> Result<usize> {
        if tol <= 0.0 {
            return Err(Error::usage("rank tolerance must be positive"));
        }
        let s = self.singular_values()?;
        let smax = s.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return Ok(0);
        }
        Ok(s.iter().filter(|&&x| x > tol * smax).count())
    }

    /// Orthonormal basis of the kernel (columns), via SVD.
    pub fn null_space(&self, tol: f64) -> Result<ComplexMatrix> {
        if self.cols() == 0 {
            return Ok(ComplexMatrix::zeros(0, 0));
        }
        if self.rows() == 0 {
            return Ok(ComplexMatrix::identity(self.cols()));
        }
        let (_, s, vh) = self
            .data
            .svd(false, true)
            .map_err(|e| Error::Linalg(e.to_string()))?;
        let vh = vh.expect("svd asked for V^H");
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let r = if smax == 0.0 {
            0
        } else {
            s.iter().filter(|&&x| x > tol * smax).count()
        };
        // kernel basis: conjugated rows r.. of V^H
        let k = self.cols() - r;
        Ok(ComplexMatrix::from_fn(self.cols(), k, |i, j| {
            vh[(r + j, i)].conj()
        }))
    }

    /// Orthonormal basis of the column space (columns), via SVD.
    pub fn column_space(&self, tol: f64) -> Result<ComplexMatrix> {
        if self.cols() == 0 || self.rows() == 0 {
            return Ok(ComplexMatrix::zeros(self.rows(), 0));
        }
        let (u, s, _) = self
            .data
            .svd(true, false)
            .map_err(|e| Error::Linalg(e.to_string()))?;
        let u = u.expect("svd asked for U");
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let r = if smax == 0.0 {
            0
        } else {
            s.iter().filter(|&&x| x > tol * smax).count()
        };
        Ok(ComplexMatrix::from_fn(self.rows(), r, |i, j| u[(i, j)]))
    }

    /// Orthonormal basis of the orthogonal complement of the column space.
    pub fn column_complement(&self, tol: f64) -> Result<ComplexMatrix> {
        if self.cols() == 0 || self.rows() == 0 {
            return Ok(ComplexMatrix::identity(self.rows()));
        }
        let (u, s, _) = self
            .data
            .svd(true, false)
            .map_err(|e| Error::Linalg(e.to_string()))?;
        let u = u.expect("svd asked for U");
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let r = if smax == 0.0 {
            0
        } else {
            s.iter().filter(|&&x| x > tol * smax).count()
        };
        let k = self.rows() - r;
        Ok(ComplexMatrix::from_fn(self.rows(), k, |i, j| u[(i, r + j)]))
    }

    /// Moore-Penrose pseudoinverse with relative cutoff `tol`.
    pub fn pinv(&self, tol: f64) -> Result<ComplexMatrix> {
        if self.rows() == 0 || self.cols() == 0 {
            return Ok(ComplexMatrix::zeros(self.cols(), self.rows()));
        }
        let (u, s, vh) = self
            .data
            .svd(true, true)
            .map_err(|e| Error::Linalg(e.to_string()))?;
        let u = u.expect("svd asked for U");
        let vh = vh.expect("svd asked for V^H");
        let smax = s.iter().cloned().fold(0.0, f64::max);
        let mut out = ComplexMatrix::zeros(self.cols(), self.rows());
        if smax == 0.0 {
            return Ok(out);
        }
        for (k, &sv) in s.iter().enumerate() {
            if sv > tol * smax {
                let inv = 1.0 / sv;
                for i in 0..self.cols() {
                    for j in 0..self.rows() {
                        let add = vh[(k, i)].conj() * u[(j, k)].conj() * inv;
                        let cur = out.get(i, j);
                        out.set(i, j, cur + add);
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn eigenvalues(&self) -> Result<Vec<C64>> {
        if !self.is_square() {
            return Err(Error::usage("eigenvalues of a non-square matrix"));
        }
        if self.rows() == 0 {
            return Ok(Vec::new());
        }
        let (vals, _) = self
            .data
            .eig()
            .map_err(|e| Error::Linalg(e.to_string()))?;
        Ok(vals.to_vec())
    }

    /// Minimum-norm least-squares solution of `self * x = b`.
    pub fn lstsq(&self, b: &[C64]) -> Result<Vec<C64>> {
        if b.len() != self.rows() {
            return Err(Error::usage("lstsq right-hand side length mismatch"));
        }
        if self.cols() == 0 {
            return Ok(Vec::new());
        }
        if self.rows() == 0 {
            return Ok(vec![C64::ZERO; self.cols()]);
        }
        let rhs = Array1::from_vec(b.to_vec());
        let sol = self
            .data
            .least_squares(&rhs)
            .map_err(|e| Error::Linalg(e.to_string()))?;
        Ok(sol.solution.to_vec())
    }

    /// Solve `self * x = b` for square well-conditioned systems (via lstsq).
    pub fn solve(&self, b: &[C64]) -> Result<Vec<C64>> {
        if !self.is_square() {
            return Err(Error::usage("solve requires a square matrix"));
        }
        self.lstsq(b)
    }

    /// Inverse of a square matrix; errors if numerically singular.
    pub fn inverse(&self, tol: f64) -> Result<ComplexMatrix> {
        if !self.is_square() {
            return Err(Error::usage("inverse of a non-square matrix"));
        }
        let n = self.rows();
        if self.rank(tol)? < n {
            return Err(Error::usage("matrix is singular to working precision"));
        }
        let mut cols = Vec::with_capacity(n);
        for j in 0..n {
            let mut e = vec![C64::ZERO; n];
            e[j] = C64::ONE;
            cols.push(self.solve(&e)?);
        }
        Ok(ComplexMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }

    pub fn determinant(&self) -> Result<C64> {
        // product of eigenvalues; adequate for the small well-separated
        // matrices this toolkit manipulates
        let vals = self.eigenvalues()?;
        Ok(vals.into_iter().product())
    }

    /// True when the spans of `self` and `other` coincide within `tol`.
    pub fn same_column_span(&self, other: &ComplexMatrix, tol: f64) -> Result<bool> {
        if self.rows() != other.rows() {
            return Ok(false);
        }
        let ra = self.rank(tol)?;
        let rb = other.rank(tol)?;
        if ra != rb {
            return Ok(false);
        }
        let joint = ComplexMatrix::hstack(&[self, other]).rank(tol)?;
        Ok(joint == ra)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpKind {
    Nilpotent,
    Diagonal,
}

/// Exact matrix exponential for the two shapes the quantum connection needs:
/// a nilpotent matrix (finite sum) or a diagonal matrix (entrywise exp).
/// The declared kind is checked and a usage error raised if it fails.
pub fn matrix_exp_poly(m: &ComplexMatrix, kind: ExpKind) -> Result<ComplexMatrix> {
    if !m.is_square() {
        return Err(Error::usage("matrix exponential of a non-square matrix"));
    }
    let n = m.rows();
    match kind {
        ExpKind::Nilpotent => {
            // M^n must vanish
            let mut p = m.clone();
            for _ in 1..n {
                p = p.mul(m);
            }
            let scale = m.norm_max().max(1.0).powi(n as i32);
            if n > 0 && p.norm_max() > 1e-9 * scale {
                return Err(Error::usage("matrix is not nilpotent of its dimension"));
            }
            let mut out = ComplexMatrix::identity(n);
            let mut term = ComplexMatrix::identity(n);
            let mut fact = 1.0;
            for k in 1..n {
                term = term.mul(m);
                fact *= k as f64;
                out = out.add(&term.scale(C64::new(1.0 / fact, 0.0)));
            }
            Ok(out)
        }
        ExpKind::Diagonal => {
            let mut off = 0.0f64;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        off = off.max(m.get(i, j).norm());
                    }
                }
            }
            if off > DEFAULT_TOL * m.norm_max().max(1.0) {
                return Err(Error::usage("matrix has nonzero off-diagonal entries"));
            }
            Ok(ComplexMatrix::from_fn(n, n, |i, j| {
                if i == j {
                    m.get(i, i).exp()
                } else {
                    C64::ZERO
                }
            }))
        }
    }
}

// --- serialization: {"rows":r,"cols":c,"entries":[[re,im],...]} row-major ---

impl Serialize for ComplexMatrix {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire {
            rows: usize,
            cols: usize,
            entries: Vec<[f64; 2]>,
        }
        let entries = self.data.iter().map(|z| [z.re, z.im]).collect();
        Wire {
            rows: self.rows(),
            cols: self.cols(),
            entries,
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for ComplexMatrix {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            rows: usize,
            cols: usize,
            entries: Vec<[f64; 2]>,
        }
        let w = Wire::deserialize(de)?;
        let entries: Vec<C64> = w.entries.iter().map(|e| C64::new(e[0], e[1])).collect();
        ComplexMatrix::from_rows(w.rows, w.cols, &entries).map_err(D::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
        ComplexMatrix::from_fn(rows, cols, |_, _| {
            c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        })
    }

    /// Random unitary via Gram-Schmidt on a random matrix.
    fn random_unitary(rng: &mut ChaCha8Rng, n: usize) -> ComplexMatrix {
        let m = random_matrix(rng, n, n);
        m.column_space(1e-12).unwrap()
    }

    #[test]
    fn exp_zero_is_identity() {
        let z = ComplexMatrix::zeros(3, 3);
        let e = matrix_exp_poly(&z, ExpKind::Nilpotent).unwrap();
        assert!(e.sub(&ComplexMatrix::identity(3)).norm_max() == 0.0);
        let e2 = matrix_exp_poly(&z, ExpKind::Diagonal).unwrap();
        assert!(e2.sub(&ComplexMatrix::identity(3)).norm_max() < 1e-15);
    }

    #[test]
    fn exp_nilpotent_two_by_two() {
        // N = [[0,0],[1,0]], exp(cN) = [[1,0],[c,1]]
        let cval = c(0.3, -1.1);
        let n = ComplexMatrix::from_rows(2, 2, &[C64::ZERO, C64::ZERO, C64::ONE, C64::ZERO])
            .unwrap()
            .scale(cval);
        let e = matrix_exp_poly(&n, ExpKind::Nilpotent).unwrap();
        assert_eq!(e.get(0, 0), C64::ONE);
        assert_eq!(e.get(1, 0), cval);
        assert_eq!(e.get(1, 1), C64::ONE);
    }

    #[test]
    fn exp_diagonal_log4() {
        // diag(-1/2, 1/2) * log 4 -> diag(1/2, 2)
        let l = 4.0f64.ln();
        let m = ComplexMatrix::diagonal(&[c(-0.5 * l, 0.0), c(0.5 * l, 0.0)]);
        let e = matrix_exp_poly(&m, ExpKind::Diagonal).unwrap();
        assert!((e.get(0, 0).re - 0.5).abs() < 1e-14);
        assert!((e.get(1, 1).re - 2.0).abs() < 1e-14);
    }

    #[test]
    fn exp_kind_mismatch_rejected() {
        let m = ComplexMatrix::identity(2);
        assert!(matrix_exp_poly(&m, ExpKind::Nilpotent).is_err());
        let n =
            ComplexMatrix::from_rows(2, 2, &[C64::ZERO, C64::ONE, C64::ZERO, C64::ZERO]).unwrap();
        assert!(matrix_exp_poly(&n, ExpKind::Diagonal).is_err());
    }

    #[test]
    fn exp_nilpotent_inverse_pair() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in 2..6 {
            let mut m = ComplexMatrix::zeros(n, n);
            for i in 1..n {
                for j in 0..i {
                    m.set(i, j, c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5));
                }
            }
            let e = matrix_exp_poly(&m, ExpKind::Nilpotent).unwrap();
            let einv = matrix_exp_poly(&m.scale(c(-1.0, 0.0)), ExpKind::Nilpotent).unwrap();
            let err = e.mul(&einv).sub(&ComplexMatrix::identity(n)).norm_max();
            assert!(err < 1e-12, "nilpotent exp inverse error {err}");
        }
    }

    #[test]
    fn rank_identity_and_proportional_rows() {
        let i3 = ComplexMatrix::identity(3);
        assert_eq!(i3.rank(1e-9).unwrap(), 3);
        let m = ComplexMatrix::from_rows(2, 2, &[c(1.0, 0.0), c(2.0, 0.0), c(2.0, 0.0), c(4.0, 0.0)])
            .unwrap();
        assert_eq!(m.rank(1e-9).unwrap(), 1);
        assert_eq!(ComplexMatrix::zeros(4, 3).rank(1e-9).unwrap(), 0);
    }

    #[test]
    fn rank_of_low_rank_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_matrix(&mut rng, 4, 2);
        let b = random_matrix(&mut rng, 2, 6);
        assert_eq!(a.mul(&b).rank(1e-9).unwrap(), 2);
    }

    #[test]
    fn rank_invariant_under_unitaries() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let r = rng.random_range(1..=4usize);
            let a = random_matrix(&mut rng, 5, r);
            let b = random_matrix(&mut rng, r, 5);
            let m = a.mul(&b);
            let u = random_unitary(&mut rng, 5);
            let v = random_unitary(&mut rng, 5);
            let m2 = u.mul(&m).mul(&v);
            assert_eq!(m.rank(1e-9).unwrap(), m2.rank(1e-9).unwrap());
        }
    }

    #[test]
    fn null_space_and_complement() {
        let m = ComplexMatrix::from_rows(2, 3, &[
            c(1.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(0.0, 0.0),
            c(1.0, 0.0),
            c(0.0, 0.0),
        ])
        .unwrap();
        let ns = m.null_space(1e-12).unwrap();
        assert_eq!(ns.cols(), 1);
        assert!(m.mul(&ns).norm_max() < 1e-12);
        let comp = m.transpose().column_complement(1e-12).unwrap();
        assert_eq!(comp.cols(), 1);
    }

    #[test]
    fn pinv_homotopy_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_matrix(&mut rng, 4, 3);
        let p = a.pinv(1e-12).unwrap();
        let apa = a.mul(&p).mul(&a);
        assert!(apa.sub(&a).norm_max() < 1e-10);
    }

    #[test]
    fn matrix_json_round_trip() {
        let m = ComplexMatrix::from_rows(2, 2, &[c(1.0, 2.0), c(0.0, 0.0), c(-1.0, 0.5), c(3.0, 0.0)])
            .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"rows\":2"));
        let back: ComplexMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(m, back);
    }
}
