//! Truncated power series in one nilpotent variable (`x^N = 0`) and a small
//! Laurent companion used by the Mellin-type expansions.

use num_complex::Complex64;
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

type C64 = Complex64;

/// Symbol tag for the single series variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Var {
    H,
    S,
    U,
    Eps,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::H => "h",
            Var::S => "s",
            Var::U => "u",
            Var::Eps => "eps",
        }
    }

    fn parse(s: &str) -> Option<Var> {
        match s {
            "h" => Some(Var::H),
            "s" => Some(Var::S),
            "u" => Some(Var::U),
            "eps" | "ε" => Some(Var::Eps),
            _ => None,
        }
    }
}

/// Complex coefficients of `x^0 .. x^{N-1}` with the relation `x^N = 0`.
/// The order is fixed at construction; operations never extend it.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries {
    var: Var,
    coeffs: Vec<C64>,
}

impl TruncatedSeries {
    pub fn zero(var: Var, order: usize) -> Result<Self> {
        if order == 0 {
            return Err(Error::usage("series order must be positive"));
        }
        Ok(TruncatedSeries {
            var,
            coeffs: vec![C64::ZERO; order],
        })
    }

    pub fn one(var: Var, order: usize) -> Result<Self> {
        let mut s = Self::zero(var, order)?;
        s.coeffs[0] = C64::ONE;
        Ok(s)
    }

    /// The variable itself, `x`; requires order >= 2 to be distinguishable
    /// from zero.
    pub fn variable(var: Var, order: usize) -> Result<Self> {
        let mut s = Self::zero(var, order)?;
        if order >= 2 {
            s.coeffs[1] = C64::ONE;
        }
        Ok(s)
    }

    pub fn from_coeffs(var: Var, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::usage("series order must be positive"));
        }
        for z in &coeffs {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::usage("non-finite series coefficient"));
            }
        }
        Ok(TruncatedSeries { var, coeffs })
    }

    pub fn var(&self) -> Var {
        self.var
    }

    pub fn order(&self) -> usize {
        self.coeffs.len()
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or(C64::ZERO)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    fn check_compatible(&self, rhs: &TruncatedSeries) -> Result<()> {
        if self.var != rhs.var {
            return Err(Error::usage(format!(
                "series variable mismatch: {} vs {}",
                self.var.name(),
                rhs.var.name()
            )));
        }
        if self.order() != rhs.order() {
            return Err(Error::usage(format!(
                "series order mismatch: {} vs {}",
                self.order(),
                rhs.order()
            )));
        }
        Ok(())
    }

    pub fn add(&self, rhs: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.check_compatible(rhs)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&rhs.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(TruncatedSeries {
            var: self.var,
            coeffs,
        })
    }

    pub fn sub(&self, rhs: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.add(&rhs.scale(C64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, c: C64) -> TruncatedSeries {
        TruncatedSeries {
            var: self.var,
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    /// Cauchy product truncated at the common order.
    pub fn mul(&self, rhs: &TruncatedSeries) -> Result<TruncatedSeries> {
        self.check_compatible(rhs)?;
        let n = self.order();
        let mut coeffs = vec![C64::ZERO; n];
        for i in 0..n {
            if self.coeffs[i] == C64::ZERO {
                continue;
            }
            for j in 0..n - i {
                coeffs[i + j] += self.coeffs[i] * rhs.coeffs[j];
            }
        }
        Ok(TruncatedSeries {
            var: self.var,
            coeffs,
        })
    }

    /// exp via the finite sum; requires zero constant term.
    pub fn exp(&self) -> Result<TruncatedSeries> {
        if self.coeff(0).norm() != 0.0 {
            return Err(Error::usage(
                "series exp requires zero constant term".to_string(),
            ));
        }
        let n = self.order();
        let mut out = TruncatedSeries::one(self.var, n)?;
        let mut term = TruncatedSeries::one(self.var, n)?;
        let mut fact = 1.0;
        for k in 1..n {
            term = term.mul(self)?;
            fact *= k as f64;
            out = out.add(&term.scale(C64::new(1.0 / fact, 0.0)))?;
        }
        Ok(out)
    }

    /// log via the alternating sum; requires constant term 1.
    pub fn log(&self) -> Result<TruncatedSeries> {
        if (self.coeff(0) - C64::ONE).norm() != 0.0 {
            return Err(Error::usage(
                "series log requires constant term 1".to_string(),
            ));
        }
        let n = self.order();
        let x = self.sub(&TruncatedSeries::one(self.var, n)?)?;
        let mut out = TruncatedSeries::zero(self.var, n)?;
        let mut term = TruncatedSeries::one(self.var, n)?;
        for k in 1..n {
            term = term.mul(&x)?;
            let sign = if k % 2 == 1 { 1.0 } else { -1.0 };
            out = out.add(&term.scale(C64::new(sign / k as f64, 0.0)))?;
        }
        Ok(out)
    }

    /// Substitute a nilpotent series `g` (zero constant term) for the
    /// variable.  The result lives in `g`'s ring.
    pub fn compose(&self, g: &TruncatedSeries) -> Result<TruncatedSeries> {
        if g.coeff(0).norm() != 0.0 {
            return Err(Error::usage(
                "series composition requires zero constant inner term".to_string(),
            ));
        }
        let n = g.order();
        let mut out = TruncatedSeries::zero(g.var, n)?;
        out.coeffs[0] = self.coeff(0);
        let mut power = TruncatedSeries::one(g.var, n)?;
        for k in 1..self.order() {
            power = power.mul(g)?;
            out = out.add(&power.scale(self.coeff(k)))?;
        }
        Ok(out)
    }

    /// Horner evaluation at a complex point.
    pub fn eval(&self, x: C64) -> C64 {
        let mut acc = C64::ZERO;
        for &c in self.coeffs.iter().rev() {
            acc = acc * x + c;
        }
        acc
    }
}

/// `series_mul` by the spec's flat name.
pub fn series_mul(a: &TruncatedSeries, b: &TruncatedSeries) -> Result<TruncatedSeries> {
    a.mul(b)
}

pub fn series_exp(a: &TruncatedSeries) -> Result<TruncatedSeries> {
    a.exp()
}

pub fn series_log(a: &TruncatedSeries) -> Result<TruncatedSeries> {
    a.log()
}

/// Laurent series with finitely many stored coefficients from `x^{min_degree}`
/// upward.  Only the few operations the psi expansions need.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentSeries {
    var: Var,
    min_degree: i32,
    coeffs: Vec<C64>,
}

impl LaurentSeries {
    pub fn new(var: Var, min_degree: i32, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::usage("laurent series needs at least one coefficient"));
        }
        for z in &coeffs {
            if !z.re.is_finite() || !z.im.is_finite() {
                return Err(Error::usage("non-finite laurent coefficient"));
            }
        }
        Ok(LaurentSeries {
            var,
            min_degree,
            coeffs,
        })
    }

    /// Shift a truncated series down by `shift` powers: `x^{-shift} * t`.
    pub fn from_truncated(t: &TruncatedSeries, shift: i32) -> Self {
        LaurentSeries {
            var: t.var(),
            min_degree: -shift,
            coeffs: t.coeffs().to_vec(),
        }
    }

    pub fn var(&self) -> Var {
        self.var
    }

    pub fn min_degree(&self) -> i32 {
        self.min_degree
    }

    pub fn max_degree(&self) -> i32 {
        self.min_degree + self.coeffs.len() as i32 - 1
    }

    pub fn coeff(&self, k: i32) -> C64 {
        if k < self.min_degree || k > self.max_degree() {
            C64::ZERO
        } else {
            self.coeffs[(k - self.min_degree) as usize]
        }
    }

    pub fn scale(&self, c: C64) -> LaurentSeries {
        LaurentSeries {
            var: self.var,
            min_degree: self.min_degree,
            coeffs: self.coeffs.iter().map(|z| z * c).collect(),
        }
    }

    /// Product, truncated to the window implied by the stored coefficients of
    /// both factors.
    pub fn mul(&self, rhs: &LaurentSeries) -> Result<LaurentSeries> {
        if self.var != rhs.var {
            return Err(Error::usage("laurent variable mismatch"));
        }
        let min = self.min_degree + rhs.min_degree;
        let max = self.max_degree() + rhs.max_degree();
        let len = (max - min + 1) as usize;
        let mut coeffs = vec![C64::ZERO; len];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (j, &b) in rhs.coeffs.iter().enumerate() {
                coeffs[i + j] += a * b;
            }
        }
        Ok(LaurentSeries {
            var: self.var,
            min_degree: min,
            coeffs,
        })
    }
}

// --- serialization: {"var":"s","order":N,"coeffs":[[re,im],...]} ---

impl Serialize for TruncatedSeries {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            var: &'a str,
            order: usize,
            coeffs: Vec<[f64; 2]>,
        }
        Wire {
            var: self.var.name(),
            order: self.order(),
            coeffs: self.coeffs.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for TruncatedSeries {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            var: String,
            order: usize,
            coeffs: Vec<[f64; 2]>,
        }
        let w = Wire::deserialize(de)?;
        let var = Var::parse(&w.var)
            .ok_or_else(|| D::Error::custom(format!("unknown series variable '{}'", w.var)))?;
        if w.coeffs.len() != w.order {
            return Err(D::Error::custom("series coeffs length != order"));
        }
        let coeffs = w.coeffs.iter().map(|e| C64::new(e[0], e[1])).collect();
        TruncatedSeries::from_coeffs(var, coeffs).map_err(D::Error::custom)
    }
}

impl Serialize for LaurentSeries {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        #[derive(Serialize)]
        struct Wire<'a> {
            var: &'a str,
            min_degree: i32,
            coeffs: Vec<[f64; 2]>,
        }
        Wire {
            var: self.var.name(),
            min_degree: self.min_degree,
            coeffs: self.coeffs.iter().map(|z| [z.re, z.im]).collect(),
        }
        .serialize(ser)
    }
}

impl<'de> Deserialize<'de> for LaurentSeries {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Wire {
            var: String,
            min_degree: i32,
            coeffs: Vec<[f64; 2]>,
        }
        let w = Wire::deserialize(de)?;
        let var = Var::parse(&w.var)
            .ok_or_else(|| D::Error::custom(format!("unknown series variable '{}'", w.var)))?;
        let coeffs = w.coeffs.iter().map(|e| C64::new(e[0], e[1])).collect();
        LaurentSeries::new(var, w.min_degree, coeffs).map_err(D::Error::custom)
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

    #[test]
    fn difference_of_squares_truncates() {
        let a = TruncatedSeries::from_coeffs(Var::H, vec![C64::ONE, C64::ONE]).unwrap();
        let b = TruncatedSeries::from_coeffs(Var::H, vec![C64::ONE, -C64::ONE]).unwrap();
        let p = series_mul(&a, &b).unwrap();
        assert_eq!(p.coeff(0), C64::ONE);
        assert_eq!(p.coeff(1), C64::ZERO);
    }

    #[test]
    fn unit_law() {
        for order in 2..6 {
            let one = TruncatedSeries::one(Var::S, order).unwrap();
            let x = TruncatedSeries::variable(Var::S, order).unwrap();
            assert_eq!(series_mul(&one, &x).unwrap(), x);
        }
    }

    #[test]
    fn exp_times_exp_neg_is_one() {
        // (1 + s + s^2/2)(1 - s + s^2/2) = 1 at order 3
        let a = TruncatedSeries::from_coeffs(Var::S, vec![C64::ONE, C64::ONE, c(0.5, 0.0)]).unwrap();
        let b =
            TruncatedSeries::from_coeffs(Var::S, vec![C64::ONE, -C64::ONE, c(0.5, 0.0)]).unwrap();
        let p = series_mul(&a, &b).unwrap();
        assert!((p.coeff(0) - C64::ONE).norm() < 1e-15);
        assert!(p.coeff(1).norm() < 1e-15);
        assert!(p.coeff(2).norm() < 1e-15);
    }

    #[test]
    fn mismatched_inputs_rejected() {
        let a = TruncatedSeries::one(Var::S, 3).unwrap();
        let b = TruncatedSeries::one(Var::H, 3).unwrap();
        assert!(series_mul(&a, &b).is_err());
        let d = TruncatedSeries::one(Var::S, 4).unwrap();
        assert!(series_mul(&a, &d).is_err());
    }

    #[test]
    fn exp_log_inverse_pair() {
        let s = TruncatedSeries::variable(Var::S, 5).unwrap();
        let back = series_log(&series_exp(&s).unwrap()).unwrap();
        for k in 0..5 {
            let expect = if k == 1 { C64::ONE } else { C64::ZERO };
            assert!((back.coeff(k) - expect).norm() < 1e-14);
        }
        assert!((series_exp(&TruncatedSeries::zero(Var::S, 4).unwrap())
            .unwrap()
            .coeff(0)
            - C64::ONE)
            .norm()
            .abs()
            < 1e-15);
    }

    #[test]
    fn exp_preconditions() {
        let one = TruncatedSeries::one(Var::S, 3).unwrap();
        assert!(series_exp(&one).is_err());
        let zero = TruncatedSeries::zero(Var::S, 3).unwrap();
        assert!(series_log(&zero).is_err());
    }

    #[test]
    fn mul_associative_commutative_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let order = rng.random_range(2..8usize);
            let mk = |rng: &mut ChaCha8Rng| {
                TruncatedSeries::from_coeffs(
                    Var::S,
                    (0..order)
                        .map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
                        .collect(),
                )
                .unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let d = mk(&mut rng);
            let ab_d = a.mul(&b).unwrap().mul(&d).unwrap();
            let a_bd = a.mul(&b.mul(&d).unwrap()).unwrap();
            let ba = b.mul(&a).unwrap();
            let ab = a.mul(&b).unwrap();
            for k in 0..order {
                assert!((ab_d.coeff(k) - a_bd.coeff(k)).norm() < 1e-14);
                assert!((ab.coeff(k) - ba.coeff(k)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn laurent_shift_and_mul() {
        // s^{-2} * (1 + s) times s * (2) = 2 s^{-1} + 2
        let t = TruncatedSeries::from_coeffs(Var::S, vec![C64::ONE, C64::ONE]).unwrap();
        let a = LaurentSeries::from_truncated(&t, 2);
        let b = LaurentSeries::new(Var::S, 1, vec![c(2.0, 0.0)]).unwrap();
        let p = a.mul(&b).unwrap();
        assert_eq!(p.coeff(-1), c(2.0, 0.0));
        assert_eq!(p.coeff(0), c(2.0, 0.0));
        assert_eq!(p.coeff(-2), C64::ZERO);
    }

    #[test]
    fn series_json_round_trip() {
        let s = TruncatedSeries::from_coeffs(Var::H, vec![C64::ONE, c(0.0, -2.0)]).unwrap();
        let txt = serde_json::to_string(&s).unwrap();
        assert!(txt.contains("\"var\":\"h\""));
        let back: TruncatedSeries = serde_json::from_str(&txt).unwrap();
        assert_eq!(s, back);
    }
}
