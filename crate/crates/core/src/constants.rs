//! Euler's constant, zeta values, and the Taylor expansion of log Γ(1+s).
//!
//! The table below is cross-checked once, at first use, against independent
//! oracles (Richardson-extrapolated harmonic sums for γ, direct summation
//! with an Euler-Maclaurin tail for ζ).  A mismatch beyond 1e-13 aborts the
//! process: these numbers feed every Γ-class computation downstream and a
//! silently wrong constant would corrupt all of them.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{TruncatedSeries, Var};

type C64 = Complex64;

/// γ = lim (H_n − ln n).
const EULER_GAMMA: f64 = 0.577215664901532860606512090082402431;

/// ζ(2) .. ζ(20).
const ZETA_TABLE: [f64; 19] = [
    1.644934066848226436472415166646025189,
    1.202056903159594285399738161511449991,
    1.082323233711138191516003696541167903,
    1.036927755143369926331365486457034168,
    1.017343061984449139714517929790920527,
    1.008349277381922826839797549849796759,
    1.004077356197944339378685238508652465,
    1.002008392826082214417852769232412060,
    1.000994575127818085337145958900319017,
    1.000494188604119464558702282526469936,
    1.000246086553308048298637998047739671,
    1.000122713347578489146751836526357395,
    1.000061248135058704829258545105135333,
    1.000030588236307020493551728510645062,
    1.000015282259408651871732571487636722,
    1.000007637197637899762273600293563029,
    1.000003817293264999839856461644621939,
    1.000001908212716553938925656957795101,
    1.000000953962033872796113152038683449,
];

const MAX_TABLE_K: u32 = 20;
const SELF_CHECK_TOL: f64 = 1e-13;

struct ConstantsTable;

static TABLE: OnceLock<ConstantsTable> = OnceLock::new();

fn table() -> &'static ConstantsTable {
    TABLE.get_or_init(|| {
        let report = self_check();
        if !report.passed {
            panic!(
                "constants self-check failed: gamma delta {:.3e}, worst zeta delta {:.3e}",
                report.gamma_delta, report.worst_zeta_delta
            );
        }
        ConstantsTable
    })
}

/// Outcome of checking the builtin table against the oracles.
#[derive(Debug, Clone, serde::Serialize)]
pub struct SelfCheckReport {
    pub gamma_delta: f64,
    pub worst_zeta_delta: f64,
    pub worst_zeta_k: u32,
    pub tolerance: f64,
    pub passed: bool,
}

/// Run the oracle comparison without touching the cached table.
pub fn self_check() -> SelfCheckReport {
    let gamma_delta = (EULER_GAMMA - oracle::euler_gamma_richardson()).abs();
    let mut worst = 0.0f64;
    let mut worst_k = 2;
    for k in 2..=MAX_TABLE_K {
        let delta = (ZETA_TABLE[(k - 2) as usize] - oracle::zeta_direct(k)).abs();
        if delta > worst {
            worst = delta;
            worst_k = k;
        }
    }
    SelfCheckReport {
        gamma_delta,
        worst_zeta_delta: worst,
        worst_zeta_k: worst_k,
        tolerance: SELF_CHECK_TOL,
        passed: gamma_delta <= SELF_CHECK_TOL && worst <= SELF_CHECK_TOL,
    }
}

pub fn euler_gamma() -> f64 {
    let _ = table();
    EULER_GAMMA
}

/// ζ(k) for integer k >= 2.  Table values up to k = 20, direct summation
/// beyond (already accurate to machine precision there).
pub fn zeta(k: u32) -> Result<f64> {
    if k < 2 {
        return Err(Error::usage("zeta requires k >= 2"));
    }
    let _ = table();
    if k <= MAX_TABLE_K {
        Ok(ZETA_TABLE[(k - 2) as usize])
    } else {
        Ok(oracle::zeta_direct(k))
    }
}

/// Taylor series of log Γ(1+s) at s = 0, truncated at `order`:
/// coeff(s) = −γ, coeff(s^k) = (−1)^k ζ(k)/k for k >= 2.
pub fn log_gamma_taylor(order: usize) -> Result<TruncatedSeries> {
    if order < 1 {
        return Err(Error::usage("log_gamma_taylor order must be >= 1"));
    }
    let mut coeffs = vec![C64::ZERO; order];
    if order >= 2 {
        coeffs[1] = C64::new(-euler_gamma(), 0.0);
    }
    for k in 2..order {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        coeffs[k] = C64::new(sign * zeta(k as u32)? / k as f64, 0.0);
    }
    TruncatedSeries::from_coeffs(Var::S, coeffs)
}

/// Independent numerical oracles.  These never read the builtin table; the
/// table is validated against them.
pub mod oracle {
    use super::C64;
    use std::f64::consts::PI;

    /// γ via H_n − ln n on n = 64·2^i, Richardson-extrapolated in 1/n.
    pub fn euler_gamma_richardson() -> f64 {
        const LEVELS: usize = 12;
        let mut t = [[0.0f64; LEVELS]; LEVELS];
        let mut h = 0.0f64;
        let mut comp = 0.0f64; // Kahan compensation
        let mut n = 0u64;
        for (i, row) in t.iter_mut().enumerate() {
            let target = 64u64 << i;
            while n < target {
                n += 1;
                let y = 1.0 / n as f64 - comp;
                let s = h + y;
                comp = (s - h) - y;
                h = s;
            }
            row[0] = h - (n as f64).ln();
        }
        for k in 1..LEVELS {
            let pow = 2.0f64.powi(k as i32);
            for i in 0..LEVELS - k {
                t[i][k] = (pow * t[i + 1][k - 1] - t[i][k - 1]) / (pow - 1.0);
            }
        }
        t[0][LEVELS - 1]
    }

    /// ζ(k) by direct summation to M = 400 with an Euler-Maclaurin tail.
    pub fn zeta_direct(k: u32) -> f64 {
        let kf = k as f64;
        const M: u64 = 400;
        let mut sum = 0.0f64;
        for j in (1..=M).rev() {
            sum += (j as f64).powf(-kf);
        }
        let m = M as f64;
        let tail = m.powf(1.0 - kf) / (kf - 1.0) - 0.5 * m.powf(-kf)
            + (kf / 12.0) * m.powf(-kf - 1.0)
            - (kf * (kf + 1.0) * (kf + 2.0) / 720.0) * m.powf(-kf - 3.0);
        sum + tail
    }

    const LANCZOS_G: f64 = 7.0;
    const LANCZOS_COEF: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];

    /// log Γ(z) for complex z, Lanczos approximation with reflection.
    pub fn ln_gamma_complex(z: C64) -> C64 {
        if z.re < 0.5 {
            // log Γ(z) = log(π / sin(πz)) − log Γ(1 − z)
            let pi_z = z * PI;
            return C64::new(PI, 0.0).ln() - pi_z.sin().ln() - ln_gamma_complex(C64::ONE - z);
        }
        let zm1 = z - C64::ONE;
        let mut acc = C64::new(LANCZOS_COEF[0], 0.0);
        for (i, &c) in LANCZOS_COEF.iter().enumerate().skip(1) {
            acc += C64::new(c, 0.0) / (zm1 + C64::new(i as f64, 0.0));
        }
        let t = zm1 + C64::new(LANCZOS_G + 0.5, 0.0);
        C64::new((2.0 * PI).sqrt(), 0.0).ln() + (zm1 + C64::new(0.5, 0.0)) * t.ln() - t + acc.ln()
    }

    pub fn ln_gamma_real(x: f64) -> f64 {
        ln_gamma_complex(C64::new(x, 0.0)).re
    }
}
